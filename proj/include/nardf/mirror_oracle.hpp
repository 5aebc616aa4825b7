#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "nardf/common.hpp"
#include "nardf/joint_law.hpp"
#include "nardf/rng.hpp"

namespace nardf {

// ============================================================================
// Independent convex-optimization check for the tilted-kernel fixed point.
//
// Minimizes the Lagrangian
//
//   J(q) = I(X^n -> Y^n) - s * E[ sum_i rho(X_i, Y_i) ],   s <= 0,
//
// over the product of simplices formed by all rows of all per-step causal
// kernels q_i(y_i | y^{i-1}, x^i), by mirror descent (multiplicative
// exponentiated-gradient updates) with backtracking on the step size and
// multiple random restarts.  The code shares only the joint-law plumbing
// with the fixed-point solver; the update rule and the optimum it finds are
// arrived at independently.
// ============================================================================

struct OracleOptions {
    int restarts = 16;
    int max_iter = 200000;
    double tol = 1e-15;        // relative objective stall threshold
    int stall_limit = 400;     // consecutive stalled iterations before stopping
    double kkt_tol = 1e-9;     // first-order optimality residual target
    int kick_limit = 8;        // rounds of uniform-nudge escape per restart
    std::uint64_t seed = 0x6f7261636c65ull;  // stream id for restart draws
};

struct OracleResult {
    RateDistortionPoint point;       // from the best restart
    double objective = 0.0;          // best total Lagrangian value (nats)
    double restart_spread = 0.0;     // max - min of final objectives
    std::vector<double> restart_objectives;
};

namespace detail {

constexpr double kKernelFloor = 1e-30;

inline void decode_digits(std::size_t index, int length, int alphabet, int* out) {
    for (int j = length - 1; j >= 0; --j) {
        out[j] = static_cast<int>(index % static_cast<std::size_t>(alphabet));
        index /= static_cast<std::size_t>(alphabet);
    }
}

// One pass over the full-horizon joint law: returns the Lagrangian value and,
// if grad != nullptr, accumulates dJ/dq there.  By Danskin's theorem the
// output-marginal kernels m are held at their induced values while
// differentiating; the remaining row-constant term P(x^i = g, y^{i-1} = h)
// cancels under the multiplicative update's row normalization and is dropped.
// When row_mass != nullptr it receives the probability of each row's
// conditioning event P(y^{i-1} = h, x^i = g).
inline double lagrangian_scan(const FiniteMarkovSource& source, const DistortionSpec& rho,
                              double s, const ReproductionPolicy& policy,
                              std::vector<Eigen::MatrixXd>* grad,
                              std::vector<Eigen::VectorXd>* row_mass = nullptr) {
    const int n = source.horizon;
    const int nx = source.alphabet_size_x;
    const int ny = policy.alphabet_y();
    const JointLaw joint(source, policy);
    const MarginalReproduction marg = joint.marginals();
    const Eigen::VectorXd& full = joint.level(n);

    if (grad) {
        grad->clear();
        for (int i = 0; i <= n; ++i)
            grad->push_back(Eigen::MatrixXd::Zero(policy.kernel(i).rows(), ny));
    }
    if (row_mass) {
        row_mass->clear();
        for (int i = 0; i <= n; ++i)
            row_mass->push_back(Eigen::VectorXd::Zero(policy.kernel(i).rows()));
    }

    const std::size_t x_seqs = int_pow(nx, n + 1);
    const std::size_t y_seqs = int_pow(ny, n + 1);
    int xd[kMaxPolicyHorizon + 1];
    int yd[kMaxPolicyHorizon + 1];
    double cost[kMaxPolicyHorizon + 1];      // ln(q_j/m_j) - s rho_j per step
    double ratio[kMaxPolicyHorizon + 1];     // p_cell / q_j per step
    Eigen::Index row_of[kMaxPolicyHorizon + 1];

    double objective = 0.0;
    for (std::size_t xg = 0; xg < x_seqs; ++xg) {
        decode_digits(xg, n + 1, nx, xd);
        for (std::size_t yg = 0; yg < y_seqs; ++yg) {
            const double p = full[static_cast<Eigen::Index>(xg * y_seqs + yg)];
            if (p <= 0.0) continue;
            decode_digits(yg, n + 1, ny, yd);
            std::size_t y_pref = 0;
            std::size_t x_pref = 0;
            double cell_cost = 0.0;
            for (int j = 0; j <= n; ++j) {
                x_pref = ReproductionPolicy::fold(x_pref, xd[j], nx);
                const Eigen::Index row = static_cast<Eigen::Index>(
                    y_pref * policy.x_history_count(j) + x_pref);
                const double q = std::max(policy.kernel(j)(row, yd[j]), kKernelFloor);
                const double m = std::max(
                    marg.tables[static_cast<std::size_t>(j)](
                        static_cast<Eigen::Index>(y_pref), yd[j]),
                    kKernelFloor);
                cost[j] = std::log(q / m) - s * rho.letter(xd[j], yd[j]);
                ratio[j] = p / q;
                row_of[j] = row;
                cell_cost += cost[j];
                y_pref = ReproductionPolicy::fold(y_pref, yd[j], ny);
            }
            objective += p * cell_cost;
            if (grad) {
                double suffix = 0.0;
                for (int j = n; j >= 0; --j) {
                    suffix += cost[j];
                    (*grad)[static_cast<std::size_t>(j)](row_of[j], yd[j]) +=
                        ratio[j] * suffix;
                }
            }
            if (row_mass)
                for (int j = 0; j <= n; ++j)
                    (*row_mass)[static_cast<std::size_t>(j)](row_of[j]) += p;
        }
    }
    return objective;
}

// Rescale each gradient row by the inverse probability of its conditioning
// event.  Raw derivatives scale with that probability, so rows conditioned on
// rarely visited histories see vanishing gradients and calibrate arbitrarily
// slowly; dividing by the event mass turns every entry into a conditional
// price of the same order, which makes the descent's effective step size (and
// the first-order residual) uniform across rows.  Rows never reached under
// the current policy have a zero gradient, so the floor only guards the
// division itself.
inline void condition_gradient(std::vector<Eigen::MatrixXd>& grad,
                               const std::vector<Eigen::VectorXd>& row_mass) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        for (Eigen::Index r = 0; r < grad[i].rows(); ++r)
            grad[i].row(r) /= std::max(row_mass[i](r), 1e-300);
}

// First-order optimality residual over the product of simplices.  For each
// row with weighted mean gradient nu: coordinates carrying mass must see a
// gradient equal to nu (interior stationarity); coordinates at the floor must
// not see a gradient below nu (otherwise mass wants to flow back and the
// point is not optimal).
inline double kkt_residual(const ReproductionPolicy& policy,
                           const std::vector<Eigen::MatrixXd>& grad) {
    double residual = 0.0;
    for (int i = 0; i <= policy.horizon(); ++i) {
        const Eigen::MatrixXd& kernel = policy.kernel(i);
        const Eigen::MatrixXd& g = grad[static_cast<std::size_t>(i)];
        for (Eigen::Index r = 0; r < kernel.rows(); ++r) {
            double nu = 0.0;
            for (Eigen::Index c = 0; c < kernel.cols(); ++c) nu += kernel(r, c) * g(r, c);
            for (Eigen::Index c = 0; c < kernel.cols(); ++c) {
                const double viol = kernel(r, c) > 1e-8 ? std::abs(g(r, c) - nu)
                                                        : std::max(0.0, nu - g(r, c));
                residual = std::max(residual, viol);
            }
        }
    }
    return residual;
}

inline void mirror_step(const ReproductionPolicy& current,
                        const std::vector<Eigen::MatrixXd>& grad, double eta,
                        ReproductionPolicy& out) {
    for (int i = 0; i <= current.horizon(); ++i) {
        const Eigen::MatrixXd& kernel = current.kernel(i);
        Eigen::MatrixXd& next = out.kernel(i);
        for (Eigen::Index r = 0; r < kernel.rows(); ++r) {
            // subtract the row max of -eta*grad before exponentiating
            const Eigen::Index cols = kernel.cols();
            double peak = -std::numeric_limits<double>::infinity();
            for (Eigen::Index c = 0; c < cols; ++c)
                peak = std::max(peak, -eta * grad[static_cast<std::size_t>(i)](r, c));
            double total = 0.0;
            for (Eigen::Index c = 0; c < cols; ++c) {
                const double w = kernel(r, c) *
                                 std::exp(-eta * grad[static_cast<std::size_t>(i)](r, c) - peak);
                next(r, c) = std::max(w, kKernelFloor);
                total += next(r, c);
            }
            next.row(r) /= total;
        }
    }
}

}  // namespace detail

inline OracleResult oracle_minimize(const FiniteMarkovSource& source, const DistortionSpec& rho,
                                    double s, const OracleOptions& options = {}) {
    if (s > 0.0) throw Error("oracle: multiplier s must be <= 0");
    if (options.restarts < 1) throw Error("oracle: need at least one restart");
    const int n = source.horizon;
    const int ny = static_cast<int>(rho.table.cols());
    detail::require_single_letter(rho, source.alphabet_size_x, ny);

    OracleResult result;
    result.restart_objectives.reserve(static_cast<std::size_t>(options.restarts));
    ReproductionPolicy best = ReproductionPolicy::uniform(source.alphabet_size_x, ny, n);
    double best_objective = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < options.restarts; ++restart) {
        ReproductionPolicy policy =
            restart == 0
                ? ReproductionPolicy::uniform(source.alphabet_size_x, ny, n)
                : [&] {
                      StreamRng rng = StreamRng::derive(
                          options.seed, {static_cast<std::uint64_t>(restart)});
                      ReproductionPolicy draw =
                          ReproductionPolicy::random(source.alphabet_size_x, ny, n, rng);
                      // blend toward uniform so every restart starts interior;
                      // multiplicative updates recover slowly from tiny entries
                      for (int i = 0; i <= n; ++i)
                          draw.kernel(i) = 0.75 * draw.kernel(i) +
                                           Eigen::MatrixXd::Constant(draw.kernel(i).rows(),
                                                                     draw.kernel(i).cols(),
                                                                     0.25 / ny);
                      return draw;
                  }();
        ReproductionPolicy candidate = policy;
        std::vector<Eigen::MatrixXd> grad;
        std::vector<Eigen::MatrixXd> trial_grad;
        std::vector<Eigen::VectorXd> mass;

        const auto descend = [&](ReproductionPolicy& point) {
            double objective = detail::lagrangian_scan(source, rho, s, point, &grad, &mass);
            detail::condition_gradient(grad, mass);
            double eta = 1.0;
            int stalled = 0;
            for (int iter = 0; iter < options.max_iter; ++iter) {
                detail::mirror_step(point, grad, eta, candidate);
                const double trial =
                    detail::lagrangian_scan(source, rho, s, candidate, &trial_grad, &mass);
                detail::condition_gradient(trial_grad, mass);
                if (trial <= objective + 1e-15) {
                    const double drop = objective - trial;
                    std::swap(point, candidate);
                    std::swap(grad, trial_grad);
                    objective = trial;
                    eta = std::min(eta * 1.2, 64.0);
                    if (detail::kkt_residual(point, grad) < options.kkt_tol) break;
                    stalled = drop < options.tol * (1.0 + std::abs(objective)) ? stalled + 1 : 0;
                    if (stalled >= options.stall_limit) break;
                } else {
                    eta *= 0.5;
                    if (eta < 1e-13) break;
                }
            }
            return objective;
        };

        double objective = descend(policy);
        // A run can park where a conditioning history has been starved of
        // probability: its downstream rows stop receiving gradient and the
        // first-order test cannot price them.  Nudging toward uniform revives
        // every history; accept the re-descended point only when it is
        // strictly better, and stop once a nudge no longer finds improvement.
        for (int kick = 0; kick < options.kick_limit; ++kick) {
            ReproductionPolicy kicked = policy;
            for (int i = 0; i <= n; ++i)
                kicked.kernel(i) = 0.95 * kicked.kernel(i) +
                                   Eigen::MatrixXd::Constant(kicked.kernel(i).rows(),
                                                             kicked.kernel(i).cols(), 0.05 / ny);
            const double kicked_objective = descend(kicked);
            if (kicked_objective < objective - 1e-12 * (1.0 + std::abs(objective))) {
                policy = std::move(kicked);
                objective = kicked_objective;
            } else {
                break;
            }
        }

        result.restart_objectives.push_back(objective);
        if (objective < best_objective) {
            best_objective = objective;
            best = policy;
        }
    }

    const double lo =
        *std::min_element(result.restart_objectives.begin(), result.restart_objectives.end());
    const double hi =
        *std::max_element(result.restart_objectives.begin(), result.restart_objectives.end());
    result.restart_spread = hi - lo;
    result.objective = best_objective;

    const JointLaw joint(source, best);
    const DirectedInformation info = directed_information(source, best);
    const double symbols = static_cast<double>(n) + 1.0;
    result.point = RateDistortionPoint{s, std::max(info.conditional_mi_sum / symbols, 0.0),
                                       joint.expected_distortion(rho) / symbols, n};
    return result;
}

}  // namespace nardf
