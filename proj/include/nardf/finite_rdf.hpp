#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "nardf/common.hpp"
#include "nardf/joint_law.hpp"

namespace nardf {

// ============================================================================
// Nonanticipative RDF for finite-alphabet Markov sources.
//
// The optimal reproduction kernel is an exponential tilt of its own output
// marginals with a backward value correction,
//
//   P(y_i | y^{i-1}, x_i)  =  m_i(y_i | y^{i-1}) e^{s rho(x_i, y_i) - W_i(y^i, x_i)} / Z_i(y^{i-1}, x_i),
//   W_i(y^i, x_i)          = -sum_{x'} P(x' | x_i) ln Z_{i+1}(y^i, x'),   W_n = 0.
//
// W_i prices how the reproduction chosen today shifts the cost of matching
// tomorrow's output marginals; it vanishes at the last step, for memoryless
// sources, and whenever the marginals make Z constant across histories, in
// which case the plain per-letter tilt is recovered.  The solver alternates
// between this tilt and recomputing the marginals the tilted policy induces,
// until the kernel stops moving in sup-norm.
// ============================================================================

struct SolverReport {
    int iterations = 0;
    double final_change = std::numeric_limits<double>::infinity();  // sup-norm kernel change
    double rate = 0.0;        // nats per symbol, from directed information
    double distortion = 0.0;  // per symbol
    double s = 0.0;
    bool converged = false;
    double rate_parametric = 0.0;  // (s * E[total distortion] - E[ln Z_0]) / (n+1)
};

struct FixedPointResult {
    ReproductionPolicy policy;
    MarginalReproduction marginals;
    RateDistortionPoint point;
    SolverReport report;
};

struct SolverOptions {
    double tol = 1e-10;
    int max_iter = 10000;
    double damping = 1.0;  // in (0, 1]; 1 means undamped
};

namespace detail {

// Tilted policy together with the initial-stage log-normalizers ln Z_0(x_0);
// the downstream normalizers are absorbed into Z_0 through the value pass,
// so ln Z_0 alone carries the parametric rate.
struct TiltedSystem {
    ReproductionPolicy policy;
    Eigen::VectorXd initial_log_z;  // indexed by x_0
};

// Backward pass over steps n..0.  At step i every (y-history, x_i) row is
// tilted by e^{s rho - W}; the per-row log-normalizers are then folded into
// the value table W for step i-1 through the source transition.
inline TiltedSystem tilted_system(const MarginalReproduction& marginals,
                                  const FiniteMarkovSource& source,
                                  const DistortionSpec& rho, double s) {
    if (s > 0.0) throw Error("tilt: multiplier s must be <= 0");
    const int nx = source.alphabet_size_x;
    const int ny = marginals.alphabet_y;
    const int n = marginals.horizon;
    require_single_letter(rho, nx, ny);
    if (source.horizon != n)
        throw DimensionError("tilt: source and marginals disagree on horizon");

    TiltedSystem out{ReproductionPolicy(nx, ny, n), Eigen::VectorXd()};
    // value[h * nx + x] = W for reproduction history h (length i+1 while
    // processing step i) and source letter x; empty at the last step
    std::vector<double> value;
    std::vector<double> log_z;
    Eigen::VectorXd row(ny);
    for (int i = n; i >= 0; --i) {
        const std::size_t y_count = out.policy.y_history_count(i);
        const std::size_t x_count = out.policy.x_history_count(i);
        log_z.assign(y_count * static_cast<std::size_t>(nx), 0.0);
        for (std::size_t h = 0; h < y_count; ++h) {
            const Eigen::VectorXd marginal_row =
                marginals.tables[static_cast<std::size_t>(i)].row(static_cast<Eigen::Index>(h));
            for (int x = 0; x < nx; ++x) {
                double shift = -std::numeric_limits<double>::infinity();
                for (int y = 0; y < ny; ++y) {
                    if (marginal_row[y] <= 0.0) continue;
                    double exponent = s * rho.letter(x, y);
                    if (i < n)
                        exponent -= value[(h * static_cast<std::size_t>(ny) +
                                           static_cast<std::size_t>(y)) *
                                              static_cast<std::size_t>(nx) +
                                          static_cast<std::size_t>(x)];
                    shift = std::max(shift, exponent);
                }
                if (!std::isfinite(shift)) {
                    std::ostringstream msg;
                    msg << "tilt: empty marginal support at step " << i << ", history " << h;
                    throw DegenerateSupportError(msg.str());
                }
                double z = 0.0;
                for (int y = 0; y < ny; ++y) {
                    if (marginal_row[y] <= 0.0) {
                        row[y] = 0.0;
                        continue;
                    }
                    double exponent = s * rho.letter(x, y);
                    if (i < n)
                        exponent -= value[(h * static_cast<std::size_t>(ny) +
                                           static_cast<std::size_t>(y)) *
                                              static_cast<std::size_t>(nx) +
                                          static_cast<std::size_t>(x)];
                    row[y] = marginal_row[y] * std::exp(exponent - shift);
                    z += row[y];
                }
                if (!(z > 0.0)) {
                    std::ostringstream msg;
                    msg << "tilt: normalizer vanished at step " << i << ", history " << h;
                    throw DegenerateSupportError(msg.str());
                }
                row /= z;
                log_z[h * static_cast<std::size_t>(nx) + static_cast<std::size_t>(x)] =
                    shift + std::log(z);
                for (std::size_t g = static_cast<std::size_t>(x); g < x_count;
                     g += static_cast<std::size_t>(nx))
                    out.policy.set_row(i, h, g, row);
            }
        }
        if (i > 0) {
            // W_{i-1}(y^{i-1}, x_{i-1}) = -sum_{x'} P(x' | x_{i-1}) ln Z_i(y^{i-1}, x')
            const Eigen::MatrixXd& trans = source.transition_at(i);
            value.assign(y_count * static_cast<std::size_t>(nx), 0.0);
            for (std::size_t h = 0; h < y_count; ++h)
                for (int xp = 0; xp < nx; ++xp) {
                    double w = 0.0;
                    for (int x = 0; x < nx; ++x)
                        w += trans(xp, x) *
                             log_z[h * static_cast<std::size_t>(nx) + static_cast<std::size_t>(x)];
                    value[h * static_cast<std::size_t>(nx) + static_cast<std::size_t>(xp)] = -w;
                }
        } else {
            out.initial_log_z = Eigen::Map<const Eigen::VectorXd>(log_z.data(), nx);
        }
    }
    return out;
}

}  // namespace detail

// Value-corrected exponential tilt of per-step output marginals.  The result
// depends on x^i only through x_i (the source is Markov and the distortion
// single-letter), so each row is computed once per (history, x_i) and
// replicated across source histories.
inline ReproductionPolicy tilt_kernel(const MarginalReproduction& marginals,
                                      const FiniteMarkovSource& source,
                                      const DistortionSpec& rho, double s) {
    return detail::tilted_system(marginals, source, rho, s).policy;
}

namespace detail {

// sup-norm kernel distance restricted to reproduction histories of positive mass
inline double masked_sup_distance(const ReproductionPolicy& a, const ReproductionPolicy& b,
                                  const JointLaw& joint) {
    double dist = 0.0;
    for (int i = 0; i <= a.horizon(); ++i) {
        const Eigen::VectorXd mass = joint.y_history_mass(i);
        const std::size_t x_count = a.x_history_count(i);
        for (Eigen::Index h = 0; h < mass.size(); ++h) {
            if (mass[h] <= 0.0) continue;
            const Eigen::Index first = static_cast<Eigen::Index>(
                static_cast<std::size_t>(h) * x_count);
            const auto block_a = a.kernel(i).middleRows(first, static_cast<Eigen::Index>(x_count));
            const auto block_b = b.kernel(i).middleRows(first, static_cast<Eigen::Index>(x_count));
            dist = std::max(dist, (block_a - block_b).cwiseAbs().maxCoeff());
        }
    }
    return dist;
}

// E[ln Z_0(X_0)]: the downstream stage normalizers telescope against the
// value corrections, leaving only the initial stage in the parametric rate
//   I = s E[sum_i rho_i] - E[ln Z_0(X_0)]   at a solved policy.
inline double expected_log_normalizer(const MarginalReproduction& marg,
                                      const FiniteMarkovSource& source,
                                      const DistortionSpec& rho, double s) {
    const Eigen::VectorXd log_z = tilted_system(marg, source, rho, s).initial_log_z;
    double total = 0.0;
    for (Eigen::Index x = 0; x < log_z.size(); ++x)
        total += source.initial_pmf[static_cast<int>(x)] * log_z[x];
    return total;
}

}  // namespace detail

inline FixedPointResult fixed_point_solve(const FiniteMarkovSource& source,
                                          const DistortionSpec& rho, double s,
                                          const SolverOptions& options = {},
                                          const MarginalReproduction* warm_start = nullptr) {
    if (s > 0.0) throw Error("fixed point: multiplier s must be <= 0");
    const int n = source.horizon;
    const int ny = static_cast<int>(rho.table.cols());
    detail::require_single_letter(rho, source.alphabet_size_x, ny);

    MarginalReproduction marginals =
        warm_start ? *warm_start : MarginalReproduction::uniform(ny, n);
    ReproductionPolicy policy = tilt_kernel(marginals, source, rho, s);

    SolverReport report;
    report.s = s;
    for (int iter = 1; iter <= options.max_iter; ++iter) {
        const JointLaw joint(source, policy);
        marginals = joint.marginals();
        ReproductionPolicy next = tilt_kernel(marginals, source, rho, s);
        if (options.damping < 1.0) {
            for (int i = 0; i <= n; ++i)
                next.kernel(i) = options.damping * next.kernel(i) +
                                 (1.0 - options.damping) * policy.kernel(i);
        }
        report.final_change = detail::masked_sup_distance(next, policy, joint);
        policy = std::move(next);
        report.iterations = iter;
        if (report.final_change < options.tol) {
            report.converged = true;
            break;
        }
    }

    const JointLaw joint(source, policy);
    marginals = joint.marginals();
    const DirectedInformation info = directed_information(source, policy);
    const double symbols = static_cast<double>(n) + 1.0;
    const double expected_d = joint.expected_distortion(rho);

    report.rate = info.conditional_mi_sum / symbols;
    report.distortion = expected_d / symbols;
    report.rate_parametric =
        (s * expected_d - detail::expected_log_normalizer(marginals, source, rho, s)) / symbols;

    FixedPointResult result{std::move(policy), std::move(marginals),
                            RateDistortionPoint{s, std::max(report.rate, 0.0),
                                                report.distortion, n},
                            report};
    return result;
}

struct CurvePoint {
    RateDistortionPoint point;
    SolverReport report;
};

// Lagrangian sweep tracing R^na(D).  The grid runs from s near 0 toward
// -infinity; each solve warm-starts from the previous marginals, and the
// (D nonincreasing, R nondecreasing) ordering is asserted.
inline std::vector<CurvePoint> rd_curve(const FiniteMarkovSource& source,
                                        const DistortionSpec& rho,
                                        const std::vector<double>& s_grid,
                                        const SolverOptions& options = {}) {
    if (s_grid.empty()) throw Error("rd_curve: empty s grid");
    for (std::size_t k = 0; k < s_grid.size(); ++k) {
        if (s_grid[k] > 0.0) throw Error("rd_curve: s grid entries must be <= 0");
        if (k > 0 && s_grid[k] > s_grid[k - 1] + 1e-15)
            throw Error("rd_curve: s grid must be sorted descending toward -infinity");
    }

    std::vector<CurvePoint> curve;
    curve.reserve(s_grid.size());
    std::optional<MarginalReproduction> warm;
    for (const double s : s_grid) {
        FixedPointResult result =
            fixed_point_solve(source, rho, s, options, warm ? &*warm : nullptr);
        warm = result.marginals;
        if (!curve.empty()) {
            const CurvePoint& prev = curve.back();
            if (result.point.distortion > prev.point.distortion + 1e-8 ||
                result.point.rate < prev.point.rate - 1e-8)
                throw NumericalError("rd_curve: Lagrangian monotonicity violated along the sweep");
        }
        curve.push_back(CurvePoint{result.point, result.report});
    }
    return curve;
}

}  // namespace nardf
