#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "nardf/common.hpp"
#include "nardf/distortion.hpp"
#include "nardf/markov_source.hpp"
#include "nardf/reproduction_policy.hpp"

namespace nardf {

// Per-step output marginals P(y_i | y^{i-1}); level i is a ny^i x ny table.
struct MarginalReproduction {
    int alphabet_y = 0;
    int horizon = 0;
    std::vector<Eigen::MatrixXd> tables;

    static MarginalReproduction uniform(int alphabet_y, int horizon) {
        MarginalReproduction marg;
        marg.alphabet_y = alphabet_y;
        marg.horizon = horizon;
        for (int i = 0; i <= horizon; ++i)
            marg.tables.emplace_back(Eigen::MatrixXd::Constant(
                static_cast<Eigen::Index>(detail::int_pow(alphabet_y, i)), alphabet_y,
                1.0 / alphabet_y));
        return marg;
    }

    double prob(int step, std::size_t y_hist, int y) const {
        return tables[static_cast<std::size_t>(step)](static_cast<Eigen::Index>(y_hist), y);
    }
};

// two algebraically equal routes to I(X^n -> Y^n), kept separate as a cross-check
struct DirectedInformation {
    double conditional_mi_sum = 0.0;  // sum_i I(X^i; Y_i | Y^{i-1})
    double kl_form = 0.0;             // D( P_{X^n,Y^n} || P_{X^n} x P_{Y^n} )
};

// ============================================================================
// Exact joint law P(x^i, y^i), i = 0..n, built level by level from
//   P(x^n, y^n) = prod_i P(x_i | x_{i-1}) * P(y_i | y^{i-1}, x^i).
// Level i is a flat vector indexed by x_hist * |Y|^(i+1) + y_hist with
// mixed-radix histories (earliest symbol most significant).
// ============================================================================

class JointLaw {
public:
    JointLaw(const FiniteMarkovSource& source, const ReproductionPolicy& policy)
        : nx_(source.alphabet_size_x), ny_(policy.alphabet_y()), horizon_(source.horizon) {
        if (policy.alphabet_x() != nx_ || policy.horizon() != horizon_)
            throw DimensionError("joint law: source and policy disagree on alphabet or horizon");
        const std::size_t cells = detail::int_pow(nx_, horizon_ + 1) *
                                  detail::int_pow(ny_, horizon_ + 1);
        if (cells > kMaxJointCells)
            throw CapacityError("joint law: |X|^(n+1) * |Y|^(n+1) exceeds the enumeration cap");

        levels_.resize(static_cast<std::size_t>(horizon_) + 1);
        levels_[0].resize(static_cast<Eigen::Index>(nx_) * ny_);
        for (int x0 = 0; x0 < nx_; ++x0)
            for (int y0 = 0; y0 < ny_; ++y0)
                levels_[0][static_cast<Eigen::Index>(x0) * ny_ + y0] =
                    source.initial_pmf[x0] * policy.prob(0, 0, static_cast<std::size_t>(x0), y0);

        for (int i = 1; i <= horizon_; ++i) {
            const std::size_t xh_prev = detail::int_pow(nx_, i);
            const std::size_t yh_prev = detail::int_pow(ny_, i);
            const Eigen::MatrixXd& trans = source.transition_at(i);
            Eigen::VectorXd& level = levels_[static_cast<std::size_t>(i)];
            level = Eigen::VectorXd::Zero(
                static_cast<Eigen::Index>(xh_prev * nx_ * yh_prev * ny_));
            const Eigen::VectorXd& prev = levels_[static_cast<std::size_t>(i) - 1];
            for (std::size_t xg = 0; xg < xh_prev; ++xg) {
                const int x_last = static_cast<int>(xg % nx_);
                for (std::size_t yh = 0; yh < yh_prev; ++yh) {
                    const double mass = prev[static_cast<Eigen::Index>(xg * yh_prev + yh)];
                    if (mass == 0.0) continue;
                    for (int xi = 0; xi < nx_; ++xi) {
                        const double step_mass = mass * trans(x_last, xi);
                        if (step_mass == 0.0) continue;
                        const std::size_t xg_new = xg * nx_ + static_cast<std::size_t>(xi);
                        for (int yi = 0; yi < ny_; ++yi) {
                            const std::size_t yh_new = yh * ny_ + static_cast<std::size_t>(yi);
                            level[static_cast<Eigen::Index>(xg_new * (yh_prev * ny_) + yh_new)] =
                                step_mass * policy.prob(i, yh, xg_new, yi);
                        }
                    }
                }
            }
        }
    }

    int alphabet_x() const { return nx_; }
    int alphabet_y() const { return ny_; }
    int horizon() const { return horizon_; }

    const Eigen::VectorXd& level(int i) const { return levels_[static_cast<std::size_t>(i)]; }

    double total_mass() const { return levels_.back().sum(); }

    // P(y^i): marginal of level i over source histories
    Eigen::VectorXd y_marginal(int i) const {
        const std::size_t yh = detail::int_pow(ny_, i + 1);
        const std::size_t xh = detail::int_pow(nx_, i + 1);
        Eigen::VectorXd marg = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(yh));
        const Eigen::VectorXd& lvl = levels_[static_cast<std::size_t>(i)];
        for (std::size_t xg = 0; xg < xh; ++xg)
            for (std::size_t y = 0; y < yh; ++y)
                marg[static_cast<Eigen::Index>(y)] += lvl[static_cast<Eigen::Index>(xg * yh + y)];
        return marg;
    }

    // P(x^i): marginal of level i over reproduction histories
    Eigen::VectorXd x_marginal(int i) const {
        const std::size_t yh = detail::int_pow(ny_, i + 1);
        const std::size_t xh = detail::int_pow(nx_, i + 1);
        Eigen::VectorXd marg = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(xh));
        const Eigen::VectorXd& lvl = levels_[static_cast<std::size_t>(i)];
        for (std::size_t xg = 0; xg < xh; ++xg)
            for (std::size_t y = 0; y < yh; ++y)
                marg[static_cast<Eigen::Index>(xg)] += lvl[static_cast<Eigen::Index>(xg * yh + y)];
        return marg;
    }

    // mass of each reproduction history y^{i-1} entering step i
    Eigen::VectorXd y_history_mass(int step) const {
        if (step == 0) return Eigen::VectorXd::Ones(1);
        return y_marginal(step - 1);
    }

    // P(y_i | y^{i-1}) per step; measure-zero histories fall back to uniform
    MarginalReproduction marginals() const {
        MarginalReproduction marg;
        marg.alphabet_y = ny_;
        marg.horizon = horizon_;
        Eigen::VectorXd prev = Eigen::VectorXd::Ones(1);
        for (int i = 0; i <= horizon_; ++i) {
            const Eigen::VectorXd current = y_marginal(i);
            Eigen::MatrixXd table(prev.size(), ny_);
            for (Eigen::Index h = 0; h < prev.size(); ++h) {
                if (prev[h] > 0.0) {
                    for (int y = 0; y < ny_; ++y) table(h, y) = current[h * ny_ + y] / prev[h];
                } else {
                    table.row(h).setConstant(1.0 / ny_);
                }
            }
            marg.tables.push_back(std::move(table));
            prev = current;
        }
        return marg;
    }

    // E[ sum_i rho(x_i, y_i) ] under the joint law (unnormalized total)
    double expected_distortion(const DistortionSpec& rho) const {
        double total = 0.0;
        for (int i = 0; i <= horizon_; ++i) {
            const std::size_t yh = detail::int_pow(ny_, i + 1);
            const std::size_t xh = detail::int_pow(nx_, i + 1);
            const Eigen::VectorXd& lvl = levels_[static_cast<std::size_t>(i)];
            for (std::size_t xg = 0; xg < xh; ++xg) {
                const int xi = static_cast<int>(xg % nx_);
                for (std::size_t y = 0; y < yh; ++y) {
                    const int yi = static_cast<int>(y % ny_);
                    total += lvl[static_cast<Eigen::Index>(xg * yh + y)] * rho.letter(xi, yi);
                }
            }
        }
        return total;
    }

private:
    int nx_ = 0;
    int ny_ = 0;
    int horizon_ = 0;
    std::vector<Eigen::VectorXd> levels_;
};

// ============================================================================
// Directed information I(X^n -> Y^n) = sum_i I(X^i; Y_i | Y^{i-1}), computed
// by exact enumeration, together with the Kullback-Leibler form
// D(P_{X^n} (x) P_{Y^n|X^n} || P_{X^n} x P_{Y^n}).  The two agree to
// enumeration accuracy because the source admits no feedback from Y.
// ============================================================================

inline DirectedInformation directed_information(const FiniteMarkovSource& source,
                                                const ReproductionPolicy& policy) {
    const JointLaw joint(source, policy);
    const int n = joint.horizon();
    const int nx = joint.alphabet_x();
    const int ny = joint.alphabet_y();
    const MarginalReproduction marg = joint.marginals();

    DirectedInformation info;
    for (int i = 0; i <= n; ++i) {
        const std::size_t yh = detail::int_pow(ny, i + 1);
        const std::size_t xh = detail::int_pow(nx, i + 1);
        const Eigen::VectorXd& lvl = joint.level(i);
        double mi = 0.0;
        for (std::size_t xg = 0; xg < xh; ++xg) {
            for (std::size_t y = 0; y < yh; ++y) {
                const double mass = lvl[static_cast<Eigen::Index>(xg * yh + y)];
                if (mass <= 0.0) continue;
                const std::size_t y_hist = y / static_cast<std::size_t>(ny);
                const int yi = static_cast<int>(y % static_cast<std::size_t>(ny));
                const double q = policy.prob(i, y_hist, xg, yi);
                const double m = marg.prob(i, y_hist, yi);
                mi += mass * std::log(q / m);
            }
        }
        info.conditional_mi_sum += mi;
    }

    // KL route over full sequences, with the source law rebuilt independently
    const std::size_t yh = detail::int_pow(ny, n + 1);
    const std::size_t xh = detail::int_pow(nx, n + 1);
    Eigen::VectorXd source_law(static_cast<Eigen::Index>(xh));
    for (std::size_t xg = 0; xg < xh; ++xg) {
        std::vector<int> x_seq(static_cast<std::size_t>(n) + 1);
        std::size_t rem = xg;
        for (int i = n; i >= 0; --i) {
            x_seq[static_cast<std::size_t>(i)] = static_cast<int>(rem % nx);
            rem /= static_cast<std::size_t>(nx);
        }
        source_law[static_cast<Eigen::Index>(xg)] = source.sequence_prob(x_seq);
    }
    const Eigen::VectorXd y_law = joint.y_marginal(n);
    const Eigen::VectorXd& full = joint.level(n);
    for (std::size_t xg = 0; xg < xh; ++xg) {
        for (std::size_t y = 0; y < yh; ++y) {
            const double mass = full[static_cast<Eigen::Index>(xg * yh + y)];
            if (mass <= 0.0) continue;
            info.kl_form += mass * std::log(mass / (source_law[static_cast<Eigen::Index>(xg)] *
                                                    y_law[static_cast<Eigen::Index>(y)]));
        }
    }
    return info;
}

}  // namespace nardf
