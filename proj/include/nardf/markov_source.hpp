#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nardf/common.hpp"

namespace nardf {

// ============================================================================
// Finite-alphabet first-order Markov source over a horizon of n+1 symbols
// x_0, ..., x_n.  Transitions are either a single stationary table reused at
// every step or one table per step i = 1..n.
// ============================================================================

struct FiniteMarkovSource {
    int alphabet_size_x = 0;
    int horizon = 0;              // n >= 0
    Eigen::VectorXd initial_pmf;  // P(x_0)
    std::vector<Eigen::MatrixXd> transition;  // row-stochastic; size 1 (stationary) or n

    static FiniteMarkovSource iid(const Eigen::VectorXd& pmf, int horizon) {
        FiniteMarkovSource src;
        src.alphabet_size_x = static_cast<int>(pmf.size());
        src.horizon = horizon;
        src.initial_pmf = pmf;
        if (horizon > 0) {
            Eigen::MatrixXd table(pmf.size(), pmf.size());
            table.rowwise() = pmf.transpose();
            src.transition.push_back(table);
        }
        return src;
    }

    static FiniteMarkovSource stationary(const Eigen::VectorXd& pmf0,
                                         const Eigen::MatrixXd& table, int horizon) {
        FiniteMarkovSource src;
        src.alphabet_size_x = static_cast<int>(pmf0.size());
        src.horizon = horizon;
        src.initial_pmf = pmf0;
        if (horizon > 0) src.transition.push_back(table);
        return src;
    }

    // binary source flipping with probability q each step, uniform start
    static FiniteMarkovSource binary_symmetric(double flip_prob, int horizon) {
        Eigen::MatrixXd table(2, 2);
        table << 1.0 - flip_prob, flip_prob, flip_prob, 1.0 - flip_prob;
        return stationary(Eigen::VectorXd::Constant(2, 0.5), table, horizon);
    }

    // transition table in effect at step i (valid for 1 <= i <= horizon)
    const Eigen::MatrixXd& transition_at(int step) const {
        return transition.size() == 1 ? transition.front()
                                      : transition.at(static_cast<std::size_t>(step) - 1);
    }

    double sequence_prob(const std::vector<int>& x_seq) const {
        double prob = initial_pmf[x_seq[0]];
        for (int i = 1; i <= horizon; ++i) prob *= transition_at(i)(x_seq[i - 1], x_seq[i]);
        return prob;
    }

    std::vector<std::string> validate() const {
        std::vector<std::string> diagnostics;
        if (alphabet_size_x <= 0) diagnostics.emplace_back("alphabet_size_x must be positive");
        if (horizon < 0) diagnostics.emplace_back("horizon must be nonnegative");
        if (initial_pmf.size() != alphabet_size_x)
            diagnostics.emplace_back("initial_pmf length does not match alphabet");
        auto check_pmf = [&](const Eigen::VectorXd& row, const std::string& name) {
            if (row.minCoeff() < 0.0) diagnostics.emplace_back(name + " has negative entries");
            if (std::abs(row.sum() - 1.0) > kProbTol)
                diagnostics.emplace_back(name + " does not sum to 1");
        };
        check_pmf(initial_pmf, "initial_pmf");
        if (horizon > 0 && transition.empty())
            diagnostics.emplace_back("transition tables missing for horizon > 0");
        if (!transition.empty() && transition.size() != 1 &&
            transition.size() != static_cast<std::size_t>(horizon))
            diagnostics.emplace_back("transition table count must be 1 or horizon");
        for (std::size_t t = 0; t < transition.size(); ++t) {
            const Eigen::MatrixXd& table = transition[t];
            if (table.rows() != alphabet_size_x || table.cols() != alphabet_size_x) {
                diagnostics.emplace_back("transition table " + std::to_string(t) +
                                         " has wrong shape");
                continue;
            }
            for (Eigen::Index r = 0; r < table.rows(); ++r)
                check_pmf(table.row(r), "transition[" + std::to_string(t) + "] row " +
                                            std::to_string(r));
        }
        return diagnostics;
    }
};

}  // namespace nardf
