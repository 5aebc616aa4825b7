#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <string>
#include <vector>

#include "nardf/common.hpp"
#include "nardf/rng.hpp"

namespace nardf {

namespace detail {

inline std::size_t int_pow(std::size_t base, int exponent) {
    std::size_t value = 1;
    for (int i = 0; i < exponent; ++i) value *= base;
    return value;
}

}  // namespace detail

// ============================================================================
// Nonanticipative reproduction policy: one conditional table per step,
//
//   kernel_i : (y^{i-1}, x^i)  ->  pmf over y_i,
//
// stored as a complete tree over reproduction histories (level i has |Y|^i
// nodes, each carrying |X|^{i+1} conditional rows).  The index set is x^i by
// construction, so no entry can depend on source symbols after step i.
// ============================================================================

class ReproductionPolicy {
public:
    ReproductionPolicy() = default;

    ReproductionPolicy(int alphabet_x, int alphabet_y, int horizon)
        : nx_(alphabet_x), ny_(alphabet_y), horizon_(horizon) {
        if (horizon < 0 || alphabet_x <= 0 || alphabet_y <= 0)
            throw DimensionError("reproduction policy: invalid alphabet or horizon");
        if (horizon > kMaxPolicyHorizon || alphabet_y > kMaxReproductionAlphabet)
            throw CapacityError("reproduction policy: history tree exceeds caps (n <= " +
                                std::to_string(kMaxPolicyHorizon) + ", |Y| <= " +
                                std::to_string(kMaxReproductionAlphabet) + ")");
        kernels_.reserve(static_cast<std::size_t>(horizon) + 1);
        for (int i = 0; i <= horizon; ++i) {
            const std::size_t rows = y_history_count(i) * x_history_count(i);
            if (rows * static_cast<std::size_t>(ny_) > kMaxJointCells)
                throw CapacityError("reproduction policy: kernel storage exceeds cell cap");
            kernels_.emplace_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), ny_));
        }
    }

    static ReproductionPolicy uniform(int alphabet_x, int alphabet_y, int horizon) {
        ReproductionPolicy policy(alphabet_x, alphabet_y, horizon);
        for (auto& kernel : policy.kernels_) kernel.setConstant(1.0 / alphabet_y);
        return policy;
    }

    static ReproductionPolicy random(int alphabet_x, int alphabet_y, int horizon,
                                     StreamRng& rng) {
        ReproductionPolicy policy(alphabet_x, alphabet_y, horizon);
        for (auto& kernel : policy.kernels_) {
            for (Eigen::Index r = 0; r < kernel.rows(); ++r) {
                for (Eigen::Index c = 0; c < kernel.cols(); ++c)
                    kernel(r, c) = -std::log(rng.uniform());
                kernel.row(r) /= kernel.row(r).sum();
            }
        }
        return policy;
    }

    int alphabet_x() const { return nx_; }
    int alphabet_y() const { return ny_; }
    int horizon() const { return horizon_; }

    std::size_t y_history_count(int step) const {
        return detail::int_pow(static_cast<std::size_t>(ny_), step);
    }
    std::size_t x_history_count(int step) const {
        return detail::int_pow(static_cast<std::size_t>(nx_), step + 1);
    }

    // mixed-radix history folding: index' = index * alphabet + symbol
    static std::size_t fold(std::size_t index, int symbol, int alphabet) {
        return index * static_cast<std::size_t>(alphabet) + static_cast<std::size_t>(symbol);
    }

    Eigen::Index row_index(int step, std::size_t y_hist, std::size_t x_hist) const {
        return static_cast<Eigen::Index>(y_hist * x_history_count(step) + x_hist);
    }

    double prob(int step, std::size_t y_hist, std::size_t x_hist, int y) const {
        return kernels_[static_cast<std::size_t>(step)](row_index(step, y_hist, x_hist), y);
    }

    // conditional P(y_i | y^{i-1}, x^i) read off full sequences; only the
    // prefixes y_seq[0..i-1] and x_seq[0..i] enter the lookup
    double prob_seq(int step, const std::vector<int>& x_seq, const std::vector<int>& y_seq,
                    int y) const {
        std::size_t y_hist = 0, x_hist = 0;
        for (int j = 0; j < step; ++j) y_hist = fold(y_hist, y_seq[j], ny_);
        for (int j = 0; j <= step; ++j) x_hist = fold(x_hist, x_seq[j], nx_);
        return prob(step, y_hist, x_hist, y);
    }

    Eigen::MatrixXd& kernel(int step) { return kernels_[static_cast<std::size_t>(step)]; }
    const Eigen::MatrixXd& kernel(int step) const {
        return kernels_[static_cast<std::size_t>(step)];
    }

    void set_row(int step, std::size_t y_hist, std::size_t x_hist,
                 const Eigen::VectorXd& pmf) {
        kernels_[static_cast<std::size_t>(step)].row(row_index(step, y_hist, x_hist)) =
            pmf.transpose();
    }

    std::vector<std::string> validate() const {
        std::vector<std::string> diagnostics;
        for (int i = 0; i <= horizon_; ++i) {
            const Eigen::MatrixXd& kernel = kernels_[static_cast<std::size_t>(i)];
            for (Eigen::Index r = 0; r < kernel.rows(); ++r) {
                if (kernel.row(r).minCoeff() < 0.0)
                    diagnostics.emplace_back("step " + std::to_string(i) + " row " +
                                             std::to_string(r) + " has negative entries");
                if (std::abs(kernel.row(r).sum() - 1.0) > kProbTol)
                    diagnostics.emplace_back("step " + std::to_string(i) + " row " +
                                             std::to_string(r) + " does not sum to 1");
            }
        }
        return diagnostics;
    }

    double sup_distance(const ReproductionPolicy& other) const {
        double dist = 0.0;
        for (int i = 0; i <= horizon_; ++i)
            dist = std::max(dist, (kernel(i) - other.kernel(i)).cwiseAbs().maxCoeff());
        return dist;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json doc;
        doc["alphabet_size_x"] = nx_;
        doc["alphabet_size_y"] = ny_;
        doc["horizon"] = horizon_;
        auto& steps = doc["kernels"] = nlohmann::ordered_json::array();
        for (const auto& kernel : kernels_) {
            nlohmann::ordered_json rows = nlohmann::ordered_json::array();
            for (Eigen::Index r = 0; r < kernel.rows(); ++r) {
                nlohmann::ordered_json row = nlohmann::ordered_json::array();
                for (Eigen::Index c = 0; c < kernel.cols(); ++c) row.push_back(kernel(r, c));
                rows.push_back(std::move(row));
            }
            steps.push_back(std::move(rows));
        }
        return doc;
    }

    static ReproductionPolicy from_json(const nlohmann::json& doc) {
        ReproductionPolicy policy(doc.at("alphabet_size_x").get<int>(),
                                  doc.at("alphabet_size_y").get<int>(),
                                  doc.at("horizon").get<int>());
        const auto& steps = doc.at("kernels");
        if (steps.size() != policy.kernels_.size())
            throw ParseError("reproduction policy: kernel count does not match horizon");
        for (std::size_t i = 0; i < steps.size(); ++i) {
            Eigen::MatrixXd& kernel = policy.kernels_[i];
            const auto& rows = steps[i];
            if (static_cast<Eigen::Index>(rows.size()) != kernel.rows())
                throw ParseError("reproduction policy: row count mismatch at step " +
                                 std::to_string(i));
            for (Eigen::Index r = 0; r < kernel.rows(); ++r) {
                const auto& row = rows[static_cast<std::size_t>(r)];
                if (static_cast<Eigen::Index>(row.size()) != kernel.cols())
                    throw ParseError("reproduction policy: column count mismatch");
                for (Eigen::Index c = 0; c < kernel.cols(); ++c)
                    kernel(r, c) = row[static_cast<std::size_t>(c)].get<double>();
            }
        }
        return policy;
    }

private:
    int nx_ = 0;
    int ny_ = 0;
    int horizon_ = -1;
    std::vector<Eigen::MatrixXd> kernels_;
};

// Lagrangian-parametrized point on the nonanticipative rate distortion curve.
// Rates are nats per source symbol; distortion is per source symbol.
struct RateDistortionPoint {
    double s = 0.0;  // multiplier, always <= 0; < 0 whenever rate > 0
    double rate = 0.0;
    double distortion = 0.0;
    int horizon = 0;
};

}  // namespace nardf
