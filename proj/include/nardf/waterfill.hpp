#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "nardf/common.hpp"

namespace nardf {

// ============================================================================
// Reverse water-filling
//
// Distortion D is spread over innovation eigenvalues by a water level xi:
//   delta_i = min(xi, lambda_i),  sum_i delta_i = D.
// The per-step rate of the allocation is (1/2) sum_i ln(lambda_i / delta_i).
// ============================================================================

struct WaterfillAllocation {
    Eigen::VectorXd eigenvalues;    // lambda_i, variance units, all > 0
    double water_level = 0.0;       // xi
    Eigen::VectorXd deltas;         // delta_i = min(xi, lambda_i)
    double total_distortion = 0.0;  // D = sum delta_i
};

// Unique xi with sum_i min(xi, lambda_i) = D, by bisection on the monotone
// map xi -> sum min(xi, lambda_i) over [0, max lambda].  Feasible range is
// 0 < D <= sum lambda; at D = sum lambda the allocation is delta = lambda.
inline WaterfillAllocation allocate(const Eigen::VectorXd& eigenvalues, double total_distortion) {
    const Eigen::Index p = eigenvalues.size();
    if (p == 0) throw DimensionError("waterfill: empty eigenvalue list");
    for (Eigen::Index i = 0; i < p; ++i) {
        if (!(eigenvalues[i] > 0.0)) {
            std::ostringstream msg;
            msg << "waterfill: eigenvalue " << i << " = " << eigenvalues[i] << " is not positive";
            throw InfeasibleError(msg.str());
        }
    }
    const double lambda_sum = eigenvalues.sum();
    const double lambda_max = eigenvalues.maxCoeff();
    if (!(total_distortion > 0.0) || total_distortion > lambda_sum * (1.0 + 1e-15)) {
        std::ostringstream msg;
        msg << "waterfill: distortion " << total_distortion << " outside feasible range (0, "
            << lambda_sum << "]";
        throw InfeasibleError(msg.str());
    }

    WaterfillAllocation alloc;
    alloc.eigenvalues = eigenvalues;
    alloc.total_distortion = total_distortion;

    if (total_distortion >= lambda_sum * (1.0 - 1e-15)) {
        alloc.water_level = lambda_max;
        alloc.deltas = eigenvalues;
        alloc.total_distortion = lambda_sum;
        return alloc;
    }

    const auto filled = [&](double xi) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < p; ++i) s += std::min(xi, eigenvalues[i]);
        return s;
    };

    double lo = 0.0, hi = lambda_max;
    double xi = 0.5 * lambda_max;
    for (int iter = 0; iter < 200; ++iter) {
        xi = 0.5 * (lo + hi);
        const double s = filled(xi);
        if (std::abs(s - total_distortion) <= 1e-12) break;
        (s < total_distortion ? lo : hi) = xi;
    }

    // linear polish across the components still below the water level
    int active = 0;
    double saturated = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        if (eigenvalues[i] > xi) ++active;
        else saturated += eigenvalues[i];
    }
    if (active > 0) xi += (total_distortion - (saturated + active * xi)) / active;

    alloc.water_level = xi;
    alloc.deltas = eigenvalues.cwiseMin(xi);
    return alloc;
}

/// Per-step rate in nats: (1/2) sum_i ln(lambda_i / delta_i).
inline double rate_of(const WaterfillAllocation& alloc) {
    double rate = 0.0;
    for (Eigen::Index i = 0; i < alloc.eigenvalues.size(); ++i) {
        const double ratio = alloc.eigenvalues[i] / alloc.deltas[i];
        if (ratio > 1.0) rate += 0.5 * std::log(ratio);
    }
    return rate;
}

}  // namespace nardf
