#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "nardf/common.hpp"
#include "nardf/rng.hpp"
#include "nardf/waterfill.hpp"

namespace nardf {

// ============================================================================
// Gain design for realizing the Gaussian reverse-waterfilling solution over
// additive Gaussian noise channels.
//
// The observation innovation K_t (covariance Lambda_t) is rotated into
// independent components Gamma_t = E_t K_t, each component is scaled onto its
// own AGN sub-channel with noise variance Q and power share alpha_i P_t, and
// the channel outputs are rescaled and rotated back.  Powers follow from the
// waterfilling distortions, alpha_i P = Q (lambda_i / delta_i - 1), which
// makes the per-component reconstruction error exactly delta_i.
// ============================================================================

struct ChannelSpec {
    double noise_variance = 1.0;   // Q, per sub-channel
    double total_power = 0.0;      // P = sum of per-component powers
    Eigen::VectorXd alpha;         // power shares, alpha_i >= 0, sum = 1

    Eigen::VectorXd component_powers() const { return alpha * total_power; }
};

struct GainSet {
    Eigen::MatrixXd rotation;       // E: rows are eigenvectors of Lambda
    Eigen::RowVectorXd encoder;     // per-component channel input scalings
    Eigen::VectorXd decoder;        // per-component channel output scalings
    Eigen::MatrixXd mix;            // H = diag(encoder_i * decoder_i)
    Eigen::MatrixXd innovation_cov; // Lambda the design was computed from
    Eigen::VectorXd eigenvalues;    // descending eigenvalues of Lambda
    double distortion_trace = 0.0;  // trace of the reconstruction-error matrix

    int components() const { return static_cast<int>(eigenvalues.size()); }
};

namespace detail {

// orthogonal diagonalizer with a fixed convention: eigenvalues descending,
// first entry of each eigenvector above 1e-12 in magnitude made positive
inline void diagonalize_descending(const Eigen::MatrixXd& symmetric, Eigen::VectorXd& eigs,
                                   Eigen::MatrixXd& rotation) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigendecomposition of the innovation covariance failed");
    const Eigen::Index p = symmetric.rows();
    eigs.resize(p);
    Eigen::MatrixXd columns(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        eigs[i] = solver.eigenvalues()[p - 1 - i];
        columns.col(i) = solver.eigenvectors().col(p - 1 - i);
        for (Eigen::Index r = 0; r < p; ++r) {
            if (std::abs(columns(r, i)) > 1e-12) {
                if (columns(r, i) < 0.0) columns.col(i) = -columns.col(i);
                break;
            }
        }
    }
    rotation = columns.transpose();
}

}  // namespace detail

// Designs per-component encoder/decoder scalings realizing the waterfilling
// distortions `alloc` of the innovation covariance `lambda_matrix` over AGN
// sub-channels with noise variance Q.  With `printed_decoder_gain` the
// decoder scaling sqrt(alpha_i P lambda_i) is used verbatim instead of the
// error-minimizing sqrt(alpha_i P lambda_i) / (alpha_i P + Q); the resulting
// reconstruction-error trace is then only reported, not checked.
inline std::pair<GainSet, ChannelSpec> design_gains(const Eigen::MatrixXd& lambda_matrix,
                                                    const WaterfillAllocation& alloc, double Q,
                                                    bool printed_decoder_gain = false) {
    if (Q <= 0.0) throw Error("gain design requires positive channel noise variance");
    if (lambda_matrix.rows() != lambda_matrix.cols())
        throw DimensionError("innovation covariance must be square");
    const Eigen::Index p = lambda_matrix.rows();
    if (alloc.eigenvalues.size() != p)
        throw DimensionError("allocation and innovation covariance disagree on dimension");

    GainSet gains;
    gains.innovation_cov = lambda_matrix;
    detail::diagonalize_descending(lambda_matrix, gains.eigenvalues, gains.rotation);
    for (Eigen::Index i = 0; i < p; ++i) {
        if (std::abs(gains.eigenvalues[i] - alloc.eigenvalues[i]) >
            1e-9 * std::max(1.0, std::abs(gains.eigenvalues[i]))) {
            std::ostringstream msg;
            msg << "allocation eigenvalue " << i << " (" << alloc.eigenvalues[i]
                << ") does not match the innovation covariance (" << gains.eigenvalues[i] << ")";
            throw Error(msg.str());
        }
    }

    Eigen::VectorXd powers(p);
    gains.encoder.resize(p);
    gains.decoder.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double lambda = gains.eigenvalues[i];
        const double delta = alloc.deltas[i];
        powers[i] = Q * (lambda / delta - 1.0);
        if (powers[i] < 0.0) powers[i] = 0.0;  // delta == lambda up to roundoff
        if (powers[i] == 0.0) {
            gains.encoder[i] = 0.0;
            gains.decoder[i] = 0.0;
        } else {
            gains.encoder[i] = std::sqrt(powers[i] / lambda);
            gains.decoder[i] = printed_decoder_gain
                                   ? std::sqrt(powers[i] * lambda)
                                   : std::sqrt(powers[i] * lambda) / (powers[i] + Q);
        }
    }
    gains.mix = (gains.encoder.transpose().array() * gains.decoder.array()).matrix().asDiagonal();

    // reconstruction error of the component pipeline:
    //   T = (I - H) diag(lambda) (I - H)^tr + diag(decoder_i^2 Q)
    Eigen::MatrixXd error_matrix =
        (Eigen::MatrixXd::Identity(p, p) - gains.mix) * gains.eigenvalues.asDiagonal() *
            (Eigen::MatrixXd::Identity(p, p) - gains.mix).transpose() +
        Eigen::MatrixXd((gains.decoder.array().square() * Q).matrix().asDiagonal());
    gains.distortion_trace = error_matrix.trace();
    if (!printed_decoder_gain &&
        std::abs(gains.distortion_trace - alloc.total_distortion) >
            1e-8 * std::max(1.0, alloc.total_distortion)) {
        std::ostringstream msg;
        msg << "designed reconstruction error " << gains.distortion_trace
            << " misses the allocation target " << alloc.total_distortion;
        throw NumericalError(msg.str());
    }

    ChannelSpec channel;
    channel.noise_variance = Q;
    channel.total_power = powers.sum();
    channel.alpha = channel.total_power > 0.0
                        ? Eigen::VectorXd(powers / channel.total_power)
                        : Eigen::VectorXd::Constant(p, 1.0 / static_cast<double>(p));
    return {std::move(gains), std::move(channel)};
}

// AGN channel use: b = a + z with z ~ N(0, Q); Q = 0 degenerates to b = a.
inline double channel_step(double a, double Q, StreamRng& rng) {
    if (Q < 0.0) throw Error("channel noise variance must be nonnegative");
    return Q == 0.0 ? a : a + std::sqrt(Q) * rng.gaussian();
}

}  // namespace nardf
