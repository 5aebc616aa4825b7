#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <utility>

#include "nardf/common.hpp"
#include "nardf/gauss_gains.hpp"
#include "nardf/state_space_model.hpp"

namespace nardf {

// ============================================================================
// Estimator side of the realization: the receiver tracks the state of the
// source from the noisily reconstructed observations.  The recursion is a
// Kalman filter whose measurement map is the component pipeline
//
//   Ktilde_t = Theta (X_t - Xhat_t) + Theta_noise,   Theta = E^tr H E C,
//
// so the gain and covariance updates use Theta and the mixed innovation
// covariance M_t in place of the plain observation matrix.
// ============================================================================

struct FilterState {
    Eigen::VectorXd x_hat;          // state estimate given reconstructions so far
    Eigen::MatrixXd sigma;          // estimation error covariance
    Eigen::MatrixXd mix_covariance; // last M_t used in an update (empty before)

    static FilterState initial(const StateSpaceModel& model) {
        return FilterState{model.x0_mean, model.x0_cov, Eigen::MatrixXd()};
    }
};

// K_t = y_t - C xhat_t,  Lambda_t = C Sigma_t C^tr + G G^tr
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> innovation_step(const StateSpaceModel& model,
                                                                   const FilterState& filter,
                                                                   const Eigen::VectorXd& y) {
    if (y.size() != model.C.rows())
        throw DimensionError("observation and C disagree on dimension");
    Eigen::VectorXd innovation = y - model.C * filter.x_hat;
    Eigen::MatrixXd covariance =
        model.C * filter.sigma * model.C.transpose() + model.G * model.G.transpose();
    return {std::move(innovation), std::move(covariance)};
}

namespace detail {

// symmetric pseudo-inverse; directions with eigenvalue <= rel_tol * max are
// dropped, and `allowed_null` caps how many may be dropped before the matrix
// is declared singular (inactive components contribute legitimate nullspace)
inline Eigen::MatrixXd symmetric_pinv(const Eigen::MatrixXd& matrix, int allowed_null,
                                      const char* label) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix);
    if (solver.info() != Eigen::Success)
        throw NumericalError(std::string(label) + ": eigendecomposition failed");
    const Eigen::VectorXd& eigs = solver.eigenvalues();
    const double peak = eigs.cwiseAbs().maxCoeff();
    if (peak <= 0.0) {
        if (allowed_null >= matrix.rows()) return Eigen::MatrixXd::Zero(matrix.rows(), matrix.cols());
        throw NumericalError(std::string(label) + ": matrix is zero with active components");
    }
    const double cutoff = 1e-12 * peak;
    Eigen::VectorXd inverted = Eigen::VectorXd::Zero(eigs.size());
    int dropped = 0;
    double smallest_kept = peak;
    for (Eigen::Index i = 0; i < eigs.size(); ++i) {
        if (eigs[i] <= cutoff) {
            ++dropped;
        } else {
            inverted[i] = 1.0 / eigs[i];
            smallest_kept = std::min(smallest_kept, eigs[i]);
        }
    }
    if (dropped > allowed_null) {
        std::ostringstream msg;
        msg << label << ": singular beyond the inactive components (condition number "
            << peak / std::max(smallest_kept, cutoff) << ", nullity " << dropped << " > "
            << allowed_null << ")";
        throw NumericalError(msg.str());
    }
    return solver.eigenvectors() * inverted.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace detail

namespace detail {

struct FilterStepMatrices {
    Eigen::MatrixXd theta;      // E^tr H E C
    Eigen::MatrixXd mix_cov;    // M_t
    Eigen::MatrixXd gain;       // A Sigma Theta^tr M^+
    Eigen::MatrixXd sigma_next;
};

// Covariance half of the update:
//   Theta   = E^tr H E C
//   M_t     = Theta Sigma_t Theta^tr + (E^tr H E) G G^tr (E^tr H E)^tr
//             + E^tr diag(decoder_i^2 Q) E
//   gain    = A Sigma_t Theta^tr M_t^+
//   Sigma'  = A Sigma A^tr + B B^tr - gain M_t gain^tr   (symmetrized)
inline FilterStepMatrices covariance_step(const StateSpaceModel& model,
                                          const Eigen::MatrixXd& sigma, const GainSet& gains,
                                          const ChannelSpec& channel) {
    const Eigen::Index p = model.C.rows();
    if (gains.rotation.rows() != p)
        throw DimensionError("gain set and observation space disagree on dimension");

    FilterStepMatrices step;
    const Eigen::MatrixXd mixer =
        gains.rotation.transpose() * gains.mix * gains.rotation;  // E^tr H E
    step.theta = mixer * model.C;
    const Eigen::MatrixXd noise_term =
        gains.rotation.transpose() *
        Eigen::MatrixXd((gains.decoder.array().square() * channel.noise_variance)
                            .matrix()
                            .asDiagonal()) *
        gains.rotation;
    step.mix_cov = step.theta * sigma * step.theta.transpose() +
                   mixer * model.G * model.G.transpose() * mixer.transpose() + noise_term;
    step.mix_cov = 0.5 * (step.mix_cov + step.mix_cov.transpose()).eval();

    // untransmitted components contribute a legitimate nullspace to M
    int inactive = 0;
    for (Eigen::Index i = 0; i < p; ++i)
        if (gains.mix(i, i) == 0.0) ++inactive;
    const Eigen::MatrixXd pinv =
        symmetric_pinv(step.mix_cov, inactive, "mixed innovation covariance");

    step.gain = model.A * sigma * step.theta.transpose() * pinv;
    Eigen::MatrixXd next = model.A * sigma * model.A.transpose() +
                           model.B * model.B.transpose() -
                           step.gain * step.mix_cov * step.gain.transpose();
    step.sigma_next = 0.5 * (next + next.transpose());
    return step;
}

}  // namespace detail

// One filter update driven by the reconstructed observation ytilde_t:
//   xhat' = A xhat + gain (ytilde - C xhat)
// with gain, M_t, and Sigma' from the covariance step above.
inline FilterState kalman_update(const StateSpaceModel& model, const FilterState& filter,
                                 const GainSet& gains, const ChannelSpec& channel,
                                 const Eigen::VectorXd& ytilde) {
    if (ytilde.size() != model.C.rows())
        throw DimensionError("reconstructed observation and C disagree on dimension");
    detail::FilterStepMatrices step =
        detail::covariance_step(model, filter.sigma, gains, channel);

    FilterState next;
    next.x_hat = model.A * filter.x_hat + step.gain * (ytilde - model.C * filter.x_hat);
    next.sigma = std::move(step.sigma_next);
    next.mix_covariance = std::move(step.mix_cov);
    return next;
}

}  // namespace nardf
