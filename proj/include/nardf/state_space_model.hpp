#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <sstream>
#include <string>
#include <vector>

#include "nardf/common.hpp"

namespace nardf {

// ============================================================================
// Partially observed linear Gauss-Markov source
//
//   X_{t+1} = A X_t + B W_t,   W_t ~ N(0, I_k)
//   Y_t     = C X_t + G V_t,   V_t ~ N(0, I_p)
//
// with X_0 ~ N(x0_mean, x0_cov).  The observed process {Y_t} is the source to
// be reproduced under squared-error distortion.
// ============================================================================

struct StateSpaceModel {
    Eigen::MatrixXd A;        // m x m state transition
    Eigen::MatrixXd B;        // m x k process-noise input
    Eigen::MatrixXd C;        // p x m observation map
    Eigen::MatrixXd G;        // p x p observation-noise gain, nonsingular
    Eigen::VectorXd x0_mean;  // m
    Eigen::MatrixXd x0_cov;   // m x m symmetric PSD

    Eigen::Index state_dim() const { return A.rows(); }
    Eigen::Index noise_dim() const { return B.cols(); }
    Eigen::Index obs_dim() const { return C.rows(); }

    static StateSpaceModel scalar(double a, double b, double c, double g,
                                  double mean0 = 0.0, double var0 = 1.0) {
        StateSpaceModel model;
        model.A = Eigen::MatrixXd::Constant(1, 1, a);
        model.B = Eigen::MatrixXd::Constant(1, 1, b);
        model.C = Eigen::MatrixXd::Constant(1, 1, c);
        model.G = Eigen::MatrixXd::Constant(1, 1, g);
        model.x0_mean = Eigen::VectorXd::Constant(1, mean0);
        model.x0_cov = Eigen::MatrixXd::Constant(1, 1, var0);
        return model;
    }
};

namespace detail {

// symmetric PSD square root via eigendecomposition, negative ripple clamped
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

inline double smallest_singular_value(const Eigen::MatrixXcd& M) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    return svd.singularValues().minCoeff();
}

}  // namespace detail

// Diagnostics for every invariant of StateSpaceModel.  Dimension mismatches
// are structural and throw; invariant violations come back as named strings.
// PBH rank tests cover the assumptions the infinite-horizon path relies on:
// (C, A) detectable and (A, sqrt(B B^tr)) stabilizable.
inline std::vector<std::string> validate_model(const StateSpaceModel& model) {
    const Eigen::Index m = model.A.rows();
    const Eigen::Index k = model.B.cols();
    const Eigen::Index p = model.C.rows();

    auto dim_error = [](const std::string& pair, const std::string& detail) {
        throw DimensionError("state-space model: inconsistent dimensions for " + pair + " (" +
                             detail + ")");
    };
    if (model.A.cols() != m) dim_error("A,A", "A must be square");
    if (model.B.rows() != m) dim_error("A,B", "B must have as many rows as A");
    if (model.C.cols() != m) dim_error("A,C", "C must have as many columns as A has rows");
    if (model.G.rows() != p || model.G.cols() != p) dim_error("C,G", "G must be p x p");
    if (model.x0_mean.size() != m) dim_error("A,x0_mean", "x0_mean must have length m");
    if (model.x0_cov.rows() != m || model.x0_cov.cols() != m)
        dim_error("A,x0_cov", "x0_cov must be m x m");
    (void)k;

    std::vector<std::string> diagnostics;

    const double cov_scale = std::max(1.0, model.x0_cov.cwiseAbs().maxCoeff());
    if ((model.x0_cov - model.x0_cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * cov_scale)
        diagnostics.emplace_back("x0_cov not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> cov_eigs(
        0.5 * (model.x0_cov + model.x0_cov.transpose()));
    if (cov_eigs.eigenvalues().minCoeff() < -1e-12 * cov_scale)
        diagnostics.emplace_back("x0_cov not positive semidefinite");

    if (std::abs(model.G.determinant()) <= 1e-12) diagnostics.emplace_back("G singular");

    // PBH tests at every eigenvalue of A with |lambda| >= 1
    const double scale = std::max(1.0, model.A.cwiseAbs().maxCoeff());
    const double rank_tol = 1e-9 * scale;
    Eigen::EigenSolver<Eigen::MatrixXd> eigs(model.A);
    const Eigen::MatrixXd b_sqrt = detail::psd_sqrt(model.B * model.B.transpose());
    bool detectable = true;
    bool stabilizable = true;
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::complex<double> lambda = eigs.eigenvalues()[i];
        if (std::abs(lambda) < 1.0 - 1e-12) continue;
        Eigen::MatrixXcd pencil_det(m + p, m);
        pencil_det.topRows(m) =
            model.A.cast<std::complex<double>>() - lambda * Eigen::MatrixXcd::Identity(m, m);
        pencil_det.bottomRows(p) = model.C.cast<std::complex<double>>();
        if (detail::smallest_singular_value(pencil_det) <= rank_tol) detectable = false;

        Eigen::MatrixXcd pencil_stab(m, m + m);
        pencil_stab.leftCols(m) =
            model.A.cast<std::complex<double>>() - lambda * Eigen::MatrixXcd::Identity(m, m);
        pencil_stab.rightCols(m) = b_sqrt.cast<std::complex<double>>();
        if (detail::smallest_singular_value(pencil_stab) <= rank_tol) stabilizable = false;
    }
    if (!detectable) diagnostics.emplace_back("undetectable pair");
    if (!stabilizable) diagnostics.emplace_back("unstabilizable pair");

    return diagnostics;
}

}  // namespace nardf
