#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nardf/finite_rdf.hpp"
#include "nardf/mirror_oracle.hpp"
#include "oracles.hpp"

using nardf::DistortionSpec;
using nardf::FiniteMarkovSource;
using nardf::FixedPointResult;
using nardf::MarginalReproduction;
using nardf::SolverOptions;

namespace {

FiniteMarkovSource uniform_binary(int horizon) {
    Eigen::VectorXd pmf(2);
    pmf << 0.5, 0.5;
    return FiniteMarkovSource::iid(pmf, horizon);
}

}  // namespace

TEST_CASE("tilting a uniform marginal concentrates on the cheap symbol") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    const MarginalReproduction uniform = MarginalReproduction::uniform(2, 0);
    const FiniteMarkovSource source = uniform_binary(0);

    const nardf::ReproductionPolicy mild = nardf::tilt_kernel(uniform, source, hamming, -1.0);
    const double match = 1.0 / (1.0 + std::exp(-1.0));
    REQUIRE(mild.prob(0, 0, 0, 0) == Catch::Approx(match).margin(1e-12));
    REQUIRE(mild.prob(0, 0, 1, 1) == Catch::Approx(match).margin(1e-12));

    const nardf::ReproductionPolicy hard = nardf::tilt_kernel(uniform, source, hamming, -50.0);
    REQUIRE(hard.prob(0, 0, 0, 0) == Catch::Approx(1.0).margin(1e-10));
    REQUIRE(hard.prob(0, 0, 1, 1) == Catch::Approx(1.0).margin(1e-10));

    const nardf::ReproductionPolicy flat = nardf::tilt_kernel(uniform, source, hamming, 0.0);
    REQUIRE(flat.prob(0, 0, 0, 0) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("a vanishing marginal row is reported with its history") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    MarginalReproduction broken = MarginalReproduction::uniform(2, 0);
    broken.tables[0].row(0).setZero();
    REQUIRE_THROWS_AS(nardf::tilt_kernel(broken, uniform_binary(0), hamming, -1.0),
                      nardf::DegenerateSupportError);
}

TEST_CASE("positive multipliers are rejected everywhere") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    const MarginalReproduction uniform = MarginalReproduction::uniform(2, 0);
    REQUIRE_THROWS_AS(nardf::tilt_kernel(uniform, uniform_binary(0), hamming, 0.5), nardf::Error);
    REQUIRE_THROWS_AS(nardf::fixed_point_solve(uniform_binary(0), hamming, 0.5), nardf::Error);
    REQUIRE_THROWS_AS(nardf::oracle_minimize(uniform_binary(0), hamming, 0.5), nardf::Error);
}

TEST_CASE("at s = 0 the solver returns zero rate and maximal distortion") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    const FixedPointResult result = nardf::fixed_point_solve(uniform_binary(1), hamming, 0.0);
    REQUIRE(result.report.converged);
    REQUIRE(result.point.rate == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(result.point.distortion == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("horizon zero reproduces the classical memoryless solution") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    Eigen::MatrixXd rho(2, 2);
    rho << 0.0, 1.0, 1.0, 0.0;

    for (double s : {-0.25, -1.0, -2.5}) {
        const FixedPointResult ours = nardf::fixed_point_solve(uniform_binary(0), hamming, s);
        REQUIRE(ours.report.converged);

        const oracle::BaResult ba =
            oracle::blahut_arimoto(Eigen::VectorXd::Constant(2, 0.5), rho, s);
        REQUIRE(ours.point.rate == Catch::Approx(ba.rate).margin(1e-8));
        REQUIRE(ours.point.distortion == Catch::Approx(ba.distortion).margin(1e-8));

        // classical closed form for the uniform binary source under hamming
        REQUIRE(ours.point.rate ==
                Catch::Approx(oracle::binary_hamming_rdf(ours.point.distortion)).margin(1e-8));
    }

    // a skewed source exercises the non-symmetric fixed point
    Eigen::VectorXd pmf(2);
    pmf << 0.3, 0.7;
    const FiniteMarkovSource skewed = FiniteMarkovSource::iid(pmf, 0);
    const FixedPointResult ours = nardf::fixed_point_solve(skewed, hamming, -1.5);
    const oracle::BaResult ba = oracle::blahut_arimoto(pmf, rho, -1.5);
    REQUIRE(ours.point.rate == Catch::Approx(ba.rate).margin(1e-8));
    REQUIRE(ours.point.distortion == Catch::Approx(ba.distortion).margin(1e-8));
}

TEST_CASE("the exact and parametric rate formulas agree at the fixed point") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    const FiniteMarkovSource source = FiniteMarkovSource::binary_symmetric(0.3, 2);
    const FixedPointResult result = nardf::fixed_point_solve(source, hamming, -1.2);
    REQUIRE(result.report.converged);
    REQUIRE(result.report.rate_parametric == Catch::Approx(result.report.rate).margin(1e-8));
}

TEST_CASE("re-tilting the solved marginals reproduces the policy") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    const FiniteMarkovSource source = FiniteMarkovSource::binary_symmetric(0.3, 2);
    const FixedPointResult result = nardf::fixed_point_solve(source, hamming, -1.7);
    REQUIRE(result.report.converged);

    const nardf::ReproductionPolicy retilted =
        nardf::tilt_kernel(result.marginals, source, hamming, -1.7);
    REQUIRE(retilted.sup_distance(result.policy) < 1e-8);
}

TEST_CASE("damping changes the path but not the fixed point") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    const FiniteMarkovSource source = FiniteMarkovSource::binary_symmetric(0.25, 1);
    SolverOptions damped;
    damped.damping = 0.5;
    const FixedPointResult a = nardf::fixed_point_solve(source, hamming, -1.0);
    const FixedPointResult b = nardf::fixed_point_solve(source, hamming, -1.0, damped);
    REQUIRE(b.report.converged);
    REQUIRE(a.point.rate == Catch::Approx(b.point.rate).margin(1e-8));
    REQUIRE(a.point.distortion == Catch::Approx(b.point.distortion).margin(1e-8));
}

TEST_CASE("an exhausted iteration budget is reported, not hidden") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    SolverOptions strict;
    strict.max_iter = 1;
    strict.tol = 1e-16;
    const FixedPointResult result =
        nardf::fixed_point_solve(FiniteMarkovSource::binary_symmetric(0.3, 1), hamming, -2.0,
                                 strict);
    REQUIRE_FALSE(result.report.converged);
    REQUIRE(result.report.iterations == 1);
}

TEST_CASE("the lagrangian sweep matches the classical curve at horizon zero") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    std::vector<double> grid;
    for (int k = 0; k < 21; ++k) grid.push_back(-0.15 - (4.2 - 0.15) * k / 20.0);

    const auto curve = nardf::rd_curve(uniform_binary(0), hamming, grid);
    REQUIRE(curve.size() == grid.size());
    for (std::size_t k = 0; k < curve.size(); ++k) {
        REQUIRE(curve[k].report.converged);
        const double d = curve[k].point.distortion;
        REQUIRE(d > 0.01);
        REQUIRE(d < 0.5);
        REQUIRE(curve[k].point.rate ==
                Catch::Approx(oracle::binary_hamming_rdf(d)).margin(1e-3));
        if (k > 0) {
            REQUIRE(curve[k].point.distortion <= curve[k - 1].point.distortion + 1e-8);
            REQUIRE(curve[k].point.rate >= curve[k - 1].point.rate - 1e-8);
        }
        // multipliers stay strictly negative wherever the rate is positive
        if (curve[k].point.rate > 1e-6) REQUIRE(curve[k].point.s < 0.0);
    }
}

TEST_CASE("misordered multiplier grids are rejected") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    REQUIRE_THROWS_AS(nardf::rd_curve(uniform_binary(0), hamming, {-2.0, -1.0}), nardf::Error);
    REQUIRE_THROWS_AS(nardf::rd_curve(uniform_binary(0), hamming, {1.0, 0.0}), nardf::Error);
    REQUIRE_THROWS_AS(nardf::rd_curve(uniform_binary(0), hamming, {}), nardf::Error);
}

TEST_CASE("the descent oracle agrees with the fixed point on a two-step source") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    const FiniteMarkovSource source = FiniteMarkovSource::binary_symmetric(0.3, 1);
    const double s = -2.0;

    const FixedPointResult fp = nardf::fixed_point_solve(source, hamming, s);
    REQUIRE(fp.report.converged);

    nardf::OracleOptions options;
    options.restarts = 8;
    const nardf::OracleResult oracle_result = nardf::oracle_minimize(source, hamming, s, options);

    REQUIRE(oracle_result.restart_spread <= 1e-6);
    REQUIRE(oracle_result.point.rate == Catch::Approx(fp.point.rate).margin(1e-4));
    REQUIRE(oracle_result.point.distortion == Catch::Approx(fp.point.distortion).margin(1e-4));

    // the minimized objective can only undercut the fixed point's value
    const double fp_objective =
        (fp.point.rate - s * fp.point.distortion) * (source.horizon + 1);
    REQUIRE(oracle_result.objective <= fp_objective + 1e-6);
}
