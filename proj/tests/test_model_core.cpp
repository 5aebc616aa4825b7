#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "nardf/common.hpp"
#include "nardf/distortion.hpp"
#include "nardf/markov_source.hpp"
#include "nardf/reproduction_policy.hpp"
#include "nardf/rng.hpp"
#include "nardf/state_space_model.hpp"

using nardf::DistortionSpec;
using nardf::FiniteMarkovSource;
using nardf::ReproductionPolicy;
using nardf::StateSpaceModel;
using nardf::StreamRng;

namespace {

StateSpaceModel scalar_model(double a, double b, double c, double g) {
    StateSpaceModel model;
    model.A = Eigen::MatrixXd::Constant(1, 1, a);
    model.B = Eigen::MatrixXd::Constant(1, 1, b);
    model.C = Eigen::MatrixXd::Constant(1, 1, c);
    model.G = Eigen::MatrixXd::Constant(1, 1, g);
    model.x0_mean = Eigen::VectorXd::Zero(1);
    model.x0_cov = Eigen::MatrixXd::Identity(1, 1);
    return model;
}

bool mentions(const std::vector<std::string>& diagnostics, const std::string& needle) {
    for (const std::string& d : diagnostics)
        if (d.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("a healthy scalar model produces no diagnostics") {
    REQUIRE(nardf::validate_model(scalar_model(0.5, 1.0, 1.0, 1.0)).empty());
}

TEST_CASE("singular observation-noise gain is diagnosed") {
    const auto diagnostics = nardf::validate_model(scalar_model(0.5, 1.0, 1.0, 0.0));
    REQUIRE_FALSE(diagnostics.empty());
    REQUIRE(mentions(diagnostics, "G"));
}

TEST_CASE("unstable unobserved dynamics are diagnosed") {
    const auto undetectable = nardf::validate_model(scalar_model(2.0, 1.0, 0.0, 1.0));
    REQUIRE(mentions(undetectable, "detect"));

    const auto unstabilizable = nardf::validate_model(scalar_model(2.0, 0.0, 1.0, 1.0));
    REQUIRE(mentions(unstabilizable, "stabiliz"));

    // stable dynamics need neither observability nor controllability
    REQUIRE(nardf::validate_model(scalar_model(0.9, 0.0, 0.0, 1.0)).size() == 0);
}

TEST_CASE("dimension mismatches name the offending pair") {
    StateSpaceModel model = scalar_model(0.5, 1.0, 1.0, 1.0);
    model.C = Eigen::MatrixXd::Ones(1, 2);
    try {
        (void)nardf::validate_model(model);
        FAIL("expected a dimension error");
    } catch (const nardf::DimensionError& err) {
        const std::string what = err.what();
        REQUIRE(what.find("A") != std::string::npos);
        REQUIRE(what.find("C") != std::string::npos);
    }
}

TEST_CASE("hamming and squared-error distortion evaluate as defined") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    REQUIRE(nardf::evaluate_distortion(hamming, std::vector<int>{0, 1}, std::vector<int>{0, 1}) == 0.0);
    REQUIRE(nardf::evaluate_distortion(hamming, std::vector<int>{0, 1}, std::vector<int>{1, 1}) == 1.0);
    REQUIRE(nardf::evaluate_distortion(hamming, std::vector<int>{1, 1, 0}, std::vector<int>{0, 0, 1}) == 3.0);

    const DistortionSpec sq = DistortionSpec::squared();
    Eigen::MatrixXd x(2, 1), y(2, 1);
    x << 1.0, 2.0;
    y << 0.0, 0.0;
    REQUIRE(nardf::evaluate_distortion(sq, x, y) == Catch::Approx(5.0));
}

TEST_CASE("distortion is additive across a split of the horizon") {
    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    const std::vector<int> x = {0, 1, 1, 0, 1};
    const std::vector<int> y = {1, 1, 0, 0, 0};
    const double whole = nardf::evaluate_distortion(hamming, x, y);
    const double head = nardf::evaluate_distortion(hamming, std::vector<int>{x[0], x[1]}, std::vector<int>{y[0], y[1]});
    const double tail = nardf::evaluate_distortion(hamming, std::vector<int>{x[2], x[3], x[4]}, std::vector<int>{y[2], y[3], y[4]});
    REQUIRE(whole == head + tail);
}

TEST_CASE("malformed distortion inputs are rejected") {
    Eigen::MatrixXd neg(2, 2);
    neg << 0.0, 1.0, -0.5, 0.0;
    REQUIRE_THROWS_AS(DistortionSpec::from_table(neg), nardf::Error);

    Eigen::MatrixXd nan_table = Eigen::MatrixXd::Zero(2, 2);
    nan_table(0, 1) = std::nan("");
    REQUIRE_THROWS_AS(DistortionSpec::from_table(nan_table), nardf::Error);

    const DistortionSpec hamming = DistortionSpec::hamming(2, 2);
    REQUIRE_THROWS_AS(nardf::evaluate_distortion(hamming, std::vector<int>{0, 1}, std::vector<int>{0}), nardf::DimensionError);
}

TEST_CASE("markov source validation checks stochasticity") {
    FiniteMarkovSource good = FiniteMarkovSource::binary_symmetric(0.3, 2);
    REQUIRE(good.validate().empty());

    FiniteMarkovSource bad = good;
    bad.transition[0](0, 0) = 0.9;  // row 0 now sums to 1.2
    REQUIRE_FALSE(bad.validate().empty());

    FiniteMarkovSource neg = good;
    neg.initial_pmf[0] = -0.5;
    neg.initial_pmf[1] = 1.5;
    REQUIRE_FALSE(neg.validate().empty());
}

TEST_CASE("sequence probabilities multiply the chain factors") {
    const FiniteMarkovSource source = FiniteMarkovSource::binary_symmetric(0.3, 2);
    // P(x0=0) * P(1|0) * P(1|1) = 0.5 * 0.3 * 0.7
    REQUIRE(source.sequence_prob({0, 1, 1}) == Catch::Approx(0.5 * 0.3 * 0.7).margin(1e-15));

    Eigen::VectorXd pmf(2);
    pmf << 0.25, 0.75;
    const FiniteMarkovSource iid = FiniteMarkovSource::iid(pmf, 1);
    REQUIRE(iid.sequence_prob({1, 0}) == Catch::Approx(0.75 * 0.25).margin(1e-15));

    double total = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) total += source.sequence_prob({a, b, c});
    REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("random policies have normalized rows and serialize losslessly") {
    StreamRng rng = StreamRng::derive(7, {0});
    const ReproductionPolicy policy = ReproductionPolicy::random(2, 3, 2, rng);
    REQUIRE(policy.validate().empty());
    for (int i = 0; i <= 2; ++i) {
        const Eigen::MatrixXd& kernel = policy.kernel(i);
        for (Eigen::Index r = 0; r < kernel.rows(); ++r)
            REQUIRE(kernel.row(r).sum() == Catch::Approx(1.0).margin(1e-12));
    }

    const nlohmann::ordered_json doc = policy.to_json();
    const ReproductionPolicy back = ReproductionPolicy::from_json(doc);
    REQUIRE(back.alphabet_x() == policy.alphabet_x());
    REQUIRE(back.alphabet_y() == policy.alphabet_y());
    REQUIRE(back.horizon() == policy.horizon());
    for (int i = 0; i <= 2; ++i) REQUIRE(back.kernel(i) == policy.kernel(i));
}

TEST_CASE("history-tree capacity caps trigger explicit errors") {
    REQUIRE_THROWS_AS(ReproductionPolicy(2, 2, nardf::kMaxPolicyHorizon + 1),
                      nardf::CapacityError);
    REQUIRE_THROWS_AS(ReproductionPolicy(2, nardf::kMaxReproductionAlphabet + 1, 1),
                      nardf::CapacityError);
}

TEST_CASE("policy lookups read only the realized history prefix") {
    StreamRng rng = StreamRng::derive(11, {0});
    const ReproductionPolicy policy = ReproductionPolicy::random(2, 2, 2, rng);
    // at step 1 the value may depend on x_0, x_1, y_0 but not on x_2
    const double base = policy.prob_seq(1, {0, 1, 0}, {1, 0}, 1);
    const double flipped = policy.prob_seq(1, {0, 1, 1}, {1, 0}, 1);
    REQUIRE(base == flipped);
}

TEST_CASE("stream rng is a pure function of seed and path") {
    StreamRng a = StreamRng::derive(42, {3, 1});
    StreamRng b = StreamRng::derive(42, {3, 1});
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    StreamRng c = StreamRng::derive(42, {3, 2});
    StreamRng d = StreamRng::derive(42, {3, 1});
    bool any_different = false;
    for (int i = 0; i < 10; ++i) any_different |= (c.next_u64() != d.next_u64());
    REQUIRE(any_different);
}

TEST_CASE("gaussian draws have sane first and second moments") {
    StreamRng rng = StreamRng::derive(5, {0});
    const int n = 200000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.gaussian();
        sum += z;
        sum_sq += z * z;
    }
    REQUIRE(sum / n == Catch::Approx(0.0).margin(0.01));
    REQUIRE(sum_sq / n == Catch::Approx(1.0).margin(0.02));
}
