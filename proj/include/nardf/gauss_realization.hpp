#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nardf/common.hpp"
#include "nardf/gauss_filter.hpp"
#include "nardf/gauss_gains.hpp"
#include "nardf/rng.hpp"
#include "nardf/state_space_model.hpp"
#include "nardf/waterfill.hpp"

namespace nardf {

// ============================================================================
// End-to-end realization of the Gaussian solution: innovation pre-encoder,
// per-component AGN channels, pre-decoder, and the modified Kalman filter,
// plus the infinite-horizon fixed point and Monte-Carlo verification.
// ============================================================================

// Gamma_t = E K_t, per-component channel inputs a_i = encoder_i * Gamma_i
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> encode_step(const GainSet& gains,
                                                               const Eigen::VectorXd& innovation) {
    if (innovation.size() != gains.rotation.rows())
        throw DimensionError("innovation and rotation disagree on dimension");
    Eigen::VectorXd gamma = gains.rotation * innovation;
    Eigen::VectorXd inputs = gains.encoder.transpose().cwiseProduct(gamma);
    return {std::move(gamma), std::move(inputs)};
}

// Gammatilde_i = decoder_i * b_i; Ktilde = E^tr Gammatilde; Ytilde = Ktilde + C xhat
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> decode_step(const StateSpaceModel& model,
                                                               const GainSet& gains,
                                                               const Eigen::VectorXd& received,
                                                               const FilterState& filter) {
    if (received.size() != gains.decoder.size())
        throw DimensionError("channel outputs and decoder disagree on dimension");
    Eigen::VectorXd ktilde = gains.rotation.transpose() * gains.decoder.cwiseProduct(received);
    Eigen::VectorXd ytilde = ktilde + model.C * filter.x_hat;
    return {std::move(ktilde), std::move(ytilde)};
}

struct RiccatiResult {
    Eigen::MatrixXd sigma;        // steady estimation-error covariance
    Eigen::MatrixXd lambda;       // steady innovation covariance
    WaterfillAllocation alloc;    // steady distortion allocation
    GainSet gains;
    ChannelSpec channel;
    Eigen::MatrixXd filter_gain;  // steady A Sigma Theta^tr M^+
    double power = 0.0;           // P = Q sum(lambda_i/delta_i - 1)
    double rate_nats = 0.0;       // (1/2) sum ln(lambda_i/delta_i)
    int iterations = 0;
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
};

namespace detail {

inline void require_clean_model(const StateSpaceModel& model) {
    const std::vector<std::string> diagnostics = validate_model(model);
    if (diagnostics.empty()) return;
    std::string joined = "model diagnostics: ";
    for (std::size_t i = 0; i < diagnostics.size(); ++i) {
        if (i) joined += "; ";
        joined += diagnostics[i];
    }
    throw Error(joined);
}

struct DesignedStep {
    Eigen::MatrixXd lambda;
    WaterfillAllocation alloc;
    GainSet gains;
    ChannelSpec channel;
    bool clamped = false;  // distortion target exceeded the innovation variance
};

// innovation covariance of the current Sigma, waterfilled and gain-designed;
// an infeasibly large target is clamped to the total innovation variance
inline DesignedStep design_from_sigma(const StateSpaceModel& model, const Eigen::MatrixXd& sigma,
                                      double distortion, double Q, bool printed_decoder_gain) {
    DesignedStep step;
    step.lambda = model.C * sigma * model.C.transpose() + model.G * model.G.transpose();
    Eigen::VectorXd eigs;
    Eigen::MatrixXd rotation;
    diagonalize_descending(step.lambda, eigs, rotation);
    const double total = eigs.sum();
    double target = distortion;
    if (target > total) {
        target = total;
        step.clamped = true;
    }
    step.alloc = allocate(eigs, target);
    auto designed = design_gains(step.lambda, step.alloc, Q, printed_decoder_gain);
    step.gains = std::move(designed.first);
    step.channel = std::move(designed.second);
    return step;
}

}  // namespace detail

// Iterates Sigma -> Lambda -> waterfilling -> gains -> Sigma' to a fixed
// point; returns the limit objects, the steady power, and the steady rate.
inline RiccatiResult riccati_infinite(const StateSpaceModel& model, double distortion, double Q,
                                      double tol = 1e-9, int max_iter = 100000,
                                      bool printed_decoder_gain = false) {
    detail::require_clean_model(model);
    if (distortion <= 0.0) throw InfeasibleError("distortion level must be positive");

    RiccatiResult result;
    Eigen::MatrixXd sigma = model.x0_cov;
    for (int iter = 1; iter <= max_iter; ++iter) {
        detail::DesignedStep step =
            detail::design_from_sigma(model, sigma, distortion, Q, printed_decoder_gain);
        detail::FilterStepMatrices matrices =
            detail::covariance_step(model, sigma, step.gains, step.channel);
        result.residual = (matrices.sigma_next - sigma).cwiseAbs().maxCoeff();
        sigma = std::move(matrices.sigma_next);
        result.iterations = iter;
        if (result.residual < tol) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged) {
        std::ostringstream msg;
        msg << "steady-state iteration did not converge within " << max_iter
            << " steps (residual " << result.residual << ")";
        throw NumericalError(msg.str());
    }

    detail::DesignedStep step =
        detail::design_from_sigma(model, sigma, distortion, Q, printed_decoder_gain);
    if (step.clamped) {
        std::ostringstream msg;
        msg << "distortion level " << distortion
            << " exceeds the steady innovation variance; feasible range (0, "
            << step.gains.eigenvalues.sum() << "]";
        throw InfeasibleError(msg.str());
    }
    detail::FilterStepMatrices matrices =
        detail::covariance_step(model, sigma, step.gains, step.channel);

    result.sigma = std::move(sigma);
    result.lambda = std::move(step.lambda);
    result.alloc = std::move(step.alloc);
    result.gains = std::move(step.gains);
    result.channel = std::move(step.channel);
    result.filter_gain = std::move(matrices.gain);
    result.power = result.channel.total_power;
    result.rate_nats = rate_of(result.alloc);
    return result;
}

struct MatchReport {
    double rate_nats = 0.0;
    double capacity_nats = 0.0;         // sum of per-component AGN capacities
    double scalar_capacity_nats = 0.0;  // (1/2) ln(1 + P/Q), one shared channel
    double residual = 0.0;              // |rate - capacity|
    double scalar_gap = 0.0;            // |rate - scalar capacity|
    Eigen::VectorXd per_component;      // (1/2) ln(1 + alpha_i P / Q)
    bool matched = false;               // residual <= 1e-8
};

// Rate/capacity matching at the fixed point.  Per component,
//   (1/2) ln(lambda_i/delta_i) = (1/2) ln(1 + alpha_i P / Q)
// holds by construction of the powers; the report quantifies the residual and
// additionally shows the single-shared-channel capacity for comparison.
inline MatchReport matching_check(const RiccatiResult& result) {
    MatchReport report;
    report.rate_nats = result.rate_nats;
    const double Q = result.channel.noise_variance;
    const Eigen::Index p = result.channel.alpha.size();
    report.per_component.resize(p);
    for (Eigen::Index i = 0; i < p; ++i)
        report.per_component[i] =
            0.5 * std::log1p(result.channel.alpha[i] * result.power / Q);
    report.capacity_nats = report.per_component.sum();
    report.scalar_capacity_nats = 0.5 * std::log1p(result.power / Q);
    report.residual = std::abs(report.rate_nats - report.capacity_nats);
    report.scalar_gap = std::abs(report.rate_nats - report.scalar_capacity_nats);
    report.matched = report.residual <= 1e-8;
    return report;
}

struct RealizationTrace {
    Eigen::MatrixXd x, y, k, gamma, a, b, gamma_tilde, k_tilde, y_tilde;
    Eigen::VectorXd distortion;  // per-step squared error

    Eigen::Index rows() const { return distortion.size(); }
};

struct SimulateOptions {
    int trials = 1;
    long long horizon = 100000;
    std::uint64_t seed = 0;
    bool steady_state = true;
    long long burn_in = -1;  // negative: min(1000, horizon/10)
    bool record_trace = false;
    bool printed_decoder_gain = false;
    double riccati_tol = 1e-9;
    int riccati_max_iter = 100000;
};

struct TrialStats {
    int trial = 0;
    long long samples = 0;
    double mean_distortion = 0.0;
    double innovation_lag1 = 0.0;   // max per-component |lag-1 autocorr| of Gammatilde
    double pre_encoder_lag1 = 0.0;  // same for Gamma (diagnostic; see below)
};

struct SimulationResult {
    double target_distortion = 0.0;
    double empirical_distortion = 0.0;
    double standard_error = 0.0;  // batch means
    double innovation_lag1 = 0.0;
    double pre_encoder_lag1 = 0.0;
    double whiteness_threshold = 0.0;  // 3 / sqrt(lag pairs)
    double max_design_residual = 0.0;  // max |trace T_t - D| over designed steps
    long long total_samples = 0;
    bool steady_state = true;
    RiccatiResult design;  // meaningful in steady-state mode
    std::vector<TrialStats> per_trial;
    RealizationTrace trace;  // trial 0, when recorded
};

namespace detail {

inline Eigen::VectorXd gaussian_vector(StreamRng& rng, Eigen::Index dim) {
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.gaussian();
    return v;
}

// per-component lag-1 autocorrelation accumulator
struct Lag1Accumulator {
    Eigen::VectorXd sum, sum_sq, cross, previous;
    long long count = 0;
    bool has_previous = false;

    explicit Lag1Accumulator(Eigen::Index dim)
        : sum(Eigen::VectorXd::Zero(dim)),
          sum_sq(Eigen::VectorXd::Zero(dim)),
          cross(Eigen::VectorXd::Zero(dim)),
          previous(Eigen::VectorXd::Zero(dim)) {}

    void push(const Eigen::VectorXd& v) {
        sum += v;
        sum_sq += v.cwiseProduct(v);
        if (has_previous) cross += v.cwiseProduct(previous);
        previous = v;
        has_previous = true;
        ++count;
    }

    // max over components of |corr(v_t, v_{t-1})|
    double max_abs_corr() const {
        if (count < 3) return 0.0;
        double worst = 0.0;
        const double n = static_cast<double>(count);
        const double pairs = static_cast<double>(count - 1);
        for (Eigen::Index i = 0; i < sum.size(); ++i) {
            const double mean = sum[i] / n;
            const double var = sum_sq[i] / n - mean * mean;
            if (var <= 0.0) continue;
            const double cov = cross[i] / pairs - mean * mean;
            worst = std::max(worst, std::abs(cov / var));
        }
        return worst;
    }
};

struct TrialOutput {
    TrialStats stats;
    std::vector<double> batch_means;
    double max_design_residual = 0.0;
};

inline int thread_count_from_env() {
    const char* raw = std::getenv("NARDF_THREADS");
    if (!raw) return 1;
    const long parsed = std::strtol(raw, nullptr, 10);
    if (parsed < 1) return 1;
    const unsigned hardware = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<int>(std::min<long>(parsed, hardware));
}

}  // namespace detail

// Runs the full loop — source step, innovation, encode, channel, decode,
// filter — and reports empirical per-symbol squared error with a batch-means
// standard error plus whiteness statistics.  The filter innovations
// Gammatilde_t are the sequence that is white under correct filtering; the
// pre-encoder innovations Gamma_t retain lag-1 correlation through the state
// estimate whenever the channel is noisy, so their autocorrelation is
// reported as a diagnostic rather than checked against the threshold.
inline SimulationResult simulate(const StateSpaceModel& model, double distortion, double Q,
                                 const SimulateOptions& options = {}) {
    detail::require_clean_model(model);
    if (options.trials < 1) throw Error("simulate: need at least one trial");
    if (options.horizon < 2) throw Error("simulate: horizon must be at least 2");

    SimulationResult result;
    result.target_distortion = distortion;
    result.steady_state = options.steady_state;
    if (options.steady_state)
        result.design = riccati_infinite(model, distortion, Q, options.riccati_tol,
                                         options.riccati_max_iter, options.printed_decoder_gain);

    const long long burn =
        options.burn_in >= 0 ? options.burn_in : std::min<long long>(1000, options.horizon / 10);
    if (burn >= options.horizon)
        throw Error("simulate: burn-in consumes the whole horizon");

    const Eigen::Index m = model.A.rows();
    const Eigen::Index p = model.C.rows();
    const Eigen::MatrixXd x0_root = detail::psd_sqrt(model.x0_cov);
    const long long kept = options.horizon - burn;
    const long long batch_length = std::max<long long>(1, kept / 64);

    std::vector<detail::TrialOutput> outputs(static_cast<std::size_t>(options.trials));

    auto run_trial = [&](int trial) {
        // independent streams per (trial, draw kind, step)
        constexpr std::uint64_t kInitialState = 0, kProcess = 1, kObservation = 2, kChannel = 3;
        StreamRng rng_x0 = StreamRng::derive(options.seed,
                                             {static_cast<std::uint64_t>(trial), kInitialState, 0});
        Eigen::VectorXd x = model.x0_mean + x0_root * detail::gaussian_vector(rng_x0, m);
        FilterState filter{model.x0_mean,
                           options.steady_state ? result.design.sigma : model.x0_cov,
                           Eigen::MatrixXd()};

        detail::TrialOutput out;
        out.stats.trial = trial;
        detail::Lag1Accumulator acc_gamma(p), acc_gamma_tilde(p);
        double total = 0.0;
        double batch_total = 0.0;
        long long batch_fill = 0;
        const bool tracing = options.record_trace && trial == 0;
        RealizationTrace* trace = tracing ? &result.trace : nullptr;
        if (trace) {
            const Eigen::Index rows = static_cast<Eigen::Index>(options.horizon);
            trace->x.resize(rows, m);
            trace->y.resize(rows, p);
            trace->k.resize(rows, p);
            trace->gamma.resize(rows, p);
            trace->a.resize(rows, p);
            trace->b.resize(rows, p);
            trace->gamma_tilde.resize(rows, p);
            trace->k_tilde.resize(rows, p);
            trace->y_tilde.resize(rows, p);
            trace->distortion.resize(rows);
        }

        for (long long t = 0; t < options.horizon; ++t) {
            StreamRng rng_v = StreamRng::derive(
                options.seed, {static_cast<std::uint64_t>(trial), kObservation,
                               static_cast<std::uint64_t>(t)});
            StreamRng rng_w = StreamRng::derive(
                options.seed,
                {static_cast<std::uint64_t>(trial), kProcess, static_cast<std::uint64_t>(t)});
            StreamRng rng_z = StreamRng::derive(
                options.seed,
                {static_cast<std::uint64_t>(trial), kChannel, static_cast<std::uint64_t>(t)});

            const Eigen::VectorXd y =
                model.C * x + model.G * detail::gaussian_vector(rng_v, model.G.cols());

            const GainSet* gains = nullptr;
            const ChannelSpec* channel = nullptr;
            detail::DesignedStep designed;
            detail::FilterStepMatrices matrices;
            if (options.steady_state) {
                gains = &result.design.gains;
                channel = &result.design.channel;
            } else {
                designed = detail::design_from_sigma(model, filter.sigma, distortion, Q,
                                                     options.printed_decoder_gain);
                out.max_design_residual =
                    std::max(out.max_design_residual,
                             std::abs(designed.gains.distortion_trace - distortion));
                matrices = detail::covariance_step(model, filter.sigma, designed.gains,
                                                   designed.channel);
                gains = &designed.gains;
                channel = &designed.channel;
            }

            const Eigen::VectorXd k = y - model.C * filter.x_hat;
            auto [gamma, inputs] = encode_step(*gains, k);
            Eigen::VectorXd received(p);
            for (Eigen::Index i = 0; i < p; ++i)
                received[i] = channel_step(inputs[i], channel->noise_variance, rng_z);
            Eigen::VectorXd gamma_tilde = gains->decoder.cwiseProduct(received);
            Eigen::VectorXd ktilde = gains->rotation.transpose() * gamma_tilde;
            Eigen::VectorXd ytilde = ktilde + model.C * filter.x_hat;

            const double sample = (y - ytilde).squaredNorm();
            if (t >= burn) {
                total += sample;
                batch_total += sample;
                if (++batch_fill == batch_length) {
                    out.batch_means.push_back(batch_total / static_cast<double>(batch_length));
                    batch_total = 0.0;
                    batch_fill = 0;
                }
                acc_gamma.push(gamma);
                acc_gamma_tilde.push(gamma_tilde);
            }
            if (trace) {
                const Eigen::Index r = static_cast<Eigen::Index>(t);
                trace->x.row(r) = x.transpose();
                trace->y.row(r) = y.transpose();
                trace->k.row(r) = k.transpose();
                trace->gamma.row(r) = gamma.transpose();
                trace->a.row(r) = inputs.transpose();
                trace->b.row(r) = received.transpose();
                trace->gamma_tilde.row(r) = gamma_tilde.transpose();
                trace->k_tilde.row(r) = ktilde.transpose();
                trace->y_tilde.row(r) = ytilde.transpose();
                trace->distortion[r] = sample;
            }

            if (options.steady_state) {
                filter.x_hat = model.A * filter.x_hat + result.design.filter_gain * ktilde;
            } else {
                filter.x_hat = model.A * filter.x_hat + matrices.gain * ktilde;
                filter.sigma = matrices.sigma_next;
            }
            x = model.A * x + model.B * detail::gaussian_vector(rng_w, model.B.cols());
        }

        out.stats.samples = kept;
        out.stats.mean_distortion = total / static_cast<double>(kept);
        out.stats.innovation_lag1 = acc_gamma_tilde.max_abs_corr();
        out.stats.pre_encoder_lag1 = acc_gamma.max_abs_corr();
        outputs[static_cast<std::size_t>(trial)] = std::move(out);
    };

    const int workers = std::min(detail::thread_count_from_env(), options.trials);
    if (workers <= 1) {
        for (int trial = 0; trial < options.trials; ++trial) run_trial(trial);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int trial = w; trial < options.trials; trial += workers) run_trial(trial);
            });
        for (std::thread& worker : pool) worker.join();
    }

    // merge in trial order so results do not depend on scheduling
    std::vector<double> batch_means;
    double grand_total = 0.0;
    long long grand_samples = 0;
    double lag_tilde = 0.0;
    double lag_gamma = 0.0;
    for (const detail::TrialOutput& out : outputs) {
        result.per_trial.push_back(out.stats);
        batch_means.insert(batch_means.end(), out.batch_means.begin(), out.batch_means.end());
        grand_total += out.stats.mean_distortion * static_cast<double>(out.stats.samples);
        grand_samples += out.stats.samples;
        lag_tilde = std::max(lag_tilde, out.stats.innovation_lag1);
        lag_gamma = std::max(lag_gamma, out.stats.pre_encoder_lag1);
        result.max_design_residual = std::max(result.max_design_residual, out.max_design_residual);
    }
    if (options.steady_state)
        result.max_design_residual =
            std::abs(result.design.gains.distortion_trace - distortion);

    result.total_samples = grand_samples;
    result.empirical_distortion = grand_total / static_cast<double>(grand_samples);
    result.innovation_lag1 = lag_tilde;
    result.pre_encoder_lag1 = lag_gamma;
    result.whiteness_threshold =
        3.0 / std::sqrt(static_cast<double>(std::max<long long>(1, grand_samples - 1)));

    if (batch_means.size() >= 2) {
        double mean = 0.0;
        for (const double v : batch_means) mean += v;
        mean /= static_cast<double>(batch_means.size());
        double var = 0.0;
        for (const double v : batch_means) var += (v - mean) * (v - mean);
        var /= static_cast<double>(batch_means.size() - 1);
        result.standard_error = std::sqrt(var / static_cast<double>(batch_means.size()));
    } else {
        result.standard_error = std::numeric_limits<double>::quiet_NaN();
    }
    return result;
}

}  // namespace nardf
