#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nardf/common.hpp"
#include "nardf/finite_rdf.hpp"
#include "nardf/gauss_realization.hpp"
#include "nardf/model_io.hpp"
#include "nardf/waterfill.hpp"

namespace nardf {

// ============================================================================
// Experiment orchestration: config files in, deterministic result files out.
// Every emitted byte is a function of (config, seed); wall-clock metadata is
// kept on the in-memory record only.
// ============================================================================

struct ExperimentConfig {
    std::string subcommand;

    // waterfill
    std::vector<double> eigenvalues;
    double distortion = 0.0;

    // finite-rdf
    json source;
    json distortion_spec = json{{"kind", "hamming"}};
    std::vector<double> s_grid;
    double tol = 1e-10;
    int max_iter = 10000;

    // gauss-realize / simulate
    json model;
    double distortion_level = 0.0;
    double channel_noise = 1.0;
    bool steady_state = true;
    int trials = 1;
    long long horizon = 10000;
    std::uint64_t seed = 0;
    long long burn_in = -1;

    // output plumbing (not part of the config hash)
    std::string trace_path;
    std::string out_path;
    std::string format;  // "csv" | "json" | "" (subcommand default)
};

struct ResultRecord {
    std::string run_id;
    std::string timestamp;  // informational only; never emitted
    std::string config_hash;
    json scalars = json::object();
    std::vector<std::string> table_header;
    std::vector<std::vector<double>> table_rows;
    std::vector<std::pair<double, double>> curve;  // (distortion, rate_nats)
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t hash = 1469598103934665603ull;
    for (const unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

inline std::string hex64(std::uint64_t value) {
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(value));
    return std::string(buffer);
}

inline std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return std::string(buffer);
}

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm parts{};
    gmtime_r(&now, &parts);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &parts);
    return std::string(buffer);
}

}  // namespace detail

// "lo:hi:count" -> count points from hi down to lo (inclusive), all <= 0
inline std::vector<double> parse_s_grid(const std::string& text) {
    double lo = 0.0, hi = 0.0;
    long count = 0;
    char trailing = '\0';
    if (std::sscanf(text.c_str(), "%lf:%lf:%ld%c", &lo, &hi, &count, &trailing) != 3)
        throw ParseError("s_grid: expected \"lo:hi:count\", got \"" + text + "\"");
    if (count < 1) throw ParseError("s_grid: count must be at least 1");
    if (lo > hi) std::swap(lo, hi);
    if (hi > 0.0) throw ParseError("s_grid: multipliers must be <= 0");
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(count));
    if (count == 1) {
        grid.push_back(hi);
    } else {
        for (long k = 0; k < count; ++k)
            grid.push_back(hi + (lo - hi) * static_cast<double>(k) /
                                    static_cast<double>(count - 1));
    }
    return grid;
}

namespace detail {

inline json resolve_inline_or_path(const json& value, const std::string& field) {
    if (value.is_string()) {
        const std::string path = value.get<std::string>();
        if (!std::filesystem::exists(path))
            throw ParseError(field + ": referenced file \"" + path + "\" does not exist");
        return load_json_file(path);
    }
    if (value.is_object()) return value;
    throw ParseError(field + ": expected a file path or an inline object");
}

inline void validate_config(ExperimentConfig& config) {
    const std::string& sub = config.subcommand;
    if (sub != "waterfill" && sub != "finite-rdf" && sub != "gauss-realize" && sub != "simulate")
        throw ParseError("config: unknown subcommand \"" + sub + "\"");
    if (!(config.tol > 0.0)) throw ParseError("config: tol must be positive");
    if (config.max_iter < 1) throw ParseError("config: max_iter must be at least 1");
    if (config.trials < 1) throw ParseError("config: trials ≥ 1 required");

    if (sub == "waterfill") {
        if (config.eigenvalues.empty())
            throw ParseError("config: waterfill requires a nonempty eigenvalues list");
        if (!(config.distortion > 0.0))
            throw ParseError("config: waterfill requires distortion > 0");
    } else if (sub == "finite-rdf") {
        if (!config.source.is_object())
            throw ParseError("config: finite-rdf requires a source model");
        if (config.s_grid.empty()) throw ParseError("config: s_grid must be nonempty");
        std::sort(config.s_grid.begin(), config.s_grid.end(), std::greater<double>());
        if (config.s_grid.front() > 0.0)
            throw ParseError("config: s_grid entries must be <= 0");
    } else {
        if (sub == "simulate" && !config.model.is_object()) {
            // runnable out of the box: scalar demo instance
            config.model = json{{"A", {{0.5}}}, {"B", {{1.0}}}, {"C", {{1.0}}},
                                {"G", {{1.0}}}, {"x0_mean", {0.0}}, {"x0_cov", {{1.0}}}};
            if (config.distortion_level == 0.0) config.distortion_level = 0.5;
        }
        if (!config.model.is_object())
            throw ParseError("config: " + sub + " requires a model");
        if (!(config.distortion_level > 0.0))
            throw ParseError("config: " + sub + " requires distortion_level > 0");
        if (!(config.channel_noise > 0.0))
            throw ParseError("config: " + sub + " requires channel_noise > 0");
        if (sub == "gauss-realize" && !config.steady_state)
            throw ParseError("config: gauss-realize supports steady_state = true only");
        if (sub == "simulate" && config.horizon < 2)
            throw ParseError("config: simulate requires horizon >= 2");
        if (sub == "simulate" && config.burn_in >= config.horizon)
            throw ParseError("config: burn_in must be smaller than horizon");
    }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& object) {
    detail::reject_unknown_keys(
        object,
        {"subcommand", "eigenvalues", "distortion", "source", "distortion_spec", "s_grid",
         "tol", "max_iter", "model", "distortion_level", "channel_noise", "steady_state",
         "trials", "horizon", "seed", "burn_in", "trace", "out", "format"},
        "config");
    if (!object.contains("subcommand") || !object["subcommand"].is_string())
        throw ParseError("config: missing string key \"subcommand\"");

    ExperimentConfig config;
    config.subcommand = object["subcommand"].get<std::string>();
    if (object.contains("eigenvalues"))
        for (const auto& v : object["eigenvalues"]) config.eigenvalues.push_back(v.get<double>());
    if (object.contains("distortion")) config.distortion = object["distortion"].get<double>();
    if (object.contains("source"))
        config.source = detail::resolve_inline_or_path(object["source"], "source");
    if (object.contains("distortion_spec")) config.distortion_spec = object["distortion_spec"];
    if (object.contains("s_grid")) {
        const json& grid = object["s_grid"];
        if (grid.is_string()) {
            config.s_grid = parse_s_grid(grid.get<std::string>());
        } else if (grid.is_array()) {
            for (const auto& v : grid) config.s_grid.push_back(v.get<double>());
        } else {
            throw ParseError("config: s_grid must be a \"lo:hi:count\" string or an array");
        }
    }
    if (object.contains("tol")) config.tol = object["tol"].get<double>();
    if (object.contains("max_iter")) config.max_iter = object["max_iter"].get<int>();
    if (object.contains("model"))
        config.model = detail::resolve_inline_or_path(object["model"], "model");
    if (object.contains("distortion_level"))
        config.distortion_level = object["distortion_level"].get<double>();
    if (object.contains("channel_noise"))
        config.channel_noise = object["channel_noise"].get<double>();
    if (object.contains("steady_state")) config.steady_state = object["steady_state"].get<bool>();
    if (object.contains("trials")) config.trials = object["trials"].get<int>();
    if (object.contains("horizon")) config.horizon = object["horizon"].get<long long>();
    if (object.contains("seed")) config.seed = object["seed"].get<std::uint64_t>();
    if (object.contains("burn_in")) config.burn_in = object["burn_in"].get<long long>();
    if (object.contains("trace")) config.trace_path = object["trace"].get<std::string>();
    if (object.contains("out")) config.out_path = object["out"].get<std::string>();
    if (object.contains("format")) config.format = object["format"].get<std::string>();

    detail::validate_config(config);
    return config;
}

inline ExperimentConfig load_config(const std::string& path) {
    return config_from_json(load_json_file(path));
}

// Canonical semantic form: subcommand-relevant keys only, defaults
// materialized, stable order.  Output plumbing (out/format/trace) is
// excluded, so the hash tracks exactly the semantically meaningful fields.
inline json canonical_config(const ExperimentConfig& config) {
    json object = json::object();
    object["subcommand"] = config.subcommand;
    if (config.subcommand == "waterfill") {
        object["eigenvalues"] = config.eigenvalues;
        object["distortion"] = config.distortion;
    } else if (config.subcommand == "finite-rdf") {
        object["source"] = config.source;
        object["distortion_spec"] = config.distortion_spec;
        object["s_grid"] = config.s_grid;
        object["tol"] = config.tol;
        object["max_iter"] = config.max_iter;
    } else {
        object["model"] = config.model;
        object["distortion_level"] = config.distortion_level;
        object["channel_noise"] = config.channel_noise;
        object["steady_state"] = config.steady_state;
        if (config.subcommand == "simulate") {
            object["trials"] = config.trials;
            object["horizon"] = config.horizon;
            object["seed"] = config.seed;
            object["burn_in"] = config.burn_in;
            object["tol"] = config.tol;
        } else {
            object["tol"] = config.tol;
        }
    }
    return object;
}

inline std::string config_hash(const ExperimentConfig& config) {
    return detail::hex64(detail::fnv1a(canonical_config(config).dump()));
}

namespace detail {

inline void run_waterfill(const ExperimentConfig& config, ResultRecord& record) {
    Eigen::VectorXd eigenvalues(static_cast<Eigen::Index>(config.eigenvalues.size()));
    for (std::size_t i = 0; i < config.eigenvalues.size(); ++i)
        eigenvalues[static_cast<Eigen::Index>(i)] = config.eigenvalues[i];
    const WaterfillAllocation alloc = allocate(eigenvalues, config.distortion);
    const double rate = rate_of(alloc);
    record.scalars["xi"] = alloc.water_level;
    record.scalars["deltas"] = vector_to_json(alloc.deltas);
    record.scalars["rate_nats"] = rate;
    record.scalars["rate_bits"] = nats_to_bits(rate);
}

inline void run_finite_rdf(const ExperimentConfig& config, ResultRecord& record) {
    const FiniteMarkovSource source = markov_source_from_json(config.source);
    const DistortionSpec rho = distortion_from_json(config.distortion_spec,
                                                    source.alphabet_size_x,
                                                    source.alphabet_size_x);
    SolverOptions options;
    options.tol = config.tol;
    options.max_iter = config.max_iter;
    const std::vector<CurvePoint> curve = rd_curve(source, rho, config.s_grid, options);

    record.table_header = {"s", "rate_nats", "rate_bits", "distortion", "iterations",
                           "converged"};
    for (const CurvePoint& point : curve) {
        record.table_rows.push_back({point.point.s, point.point.rate,
                                     nats_to_bits(point.point.rate), point.point.distortion,
                                     static_cast<double>(point.report.iterations),
                                     point.report.converged ? 1.0 : 0.0});
        record.curve.emplace_back(point.point.distortion, point.point.rate);
    }
    record.scalars["points"] = curve.size();
    record.scalars["horizon"] = source.horizon;
}

inline void run_gauss_realize(const ExperimentConfig& config, ResultRecord& record) {
    const StateSpaceModel model = state_space_from_json(config.model);
    const RiccatiResult result = riccati_infinite(model, config.distortion_level,
                                                  config.channel_noise, config.tol);
    const MatchReport match = matching_check(result);
    record.scalars["sigma_infinity"] = matrix_to_json(result.sigma);
    record.scalars["lambda"] = vector_to_json(result.gains.eigenvalues);
    record.scalars["delta"] = vector_to_json(result.alloc.deltas);
    record.scalars["xi"] = result.alloc.water_level;
    record.scalars["power"] = result.power;
    record.scalars["rate_nats"] = result.rate_nats;
    record.scalars["rate_bits"] = nats_to_bits(result.rate_nats);
    record.scalars["capacity_nats"] = match.capacity_nats;
    record.scalars["capacity_bits"] = nats_to_bits(match.capacity_nats);
    record.scalars["scalar_capacity_nats"] = match.scalar_capacity_nats;
    record.scalars["match_residual"] = match.residual;
    record.scalars["riccati_iterations"] = result.iterations;
    record.scalars["riccati_residual"] = result.residual;
}

inline void write_trace_csv(const std::string& path, const RealizationTrace& trace) {
    std::ofstream stream(path, std::ios::binary);
    if (!stream) throw Error("cannot write trace file \"" + path + "\"");
    stream << "t,x,y,k,gamma,a,b,ytilde\n";
    auto cell = [](const Eigen::MatrixXd& field, Eigen::Index row) {
        std::string joined;
        for (Eigen::Index c = 0; c < field.cols(); ++c) {
            if (c) joined += '|';
            joined += format_double(field(row, c));
        }
        return joined;
    };
    for (Eigen::Index r = 0; r < trace.rows(); ++r) {
        stream << r << ',' << cell(trace.x, r) << ',' << cell(trace.y, r) << ','
               << cell(trace.k, r) << ',' << cell(trace.gamma, r) << ',' << cell(trace.a, r)
               << ',' << cell(trace.b, r) << ',' << cell(trace.y_tilde, r) << '\n';
    }
}

inline void run_simulate(const ExperimentConfig& config, ResultRecord& record) {
    const StateSpaceModel model = state_space_from_json(config.model);
    SimulateOptions options;
    options.trials = config.trials;
    options.horizon = config.horizon;
    options.seed = config.seed;
    options.steady_state = config.steady_state;
    options.burn_in = config.burn_in;
    options.record_trace = !config.trace_path.empty();
    options.riccati_tol = config.tol;
    const SimulationResult sim =
        simulate(model, config.distortion_level, config.channel_noise, options);

    record.table_header = {"trial", "samples", "mean_distortion", "innovation_lag1",
                           "pre_encoder_lag1"};
    for (const TrialStats& stats : sim.per_trial)
        record.table_rows.push_back({static_cast<double>(stats.trial),
                                     static_cast<double>(stats.samples),
                                     stats.mean_distortion, stats.innovation_lag1,
                                     stats.pre_encoder_lag1});
    // summary row, trial index -1
    record.table_rows.push_back({-1.0, static_cast<double>(sim.total_samples),
                                 sim.empirical_distortion, sim.innovation_lag1,
                                 sim.pre_encoder_lag1});

    record.scalars["target_distortion"] = sim.target_distortion;
    record.scalars["empirical_distortion"] = sim.empirical_distortion;
    record.scalars["standard_error"] = sim.standard_error;
    record.scalars["whiteness_threshold"] = sim.whiteness_threshold;
    record.scalars["innovation_lag1"] = sim.innovation_lag1;
    record.scalars["pre_encoder_lag1"] = sim.pre_encoder_lag1;
    record.scalars["total_samples"] = sim.total_samples;
    record.scalars["steady_state"] = sim.steady_state;
    record.scalars["max_design_residual"] = sim.max_design_residual;
    if (sim.steady_state) {
        record.scalars["power"] = sim.design.power;
        record.scalars["rate_nats"] = sim.design.rate_nats;
        record.scalars["rate_bits"] = nats_to_bits(sim.design.rate_nats);
        record.scalars["capacity_nats"] = matching_check(sim.design).capacity_nats;
    }
    if (!config.trace_path.empty()) write_trace_csv(config.trace_path, sim.trace);
}

}  // namespace detail

inline ResultRecord run(const ExperimentConfig& config) {
    ResultRecord record;
    record.config_hash = config_hash(config);
    record.run_id = "run-" + record.config_hash;
    record.timestamp = detail::utc_timestamp();
    if (config.subcommand == "waterfill") {
        detail::run_waterfill(config, record);
    } else if (config.subcommand == "finite-rdf") {
        detail::run_finite_rdf(config, record);
    } else if (config.subcommand == "gauss-realize") {
        detail::run_gauss_realize(config, record);
    } else if (config.subcommand == "simulate") {
        detail::run_simulate(config, record);
    } else {
        throw ParseError("config: unknown subcommand \"" + config.subcommand + "\"");
    }
    return record;
}

inline std::string default_format(const std::string& subcommand) {
    return (subcommand == "waterfill" || subcommand == "gauss-realize") ? "json" : "csv";
}

// Deterministic serialization: CSV uses a header row, '.' decimals, and 17
// significant digits; JSON keeps insertion order.  The timestamp is
// deliberately not part of either representation.
inline std::string emit(const ResultRecord& record, const std::string& format) {
    if (format == "json") {
        json object = json::object();
        object["run_id"] = record.run_id;
        object["config_hash"] = record.config_hash;
        object["results"] = record.scalars;
        if (!record.table_header.empty()) {
            json table = json::object();
            table["header"] = record.table_header;
            table["rows"] = record.table_rows;
            object["table"] = std::move(table);
        }
        if (!record.curve.empty()) {
            json curve = json::array();
            for (const auto& [d, r] : record.curve) curve.push_back(json::array({d, r}));
            object["curve"] = std::move(curve);
        }
        return object.dump(2) + "\n";
    }
    if (format != "csv") throw Error("unknown output format \"" + format + "\"");

    std::string out;
    if (!record.table_header.empty()) {
        for (std::size_t i = 0; i < record.table_header.size(); ++i) {
            if (i) out += ',';
            out += record.table_header[i];
        }
        out += '\n';
        for (const std::vector<double>& row : record.table_rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out += ',';
                out += detail::format_double(row[i]);
            }
            out += '\n';
        }
        return out;
    }
    if (!record.curve.empty() || record.scalars.empty()) {
        out += "distortion,rate_nats\n";
        for (const auto& [d, r] : record.curve)
            out += detail::format_double(d) + "," + detail::format_double(r) + "\n";
        return out;
    }
    // scalar fallback: one header row, one value row; arrays join with '|'
    std::string header, values;
    bool first = true;
    for (const auto& item : record.scalars.items()) {
        if (!first) {
            header += ',';
            values += ',';
        }
        first = false;
        header += item.key();
        const json& value = item.value();
        if (value.is_array()) {
            std::string joined;
            for (std::size_t i = 0; i < value.size(); ++i) {
                if (i) joined += '|';
                joined += detail::format_double(value[i].get<double>());
            }
            values += joined;
        } else if (value.is_boolean()) {
            values += value.get<bool>() ? "1" : "0";
        } else if (value.is_number()) {
            values += detail::format_double(value.get<double>());
        } else {
            values += value.dump();
        }
    }
    out = header + "\n" + values + "\n";
    return out;
}

inline void emit_to_file(const ResultRecord& record, const std::string& format,
                         const std::string& path) {
    std::ofstream stream(path, std::ios::binary);
    if (!stream) throw Error("cannot write output file \"" + path + "\"");
    stream << emit(record, format);
}

}  // namespace nardf
