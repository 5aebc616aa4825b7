// Command-line front end: builds a config from flags (or loads one from a
// file), runs the requested computation, and writes its deterministic output.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nardf/harness.hpp"

namespace {

std::vector<double> parse_comma_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        try {
            values.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw nardf::ParseError("expected a comma-separated number list, got \"" + text +
                                    "\"");
        }
    }
    if (values.empty())
        throw nardf::ParseError("expected a comma-separated number list, got \"" + text + "\"");
    return values;
}

struct CliState {
    std::string config_path;
    std::string out_path;
    std::string format;
    std::uint64_t seed = 0;
    bool seed_given = false;

    // waterfill
    std::string eigenvalues;
    double distortion = 0.0;

    // finite-rdf
    std::string source_path;
    std::string distortion_kind = "hamming";
    std::string s_grid = "-6:0:20";
    double tol = 1e-10;
    int max_iter = 10000;

    // gauss-realize / simulate
    std::string model_path;
    double distortion_level = 0.0;
    double channel_noise = 1.0;
    bool finite_horizon = false;
    int trials = 1;
    long long horizon = 10000;
    long long burn_in = -1;
    std::string trace_path;
};

nardf::json config_json_from_cli(const std::string& subcommand, const CliState& state) {
    nardf::json object = nardf::json::object();
    object["subcommand"] = subcommand;
    if (subcommand == "waterfill") {
        object["eigenvalues"] = parse_comma_list(state.eigenvalues);
        object["distortion"] = state.distortion;
    } else if (subcommand == "finite-rdf") {
        object["source"] = state.source_path;
        object["distortion_spec"] = nardf::json{{"kind", state.distortion_kind}};
        object["s_grid"] = state.s_grid;
        object["tol"] = state.tol;
        object["max_iter"] = state.max_iter;
    } else {
        if (!state.model_path.empty()) object["model"] = state.model_path;
        if (state.distortion_level > 0.0) object["distortion_level"] = state.distortion_level;
        object["channel_noise"] = state.channel_noise;
        object["steady_state"] = !state.finite_horizon;
        if (subcommand == "simulate") {
            object["trials"] = state.trials;
            object["horizon"] = state.horizon;
            object["burn_in"] = state.burn_in;
            if (!state.trace_path.empty()) object["trace"] = state.trace_path;
        }
        object["tol"] = state.tol;
    }
    if (state.seed_given) object["seed"] = state.seed;
    if (!state.out_path.empty()) object["out"] = state.out_path;
    if (!state.format.empty()) object["format"] = state.format;
    return object;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nonanticipative rate distortion toolkit"};
    app.require_subcommand(0, 1);
    app.fallthrough();  // let --out/--format/--seed appear after the subcommand too
    CliState state;

    app.add_option("--config", state.config_path, "JSON config file; flags override out/format/seed");
    app.add_option("--out", state.out_path, "output file (default: stdout)");
    app.add_option("--format", state.format, "output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    auto* seed_option = app.add_option("--seed", state.seed, "random seed");

    CLI::App* waterfill = app.add_subcommand("waterfill", "reverse water-filling allocation");
    waterfill->add_option("--eigenvalues", state.eigenvalues, "comma-separated variances")
        ->required();
    waterfill->add_option("--distortion", state.distortion, "total distortion target")
        ->required();

    CLI::App* finite = app.add_subcommand("finite-rdf", "finite-alphabet rate distortion sweep");
    finite->add_option("--source", state.source_path, "source model JSON file")->required();
    finite->add_option("--distortion", state.distortion_kind,
                       "distortion kind: hamming or squared_error");
    finite->add_option("--s-grid", state.s_grid, "multiplier grid \"lo:hi:count\"");
    finite->add_option("--tol", state.tol, "solver tolerance");
    finite->add_option("--max-iter", state.max_iter, "solver iteration cap");

    CLI::App* realize = app.add_subcommand("gauss-realize", "steady-state Gaussian realization");
    realize->add_option("--model", state.model_path, "state-space model JSON file")->required();
    realize->add_option("--distortion-level", state.distortion_level, "distortion target D")
        ->required();
    realize->add_option("--channel-noise", state.channel_noise, "AGN noise variance Q");
    realize->add_flag("--steady-state", "steady-state mode (the default)");
    realize->add_option("--tol", state.tol, "fixed-point tolerance");

    CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo realization run");
    simulate->add_option("--model", state.model_path,
                         "state-space model JSON file (default: scalar demo)");
    simulate->add_option("--distortion-level", state.distortion_level, "distortion target D");
    simulate->add_option("--channel-noise", state.channel_noise, "AGN noise variance Q");
    simulate->add_option("--trials", state.trials, "independent trials");
    simulate->add_option("--horizon", state.horizon, "steps per trial");
    simulate->add_option("--burn-in", state.burn_in, "discarded leading steps (-1: auto)");
    simulate->add_option("--trace", state.trace_path, "per-step trace CSV (trial 0)");
    auto* finite_flag =
        simulate->add_flag("--finite-horizon", "redesign gains each step instead of freezing");
    simulate->add_flag("--steady-state", "freeze gains at the fixed point (the default)");

    CLI11_PARSE(app, argc, argv);
    state.seed_given = seed_option->count() > 0;
    state.finite_horizon = finite_flag->count() > 0;

    try {
        nardf::json config_json;
        if (!state.config_path.empty()) {
            config_json = nardf::load_json_file(state.config_path);
            if (state.seed_given) config_json["seed"] = state.seed;
            if (!state.out_path.empty()) config_json["out"] = state.out_path;
            if (!state.format.empty()) config_json["format"] = state.format;
        } else {
            if (app.get_subcommands().empty())
                throw nardf::ParseError("nothing to do: pass a subcommand or --config");
            config_json = config_json_from_cli(app.get_subcommands().front()->get_name(), state);
        }

        const nardf::ExperimentConfig config = nardf::config_from_json(config_json);
        const nardf::ResultRecord record = nardf::run(config);
        const std::string format =
            config.format.empty() ? nardf::default_format(config.subcommand) : config.format;
        if (config.out_path.empty()) {
            std::cout << nardf::emit(record, format);
        } else {
            nardf::emit_to_file(record, format, config.out_path);
        }
        return 0;
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << "\n";
        return 1;
    }
}
