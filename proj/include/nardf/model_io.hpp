#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nardf/common.hpp"
#include "nardf/distortion.hpp"
#include "nardf/markov_source.hpp"
#include "nardf/state_space_model.hpp"

namespace nardf {

using json = nlohmann::ordered_json;

namespace detail {

// byte offset -> "line:column" for parse diagnostics
inline std::string line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    std::ostringstream out;
    out << line << ":" << column;
    return out.str();
}

inline void reject_unknown_keys(const json& object, std::initializer_list<const char*> allowed,
                                const std::string& context) {
    if (!object.is_object()) throw ParseError(context + ": expected a JSON object");
    for (const auto& item : object.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known) throw ParseError(context + ": unknown key \"" + item.key() + "\"");
    }
}

inline Eigen::MatrixXd matrix_from_json(const json& value, const std::string& context) {
    if (!value.is_array() || value.empty() || !value[0].is_array())
        throw ParseError(context + ": expected an array of rows");
    const std::size_t rows = value.size();
    const std::size_t cols = value[0].size();
    Eigen::MatrixXd matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        if (!value[r].is_array() || value[r].size() != cols)
            throw ParseError(context + ": ragged rows");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!value[r][c].is_number())
                throw ParseError(context + ": non-numeric entry");
            matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                value[r][c].get<double>();
        }
    }
    return matrix;
}

inline Eigen::VectorXd vector_from_json(const json& value, const std::string& context) {
    if (!value.is_array()) throw ParseError(context + ": expected a flat array");
    Eigen::VectorXd vector(static_cast<Eigen::Index>(value.size()));
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (!value[i].is_number()) throw ParseError(context + ": non-numeric entry");
        vector[static_cast<Eigen::Index>(i)] = value[i].get<double>();
    }
    return vector;
}

inline json matrix_to_json(const Eigen::MatrixXd& matrix) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < matrix.cols(); ++c) row.push_back(matrix(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json vector_to_json(const Eigen::VectorXd& vector) {
    json values = json::array();
    for (Eigen::Index i = 0; i < vector.size(); ++i) values.push_back(vector[i]);
    return values;
}

}  // namespace detail

inline json load_json_file(const std::string& path) {
    std::ifstream stream(path, std::ios::binary);
    if (!stream) throw ParseError(path + ": cannot open file");
    std::ostringstream buffer;
    buffer << stream.rdbuf();
    const std::string text = buffer.str();
    try {
        return json::parse(text);
    } catch (const nlohmann::json::parse_error& error) {
        throw ParseError(path + ":" + detail::line_column(text, error.byte) + ": " +
                         error.what());
    }
}

// --- StateSpaceModel: keys A, B, C, G (arrays of rows), x0_mean (flat,
// --- default zeros), x0_cov (rows, default identity)
inline StateSpaceModel state_space_from_json(const json& object) {
    detail::reject_unknown_keys(object, {"A", "B", "C", "G", "x0_mean", "x0_cov"},
                                "state-space model");
    for (const char* key : {"A", "B", "C", "G"})
        if (!object.contains(key))
            throw ParseError(std::string("state-space model: missing key \"") + key + "\"");
    StateSpaceModel model;
    model.A = detail::matrix_from_json(object["A"], "A");
    model.B = detail::matrix_from_json(object["B"], "B");
    model.C = detail::matrix_from_json(object["C"], "C");
    model.G = detail::matrix_from_json(object["G"], "G");
    model.x0_mean = object.contains("x0_mean")
                        ? detail::vector_from_json(object["x0_mean"], "x0_mean")
                        : Eigen::VectorXd::Zero(model.A.rows()).eval();
    model.x0_cov = object.contains("x0_cov")
                       ? detail::matrix_from_json(object["x0_cov"], "x0_cov")
                       : Eigen::MatrixXd::Identity(model.A.rows(), model.A.rows()).eval();
    validate_model(model);  // throws on dimension mismatches
    return model;
}

inline json to_json(const StateSpaceModel& model) {
    json object = json::object();
    object["A"] = detail::matrix_to_json(model.A);
    object["B"] = detail::matrix_to_json(model.B);
    object["C"] = detail::matrix_to_json(model.C);
    object["G"] = detail::matrix_to_json(model.G);
    object["x0_mean"] = detail::vector_to_json(model.x0_mean);
    object["x0_cov"] = detail::matrix_to_json(model.x0_cov);
    return object;
}

// --- FiniteMarkovSource: keys initial_pmf (flat), transition (one table or a
// --- list of per-step tables), horizon (nonnegative integer)
inline FiniteMarkovSource markov_source_from_json(const json& object) {
    detail::reject_unknown_keys(object, {"initial_pmf", "transition", "horizon"},
                                "markov source");
    for (const char* key : {"initial_pmf", "transition", "horizon"})
        if (!object.contains(key))
            throw ParseError(std::string("markov source: missing key \"") + key + "\"");
    if (!object["horizon"].is_number_integer() || object["horizon"].get<long long>() < 0)
        throw ParseError("markov source: horizon must be a nonnegative integer");

    FiniteMarkovSource source;
    source.horizon = object["horizon"].get<int>();
    source.initial_pmf = detail::vector_from_json(object["initial_pmf"], "initial_pmf");
    source.alphabet_size_x = static_cast<int>(source.initial_pmf.size());

    const json& transition = object["transition"];
    if (!transition.is_array() || transition.empty())
        throw ParseError("transition: expected one table or a list of tables");
    if (transition[0].is_array() && !transition[0].empty() && transition[0][0].is_array()) {
        for (std::size_t i = 0; i < transition.size(); ++i)
            source.transition.push_back(
                detail::matrix_from_json(transition[i], "transition table"));
    } else {
        source.transition.push_back(detail::matrix_from_json(transition, "transition"));
    }
    const std::vector<std::string> diagnostics = source.validate();
    if (!diagnostics.empty()) {
        std::string joined = "markov source: ";
        for (std::size_t i = 0; i < diagnostics.size(); ++i) {
            if (i) joined += "; ";
            joined += diagnostics[i];
        }
        throw ParseError(joined);
    }
    return source;
}

inline json to_json(const FiniteMarkovSource& source) {
    json object = json::object();
    object["initial_pmf"] = detail::vector_to_json(source.initial_pmf);
    if (source.transition.size() == 1) {
        object["transition"] = detail::matrix_to_json(source.transition[0]);
    } else {
        json tables = json::array();
        for (const Eigen::MatrixXd& table : source.transition)
            tables.push_back(detail::matrix_to_json(table));
        object["transition"] = std::move(tables);
    }
    object["horizon"] = source.horizon;
    return object;
}

// --- DistortionSpec: {"kind": "hamming" | "single_letter_table" |
// --- "squared_error", "table": rows (required for single_letter_table)}
inline DistortionSpec distortion_from_json(const json& object, int alphabet_x, int alphabet_y) {
    detail::reject_unknown_keys(object, {"kind", "table"}, "distortion");
    if (!object.contains("kind") || !object["kind"].is_string())
        throw ParseError("distortion: missing string key \"kind\"");
    const std::string kind = object["kind"].get<std::string>();
    if (kind == "hamming") return DistortionSpec::hamming(alphabet_x, alphabet_y);
    if (kind == "squared_error") return DistortionSpec::squared();
    if (kind == "single_letter_table") {
        if (!object.contains("table"))
            throw ParseError("distortion: kind single_letter_table requires \"table\"");
        return DistortionSpec::from_table(detail::matrix_from_json(object["table"], "table"));
    }
    throw ParseError("distortion: unknown kind \"" + kind + "\"");
}

inline json to_json(const DistortionSpec& spec) {
    json object = json::object();
    if (spec.kind == DistortionKind::squared_error) {
        object["kind"] = "squared_error";
    } else {
        object["kind"] = "single_letter_table";
        object["table"] = detail::matrix_to_json(spec.table);
    }
    return object;
}

}  // namespace nardf
