#ifndef RELAYNET_IO_HPP
#define RELAYNET_IO_HPP

// JSON documents and CSV formatting. Every JSON document carries
// "schema" and "schema_version"; CSV numbers use 6 significant digits.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relaynet/common.hpp"
#include "relaynet/deployment.hpp"
#include "relaynet/mdp.hpp"
#include "relaynet/placement.hpp"

namespace relaynet::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// %.6g; integers print without a decimal point.
inline std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

inline std::string join(const std::vector<double>& xs, char sep = ',') {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += fmt(xs[i]);
    }
    return out;
}

inline json header(const std::string& schema) {
    return json{{"schema", schema}, {"schema_version", kSchemaVersion}};
}

inline void check_header(const json& doc, const std::string& schema) {
    if (!doc.is_object() || doc.value("schema", std::string{}) != schema) {
        throw InvalidArgument("schema", "expected a " + schema + " document");
    }
    if (doc.value("schema_version", 0) != kSchemaVersion) {
        throw InvalidArgument("schema_version", "unsupported version");
    }
}

inline json to_json(const MdpConfig& c) {
    return json{{"beta", c.beta},
                {"rho", c.rho},
                {"xi", c.xi},
                {"state_step", c.state_step},
                {"action_step", c.action_step},
                {"action_max", c.action_max},
                {"vi_tolerance", c.vi_tolerance},
                {"max_sweeps", c.max_sweeps}};
}

/// Fields absent from `j` keep the values already in `c`.
inline void merge(const json& j, MdpConfig& c) {
    c.beta = j.value("beta", c.beta);
    c.rho = j.value("rho", c.rho);
    if (j.contains("Lambda")) c.rho = j.at("Lambda").get<double>() * c.beta;
    c.xi = j.value("xi", c.xi);
    c.state_step = j.value("state_step", c.state_step);
    c.action_step = j.value("action_step", c.action_step);
    c.action_max = j.value("action_max", c.action_max);
    c.vi_tolerance = j.value("vi_tolerance", c.vi_tolerance);
    c.max_sweeps = j.value("max_sweeps", c.max_sweeps);
}

inline json to_json(const MdpSolution& s) {
    json doc = header("relaynet.mdp_solution");
    doc["config"] = to_json(s.config);
    doc["Lambda"] = s.config.attenuation();
    std::vector<double> states(s.values.size());
    const StateGrid grid = s.grid();
    for (std::size_t i = 0; i < states.size(); ++i) states[i] = grid.value(i);
    doc["grid"] = {{"states", states}, {"action_step", s.config.action_step}, {"action_max", s.action_max}};
    doc["values"] = s.values;
    doc["policy"] = s.policy();
    doc["policy_steps"] = s.policy_steps;
    doc["sweeps"] = s.sweeps_used;
    doc["residual"] = s.residual;
    doc["converged"] = s.converged;
    if (!s.theta_margin_log.empty()) doc["theta_margin_log"] = s.theta_margin_log;
    return doc;
}

inline MdpSolution mdp_solution_from_json(const json& doc) {
    check_header(doc, "relaynet.mdp_solution");
    MdpSolution s;
    merge(doc.at("config"), s.config);
    s.config.validate();
    s.action_max = doc.at("grid").at("action_max").get<double>();
    s.values = doc.at("values").get<std::vector<double>>();
    s.policy_steps = doc.at("policy_steps").get<std::vector<std::size_t>>();
    s.sweeps_used = doc.at("sweeps").get<std::size_t>();
    s.residual = doc.at("residual").get<double>();
    s.converged = doc.at("converged").get<bool>();
    if (doc.contains("theta_margin_log")) {
        for (const auto& v : doc.at("theta_margin_log")) {
            s.theta_margin_log.push_back(v.is_null() ? -INFINITY : v.get<double>());
        }
    }
    if (s.values.size() != s.config.state_count() || s.policy_steps.size() != s.values.size()) {
        throw InvalidArgument("values", "table size does not match the state grid");
    }
    if (!(s.action_max >= 1.0)) throw InvalidArgument("grid.action_max", "must be at least 1");
    const std::size_t actions = s.action_count();
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        if (!std::isfinite(s.values[i]) || s.values[i] < 0.0) throw InvalidArgument("values", "must be finite and non-negative");
        if (s.policy_steps[i] >= actions) throw InvalidArgument("policy_steps", "action outside the action grid");
    }
    return s;
}

inline json to_json(const DeploymentTrace& t, double distance_scale = 1.0) {
    json doc = header("relaynet.deployment_trace");
    std::vector<double> positions;
    for (double y : t.relay_positions) positions.push_back(y * distance_scale);
    doc["Lambda"] = t.attenuation;
    doc["line_length"] = t.line_length * distance_scale;
    doc["distance_scale"] = distance_scale;
    doc["relay_positions"] = positions;
    doc["n_relays"] = t.relay_count();
    doc["states"] = t.states;
    doc["h_sequential"] = t.h_sequential;
    return doc;
}

inline json to_json(const ComparisonStats& s) {
    json doc = header("relaynet.comparison_stats");
    doc["avg_pct_diff"] = s.avg_pct_diff;
    doc["max_pct_diff"] = s.max_pct_diff;
    doc["mean_relays"] = s.mean_relays;
    doc["zero_relay_count"] = s.zero_relay_count;
    doc["samples"] = s.samples;
    doc["seed"] = s.seed;
    doc["max_h_ratio"] = s.max_h_ratio;
    return doc;
}

inline json to_json(const CalibrationResult& r) {
    json doc = header("relaynet.calibration");
    doc["xi"] = r.xi;
    doc["mean_relays"] = r.mean_relays;
    doc["standard_error"] = r.standard_error;
    doc["degenerate"] = r.degenerate;
    json trace = json::array();
    for (const auto& step : r.trace) {
        trace.push_back({{"xi", step.xi}, {"mean_relays", step.mean_relays}, {"standard_error", step.standard_error}});
    }
    doc["trace"] = trace;
    return doc;
}

inline json to_json(const PlacementSolution& p, const PlacementProblem& problem) {
    json doc = header("relaynet.placement");
    doc["n_relays"] = problem.n_relays;
    doc["lambda"] = problem.lambda;
    doc["normalized_positions"] = p.normalized_positions;
    doc["objective"] = p.objective;
    doc["gain"] = p.gain;
    return doc;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("file", "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidArgument("file", path + ": " + e.what());
    }
}

}  // namespace relaynet::io

#endif  // RELAYNET_IO_HPP
