#ifndef RELAYNET_CLI_HPP
#define RELAYNET_CLI_HPP

// Command-line front end. Exit codes: 0 success, 1 solver failure or
// non-convergence, 2 invalid arguments or configuration.
//
// CSV output starts with one "# relaynet <command> ..." metadata line, then a
// header row; numbers are printed with 6 significant digits.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "relaynet/channel.hpp"
#include "relaynet/common.hpp"
#include "relaynet/deployment.hpp"
#include "relaynet/io.hpp"
#include "relaynet/mdp.hpp"
#include "relaynet/placement.hpp"

namespace relaynet::cli {

using nlohmann::json;

inline constexpr const char* kOutputDirEnv = "RELAYNET_OUTPUT_DIR";

struct RunConfig {
    ChannelParams channel;
    PlacementOptions placement;
    MdpConfig mdp;
    std::size_t samples = 10000;
    std::uint64_t seed = 12345;
    std::string format = "csv";
};

/// Urban scenario: rho = 0.04 per meter, mean line length 200 m or 500 m.
inline RunConfig preset(const std::string& name) {
    RunConfig c;
    c.channel.rho = 0.04;
    c.mdp.rho = 0.04;
    if (name == "urban-200") {
        c.mdp.beta = 1.0 / 200.0;
    } else if (name == "urban-500") {
        c.mdp.beta = 1.0 / 500.0;
    } else {
        throw InvalidArgument("preset", "unknown preset '" + name + "' (expected urban-200 or urban-500)");
    }
    return c;
}

inline void merge(const json& j, RunConfig& c) {
    if (!j.is_object()) throw InvalidArgument("config", "must be a JSON object");
    try {
        if (j.contains("preset")) c = preset(j.at("preset").get<std::string>());
        if (j.contains("channel")) {
            const json& ch = j.at("channel");
            c.channel.rho = ch.value("rho", c.channel.rho);
            c.channel.sigma2 = ch.value("sigma2", c.channel.sigma2);
            c.channel.p_total = ch.value("p_total", c.channel.p_total);
        }
        if (j.contains("placement")) {
            const json& p = j.at("placement");
            c.placement.multistarts = p.value("multistarts", c.placement.multistarts);
            c.placement.cycle_tolerance = p.value("cycle_tolerance", c.placement.cycle_tolerance);
            c.placement.max_cycles = p.value("max_cycles", c.placement.max_cycles);
            c.placement.agreement_tolerance = p.value("agreement_tolerance", c.placement.agreement_tolerance);
            c.placement.seed = p.value("seed", c.placement.seed);
        }
        if (j.contains("mdp")) io::merge(j.at("mdp"), c.mdp);
        if (j.contains("simulation")) {
            const json& s = j.at("simulation");
            c.samples = s.value("samples", c.samples);
            c.seed = s.value("seed", c.seed);
        }
        c.seed = j.value("seed", c.seed);
        c.format = j.value("format", c.format);
    } catch (const json::exception& e) {
        throw InvalidArgument("config", e.what());
    }
}

namespace detail {

/// "1..5" or "1,2,4".
inline std::vector<int> parse_counts(const std::string& text) {
    std::vector<int> out;
    try {
        const auto dots = text.find("..");
        if (dots != std::string::npos) {
            const int lo = std::stoi(text.substr(0, dots));
            const int hi = std::stoi(text.substr(dots + 2));
            if (hi < lo) throw InvalidArgument("n", "empty range " + text);
            for (int n = lo; n <= hi; ++n) out.push_back(n);
        } else {
            std::stringstream ss(text);
            std::string item;
            while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
        }
    } catch (const std::logic_error& e) {
        if (const auto* ia = dynamic_cast<const InvalidArgument*>(&e)) throw *ia;
        throw InvalidArgument("n", "cannot parse '" + text + "'");
    }
    if (out.empty()) throw InvalidArgument("n", "no relay counts given");
    return out;
}

inline std::filesystem::path output_path(const std::string& requested) {
    std::filesystem::path p(requested);
    if (p.is_relative()) {
        if (const char* dir = std::getenv(kOutputDirEnv); dir != nullptr && *dir != '\0') {
            p = std::filesystem::path(dir) / p;
        }
    }
    return p;
}

struct Emitter {
    std::ostream& out;
    std::string output;

    void write(const std::string& text) const {
        if (output.empty()) {
            out << text;
            return;
        }
        const auto path = output_path(output);
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream f(path);
        if (!f) throw InvalidArgument("output", "cannot write " + path.string());
        f << text;
    }
};

inline std::string csv_meta(const std::string& command, const RunConfig& c) {
    return "# relaynet " + command + " schema_version=" + std::to_string(io::kSchemaVersion) +
           " seed=" + std::to_string(c.seed) + "\n";
}

inline json json_meta(json doc, const std::string& command, const RunConfig& c) {
    doc["command"] = command;
    doc["seed"] = c.seed;
    return doc;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Relay placement on a line: offline optimum and as-you-go deployment"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_file;
    std::string preset_name;
    std::string output;
    std::optional<std::string> format;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_file, "JSON configuration file; flags override it");
    app.add_option("--preset", preset_name, "named scenario: urban-200 or urban-500");
    app.add_option("--output,-o", output, "output file (relative paths go under $" + std::string(kOutputDirEnv) + ")");
    app.add_option("--format", format, "csv or json (deploy also accepts list)");
    app.add_option("--seed", seed, "master seed");

    // channel
    std::optional<double> rho, sigma2, p_total, length;
    std::vector<double> positions;
    auto add_channel = [&](CLI::App* sub) {
        sub->add_option("--rho", rho, "path-loss exponent per unit distance");
        sub->add_option("--sigma2", sigma2, "noise variance");
        sub->add_option("--p-total", p_total, "total power");
        sub->add_option("--length", length, "line length");
        sub->add_option("--positions", positions, "relay positions")->delimiter(',');
    };
    CLI::App* rate_cmd = app.add_subcommand("rate", "achievable rate of a layout under optimal power");
    CLI::App* alloc_cmd = app.add_subcommand("allocate", "optimal power allocation of a layout");
    add_channel(rate_cmd);
    add_channel(alloc_cmd);

    // offline
    int n_relays = 1;
    std::vector<double> lambdas;
    std::string counts = "1..5";
    std::optional<double> grid_step;
    CLI::App* place_cmd = app.add_subcommand("place-offline", "optimal relay positions on a line of known length");
    place_cmd->add_option("--n", n_relays, "number of relays")->required();
    place_cmd->add_option("--lambda", lambdas, "total attenuation rho L")->required()->expected(1);
    place_cmd->add_option("--grid-step", grid_step, "also report the grid-search oracle (N <= 3)");
    CLI::App* gain_cmd = app.add_subcommand("gain-table", "relaying gain G for each (lambda, N)");
    gain_cmd->add_option("--lambda", lambdas, "comma-separated lambdas")->required()->delimiter(',');
    gain_cmd->add_option("--n", counts, "relay counts: 1..5 or 1,2,4");
    CLI::App* uniform_cmd = app.add_subcommand("uniform-limit", "uniform-spacing factor f(N)");
    uniform_cmd->add_option("--lambda", lambdas, "comma-separated lambdas")->required()->delimiter(',');
    uniform_cmd->add_option("--n", counts, "relay counts: 1..5 or 1,2,4");

    // random-length
    std::optional<double> Lambda, beta, xi, state_step, action_step, action_max, tolerance;
    std::optional<std::size_t> max_sweeps, samples;
    std::string solution_file;
    bool meters = false;
    auto add_mdp = [&](CLI::App* sub, bool accepts_solution) {
        sub->add_option("--Lambda", Lambda, "rho / beta");
        sub->add_option("--beta", beta, "rate of the line-length law");
        sub->add_option("--rho", rho, "path-loss exponent");
        sub->add_option("--xi", xi, "relay price");
        sub->add_option("--state-step", state_step, "state grid spacing");
        sub->add_option("--action-step", action_step, "action grid spacing, normalized units");
        sub->add_option("--action-max", action_max, "action grid truncation, normalized units");
        sub->add_option("--tolerance", tolerance, "value-iteration stopping threshold");
        sub->add_option("--max-sweeps", max_sweeps, "value-iteration sweep cap");
        if (accepts_solution) sub->add_option("--solution", solution_file, "solve-mdp JSON to reuse");
    };
    CLI::App* solve_cmd = app.add_subcommand("solve-mdp", "value iteration for the as-you-go policy");
    add_mdp(solve_cmd, false);
    solve_cmd->add_flag("--meters", meters, "report actions in meters (1/beta scale)");
    CLI::App* deploy_cmd = app.add_subcommand("deploy", "deploy along a line of given length");
    add_mdp(deploy_cmd, true);
    deploy_cmd->add_option("--length", length, "line length")->required();
    deploy_cmd->add_flag("--meters", meters, "length and positions in meters (1/beta scale)");
    CLI::App* compare_cmd = app.add_subcommand("compare", "Monte Carlo comparison with the offline optimum");
    add_mdp(compare_cmd, true);
    compare_cmd->add_option("--samples", samples, "number of sampled lines");
    std::optional<double> target, xi_low, xi_high;
    CLI::App* calib_cmd = app.add_subcommand("calibrate", "relay price for a target mean relay count");
    add_mdp(calib_cmd, false);
    calib_cmd->add_option("--target", target, "target mean relay count")->required();
    calib_cmd->add_option("--samples", samples, "sampled lines per iterate");
    calib_cmd->add_option("--xi-low", xi_low, "bracket bottom");
    calib_cmd->add_option("--xi-high", xi_high, "bracket top");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    RunConfig cfg;
    std::string command;
    try {
        if (!config_file.empty()) merge(io::read_json_file(config_file), cfg);
        if (!preset_name.empty()) {
            RunConfig p = preset(preset_name);
            p.samples = cfg.samples;
            p.seed = cfg.seed;
            p.format = cfg.format;
            cfg = p;
        }
        if (format) cfg.format = *format;
        if (seed) cfg.seed = *seed;
        if (samples) cfg.samples = *samples;
        if (rho) cfg.channel.rho = cfg.mdp.rho = *rho;
        if (sigma2) cfg.channel.sigma2 = *sigma2;
        if (p_total) cfg.channel.p_total = *p_total;
        if (beta) cfg.mdp.beta = *beta;
        if (Lambda) cfg.mdp.rho = *Lambda * cfg.mdp.beta;
        if (xi) cfg.mdp.xi = *xi;
        if (state_step) cfg.mdp.state_step = *state_step;
        if (action_step) cfg.mdp.action_step = *action_step;
        if (action_max) cfg.mdp.action_max = *action_max;
        if (tolerance) cfg.mdp.vi_tolerance = *tolerance;
        if (max_sweeps) cfg.mdp.max_sweeps = *max_sweeps;
        if (cfg.format != "csv" && cfg.format != "json" && cfg.format != "list") {
            throw InvalidArgument("format", "must be csv or json");
        }
        if (cfg.format == "list" && !deploy_cmd->parsed()) throw InvalidArgument("format", "list is only valid for deploy");
        if (cfg.samples < 1) throw InvalidArgument("samples", "must be at least 1");

        const detail::Emitter emit{out, output};
        const bool as_json = cfg.format == "json";
        std::ostringstream csv;

        if (rate_cmd->parsed() || alloc_cmd->parsed()) {
            command = rate_cmd->parsed() ? "rate" : "allocate";
            cfg.channel.validate();
            const NodeLayout layout{length.value_or(1.0), positions};
            layout.validate();
            const double lambda = cfg.channel.rho * layout.length;
            const double h = attenuation_h(layout, cfg.channel.rho);
            const PowerAllocation alloc = optimal_allocation(layout, cfg.channel);
            if (rate_cmd->parsed()) {
                const double rate = optimized_rate(layout, cfg.channel);
                const double snr = cfg.channel.p_total / cfg.channel.sigma2 / h;
                const double gain = std::exp(lambda) / h;
                if (as_json) {
                    json doc = io::header("relaynet.rate");
                    doc["n_relays"] = layout.relay_count();
                    doc["lambda"] = lambda;
                    doc["H"] = h;
                    doc["gain"] = gain;
                    doc["snr"] = snr;
                    doc["rate_bits"] = rate;
                    doc["decoding_terms"] = decoding_snr_terms(build_gain_table(layout, cfg.channel.rho), alloc, cfg.channel.sigma2);
                    emit.write(detail::json_meta(doc, command, cfg).dump(2) + "\n");
                } else {
                    csv << detail::csv_meta(command, cfg) << "n_relays,lambda,H,gain,snr,rate_bits\n"
                        << layout.relay_count() << ',' << io::fmt(lambda) << ',' << io::fmt(h) << ',' << io::fmt(gain)
                        << ',' << io::fmt(snr) << ',' << io::fmt(rate) << '\n';
                    emit.write(csv.str());
                }
            } else {
                const std::size_t last = layout.relay_count() + 1;
                if (as_json) {
                    json doc = io::header("relaynet.allocation");
                    json links = json::array();
                    for (std::size_t j = 1; j <= last; ++j)
                        for (std::size_t i = 0; i < j; ++i) links.push_back({{"i", i}, {"j", j}, {"power", alloc.power(i, j)}});
                    doc["links"] = links;
                    doc["gammas"] = std::vector<double>(alloc.gammas().begin(), alloc.gammas().end());
                    doc["total"] = alloc.total();
                    emit.write(detail::json_meta(doc, command, cfg).dump(2) + "\n");
                } else {
                    csv << detail::csv_meta(command, cfg) << "i,j,power,gamma_j\n";
                    for (std::size_t j = 1; j <= last; ++j)
                        for (std::size_t i = 0; i < j; ++i)
                            csv << i << ',' << j << ',' << io::fmt(alloc.power(i, j)) << ',' << io::fmt(alloc.gamma(j)) << '\n';
                    emit.write(csv.str());
                }
            }
            return 0;
        }

        if (place_cmd->parsed()) {
            command = "place-offline";
            const PlacementProblem problem{n_relays, lambdas.at(0)};
            problem.validate();
            const PlacementSolution sol = optimize_placement(problem, cfg.placement);
            std::optional<PlacementSolution> oracle;
            if (grid_step) oracle = grid_oracle_placement(problem, *grid_step);
            if (as_json) {
                json doc = io::to_json(sol, problem);
                if (oracle) doc["oracle"] = io::to_json(*oracle, problem);
                emit.write(detail::json_meta(doc, command, cfg).dump(2) + "\n");
            } else {
                csv << detail::csv_meta(command, cfg) << "n_relays,lambda,H,gain";
                for (int k = 1; k <= n_relays; ++k) csv << ",y" << k << "_over_L";
                csv << '\n';
                auto row = [&](const PlacementSolution& s) {
                    csv << n_relays << ',' << io::fmt(problem.lambda) << ',' << io::fmt(s.objective) << ','
                        << io::fmt(s.gain);
                    for (double u : s.normalized_positions) csv << ',' << io::fmt(u);
                    csv << '\n';
                };
                row(sol);
                if (oracle) row(*oracle);
                emit.write(csv.str());
            }
            return 0;
        }

        if (gain_cmd->parsed() || uniform_cmd->parsed()) {
            const bool gain = gain_cmd->parsed();
            command = gain ? "gain-table" : "uniform-limit";
            const std::vector<int> ns = detail::parse_counts(counts);
            json rows = json::array();
            csv << detail::csv_meta(command, cfg) << (gain ? "lambda,n_relays,H,gain,gain_db\n" : "lambda,n_relays,a,f\n");
            for (double lambda : lambdas) {
                for (int n : ns) {
                    if (gain) {
                        const PlacementSolution s = optimize_placement({n, lambda}, cfg.placement);
                        const double db = 10.0 * std::log10(s.gain);
                        rows.push_back({{"lambda", lambda}, {"n_relays", n}, {"H", s.objective}, {"gain", s.gain}, {"gain_db", db}});
                        csv << io::fmt(lambda) << ',' << n << ',' << io::fmt(s.objective) << ',' << io::fmt(s.gain) << ','
                            << io::fmt(db) << '\n';
                    } else {
                        const double f = uniform_rate_factor(n, lambda);
                        const double a = std::exp(lambda / (n + 1));
                        rows.push_back({{"lambda", lambda}, {"n_relays", n}, {"a", a}, {"f", f}});
                        csv << io::fmt(lambda) << ',' << n << ',' << io::fmt(a) << ',' << io::fmt(f) << '\n';
                    }
                }
            }
            if (as_json) {
                json doc = io::header(gain ? "relaynet.gain_table" : "relaynet.uniform_limit");
                doc["rows"] = rows;
                emit.write(detail::json_meta(doc, command, cfg).dump(2) + "\n");
            } else {
                emit.write(csv.str());
            }
            return 0;
        }

        auto load_or_solve = [&]() {
            if (!solution_file.empty()) return io::mdp_solution_from_json(io::read_json_file(solution_file));
            cfg.mdp.validate();
            return solve(cfg.mdp);
        };
        auto not_converged = [&](const MdpSolution& s) {
            err << "error: value iteration did not converge (residual " << s.residual << " after " << s.sweeps_used
                << " sweeps)\n";
            return 1;
        };

        if (solve_cmd->parsed()) {
            command = "solve-mdp";
            cfg.mdp.validate();
            const MdpSolution sol = solve(cfg.mdp);
            const double scale = meters ? 1.0 / cfg.mdp.beta : 1.0;
            if (cfg.format == "csv") {
                csv << detail::csv_meta(command, cfg) << "state,value,action\n";
                const StateGrid grid = sol.grid();
                for (std::size_t i = 0; i < sol.values.size(); ++i) {
                    csv << io::fmt(grid.value(i)) << ',' << io::fmt(sol.values[i]) << ',' << io::fmt(sol.action(i) * scale)
                        << '\n';
                }
                emit.write(csv.str());
            } else {
                emit.write(detail::json_meta(io::to_json(sol), command, cfg).dump(2) + "\n");
            }
            return sol.converged ? 0 : not_converged(sol);
        }

        if (deploy_cmd->parsed()) {
            command = "deploy";
            const MdpSolution sol = load_or_solve();
            if (!sol.converged) return not_converged(sol);
            const double scale = meters ? 1.0 / sol.config.beta : 1.0;
            relaynet::detail::require_positive(*length, "length");
            const DeploymentTrace trace = deploy_on_line(sol, *length / scale);
            if (cfg.format == "list") {
                std::vector<double> pts;
                for (double y : trace.relay_positions) pts.push_back(y * scale);
                pts.push_back(trace.line_length * scale);
                emit.write(io::join(pts) + "\n");
            } else if (as_json) {
                emit.write(detail::json_meta(io::to_json(trace, scale), command, cfg).dump(2) + "\n");
            } else {
                csv << detail::csv_meta(command, cfg) << "node,position,state\n";
                csv << "source,0,1\n";
                for (std::size_t k = 0; k < trace.relay_count(); ++k) {
                    csv << "relay," << io::fmt(trace.relay_positions[k] * scale) << ',' << io::fmt(trace.states[k + 1]) << '\n';
                }
                csv << "sink," << io::fmt(trace.line_length * scale) << ",\n";
                emit.write(csv.str());
            }
            return 0;
        }

        if (compare_cmd->parsed()) {
            command = "compare";
            const MdpSolution sol = load_or_solve();
            if (!sol.converged) return not_converged(sol);
            const ComparisonStats st = compare_with_offline(sol, cfg.samples, cfg.seed, cfg.placement);
            if (as_json) {
                json doc = io::to_json(st);
                doc["xi"] = sol.config.xi;
                doc["Lambda"] = sol.config.attenuation();
                emit.write(detail::json_meta(doc, command, cfg).dump(2) + "\n");
            } else {
                csv << detail::csv_meta(command, cfg)
                    << "xi,Lambda,avg_pct_diff,mean_relays,zero_relay_count,max_pct_diff,max_h_ratio,samples,seed\n"
                    << io::fmt(sol.config.xi) << ',' << io::fmt(sol.config.attenuation()) << ','
                    << io::fmt(st.avg_pct_diff) << ',' << io::fmt(st.mean_relays) << ',' << st.zero_relay_count << ','
                    << io::fmt(st.max_pct_diff) << ',' << io::fmt(st.max_h_ratio) << ',' << st.samples << ','
                    << st.seed << '\n';
                emit.write(csv.str());
            }
            return 0;
        }

        if (calib_cmd->parsed()) {
            command = "calibrate";
            cfg.mdp.validate();
            CalibrationOptions opt;
            opt.samples = cfg.samples;
            if (xi_low) opt.xi_low = *xi_low;
            if (xi_high) opt.xi_high = *xi_high;
            const CalibrationResult r = calibrate_relay_price(*target, cfg.mdp.attenuation(), cfg.seed, cfg.mdp, opt);
            if (as_json) {
                json doc = io::to_json(r);
                doc["target"] = *target;
                doc["Lambda"] = cfg.mdp.attenuation();
                emit.write(detail::json_meta(doc, command, cfg).dump(2) + "\n");
            } else {
                csv << detail::csv_meta(command, cfg) << "target,Lambda,xi,mean_relays,standard_error,iterations,degenerate\n"
                    << io::fmt(*target) << ',' << io::fmt(cfg.mdp.attenuation()) << ',' << io::fmt(r.xi) << ','
                    << io::fmt(r.mean_relays) << ',' << io::fmt(r.standard_error) << ',' << r.trace.size() << ','
                    << (r.degenerate ? 1 : 0) << '\n';
                emit.write(csv.str());
            }
            return 0;
        }
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const SolverFailure& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace relaynet::cli

#endif  // RELAYNET_CLI_HPP
