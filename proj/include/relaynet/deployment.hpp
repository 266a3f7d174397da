#ifndef RELAYNET_DEPLOYMENT_HPP
#define RELAYNET_DEPLOYMENT_HPP

// Monte Carlo evaluation of as-you-go deployment: walk a sampled line with a
// solved policy, score the result by its attenuation H, and compare against the
// offline optimum for the same relay count once the length is known.
//
// All lengths and positions are normalized (mean line length 1).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "relaynet/channel.hpp"
#include "relaynet/common.hpp"
#include "relaynet/mdp.hpp"
#include "relaynet/placement.hpp"

namespace relaynet {

struct DeploymentTrace {
    double line_length = 0.0;
    double attenuation = 0.0;             ///< Lambda = rho / beta
    std::vector<double> relay_positions;  ///< distances from the source
    std::vector<double> states;           ///< s_0 = 1, then the grid state after each relay
    double h_sequential = 0.0;

    std::size_t relay_count() const noexcept { return relay_positions.size(); }

    NodeLayout layout() const { return NodeLayout{line_length, relay_positions}; }
};

struct ComparisonStats {
    double avg_pct_diff = 0.0;
    double max_pct_diff = 0.0;
    double mean_relays = 0.0;
    std::size_t zero_relay_count = 0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    double max_h_ratio = 1.0;  ///< max H_sequential / H_optimal
};

struct RelayCountEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::size_t samples = 0;
};

namespace detail {

/// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            carry_ += (sum_ - t) + x;
        } else {
            carry_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

}  // namespace detail

/// i.i.d. exponential(beta) lengths by inversion, -log(1 - U) / beta, with U
/// taken from the top 53 bits of a mt19937_64 stream seeded with `seed`.
inline std::vector<double> sample_line_lengths(double beta, std::size_t count, std::uint64_t seed) {
    detail::require_positive(beta, "beta");
    if (count < 1) throw InvalidArgument("count", "must be at least 1");
    std::mt19937_64 engine(seed);
    std::vector<double> out(count);
    for (double& x : out) {
        const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
        x = -std::log1p(-u) / beta;
    }
    return out;
}

/// Walk a line of (normalized) length `line_length` from the source, placing a
/// relay whenever the policy distance fits in the remaining line, and the sink
/// at the end.
inline DeploymentTrace deploy_on_line(const MdpSolution& solution, double line_length) {
    detail::require_positive(line_length, "line_length");
    if (!solution.converged) throw InvalidArgument("solution", "value iteration did not converge");
    const StateGrid grid = solution.grid();
    const double lambda = solution.config.attenuation();
    const double step = solution.config.action_step;

    DeploymentTrace trace;
    trace.line_length = line_length;
    trace.attenuation = lambda;
    trace.states.push_back(1.0);

    // A policy that keeps placing at distance 0 from a self-mapping state never ends.
    const auto cap = static_cast<std::size_t>(line_length / step) + 10 * grid.size() + 10;
    std::size_t state = grid.top();
    std::uint64_t travelled = 0;  // in action steps
    while (true) {
        const std::size_t k = solution.policy_steps[state];
        const double here = static_cast<double>(travelled) * step;
        if (!(line_length - here > static_cast<double>(k) * step)) break;
        travelled += k;
        trace.relay_positions.push_back(static_cast<double>(travelled) * step);
        state = grid.ceil_index(state_transition(grid.value(state), static_cast<double>(k) * step, lambda));
        trace.states.push_back(grid.value(state));
        if (trace.relay_positions.size() > cap) {
            throw SolverFailure("deploy_on_line: policy places relays without advancing");
        }
    }
    trace.h_sequential = attenuation_h(trace.layout(), lambda);
    return trace;
}

/// Percentage difference of the sequential attenuation from the offline
/// optimum with the same number of relays.
inline double percentage_difference(double h_optimal, double h_sequential) {
    return std::abs(h_optimal - h_sequential) / h_optimal * 100.0;
}

inline ComparisonStats compare_with_offline(const MdpSolution& solution, std::size_t sample_count, std::uint64_t seed,
                                            const PlacementOptions& placement = {}) {
    if (!solution.converged) throw InvalidArgument("solution", "value iteration did not converge");
    const auto lengths = sample_line_lengths(1.0, sample_count, seed);
    const double lambda = solution.config.attenuation();

    ComparisonStats stats;
    stats.samples = sample_count;
    stats.seed = seed;
    detail::CompensatedSum diff_sum;
    detail::CompensatedSum relay_sum;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        const DeploymentTrace trace = deploy_on_line(solution, lengths[i]);
        const std::size_t n = trace.relay_count();
        relay_sum.add(static_cast<double>(n));
        if (n == 0) {
            ++stats.zero_relay_count;
            continue;  // both sides are exp(lambda L): zero difference
        }
        PlacementSolution offline;
        try {
            offline = optimize_placement({static_cast<int>(n), lambda * lengths[i]}, placement);
        } catch (const SolverFailure& e) {
            throw SolverFailure("compare_with_offline: sample " + std::to_string(i) + ": " + e.what());
        }
        const double h_opt = offline.objective;
        if (trace.h_sequential < h_opt * (1.0 - 1e-9)) {
            throw SolverFailure("compare_with_offline: sample " + std::to_string(i) +
                                ": offline optimizer missed the sequential layout");
        }
        const double e = percentage_difference(h_opt, trace.h_sequential);
        diff_sum.add(e);
        stats.max_pct_diff = std::max(stats.max_pct_diff, e);
        stats.max_h_ratio = std::max(stats.max_h_ratio, trace.h_sequential / h_opt);
    }
    stats.avg_pct_diff = diff_sum.value() / static_cast<double>(sample_count);
    stats.mean_relays = relay_sum.value() / static_cast<double>(sample_count);
    return stats;
}

inline RelayCountEstimate expected_relay_count(const MdpSolution& solution, std::size_t sample_count,
                                               std::uint64_t seed) {
    const auto lengths = sample_line_lengths(1.0, sample_count, seed);
    detail::CompensatedSum sum;
    detail::CompensatedSum sum_sq;
    for (double length : lengths) {
        const auto n = static_cast<double>(deploy_on_line(solution, length).relay_count());
        sum.add(n);
        sum_sq.add(n * n);
    }
    const auto count = static_cast<double>(sample_count);
    RelayCountEstimate out;
    out.samples = sample_count;
    out.mean = sum.value() / count;
    if (sample_count > 1) {
        const double var = std::max(0.0, (sum_sq.value() - count * out.mean * out.mean) / (count - 1.0));
        out.standard_error = std::sqrt(var / count);
    }
    return out;
}

struct CalibrationStep {
    double xi;
    double mean_relays;
    double standard_error;
};

struct CalibrationResult {
    double xi = 0.0;
    double mean_relays = 0.0;
    double standard_error = 0.0;
    bool degenerate = false;  ///< target 0: xi pinned at the bracket top
    std::vector<CalibrationStep> trace;
};

struct CalibrationOptions {
    double xi_low = 1e-4;
    double xi_high = 1e2;
    std::size_t samples = 10000;
    int max_iterations = 60;
};

/// Relay price whose optimal policy uses `target_mean_relays` relays on
/// average. Bisection in log(xi); every iterate reuses the same sampled
/// lengths so the estimated curve is monotone in practice.
inline CalibrationResult calibrate_relay_price(double target_mean_relays, double lambda, std::uint64_t seed,
                                               const MdpConfig& base, const CalibrationOptions& opt = {}) {
    if (!(target_mean_relays >= 0.0) || !std::isfinite(target_mean_relays)) {
        throw InvalidArgument("target_mean_relays", "must be a finite non-negative number");
    }
    detail::require_positive(lambda, "lambda");
    if (!(opt.xi_low > 0.0 && opt.xi_high > opt.xi_low)) throw InvalidArgument("xi bracket", "need 0 < low < high");

    CalibrationResult result;
    auto measure = [&](double xi) {
        MdpConfig cfg = base;
        cfg.beta = 1.0;
        cfg.rho = lambda;
        cfg.xi = xi;
        const MdpSolution sol = solve(cfg);
        if (!sol.converged) throw SolverFailure("calibrate_relay_price: value iteration did not converge at xi=" + std::to_string(xi));
        const RelayCountEstimate est = expected_relay_count(sol, opt.samples, seed);
        result.trace.push_back({xi, est.mean, est.standard_error});
        return est;
    };
    auto accept = [&](const RelayCountEstimate& est) {
        return std::abs(est.mean - target_mean_relays) < std::max(0.05 * target_mean_relays, 2.0 * est.standard_error);
    };
    auto finish = [&](double xi, const RelayCountEstimate& est) {
        result.xi = xi;
        result.mean_relays = est.mean;
        result.standard_error = est.standard_error;
        return result;
    };

    const RelayCountEstimate high = measure(opt.xi_high);
    if (target_mean_relays == 0.0) {
        result.degenerate = true;
        return finish(opt.xi_high, high);
    }
    const RelayCountEstimate low = measure(opt.xi_low);
    if (accept(high)) return finish(opt.xi_high, high);
    if (accept(low)) return finish(opt.xi_low, low);
    if (!(low.mean >= target_mean_relays && target_mean_relays >= high.mean)) {
        throw SolverFailure("calibrate_relay_price: target " + std::to_string(target_mean_relays) +
                            " outside bracket means [" + std::to_string(high.mean) + ", " + std::to_string(low.mean) + "]");
    }
    double lo = std::log(opt.xi_low);
    double hi = std::log(opt.xi_high);
    for (int it = 0; it < opt.max_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double xi = std::exp(mid);
        const RelayCountEstimate est = measure(xi);
        if (accept(est)) return finish(xi, est);
        if (est.mean > target_mean_relays) {
            lo = mid;  // too many relays: raise the price
        } else {
            hi = mid;
        }
    }
    throw SolverFailure("calibrate_relay_price: no acceptable price after " + std::to_string(opt.max_iterations) +
                        " bisection steps");
}

}  // namespace relaynet

#endif  // RELAYNET_DEPLOYMENT_HPP
