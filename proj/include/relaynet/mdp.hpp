#ifndef RELAYNET_MDP_HPP
#define RELAYNET_MDP_HPP

// As-you-go relay deployment on a line of exponentially distributed length,
// posed as a total-cost MDP on the state s in (0,1] and solved by value
// iteration on a uniform state grid and a uniform action grid.
//
// Everything is solved in normalized units (beta = 1, path loss Lambda =
// rho / beta); a normalized distance d corresponds to d / beta physically.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "relaynet/common.hpp"

namespace relaynet {

struct MdpConfig {
    double beta = 1.0;           ///< rate of the exponential line-length law
    double rho = 1.0;            ///< path-loss exponent
    double xi = 0.01;            ///< relay price
    double state_step = 0.01;    ///< state grid spacing on (0,1]
    double action_step = 0.001;  ///< action grid spacing, normalized units
    double action_max = 0.0;     ///< action grid truncation, normalized units; 0 selects max(30, 12/Lambda)
    double vi_tolerance = 1e-9;  ///< sup-norm stopping threshold
    std::size_t max_sweeps = 100000;

    /// Lambda = rho / beta.
    double attenuation() const noexcept { return rho / beta; }

    std::size_t state_count() const { return static_cast<std::size_t>(std::llround(1.0 / state_step)); }

    double effective_action_max() const {
        return action_max > 0.0 ? action_max : std::max(30.0, 12.0 / attenuation());
    }

    std::size_t action_count() const {
        return static_cast<std::size_t>(std::llround(effective_action_max() / action_step)) + 1;
    }

    void validate() const {
        detail::require_positive(beta, "beta");
        detail::require_positive(rho, "rho");
        detail::require_positive(xi, "xi");
        detail::require_positive(state_step, "state_step");
        detail::require_positive(action_step, "action_step");
        detail::require_positive(vi_tolerance, "vi_tolerance");
        if (state_step > 1.0 || std::abs(static_cast<double>(state_count()) * state_step - 1.0) > 1e-9) {
            throw InvalidArgument("state_step", "must divide 1 exactly");
        }
        if (action_max < 0.0 || !std::isfinite(action_max)) {
            throw InvalidArgument("action_max", "must be non-negative (0 selects the default)");
        }
        if (effective_action_max() < 1.0) {
            throw InvalidArgument("action_max", "must be at least 1 normalized unit");
        }
        if (action_step > effective_action_max()) {
            throw InvalidArgument("action_step", "exceeds action_max");
        }
        if (max_sweeps == 0) throw InvalidArgument("max_sweeps", "must be at least 1");
    }

    /// theta = rho / (beta - rho), the expected cost of never placing another
    /// relay from state 1. Only finite when beta > rho.
    std::optional<double> theta() const {
        if (beta > rho) return rho / (beta - rho);
        return std::nullopt;
    }
};

/// Uniform grid {1/n, 2/n, ..., 1} on (0,1]; indices are 0-based.
class StateGrid {
public:
    explicit StateGrid(std::size_t n) : n_(n) {}

    std::size_t size() const noexcept { return n_; }
    double value(std::size_t index) const noexcept { return static_cast<double>(index + 1) / static_cast<double>(n_); }

    /// Index of the smallest grid point >= s, i.e. ceil(s n) / n. The 1e-9
    /// slack keeps exact grid values (0.5 = 50/100) on their own point.
    std::size_t ceil_index(double s) const noexcept {
        const double scaled = std::ceil(s * static_cast<double>(n_) - 1e-9);
        const double clamped = std::clamp(scaled, 1.0, static_cast<double>(n_));
        return static_cast<std::size_t>(clamped) - 1;
    }

    double round_up(double s) const noexcept { return value(ceil_index(s)); }
    std::size_t top() const noexcept { return n_ - 1; }

private:
    std::size_t n_;
};

/// Next state after placing a relay at distance r from the current node:
/// s' = s e^{rho r} / (1 + s e^{rho r}).
inline double state_transition(double s, double r, double rho) {
    const double w = s * std::exp(rho * r);
    return w / (1.0 + w);
}

namespace detail {

/// Expected cost of the sink landing before distance a:
/// I(s,a) = integral_0^a beta e^{-beta z} s (e^{rho z} - 1) dz.
inline double early_termination_cost(double s, double a, double beta, double rho) {
    const double tail = -std::expm1(-beta * a);  // 1 - e^{-beta a}
    if (std::abs(beta - rho) < 1e-12) {
        return s * (beta * a - tail);
    }
    return s * (beta / (beta - rho) * -std::expm1(-(beta - rho) * a) - tail);
}

}  // namespace detail

/// Expected cost-to-go of choosing action a at state s, given the value table
/// `values` on the state grid. The next state is ceiling-rounded onto the grid.
inline double stage_value(double s, double a, std::span<const double> values, const MdpConfig& cfg) {
    const StateGrid grid(values.size());
    const double next = state_transition(s, a, cfg.rho);
    const double continuation = s * std::expm1(cfg.rho * a) + cfg.xi + values[grid.ceil_index(next)];
    return detail::early_termination_cost(s, a, cfg.beta, cfg.rho) + std::exp(-cfg.beta * a) * continuation;
}

namespace detail {

/// Sign and log-magnitude of a real number, ordered by the number itself.
/// Lets near-zero cost differences be compared after they underflow as doubles.
struct LogScore {
    int sign = 1;
    double log_mag = std::numeric_limits<double>::infinity();

    friend bool operator<(const LogScore& a, const LogScore& b) {
        if (a.sign != b.sign) return a.sign < b.sign;
        if (a.sign < 0) return a.log_mag > b.log_mag;
        if (a.sign > 0) return a.log_mag < b.log_mag;
        return false;
    }

    double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_mag); }
};

/// Bellman operator on the normalized problem (beta = 1).
///
/// For a fixed state, the action grid splits into contiguous buckets that share
/// the same rounded next state. Inside a bucket the cost has derivative
/// e^{-a} (Lambda s e^{Lambda a} - (xi + J_next)), so it is unimodal and the
/// grid minimizer is one of the two grid points around the stationary point.
class BellmanKernel {
public:
    explicit BellmanKernel(const MdpConfig& cfg)
        : lambda_(cfg.attenuation()),
          xi_(cfg.xi),
          step_(cfg.action_step),
          last_action_(cfg.action_count() - 1),
          grid_(cfg.state_count()) {
        if (lambda_ < 1.0 && std::abs(lambda_ - 1.0) >= 1e-12) theta_ = lambda_ / (1.0 - lambda_);
        buckets_.resize(grid_.size());
        for (std::size_t i = 0; i < grid_.size(); ++i) build_buckets(i);
    }

    const StateGrid& grid() const noexcept { return grid_; }
    std::size_t last_action() const noexcept { return last_action_; }
    double action_step() const noexcept { return step_; }

    std::size_t next_index(std::size_t state, std::size_t action) const {
        return grid_.ceil_index(state_transition(grid_.value(state), static_cast<double>(action) * step_, lambda_));
    }

    struct Choice {
        double value;
        std::size_t action;
        LogScore score;
    };

    Choice minimize(std::size_t state, std::span<const double> values) const {
        const double s = grid_.value(state);
        Choice best{0.0, 0, LogScore{}};
        bool first = true;
        for (const Bucket& b : buckets_[state]) {
            const double c = xi_ + values[b.next];
            const double stationary = std::log(c / (lambda_ * s)) / lambda_;
            std::size_t lo_k = b.first;
            std::size_t hi_k = b.last;
            if (stationary > 0.0) {
                const double k = std::floor(stationary / step_);
                if (k < static_cast<double>(b.first)) {
                    hi_k = b.first;
                } else if (k >= static_cast<double>(b.last)) {
                    lo_k = b.last;
                } else {
                    lo_k = static_cast<std::size_t>(k);
                    hi_k = lo_k + 1;
                }
            } else {
                hi_k = b.first;
            }
            for (std::size_t k = lo_k; k <= hi_k; ++k) {
                const LogScore score = evaluate(s, static_cast<double>(k) * step_, c);
                if (first || score < best.score) {
                    best.score = score;
                    best.action = k;
                    first = false;
                }
            }
        }
        best.value = to_value(s, best.action, best.score);
        return best;
    }

    /// Cost of action index k at state index i, computed by the same algebra as minimize().
    double cost(std::size_t state, std::size_t action, std::span<const double> values) const {
        const double s = grid_.value(state);
        const double c = xi_ + values[next_index(state, action)];
        return to_value(s, action, evaluate(s, static_cast<double>(action) * step_, c));
    }

    /// log(theta s - J(s)) when the chosen action beats never placing again; beta > rho only.
    std::optional<double> theta_margin_log(const Choice& choice) const {
        if (!theta_ || choice.score.sign >= 0) return std::nullopt;
        return choice.score.log_mag;
    }

private:
    struct Bucket {
        std::size_t next;
        std::size_t first;
        std::size_t last;
    };

    void build_buckets(std::size_t state) {
        std::vector<Bucket>& out = buckets_[state];
        std::size_t begin = 0;
        while (begin <= last_action_) {
            const std::size_t next = next_index(state, begin);
            // Largest action still landing on `next`; next_index is nondecreasing in the action.
            std::size_t lo = begin;
            std::size_t hi = last_action_;
            while (lo < hi) {
                const std::size_t mid = lo + (hi - lo + 1) / 2;
                if (next_index(state, mid) == next) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            out.push_back({next, begin, lo});
            begin = lo + 1;
        }
    }

    // cost = theta s + e^{(Lambda-1)a} (c e^{-Lambda a} - theta s)        Lambda < 1
    //      = s a + c e^{-a}                                                Lambda = 1
    //      = |theta| s (e^{(Lambda-1)a} - 1) + c e^{-a}                    Lambda > 1
    LogScore evaluate(double s, double a, double c) const {
        if (theta_) {
            const double m = c * std::exp(-lambda_ * a) - *theta_ * s;
            if (m == 0.0) return LogScore{0, 0.0};
            return LogScore{m < 0.0 ? -1 : 1, (lambda_ - 1.0) * a + std::log(std::abs(m))};
        }
        double cost;
        if (std::abs(lambda_ - 1.0) < 1e-12) {
            cost = s * a + c * std::exp(-a);
        } else {
            cost = (lambda_ / (lambda_ - 1.0)) * s * std::expm1((lambda_ - 1.0) * a) + c * std::exp(-a);
        }
        return LogScore{1, std::log(cost)};
    }

    double to_value(double s, std::size_t action, const LogScore& score) const {
        (void)action;
        if (theta_) return *theta_ * s + score.value();
        return std::exp(score.log_mag);
    }

    double lambda_;
    double xi_;
    double step_;
    std::size_t last_action_;
    std::optional<double> theta_;
    StateGrid grid_;
    std::vector<std::vector<Bucket>> buckets_;
};

inline MdpConfig normalized(const MdpConfig& cfg) {
    MdpConfig n = cfg;
    n.rho = cfg.attenuation();
    n.beta = 1.0;
    n.action_max = cfg.effective_action_max();
    return n;
}

}  // namespace detail

struct BellmanResult {
    std::vector<double> values;
    std::vector<std::size_t> policy_steps;  ///< argmin action index per state
};

/// One value-iteration sweep: J'(s) = min_a stage_value(s, a, J), smallest
/// action on ties.
inline BellmanResult bellman_update(std::span<const double> values, const MdpConfig& cfg) {
    cfg.validate();
    const detail::BellmanKernel kernel(detail::normalized(cfg));
    if (values.size() != kernel.grid().size()) {
        throw InvalidArgument("values", "size does not match the state grid");
    }
    BellmanResult out;
    out.values.resize(values.size());
    out.policy_steps.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto choice = kernel.minimize(i, values);
        out.values[i] = choice.value;
        out.policy_steps[i] = choice.action;
    }
    return out;
}

struct MdpSolution {
    MdpConfig config;                       ///< as requested (beta, rho in physical units)
    double action_max = 0.0;                ///< truncation actually used, normalized units
    std::vector<double> values;             ///< J(s) on the state grid
    std::vector<std::size_t> policy_steps;  ///< a*(s) as a multiple of action_step
    std::vector<double> theta_margin_log;   ///< log(theta s - J(s)); empty unless beta > rho
    std::size_t sweeps_used = 0;
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;

    StateGrid grid() const { return StateGrid(values.size()); }

    /// Normalized placement distance a*(s) at grid index i.
    double action(std::size_t i) const { return static_cast<double>(policy_steps.at(i)) * config.action_step; }

    std::vector<double> policy() const {
        std::vector<double> out(policy_steps.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = action(i);
        return out;
    }

    std::size_t action_count() const {
        return static_cast<std::size_t>(std::llround(action_max / config.action_step)) + 1;
    }

    /// True when some argmin sits in the top 10% of the action grid.
    bool policy_near_truncation() const {
        const double limit = 0.9 * static_cast<double>(action_count() - 1);
        return std::any_of(policy_steps.begin(), policy_steps.end(),
                           [&](std::size_t k) { return static_cast<double>(k) >= limit; });
    }
};

namespace detail {

inline MdpSolution value_iteration(const MdpConfig& requested, double action_max) {
    MdpConfig cfg = normalized(requested);
    cfg.action_max = action_max;
    const BellmanKernel kernel(cfg);
    const std::size_t n = kernel.grid().size();

    MdpSolution sol;
    sol.config = requested;
    sol.action_max = action_max;
    sol.values.assign(n, 0.0);
    sol.policy_steps.assign(n, 0);

    std::vector<double> next(n);
    std::vector<BellmanKernel::Choice> choices(n);
    for (std::size_t sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            choices[i] = kernel.minimize(i, sol.values);
            next[i] = choices[i].value;
            change = std::max(change, std::abs(next[i] - sol.values[i]));
        }
        sol.values.swap(next);
        sol.sweeps_used = sweep;
        sol.residual = change;
        if (change < cfg.vi_tolerance) {
            sol.converged = true;
            break;
        }
    }
    for (std::size_t i = 0; i < n; ++i) sol.policy_steps[i] = choices[i].action;
    if (cfg.theta()) {
        sol.theta_margin_log.resize(n, -std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < n; ++i) {
            if (auto m = kernel.theta_margin_log(choices[i])) sol.theta_margin_log[i] = *m;
        }
    }
    return sol;
}

}  // namespace detail

/// Value iteration from J = 0 until the sup-norm change drops below
/// vi_tolerance. If any argmin lands in the top 10% of the action grid the
/// truncation is doubled and the problem re-solved.
inline MdpSolution solve(const MdpConfig& cfg) {
    cfg.validate();
    double action_max = cfg.effective_action_max();
    for (int attempt = 0;; ++attempt) {
        MdpSolution sol = detail::value_iteration(cfg, action_max);
        if (!sol.policy_near_truncation() || attempt == 8) return sol;
        action_max *= 2.0;
    }
}

struct AnalyticBounds {
    std::optional<double> theta_bound;  ///< theta s, beta > rho only
    double fixed_spacing_bound;         ///< best fixed-spacing bound over the sampled spacings
    double best_spacing;                ///< spacing attaining it, physical units
};

/// Cost of placing relays at a fixed spacing a regardless of state:
/// (xi + e^{rho a} - 1) / (beta a) + (e^{rho a} - 1).
inline double fixed_spacing_bound(const MdpConfig& cfg, double spacing) {
    detail::require_positive(spacing, "spacing");
    const double grow = std::expm1(cfg.rho * spacing);
    return (cfg.xi + grow) / (cfg.beta * spacing) + grow;
}

/// Upper bounds on J(s): theta s when beta > rho, and the fixed-spacing bound
/// minimized over a log-spaced sample of spacings.
inline AnalyticBounds analytic_bounds(const MdpConfig& cfg, double s) {
    cfg.validate();
    if (!(s > 0.0 && s <= 1.0)) throw InvalidArgument("s", "must lie in (0, 1]");
    AnalyticBounds out{};
    if (auto theta = cfg.theta()) out.theta_bound = *theta * s;
    out.fixed_spacing_bound = std::numeric_limits<double>::infinity();
    // Spacings from 1e-4 to 1e2 mean lengths.
    constexpr int samples = 601;
    for (int k = 0; k < samples; ++k) {
        const double a = std::pow(10.0, -4.0 + 6.0 * k / (samples - 1)) / cfg.beta;
        const double bound = fixed_spacing_bound(cfg, a);
        if (bound < out.fixed_spacing_bound) {
            out.fixed_spacing_bound = bound;
            out.best_spacing = a;
        }
    }
    return out;
}

}  // namespace relaynet

#endif  // RELAYNET_MDP_HPP
