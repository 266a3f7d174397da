#ifndef RELAYNET_PLACEMENT_HPP
#define RELAYNET_PLACEMENT_HPP

// Relay placement on a line of known length. Positions are normalized
// (u = y / L); with lambda = rho L the attenuation depends only on (N, lambda):
//
//   H(u) = 1 + sum_{k=1}^{N+1} (z_k - z_{k-1}) / (z_0 + ... + z_{k-1}),
//   z_0 = 1, z_k = exp(lambda u_k), u_{N+1} = 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "relaynet/channel.hpp"
#include "relaynet/common.hpp"

namespace relaynet {

struct PlacementProblem {
    int n_relays = 1;
    double lambda = 1.0;  ///< rho L

    void validate() const {
        if (n_relays < 1) throw InvalidArgument("n_relays", "must be at least 1");
        detail::require_positive(lambda, "lambda");
    }
};

struct PlacementSolution {
    std::vector<double> normalized_positions;  ///< y_k / L, sorted
    double objective = 0.0;                    ///< minimized H
    double gain = 1.0;                         ///< exp(lambda) / H

    NodeLayout layout(double length) const {
        NodeLayout out{length, {}};
        out.positions.reserve(normalized_positions.size());
        for (double u : normalized_positions) out.positions.push_back(std::min(u * length, length));
        return out;
    }
};

/// Attenuation H for normalized positions u (sorted, in [0,1]).
inline double normalized_attenuation(std::span<const double> u, double lambda) {
    double h = 1.0;
    double prefix = 1.0;
    double prev = 1.0;
    for (std::size_t k = 0; k <= u.size(); ++k) {
        const double z = (k < u.size()) ? std::exp(lambda * u[k]) : std::exp(lambda);
        h += (z - prev) / prefix;
        prefix += z;
        prev = z;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Single relay

struct SingleRelayOptimum {
    double y1_over_l;
    double p01;  ///< P_{0,1} / P_T
    double p02;  ///< P_{0,2} / P_T
    double p12;  ///< P_{1,2} / P_T
    /// Optimized rate is C(rate_factor * P_T / sigma2); rate_factor = 1 / H.
    double rate_factor;
};

/// Closed-form optimum for one relay: at the source while lambda <= log 3,
/// then at (1/lambda) log(sqrt(e^lambda + 1) - 1).
inline SingleRelayOptimum single_relay_optimum(double lambda) {
    detail::require_positive(lambda, "lambda");
    const double e = std::exp(lambda);
    if (lambda <= std::log(3.0)) {
        const double p01 = 2.0 / (e + 1.0);
        const double rest = (e - 1.0) / (e + 1.0) / 2.0;
        return {0.0, p01, rest, rest, 2.0 / (e + 1.0)};
    }
    const double r = std::sqrt(e + 1.0);
    return {std::log(r - 1.0) / lambda, 0.5, 0.5 / r, (r - 1.0) / (2.0 * r), 1.0 / (2.0 * (r - 1.0))};
}

// ---------------------------------------------------------------------------
// Multi-relay optimizer

struct PlacementOptions {
    int multistarts = 8;
    double cycle_tolerance = 1e-10;     ///< stop when a full cycle improves H by less
    int max_cycles = 10000;
    double agreement_tolerance = 1e-8;  ///< relative gap allowed between the two best starts
    std::uint64_t seed = 0x5eed'1234'abcdULL;
};

namespace detail {

/// Working state for coordinate descent on normalized positions.
class PlacementObjective {
public:
    PlacementObjective(int n, double lambda) : n_(static_cast<std::size_t>(n)), lambda_(lambda), z_end_(std::exp(lambda)) {}

    double value(std::span<const double> u) const { return normalized_attenuation(u, lambda_); }

    /// H as a function of u_k alone, everything else held fixed. `prefix_h` and
    /// `prefix_s` are H and S accumulated over nodes 0..k-1 (0-based relay k).
    double partial(std::span<const double> u, std::size_t k, double x, double prefix_h, double prefix_s,
                   double prev_z) const {
        double h = prefix_h;
        double prefix = prefix_s;
        double prev = prev_z;
        for (std::size_t j = k; j <= n_; ++j) {
            const double z = (j == k) ? std::exp(lambda_ * x) : (j < n_ ? std::exp(lambda_ * u[j]) : z_end_);
            h += (z - prev) / prefix;
            prefix += z;
            prev = z;
        }
        return h;
    }

    /// One cyclic pass of exact coordinate minimization. Returns the new H.
    double cycle(std::vector<double>& u) const {
        double prefix_h = 1.0;
        double prefix_s = 1.0;
        double prev = 1.0;
        for (std::size_t k = 0; k < n_; ++k) {
            const double lo = (k == 0) ? 0.0 : u[k - 1];
            const double hi = (k + 1 == n_) ? 1.0 : u[k + 1];
            auto f = [&](double x) { return partial(u, k, x, prefix_h, prefix_s, prev); };
            double best_x = u[k];
            double best_f = f(best_x);
            if (hi > lo) {
                std::uintmax_t iters = 200;
                const auto [x, fx] = boost::math::tools::brent_find_minima(f, lo, hi, 45, iters);
                for (const auto [cx, cf] : {std::pair{x, fx}, std::pair{lo, f(lo)}, std::pair{hi, f(hi)}}) {
                    if (cf < best_f) {
                        best_f = cf;
                        best_x = cx;
                    }
                }
            } else {
                best_x = lo;
            }
            u[k] = best_x;
            const double z = std::exp(lambda_ * best_x);
            prefix_h += (z - prev) / prefix_s;
            prefix_s += z;
            prev = z;
        }
        return value(u);
    }

    /// Gradient and Hessian of H with respect to u.
    void derivatives(std::span<const double> u, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
        const std::size_t n = n_;
        std::vector<double> z(n + 2), s(n + 2);
        z[0] = 1.0;
        for (std::size_t k = 1; k <= n; ++k) z[k] = std::exp(lambda_ * u[k - 1]);
        z[n + 1] = z_end_;
        s[0] = z[0];
        for (std::size_t k = 1; k <= n + 1; ++k) s[k] = s[k - 1] + z[k];
        // r[k] = sum_{j>k} n_j / S_{j-1}^2, t[k] = sum_{j>k} n_j / S_{j-1}^3
        std::vector<double> r(n + 2, 0.0), t(n + 2, 0.0);
        for (std::size_t j = n + 1; j >= 1; --j) {
            const double step = z[j] - z[j - 1];
            r[j - 1] = r[j] + step / (s[j - 1] * s[j - 1]);
            t[j - 1] = t[j] + step / (s[j - 1] * s[j - 1] * s[j - 1]);
        }
        Eigen::VectorXd gz(n);
        for (std::size_t k = 1; k <= n; ++k) gz[k - 1] = 1.0 / s[k - 1] - 1.0 / s[k] - r[k];
        grad.resize(n);
        hess.resize(n, n);
        const double l2 = lambda_ * lambda_;
        for (std::size_t k = 1; k <= n; ++k) {
            grad[k - 1] = lambda_ * z[k] * gz[k - 1];
            for (std::size_t m = 1; m <= k; ++m) {
                double hz;
                if (m == k) {
                    hz = 2.0 / (s[k] * s[k]) + 2.0 * t[k];
                } else {
                    hz = -1.0 / (s[k - 1] * s[k - 1]) + 1.0 / (s[k] * s[k]) + 2.0 * t[k];
                }
                double v = l2 * z[k] * z[m] * hz;
                if (m == k) v += l2 * z[k] * gz[k - 1];
                hess(k - 1, m - 1) = v;
                hess(m - 1, k - 1) = v;
            }
        }
    }

    /// Euclidean projection onto {0 <= u_1 <= ... <= u_N <= 1} (pool adjacent violators, then clip).
    static void project(std::vector<double>& u) {
        std::vector<double> level;
        std::vector<std::size_t> width;
        for (double x : u) {
            level.push_back(x);
            width.push_back(1);
            while (level.size() > 1 && level[level.size() - 2] > level.back()) {
                const double w1 = static_cast<double>(width[width.size() - 2]);
                const double w2 = static_cast<double>(width.back());
                const double merged = (level[level.size() - 2] * w1 + level.back() * w2) / (w1 + w2);
                width[width.size() - 2] += width.back();
                level.pop_back();
                width.pop_back();
                level.back() = merged;
            }
        }
        std::size_t out = 0;
        for (std::size_t b = 0; b < level.size(); ++b) {
            for (std::size_t i = 0; i < width[b]; ++i) u[out++] = std::clamp(level[b], 0.0, 1.0);
        }
    }

    /// Projected Newton steps over the coordinates not pinned against a constraint.
    /// Returns the final H; never increases it.
    double newton_polish(std::vector<double>& u, int max_steps) const {
        double current = value(u);
        Eigen::VectorXd grad;
        Eigen::MatrixXd hess;
        for (int step = 0; step < max_steps; ++step) {
            derivatives(u, grad, hess);
            std::vector<std::size_t> free;
            for (std::size_t k = 0; k < n_; ++k) {
                const double lo = (k == 0) ? 0.0 : u[k - 1];
                const double hi = (k + 1 == n_) ? 1.0 : u[k + 1];
                const bool at_lo = u[k] - lo <= 1e-13 && grad[k] > 0.0;
                const bool at_hi = hi - u[k] <= 1e-13 && grad[k] < 0.0;
                if (!at_lo && !at_hi) free.push_back(k);
            }
            if (free.empty()) break;
            const auto m = static_cast<Eigen::Index>(free.size());
            Eigen::MatrixXd hf(m, m);
            Eigen::VectorXd gf(m);
            for (Eigen::Index a = 0; a < m; ++a) {
                gf[a] = grad[static_cast<Eigen::Index>(free[a])];
                for (Eigen::Index b = 0; b < m; ++b) {
                    hf(a, b) = hess(static_cast<Eigen::Index>(free[a]), static_cast<Eigen::Index>(free[b]));
                }
            }
            if (gf.lpNorm<Eigen::Infinity>() < 1e-15 * std::max(1.0, current)) break;
            Eigen::VectorXd dir;
            double shift = 0.0;
            for (int attempt = 0; attempt < 30; ++attempt) {
                Eigen::LLT<Eigen::MatrixXd> llt(hf + shift * Eigen::MatrixXd::Identity(m, m));
                if (llt.info() == Eigen::Success) {
                    dir = -llt.solve(gf);
                    break;
                }
                shift = (shift == 0.0) ? 1e-8 * std::max(1.0, hf.diagonal().cwiseAbs().maxCoeff()) : shift * 10.0;
            }
            if (dir.size() == 0 || !dir.allFinite()) break;
            bool improved = false;
            std::vector<double> trial(u.size());
            for (double scale = 1.0; scale > 1e-10; scale *= 0.5) {
                trial = u;
                for (Eigen::Index a = 0; a < m; ++a) trial[free[a]] += scale * dir[a];
                project(trial);
                const double v = value(trial);
                if (v < current) {
                    const double gain = current - v;
                    u = trial;
                    current = v;
                    improved = true;
                    if (gain < 1e-15 * current) return current;
                    break;
                }
            }
            if (!improved) break;
        }
        return current;
    }

    /// Coordinate descent until a cycle gains less than `tolerance`. Each cycle
    /// is followed by projected Newton steps on the free coordinates; the cycle
    /// itself settles which coordinates sit on a constraint.
    double descend(std::vector<double>& u, const PlacementOptions& opt) const {
        double current = value(u);
        for (int c = 0; c < opt.max_cycles; ++c) {
            const double next = cycle(u);
            const double gain = current - next;
            current = std::min(current, next);
            if (gain < opt.cycle_tolerance) return current;
            current = newton_polish(u, 100);
        }
        return current;
    }

private:
    std::size_t n_;
    double lambda_;
    double z_end_;
};

}  // namespace detail

/// Minimizes H over sorted normalized positions: cyclic exact coordinate
/// descent from several starts (uniform, at the source, quadratic cluster,
/// random). The two best starts must agree; a second batch of random starts is
/// tried before giving up.
inline PlacementSolution optimize_placement(const PlacementProblem& problem, const PlacementOptions& opt = {}) {
    problem.validate();
    const auto n = static_cast<std::size_t>(problem.n_relays);
    const detail::PlacementObjective objective(problem.n_relays, problem.lambda);
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<double> best_u;
    std::vector<double> finals;
    auto run = [&](std::vector<double> u) {
        detail::PlacementObjective::project(u);
        const double h = objective.descend(u, opt);
        finals.push_back(h);
        if (best_u.empty() || h < objective.value(best_u)) best_u = u;
    };
    auto run_batch = [&](int count, bool seeded_shapes) {
        for (int s = 0; s < count; ++s) {
            std::vector<double> u(n);
            const int shape = seeded_shapes ? s : 3;
            for (std::size_t k = 0; k < n; ++k) {
                const double frac = static_cast<double>(k + 1) / static_cast<double>(n + 1);
                switch (shape) {
                    case 0: u[k] = frac; break;
                    case 1: u[k] = 0.0; break;
                    case 2: u[k] = frac * frac; break;
                    default: u[k] = unit(rng); break;
                }
            }
            std::sort(u.begin(), u.end());
            run(std::move(u));
        }
    };
    auto agreement = [&] {
        if (finals.size() < 2) return true;
        std::vector<double> sorted = finals;
        std::sort(sorted.begin(), sorted.end());
        return sorted[1] - sorted[0] <= opt.agreement_tolerance * sorted[0];
    };

    run_batch(std::max(opt.multistarts, 1), true);
    if (!agreement()) run_batch(std::max(opt.multistarts, 1), false);
    if (!agreement()) {
        std::vector<double> sorted = finals;
        std::sort(sorted.begin(), sorted.end());
        throw SolverFailure("optimize_placement: starts disagree (N=" + std::to_string(n) +
                            ", lambda=" + std::to_string(problem.lambda) + ", best=" + std::to_string(sorted[0]) +
                            ", runner-up=" + std::to_string(sorted[1]) + ")");
    }
    PlacementSolution out;
    out.normalized_positions = best_u;
    out.objective = objective.value(best_u);
    out.gain = std::exp(problem.lambda) / out.objective;
    return out;
}

/// Exhaustive search over sorted positions on the grid {0, step, 2 step, ..., 1}.
/// Oracle for N <= 3.
inline PlacementSolution grid_oracle_placement(const PlacementProblem& problem, double step) {
    problem.validate();
    detail::require_positive(step, "step");
    if (problem.n_relays > 3) throw InvalidArgument("n_relays", "grid oracle supports at most 3 relays");
    const auto cells = static_cast<std::size_t>(std::llround(1.0 / step));
    if (cells < 1 || std::abs(static_cast<double>(cells) * step - 1.0) > 1e-9) {
        throw InvalidArgument("step", "must divide 1 exactly");
    }
    std::vector<double> z(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) z[i] = std::exp(problem.lambda * static_cast<double>(i) / static_cast<double>(cells));
    const double z_end = std::exp(problem.lambda);

    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_idx;
    std::vector<std::size_t> idx(static_cast<std::size_t>(problem.n_relays));

    // Terms are accumulated incrementally so each level only adds its own piece.
    auto recurse = [&](auto&& self, std::size_t level, std::size_t from, double h, double prefix, double prev) -> void {
        if (level == idx.size()) {
            const double total = h + (z_end - prev) / prefix;
            if (total < best) {
                best = total;
                best_idx = idx;
            }
            return;
        }
        for (std::size_t i = from; i <= cells; ++i) {
            idx[level] = i;
            self(self, level + 1, i, h + (z[i] - prev) / prefix, prefix + z[i], z[i]);
        }
    };
    recurse(recurse, 0, 0, 1.0, 1.0, 1.0);

    PlacementSolution out;
    for (std::size_t i : best_idx) out.normalized_positions.push_back(static_cast<double>(i) / static_cast<double>(cells));
    out.objective = best;
    out.gain = z_end / best;
    return out;
}

/// f(N) for N uniformly spaced relays: f = a + sum_{k=2}^{N+1} (a^k - a^{k-1}) / (1 + a + ... + a^{k-1}),
/// a = exp(lambda / (N+1)). The optimized rate is C(P_T / (sigma2 f)).
inline double uniform_rate_factor(int n_relays, double lambda) {
    if (n_relays < 1) throw InvalidArgument("n_relays", "must be at least 1");
    detail::require_positive(lambda, "lambda");
    const double a = std::exp(lambda / (n_relays + 1));
    double f = a;
    double power = a;        // a^{k-1}
    double geometric = 1.0 + a;  // 1 + a + ... + a^{k-1}
    for (int k = 2; k <= n_relays + 1; ++k) {
        f += power * (a - 1.0) / geometric;
        power *= a;
        geometric += power;
    }
    return f;
}

}  // namespace relaynet

#endif  // RELAYNET_PLACEMENT_HPP
