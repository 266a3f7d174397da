#ifndef RELAYNET_CHANNEL_HPP
#define RELAYNET_CHANNEL_HPP

// Gaussian line network with full-duplex decode-and-forward relays under
// exponential path loss: gains, the coherent-relaying rate bound, and the
// closed-form sum-power allocation that equalizes every decoding constraint.
//
// Node indices: 0 is the source, 1..N are relays in order, N+1 is the sink.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "relaynet/common.hpp"

namespace relaynet {

struct ChannelParams {
    double rho = 1.0;      ///< path-loss exponent per unit distance
    double sigma2 = 1.0;   ///< receiver noise variance (mW)
    double p_total = 1.0;  ///< sum power budget P_T (mW)

    void validate() const {
        detail::require_positive(rho, "rho");
        detail::require_positive(sigma2, "sigma2");
        detail::require_positive(p_total, "p_total");
    }
};

/// Line of length `length` with relays at distances `positions` from the source.
/// Coincident relays are legal.
struct NodeLayout {
    double length = 1.0;
    std::vector<double> positions;

    std::size_t relay_count() const noexcept { return positions.size(); }
    std::size_t node_count() const noexcept { return positions.size() + 2; }

    /// Position of node i, with the source at 0 and the sink at `length`.
    double node_position(std::size_t i) const {
        if (i == 0) return 0.0;
        if (i == positions.size() + 1) return length;
        return positions.at(i - 1);
    }

    void validate() const {
        detail::require_positive(length, "length");
        double prev = 0.0;
        for (std::size_t k = 0; k < positions.size(); ++k) {
            const double y = positions[k];
            if (!std::isfinite(y) || y < 0.0 || y > length) {
                throw InvalidArgument("positions", "relay " + std::to_string(k + 1) + " lies outside [0, length]");
            }
            if (y < prev) {
                throw InvalidArgument("positions", "relay positions must be sorted ascending");
            }
            prev = y;
        }
    }

    /// Layout of `relays` equally spaced relays (positions kL/(N+1)).
    static NodeLayout uniform(double length, std::size_t relays) {
        NodeLayout layout{length, {}};
        layout.positions.reserve(relays);
        for (std::size_t k = 1; k <= relays; ++k) {
            layout.positions.push_back(length * static_cast<double>(k) / static_cast<double>(relays + 1));
        }
        return layout;
    }
};

/// Power gains g(i,j) = exp(-rho |y_i - y_j|) and amplitude gains h(i,j) = sqrt(g(i,j)).
class GainTable {
public:
    GainTable() = default;
    GainTable(std::size_t nodes, std::vector<double> g) : nodes_(nodes), g_(std::move(g)) {
        h_.resize(g_.size());
        for (std::size_t i = 0; i < g_.size(); ++i) h_[i] = std::sqrt(g_[i]);
    }

    std::size_t node_count() const noexcept { return nodes_; }
    std::size_t relay_count() const noexcept { return nodes_ - 2; }
    double g(std::size_t i, std::size_t j) const { return g_.at(i * nodes_ + j); }
    double h(std::size_t i, std::size_t j) const { return h_.at(i * nodes_ + j); }

private:
    std::size_t nodes_ = 0;
    std::vector<double> g_;
    std::vector<double> h_;
};

/// Link powers P(i,j), 0 <= i < j <= N+1, and per-receiver sums gamma(j) = sum_i P(i,j).
class PowerAllocation {
public:
    PowerAllocation() = default;
    explicit PowerAllocation(std::size_t relays)
        : relays_(relays), p_(packed_size(relays), 0.0), gamma_(relays + 1, 0.0) {}

    std::size_t relay_count() const noexcept { return relays_; }

    /// Number of transmitter/receiver pairs (N+1)(N+2)/2.
    static std::size_t packed_size(std::size_t relays) { return (relays + 1) * (relays + 2) / 2; }

    double power(std::size_t i, std::size_t j) const { return p_.at(index(i, j)); }
    void set_power(std::size_t i, std::size_t j, double value) { p_.at(index(i, j)) = value; }

    /// gamma(j) for receiver j in 1..N+1.
    double gamma(std::size_t j) const { return gamma_.at(j - 1); }
    std::span<const double> gammas() const noexcept { return gamma_; }

    double total() const {
        double sum = 0.0;
        for (double p : p_) sum += p;
        return sum;
    }

    /// Recompute gamma from the link powers.
    void refresh_gamma() {
        for (std::size_t j = 1; j <= relays_ + 1; ++j) {
            double sum = 0.0;
            for (std::size_t i = 0; i < j; ++i) sum += power(i, j);
            gamma_[j - 1] = sum;
        }
    }

private:
    std::size_t index(std::size_t i, std::size_t j) const {
        if (!(i < j) || j > relays_ + 1) {
            throw InvalidArgument("alloc", "link (" + std::to_string(i) + "," + std::to_string(j) + ") does not exist");
        }
        return j * (j - 1) / 2 + i;
    }

    std::size_t relays_ = 0;
    std::vector<double> p_;
    std::vector<double> gamma_;
};

inline GainTable build_gain_table(const NodeLayout& layout, double rho) {
    detail::require_positive(rho, "rho");
    layout.validate();
    const std::size_t n = layout.node_count();
    std::vector<double> g(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            g[i * n + j] = std::exp(-rho * std::abs(layout.node_position(i) - layout.node_position(j)));
        }
    }
    return GainTable(n, std::move(g));
}

/// Received SNR terms of the coherent decode-and-forward bound, one per
/// receiving node k = 1..N+1:
///   (1/sigma2) * sum_{j=1}^{k} ( sum_{i<j} h(i,k) sqrt(P(i,j)) )^2
inline std::vector<double> decoding_snr_terms(const GainTable& gains, const PowerAllocation& alloc, double sigma2) {
    const std::size_t relays = gains.relay_count();
    if (alloc.relay_count() != relays) {
        throw InvalidArgument("alloc", "relay count does not match the gain table");
    }
    detail::require_positive(sigma2, "sigma2");
    std::vector<double> terms(relays + 1);
    for (std::size_t k = 1; k <= relays + 1; ++k) {
        double received = 0.0;
        for (std::size_t j = 1; j <= k; ++j) {
            double amplitude = 0.0;
            for (std::size_t i = 0; i < j; ++i) {
                const double p = alloc.power(i, j);
                if (p < 0.0) throw InvalidArgument("alloc", "link powers must be non-negative");
                amplitude += gains.h(i, k) * std::sqrt(p);
            }
            received += amplitude * amplitude;
        }
        terms[k - 1] = received / sigma2;
    }
    return terms;
}

/// Rate of the multi-relay inner bound: min_k C(term_k).
inline double achievable_rate_raw(const GainTable& gains, const PowerAllocation& alloc, double sigma2) {
    const auto terms = decoding_snr_terms(gains, alloc, sigma2);
    double worst = std::numeric_limits<double>::infinity();
    for (double t : terms) worst = std::min(worst, t);
    return capacity(worst);
}

namespace detail {

/// z_k = exp(rho y_k) for k = 0..N+1.
inline std::vector<double> inverse_source_gains(const NodeLayout& layout, double rho) {
    std::vector<double> z(layout.node_count());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = std::exp(rho * layout.node_position(k));
    return z;
}

/// H = z_1 + sum_{k=2}^{N+1} (z_k - z_{k-1}) / sum_{l<k} z_l, with z_0 = 1.
/// `z` holds z_0..z_{N+1}.
inline double attenuation_from_z(std::span<const double> z) {
    double h = z[1];
    double prefix = z[0] + z[1];
    for (std::size_t k = 2; k < z.size(); ++k) {
        h += (z[k] - z[k - 1]) / prefix;
        prefix += z[k];
    }
    return h;
}

}  // namespace detail

/// Net attenuation seen by the total power after optimal allocation.
/// Effective SNR is (P_T / sigma2) / H.
inline double attenuation_h(const NodeLayout& layout, double rho) {
    detail::require_positive(rho, "rho");
    layout.validate();
    const auto z = detail::inverse_source_gains(layout, rho);
    return detail::attenuation_from_z(z);
}

/// Sum-power allocation that equalizes all N+1 decoding constraints.
/// Uses the z-form so coincident nodes give gamma = 0 without 0/0.
inline PowerAllocation optimal_allocation(const NodeLayout& layout, const ChannelParams& params) {
    params.validate();
    layout.validate();
    const std::size_t relays = layout.relay_count();
    const auto z = detail::inverse_source_gains(layout, params.rho);
    const double h = detail::attenuation_from_z(z);

    PowerAllocation alloc(relays);
    double prefix = z[0];
    for (std::size_t j = 1; j <= relays + 1; ++j) {
        // gamma_1 = P_T z_1 / H, gamma_j = P_T (z_j - z_{j-1}) / (S_{j-1} H)
        const double share = (j == 1) ? z[1] : (z[j] - z[j - 1]) / prefix;
        const double gamma = params.p_total * share / h;
        for (std::size_t i = 0; i < j; ++i) {
            alloc.set_power(i, j, gamma * z[i] / prefix);
        }
        prefix += z[j];
    }
    alloc.refresh_gamma();
    return alloc;
}

inline double optimized_rate(const NodeLayout& layout, const ChannelParams& params) {
    params.validate();
    return capacity(params.p_total / params.sigma2 / attenuation_h(layout, params.rho));
}

/// G = exp(rho L) / H. Only defined when at least one relay is present.
inline double relaying_gain(const NodeLayout& layout, double rho) {
    if (layout.relay_count() == 0) {
        throw InvalidArgument("positions", "relaying gain needs at least one relay");
    }
    return std::exp(rho * layout.length) / attenuation_h(layout, rho);
}

/// Exhaustive max-min search over the power simplex with `grid_steps` quanta of
/// P_T spread over all (N+1)(N+2)/2 links. Test oracle for N <= 2 only.
inline double bruteforce_max_min(const NodeLayout& layout, const ChannelParams& params, int grid_steps) {
    params.validate();
    if (grid_steps < 1) throw InvalidArgument("grid_steps", "must be at least 1");
    const std::size_t relays = layout.relay_count();
    if (relays > 2) throw InvalidArgument("positions", "brute-force oracle supports at most 2 relays");
    const GainTable gains = build_gain_table(layout, params.rho);

    const std::size_t links = PowerAllocation::packed_size(relays);
    const std::size_t receivers = relays + 1;
    const int steps = grid_steps;

    std::vector<double> root(static_cast<std::size_t>(steps) + 1);
    for (int q = 0; q <= steps; ++q) root[q] = std::sqrt(params.p_total * q / steps);

    // Link ordering matches PowerAllocation's packing: (0,1), (0,2), (1,2), (0,3), ...
    std::array<std::size_t, 6> tx{}, rx{};
    for (std::size_t j = 1, l = 0; j <= receivers; ++j) {
        for (std::size_t i = 0; i < j; ++i, ++l) {
            tx[l] = i;
            rx[l] = j;
        }
    }

    std::array<int, 6> quanta{};
    double best = 0.0;
    auto evaluate = [&] {
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k <= receivers; ++k) {
            double received = 0.0;
            for (std::size_t j = 1; j <= k; ++j) {
                double amplitude = 0.0;
                for (std::size_t l = 0; l < links; ++l) {
                    if (rx[l] == j) amplitude += gains.h(tx[l], k) * root[quanta[l]];
                }
                received += amplitude * amplitude;
            }
            worst = std::min(worst, received);
            if (worst <= best) return;
        }
        best = worst;
    };

    std::function<void(std::size_t, int)> enumerate = [&](std::size_t link, int remaining) {
        if (link + 1 == links) {
            quanta[link] = remaining;
            evaluate();
            return;
        }
        for (int q = 0; q <= remaining; ++q) {
            quanta[link] = q;
            enumerate(link + 1, remaining - q);
        }
    };
    enumerate(0, steps);
    return capacity(best / params.sigma2);
}

}  // namespace relaynet

#endif  // RELAYNET_CHANNEL_HPP
