#pragma once

#include "mhp/counts.hpp"
#include "mhp/model.hpp"
#include "mhp/parallel.hpp"
#include "mhp/rng.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

namespace mhp {

struct SimulationOptions {
    std::size_t max_events = 10'000'000;
};

namespace detail {

inline constexpr std::uint64_t kSimulationStream = 0x51u;

// Largest value of a unimodal offspring density on [lo, hi].
inline double kernel_sup(const ModelSpec& spec, const ParameterVector& theta, std::size_t m, std::size_t j,
                         double lo, double hi) {
    const KernelParams& k = theta.kernel_at(m, j);
    if (spec.kernel(m, j) == KernelFamily::Exponential) return std::exp(-lo / k.beta) / k.beta;
    const double mode = k.shape > 1.0 ? (k.shape - 1.0) * k.scale : 0.0;
    return gamma_pdf(std::clamp(mode, lo, hi), k.shape, k.scale);
}

}  // namespace detail

/// One exact realisation on (0, horizon] by thinning the total intensity.
///
/// With exponential kernels the excitation is tracked by the epsilon matrix
/// and the current total intensity bounds the rest of the path. Other kernels
/// keep the full history and bound the intensity over a lookahead window of
/// one mean offspring delay.
[[nodiscard]] inline EventSequence simulate_path(const ModelSpec& spec, const ParameterVector& theta, double horizon,
                                                 std::uint64_t seed, const SimulationOptions& options = {},
                                                 std::uint64_t replicate = 0) {
    require_valid(spec, theta, ValidationMode::FiniteHorizon);
    if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidSpec, "horizon must be positive");
    const std::size_t dim = spec.dimension;
    const bool exponential = spec.all_exponential();

    double lookahead = horizon;
    if (!exponential) {
        double mean_delay = 0.0;
        std::size_t pairs = 0;
        for (std::size_t m = 0; m < dim; ++m) {
            for (std::size_t j = 0; j < dim; ++j) {
                const KernelParams& k = theta.kernel_at(m, j);
                if (spec.kernel(m, j) == KernelFamily::Gamma) {
                    if (k.shape < 1.0 && theta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) > 0.0)
                        throw Error(ErrorCode::UnsupportedKernel, "thinning needs gamma shape >= 1 (unbounded density at 0)");
                    mean_delay += k.shape * k.scale;
                } else {
                    mean_delay += k.beta;
                }
                ++pairs;
            }
        }
        lookahead = mean_delay / static_cast<double>(pairs);
    }

    Rng rng(stream_key(seed, detail::kSimulationStream, replicate));
    EventSequence path;
    path.horizon = horizon;

    // Exponential state: eps(m, p) at time t, including events at t.
    Eigen::MatrixXd eps = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    Eigen::MatrixXd inv_beta(eps.rows(), eps.cols());
    Eigen::MatrixXd jump(eps.rows(), eps.cols());
    for (std::size_t m = 0; m < dim; ++m) {
        for (std::size_t p = 0; p < dim; ++p) {
            const auto mi = static_cast<Eigen::Index>(m);
            const auto pi = static_cast<Eigen::Index>(p);
            inv_beta(mi, pi) = 1.0 / theta.kernel_at(m, p).beta;
            jump(mi, pi) = theta.eta(mi, pi) * inv_beta(mi, pi);
        }
    }
    auto decay_to = [&](double from, double to) {
        eps.array() *= (-(to - from) * inv_beta.array()).exp();
    };

    std::vector<double> rates(dim);
    auto rates_at = [&](double t) {
        double total = 0.0;
        for (std::size_t m = 0; m < dim; ++m) {
            double r = baseline_value(spec, theta, m, t);
            if (exponential) {
                r += eps.row(static_cast<Eigen::Index>(m)).sum();
            } else {
                for (std::size_t k = 0; k < path.size(); ++k) {
                    const auto j = static_cast<std::size_t>(path.types[k]);
                    r += theta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) *
                         kernel_density(spec, theta, m, j, t - path.times[k]);
                }
            }
            rates[m] = r;
            total += r;
        }
        return total;
    };
    auto bound_on = [&](double t, double until) {
        double bound = 0.0;
        for (std::size_t m = 0; m < dim; ++m) bound += baseline_max(spec.baselines[m], theta.nu[m], t, until);
        if (exponential) return bound + eps.sum();
        for (std::size_t k = 0; k < path.size(); ++k) {
            const auto j = static_cast<std::size_t>(path.types[k]);
            for (std::size_t m = 0; m < dim; ++m) {
                const double eta = theta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j));
                if (eta > 0.0)
                    bound += eta * detail::kernel_sup(spec, theta, m, j, t - path.times[k], until - path.times[k]);
            }
        }
        return bound;
    };

    double t = 0.0;
    while (t < horizon) {
        const double window_end = std::min(horizon, t + lookahead);
        const double bound = bound_on(t, window_end);
        const double candidate = bound > 0.0 ? t + rng.exponential() / bound : window_end + 1.0;
        if (candidate > window_end) {
            if (exponential) decay_to(t, window_end);
            t = window_end;
            continue;
        }
        if (exponential) decay_to(t, candidate);
        t = candidate;
        const double total = rates_at(t);
        assert(total <= bound * (1.0 + 1e-9));
        if (rng.uniform() * bound > total) continue;

        double pick = rng.uniform() * total;
        std::size_t type = 0;
        while (type + 1 < dim && pick >= rates[type]) pick -= rates[type++];
        path.push_back(t, static_cast<int>(type));
        if (path.size() > options.max_events)
            throw Error(ErrorCode::UnstableExplosion, "more than " + std::to_string(options.max_events) + " events");
        if (exponential) eps.col(static_cast<Eigen::Index>(type)) += jump.col(static_cast<Eigen::Index>(type));
    }
    return path;
}

/// Independent replicate paths; replicate r uses stream (seed, r) whatever the thread count.
[[nodiscard]] inline std::vector<EventSequence> simulate_paths(const ModelSpec& spec, const ParameterVector& theta,
                                                               double horizon, std::uint64_t seed, std::size_t count,
                                                               unsigned threads = 1,
                                                               const SimulationOptions& options = {}) {
    std::vector<EventSequence> paths(count);
    parallel_for(count, threads, [&](std::size_t r) {
        paths[r] = simulate_path(spec, theta, horizon, seed, options, r);
    });
    return paths;
}

/// Counts events into half-open windows (t_{i-1}, t_i].
[[nodiscard]] inline IntervalCounts aggregate(const EventSequence& path, const AggregationGrid& grid,
                                              std::size_t dimension) {
    grid.check();
    if (path.horizon != grid.horizon())
        throw Error(ErrorCode::GridHorizonMismatch,
                    "grid ends at " + std::to_string(grid.horizon()) + " but the path horizon is " + std::to_string(path.horizon));
    IntervalCounts counts = IntervalCounts::zeros(grid, dimension);
    std::size_t i = 0;
    for (std::size_t k = 0; k < path.size(); ++k) {
        const double t = path.times[k];
        if (t <= 0.0 || t > grid.horizon())
            throw Error(ErrorCode::GridHorizonMismatch, "event at " + std::to_string(t) + " outside the grid");
        while (t > grid.boundaries[i + 1]) ++i;
        ++counts.at(i, static_cast<std::size_t>(path.types[k]));
    }
    return counts;
}

}  // namespace mhp
