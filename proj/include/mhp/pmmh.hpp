#pragma once

#include "mhp/counts.hpp"
#include "mhp/model.hpp"
#include "mhp/rng.hpp"
#include "mhp/simulate.hpp"
#include "mhp/smc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mhp {

struct PmmhConfig {
    std::size_t iterations = 1000;
    /// Random-walk jump size: a standard deviation unless delta_is_variance.
    double delta = 0.12;
    bool delta_is_variance = false;
    /// Multiplicative random walk on log coordinates (Jacobian-corrected).
    bool log_scale_proposal = false;
    /// Optional per-coordinate multipliers of delta (free layout).
    std::vector<double> coordinate_scales;
    double burn_in_fraction = 0.10;
    std::uint64_t seed = 0;
    /// Starting point; the counts-based heuristic when empty.
    std::optional<ParameterVector> init;
    /// Checked between iterations; the chain stops early when set.
    const std::atomic<bool>* stop = nullptr;

    void check() const {
        if (iterations < 1) throw Error(ErrorCode::InvalidSpec, "need at least one iteration");
        if (!(delta > 0.0)) throw Error(ErrorCode::InvalidSpec, "delta must be positive");
        if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
            throw Error(ErrorCode::InvalidSpec, "burn-in fraction must lie in [0, 1)");
    }

    [[nodiscard]] double step_sd() const { return delta_is_variance ? std::sqrt(delta) : delta; }
};

/// One chain state. `theta` is in the free (tie-collapsed) layout and
/// `log_lik_hat` is the estimate stored when the state was accepted.
struct ChainRecord {
    std::size_t iteration = 0;
    std::vector<double> theta;
    double log_lik_hat = kNegInf;
    bool accepted = false;

    friend bool operator==(const ChainRecord&, const ChainRecord&) = default;
};

/// Half the events are taken as background, self-excitation 0.6, cross 0.2,
/// exponential means 1, gamma shape and scale 1.
[[nodiscard]] inline ParameterVector default_init(const IntervalCounts& counts, const ModelSpec& spec) {
    counts.check();
    if (counts.dimension != spec.dimension) throw Error(ErrorCode::ShapeMismatch, "counts do not match the model dimension");
    const std::vector<long> totals = counts.type_totals();
    long grand = 0;
    for (long t : totals) grand += t;
    if (grand == 0) throw Error(ErrorCode::DegenerateData, "no events observed");
    ParameterVector theta = shaped_parameters(spec);
    const double horizon = counts.horizon();
    for (std::size_t m = 0; m < spec.dimension; ++m)
        std::fill(theta.nu[m].begin(), theta.nu[m].end(), static_cast<double>(totals[m]) / (2.0 * horizon));
    const auto dim = static_cast<Eigen::Index>(spec.dimension);
    for (Eigen::Index m = 0; m < dim; ++m)
        for (Eigen::Index j = 0; j < dim; ++j) theta.eta(m, j) = m == j ? 0.6 : 0.2;
    for (auto& k : theta.kernel) k = KernelParams{1.0, 1.0, 1.0};
    // Tie groups take their representative's value.
    return from_flat(spec, to_flat(spec, theta));
}

/// Metropolis-Hastings over the free layout with any log-likelihood
/// (exact or estimated). Each state's value is computed once when proposed
/// and reused until the chain moves. Positivity violations are rejected
/// without evaluation; -inf estimates are rejected.
///
/// `log_lik(flat, iteration)` must be deterministic in its arguments.
template <typename LogLik, typename Sink>
std::vector<ChainRecord> run_metropolis(const ModelSpec& spec, const std::vector<double>& init, LogLik&& log_lik,
                                        const PmmhConfig& config, Sink&& sink) {
    config.check();
    const ParameterLayout layout(spec);
    if (init.size() != layout.free_size()) throw Error(ErrorCode::ShapeMismatch, "initial vector has the wrong length");
    require_valid(spec, from_flat(spec, init));
    if (!config.coordinate_scales.empty() && config.coordinate_scales.size() != init.size())
        throw Error(ErrorCode::ShapeMismatch, "coordinate scales do not match the parameter count");

    Rng rng(stream_key(config.seed, 0x9a1u));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sd = config.step_sd();

    std::vector<ChainRecord> chain;
    chain.reserve(config.iterations + 1);
    ChainRecord current{0, init, log_lik(init, std::size_t{0}), false};
    chain.push_back(current);
    sink(chain.back());

    std::vector<double> proposal(init.size());
    for (std::size_t it = 1; it <= config.iterations; ++it) {
        if (config.stop && config.stop->load()) break;
        double log_jacobian = 0.0;
        for (std::size_t f = 0; f < proposal.size(); ++f) {
            const double scale = sd * (config.coordinate_scales.empty() ? 1.0 : config.coordinate_scales[f]);
            const double z = gauss(rng);
            if (config.log_scale_proposal) {
                proposal[f] = current.theta[f] * std::exp(scale * z);
                if (current.theta[f] > 0.0) log_jacobian += std::log(proposal[f]) - std::log(current.theta[f]);
            } else {
                proposal[f] = current.theta[f] + scale * z;
            }
        }
        const double u = rng.uniform();
        bool accept = false;
        double candidate = kNegInf;
        if (validate(spec, from_flat(spec, proposal)).ok()) {
            candidate = log_lik(proposal, it);
            if (candidate != kNegInf) {
                const double log_ratio = candidate - current.log_lik_hat + log_jacobian;
                accept = current.log_lik_hat == kNegInf || std::log(u) < log_ratio;
            }
        }
        if (accept) {
            current.theta = proposal;
            current.log_lik_hat = candidate;
        }
        current.iteration = it;
        current.accepted = accept;
        chain.push_back(current);
        sink(chain.back());
    }
    return chain;
}

/// Pseudo-marginal chain: every proposal gets one fresh SMC run with seed
/// derived from (config seed, iteration); degenerate runs are rejections.
template <typename Sink>
std::vector<ChainRecord> run_chain(const ModelSpec& spec, const IntervalCounts& counts, const SmcConfig& smc_config,
                                   const PmmhConfig& config, Sink&& sink) {
    const ParameterVector init = config.init ? *config.init : default_init(counts, spec);
    auto estimate = [&](const std::vector<double>& flat, std::size_t iteration) {
        SmcConfig c = smc_config;
        c.seed = stream_key(config.seed, 0x9a2u, iteration);
        c.keep_particles = false;
        return smc_log_likelihood(spec, from_flat(spec, flat), counts, c).log_likelihood;
    };
    return run_metropolis(spec, to_flat(spec, init), estimate, config, std::forward<Sink>(sink));
}

inline std::vector<ChainRecord> run_chain(const ModelSpec& spec, const IntervalCounts& counts,
                                          const SmcConfig& smc_config, const PmmhConfig& config) {
    return run_chain(spec, counts, smc_config, config, [](const ChainRecord&) {});
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

/// Phi^{-1}(0.975).
inline constexpr double kNormalQuantile975 = 1.959963984540054;

/// Quantile of sorted data by linear interpolation of order statistics
/// (Hyndman-Fan type 7).
[[nodiscard]] inline double sorted_quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

struct ParameterSummary {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

/// Median, central 95% interval, and the interval width over 2 Phi^{-1}(0.975).
[[nodiscard]] inline ParameterSummary summarize_samples(std::vector<double> samples, std::string name = {}) {
    std::sort(samples.begin(), samples.end());
    ParameterSummary s;
    s.name = std::move(name);
    s.estimate = sorted_quantile(samples, 0.5);
    s.ci_low = sorted_quantile(samples, 0.025);
    s.ci_high = sorted_quantile(samples, 0.975);
    s.se = (s.ci_high - s.ci_low) / (2.0 * kNormalQuantile975);
    return s;
}

[[nodiscard]] inline std::size_t burn_in_count(std::size_t length, double burn_in_fraction) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(length) * burn_in_fraction));
}

[[nodiscard]] inline std::vector<ParameterSummary> summarize(const std::vector<ChainRecord>& chain, double burn_in_fraction,
                                                             const std::vector<std::string>& names = {}) {
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
        throw Error(ErrorCode::InvalidSpec, "burn-in fraction must lie in [0, 1)");
    const std::size_t skip = burn_in_count(chain.size(), burn_in_fraction);
    if (chain.size() - skip < 100)
        throw Error(ErrorCode::ChainTooShort, std::to_string(chain.size() - skip) + " post-burn-in records (need 100)");
    const std::size_t dim = chain.front().theta.size();
    std::vector<ParameterSummary> out;
    for (std::size_t f = 0; f < dim; ++f) {
        std::vector<double> column;
        column.reserve(chain.size() - skip);
        for (std::size_t r = skip; r < chain.size(); ++r) column.push_back(chain[r].theta[f]);
        out.push_back(summarize_samples(std::move(column), f < names.size() ? names[f] : "theta[" + std::to_string(f + 1) + "]"));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Posterior-predictive envelope
// ---------------------------------------------------------------------------

struct Envelope {
    std::vector<double> times;       // window ends t_1..t_I
    std::vector<double> quantiles;   // requested levels
    std::size_t dimension = 0;
    /// values[(i * dimension + m) * quantiles.size() + q]: cumulative count
    /// of type m up to times[i] at level quantiles[q].
    std::vector<double> values;

    [[nodiscard]] double at(std::size_t i, std::size_t m, std::size_t q) const {
        return values[(i * dimension + m) * quantiles.size() + q];
    }
};

/// Pointwise quantiles of cumulative counts over S simulated paths.
[[nodiscard]] inline Envelope posterior_predictive_envelope(const ParameterVector& theta, const ModelSpec& spec,
                                                           const AggregationGrid& grid, std::size_t replicates,
                                                           const std::vector<double>& quantiles, std::uint64_t seed,
                                                           unsigned threads = 1) {
    grid.check();
    require_valid(spec, theta);
    if (replicates == 0) throw Error(ErrorCode::InvalidSpec, "need at least one replicate");
    for (double q : quantiles)
        if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::InvalidSpec, "quantile levels must lie in [0, 1]");
    const std::size_t I = grid.intervals();
    const std::size_t dim = spec.dimension;
    std::vector<std::vector<double>> cumulative(replicates);
    parallel_for(replicates, threads, [&](std::size_t r) {
        const EventSequence path = simulate_path(spec, theta, grid.horizon(), seed, {}, r);
        const IntervalCounts c = aggregate(path, grid, dim);
        std::vector<double> cum(I * dim);
        for (std::size_t m = 0; m < dim; ++m) {
            double running = 0.0;
            for (std::size_t i = 0; i < I; ++i) {
                running += c.at(i, m);
                cum[i * dim + m] = running;
            }
        }
        cumulative[r] = std::move(cum);
    });
    Envelope env;
    env.times.assign(grid.boundaries.begin() + 1, grid.boundaries.end());
    env.quantiles = quantiles;
    env.dimension = dim;
    env.values.resize(I * dim * quantiles.size());
    std::vector<double> column(replicates);
    for (std::size_t cell = 0; cell < I * dim; ++cell) {
        for (std::size_t r = 0; r < replicates; ++r) column[r] = cumulative[r][cell];
        std::sort(column.begin(), column.end());
        for (std::size_t q = 0; q < quantiles.size(); ++q)
            env.values[cell * quantiles.size() + q] = sorted_quantile(column, quantiles[q]);
    }
    return env;
}

}  // namespace mhp
