#pragma once

#include "mhp/counts.hpp"
#include "mhp/model.hpp"
#include "mhp/parallel.hpp"
#include "mhp/rng.hpp"
#include "mhp/special.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

namespace mhp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class Proposal { OrderedUniform, PoissonRate95 };

struct Resampling {
    enum class Kind { EveryStep, EssThreshold };
    Kind kind = Kind::EveryStep;
    double fraction = 0.5;  // EssThreshold: resample when ESS < fraction * J

    [[nodiscard]] static Resampling every_step() { return {}; }
    [[nodiscard]] static Resampling ess_threshold(double fraction) { return {Kind::EssThreshold, fraction}; }
};

struct SmcConfig {
    std::size_t particles = 100;
    Proposal proposal = Proposal::OrderedUniform;
    Resampling resampling{};
    std::uint64_t seed = 0;
    unsigned threads = 1;
    /// Keep the weighted particle cloud of the last interval in the result.
    bool keep_particles = false;

    void check() const {
        if (particles < 2) throw Error(ErrorCode::InvalidSpec, "need at least 2 particles");
        if (resampling.kind == Resampling::Kind::EssThreshold && !(resampling.fraction > 0.0 && resampling.fraction <= 1.0))
            throw Error(ErrorCode::InvalidSpec, "ESS threshold fraction must lie in (0, 1]");
    }
};

/// One particle: the epsilon matrix for all-exponential models, the full
/// retained history otherwise.
struct ParticleState {
    std::optional<EpsilonMatrix> epsilon;
    EventSequence history;
    double log_weight = 0.0;
    std::size_t id = 0;
};

/// The latent events proposed for one observation window.
struct ProposedEvents {
    std::vector<double> times;
    std::vector<int> types;
};

/// Result of one filter run.
///
/// `particles`, when requested, is the weighted cloud after the last window.
/// With the ordered-uniform proposal it targets the filtering law only; it is
/// not a sample from the predictive law.
struct SmcResult {
    double log_likelihood = kNegInf;
    std::vector<double> per_interval_log_factors;
    std::vector<double> ess_trace;
    bool degenerate = false;
    std::vector<ParticleState> particles;
};

// ---------------------------------------------------------------------------
// Proposals
// ---------------------------------------------------------------------------

/// n ordered uniforms on (t_prev, t_cur] from normalised exponential spacings.
inline void propose_times_uniform(double t_prev, double t_cur, std::size_t n, Rng& rng, std::span<double> out) {
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        total += rng.exponential();
        out[k] = total;
    }
    total += rng.exponential();
    const double scale = (t_cur - t_prev) / total;
    double prev = t_prev;
    for (std::size_t k = 0; k < n; ++k) {
        double t = std::min(t_prev + out[k] * scale, t_cur);
        if (t <= prev) t = std::nextafter(prev, t_cur);
        out[k] = t;
        prev = t;
    }
}

[[nodiscard]] inline std::vector<double> propose_times_uniform(double t_prev, double t_cur, std::size_t n, Rng& rng) {
    std::vector<double> out(n);
    propose_times_uniform(t_prev, t_cur, n, rng, out);
    return out;
}

/// Uniformly random arrangement of the multiset holding counts[m] copies of m.
inline void propose_types(std::span<const int> counts, Rng& rng, std::span<int> out) {
    std::size_t k = 0;
    for (std::size_t m = 0; m < counts.size(); ++m)
        for (int c = 0; c < counts[m]; ++c) out[k++] = static_cast<int>(m);
    for (std::size_t i = k; i > 1; --i) std::swap(out[i - 1], out[rng.below(i)]);
}

[[nodiscard]] inline std::vector<int> propose_types(std::span<const int> counts, Rng& rng) {
    std::size_t n = 0;
    for (int c : counts) n += static_cast<std::size_t>(c);
    std::vector<int> out(n);
    propose_types(counts, rng, out);
    return out;
}

/// Rate that puts n exponential-gap arrivals inside a window of the given
/// width with probability 0.95.
[[nodiscard]] inline double poisson_proposal_rate(std::size_t n, double width) {
    return boost::math::gamma_p_inv(static_cast<double>(n), 0.95) / width;
}

/// First n arrivals of a Poisson process of the given rate started at t_prev.
/// Arrivals may land past t_cur.
inline void propose_times_poisson(double t_prev, double rate, std::size_t n, Rng& rng, std::span<double> out) {
    double t = t_prev;
    for (std::size_t k = 0; k < n; ++k) {
        t += rng.exponential() / rate;
        out[k] = t;
    }
}

[[nodiscard]] inline std::vector<double> propose_times_poisson(double t_prev, double t_cur, std::size_t n, Rng& rng) {
    std::vector<double> out(n);
    if (n > 0) propose_times_poisson(t_prev, poisson_proposal_rate(n, t_cur - t_prev), n, rng, out);
    return out;
}

namespace detail {

/// Per-window terms of the log weight that do not depend on the particle.
struct WindowTerms {
    double t_prev = 0.0;
    double t_cur = 0.0;
    std::size_t n = 0;
    double baseline_mass = 0.0;  // integral of the total baseline over the window
    double log_correction = 0.0; // log of 1 / (proposal density), particle-free part
    double poisson_rate = 0.0;   // PoissonRate95 only
};

inline WindowTerms window_terms(const ModelSpec& spec, const ParameterVector& theta, double t_prev, double t_cur,
                                std::span<const int> counts, Proposal proposal) {
    WindowTerms w;
    w.t_prev = t_prev;
    w.t_cur = t_cur;
    const LogFactorial& lf = log_factorial();
    double log_type_count = 0.0;  // sum_m log n_m!
    for (int c : counts) {
        w.n += static_cast<std::size_t>(c);
        log_type_count += lf(static_cast<std::size_t>(c));
    }
    for (std::size_t m = 0; m < spec.dimension; ++m) w.baseline_mass += baseline_integral(spec, theta, m, t_prev, t_cur);
    const double width = t_cur - t_prev;
    if (proposal == Proposal::OrderedUniform || w.n == 0) {
        w.log_correction = static_cast<double>(w.n) * std::log(width) - log_type_count;
    } else {
        w.poisson_rate = poisson_proposal_rate(w.n, width);
        // 1 / (type proposal * time density); the exp(-rate * span) factor is per particle.
        w.log_correction = lf(w.n) - log_type_count - static_cast<double>(w.n) * std::log(w.poisson_rate);
    }
    return w;
}

inline double proposal_log_correction(const WindowTerms& w, Proposal proposal, std::span<const double> times) {
    if (w.n == 0 || proposal == Proposal::OrderedUniform) return w.log_correction;
    if (times[w.n - 1] > w.t_cur) return kNegInf;
    return w.log_correction + w.poisson_rate * (times[w.n - 1] - w.t_prev);
}

/// Exponential-kernel model flattened for the epsilon recursion.
struct ExpKernel {
    std::size_t dim = 0;
    std::vector<double> beta;      // row-major (m, p)
    std::vector<double> jump;      // eta / beta
    std::vector<double> unique_inv_beta;
    std::vector<std::size_t> group;  // (m, p) -> index into unique_inv_beta
    const ModelSpec* spec = nullptr;
    const ParameterVector* theta = nullptr;
    bool constant_baseline = true;
    std::vector<double> nu;

    ExpKernel(const ModelSpec& s, const ParameterVector& t) : dim(s.dimension), spec(&s), theta(&t) {
        if (!s.all_exponential()) throw Error(ErrorCode::NonExponentialKernel, "epsilon recursion needs exponential kernels");
        beta.resize(dim * dim);
        jump.resize(dim * dim);
        group.resize(dim * dim);
        for (std::size_t m = 0; m < dim; ++m) {
            for (std::size_t p = 0; p < dim; ++p) {
                const double b = t.kernel_at(m, p).beta;
                beta[m * dim + p] = b;
                jump[m * dim + p] = t.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p)) / b;
                const double inv = 1.0 / b;
                auto it = std::find(unique_inv_beta.begin(), unique_inv_beta.end(), inv);
                if (it == unique_inv_beta.end()) {
                    group[m * dim + p] = unique_inv_beta.size();
                    unique_inv_beta.push_back(inv);
                } else {
                    group[m * dim + p] = static_cast<std::size_t>(it - unique_inv_beta.begin());
                }
            }
        }
        constant_baseline = s.all_constant_baselines();
        for (std::size_t m = 0; m < dim; ++m) nu.push_back(t.nu[m][0]);
    }

    [[nodiscard]] double baseline(std::size_t m, double t) const {
        return constant_baseline ? nu[m] : baseline_value(spec->baselines[m], theta->nu[m], t);
    }

    /// Decays eps over dt and returns the excitation mass released on the way.
    double decay(double* eps, double dt, double* factors) const {
        for (std::size_t u = 0; u < unique_inv_beta.size(); ++u) factors[u] = std::exp(-dt * unique_inv_beta[u]);
        double mass = 0.0;
        for (std::size_t mp = 0; mp < dim * dim; ++mp) {
            const double f = factors[group[mp]];
            mass += eps[mp] * beta[mp] * (1.0 - f);
            eps[mp] *= f;
        }
        return mass;
    }

    /// Log weight excluding the proposal correction; advances eps (anchored
    /// at t_prev) to t_cur. `compensator` receives the window's integral of
    /// the total intensity.
    double advance(double* eps, const WindowTerms& w, std::span<const double> times, std::span<const int> types,
                   double* compensator = nullptr) const {
        double factors[64];
        std::vector<double> heap_factors;
        double* f = factors;
        if (unique_inv_beta.size() > 64) {
            heap_factors.resize(unique_inv_beta.size());
            f = heap_factors.data();
        }
        double comp = w.baseline_mass;
        double log_lambda = 0.0;
        double anchor = w.t_prev;
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double tau = times[k];
            const auto z = static_cast<std::size_t>(types[k]);
            comp += decay(eps, tau - anchor, f);
            double rate = baseline(z, tau);
            for (std::size_t p = 0; p < dim; ++p) rate += eps[z * dim + p];
            log_lambda += std::log(rate);
            for (std::size_t m = 0; m < dim; ++m) eps[m * dim + z] += jump[m * dim + z];
            anchor = tau;
        }
        comp += decay(eps, w.t_cur - anchor, f);
        if (compensator) *compensator = comp;
        if (std::isnan(log_lambda)) return kNegInf;
        return log_lambda - comp;
    }
};

/// Any-kernel weight through the closed-form compensator
///   int nu + sum_m sum_{k <= N_i} G(t_i - tau_k) - sum_m sum_{k <= N_{i-1}} G(t_{i-1} - tau_k).
/// `anchor_mass`, when known, is the last sum (carried from the previous window).
inline double general_advance(const ModelSpec& spec, const ParameterVector& theta, const EventSequence& history,
                              const WindowTerms& w, std::span<const double> times, std::span<const int> types,
                              std::optional<double> anchor_mass, double* compensator, double* end_mass) {
    const std::size_t dim = spec.dimension;
    auto excitation_at = [&](std::size_t m, double t, std::size_t proposed_before) {
        double r = 0.0;
        for (std::size_t k = 0; k < history.size(); ++k) {
            const auto j = static_cast<std::size_t>(history.types[k]);
            r += theta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) *
                 kernel_density(spec, theta, m, j, t - history.times[k]);
        }
        for (std::size_t k = 0; k < proposed_before; ++k) {
            const auto j = static_cast<std::size_t>(types[k]);
            r += theta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) *
                 kernel_density(spec, theta, m, j, t - times[k]);
        }
        return r;
    };
    auto mass_of = [&](double t, int type, double at) {
        double g = 0.0;
        for (std::size_t m = 0; m < dim; ++m) g += excitation_antiderivative(spec, theta, m, static_cast<std::size_t>(type), at - t);
        return g;
    };

    double log_lambda = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const auto z = static_cast<std::size_t>(types[k]);
        log_lambda += std::log(baseline_value(spec, theta, z, times[k]) + excitation_at(z, times[k], k));
    }
    double start = 0.0;
    if (anchor_mass) {
        start = *anchor_mass;
    } else {
        for (std::size_t k = 0; k < history.size(); ++k) start += mass_of(history.times[k], history.types[k], w.t_prev);
    }
    double end = 0.0;
    for (std::size_t k = 0; k < history.size(); ++k) end += mass_of(history.times[k], history.types[k], w.t_cur);
    for (std::size_t k = 0; k < times.size(); ++k) end += mass_of(times[k], types[k], w.t_cur);
    const double comp = w.baseline_mass + end - start;
    if (compensator) *compensator = comp;
    if (end_mass) *end_mass = end;
    if (std::isnan(log_lambda)) return kNegInf;
    return log_lambda - comp;
}

inline void check_proposed(const ProposedEvents& proposed, std::span<const int> counts) {
    if (proposed.times.size() != proposed.types.size())
        throw Error(ErrorCode::ShapeMismatch, "proposed times and types differ in length");
    std::vector<int> tally(counts.size(), 0);
    for (int z : proposed.types) {
        if (z < 0 || static_cast<std::size_t>(z) >= counts.size())
            throw Error(ErrorCode::ShapeMismatch, "proposed type out of range");
        ++tally[static_cast<std::size_t>(z)];
    }
    if (!std::equal(tally.begin(), tally.end(), counts.begin()))
        throw Error(ErrorCode::ShapeMismatch, "proposed types disagree with the observed counts");
}

inline double log_weight_or_dead(double value) { return std::isnan(value) ? kNegInf : value; }

}  // namespace detail

/// Integral of the total intensity over (t_prev, t_cur] for a particle whose
/// latent events in the window are `proposed`.
[[nodiscard]] inline double interval_compensator(const ParticleState& particle, const ModelSpec& spec,
                                                 const ParameterVector& theta, double t_prev, double t_cur,
                                                 const ProposedEvents& proposed) {
    if (t_cur < t_prev) throw Error(ErrorCode::ReversedInterval, "window bounds reversed");
    detail::WindowTerms w;
    w.t_prev = t_prev;
    w.t_cur = t_cur;
    for (std::size_t m = 0; m < spec.dimension; ++m) w.baseline_mass += baseline_integral(spec, theta, m, t_prev, t_cur);
    double comp = 0.0;
    if (particle.epsilon) {
        const detail::ExpKernel kernel(spec, theta);
        std::vector<double> eps(spec.dimension * spec.dimension);
        for (std::size_t m = 0; m < spec.dimension; ++m)
            for (std::size_t p = 0; p < spec.dimension; ++p)
                eps[m * spec.dimension + p] = particle.epsilon->eps(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
        (void)kernel.advance(eps.data(), w, proposed.times, proposed.types, &comp);
    } else {
        (void)detail::general_advance(spec, theta, particle.history, w, proposed.times, proposed.types, std::nullopt,
                                      &comp, nullptr);
    }
    return comp;
}

/// log w = sum_k log lambda_{z_k}(tau_k) - int lambda* - log Q(proposal).
///
/// For the ordered-uniform proposal log Q = sum_m log n_m! - n log(width).
/// The Poisson proposal uses its own density and gives -inf when an arrival
/// leaves the window. Zero-probability configurations give -inf; never NaN.
[[nodiscard]] inline double interval_log_weight(const ParticleState& particle, const ModelSpec& spec,
                                                const ParameterVector& theta, double t_prev, double t_cur,
                                                const ProposedEvents& proposed, std::span<const int> counts,
                                                Proposal proposal = Proposal::OrderedUniform) {
    detail::check_proposed(proposed, counts);
    const detail::WindowTerms w = detail::window_terms(spec, theta, t_prev, t_cur, counts, proposal);
    const double correction = detail::proposal_log_correction(w, proposal, proposed.times);
    if (correction == kNegInf) return kNegInf;
    if (proposal == Proposal::OrderedUniform)
        for (double t : proposed.times)
            if (!(t > t_prev && t <= t_cur)) return kNegInf;
    double core = 0.0;
    if (particle.epsilon) {
        const detail::ExpKernel kernel(spec, theta);
        const std::size_t dim = spec.dimension;
        std::vector<double> eps(dim * dim);
        for (std::size_t m = 0; m < dim; ++m)
            for (std::size_t p = 0; p < dim; ++p)
                eps[m * dim + p] = particle.epsilon->eps(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
        core = kernel.advance(eps.data(), w, proposed.times, proposed.types);
    } else {
        core = detail::general_advance(spec, theta, particle.history, w, proposed.times, proposed.types, std::nullopt,
                                       nullptr, nullptr);
    }
    return detail::log_weight_or_dead(core + correction);
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

/// Effective sample size of unnormalised log weights.
[[nodiscard]] inline double effective_sample_size(std::span<const double> log_weights) {
    const double lse = log_sum_exp(log_weights);
    if (!std::isfinite(lse)) return 0.0;
    double sum_sq = 0.0;
    for (double lw : log_weights) sum_sq += std::exp(2.0 * (lw - lse));
    return 1.0 / sum_sq;
}

/// Multinomial ancestor indices (ascending) drawn with probabilities
/// proportional to exp(log_weights), using J sorted uniforms from normalised
/// exponential spacings.
[[nodiscard]] inline std::vector<std::size_t> multinomial_ancestors(std::span<const double> log_weights, std::size_t count,
                                                                    Rng& rng) {
    const double lse = log_sum_exp(log_weights);
    if (!std::isfinite(lse)) throw Error(ErrorCode::AllParticlesDead, "every particle has zero weight");
    std::vector<double> points(count);
    double total = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        total += rng.exponential();
        points[k] = total;
    }
    total += rng.exponential();
    std::vector<std::size_t> ancestors(count);
    std::size_t j = 0;
    double cumulative = std::exp(log_weights[0] - lse);
    const std::size_t last = log_weights.size() - 1;
    for (std::size_t k = 0; k < count; ++k) {
        const double u = points[k] / total;
        while (u > cumulative && j < last) cumulative += std::exp(log_weights[++j] - lse);
        // Rounding can leave the tail of `cumulative` short of 1; never land on a dead particle.
        std::size_t pick = j;
        while (log_weights[pick] == kNegInf && pick > 0) --pick;
        while (log_weights[pick] == kNegInf) ++pick;
        ancestors[k] = pick;
    }
    return ancestors;
}

/// Multinomial resampling of a particle set; the survivors carry equal weights.
[[nodiscard]] inline std::vector<ParticleState> resample(const std::vector<ParticleState>& particles, Rng& rng) {
    std::vector<double> lw;
    lw.reserve(particles.size());
    for (const auto& p : particles) lw.push_back(p.log_weight);
    const std::vector<std::size_t> ancestors = multinomial_ancestors(lw, particles.size(), rng);
    std::vector<ParticleState> out;
    out.reserve(particles.size());
    for (std::size_t k = 0; k < ancestors.size(); ++k) {
        out.push_back(particles[ancestors[k]]);
        out.back().log_weight = 0.0;
        out.back().id = k;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Filter
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t kParticleStream = 0x5a1u;
inline constexpr std::uint64_t kResampleStream = 0x5a2u;

struct ExpCloud {
    std::size_t stride;
    std::vector<double> eps;

    void init(std::size_t particles, std::size_t dim) {
        stride = dim * dim;
        eps.assign(particles * stride, 0.0);
    }
    void select(const std::vector<std::size_t>& ancestors) {
        std::vector<double> next(eps.size());
        for (std::size_t k = 0; k < ancestors.size(); ++k)
            std::copy_n(eps.begin() + static_cast<std::ptrdiff_t>(ancestors[k] * stride), stride,
                        next.begin() + static_cast<std::ptrdiff_t>(k * stride));
        eps.swap(next);
    }
};

struct HistoryCloud {
    std::vector<EventSequence> history;
    std::vector<double> anchor_mass;

    void init(std::size_t particles, std::size_t) {
        history.assign(particles, EventSequence{});
        anchor_mass.assign(particles, 0.0);
    }
    void select(const std::vector<std::size_t>& ancestors) {
        std::vector<EventSequence> next_history(ancestors.size());
        std::vector<double> next_mass(ancestors.size());
        for (std::size_t k = 0; k < ancestors.size(); ++k) {
            next_history[k] = history[ancestors[k]];
            next_mass[k] = anchor_mass[ancestors[k]];
        }
        history.swap(next_history);
        anchor_mass.swap(next_mass);
    }
};

template <typename Cloud>
SmcResult run_filter(const ModelSpec& spec, const ParameterVector& theta, const IntervalCounts& counts,
                     const SmcConfig& config) {
    constexpr bool kExponential = std::is_same_v<Cloud, ExpCloud>;
    const std::size_t J = config.particles;
    const std::size_t dim = spec.dimension;
    const std::size_t I = counts.intervals();

    std::optional<ExpKernel> kernel;
    if constexpr (kExponential) kernel.emplace(spec, theta);

    Cloud cloud;
    cloud.init(J, dim);
    std::vector<double> log_w(J, 0.0);       // incremental weights of the current window
    std::vector<double> log_prev(J, -std::log(static_cast<double>(J)));  // normalised weights carried in
    std::vector<double> combined(J);
    bool uniform_prev = true;

    std::size_t max_n = 0;
    for (std::size_t i = 0; i < I; ++i) {
        std::size_t n = 0;
        for (int c : counts.row(i)) n += static_cast<std::size_t>(c);
        max_n = std::max(max_n, n);
    }

    SmcResult result;
    result.per_interval_log_factors.assign(I, 0.0);
    result.ess_trace.assign(I, 0.0);

    const unsigned threads = std::max(1u, config.threads);
    std::vector<std::vector<double>> time_buf(threads, std::vector<double>(max_n));
    std::vector<std::vector<int>> type_buf(threads, std::vector<int>(max_n));

    for (std::size_t i = 0; i < I; ++i) {
        const double t_prev = counts.start(i);
        const double t_cur = counts.end(i);
        const std::span<const int> row = counts.row(i);

        if (i > 0) {
            const bool resample_now = config.resampling.kind == Resampling::Kind::EveryStep ||
                                      result.ess_trace[i - 1] < config.resampling.fraction * static_cast<double>(J);
            if (resample_now) {
                Rng rng(stream_key(config.seed, kResampleStream, i));
                cloud.select(multinomial_ancestors(log_prev, J, rng));
                std::fill(log_prev.begin(), log_prev.end(), -std::log(static_cast<double>(J)));
                uniform_prev = true;
            }
        }

        const WindowTerms w = window_terms(spec, theta, t_prev, t_cur, row, config.proposal);
        const std::size_t n = w.n;
        auto propagate = [&](std::size_t j, unsigned slot) {
            Rng rng(stream_key(config.seed, kParticleStream, i, j));
            const std::span<double> times(time_buf[slot].data(), n);
            const std::span<int> types(type_buf[slot].data(), n);
            if (config.proposal == Proposal::OrderedUniform)
                propose_times_uniform(t_prev, t_cur, n, rng, times);
            else if (n > 0)
                propose_times_poisson(t_prev, w.poisson_rate, n, rng, times);
            propose_types(row, rng, types);
            const double correction = proposal_log_correction(w, config.proposal, times);
            if (correction == kNegInf) {
                log_w[j] = kNegInf;
                return;
            }
            double core;
            if constexpr (kExponential) {
                core = kernel->advance(cloud.eps.data() + j * cloud.stride, w, times, types);
            } else {
                double end_mass = 0.0;
                core = general_advance(spec, theta, cloud.history[j], w, times, types, cloud.anchor_mass[j], nullptr,
                                       &end_mass);
                cloud.anchor_mass[j] = end_mass;
                for (std::size_t k = 0; k < n; ++k) cloud.history[j].push_back(times[k], types[k]);
            }
            log_w[j] = log_weight_or_dead(core + correction);
        };
        if (threads == 1) {
            for (std::size_t j = 0; j < J; ++j) propagate(j, 0);
        } else {
            parallel_for(threads, threads, [&](std::size_t slot) {
                const std::size_t begin = J * slot / threads;
                const std::size_t end = J * (slot + 1) / threads;
                for (std::size_t j = begin; j < end; ++j) propagate(j, static_cast<unsigned>(slot));
            });
        }

        double factor;
        if (uniform_prev) {
            factor = log_sum_exp(log_w) - std::log(static_cast<double>(J));
        } else {
            for (std::size_t j = 0; j < J; ++j) combined[j] = log_prev[j] + log_w[j];
            factor = log_sum_exp(combined);
        }
        result.per_interval_log_factors[i] = factor;
        if (!std::isfinite(factor)) {
            result.degenerate = true;
            result.log_likelihood = kNegInf;
            return result;
        }
        for (std::size_t j = 0; j < J; ++j) log_prev[j] = (uniform_prev ? -std::log(static_cast<double>(J)) : log_prev[j]) + log_w[j] - factor;
        uniform_prev = false;
        result.ess_trace[i] = std::clamp(effective_sample_size(log_prev), 1.0, static_cast<double>(J));
    }

    double total = 0.0;
    for (double f : result.per_interval_log_factors) total += f;
    result.log_likelihood = total;

    if (config.keep_particles) {
        result.particles.resize(J);
        for (std::size_t j = 0; j < J; ++j) {
            ParticleState& p = result.particles[j];
            p.id = j;
            p.log_weight = log_prev[j];
            if constexpr (kExponential) {
                EpsilonMatrix e = EpsilonMatrix::zero(dim, counts.horizon());
                for (std::size_t m = 0; m < dim; ++m)
                    for (std::size_t q = 0; q < dim; ++q)
                        e.eps(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(q)) = cloud.eps[j * cloud.stride + m * dim + q];
                p.epsilon = e;
            } else {
                p.history = cloud.history[j];
                p.history.horizon = counts.horizon();
            }
        }
    }
    return result;
}

}  // namespace detail

/// Unbiased estimate of the interval-count likelihood by the guided particle
/// filter. Deterministic given (seed, J, proposal, resampling); independent
/// of the thread count.
[[nodiscard]] inline SmcResult smc_log_likelihood(const ModelSpec& spec, const ParameterVector& theta,
                                                  const IntervalCounts& counts, const SmcConfig& config) {
    config.check();
    counts.check();
    require_valid(spec, theta, ValidationMode::FiniteHorizon);
    if (counts.dimension != spec.dimension)
        throw Error(ErrorCode::ShapeMismatch, "counts have " + std::to_string(counts.dimension) + " types, model has " +
                                                  std::to_string(spec.dimension));
    if (spec.all_exponential()) return detail::run_filter<detail::ExpCloud>(spec, theta, counts, config);
    return detail::run_filter<detail::HistoryCloud>(spec, theta, counts, config);
}

}  // namespace mhp
