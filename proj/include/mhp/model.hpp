#pragma once

#include "mhp/error.hpp"
#include "mhp/special.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mhp {

// Types are 0-based in code and 1-based in every file format and parameter name.

enum class BaselineFamily { Constant, BSpline };
enum class KernelFamily { Exponential, Gamma };

/// Background rate of one event type.
///
/// A BSpline baseline is an order-2 (piecewise linear) spline on the augmented
/// grid {0, knots..., horizon}; its coefficients are the rate values at those
/// grid points. Past the horizon the rate is held at the last coefficient.
struct BaselineSpec {
    BaselineFamily family = BaselineFamily::Constant;
    std::vector<double> knots;
    double horizon = 0.0;

    [[nodiscard]] std::size_t coefficient_count() const {
        return family == BaselineFamily::Constant ? 1 : knots.size() + 2;
    }

    [[nodiscard]] std::vector<double> grid() const {
        std::vector<double> g;
        g.reserve(knots.size() + 2);
        g.push_back(0.0);
        g.insert(g.end(), knots.begin(), knots.end());
        g.push_back(horizon);
        return g;
    }

    friend bool operator==(const BaselineSpec&, const BaselineSpec&) = default;
};

struct ModelSpec {
    std::size_t dimension = 1;
    std::vector<BaselineSpec> baselines;
    std::vector<KernelFamily> kernels;  // row-major dimension x dimension, entry (m, j)
    /// Equality groups of indices into the full parameter layout.
    std::vector<std::vector<std::size_t>> ties;

    [[nodiscard]] KernelFamily kernel(std::size_t m, std::size_t j) const {
        return kernels[m * dimension + j];
    }

    [[nodiscard]] bool all_exponential() const {
        return std::all_of(kernels.begin(), kernels.end(),
                           [](KernelFamily k) { return k == KernelFamily::Exponential; });
    }

    [[nodiscard]] bool all_constant_baselines() const {
        return std::all_of(baselines.begin(), baselines.end(), [](const BaselineSpec& b) {
            return b.family == BaselineFamily::Constant;
        });
    }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

    /// M types, constant baselines, one kernel family everywhere.
    [[nodiscard]] static ModelSpec uniform(std::size_t dimension, KernelFamily family) {
        ModelSpec spec;
        spec.dimension = dimension;
        spec.baselines.assign(dimension, BaselineSpec{});
        spec.kernels.assign(dimension * dimension, family);
        return spec;
    }
};

/// Exponential kernels read `beta` (mean delay). Gamma kernels read `shape`
/// and `scale`.
struct KernelParams {
    double beta = 1.0;
    double shape = 1.0;
    double scale = 1.0;

    friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

struct ParameterVector {
    std::vector<std::vector<double>> nu;  // per type, one value per baseline coefficient
    Eigen::MatrixXd eta;                  // branching ratios, eta(m, j): type j parent -> type m child
    std::vector<KernelParams> kernel;     // row-major dimension x dimension

    [[nodiscard]] const KernelParams& kernel_at(std::size_t m, std::size_t j) const {
        return kernel[m * static_cast<std::size_t>(eta.rows()) + j];
    }
    [[nodiscard]] KernelParams& kernel_at(std::size_t m, std::size_t j) {
        return kernel[m * static_cast<std::size_t>(eta.rows()) + j];
    }

    friend bool operator==(const ParameterVector& a, const ParameterVector& b) {
        return a.nu == b.nu && a.eta.rows() == b.eta.rows() && a.eta.cols() == b.eta.cols() &&
               (a.eta.array() == b.eta.array()).all() && a.kernel == b.kernel;
    }

    /// Constant baselines and exponential kernels with beta(m, j).
    [[nodiscard]] static ParameterVector exponential(const std::vector<double>& nu,
                                                     const Eigen::MatrixXd& eta,
                                                     const Eigen::MatrixXd& beta) {
        ParameterVector theta;
        for (double v : nu) theta.nu.push_back({v});
        theta.eta = eta;
        const auto dim = static_cast<std::size_t>(eta.rows());
        theta.kernel.resize(dim * dim);
        for (std::size_t m = 0; m < dim; ++m)
            for (std::size_t j = 0; j < dim; ++j)
                theta.kernel_at(m, j).beta = beta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j));
        return theta;
    }
};

/// Ordered event times on (0, horizon] with 0-based types.
struct EventSequence {
    std::vector<double> times;
    std::vector<int> types;
    double horizon = 0.0;

    [[nodiscard]] std::size_t size() const { return times.size(); }
    [[nodiscard]] bool empty() const { return times.empty(); }

    void push_back(double t, int type) {
        times.push_back(t);
        types.push_back(type);
    }

    friend bool operator==(const EventSequence&, const EventSequence&) = default;
};

inline void check_events(const EventSequence& path, std::size_t dimension) {
    if (path.times.size() != path.types.size())
        throw Error(ErrorCode::ShapeMismatch, "event times and types differ in length");
    double prev = 0.0;
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        const double t = path.times[k];
        if (!(t > prev))
            throw Error(ErrorCode::TimeReversal, "event " + std::to_string(k + 1) + " is not after its predecessor");
        if (t > path.horizon)
            throw Error(ErrorCode::GridHorizonMismatch, "event " + std::to_string(k + 1) + " lies past the horizon");
        if (path.types[k] < 0 || static_cast<std::size_t>(path.types[k]) >= dimension)
            throw Error(ErrorCode::ShapeMismatch, "event " + std::to_string(k + 1) + " has an out-of-range type");
        prev = t;
    }
}

// ---------------------------------------------------------------------------
// Flat parameter layout
// ---------------------------------------------------------------------------

enum class SlotKind { Baseline, Branching, KernelBeta, KernelShape, KernelScale };

struct ParameterSlot {
    SlotKind kind;
    std::size_t m;
    std::size_t j;  // column for eta/kernel entries, coefficient index for baselines
    std::string name;
};

/// Full layout: every nu coefficient (type-major), then eta row-major, then
/// kernel parameters row-major (beta, or shape then scale). The free layout
/// drops every tie-group member except the first, so a tie group occupies the
/// slot of its smallest index.
class ParameterLayout {
public:
    explicit ParameterLayout(const ModelSpec& spec) {
        const std::size_t dim = spec.dimension;
        auto idx = [](std::size_t v) { return std::to_string(v + 1); };
        for (std::size_t m = 0; m < dim; ++m) {
            const std::size_t count = spec.baselines.at(m).coefficient_count();
            for (std::size_t c = 0; c < count; ++c) {
                std::string name = count == 1 ? "nu[" + idx(m) + "]" : "nu[" + idx(m) + "][" + idx(c) + "]";
                slots_.push_back({SlotKind::Baseline, m, c, std::move(name)});
            }
        }
        for (std::size_t m = 0; m < dim; ++m)
            for (std::size_t j = 0; j < dim; ++j)
                slots_.push_back({SlotKind::Branching, m, j, "eta[" + idx(m) + "," + idx(j) + "]"});
        for (std::size_t m = 0; m < dim; ++m) {
            for (std::size_t j = 0; j < dim; ++j) {
                const std::string pair = "[" + idx(m) + "," + idx(j) + "]";
                if (spec.kernel(m, j) == KernelFamily::Exponential) {
                    slots_.push_back({SlotKind::KernelBeta, m, j, "beta" + pair});
                } else {
                    slots_.push_back({SlotKind::KernelShape, m, j, "kappa" + pair});
                    slots_.push_back({SlotKind::KernelScale, m, j, "delta" + pair});
                }
            }
        }

        full_to_free_.assign(slots_.size(), npos);
        std::vector<std::size_t> representative(slots_.size());
        for (std::size_t i = 0; i < slots_.size(); ++i) representative[i] = i;
        std::vector<bool> seen(slots_.size(), false);
        for (const auto& group : spec.ties) {
            if (group.empty()) continue;
            const std::size_t first = *std::min_element(group.begin(), group.end());
            for (std::size_t i : group) {
                if (i >= slots_.size())
                    throw Error(ErrorCode::InvalidSpec, "tie index " + std::to_string(i) + " outside the parameter layout");
                if (seen[i]) throw Error(ErrorCode::InvalidSpec, "tie groups overlap at " + slots_[i].name);
                if (slots_[i].kind != slots_[first].kind)
                    throw Error(ErrorCode::InvalidSpec, "tie group mixes parameter kinds at " + slots_[i].name);
                seen[i] = true;
                representative[i] = first;
            }
        }
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            if (representative[i] == i) {
                full_to_free_[i] = free_members_.size();
                free_members_.push_back({i});
            }
        }
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            if (representative[i] != i) {
                const std::size_t f = full_to_free_[representative[i]];
                full_to_free_[i] = f;
                free_members_[f].push_back(i);
            }
        }
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    [[nodiscard]] std::size_t full_size() const { return slots_.size(); }
    [[nodiscard]] std::size_t free_size() const { return free_members_.size(); }
    [[nodiscard]] const ParameterSlot& slot(std::size_t full_index) const { return slots_[full_index]; }
    [[nodiscard]] std::size_t free_index(std::size_t full_index) const { return full_to_free_[full_index]; }
    /// Full indices moving together with free slot f; the first is its representative.
    [[nodiscard]] const std::vector<std::size_t>& members(std::size_t f) const { return free_members_[f]; }
    [[nodiscard]] const std::string& free_name(std::size_t f) const { return slots_[free_members_[f].front()].name; }

    [[nodiscard]] std::vector<std::string> free_names() const {
        std::vector<std::string> names;
        for (std::size_t f = 0; f < free_size(); ++f) names.push_back(free_name(f));
        return names;
    }

    [[nodiscard]] std::optional<std::size_t> find(const std::string& name) const {
        for (std::size_t i = 0; i < slots_.size(); ++i)
            if (slots_[i].name == name) return i;
        return std::nullopt;
    }

private:
    std::vector<ParameterSlot> slots_;
    std::vector<std::size_t> full_to_free_;
    std::vector<std::vector<std::size_t>> free_members_;
};

inline void check_shape(const ModelSpec& spec, const ParameterVector& theta) {
    const std::size_t dim = spec.dimension;
    if (dim == 0) throw Error(ErrorCode::InvalidSpec, "dimension must be at least 1");
    if (spec.baselines.size() != dim || spec.kernels.size() != dim * dim)
        throw Error(ErrorCode::InvalidSpec, "baseline/kernel descriptors do not match the dimension");
    if (theta.nu.size() != dim || static_cast<std::size_t>(theta.eta.rows()) != dim ||
        static_cast<std::size_t>(theta.eta.cols()) != dim || theta.kernel.size() != dim * dim)
        throw Error(ErrorCode::ShapeMismatch, "parameter vector does not match the model dimension");
    for (std::size_t m = 0; m < dim; ++m)
        if (theta.nu[m].size() != spec.baselines[m].coefficient_count())
            throw Error(ErrorCode::ShapeMismatch, "baseline coefficients for type " + std::to_string(m + 1));
}

[[nodiscard]] inline double& slot_ref(ParameterVector& theta, const ParameterSlot& s) {
    switch (s.kind) {
    case SlotKind::Baseline: return theta.nu[s.m][s.j];
    case SlotKind::Branching: return theta.eta(static_cast<Eigen::Index>(s.m), static_cast<Eigen::Index>(s.j));
    case SlotKind::KernelBeta: return theta.kernel_at(s.m, s.j).beta;
    case SlotKind::KernelShape: return theta.kernel_at(s.m, s.j).shape;
    case SlotKind::KernelScale: return theta.kernel_at(s.m, s.j).scale;
    }
    throw Error(ErrorCode::InvalidSpec, "unknown slot");
}

[[nodiscard]] inline double slot_value(const ParameterVector& theta, const ParameterSlot& s) {
    switch (s.kind) {
    case SlotKind::Baseline: return theta.nu[s.m][s.j];
    case SlotKind::Branching: return theta.eta(static_cast<Eigen::Index>(s.m), static_cast<Eigen::Index>(s.j));
    case SlotKind::KernelBeta: return theta.kernel_at(s.m, s.j).beta;
    case SlotKind::KernelShape: return theta.kernel_at(s.m, s.j).shape;
    case SlotKind::KernelScale: return theta.kernel_at(s.m, s.j).scale;
    }
    throw Error(ErrorCode::InvalidSpec, "unknown slot");
}

[[nodiscard]] inline std::vector<double> to_full(const ModelSpec& spec, const ParameterVector& theta) {
    check_shape(spec, theta);
    const ParameterLayout layout(spec);
    std::vector<double> full(layout.full_size());
    for (std::size_t i = 0; i < full.size(); ++i) full[i] = slot_value(theta, layout.slot(i));
    return full;
}

[[nodiscard]] inline ParameterVector shaped_parameters(const ModelSpec& spec) {
    ParameterVector theta;
    for (const auto& b : spec.baselines) theta.nu.emplace_back(b.coefficient_count(), 0.0);
    const auto dim = static_cast<Eigen::Index>(spec.dimension);
    theta.eta = Eigen::MatrixXd::Zero(dim, dim);
    theta.kernel.assign(spec.dimension * spec.dimension, KernelParams{});
    return theta;
}

[[nodiscard]] inline ParameterVector from_full(const ModelSpec& spec, const std::vector<double>& full) {
    const ParameterLayout layout(spec);
    if (full.size() != layout.full_size())
        throw Error(ErrorCode::ShapeMismatch, "full parameter vector has the wrong length");
    ParameterVector theta = shaped_parameters(spec);
    for (std::size_t i = 0; i < full.size(); ++i) slot_ref(theta, layout.slot(i)) = full[i];
    return theta;
}

/// Free (tie-collapsed) flat vector.
[[nodiscard]] inline std::vector<double> to_flat(const ModelSpec& spec, const ParameterVector& theta) {
    const ParameterLayout layout(spec);
    const std::vector<double> full = to_full(spec, theta);
    std::vector<double> flat(layout.free_size());
    for (std::size_t f = 0; f < flat.size(); ++f) flat[f] = full[layout.members(f).front()];
    return flat;
}

[[nodiscard]] inline ParameterVector from_flat(const ModelSpec& spec, const std::vector<double>& flat) {
    const ParameterLayout layout(spec);
    if (flat.size() != layout.free_size())
        throw Error(ErrorCode::ShapeMismatch, "flat parameter vector has the wrong length");
    ParameterVector theta = shaped_parameters(spec);
    for (std::size_t f = 0; f < flat.size(); ++f)
        for (std::size_t i : layout.members(f)) slot_ref(theta, layout.slot(i)) = flat[f];
    return theta;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Largest eigenvalue modulus.
[[nodiscard]] inline double spectral_radius(const Eigen::MatrixXd& eta) {
    if (eta.rows() == 0) return 0.0;
    return eta.eigenvalues().cwiseAbs().maxCoeff();
}

/// Radii within this distance of 1 count as unstable (eigenvalue round-off).
inline constexpr double kUnitRadiusTolerance = 1e-12;

enum class ValidationMode { FiniteHorizon, Stationary };

struct ValidationResult {
    std::optional<ErrorCode> error;
    std::string message;
    std::vector<std::string> warnings;
    double spectral_radius = 0.0;

    [[nodiscard]] bool ok() const { return !error.has_value(); }
};

[[nodiscard]] inline ValidationResult validate(const ModelSpec& spec, const ParameterVector& theta,
                                               ValidationMode mode = ValidationMode::FiniteHorizon) {
    ValidationResult result;
    auto fail = [&](ErrorCode code, std::string msg) {
        result.error = code;
        result.message = std::move(msg);
        return result;
    };
    try {
        check_shape(spec, theta);
    } catch (const Error& e) {
        return fail(e.code(), e.what());
    }
    for (const auto& b : spec.baselines) {
        if (b.family != BaselineFamily::BSpline) continue;
        double prev = 0.0;
        for (double k : b.knots) {
            if (!(k > prev) || !(k < b.horizon))
                return fail(ErrorCode::InvalidSpec, "spline knots must be strictly increasing inside (0, horizon)");
            prev = k;
        }
        if (!(b.horizon > 0.0)) return fail(ErrorCode::InvalidSpec, "spline horizon must be positive");
    }
    const ParameterLayout layout(spec);
    const std::vector<double> full = to_full(spec, theta);
    for (std::size_t i = 0; i < full.size(); ++i) {
        const auto& s = layout.slot(i);
        const double v = full[i];
        const bool strictly = s.kind != SlotKind::Baseline && s.kind != SlotKind::Branching;
        if (!std::isfinite(v) || v < 0.0 || (strictly && v <= 0.0))
            return fail(ErrorCode::NonPositiveParameter, s.name + " = " + std::to_string(v));
    }
    for (const auto& group : spec.ties) {
        for (std::size_t i : group) {
            if (full[i] != full[group.front()])
                return fail(ErrorCode::TieViolation, layout.slot(i).name + " differs from " + layout.slot(group.front()).name);
        }
    }
    result.spectral_radius = spectral_radius(theta.eta);
    if (result.spectral_radius >= 1.0 - kUnitRadiusTolerance) {
        if (mode == ValidationMode::Stationary)
            return fail(ErrorCode::UnstableBranching, "spectral radius " + std::to_string(result.spectral_radius) + " >= 1");
        result.warnings.push_back("spectral radius " + std::to_string(result.spectral_radius) +
                                  " >= 1: process is not stationary");
    }
    return result;
}

inline ValidationResult require_valid(const ModelSpec& spec, const ParameterVector& theta,
                                      ValidationMode mode = ValidationMode::FiniteHorizon) {
    ValidationResult r = validate(spec, theta, mode);
    if (!r.ok()) throw Error(*r.error, r.message);
    return r;
}

[[nodiscard]] inline std::vector<double> stationary_mean_rates(const ModelSpec& spec, const ParameterVector& theta) {
    check_shape(spec, theta);
    if (!spec.all_constant_baselines())
        throw Error(ErrorCode::NonConstantBaseline, "stationary rates need constant baselines");
    const double rho = spectral_radius(theta.eta);
    if (rho >= 1.0 - kUnitRadiusTolerance) throw Error(ErrorCode::UnstableBranching, "spectral radius " + std::to_string(rho) + " >= 1");
    const auto dim = static_cast<Eigen::Index>(spec.dimension);
    Eigen::VectorXd nu(dim);
    for (Eigen::Index m = 0; m < dim; ++m) nu(m) = theta.nu[static_cast<std::size_t>(m)][0];
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(dim, dim) - theta.eta;
    const Eigen::VectorXd rates = system.partialPivLu().solve(nu);
    return {rates.data(), rates.data() + rates.size()};
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

[[nodiscard]] inline double baseline_value(const BaselineSpec& b, const std::vector<double>& coef, double t) {
    if (b.family == BaselineFamily::Constant) return coef[0];
    if (t >= b.horizon) return coef.back();
    if (t <= 0.0) return coef.front();
    // grid = {0, knots..., horizon}
    std::size_t seg = static_cast<std::size_t>(std::upper_bound(b.knots.begin(), b.knots.end(), t) - b.knots.begin());
    const double left = seg == 0 ? 0.0 : b.knots[seg - 1];
    const double right = seg == b.knots.size() ? b.horizon : b.knots[seg];
    const double w = (t - left) / (right - left);
    return coef[seg] + w * (coef[seg + 1] - coef[seg]);
}

/// Exact integral of a constant or piecewise linear baseline over [a, b].
[[nodiscard]] inline double baseline_integral(const BaselineSpec& b, const std::vector<double>& coef, double a, double c) {
    if (c < a) throw Error(ErrorCode::ReversedInterval, "integration bounds reversed");
    if (b.family == BaselineFamily::Constant) return coef[0] * (c - a);
    if (a == c) return 0.0;
    const std::vector<double> grid = b.grid();
    double total = 0.0;
    double lo = a;
    for (std::size_t s = 0; s + 1 < grid.size() && lo < c; ++s) {
        if (grid[s + 1] <= lo) continue;
        const double hi = std::min(c, grid[s + 1]);
        total += 0.5 * (baseline_value(b, coef, lo) + baseline_value(b, coef, hi)) * (hi - lo);
        lo = hi;
    }
    if (c > lo) total += coef.back() * (c - lo);
    return total;
}

/// Supremum of a baseline over [a, b].
[[nodiscard]] inline double baseline_max(const BaselineSpec& b, const std::vector<double>& coef, double a, double c) {
    if (b.family == BaselineFamily::Constant) return coef[0];
    double best = std::max(baseline_value(b, coef, a), baseline_value(b, coef, c));
    for (double k : b.knots)
        if (k > a && k < c) best = std::max(best, baseline_value(b, coef, k));
    return best;
}

[[nodiscard]] inline double baseline_value(const ModelSpec& spec, const ParameterVector& theta, std::size_t m, double t) {
    return baseline_value(spec.baselines[m], theta.nu[m], t);
}

[[nodiscard]] inline double baseline_integral(const ModelSpec& spec, const ParameterVector& theta, std::size_t m,
                                              double a, double b) {
    return baseline_integral(spec.baselines[m], theta.nu[m], a, b);
}

// ---------------------------------------------------------------------------
// Kernels and intensities
// ---------------------------------------------------------------------------

/// Offspring density h_{m,j}(s).
[[nodiscard]] inline double kernel_density(const ModelSpec& spec, const ParameterVector& theta, std::size_t m,
                                           std::size_t j, double s) {
    if (s < 0.0) return 0.0;
    const KernelParams& k = theta.kernel_at(m, j);
    if (spec.kernel(m, j) == KernelFamily::Exponential) return std::exp(-s / k.beta) / k.beta;
    return gamma_pdf(s, k.shape, k.scale);
}

/// Offspring delay CDF.
[[nodiscard]] inline double kernel_cdf(const ModelSpec& spec, const ParameterVector& theta, std::size_t m,
                                       std::size_t j, double s) {
    if (s <= 0.0) return 0.0;
    const KernelParams& k = theta.kernel_at(m, j);
    if (spec.kernel(m, j) == KernelFamily::Exponential) return -std::expm1(-s / k.beta);
    return regularized_gamma_p(k.shape, s / k.scale);
}

/// G_{m,j}(s) = eta_{m,j} * CDF(s).
[[nodiscard]] inline double excitation_antiderivative(const ModelSpec& spec, const ParameterVector& theta,
                                                      std::size_t m, std::size_t j, double s) {
    if (s < 0.0) throw Error(ErrorCode::NegativeElapsedTime, "elapsed time " + std::to_string(s));
    const double eta = theta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j));
    return eta * kernel_cdf(spec, theta, m, j, s);
}

/// lambda_m(t) by the direct sum over events strictly before t.
[[nodiscard]] inline double intensity(const ModelSpec& spec, const ParameterVector& theta, const EventSequence& history,
                                      std::size_t m, double t) {
    double rate = baseline_value(spec, theta, m, t);
    for (std::size_t k = 0; k < history.size() && history.times[k] < t; ++k) {
        const auto j = static_cast<std::size_t>(history.types[k]);
        rate += theta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) *
                kernel_density(spec, theta, m, j, t - history.times[k]);
    }
    return rate;
}

[[nodiscard]] inline double total_intensity(const ModelSpec& spec, const ParameterVector& theta,
                                            const EventSequence& history, double t) {
    double total = 0.0;
    for (std::size_t m = 0; m < spec.dimension; ++m) total += intensity(spec, theta, history, m, t);
    return total;
}

// ---------------------------------------------------------------------------
// Epsilon recursion (exponential kernels)
// ---------------------------------------------------------------------------

/// eps(m, p): contribution of type-p events strictly before `anchor` to lambda_m(anchor).
struct EpsilonMatrix {
    Eigen::MatrixXd eps;
    double anchor = 0.0;

    [[nodiscard]] static EpsilonMatrix zero(std::size_t dimension, double anchor = 0.0) {
        const auto d = static_cast<Eigen::Index>(dimension);
        return {Eigen::MatrixXd::Zero(d, d), anchor};
    }
};

struct TypedEvent {
    double time;
    int type;
};

/// Moves the matrix to time `to`. An event, if given, is applied at its own
/// time: the matrix decays to the event, gains the jump eta/beta in the
/// event's column, then decays on to `to`.
[[nodiscard]] inline EpsilonMatrix epsilon_advance(const ModelSpec& spec, const ParameterVector& theta,
                                                   EpsilonMatrix state, double to,
                                                   std::optional<TypedEvent> event = std::nullopt) {
    if (!spec.all_exponential())
        throw Error(ErrorCode::NonExponentialKernel, "epsilon recursion needs exponential kernels");
    const auto dim = static_cast<Eigen::Index>(spec.dimension);
    auto decay = [&](double until) {
        const double dt = until - state.anchor;
        for (Eigen::Index m = 0; m < dim; ++m)
            for (Eigen::Index p = 0; p < dim; ++p)
                state.eps(m, p) *= std::exp(-dt / theta.kernel_at(static_cast<std::size_t>(m), static_cast<std::size_t>(p)).beta);
        state.anchor = until;
    };
    if (to < state.anchor) throw Error(ErrorCode::TimeReversal, "cannot advance backwards");
    if (event) {
        if (event->time < state.anchor || event->time > to)
            throw Error(ErrorCode::TimeReversal, "event outside the advance window");
        decay(event->time);
        const Eigen::Index p = event->type;
        for (Eigen::Index m = 0; m < dim; ++m)
            state.eps(m, p) += theta.eta(m, p) / theta.kernel_at(static_cast<std::size_t>(m), static_cast<std::size_t>(p)).beta;
    }
    decay(to);
    return state;
}

}  // namespace mhp
