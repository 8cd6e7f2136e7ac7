#pragma once

#include "mhp/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace mhp {

enum class LoglikMethod { Auto, Recursive, Direct };

/// Complete-data log-likelihood on (0, horizon]:
///   sum_k log lambda_{z_k}(tau_k) - int_0^T lambda*(t) dt.
/// Exponential models use the epsilon recursion (O(n M^2)) unless Direct is
/// requested; other kernels always use the direct double sum.
[[nodiscard]] inline double complete_loglik(const ModelSpec& spec, const ParameterVector& theta,
                                            const EventSequence& path, LoglikMethod method = LoglikMethod::Auto) {
    check_shape(spec, theta);
    check_events(path, spec.dimension);
    const std::size_t dim = spec.dimension;
    const double horizon = path.horizon;
    double log_sum = 0.0;
    double comp = 0.0;
    for (std::size_t m = 0; m < dim; ++m) comp += baseline_integral(spec, theta, m, 0.0, horizon);

    const bool recursive = spec.all_exponential() && method != LoglikMethod::Direct;
    if (method == LoglikMethod::Recursive && !spec.all_exponential())
        throw Error(ErrorCode::NonExponentialKernel, "recursive evaluation needs exponential kernels");

    if (recursive) {
        EpsilonMatrix state = EpsilonMatrix::zero(dim);
        for (std::size_t k = 0; k < path.size(); ++k) {
            state = epsilon_advance(spec, theta, std::move(state), path.times[k]);
            const auto z = static_cast<std::size_t>(path.types[k]);
            const double rate = baseline_value(spec, theta, z, path.times[k]) + state.eps.row(static_cast<Eigen::Index>(z)).sum();
            if (!(rate > 0.0))
                throw Error(ErrorCode::NonFiniteLogLik, "zero intensity at event " + std::to_string(k + 1));
            log_sum += std::log(rate);
            state = epsilon_advance(spec, theta, std::move(state), path.times[k], TypedEvent{path.times[k], path.types[k]});
        }
    } else {
        for (std::size_t k = 0; k < path.size(); ++k) {
            const auto z = static_cast<std::size_t>(path.types[k]);
            const double rate = intensity(spec, theta, path, z, path.times[k]);
            if (!(rate > 0.0))
                throw Error(ErrorCode::NonFiniteLogLik, "zero intensity at event " + std::to_string(k + 1));
            log_sum += std::log(rate);
        }
    }
    for (std::size_t k = 0; k < path.size(); ++k)
        for (std::size_t m = 0; m < dim; ++m)
            comp += excitation_antiderivative(spec, theta, m, static_cast<std::size_t>(path.types[k]), horizon - path.times[k]);
    return log_sum - comp;
}

/// Gradient of complete_loglik with respect to the full parameter layout
/// (exponential kernels only).
[[nodiscard]] inline std::vector<double> complete_loglik_gradient(const ModelSpec& spec, const ParameterVector& theta,
                                                                  const EventSequence& path) {
    check_shape(spec, theta);
    check_events(path, spec.dimension);
    if (!spec.all_exponential())
        throw Error(ErrorCode::NonExponentialKernel, "analytic gradient needs exponential kernels");
    const std::size_t dim = spec.dimension;
    const ParameterLayout layout(spec);
    const double horizon = path.horizon;

    // Offsets into the full layout.
    std::vector<std::size_t> nu_offset(dim);
    std::size_t off = 0;
    for (std::size_t m = 0; m < dim; ++m) {
        nu_offset[m] = off;
        off += spec.baselines[m].coefficient_count();
    }
    const std::size_t eta_offset = off;
    const std::size_t beta_offset = off + dim * dim;

    std::vector<double> grad(layout.full_size(), 0.0);
    auto basis = [&](std::size_t m, std::size_t b, double t) {
        if (spec.baselines[m].family == BaselineFamily::Constant) return 1.0;
        std::vector<double> unit(spec.baselines[m].coefficient_count(), 0.0);
        unit[b] = 1.0;
        return baseline_value(spec.baselines[m], unit, t);
    };

    // S(m,p) = sum exp(-(t - tau)/beta), R(m,p) = sum (t - tau) exp(-(t - tau)/beta) over type-p events.
    std::vector<double> S(dim * dim, 0.0);
    std::vector<double> R(dim * dim, 0.0);
    double anchor = 0.0;
    auto decay = [&](double to) {
        const double d = to - anchor;
        for (std::size_t m = 0; m < dim; ++m) {
            for (std::size_t p = 0; p < dim; ++p) {
                const double f = std::exp(-d / theta.kernel_at(m, p).beta);
                R[m * dim + p] = f * (R[m * dim + p] + d * S[m * dim + p]);
                S[m * dim + p] *= f;
            }
        }
        anchor = to;
    };
    for (std::size_t k = 0; k < path.size(); ++k) {
        const double t = path.times[k];
        decay(t);
        const auto z = static_cast<std::size_t>(path.types[k]);
        double rate = baseline_value(spec, theta, z, t);
        for (std::size_t p = 0; p < dim; ++p) {
            const double eta = theta.eta(static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(p));
            rate += eta / theta.kernel_at(z, p).beta * S[z * dim + p];
        }
        if (!(rate > 0.0)) throw Error(ErrorCode::NonFiniteLogLik, "zero intensity at event " + std::to_string(k + 1));
        const double inv = 1.0 / rate;
        for (std::size_t b = 0; b < spec.baselines[z].coefficient_count(); ++b) grad[nu_offset[z] + b] += basis(z, b, t) * inv;
        for (std::size_t p = 0; p < dim; ++p) {
            const double beta = theta.kernel_at(z, p).beta;
            const double eta = theta.eta(static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(p));
            grad[eta_offset + z * dim + p] += S[z * dim + p] / beta * inv;
            grad[beta_offset + z * dim + p] +=
                eta * (-S[z * dim + p] / (beta * beta) + R[z * dim + p] / (beta * beta * beta)) * inv;
        }
        for (std::size_t m = 0; m < dim; ++m) S[m * dim + z] += 1.0;
    }
    // Compensator terms.
    for (std::size_t m = 0; m < dim; ++m) {
        for (std::size_t b = 0; b < spec.baselines[m].coefficient_count(); ++b) {
            if (spec.baselines[m].family == BaselineFamily::Constant) {
                grad[nu_offset[m] + b] -= horizon;
            } else {
                std::vector<double> unit(spec.baselines[m].coefficient_count(), 0.0);
                unit[b] = 1.0;
                grad[nu_offset[m] + b] -= baseline_integral(spec.baselines[m], unit, 0.0, horizon);
            }
        }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
        const auto p = static_cast<std::size_t>(path.types[k]);
        const double u = horizon - path.times[k];
        for (std::size_t m = 0; m < dim; ++m) {
            const double beta = theta.kernel_at(m, p).beta;
            const double eta = theta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
            const double f = std::exp(-u / beta);
            grad[eta_offset + m * dim + p] -= 1.0 - f;
            grad[beta_offset + m * dim + p] += eta * f * u / (beta * beta);
        }
    }
    return grad;
}

/// Gradient with respect to the free (tie-collapsed) layout.
[[nodiscard]] inline std::vector<double> complete_loglik_free_gradient(const ModelSpec& spec, const ParameterVector& theta,
                                                                       const EventSequence& path) {
    const ParameterLayout layout(spec);
    const std::vector<double> full = complete_loglik_gradient(spec, theta, path);
    std::vector<double> free(layout.free_size(), 0.0);
    for (std::size_t f = 0; f < free.size(); ++f)
        for (std::size_t i : layout.members(f)) free[f] += full[i];
    return free;
}

// ---------------------------------------------------------------------------
// Maximum likelihood
// ---------------------------------------------------------------------------

struct MleOptions {
    double gradient_tolerance = 1e-6;  // sup-norm, log coordinates, relative to max(1, |loglik|)
    std::size_t max_iterations = 500;
    double hessian_step = 1e-4;        // relative, original scale
};

struct MleResult {
    ParameterVector theta;
    double log_likelihood = 0.0;
    /// Covariance over the free layout; rows/columns of held parameters are NaN.
    Eigen::MatrixXd covariance;
    std::vector<double> standard_errors;
    /// Free coordinates that were optimised; the rest stay at their initial value.
    std::vector<bool> active;
    std::size_t iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
};

namespace detail {

/// Free coordinates worth optimising: strictly positive at the start, and for
/// kernel parameters, attached to at least one branching ratio that is itself
/// optimised (otherwise the likelihood does not depend on them).
inline std::vector<bool> active_coordinates(const ModelSpec& spec, const std::vector<double>& flat) {
    const ParameterLayout layout(spec);
    std::vector<bool> active(flat.size());
    for (std::size_t f = 0; f < flat.size(); ++f) active[f] = flat[f] > 0.0;
    const std::size_t eta_start = [&] {
        for (std::size_t i = 0; i < layout.full_size(); ++i)
            if (layout.slot(i).kind == SlotKind::Branching) return i;
        return layout.full_size();
    }();
    for (std::size_t f = 0; f < flat.size(); ++f) {
        const SlotKind kind = layout.slot(layout.members(f).front()).kind;
        if (kind == SlotKind::Baseline || kind == SlotKind::Branching || !active[f]) continue;
        bool linked = false;
        for (std::size_t i : layout.members(f)) {
            const auto& s = layout.slot(i);
            const std::size_t eta_full = eta_start + s.m * spec.dimension + s.j;
            if (active[layout.free_index(eta_full)]) linked = true;
        }
        active[f] = linked;
    }
    return active;
}

inline double safe_negative_loglik(const ModelSpec& spec, const std::vector<double>& flat, const EventSequence& path) {
    try {
        const double ll = complete_loglik(spec, from_flat(spec, flat), path);
        return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
    } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace detail

/// Maximises complete_loglik by BFGS on log-transformed free coordinates,
/// then inverts the negative finite-difference Hessian (original scale) for
/// the covariance. The stationarity condition is not imposed.
[[nodiscard]] inline MleResult mle_fit(const ModelSpec& spec, const EventSequence& path, const ParameterVector& init,
                                       const MleOptions& options = {}) {
    require_valid(spec, init, ValidationMode::FiniteHorizon);
    const std::vector<double> start = to_flat(spec, init);
    const std::size_t n_free = start.size();
    std::vector<bool> active = detail::active_coordinates(spec, start);
    std::vector<std::size_t> idx;
    for (std::size_t f = 0; f < n_free; ++f)
        if (active[f]) idx.push_back(f);
    const auto n = static_cast<Eigen::Index>(idx.size());
    const bool analytic = spec.all_exponential();

    auto unpack = [&](const Eigen::VectorXd& x) {
        std::vector<double> flat = start;
        for (Eigen::Index a = 0; a < n; ++a) flat[idx[static_cast<std::size_t>(a)]] = std::exp(x(a));
        return flat;
    };
    auto objective = [&](const Eigen::VectorXd& x) { return detail::safe_negative_loglik(spec, unpack(x), path); };
    auto gradient = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd g(n);
        if (analytic) {
            const std::vector<double> flat = unpack(x);
            const std::vector<double> full = complete_loglik_free_gradient(spec, from_flat(spec, flat), path);
            for (Eigen::Index a = 0; a < n; ++a) {
                const std::size_t f = idx[static_cast<std::size_t>(a)];
                g(a) = -full[f] * flat[f];
            }
        } else {
            for (Eigen::Index a = 0; a < n; ++a) {
                const double h = 1e-6;
                Eigen::VectorXd up = x, down = x;
                up(a) += h;
                down(a) -= h;
                g(a) = (objective(up) - objective(down)) / (2.0 * h);
            }
        }
        return g;
    };

    Eigen::VectorXd x(n);
    for (Eigen::Index a = 0; a < n; ++a) x(a) = std::log(start[idx[static_cast<std::size_t>(a)]]);
    double fx = objective(x);
    if (!std::isfinite(fx)) throw Error(ErrorCode::OptimizerDiverged, "log-likelihood is not finite at the initial point");
    Eigen::VectorXd g = gradient(x);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    MleResult result;
    std::size_t iter = 0;
    bool first_update = true;
    for (; iter < options.max_iterations; ++iter) {
        const double scale = std::max(1.0, std::abs(fx));
        if (n == 0 || g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance * scale) {
            result.converged = true;
            break;
        }
        Eigen::VectorXd dir = -H * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            H = Eigen::MatrixXd::Identity(n, n);
            dir = -g;
            slope = g.dot(dir);
        }
        double step = 1.0;
        const double max_move = dir.lpNorm<Eigen::Infinity>();
        if (max_move > 5.0) step = 5.0 / max_move;
        Eigen::VectorXd x_new;
        double f_new = std::numeric_limits<double>::infinity();
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = x + step * dir;
            f_new = objective(x_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) {
            // No further decrease is representable; accept the point if the gradient is near zero.
            result.converged = g.lpNorm<Eigen::Infinity>() <= 1e3 * options.gradient_tolerance * scale;
            break;
        }
        const Eigen::VectorXd g_new = gradient(x_new);
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (first_update) {
                H = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
                first_update = false;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
        }
        const bool stalled = fx - f_new <= 1e-15 * scale;
        x = x_new;
        fx = f_new;
        g = g_new;
        if (stalled && g.lpNorm<Eigen::Infinity>() <= 1e3 * options.gradient_tolerance * scale) {
            result.converged = true;
            ++iter;
            break;
        }
        if (x.lpNorm<Eigen::Infinity>() > 60.0)
            throw Error(ErrorCode::OptimizerDiverged, "a parameter left the representable range");
    }
    result.iterations = iter;
    result.gradient_norm = n == 0 ? 0.0 : g.lpNorm<Eigen::Infinity>();
    const std::vector<double> best = unpack(x);
    result.theta = from_flat(spec, best);
    result.log_likelihood = -fx;
    result.active = active;

    // Finite-difference Hessian of the log-likelihood on the original scale.
    auto loglik_at = [&](const std::vector<double>& flat) { return -detail::safe_negative_loglik(spec, flat, path); };
    Eigen::MatrixXd hess(n, n);
    std::vector<double> h(static_cast<std::size_t>(n));
    for (Eigen::Index a = 0; a < n; ++a) h[static_cast<std::size_t>(a)] = options.hessian_step * best[idx[static_cast<std::size_t>(a)]];
    const double f0 = loglik_at(best);
    for (Eigen::Index a = 0; a < n; ++a) {
        const std::size_t fa = idx[static_cast<std::size_t>(a)];
        const double ha = h[static_cast<std::size_t>(a)];
        std::vector<double> p = best, q = best;
        p[fa] += ha;
        q[fa] -= ha;
        hess(a, a) = (loglik_at(p) - 2.0 * f0 + loglik_at(q)) / (ha * ha);
        for (Eigen::Index b = 0; b < a; ++b) {
            const std::size_t fb = idx[static_cast<std::size_t>(b)];
            const double hb = h[static_cast<std::size_t>(b)];
            std::vector<double> pp = best, pm = best, mp = best, mm = best;
            pp[fa] += ha; pp[fb] += hb;
            pm[fa] += ha; pm[fb] -= hb;
            mp[fa] -= ha; mp[fb] += hb;
            mm[fa] -= ha; mm[fb] -= hb;
            hess(a, b) = hess(b, a) = (loglik_at(pp) - loglik_at(pm) - loglik_at(mp) + loglik_at(mm)) / (4.0 * ha * hb);
        }
    }
    if (!hess.allFinite()) throw Error(ErrorCode::SingularHessian, "Hessian has non-finite entries");
    const Eigen::MatrixXd info = -hess;
    const Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularHessian, "negative Hessian is not positive definite");
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(n, n));

    const double nan = std::numeric_limits<double>::quiet_NaN();
    result.covariance = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n_free), static_cast<Eigen::Index>(n_free), nan);
    result.standard_errors.assign(n_free, nan);
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto fa = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < n; ++b)
            result.covariance(fa, static_cast<Eigen::Index>(idx[static_cast<std::size_t>(b)])) = cov(a, b);
        result.standard_errors[static_cast<std::size_t>(fa)] = std::sqrt(cov(a, a));
    }
    return result;
}

}  // namespace mhp
