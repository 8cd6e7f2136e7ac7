#pragma once

#include "mhp/mhp.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace fixtures {

inline Eigen::MatrixXd mat2(double a, double b, double c, double d) {
    Eigen::MatrixXd m(2, 2);
    m << a, b, c, d;
    return m;
}

/// Bivariate exponential model used for the single-window verification.
inline mhp::ModelSpec exp_spec() { return mhp::ModelSpec::uniform(2, mhp::KernelFamily::Exponential); }
inline mhp::ParameterVector exp_theta() {
    return mhp::ParameterVector::exponential({1.0, 1.0}, mat2(0.6, 0.4, 0.4, 0.6), mat2(0.5, 0.5, 0.5, 0.5));
}

/// Same baselines and branching, gamma offspring densities.
inline mhp::ModelSpec gamma_spec() { return mhp::ModelSpec::uniform(2, mhp::KernelFamily::Gamma); }
inline mhp::ParameterVector gamma_theta() {
    mhp::ParameterVector theta = exp_theta();
    const double shape[2][2] = {{2, 3}, {3, 2}};
    const double scale[2][2] = {{1, 2}, {2, 1}};
    for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t j = 0; j < 2; ++j) theta.kernel_at(m, j) = {1.0, shape[m][j], scale[m][j]};
    return theta;
}

/// Recovery-study model: beta tied along each row.
inline mhp::ModelSpec recovery_spec() {
    mhp::ModelSpec spec = exp_spec();
    spec.ties = {{6, 7}, {8, 9}};
    return spec;
}
inline mhp::ParameterVector recovery_theta() {
    return mhp::ParameterVector::exponential({0.8, 1.0}, mat2(0.6, 0.3, 0.25, 0.5), mat2(0.5, 0.5, 0.75, 0.75));
}

inline mhp::ModelSpec poisson_spec() { return mhp::ModelSpec::uniform(1, mhp::KernelFamily::Exponential); }
inline mhp::ParameterVector poisson_theta(double nu) {
    return mhp::ParameterVector::exponential({nu}, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Ones(1, 1));
}

/// Direct evaluation of lambda_m(t) from the textbook sum over events before t.
inline double naive_intensity(const mhp::ModelSpec& spec, const mhp::ParameterVector& theta,
                              const std::vector<double>& times, const std::vector<int>& types, std::size_t m, double t) {
    double value = mhp::baseline_value(spec.baselines[m], theta.nu[m], t);
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] < t)) continue;
        const auto j = static_cast<std::size_t>(types[k]);
        const double s = t - times[k];
        const mhp::KernelParams& p = theta.kernel_at(m, j);
        double h;
        if (spec.kernel(m, j) == mhp::KernelFamily::Exponential)
            h = std::exp(-s / p.beta) / p.beta;
        else
            h = std::pow(s, p.shape - 1.0) * std::exp(-s / p.scale) / (std::tgamma(p.shape) * std::pow(p.scale, p.shape));
        value += theta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) * h;
    }
    return value;
}

/// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 50) {
    std::function<double(double, double, double, double, double, double, double, int)> rec =
        [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps, int d) {
            const double mid = 0.5 * (lo + hi);
            const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
            const double flm = f(lm), frm = f(rm);
            const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
            const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
            if (d <= 0 || std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
            return rec(lo, mid, flo, flm, fmid, left, eps / 2.0, d - 1) + rec(mid, hi, fmid, frm, fhi, right, eps / 2.0, d - 1);
        };
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, depth);
}

}  // namespace fixtures
