#pragma once

#include "mhp/io.hpp"
#include "mhp/pmmh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mhp {

inline constexpr std::size_t kMaxReportedLag = 50;

struct ParameterDiagnostics {
    std::string name;
    double acceptance_rate = 0.0;
    std::vector<double> autocorrelation;  // lags 0..min(50, n-1)
    double effective_sample_size = 0.0;
};

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
};

struct ChainReport {
    double acceptance_rate = 0.0;
    std::vector<ParameterDiagnostics> parameters;
};

/// Sample autocorrelation at lags 0..max_lag (biased normalisation by n).
[[nodiscard]] inline std::vector<double> autocorrelation(const std::vector<double>& x, std::size_t max_lag) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    max_lag = std::min(max_lag, n - 1);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = x[i] - mean;
    double c0 = 0.0;
    for (double v : c) c0 += v * v;
    std::vector<double> rho(max_lag + 1, 0.0);
    rho[0] = 1.0;
    if (c0 == 0.0) return rho;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) s += c[i] * c[i + k];
        rho[k] = s / c0;
    }
    return rho;
}

/// Geyer's initial monotone sequence estimator: pair sums of autocorrelations
/// are truncated at the first non-positive pair and forced non-increasing.
[[nodiscard]] inline double chain_effective_sample_size(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n < 2) return static_cast<double>(n);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> c(n);
    double c0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        c[i] = x[i] - mean;
        c0 += c[i] * c[i];
    }
    if (c0 == 0.0) return static_cast<double>(n);
    auto rho = [&](std::size_t k) {
        double s = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) s += c[i] * c[i + k];
        return s / c0;
    };
    double tau = -1.0;
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        double gamma = (k == 0 ? 1.0 : rho(2 * k)) + rho(2 * k + 1);
        if (gamma <= 0.0) break;
        gamma = std::min(gamma, previous);
        previous = gamma;
        tau += 2.0 * gamma;
    }
    tau = std::max(tau, 1.0 / static_cast<double>(n));
    return static_cast<double>(n) / tau;
}

/// Fraction of accepted moves, excluding the initial record.
[[nodiscard]] inline double acceptance_rate(const std::vector<ChainRecord>& chain) {
    if (chain.size() < 2) return 0.0;
    std::size_t accepted = 0;
    for (std::size_t i = 1; i < chain.size(); ++i) accepted += chain[i].accepted ? 1 : 0;
    return static_cast<double>(accepted) / static_cast<double>(chain.size() - 1);
}

[[nodiscard]] inline std::vector<double> chain_column(const std::vector<ChainRecord>& chain, std::size_t f,
                                                      std::size_t skip = 0) {
    std::vector<double> column;
    column.reserve(chain.size() > skip ? chain.size() - skip : 0);
    for (std::size_t i = skip; i < chain.size(); ++i) column.push_back(chain[i].theta.at(f));
    return column;
}

[[nodiscard]] inline ChainReport chain_diagnostics(const std::vector<ChainRecord>& chain,
                                                   const std::vector<std::string>& names = {}) {
    ChainReport report;
    report.acceptance_rate = acceptance_rate(chain);
    if (chain.empty()) return report;
    for (std::size_t f = 0; f < chain.front().theta.size(); ++f) {
        const std::vector<double> column = chain_column(chain, f);
        ParameterDiagnostics d;
        d.name = f < names.size() ? names[f] : "theta[" + std::to_string(f + 1) + "]";
        d.acceptance_rate = report.acceptance_rate;
        d.autocorrelation = autocorrelation(column, kMaxReportedLag);
        d.effective_sample_size = chain_effective_sample_size(column);
        report.parameters.push_back(std::move(d));
    }
    return report;
}

[[nodiscard]] inline std::vector<HistogramBin> histogram(const std::vector<double>& x, std::size_t bins) {
    std::vector<HistogramBin> out;
    if (x.empty() || bins == 0) return out;
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b)
        out.push_back({lo + width * static_cast<double>(b), b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1), 0});
    for (double v : x) {
        auto b = static_cast<std::size_t>((v - lo) / width);
        ++out[std::min(b, bins - 1)].count;
    }
    return out;
}

/// `iteration,<parameter>...,log_lik_hat,accepted`
[[nodiscard]] inline std::string format_trace_csv(const std::vector<ChainRecord>& chain, const std::vector<std::string>& names) {
    std::string out = "iteration";
    for (const auto& n : names) out += "," + n;
    out += ",log_lik_hat,accepted\n";
    for (const auto& r : chain) {
        out += std::to_string(r.iteration);
        for (double v : r.theta) out += "," + format_double(v);
        out += "," + format_double(r.log_lik_hat) + "," + (r.accepted ? "1" : "0") + "\n";
    }
    return out;
}

/// `parameter,lower,upper,count` over the post-burn-in samples.
[[nodiscard]] inline std::string format_histogram_csv(const std::vector<ChainRecord>& chain, const std::vector<std::string>& names,
                                                      double burn_in_fraction, std::size_t bins = 30) {
    std::string out = "parameter,lower,upper,count\n";
    if (chain.empty()) return out;
    const std::size_t skip = burn_in_count(chain.size(), burn_in_fraction);
    for (std::size_t f = 0; f < chain.front().theta.size(); ++f) {
        for (const auto& bin : histogram(chain_column(chain, f, skip), bins))
            out += names.at(f) + "," + format_double(bin.lower) + "," + format_double(bin.upper) + "," + std::to_string(bin.count) + "\n";
    }
    return out;
}

[[nodiscard]] inline nlohmann::json chain_report_to_json(const ChainReport& report) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["acceptance_rate"] = report.acceptance_rate;
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : report.parameters) {
        params.push_back({{"name", p.name},
                          {"acceptance_rate", p.acceptance_rate},
                          {"effective_sample_size", p.effective_sample_size},
                          {"autocorrelation", p.autocorrelation}});
    }
    j["parameters"] = params;
    return j;
}

}  // namespace mhp
