#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mhp;

namespace {

std::vector<double> ar1(double phi, std::size_t n, std::uint64_t seed) {
    Rng rng(stream_key(seed, 3));
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> x(n);
    x[0] = z(rng) / std::sqrt(1.0 - phi * phi);
    for (std::size_t t = 1; t < n; ++t) x[t] = phi * x[t - 1] + z(rng);
    return x;
}

std::vector<ChainRecord> chain_of(const std::vector<double>& x) {
    std::vector<ChainRecord> chain;
    for (std::size_t r = 0; r < x.size(); ++r) chain.push_back({r, {x[r]}, -1.0, r > 0 && x[r] != x[r - 1]});
    return chain;
}

}  // namespace

TEST(Ess, IndependentDrawsGiveFullSize) {
    const std::vector<double> x = ar1(0.0, 20000, 1);
    EXPECT_NEAR(chain_effective_sample_size(x) / 20000.0, 1.0, 0.1);
}

TEST(Ess, Ar1MatchesClosedForm) {
    const double phi = 0.9;
    const double expected = (1.0 - phi) / (1.0 + phi);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const std::vector<double> x = ar1(phi, 100000, seed + 10);
        EXPECT_NEAR(chain_effective_sample_size(x) / 100000.0, expected, 0.2 * expected) << seed;
    }
}

TEST(Autocorrelation, Ar1DecaysGeometrically) {
    const std::vector<double> rho = autocorrelation(ar1(0.5, 200000, 4), kMaxReportedLag);
    ASSERT_EQ(rho.size(), kMaxReportedLag + 1);
    EXPECT_EQ(rho[0], 1.0);
    for (std::size_t k = 1; k <= 5; ++k) EXPECT_NEAR(rho[k], std::pow(0.5, static_cast<double>(k)), 0.01) << k;
    EXPECT_EQ(autocorrelation({1.0, 2.0, 3.0}, 50).size(), 3u);
}

TEST(ChainReport, ConstantChainHasZeroAcceptance) {
    std::vector<ChainRecord> chain(500, ChainRecord{0, {2.0, 3.0}, -4.0, false});
    chain[0].accepted = true;
    const ChainReport report = chain_diagnostics(chain, {"a", "b"});
    EXPECT_EQ(report.acceptance_rate, 0.0);
    ASSERT_EQ(report.parameters.size(), 2u);
    EXPECT_EQ(report.parameters[1].name, "b");
    EXPECT_EQ(report.parameters[0].acceptance_rate, 0.0);
    EXPECT_EQ(report.parameters[0].autocorrelation.size(), kMaxReportedLag + 1);
}

TEST(ChainReport, AcceptanceCountsMovesAfterTheFirstRecord) {
    std::vector<ChainRecord> chain;
    for (std::size_t r = 0; r < 5; ++r) chain.push_back({r, {0.0}, 0.0, r % 2 == 0});
    EXPECT_DOUBLE_EQ(acceptance_rate(chain), 0.5);
}

TEST(ChainReport, JsonIsVersioned) {
    const ChainReport report = chain_diagnostics(chain_of(ar1(0.3, 300, 2)), {"x"});
    const nlohmann::json j = chain_report_to_json(report);
    EXPECT_EQ(j.at("format_version"), kFormatVersion);
    EXPECT_EQ(j.at("parameters")[0].at("name"), "x");
    EXPECT_GT(j.at("parameters")[0].at("effective_sample_size").get<double>(), 0.0);
}

TEST(Tables, HistogramCountsEverySample) {
    const std::vector<double> x = ar1(0.0, 1000, 5);
    const auto bins = histogram(x, 30);
    ASSERT_EQ(bins.size(), 30u);
    std::size_t total = 0;
    for (std::size_t b = 0; b < bins.size(); ++b) {
        total += bins[b].count;
        if (b > 0) {
            EXPECT_EQ(bins[b].lower, bins[b - 1].upper);
        }
    }
    EXPECT_EQ(total, 1000u);
    EXPECT_EQ(histogram({1.0, 1.0}, 4).size(), 4u);
}

TEST(Tables, TraceAndHistogramCsvLayouts) {
    const std::vector<ChainRecord> chain = chain_of(ar1(0.0, 200, 6));
    const std::string trace = format_trace_csv(chain, {"nu[1]"});
    EXPECT_EQ(trace.substr(0, trace.find('\n')), "iteration,nu[1],log_lik_hat,accepted");
    EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 201);
    const std::string hist = format_histogram_csv(chain, {"nu[1]"}, 0.1, 10);
    EXPECT_EQ(hist.substr(0, hist.find('\n')), "parameter,lower,upper,count");
    EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 11);
}
