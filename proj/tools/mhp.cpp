#include "mhp/mhp.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted.store(true); }

struct RuntimeFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::fwrite(text.data(), 1, text.size(), stdout);
        std::fflush(stdout);
    } else {
        mhp::write_text_file(path, text);
    }
}

mhp::ModelSpec load_model(const std::string& path) { return mhp::model_from_json(mhp::parse_json_file(path)); }

mhp::ParameterVector load_theta(const mhp::ModelSpec& spec, const std::string& path) {
    return mhp::parameters_from_json(spec, mhp::parse_json_file(path));
}

void report_warnings(const mhp::ModelSpec& spec, const mhp::ParameterVector& theta) {
    for (const auto& w : mhp::validate(spec, theta).warnings) std::cerr << "warning: " << w << "\n";
}

mhp::IntervalCounts load_counts(const std::string& path, const std::string& schema) {
    const std::string text = mhp::read_text_file(path);
    mhp::CountsSchema s = mhp::CountsSchema::Boundaries;
    if (schema == "daily" || (schema == "auto" && text.rfind("date", 0) == 0)) s = mhp::CountsSchema::Daily;
    return mhp::parse_counts_csv(text, s);
}

/// A number is a uniform window width; anything else names a grid file.
mhp::AggregationGrid load_grid(const std::string& spec, std::optional<double> horizon) {
    double width = 0.0;
    const char* end = spec.data() + spec.size();
    const auto [ptr, ec] = std::from_chars(spec.data(), end, width);
    if (ec == std::errc() && ptr == end) {
        if (!horizon) throw mhp::Error(mhp::ErrorCode::InvalidSpec, "a window width needs --horizon");
        return mhp::AggregationGrid::uniform(*horizon, width);
    }
    mhp::AggregationGrid grid = mhp::parse_grid_csv(mhp::read_text_file(spec));
    if (horizon && grid.horizon() != *horizon)
        throw mhp::Error(mhp::ErrorCode::GridHorizonMismatch, "grid ends at " + mhp::format_double(grid.horizon()));
    return grid;
}

std::vector<double> parse_levels(const std::string& text) {
    std::vector<double> levels;
    for (const auto& field : mhp::split_csv(text)) levels.push_back(mhp::parse_double(field, "--quantiles"));
    return levels;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
    const std::filesystem::path p(path);
    return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

mhp::SmcConfig smc_config(std::size_t particles, const std::string& proposal, const std::string& resample,
                          double ess_fraction, unsigned threads) {
    mhp::SmcConfig c;
    c.particles = particles;
    c.proposal = proposal == "poisson" ? mhp::Proposal::PoissonRate95 : mhp::Proposal::OrderedUniform;
    c.resampling = resample == "ess" ? mhp::Resampling::ess_threshold(ess_fraction) : mhp::Resampling::every_step();
    c.threads = threads;
    return c;
}

// ---------------------------------------------------------------------------
// Options
// ---------------------------------------------------------------------------

const CLI::Validator kAtLeastTwo(
    [](std::string& input) -> std::string {
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(input.data(), input.data() + input.size(), v);
        if (ec != std::errc() || ptr != input.data() + input.size() || v < 2) return "must be an integer >= 2";
        return {};
    },
    ">=2");

const CLI::Validator kFraction(
    [](std::string& input) -> std::string {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(input.data(), input.data() + input.size(), v);
        if (ec != std::errc() || ptr != input.data() + input.size() || !(v >= 0.0 && v < 1.0))
            return "must lie in [0, 1)";
        return {};
    },
    "IN [0,1)");

struct Common {
    std::string model;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string config;
};

void add_common(CLI::App* sub, Common& c, bool seeded) {
    sub->add_option("--config", c.config, "JSON file of option values; command-line flags take precedence")
        ->check(CLI::ExistingFile);
    sub->add_option("--model", c.model, "Model JSON (dimension, baselines, kernels, ties)")
        ->required()
        ->check(CLI::ExistingFile);
    if (seeded) sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    sub->add_option("--threads", c.threads, "Worker threads; results do not depend on it")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
}

struct SmcOptions {
    std::size_t particles = 100;
    std::string proposal = "uniform";
    std::string resample = "every";
    double ess_fraction = 0.5;
};

void add_smc(CLI::App* sub, SmcOptions& o) {
    sub->add_option("--particles,-J", o.particles, "Particles per likelihood estimate")
        ->capture_default_str()
        ->check(kAtLeastTwo);
    sub->add_option("--proposal", o.proposal, "Latent event-time proposal")
        ->capture_default_str()
        ->check(CLI::IsMember({"uniform", "poisson"}));
    sub->add_option("--resample", o.resample, "Resample every window or when ESS falls below --ess-fraction * J")
        ->capture_default_str()
        ->check(CLI::IsMember({"every", "ess"}));
    sub->add_option("--ess-fraction", o.ess_fraction, "ESS threshold fraction for --resample ess")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct SimulateArgs {
    Common common;
    std::string theta, out, aggregate, counts_out, schema = "boundaries";
    double horizon = 0.0;
};

int run_simulate(const SimulateArgs& a) {
    const mhp::ModelSpec spec = load_model(a.common.model);
    const mhp::ParameterVector theta = load_theta(spec, a.theta);
    report_warnings(spec, theta);
    std::optional<mhp::AggregationGrid> grid;
    if (!a.aggregate.empty()) grid = load_grid(a.aggregate, a.horizon);
    const mhp::EventSequence path = mhp::simulate_path(spec, theta, a.horizon, a.common.seed);
    emit(a.out, mhp::format_events_csv(path));
    if (grid) {
        const mhp::IntervalCounts counts = mhp::aggregate(path, *grid, spec.dimension);
        const auto schema = a.schema == "daily" ? mhp::CountsSchema::Daily : mhp::CountsSchema::Boundaries;
        emit(a.counts_out.empty() ? with_suffix(a.out, "_counts") : a.counts_out, mhp::format_counts_csv(counts, schema));
    }
    return 0;
}

struct LoglikArgs {
    Common common;
    SmcOptions smc;
    std::string counts, schema = "auto", theta, scale = "log", out;
    std::size_t reps = 1;
};

int run_loglik(const LoglikArgs& a) {
    const mhp::ModelSpec spec = load_model(a.common.model);
    const mhp::ParameterVector theta = load_theta(spec, a.theta);
    report_warnings(spec, theta);
    const mhp::IntervalCounts counts = load_counts(a.counts, a.schema);
    mhp::SmcConfig config = smc_config(a.smc.particles, a.smc.proposal, a.smc.resample, a.smc.ess_fraction, a.common.threads);
    std::vector<double> values;
    std::size_t degenerate = 0;
    for (std::size_t r = 0; r < a.reps; ++r) {
        config.seed = mhp::stream_key(a.common.seed, 0x10cu, r);
        const mhp::SmcResult result = mhp::smc_log_likelihood(spec, theta, counts, config);
        degenerate += result.degenerate ? 1 : 0;
        values.push_back(a.scale == "linear" ? std::exp(result.log_likelihood) : result.log_likelihood);
    }
    double mean = 0.0, variance = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        for (double v : values) variance += (v - mean) * (v - mean);
        variance /= static_cast<double>(values.size() - 1);
    }
    std::string text;
    for (double v : values) text += mhp::format_double(v) + "\n";
    nlohmann::json summary;
    summary["format_version"] = mhp::kFormatVersion;
    summary["scale"] = a.scale;
    summary["reps"] = a.reps;
    summary["particles"] = a.smc.particles;
    summary["mean"] = mhp::detail::number_or_null(mean);
    summary["variance"] = mhp::detail::number_or_null(variance);
    summary["degenerate"] = degenerate;
    text += summary.dump() + "\n";
    emit(a.out, text);
    if (degenerate > 0) throw RuntimeFailure(std::to_string(degenerate) + " of " + std::to_string(a.reps) + " SMC runs were degenerate");
    return 0;
}

struct FitArgs {
    Common common;
    SmcOptions smc;
    std::string counts, schema = "auto", init, chain, summary;
    std::size_t iterations = 1000;
    double delta = 0.12;
    bool delta_is_variance = false;
    bool log_scale = false;
    double burn_in = 0.10;
};

int run_fit(const FitArgs& a) {
    const mhp::ModelSpec spec = load_model(a.common.model);
    const mhp::IntervalCounts counts = load_counts(a.counts, a.schema);
    mhp::PmmhConfig config;
    config.iterations = a.iterations;
    config.delta = a.delta;
    config.delta_is_variance = a.delta_is_variance;
    config.log_scale_proposal = a.log_scale;
    config.burn_in_fraction = a.burn_in;
    config.seed = a.common.seed;
    config.init = a.init.empty() ? mhp::default_init(counts, spec) : load_theta(spec, a.init);
    config.stop = &g_interrupted;
    report_warnings(spec, *config.init);
    const mhp::SmcConfig smc =
        smc_config(a.smc.particles, a.smc.proposal, a.smc.resample, a.smc.ess_fraction, a.common.threads);

    std::ofstream chain_file(a.chain, std::ios::binary | std::ios::trunc);
    if (!chain_file) throw mhp::Error(mhp::ErrorCode::IoError, "cannot open " + a.chain);
    std::signal(SIGINT, on_sigint);
    const auto chain = mhp::run_chain(spec, counts, smc, config, [&](const mhp::ChainRecord& r) {
        chain_file << mhp::format_chain_record(r) << '\n';
        chain_file.flush();
    });
    chain_file.close();
    std::signal(SIGINT, SIG_DFL);
    if (g_interrupted.load())
        throw RuntimeFailure("interrupted after " + std::to_string(chain.size()) + " records; partial chain in " + a.chain);
    std::cerr << "acceptance rate " << mhp::format_double(mhp::acceptance_rate(chain)) << "\n";
    const auto rows = mhp::summarize(chain, a.burn_in, mhp::ParameterLayout(spec).free_names());
    emit(a.summary, mhp::format_summary_csv(rows));
    return 0;
}

struct SummarizeArgs {
    Common common;
    std::string chain, out;
    double burn_in = 0.10;
};

int run_summarize(const SummarizeArgs& a) {
    const mhp::ModelSpec spec = load_model(a.common.model);
    const auto chain = mhp::read_chain_jsonl(a.chain);
    emit(a.out, mhp::format_summary_csv(mhp::summarize(chain, a.burn_in, mhp::ParameterLayout(spec).free_names())));
    return 0;
}

struct DiagnoseArgs {
    Common common;
    std::string chain, report, trace, histogram;
    double burn_in = 0.10;
    std::size_t bins = 30;
};

int run_diagnose(const DiagnoseArgs& a) {
    const mhp::ModelSpec spec = load_model(a.common.model);
    const auto chain = mhp::read_chain_jsonl(a.chain);
    if (chain.empty()) throw mhp::Error(mhp::ErrorCode::ChainTooShort, "chain file has no records");
    const auto names = mhp::ParameterLayout(spec).free_names();
    if (chain.front().theta.size() != names.size())
        throw mhp::Error(mhp::ErrorCode::ShapeMismatch, "chain records do not match the model's parameter count");
    emit(a.report, mhp::chain_report_to_json(mhp::chain_diagnostics(chain, names)).dump(2) + "\n");
    if (!a.trace.empty()) emit(a.trace, mhp::format_trace_csv(chain, names));
    if (!a.histogram.empty()) emit(a.histogram, mhp::format_histogram_csv(chain, names, a.burn_in, a.bins));
    return 0;
}

struct MleArgs {
    Common common;
    std::string events, init, out;
    double horizon = 0.0;
};

int run_mle(const MleArgs& a) {
    const mhp::ModelSpec spec = load_model(a.common.model);
    const mhp::EventSequence path = mhp::parse_events_csv(mhp::read_text_file(a.events), a.horizon, spec.dimension);
    mhp::ParameterVector init;
    if (a.init.empty()) {
        const mhp::AggregationGrid whole{{0.0, a.horizon}};
        init = mhp::default_init(mhp::aggregate(path, whole, spec.dimension), spec);
    } else {
        init = load_theta(spec, a.init);
    }
    const mhp::MleResult fit = mhp::mle_fit(spec, path, init);
    std::cerr << "log-likelihood " << mhp::format_double(fit.log_likelihood) << " after " << fit.iterations
              << " iterations" << (fit.converged ? "" : " (not converged)") << "\n";
    emit(a.out, mhp::format_mle_csv(spec, fit));
    return 0;
}

struct EnvelopeArgs {
    Common common;
    std::string theta, grid, quantiles = "0.025,0.975", out;
    std::optional<double> horizon;
    std::size_t reps = 500;
};

int run_envelope(const EnvelopeArgs& a) {
    const mhp::ModelSpec spec = load_model(a.common.model);
    const mhp::ParameterVector theta = load_theta(spec, a.theta);
    report_warnings(spec, theta);
    const mhp::AggregationGrid grid = load_grid(a.grid, a.horizon);
    const mhp::Envelope env =
        mhp::posterior_predictive_envelope(theta, spec, grid, a.reps, parse_levels(a.quantiles), a.common.seed, a.common.threads);
    emit(a.out, mhp::format_envelope_csv(env));
    return 0;
}

// ---------------------------------------------------------------------------
// Config expansion
// ---------------------------------------------------------------------------

std::string config_scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    if (v.is_number_float()) return mhp::format_double(v.get<double>());
    throw mhp::Error(mhp::ErrorCode::ParseError, "config values must be strings, numbers, booleans or arrays of those");
}

/// Turns `{"particles": 500, "verbose": true, "quantiles": [0.025, 0.975]}`
/// into `--particles 500 --verbose --quantiles 0.025,0.975`. A nested object
/// keyed by the subcommand name is merged over the top level.
std::vector<std::string> config_arguments(const std::string& path, const std::string& subcommand,
                                          const std::vector<std::string>& subcommands) {
    const nlohmann::json j = mhp::parse_json_file(path);
    if (!j.is_object()) throw mhp::Error(mhp::ErrorCode::ParseError, path + ": config must be a JSON object");
    nlohmann::json merged = nlohmann::json::object();
    for (const auto& [key, value] : j.items())
        if (std::find(subcommands.begin(), subcommands.end(), key) == subcommands.end()) merged[key] = value;
    if (j.contains(subcommand) && j.at(subcommand).is_object())
        for (const auto& [key, value] : j.at(subcommand).items()) merged[key] = value;
    std::vector<std::string> args;
    for (const auto& [key, value] : merged.items()) {
        if (key == "config") continue;
        const std::string flag = key.rfind("--", 0) == 0 ? key : "--" + key;
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back(flag);
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& item : value) joined += (joined.empty() ? "" : ",") + config_scalar(item);
            args.push_back(flag);
            args.push_back(joined);
        } else if (!value.is_null()) {
            args.push_back(flag);
            args.push_back(config_scalar(value));
        }
    }
    return args;
}

std::vector<std::string> expand_config(int argc, char** argv, const std::vector<std::string>& subcommands) {
    std::vector<std::string> args(argv + 1, argv + argc);
    const auto sub = std::find_first_of(args.begin(), args.end(), subcommands.begin(), subcommands.end());
    if (sub == args.end()) return args;
    std::string config;
    for (auto it = sub + 1; it != args.end(); ++it) {
        if (*it == "--config" && it + 1 != args.end()) config = *(it + 1);
        if (it->rfind("--config=", 0) == 0) config = it->substr(9);
    }
    if (config.empty() || !std::filesystem::exists(config)) return args;
    const std::vector<std::string> extra = config_arguments(config, *sub, subcommands);
    args.insert(sub + 1, extra.begin(), extra.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multivariate Hawkes processes from interval-censored counts"};
    app.name("mhp");
    app.set_version_flag("--version", "mhp 0.1.0");
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Simulate one path, optionally aggregated to interval counts");
    add_common(s, sim.common, true);
    s->add_option("--theta", sim.theta, "Parameter JSON")->required()->check(CLI::ExistingFile);
    s->add_option("--horizon,-T", sim.horizon, "Observation horizon T")->required()->check(CLI::PositiveNumber);
    s->add_option("--out", sim.out, "Event CSV (time,type)")->required();
    s->add_option("--aggregate", sim.aggregate, "Window width, or a grid CSV with header 't'");
    s->add_option("--counts-out", sim.counts_out, "Counts CSV; defaults to <out>_counts.csv");
    s->add_option("--schema", sim.schema, "Counts CSV schema")
        ->capture_default_str()
        ->check(CLI::IsMember({"boundaries", "daily"}));

    LoglikArgs ll;
    auto* l = app.add_subcommand("loglik", "Repeated SMC estimates of the interval-count log-likelihood");
    add_common(l, ll.common, true);
    add_smc(l, ll.smc);
    l->add_option("--counts", ll.counts, "Counts CSV")->required()->check(CLI::ExistingFile);
    l->add_option("--schema", ll.schema, "Counts CSV schema")
        ->capture_default_str()
        ->check(CLI::IsMember({"auto", "boundaries", "daily"}));
    l->add_option("--theta", ll.theta, "Parameter JSON")->required()->check(CLI::ExistingFile);
    l->add_option("--reps,-R", ll.reps, "Number of independent estimates")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    l->add_option("--scale", ll.scale, "Print log-likelihoods or likelihoods")
        ->capture_default_str()
        ->check(CLI::IsMember({"log", "linear"}));
    l->add_option("--out", ll.out, "Output file; stdout when omitted");

    FitArgs fit;
    auto* f = app.add_subcommand("fit", "Particle marginal Metropolis-Hastings on interval counts");
    add_common(f, fit.common, true);
    add_smc(f, fit.smc);
    f->add_option("--counts", fit.counts, "Counts CSV")->required()->check(CLI::ExistingFile);
    f->add_option("--schema", fit.schema, "Counts CSV schema")
        ->capture_default_str()
        ->check(CLI::IsMember({"auto", "boundaries", "daily"}));
    f->add_option("--init", fit.init, "Starting parameter JSON; counts-based heuristic when omitted")
        ->check(CLI::ExistingFile);
    f->add_option("--iters,-N", fit.iterations, "Chain iterations")->capture_default_str()->check(CLI::PositiveNumber);
    f->add_option("--delta", fit.delta, "Random-walk standard deviation")->capture_default_str()->check(CLI::PositiveNumber);
    f->add_flag("--delta-is-variance", fit.delta_is_variance, "Read --delta as a variance");
    f->add_flag("--log-scale", fit.log_scale, "Multiplicative random walk on log parameters");
    f->add_option("--burn-in", fit.burn_in, "Fraction of the chain discarded before summarizing")
        ->capture_default_str()
        ->check(kFraction);
    f->add_option("--chain", fit.chain, "Chain output, one JSON record per line")->required();
    f->add_option("--summary", fit.summary, "Summary CSV (parameter,estimate,se,ci_low,ci_high)")->required();

    SummarizeArgs sm;
    auto* m = app.add_subcommand("summarize", "Recompute the summary table from a chain file");
    add_common(m, sm.common, false);
    m->add_option("--chain", sm.chain, "Chain JSON-lines file")->required()->check(CLI::ExistingFile);
    m->add_option("--burn-in", sm.burn_in, "Fraction of the chain discarded")
        ->capture_default_str()
        ->check(kFraction);
    m->add_option("--out", sm.out, "Output file; stdout when omitted");

    DiagnoseArgs dg;
    auto* d = app.add_subcommand("diagnose", "Acceptance, autocorrelation, ESS, trace and histogram tables");
    add_common(d, dg.common, false);
    d->add_option("--chain", dg.chain, "Chain JSON-lines file")->required()->check(CLI::ExistingFile);
    d->add_option("--report", dg.report, "JSON report; stdout when omitted");
    d->add_option("--trace", dg.trace, "Trace CSV");
    d->add_option("--histogram", dg.histogram, "Histogram CSV of post-burn-in samples");
    d->add_option("--burn-in", dg.burn_in, "Burn-in fraction for the histogram")
        ->capture_default_str()
        ->check(kFraction);
    d->add_option("--bins", dg.bins, "Histogram bins")->capture_default_str()->check(CLI::PositiveNumber);

    MleArgs mle;
    auto* x = app.add_subcommand("mle", "Maximum likelihood from exact event times");
    add_common(x, mle.common, false);
    x->add_option("--events", mle.events, "Event CSV (time,type)")->required()->check(CLI::ExistingFile);
    x->add_option("--horizon,-T", mle.horizon, "Observation horizon T")->required()->check(CLI::PositiveNumber);
    x->add_option("--init", mle.init, "Starting parameter JSON; heuristic when omitted")->check(CLI::ExistingFile);
    x->add_option("--out", mle.out, "Output CSV (parameter,estimate,se); stdout when omitted");

    EnvelopeArgs env;
    auto* e = app.add_subcommand("envelope", "Pointwise quantile bands of simulated cumulative counts");
    add_common(e, env.common, true);
    e->add_option("--theta", env.theta, "Parameter JSON")->required()->check(CLI::ExistingFile);
    e->add_option("--grid", env.grid, "Window width, or a grid CSV with header 't'")->required();
    e->add_option("--horizon,-T", env.horizon, "Horizon for a window width")->check(CLI::PositiveNumber);
    e->add_option("--reps,-S", env.reps, "Simulated paths")->capture_default_str()->check(CLI::PositiveNumber);
    e->add_option("--quantiles", env.quantiles, "Comma-separated quantile levels")->capture_default_str();
    e->add_option("--out", env.out, "Output CSV; stdout when omitted");

    std::vector<std::string> names;
    for (const auto* sub : app.get_subcommands({})) names.push_back(sub->get_name());

    try {
        std::vector<std::string> args = expand_config(argc, argv, names);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kExitUsage;
    } catch (const mhp::Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*s) return run_simulate(sim);
        if (*l) return run_loglik(ll);
        if (*f) return run_fit(fit);
        if (*m) return run_summarize(sm);
        if (*d) return run_diagnose(dg);
        if (*x) return run_mle(mle);
        if (*e) return run_envelope(env);
    } catch (const mhp::Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return mhp::is_validation_error(err.code()) ? kExitValidation : kExitRuntime;
    } catch (const RuntimeFailure& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
