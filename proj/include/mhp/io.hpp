#pragma once

#include "mhp/counts.hpp"
#include "mhp/exact.hpp"
#include "mhp/model.hpp"
#include "mhp/pmmh.hpp"
#include "mhp/smc.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mhp {

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

/// Shortest decimal that round-trips to the same double.
[[nodiscard]] inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

[[nodiscard]] inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[nodiscard]] inline std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        fields.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

[[nodiscard]] inline double parse_double(std::string_view s, const std::string& where) {
    s = trim(s);
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw Error(ErrorCode::ParseError, where + ": '" + std::string(s) + "' is not a number");
    return v;
}

[[nodiscard]] inline long parse_integer(std::string_view s, const std::string& where) {
    s = trim(s);
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw Error(ErrorCode::ParseError, where + ": '" + std::string(s) + "' is not an integer");
    return v;
}

[[nodiscard]] inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

[[nodiscard]] inline std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        lines.push_back(line);
    }
    return lines;
}

// ---------------------------------------------------------------------------
// Model and parameter JSON
// ---------------------------------------------------------------------------

[[nodiscard]] inline nlohmann::json model_to_json(const ModelSpec& spec) {
    using nlohmann::json;
    json j;
    j["format_version"] = kFormatVersion;
    j["dimension"] = spec.dimension;
    json baselines = json::array();
    for (const auto& b : spec.baselines) {
        if (b.family == BaselineFamily::Constant) {
            baselines.push_back({{"family", "constant"}});
        } else {
            baselines.push_back({{"family", "bspline"}, {"order", 2}, {"knots", b.knots}, {"horizon", b.horizon}});
        }
    }
    j["baselines"] = baselines;
    json kernels = json::array();
    for (std::size_t m = 0; m < spec.dimension; ++m) {
        json row = json::array();
        for (std::size_t c = 0; c < spec.dimension; ++c)
            row.push_back(spec.kernel(m, c) == KernelFamily::Exponential ? "exponential" : "gamma");
        kernels.push_back(row);
    }
    j["kernels"] = kernels;
    const ParameterLayout layout(spec);
    json ties = json::array();
    for (const auto& group : spec.ties) {
        json g = json::array();
        for (std::size_t i : group) g.push_back(layout.slot(i).name);
        ties.push_back(g);
    }
    j["ties"] = ties;
    return j;
}

/// Tie members may be full-layout indices or parameter names ("beta[1,2]").
[[nodiscard]] inline ModelSpec model_from_json(const nlohmann::json& j) {
    try {
        ModelSpec spec;
        spec.dimension = j.at("dimension").get<std::size_t>();
        if (spec.dimension == 0) throw Error(ErrorCode::InvalidSpec, "dimension must be at least 1");
        const auto& baselines = j.at("baselines");
        if (baselines.size() != spec.dimension) throw Error(ErrorCode::InvalidSpec, "one baseline per type is required");
        for (const auto& b : baselines) {
            BaselineSpec bs;
            const std::string family = b.at("family").get<std::string>();
            if (family == "constant") {
                bs.family = BaselineFamily::Constant;
            } else if (family == "bspline") {
                bs.family = BaselineFamily::BSpline;
                if (b.value("order", 2) != 2) throw Error(ErrorCode::InvalidSpec, "only order-2 splines are supported");
                bs.knots = b.at("knots").get<std::vector<double>>();
                bs.horizon = b.at("horizon").get<double>();
                double prev = 0.0;
                for (double k : bs.knots) {
                    if (!(k > prev) || !(k < bs.horizon))
                        throw Error(ErrorCode::InvalidSpec, "spline knots must be strictly increasing inside (0, horizon)");
                    prev = k;
                }
            } else {
                throw Error(ErrorCode::InvalidSpec, "unknown baseline family '" + family + "'");
            }
            spec.baselines.push_back(bs);
        }
        const auto& kernels = j.at("kernels");
        auto family_of = [](const std::string& name) {
            if (name == "exponential") return KernelFamily::Exponential;
            if (name == "gamma") return KernelFamily::Gamma;
            throw Error(ErrorCode::InvalidSpec, "unknown kernel family '" + name + "'");
        };
        if (kernels.is_string()) {
            spec.kernels.assign(spec.dimension * spec.dimension, family_of(kernels.get<std::string>()));
        } else {
            if (kernels.size() != spec.dimension) throw Error(ErrorCode::InvalidSpec, "kernel matrix has the wrong shape");
            for (const auto& row : kernels) {
                if (row.size() != spec.dimension) throw Error(ErrorCode::InvalidSpec, "kernel matrix has the wrong shape");
                for (const auto& k : row) spec.kernels.push_back(family_of(k.get<std::string>()));
            }
        }
        const ParameterLayout untied(spec);
        if (j.contains("ties")) {
            for (const auto& g : j.at("ties")) {
                std::vector<std::size_t> group;
                for (const auto& member : g) {
                    if (member.is_string()) {
                        const auto found = untied.find(member.get<std::string>());
                        if (!found) throw Error(ErrorCode::InvalidSpec, "unknown parameter '" + member.get<std::string>() + "' in ties");
                        group.push_back(*found);
                    } else {
                        group.push_back(member.get<std::size_t>());
                    }
                }
                spec.ties.push_back(group);
            }
        }
        (void)ParameterLayout(spec);  // validates tie groups
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("model JSON: ") + e.what());
    }
}

[[nodiscard]] inline nlohmann::json parameters_to_json(const ModelSpec& spec, const ParameterVector& theta) {
    using nlohmann::json;
    check_shape(spec, theta);
    json j;
    j["format_version"] = kFormatVersion;
    json nu = json::array();
    for (std::size_t m = 0; m < spec.dimension; ++m) {
        if (spec.baselines[m].family == BaselineFamily::Constant)
            nu.push_back(theta.nu[m][0]);
        else
            nu.push_back(theta.nu[m]);
    }
    j["nu"] = nu;
    json eta = json::array(), beta = json::array(), kappa = json::array(), delta = json::array();
    bool any_exp = false, any_gamma = false;
    for (std::size_t m = 0; m < spec.dimension; ++m) {
        json er = json::array(), br = json::array(), kr = json::array(), dr = json::array();
        for (std::size_t c = 0; c < spec.dimension; ++c) {
            er.push_back(theta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c)));
            const KernelParams& k = theta.kernel_at(m, c);
            if (spec.kernel(m, c) == KernelFamily::Exponential) {
                any_exp = true;
                br.push_back(k.beta);
                kr.push_back(nullptr);
                dr.push_back(nullptr);
            } else {
                any_gamma = true;
                br.push_back(nullptr);
                kr.push_back(k.shape);
                dr.push_back(k.scale);
            }
        }
        eta.push_back(er);
        beta.push_back(br);
        kappa.push_back(kr);
        delta.push_back(dr);
    }
    j["eta"] = eta;
    if (any_exp) j["beta"] = beta;
    if (any_gamma) {
        j["kappa"] = kappa;
        j["delta"] = delta;
    }
    return j;
}

[[nodiscard]] inline ParameterVector parameters_from_json(const ModelSpec& spec, const nlohmann::json& j) {
    try {
        ParameterVector theta = shaped_parameters(spec);
        const auto& nu = j.at("nu");
        if (nu.size() != spec.dimension) throw Error(ErrorCode::ShapeMismatch, "nu needs one entry per type");
        for (std::size_t m = 0; m < spec.dimension; ++m) {
            if (nu[m].is_array()) {
                theta.nu[m] = nu[m].get<std::vector<double>>();
            } else {
                std::fill(theta.nu[m].begin(), theta.nu[m].end(), nu[m].get<double>());
            }
            if (theta.nu[m].size() != spec.baselines[m].coefficient_count())
                throw Error(ErrorCode::ShapeMismatch, "baseline coefficients for type " + std::to_string(m + 1));
        }
        auto matrix_entry = [&](const char* key, std::size_t m, std::size_t c) {
            const auto& mat = j.at(key);
            if (mat.size() != spec.dimension || mat[m].size() != spec.dimension)
                throw Error(ErrorCode::ShapeMismatch, std::string(key) + " has the wrong shape");
            return mat[m][c].get<double>();
        };
        for (std::size_t m = 0; m < spec.dimension; ++m) {
            for (std::size_t c = 0; c < spec.dimension; ++c) {
                theta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c)) = matrix_entry("eta", m, c);
                KernelParams& k = theta.kernel_at(m, c);
                if (spec.kernel(m, c) == KernelFamily::Exponential) {
                    k.beta = matrix_entry("beta", m, c);
                } else {
                    k.shape = matrix_entry("kappa", m, c);
                    k.scale = matrix_entry("delta", m, c);
                }
            }
        }
        return theta;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("parameter JSON: ") + e.what());
    }
}

[[nodiscard]] inline nlohmann::json parse_json_file(const std::string& path) {
    const std::string text = read_text_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Interval counts CSV
// ---------------------------------------------------------------------------

enum class CountsSchema { Daily, Boundaries };

namespace detail {

inline std::chrono::sys_days parse_date(const std::string& text, std::size_t row) {
    int y = 0;
    unsigned mo = 0, d = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &mo, &d, &tail) != 3)
        throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + ": '" + text + "' is not an ISO-8601 date");
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
    if (!ymd.ok()) throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + ": '" + text + "' is not a calendar date");
    return std::chrono::sys_days{ymd};
}

inline std::string format_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

}  // namespace detail

/// Daily schema: `date,count_1,...,count_M`, one row per consecutive calendar
/// day; window i is (i-1, i] days from the first date.
/// Boundaries schema: `t_start,t_end,count_1,...,count_M` with contiguous rows
/// starting at 0.
[[nodiscard]] inline IntervalCounts parse_counts_csv(const std::string& text, CountsSchema schema) {
    const std::vector<std::string> lines = lines_of(text);
    if (lines.empty()) throw Error(ErrorCode::ParseError, "counts file is empty");
    const std::vector<std::string> header = split_csv(lines[0]);
    const std::size_t lead = schema == CountsSchema::Daily ? 1 : 2;
    if (header.size() <= lead) throw Error(ErrorCode::ParseError, "header has no count columns");
    if (schema == CountsSchema::Daily && header[0] != "date")
        throw Error(ErrorCode::ParseError, "daily schema header must start with 'date'");
    if (schema == CountsSchema::Boundaries && (header[0] != "t_start" || header[1] != "t_end"))
        throw Error(ErrorCode::ParseError, "boundaries schema header must start with 't_start,t_end'");
    for (std::size_t c = lead; c < header.size(); ++c)
        if (header[c] != "count_" + std::to_string(c - lead + 1))
            throw Error(ErrorCode::ParseError, "unexpected column '" + header[c] + "'");
    IntervalCounts counts;
    counts.dimension = header.size() - lead;
    counts.boundaries.push_back(0.0);
    std::chrono::sys_days first{}, prev{};
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const std::vector<std::string> fields = split_csv(lines[r]);
        const std::string where = "row " + std::to_string(r);
        if (fields.size() != header.size())
            throw Error(ErrorCode::RaggedRow, where + " has " + std::to_string(fields.size()) + " fields, expected " +
                                                  std::to_string(header.size()));
        if (schema == CountsSchema::Daily) {
            const std::chrono::sys_days day = detail::parse_date(fields[0], r);
            if (r == 1) {
                first = day;
                counts.start_date = detail::format_date(day);
            } else if ((day - prev).count() != 1) {
                throw Error(ErrorCode::GapInDates, where + ": " + fields[0] + " does not follow " + detail::format_date(prev));
            }
            prev = day;
            counts.boundaries.push_back(static_cast<double>((day - first).count() + 1));
        } else {
            const double t0 = parse_double(fields[0], where);
            const double t1 = parse_double(fields[1], where);
            if (t0 != counts.boundaries.back())
                throw Error(ErrorCode::NonContiguousBoundaries, where + ": t_start " + fields[0] + " does not equal the previous t_end");
            if (!(t1 > t0)) throw Error(ErrorCode::NonContiguousBoundaries, where + ": window has non-positive width");
            counts.boundaries.push_back(t1);
        }
        for (std::size_t c = lead; c < fields.size(); ++c) {
            const long v = parse_integer(fields[c], where);
            if (v < 0) throw Error(ErrorCode::NegativeCount, where + ", column " + header[c]);
            counts.counts.push_back(static_cast<int>(v));
        }
    }
    if (counts.intervals() == 0) throw Error(ErrorCode::ParseError, "counts file has no data rows");
    return counts;
}

[[nodiscard]] inline IntervalCounts read_counts_csv(const std::string& path, CountsSchema schema) {
    return parse_counts_csv(read_text_file(path), schema);
}

[[nodiscard]] inline std::string format_counts_csv(const IntervalCounts& counts, CountsSchema schema) {
    counts.check();
    std::string out = schema == CountsSchema::Daily ? "date" : "t_start,t_end";
    for (std::size_t m = 0; m < counts.dimension; ++m) out += ",count_" + std::to_string(m + 1);
    out += '\n';
    std::chrono::sys_days first{};
    if (schema == CountsSchema::Daily) {
        for (std::size_t i = 0; i < counts.intervals(); ++i)
            if (counts.end(i) != static_cast<double>(i + 1))
                throw Error(ErrorCode::InvalidSpec, "daily schema needs unit windows starting at 0");
        first = detail::parse_date(counts.start_date.value_or("1970-01-01"), 1);
    }
    for (std::size_t i = 0; i < counts.intervals(); ++i) {
        if (schema == CountsSchema::Daily)
            out += detail::format_date(first + std::chrono::days{static_cast<long>(i)});
        else
            out += format_double(counts.start(i)) + "," + format_double(counts.end(i));
        for (std::size_t m = 0; m < counts.dimension; ++m) out += "," + std::to_string(counts.at(i, m));
        out += '\n';
    }
    return out;
}

inline void write_counts_csv(const std::string& path, const IntervalCounts& counts, CountsSchema schema) {
    write_text_file(path, format_counts_csv(counts, schema));
}

/// Grid file: header `t`, then one boundary per row from 0 to the horizon.
[[nodiscard]] inline AggregationGrid parse_grid_csv(const std::string& text) {
    const std::vector<std::string> lines = lines_of(text);
    if (lines.empty() || trim(lines[0]) != "t") throw Error(ErrorCode::ParseError, "grid file header must be 't'");
    AggregationGrid grid;
    for (std::size_t r = 1; r < lines.size(); ++r) grid.boundaries.push_back(parse_double(lines[r], "row " + std::to_string(r)));
    grid.check();
    return grid;
}

// ---------------------------------------------------------------------------
// Events CSV
// ---------------------------------------------------------------------------

/// `time,type` with 1-based types.
[[nodiscard]] inline std::string format_events_csv(const EventSequence& path) {
    std::string out = "time,type\n";
    for (std::size_t k = 0; k < path.size(); ++k)
        out += format_double(path.times[k]) + "," + std::to_string(path.types[k] + 1) + "\n";
    return out;
}

[[nodiscard]] inline EventSequence parse_events_csv(const std::string& text, double horizon, std::size_t dimension) {
    const std::vector<std::string> lines = lines_of(text);
    if (lines.empty() || split_csv(lines[0]) != std::vector<std::string>{"time", "type"})
        throw Error(ErrorCode::ParseError, "events header must be 'time,type'");
    EventSequence path;
    path.horizon = horizon;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split_csv(lines[r]);
        const std::string where = "row " + std::to_string(r);
        if (fields.size() != 2) throw Error(ErrorCode::RaggedRow, where);
        path.push_back(parse_double(fields[0], where), static_cast<int>(parse_integer(fields[1], where)) - 1);
    }
    check_events(path, dimension);
    return path;
}

// ---------------------------------------------------------------------------
// Chains and summaries
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

}  // namespace detail

/// One JSON object per line: iteration, theta (free layout), log_lik_hat
/// (null for -inf), accepted.
[[nodiscard]] inline std::string format_chain_record(const ChainRecord& r) {
    nlohmann::json j;
    j["iteration"] = r.iteration;
    j["theta"] = r.theta;
    j["log_lik_hat"] = detail::number_or_null(r.log_lik_hat);
    j["accepted"] = r.accepted;
    return j.dump();
}

[[nodiscard]] inline ChainRecord parse_chain_record(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        ChainRecord r;
        r.iteration = j.at("iteration").get<std::size_t>();
        r.theta = j.at("theta").get<std::vector<double>>();
        r.log_lik_hat = j.at("log_lik_hat").is_null() ? kNegInf : j.at("log_lik_hat").get<double>();
        r.accepted = j.at("accepted").get<bool>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("chain record: ") + e.what());
    }
}

[[nodiscard]] inline std::vector<ChainRecord> read_chain_jsonl(const std::string& path) {
    std::vector<ChainRecord> chain;
    for (const auto& line : lines_of(read_text_file(path))) chain.push_back(parse_chain_record(line));
    return chain;
}

[[nodiscard]] inline std::string format_summary_csv(const std::vector<ParameterSummary>& rows) {
    std::string out = "parameter,estimate,se,ci_low,ci_high\n";
    for (const auto& s : rows)
        out += s.name + "," + format_double(s.estimate) + "," + format_double(s.se) + "," + format_double(s.ci_low) + "," +
               format_double(s.ci_high) + "\n";
    return out;
}

[[nodiscard]] inline nlohmann::json smc_result_to_json(const SmcResult& r) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["log_likelihood"] = detail::number_or_null(r.log_likelihood);
    nlohmann::json factors = nlohmann::json::array();
    for (double f : r.per_interval_log_factors) factors.push_back(detail::number_or_null(f));
    j["per_interval_log_factors"] = factors;
    j["ess_trace"] = r.ess_trace;
    j["degenerate"] = r.degenerate;
    return j;
}

[[nodiscard]] inline std::string format_mle_csv(const ModelSpec& spec, const MleResult& fit) {
    const ParameterLayout layout(spec);
    const std::vector<double> flat = to_flat(spec, fit.theta);
    std::string out = "parameter,estimate,se\n";
    for (std::size_t f = 0; f < flat.size(); ++f)
        out += layout.free_name(f) + "," + format_double(flat[f]) + "," + format_double(fit.standard_errors[f]) + "\n";
    return out;
}

/// `t,type,q_<level>...` rows of cumulative-count quantiles.
[[nodiscard]] inline std::string format_envelope_csv(const Envelope& env) {
    std::string out = "t,type";
    for (double q : env.quantiles) out += ",q_" + format_double(q);
    out += '\n';
    for (std::size_t i = 0; i < env.times.size(); ++i) {
        for (std::size_t m = 0; m < env.dimension; ++m) {
            out += format_double(env.times[i]) + "," + std::to_string(m + 1);
            for (std::size_t q = 0; q < env.quantiles.size(); ++q) out += "," + format_double(env.at(i, m, q));
            out += '\n';
        }
    }
    return out;
}

}  // namespace mhp
