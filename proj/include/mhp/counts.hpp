#pragma once

#include "mhp/error.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mhp {

/// Observation boundaries 0 = t_0 < t_1 < ... < t_I = T.
struct AggregationGrid {
    std::vector<double> boundaries;

    [[nodiscard]] std::size_t intervals() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
    [[nodiscard]] double horizon() const { return boundaries.back(); }

    /// Windows of the given width from 0; the last window ends at the horizon
    /// and may be shorter.
    [[nodiscard]] static AggregationGrid uniform(double horizon, double width) {
        if (!(width > 0.0) || !(horizon > 0.0))
            throw Error(ErrorCode::InvalidSpec, "grid width and horizon must be positive");
        AggregationGrid grid;
        grid.boundaries.push_back(0.0);
        for (std::size_t i = 1;; ++i) {
            const double t = static_cast<double>(i) * width;
            if (t >= horizon * (1.0 - 1e-12)) break;
            grid.boundaries.push_back(t);
        }
        grid.boundaries.push_back(horizon);
        return grid;
    }

    void check() const {
        if (boundaries.size() < 2) throw Error(ErrorCode::InvalidSpec, "grid needs at least one interval");
        if (boundaries.front() != 0.0) throw Error(ErrorCode::InvalidSpec, "grid must start at 0");
        for (std::size_t i = 1; i < boundaries.size(); ++i)
            if (!(boundaries[i] > boundaries[i - 1]))
                throw Error(ErrorCode::InvalidSpec, "grid boundaries must increase strictly (row " + std::to_string(i) + ")");
    }

    friend bool operator==(const AggregationGrid&, const AggregationGrid&) = default;
};

/// I x M matrix of per-window, per-type event counts.
struct IntervalCounts {
    std::vector<double> boundaries;
    std::size_t dimension = 0;
    std::vector<int> counts;  // row-major, I rows of `dimension` entries
    /// First calendar date when read from the daily schema (ISO-8601).
    std::optional<std::string> start_date;

    [[nodiscard]] std::size_t intervals() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
    [[nodiscard]] double horizon() const { return boundaries.back(); }
    [[nodiscard]] double start(std::size_t i) const { return boundaries[i]; }
    [[nodiscard]] double end(std::size_t i) const { return boundaries[i + 1]; }

    [[nodiscard]] std::span<const int> row(std::size_t i) const {
        return {counts.data() + i * dimension, dimension};
    }
    [[nodiscard]] std::span<int> row(std::size_t i) { return {counts.data() + i * dimension, dimension}; }

    [[nodiscard]] int& at(std::size_t i, std::size_t m) { return counts[i * dimension + m]; }
    [[nodiscard]] int at(std::size_t i, std::size_t m) const { return counts[i * dimension + m]; }

    [[nodiscard]] std::vector<long> type_totals() const {
        std::vector<long> totals(dimension, 0);
        for (std::size_t i = 0; i < intervals(); ++i)
            for (std::size_t m = 0; m < dimension; ++m) totals[m] += at(i, m);
        return totals;
    }

    [[nodiscard]] static IntervalCounts zeros(const AggregationGrid& grid, std::size_t dimension) {
        IntervalCounts c;
        c.boundaries = grid.boundaries;
        c.dimension = dimension;
        c.counts.assign(grid.intervals() * dimension, 0);
        return c;
    }

    void check() const {
        AggregationGrid{boundaries}.check();
        if (dimension == 0) throw Error(ErrorCode::InvalidSpec, "counts need at least one type");
        if (counts.size() != intervals() * dimension)
            throw Error(ErrorCode::ShapeMismatch, "count matrix does not match the grid");
        for (std::size_t k = 0; k < counts.size(); ++k)
            if (counts[k] < 0)
                throw Error(ErrorCode::NegativeCount, "row " + std::to_string(k / dimension + 1));
    }

    friend bool operator==(const IntervalCounts&, const IntervalCounts&) = default;
};

}  // namespace mhp
