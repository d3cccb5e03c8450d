#pragma once

#include <vector>

#include "nofis/problem.hpp"
#include "nofis/rng.hpp"

namespace nofis {

inline bool operator==(const Bound& a, const Bound& b) {
    return a.lower == b.lower && a.upper == b.upper;
}

/// Strictly tightening sequence of nested level sets ending at the event
/// bound itself, so the last level reproduces the event region exactly.
struct ThresholdSchedule {
    std::vector<Bound> levels;

    int steps() const { return static_cast<int>(levels.size()); }
    const Bound& level(int m) const { return levels[m]; }
    const Bound& final_level() const { return levels.back(); }

    /// Margin of level m relative to the final bound on its finite sides;
    /// only meaningful for symmetric relaxations.
    double margin_of(int m) const;

    /// Throws std::invalid_argument unless every level strictly tightens.
    void validate() const;

    /// Symmetric relaxations of `final_bound` by strictly decreasing margins;
    /// the last margin must be 0.
    static ThresholdSchedule from_margins(const std::vector<double>& margins, Bound final_bound);

    /// Raw g-space thresholds for single-sided bounds (e.g. decreasing upper
    /// levels a_m with a_M equal to the true bound).
    static ThresholdSchedule from_levels(const std::vector<double>& g_levels, Bound final_bound);

    static ThresholdSchedule from_bounds(std::vector<Bound> levels);
};

/// Pilot-based schedule suggestion. Draws pilot_n counted base samples, sets
/// intermediate level m to the empirical 10^-m quantile of the bound margin
/// where at least 10 pilot points resolve it, and continues geometrically
/// toward the bound beyond pilot resolution. The final level is always the
/// true bound. Throws ScheduleError when the pilot is degenerate (all margins
/// equal) and std::invalid_argument for pilot_n < 1000.
ThresholdSchedule suggest_schedule(const Problem& problem, int steps, long long pilot_n, Rng& rng);

}  // namespace nofis
