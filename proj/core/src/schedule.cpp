#include "nofis/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nofis/errors.hpp"

namespace nofis {

double ThresholdSchedule::margin_of(int m) const {
    const Bound& final = levels.back();
    const Bound& level = levels[m];
    if (std::isfinite(final.upper)) return level.upper - final.upper;
    return final.lower - level.lower;
}

void ThresholdSchedule::validate() const {
    if (levels.empty()) throw std::invalid_argument("schedule: needs at least one level");
    for (const Bound& b : levels) {
        if (std::isnan(b.lower) || std::isnan(b.upper) || !(b.lower <= b.upper)) {
            throw std::invalid_argument("schedule: malformed level interval");
        }
    }
    for (std::size_t m = 0; m + 1 < levels.size(); ++m) {
        const Bound& outer = levels[m];
        const Bound& inner = levels[m + 1];
        const bool nested = inner.lower >= outer.lower && inner.upper <= outer.upper;
        const bool strict = inner.lower > outer.lower || inner.upper < outer.upper;
        if (!nested || !strict) {
            throw std::invalid_argument("schedule: levels must tighten strictly");
        }
    }
}

ThresholdSchedule ThresholdSchedule::from_margins(const std::vector<double>& margins,
                                                  Bound final_bound) {
    if (margins.empty() || margins.back() != 0.0) {
        throw std::invalid_argument("schedule: margins must end at 0");
    }
    ThresholdSchedule s;
    s.levels.reserve(margins.size());
    for (double a : margins) {
        if (!std::isfinite(a) || a < 0.0) {
            throw std::invalid_argument("schedule: margins must be finite and nonnegative");
        }
        s.levels.push_back(final_bound.relaxed(a));
    }
    s.validate();
    return s;
}

ThresholdSchedule ThresholdSchedule::from_levels(const std::vector<double>& g_levels,
                                                 Bound final_bound) {
    if (std::isfinite(final_bound.lower) && std::isfinite(final_bound.upper)) {
        throw std::invalid_argument("schedule: band bounds need margins or explicit pairs, "
                                    "not single-sided g levels");
    }
    std::vector<double> margins;
    margins.reserve(g_levels.size());
    for (double a : g_levels) {
        margins.push_back(std::isfinite(final_bound.upper) ? a - final_bound.upper
                                                           : final_bound.lower - a);
    }
    return from_margins(margins, final_bound);
}

ThresholdSchedule ThresholdSchedule::from_bounds(std::vector<Bound> levels) {
    ThresholdSchedule s;
    s.levels = std::move(levels);
    s.validate();
    return s;
}

ThresholdSchedule suggest_schedule(const Problem& problem, int steps, long long pilot_n, Rng& rng) {
    if (steps < 1) throw std::invalid_argument("suggest_schedule: steps must be >= 1");
    if (steps == 1) return ThresholdSchedule::from_margins({0.0}, problem.bound());
    if (pilot_n < 1000) throw std::invalid_argument("suggest_schedule: pilot_n must be >= 1000");

    std::vector<double> margins(pilot_n);
    Eigen::VectorXd x(problem.dim());
    for (long long i = 0; i < pilot_n; ++i) {
        rng.fill_normal(x);
        margins[i] = problem.margin(problem.eval_g(x));
    }
    std::sort(margins.begin(), margins.end());
    if (margins.front() == margins.back()) {
        throw ScheduleError("suggest_schedule: degenerate pilot, all g values equal");
    }

    // Empirical decade quantiles of the margin where the pilot resolves them.
    constexpr long long kMinTail = 10;
    std::vector<double> cand(steps - 1, std::numeric_limits<double>::quiet_NaN());
    for (int m = 1; m < steps; ++m) {
        const double frac = std::pow(10.0, -m);
        const long long k =
            static_cast<long long>(std::llround(frac * static_cast<double>(pilot_n)));
        if (k < kMinTail) break;
        const double q = margins[static_cast<std::size_t>(k - 1)];
        if (q > 0.0) cand[m - 1] = q;
    }

    // First level fallback when even the 0.1 quantile is already inside the
    // event: anchor at half of the positive-margin mass.
    if (!(cand[0] > 0.0)) {
        const auto first_pos = std::upper_bound(margins.begin(), margins.end(), 0.0);
        if (first_pos == margins.end()) {
            throw ScheduleError("suggest_schedule: no pilot sample outside the event");
        }
        const std::size_t pos_start = static_cast<std::size_t>(first_pos - margins.begin());
        cand[0] = margins[pos_start + (margins.size() - pos_start) / 2];
    }

    // Continue geometrically toward the bound past pilot resolution, using the
    // trend of the last two resolved levels.
    double ratio = 0.3;
    for (int m = 1; m + 1 < steps; ++m) {
        if (std::isnan(cand[m]) || cand[m] <= 0.0 || cand[m] >= cand[m - 1]) {
            if (m >= 2 && !std::isnan(cand[m - 2]) && cand[m - 2] > 0.0) {
                ratio = std::clamp(cand[m - 1] / cand[m - 2], 0.05, 0.9);
            }
            cand[m] = cand[m - 1] * ratio;
        } else {
            ratio = std::clamp(cand[m] / cand[m - 1], 0.05, 0.9);
        }
    }

    cand.push_back(0.0);
    return ThresholdSchedule::from_margins(cand, problem.bound());
}

}  // namespace nofis
