#pragma once

#include <Eigen/Core>

#include <functional>
#include <string>

#include "nofis/flow.hpp"
#include "nofis/problem.hpp"

namespace nofis {

struct HeatmapGrid {
    double xmin = -8.0, xmax = 8.0;
    double ymin = -8.0, ymax = 8.0;
    int steps_x = 400, steps_y = 400;

    void validate() const;  // at least 50 steps per axis
    double cell_width() const { return (xmax - xmin) / steps_x; }
    double cell_height() const { return (ymax - ymin) / steps_y; }
    double x_center(int i) const { return xmin + (i + 0.5) * cell_width(); }
    double y_center(int j) const { return ymin + (j + 0.5) * cell_height(); }
};

/// Density values at cell centers, plot-ready.
struct Heatmap {
    HeatmapGrid grid;
    Eigen::MatrixXd density;  // steps_x rows, steps_y cols

    double total_mass() const;
    /// Fraction of grid mass inside the predicate region.
    double mass_fraction(const std::function<bool(double, double)>& inside) const;
};

/// Model density on the grid via exact inverse evaluation; no characteristic
/// function calls. Requires a 2-D model (UnsupportedModeError otherwise).
Heatmap heatmap_from_flow(const FlowModel& model, const HeatmapGrid& grid);

/// The zero-variance proposal p(x) 1[x in event] / p_golden on the grid,
/// using uncounted g evaluations.
Heatmap heatmap_optimal_proposal(const Problem& problem, double p_golden, const HeatmapGrid& grid);

/// Comma-separated rows "x,y,density" with a one-line header.
void write_heatmap_csv(const Heatmap& heatmap, const std::string& path);

}  // namespace nofis
