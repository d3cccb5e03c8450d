#include "nofis/heatmap.hpp"

#include <fstream>
#include <stdexcept>

#include "nofis/errors.hpp"
#include "nofis/math_util.hpp"

namespace nofis {

void HeatmapGrid::validate() const {
    if (steps_x < 50 || steps_y < 50) {
        throw std::invalid_argument("heatmap grid: need at least 50 steps per axis");
    }
    if (!(xmax > xmin) || !(ymax > ymin)) {
        throw std::invalid_argument("heatmap grid: empty extent");
    }
}

double Heatmap::total_mass() const {
    return density.sum() * grid.cell_width() * grid.cell_height();
}

double Heatmap::mass_fraction(const std::function<bool(double, double)>& inside) const {
    double in = 0.0, total = 0.0;
    for (int i = 0; i < grid.steps_x; ++i) {
        for (int j = 0; j < grid.steps_y; ++j) {
            total += density(i, j);
            if (inside(grid.x_center(i), grid.y_center(j))) in += density(i, j);
        }
    }
    return total > 0.0 ? in / total : 0.0;
}

Heatmap heatmap_from_flow(const FlowModel& model, const HeatmapGrid& grid) {
    grid.validate();
    if (model.dim != 2) {
        throw UnsupportedModeError("heatmap: flow model must be 2-D, got dim " +
                                   std::to_string(model.dim));
    }
    Heatmap h{grid, Eigen::MatrixXd(grid.steps_x, grid.steps_y)};
    // One column of grid points at a time keeps the inverse passes batched.
    Eigen::MatrixXd points(2, grid.steps_y);
    for (int i = 0; i < grid.steps_x; ++i) {
        for (int j = 0; j < grid.steps_y; ++j) {
            points(0, j) = grid.x_center(i);
            points(1, j) = grid.y_center(j);
        }
        const Eigen::VectorXd logq = flow_logdensity(model, points, model.layer_count());
        h.density.row(i) = logq.array().exp().transpose();
    }
    return h;
}

Heatmap heatmap_optimal_proposal(const Problem& problem, double p_golden,
                                 const HeatmapGrid& grid) {
    grid.validate();
    if (problem.dim() != 2) {
        throw UnsupportedModeError("heatmap: optimal proposal needs a 2-D problem");
    }
    if (!(p_golden > 0.0)) throw std::invalid_argument("heatmap: golden probability must be > 0");
    Heatmap h{grid, Eigen::MatrixXd::Zero(grid.steps_x, grid.steps_y)};
    Eigen::Vector2d x;
    for (int i = 0; i < grid.steps_x; ++i) {
        x(0) = grid.x_center(i);
        for (int j = 0; j < grid.steps_y; ++j) {
            x(1) = grid.y_center(j);
            if (problem.member(problem.eval_g_uncounted(x))) {
                h.density(i, j) = std::exp(std_normal_logpdf(x)) / p_golden;
            }
        }
    }
    return h;
}

void write_heatmap_csv(const Heatmap& heatmap, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("heatmap: cannot write " + path);
    out << "x,y,density\n";
    out.precision(12);
    for (int i = 0; i < heatmap.grid.steps_x; ++i) {
        for (int j = 0; j < heatmap.grid.steps_y; ++j) {
            out << heatmap.grid.x_center(i) << ',' << heatmap.grid.y_center(j) << ','
                << heatmap.density(i, j) << '\n';
        }
    }
    if (!out) throw FormatError("heatmap: write failed for " + path);
}

}  // namespace nofis
