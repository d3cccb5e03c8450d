#include "nofis/oracle.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "nofis/errors.hpp"
#include "nofis/math_util.hpp"
#include "nofis/rng.hpp"

namespace nofis {

double log_error(double p_est, double p_golden) {
    if (!(p_golden > 0.0)) throw std::invalid_argument("log_error: golden probability must be > 0");
    if (p_est < 0.0 || std::isnan(p_est)) {
        throw std::invalid_argument("log_error: estimate must be nonnegative");
    }
    return std::abs(std::log10(std::max(p_est, 1e-20)) - std::log10(p_golden));
}

std::string OracleRequest::key(const std::string& problem) const {
    switch (mode) {
        case OracleMode::Analytic:
            return problem + "/analytic";
        case OracleMode::Quadrature2d:
            return problem + "/quadrature2d(step=" + std::to_string(quad_step) + ")";
        case OracleMode::Mc:
            return problem + "/mc(n=" + std::to_string(mc_n) +
                   ",seed=" + std::to_string(mc_seed) + ")";
    }
    return problem + "/unknown";
}

namespace {

Golden analytic_golden(const Problem& problem) {
    const std::string& name = problem.name();
    if (name == "cube") {
        // P[all 6 coordinates >= 1.8] under independent standard normals.
        return {std::pow(std_normal_cdf(-1.8), 6.0), "analytic"};
    }
    if (name == "halfspace1d") {
        return {std_normal_cdf(-1.8), "analytic"};
    }
    if (name == "ring") {
        // |x|^2 is chi-squared with 2 dof, an Exp(1/2).
        const Bound& b = problem.bound();
        return {std::exp(-b.lower / 2.0) - std::exp(-b.upper / 2.0), "analytic"};
    }
    throw UnsupportedModeError("golden_oracle: no analytic value for " + name);
}

Golden quadrature_golden(const Problem& problem, double step) {
    if (problem.dim() != 2) {
        throw UnsupportedModeError("golden_oracle: quadrature2d needs a 2-D problem, " +
                                   problem.name() + " has dim " + std::to_string(problem.dim()));
    }
    if (!(step > 0.0)) throw std::invalid_argument("golden_oracle: quad_step must be > 0");
    std::vector<Box2d> boxes = problem.quadrature_boxes();
    if (boxes.empty()) boxes.push_back({-8.0, 8.0, -8.0, 8.0});

    double mass = 0.0;
    Eigen::Vector2d x;
    for (const Box2d& box : boxes) {
        const long long nx = static_cast<long long>(std::ceil((box.xmax - box.xmin) / step));
        const long long ny = static_cast<long long>(std::ceil((box.ymax - box.ymin) / step));
        const double hx = (box.xmax - box.xmin) / static_cast<double>(nx);
        const double hy = (box.ymax - box.ymin) / static_cast<double>(ny);
        const double cell = hx * hy;
        for (long long i = 0; i < nx; ++i) {
            x(0) = box.xmin + (static_cast<double>(i) + 0.5) * hx;
            double row = 0.0;
            for (long long j = 0; j < ny; ++j) {
                x(1) = box.ymin + (static_cast<double>(j) + 0.5) * hy;
                if (problem.member(problem.eval_g_uncounted(x))) {
                    row += std::exp(std_normal_logpdf(x));
                }
            }
            mass += row * cell;
        }
    }
    return {mass, "quadrature2d(step=" + std::to_string(step) + ")"};
}

Golden mc_golden(const Problem& problem, long long n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("golden_oracle: mc_n must be >= 1");
    Rng rng(seed);
    Eigen::VectorXd x(problem.dim());
    long long hits = 0;
    for (long long i = 0; i < n; ++i) {
        rng.fill_normal(x);
        if (problem.member(problem.eval_g_uncounted(x))) ++hits;
    }
    return {static_cast<double>(hits) / static_cast<double>(n),
            "mc(n=" + std::to_string(n) + ",seed=" + std::to_string(seed) + ")"};
}

}  // namespace

Golden golden_oracle(const std::string& problem_name, const OracleRequest& request) {
    const Problem problem = make_problem(problem_name);
    switch (request.mode) {
        case OracleMode::Analytic:
            return analytic_golden(problem);
        case OracleMode::Quadrature2d:
            return quadrature_golden(problem, request.quad_step);
        case OracleMode::Mc:
            return mc_golden(problem, request.mc_n, request.mc_seed);
    }
    throw std::invalid_argument("golden_oracle: unknown mode");
}

GoldenCache::GoldenCache(std::string path) : path_(std::move(path)) { load(); }

void GoldenCache::load() {
    if (!std::filesystem::exists(path_)) return;
    std::ifstream in(path_);
    if (!in) throw FormatError("golden cache: cannot read " + path_);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("golden cache: " + path_ + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw FormatError("golden cache: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        entries_[key] = Golden{value.at("value").get<double>(),
                               value.at("provenance").get<std::string>()};
    }
}

void GoldenCache::save() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, golden] : entries_) {
        j[key] = {{"value", golden.value}, {"provenance", golden.provenance}};
    }
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw FormatError("golden cache: cannot write " + path_);
    out << j.dump(2) << "\n";
}

bool GoldenCache::contains(const std::string& problem_name, const OracleRequest& request) const {
    return entries_.count(request.key(problem_name)) > 0;
}

Golden GoldenCache::get_or_compute(const std::string& problem_name,
                                   const OracleRequest& request) {
    const std::string key = request.key(problem_name);
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
    const Golden golden = golden_oracle(problem_name, request);
    entries_[key] = golden;
    save();
    return golden;
}

}  // namespace nofis
