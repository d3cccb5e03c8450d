#pragma once

#include <Eigen/Core>

#include <atomic>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nofis {

/// Closed interval constraint on g. Either side may be infinite, which covers
/// the three bound kinds: upper (lower = -inf), lower (upper = +inf) and band.
struct Bound {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    static Bound upper_bound(double u) { return {-std::numeric_limits<double>::infinity(), u}; }
    static Bound lower_bound(double l) { return {l, std::numeric_limits<double>::infinity()}; }
    static Bound band(double l, double u) { return {l, u}; }

    bool contains(double gval) const { return gval >= lower && gval <= upper; }

    /// Signed distance of a g value to the inside of the interval; <= 0 means
    /// member. max(g - upper, lower - g) with infinite sides dropping out.
    double margin(double gval) const {
        double m = -std::numeric_limits<double>::infinity();
        if (std::isfinite(upper)) m = gval - upper;
        if (std::isfinite(lower)) m = std::max(m, lower - gval);
        return m;
    }

    /// Interval widened by a margin `a` on every finite side. Nested level
    /// sets shrink to the bound itself as a -> 0.
    Bound relaxed(double a) const {
        Bound r = *this;
        if (std::isfinite(r.lower)) r.lower -= a;
        if (std::isfinite(r.upper)) r.upper += a;
        return r;
    }
};

struct Golden {
    double value = 0.0;
    std::string provenance;  // analytic | quadrature(...) | mc(...) | paper-table
};

struct Box2d {
    double xmin, xmax, ymin, ymax;
};

/// Benchmark rare-event definition: characteristic function g, gradient,
/// bound, and a monotone counter of g evaluations. g and the gradient are
/// pure; the counter is atomic so batched evaluation may run concurrently.
class Problem {
public:
    using GFn = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;
    using GradFn = std::function<Eigen::VectorXd(const Eigen::Ref<const Eigen::VectorXd>&)>;

    Problem(std::string name, int dim, Bound bound, GFn g, GradFn grad = nullptr)
        : name_(std::move(name)), dim_(dim), bound_(bound), g_(std::move(g)),
          grad_(std::move(grad)), calls_(std::make_shared<std::atomic<long long>>(0)) {}

    const std::string& name() const { return name_; }
    int dim() const { return dim_; }
    const Bound& bound() const { return bound_; }
    const std::optional<Golden>& golden() const { return golden_; }
    void set_golden(Golden golden) { golden_ = std::move(golden); }
    const std::vector<Box2d>& quadrature_boxes() const { return quad_boxes_; }
    void set_quadrature_boxes(std::vector<Box2d> boxes) { quad_boxes_ = std::move(boxes); }
    bool has_analytic_grad() const { return static_cast<bool>(grad_); }

    /// Counted evaluation of g. Non-finite inputs raise std::invalid_argument
    /// without touching the counter.
    double eval_g(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    /// Gradient of g: analytic when available (not counted), otherwise central
    /// differences with step 1e-5, which adds 2*dim counted calls.
    Eigen::VectorXd eval_grad_g(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    /// Uncounted evaluation, for oracles and plotting only.
    double eval_g_uncounted(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    bool member(double gval) const { return bound_.contains(gval); }
    double margin(double gval) const { return bound_.margin(gval); }

    long long calls() const { return calls_->load(); }
    void reset_calls() { calls_->store(0); }

private:
    std::string name_;
    int dim_;
    Bound bound_;
    GFn g_;
    GradFn grad_;
    std::optional<Golden> golden_;
    std::vector<Box2d> quad_boxes_;
    std::shared_ptr<std::atomic<long long>> calls_;
};

/// Membership test from a g value and the problem bound alone.
inline bool membership(const Problem& problem, double gval) { return problem.member(gval); }

/// Catalog lookup. Known names: leaf, cube, rosen, levy, powell, ring,
/// halfspace1d. Each instance carries a fresh call counter. Throws
/// CatalogError for unknown names.
Problem make_problem(const std::string& name);

const std::vector<std::string>& problem_catalog_names();

}  // namespace nofis
