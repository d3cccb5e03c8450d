#include "nofis/problem.hpp"

#include <cmath>
#include <stdexcept>

#include "nofis/errors.hpp"
#include "nofis/math_util.hpp"

namespace nofis {

double Problem::eval_g(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != dim_) throw std::invalid_argument("eval_g: dimension mismatch for " + name_);
    if (!x.allFinite()) throw std::invalid_argument("eval_g: non-finite input");
    calls_->fetch_add(1, std::memory_order_relaxed);
    return g_(x);
}

double Problem::eval_g_uncounted(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != dim_) throw std::invalid_argument("eval_g: dimension mismatch for " + name_);
    return g_(x);
}

Eigen::VectorXd Problem::eval_grad_g(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != dim_) throw std::invalid_argument("eval_grad_g: dimension mismatch");
    if (grad_) return grad_(x);
    // Counted central differences, step 1e-5.
    const double h = 1e-5;
    Eigen::VectorXd grad(dim_);
    Eigen::VectorXd probe = x;
    for (int i = 0; i < dim_; ++i) {
        const double saved = probe(i);
        probe(i) = saved + h;
        const double up = eval_g(probe);
        probe(i) = saved - h;
        const double down = eval_g(probe);
        probe(i) = saved;
        grad(i) = (up - down) / (2.0 * h);
    }
    return grad;
}

namespace {

using Vec = Eigen::Ref<const Eigen::VectorXd>;

// --- leaf: two unit circles in the Gaussian tail -----------------------------

constexpr double kLeafCenter = 3.8;

double leaf_g(const Vec& x) {
    const double d1 = (x(0) + kLeafCenter) * (x(0) + kLeafCenter) +
                      (x(1) + kLeafCenter) * (x(1) + kLeafCenter);
    const double d2 = (x(0) - kLeafCenter) * (x(0) - kLeafCenter) +
                      (x(1) - kLeafCenter) * (x(1) - kLeafCenter);
    return std::min(d1, d2) - 1.0;
}

Eigen::VectorXd leaf_grad(const Vec& x) {
    const double d1 = (x(0) + kLeafCenter) * (x(0) + kLeafCenter) +
                      (x(1) + kLeafCenter) * (x(1) + kLeafCenter);
    const double d2 = (x(0) - kLeafCenter) * (x(0) - kLeafCenter) +
                      (x(1) - kLeafCenter) * (x(1) - kLeafCenter);
    Eigen::VectorXd g(2);
    const double c = d1 <= d2 ? -kLeafCenter : kLeafCenter;  // nearer center, first on ties
    g(0) = 2.0 * (x(0) - c);
    g(1) = 2.0 * (x(1) - c);
    return g;
}

// --- cube: all coordinates beyond 1.8 ----------------------------------------

double cube_g(const Vec& x) { return (1.8 - x.array()).maxCoeff(); }

Eigen::VectorXd cube_grad(const Vec& x) {
    // Subgradient of max(1.8 - x_i): lowest-index argmax on ties.
    Eigen::Index arg = 0;
    (1.8 - x.array()).maxCoeff(&arg);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    g(arg) = -1.0;
    return g;
}

// --- rosen: standard Rosenbrock, reported on a 1/100 scale --------------------
//
// The band [3.48, 3.52] with reference probability 4.69e-4 pins the scale:
// under N(0, I_10), P[348 <= standard Rosenbrock <= 352] = 4.673e-4 (MC 2e8),
// while the unscaled band [3.48, 3.52] has probability below 1e-8. The
// characteristic function is therefore the standard form divided by 100.

constexpr double kRosenScale = 1.0 / 100.0;

double rosen_g(const Vec& x) {
    double s = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
        const double a = x(i + 1) - x(i) * x(i);
        const double b = x(i) - 1.0;
        s += 100.0 * a * a + b * b;
    }
    return s * kRosenScale;
}

Eigen::VectorXd rosen_grad(const Vec& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
        const double a = x(i + 1) - x(i) * x(i);
        g(i) += -400.0 * x(i) * a + 2.0 * (x(i) - 1.0);
        g(i + 1) += 200.0 * a;
    }
    return g * kRosenScale;
}

// --- levy: standard Levy function --------------------------------------------

double levy_w(double x) { return 1.0 + (x - 1.0) / 4.0; }

double levy_g(const Vec& x) {
    const Eigen::Index d = x.size();
    const double w0 = levy_w(x(0));
    double s = std::sin(M_PI * w0) * std::sin(M_PI * w0);
    for (Eigen::Index i = 0; i + 1 < d; ++i) {
        const double w = levy_w(x(i));
        const double sw = std::sin(M_PI * w + 1.0);
        s += (w - 1.0) * (w - 1.0) * (1.0 + 10.0 * sw * sw);
    }
    const double wd = levy_w(x(d - 1));
    const double sd = std::sin(2.0 * M_PI * wd);
    s += (wd - 1.0) * (wd - 1.0) * (1.0 + sd * sd);
    return s;
}

Eigen::VectorXd levy_grad(const Vec& x) {
    const Eigen::Index d = x.size();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    const double dw = 0.25;
    const double w0 = levy_w(x(0));
    g(0) += M_PI * std::sin(2.0 * M_PI * w0) * dw;
    for (Eigen::Index i = 0; i + 1 < d; ++i) {
        const double w = levy_w(x(i));
        const double arg = M_PI * w + 1.0;
        const double sw = std::sin(arg);
        g(i) += (2.0 * (w - 1.0) * (1.0 + 10.0 * sw * sw) +
                 10.0 * M_PI * (w - 1.0) * (w - 1.0) * std::sin(2.0 * arg)) *
                dw;
    }
    const double wd = levy_w(x(d - 1));
    const double sd = std::sin(2.0 * M_PI * wd);
    g(d - 1) += (2.0 * (wd - 1.0) * (1.0 + sd * sd) +
                 2.0 * M_PI * (wd - 1.0) * (wd - 1.0) * std::sin(4.0 * M_PI * wd)) *
                dw;
    return g;
}

// --- powell: standard Powell singular function, 1/100 scale -------------------
//
// Same scale pinning as rosen: P[standard Powell <= 400] = 3.19e-5 under
// N(0, I_40) (MC 1e8), matching the reference 3.15e-5 within sampling noise,
// while P[standard <= 4] is unreachably small (minimum over 1e8 samples is
// ~250). The upper bound 4 therefore lives on a g/100 scale.

constexpr double kPowellScale = 1.0 / 100.0;

double powell_g(const Vec& x) {
    double s = 0.0;
    for (Eigen::Index j = 0; j + 3 < x.size(); j += 4) {
        const double a = x(j) + 10.0 * x(j + 1);
        const double b = x(j + 2) - x(j + 3);
        const double c = x(j + 1) - 2.0 * x(j + 2);
        const double d = x(j) - x(j + 3);
        s += a * a + 5.0 * b * b + c * c * c * c + 10.0 * d * d * d * d;
    }
    return s * kPowellScale;
}

Eigen::VectorXd powell_grad(const Vec& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index j = 0; j + 3 < x.size(); j += 4) {
        const double a = x(j) + 10.0 * x(j + 1);
        const double b = x(j + 2) - x(j + 3);
        const double c = x(j + 1) - 2.0 * x(j + 2);
        const double d = x(j) - x(j + 3);
        g(j) += 2.0 * a + 40.0 * d * d * d;
        g(j + 1) += 20.0 * a + 4.0 * c * c * c;
        g(j + 2) += 10.0 * b - 8.0 * c * c * c;
        g(j + 3) += -10.0 * b - 40.0 * d * d * d;
    }
    return g * kPowellScale;
}

// --- ring and halfspace1d ------------------------------------------------------

double ring_g(const Vec& x) { return x.squaredNorm(); }

Eigen::VectorXd ring_grad(const Vec& x) { return 2.0 * x; }

double halfspace_g(const Vec& x) { return 1.8 - x(0); }

Eigen::VectorXd halfspace_grad(const Vec&) {
    Eigen::VectorXd g(1);
    g(0) = -1.0;
    return g;
}

}  // namespace

Problem make_problem(const std::string& name) {
    if (name == "leaf") {
        Problem p(name, 2, Bound::upper_bound(0.0), leaf_g, leaf_grad);
        p.set_golden({4.74e-6, "paper-table"});
        p.set_quadrature_boxes({{kLeafCenter - 1.2, kLeafCenter + 1.2, kLeafCenter - 1.2,
                                 kLeafCenter + 1.2},
                                {-kLeafCenter - 1.2, -kLeafCenter + 1.2, -kLeafCenter - 1.2,
                                 -kLeafCenter + 1.2}});
        return p;
    }
    if (name == "cube") {
        Problem p(name, 6, Bound::upper_bound(0.0), cube_g, cube_grad);
        p.set_golden({2.15e-9, "paper-table"});
        return p;
    }
    if (name == "rosen") {
        Problem p(name, 10, Bound::band(3.48, 3.52), rosen_g, rosen_grad);
        p.set_golden({4.69e-4, "paper-table"});
        return p;
    }
    if (name == "levy") {
        Problem p(name, 20, Bound::band(0.0, 6.0), levy_g, levy_grad);
        p.set_golden({3.70e-6, "paper-table"});
        return p;
    }
    if (name == "powell") {
        Problem p(name, 40, Bound::upper_bound(4.0), powell_g, powell_grad);
        p.set_golden({3.15e-5, "paper-table"});
        return p;
    }
    if (name == "ring") {
        Problem p(name, 2, Bound::band(16.0, 20.25), ring_g, ring_grad);
        // chi-squared(2) tail: P[l <= |x|^2 <= u] = exp(-l/2) - exp(-u/2)
        p.set_golden({std::exp(-8.0) - std::exp(-10.125), "analytic"});
        p.set_quadrature_boxes({{-4.6, 4.6, -4.6, 4.6}});
        return p;
    }
    if (name == "halfspace1d") {
        Problem p(name, 1, Bound::upper_bound(0.0), halfspace_g, halfspace_grad);
        p.set_golden({std_normal_cdf(-1.8), "analytic"});
        return p;
    }
    throw CatalogError("unknown problem: " + name);
}

const std::vector<std::string>& problem_catalog_names() {
    static const std::vector<std::string> names = {"leaf",   "cube", "rosen",      "levy",
                                                   "powell", "ring", "halfspace1d"};
    return names;
}

}  // namespace nofis
