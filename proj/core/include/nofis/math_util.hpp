#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

namespace nofis {

inline constexpr double kLog2Pi = 1.8378770664093454836;

/// Standard normal CDF.
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

/// log density of N(0, I_D) at x.
inline double std_normal_logpdf(const Eigen::Ref<const Eigen::VectorXd>& x) {
    return -0.5 * x.squaredNorm() - 0.5 * kLog2Pi * static_cast<double>(x.size());
}

/// Column-wise log density of N(0, I_D) for a batch (columns are samples).
inline Eigen::VectorXd std_normal_logpdf_cols(const Eigen::Ref<const Eigen::MatrixXd>& x) {
    return (-0.5 * x.colwise().squaredNorm()).array() - 0.5 * kLog2Pi * static_cast<double>(x.rows());
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
    return 0.5 * (v[mid - 1] + hi);
}

/// Sample standard deviation (n-1 denominator).
inline double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace nofis
