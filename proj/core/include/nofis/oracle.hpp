#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "nofis/problem.hpp"

namespace nofis {

/// Logarithmic estimation error in base 10 with the 1e-20 floor applied to
/// the estimate only: |log10 max(p_est, 1e-20) - log10 p_golden|. Throws
/// std::invalid_argument for p_golden <= 0 or p_est < 0.
double log_error(double p_est, double p_golden);

enum class OracleMode { Analytic, Quadrature2d, Mc };

struct OracleRequest {
    OracleMode mode = OracleMode::Analytic;
    long long mc_n = 0;                 // sample count for Mc
    std::uint64_t mc_seed = 0x90145EEDULL;
    double quad_step = 0.002;           // grid step for Quadrature2d

    std::string key(const std::string& problem) const;  // cache key
};

/// Reference probability with provenance. Analytic closed forms exist for
/// cube, halfspace1d and ring; tensor-grid quadrature covers 2-D problems;
/// plain Monte Carlo with its own uncounted problem instance covers the rest.
/// Throws UnsupportedModeError when the mode does not apply.
Golden golden_oracle(const std::string& problem_name, const OracleRequest& request);

/// Small JSON-backed store of oracle results keyed by (problem, mode, n).
class GoldenCache {
public:
    explicit GoldenCache(std::string path);

    /// Returns the cached value or computes, stores and persists it.
    Golden get_or_compute(const std::string& problem_name, const OracleRequest& request);

    bool contains(const std::string& problem_name, const OracleRequest& request) const;
    const std::string& path() const { return path_; }

private:
    void load();
    void save() const;

    std::string path_;
    std::map<std::string, Golden> entries_;
};

}  // namespace nofis
