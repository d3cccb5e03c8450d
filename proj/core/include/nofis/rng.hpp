#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>

namespace nofis {

/// SplitMix64 mixing step. Used to turn (base seed, stream index) pairs into
/// well-separated engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for trial `index` of a batch rooted at `base`. Trials get independent,
/// reproducible streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base + index);
}

/// Deterministic random stream. Normal variates use an explicit Box-Muller
/// transform (no cached spare) so sequences are identical across standard
/// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t raw() { return engine_(); }

    /// Uniform in (0, 1]; never returns 0 so log() is safe.
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * (uniform() - 0x1.0p-53); }

    double normal() {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        return r * std::cos(2.0 * M_PI * uniform());
    }

    /// Fills a matrix with i.i.d. standard normals, two per Box-Muller pair.
    void fill_normal(Eigen::Ref<Eigen::MatrixXd> out) {
        double* data = out.data();
        const Eigen::Index n = out.size();
        Eigen::Index i = 0;
        while (i + 1 < n) {
            const double r = std::sqrt(-2.0 * std::log(uniform()));
            const double a = 2.0 * M_PI * uniform();
            data[i++] = r * std::cos(a);
            data[i++] = r * std::sin(a);
        }
        if (i < n) data[i] = normal();
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace nofis
