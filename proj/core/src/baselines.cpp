#include "nofis/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "nofis/errors.hpp"
#include "nofis/math_util.hpp"

namespace nofis {

EstimateReport mc_estimate(const Problem& problem, long long n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("mc_estimate: n must be >= 1");
    Eigen::VectorXd x(problem.dim());
    long long hits = 0;
    for (long long i = 0; i < n; ++i) {
        rng.fill_normal(x);
        if (problem.member(problem.eval_g(x))) ++hits;
    }
    EstimateReport report;
    report.p_est = static_cast<double>(hits) / static_cast<double>(n);
    report.hits = hits;
    report.n_samples = n;
    report.calls = n;
    report.zero_hit_warning = hits == 0;
    return report;
}

// ---------------------------------------------------------------------------
// Subset simulation
// ---------------------------------------------------------------------------

void SusConfig::validate() const {
    if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("sus config: p0 must lie in (0,1)");
    const double seeds = p0 * n_level;
    if (std::abs(seeds - std::llround(seeds)) > 1e-9 || std::llround(seeds) < 2) {
        throw std::invalid_argument("sus config: n_level * p0 must be an integer >= 2");
    }
    if (!(proposal_std > 0.0)) throw std::invalid_argument("sus config: proposal_std must be > 0");
    if (max_levels < 1) throw std::invalid_argument("sus config: max_levels must be >= 1");
}

EstimateReport sus_estimate(const Problem& problem, const SusConfig& config, Rng& rng) {
    config.validate();
    const int n = config.n_level;
    const int n_seed = static_cast<int>(std::llround(config.p0 * n));
    const int dim = problem.dim();
    const long long calls_before = problem.calls();

    Eigen::MatrixXd pop(dim, n);
    Eigen::VectorXd margins(n);
    rng.fill_normal(pop);
    for (int i = 0; i < n; ++i) margins(i) = problem.margin(problem.eval_g(pop.col(i)));

    EstimateReport report;
    report.n_samples = n;
    double prob_product = 1.0;
    double prev_threshold = std::numeric_limits<double>::infinity();
    std::vector<int> order(n);

    for (int level = 1;; ++level) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return margins(a) < margins(b); });
        const double threshold = margins(order[n_seed - 1]);

        if (threshold <= 0.0) {
            long long hits = 0;
            for (int i = 0; i < n; ++i) {
                if (margins(i) <= 0.0) ++hits;
            }
            report.hits = hits;
            report.p_est = prob_product * static_cast<double>(hits) / static_cast<double>(n);
            report.zero_hit_warning = hits == 0;
            report.extras["levels"] = static_cast<double>(level);
            break;
        }
        if (level >= config.max_levels) {
            throw ConvergenceError("subset simulation: bound not reached after " +
                                   std::to_string(config.max_levels) + " levels");
        }
        if (threshold >= prev_threshold) {
            throw ConvergenceError("subset simulation: threshold stagnated at level " +
                                   std::to_string(level));
        }
        prev_threshold = threshold;
        report.extras["threshold_" + std::to_string(level)] = threshold;
        prob_product *= static_cast<double>(n_seed) / static_cast<double>(n);

        // Component-wise Metropolis chains from the elite seeds, targeting the
        // base distribution restricted to {margin <= threshold}. The chain
        // lengths split n - n_seed proposals as evenly as possible.
        Eigen::MatrixXd next_pop(dim, n);
        Eigen::VectorXd next_margins(n);
        int out = 0;
        for (int s = 0; s < n_seed; ++s) {
            next_pop.col(out) = pop.col(order[s]);
            next_margins(out) = margins(order[s]);
            ++out;
        }
        const int total_new = n - n_seed;
        Eigen::VectorXd state(dim), candidate(dim);
        for (int s = 0; s < n_seed; ++s) {
            const int quota = total_new / n_seed + (s < total_new % n_seed ? 1 : 0);
            state = pop.col(order[s]);
            double state_margin = margins(order[s]);
            for (int t = 0; t < quota; ++t) {
                for (int d = 0; d < dim; ++d) {
                    const double proposal = state(d) + config.proposal_std * rng.normal();
                    const double log_ratio = 0.5 * (state(d) * state(d) - proposal * proposal);
                    if (std::log(rng.uniform()) <= log_ratio) {
                        candidate(d) = proposal;
                    } else {
                        candidate(d) = state(d);
                    }
                }
                const double cand_margin = problem.margin(problem.eval_g(candidate));
                if (cand_margin <= threshold) {
                    state = candidate;
                    state_margin = cand_margin;
                }
                next_pop.col(out) = state;
                next_margins(out) = state_margin;
                ++out;
            }
        }
        pop = std::move(next_pop);
        margins = std::move(next_margins);
    }
    report.calls = problem.calls() - calls_before;
    return report;
}

// ---------------------------------------------------------------------------
// Scaled-sigma sampling
// ---------------------------------------------------------------------------

void SssConfig::validate() const {
    if (scales.size() < 3) throw std::invalid_argument("sss config: need at least three scales");
    double prev = 1.0;
    for (double s : scales) {
        if (!(s > prev)) {
            throw std::invalid_argument("sss config: scales must be strictly increasing and > 1");
        }
        prev = s;
    }
    if (n_per_scale < 1) throw std::invalid_argument("sss config: n_per_scale must be >= 1");
}

EstimateReport sss_estimate(const Problem& problem, const SssConfig& config, Rng& rng) {
    config.validate();
    const int dim = problem.dim();
    Eigen::VectorXd x(dim);

    std::vector<double> used_scales;
    std::vector<double> log_p;
    EstimateReport report;
    long long total_hits = 0;
    for (std::size_t k = 0; k < config.scales.size(); ++k) {
        const double s = config.scales[k];
        long long hits = 0;
        for (long long i = 0; i < config.n_per_scale; ++i) {
            rng.fill_normal(x);
            x *= s;
            if (problem.member(problem.eval_g(x))) ++hits;
        }
        report.extras["hits_scale_" + std::to_string(k)] = static_cast<double>(hits);
        total_hits += hits;
        if (hits > 0) {
            used_scales.push_back(s);
            log_p.push_back(std::log(static_cast<double>(hits) /
                                     static_cast<double>(config.n_per_scale)));
        }
    }
    report.hits = total_hits;
    report.n_samples = static_cast<long long>(config.scales.size()) * config.n_per_scale;
    report.calls = report.n_samples;

    if (used_scales.size() < 3) {
        throw ExtrapolationError("scaled-sigma sampling: only " +
                                 std::to_string(used_scales.size()) +
                                 " scales saw hits; need 3 for the extrapolation model");
    }

    // log P(s) = alpha + beta log s - gamma / s^2, least squares.
    const Eigen::Index rows = static_cast<Eigen::Index>(used_scales.size());
    Eigen::MatrixXd design(rows, 3);
    Eigen::VectorXd target(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double s = used_scales[static_cast<std::size_t>(r)];
        design(r, 0) = 1.0;
        design(r, 1) = std::log(s);
        design(r, 2) = -1.0 / (s * s);
        target(r) = log_p[static_cast<std::size_t>(r)];
    }
    const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(target);
    const double residual = (design * coef - target).norm();

    report.extras["alpha"] = coef(0);
    report.extras["beta"] = coef(1);
    report.extras["gamma"] = coef(2);
    report.extras["fit_residual_norm"] = residual;
    report.p_est = std::exp(coef(0) - coef(2));  // extrapolation to s = 1
    return report;
}

// ---------------------------------------------------------------------------
// Adaptive importance sampling (cross-entropy with a Gaussian mixture)
// ---------------------------------------------------------------------------

void AisConfig::validate() const {
    if (components < 1) throw std::invalid_argument("ais config: components must be >= 1");
    if (!(elite_fraction > 0.0 && elite_fraction <= 0.5)) {
        throw std::invalid_argument("ais config: elite_fraction must lie in (0, 0.5]");
    }
    if (iterations < 1) throw std::invalid_argument("ais config: iterations must be >= 1");
    if (n_per_iter < 2) throw std::invalid_argument("ais config: n_per_iter must be >= 2");
    if (final_n < 1) throw std::invalid_argument("ais config: final_n must be >= 1");
    if (!(cov_floor > 0.0)) throw std::invalid_argument("ais config: cov_floor must be > 0");
}

namespace {

struct ComponentDensity {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double log_norm = 0.0;  // -0.5*(D log 2pi + log det cov)
    bool ok = false;
};

ComponentDensity factor_component(const GaussianComponent& c) {
    ComponentDensity d;
    if (!c.cov.allFinite() || !c.mean.allFinite()) return d;
    d.llt.compute(c.cov);
    if (d.llt.info() != Eigen::Success) return d;
    const double logdet =
        2.0 * d.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    d.log_norm = -0.5 * (kLog2Pi * static_cast<double>(c.mean.size()) + logdet);
    d.ok = true;
    return d;
}

Eigen::MatrixXd component_logpdfs(const GaussianMixture& mix,
                                  const std::vector<ComponentDensity>& dens,
                                  const Eigen::Ref<const Eigen::MatrixXd>& x) {
    const Eigen::Index n = x.cols();
    const Eigen::Index c = static_cast<Eigen::Index>(mix.components.size());
    Eigen::MatrixXd out(c, n);
    for (Eigen::Index k = 0; k < c; ++k) {
        const auto& comp = mix.components[static_cast<std::size_t>(k)];
        const Eigen::MatrixXd centered = x.colwise() - comp.mean;
        const Eigen::MatrixXd solved = dens[static_cast<std::size_t>(k)].llt.matrixL().solve(centered);
        out.row(k) = (-0.5 * solved.colwise().squaredNorm()).array() +
                     dens[static_cast<std::size_t>(k)].log_norm +
                     std::log(std::max(comp.weight, 1e-300));
    }
    return out;
}

}  // namespace

Eigen::VectorXd GaussianMixture::logpdf(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    std::vector<ComponentDensity> dens;
    dens.reserve(components.size());
    for (const auto& c : components) {
        dens.push_back(factor_component(c));
        if (!dens.back().ok) throw std::invalid_argument("mixture logpdf: non-PD covariance");
    }
    const Eigen::MatrixXd lp = component_logpdfs(*this, dens, x);
    Eigen::VectorXd out(x.cols());
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        const double shift = lp.col(i).maxCoeff();
        out(i) = shift + std::log((lp.col(i).array() - shift).exp().sum());
    }
    return out;
}

Eigen::MatrixXd GaussianMixture::sample(Eigen::Index n, Rng& rng) const {
    std::vector<ComponentDensity> dens;
    dens.reserve(components.size());
    for (const auto& c : components) {
        dens.push_back(factor_component(c));
        if (!dens.back().ok) throw std::invalid_argument("mixture sample: non-PD covariance");
    }
    const Eigen::Index dim = components.front().mean.size();
    Eigen::MatrixXd out(dim, n);
    Eigen::VectorXd z(dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        double u = rng.uniform();
        std::size_t pick = components.size() - 1;
        for (std::size_t k = 0; k < components.size(); ++k) {
            u -= components[k].weight;
            if (u <= 0.0) {
                pick = k;
                break;
            }
        }
        rng.fill_normal(z);
        out.col(i) = components[pick].mean +
                     dens[pick].llt.matrixL().toDenseMatrix() * z;
    }
    return out;
}

AisRefitResult ais_refit(const GaussianMixture& current,
                         const Eigen::Ref<const Eigen::MatrixXd>& elites,
                         const Eigen::Ref<const Eigen::VectorXd>& elite_log_weights,
                         double cov_floor) {
    const Eigen::Index n = elites.cols();
    const Eigen::Index dim = elites.rows();
    const std::size_t n_comp = current.components.size();
    if (n < 1) throw std::invalid_argument("ais_refit: empty elite set");

    std::vector<ComponentDensity> dens;
    dens.reserve(n_comp);
    for (const auto& c : current.components) {
        dens.push_back(factor_component(c));
        if (!dens.back().ok) throw std::invalid_argument("ais_refit: non-PD input covariance");
    }

    // Self-normalized likelihood ratios.
    const double shift = elite_log_weights.maxCoeff();
    Eigen::VectorXd w = (elite_log_weights.array() - shift).exp();
    w /= w.sum();

    // Responsibilities under the current mixture.
    const Eigen::MatrixXd lp = component_logpdfs(current, dens, elites);
    Eigen::MatrixXd resp(n_comp, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = lp.col(i).maxCoeff();
        const Eigen::VectorXd e = (lp.col(i).array() - m).exp();
        resp.col(i) = e / e.sum();
    }

    AisRefitResult result;
    result.mixture = current;
    double weight_sum = 0.0;
    for (std::size_t k = 0; k < n_comp; ++k) {
        const Eigen::VectorXd u = resp.row(static_cast<Eigen::Index>(k)).transpose().cwiseProduct(w);
        const double mass = u.sum();
        GaussianComponent& out = result.mixture.components[k];
        if (!(mass > 1e-12)) {
            ++result.degenerate_components;  // starved component keeps previous params
            out.weight = 1e-12;
            weight_sum += out.weight;
            continue;
        }
        const Eigen::VectorXd mean = (elites * u) / mass;
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd d = elites.col(i) - mean;
            cov.noalias() += u(i) * d * d.transpose();
        }
        cov /= mass;
        cov.diagonal().array() += cov_floor;
        GaussianComponent candidate{mass, mean, cov};
        if (!factor_component(candidate).ok) {
            ++result.degenerate_components;  // smoothing was not enough
            out.weight = std::max(out.weight, 1e-12);
            weight_sum += out.weight;
            continue;
        }
        out = std::move(candidate);
        weight_sum += out.weight;
    }
    for (auto& c : result.mixture.components) c.weight /= weight_sum;
    return result;
}

EstimateReport adaptive_is_estimate(const Problem& problem, const AisConfig& config, Rng& rng,
                                    const GaussianMixture* init) {
    config.validate();
    const int dim = problem.dim();

    GaussianMixture mixture;
    if (init) {
        if (static_cast<int>(init->components.size()) != config.components) {
            throw std::invalid_argument("adaptive IS: init mixture size must match components");
        }
        mixture = *init;
    } else {
        mixture.components.resize(config.components);
        for (auto& c : mixture.components) {
            c.weight = 1.0 / config.components;
            c.mean = Eigen::VectorXd::NullaryExpr(dim, [&](Eigen::Index) { return rng.normal(); });
            c.cov = Eigen::MatrixXd::Identity(dim, dim);
        }
    }

    EstimateReport report;
    int consecutive_degenerate = 0;
    for (int it = 0; it < config.iterations; ++it) {
        const Eigen::MatrixXd x = mixture.sample(config.n_per_iter, rng);
        Eigen::VectorXd margins(config.n_per_iter);
        for (Eigen::Index i = 0; i < x.cols(); ++i) {
            margins(i) = problem.margin(problem.eval_g(x.col(i)));
        }
        std::vector<double> sorted(margins.data(), margins.data() + margins.size());
        const auto k = std::max<std::size_t>(
            1, static_cast<std::size_t>(config.elite_fraction * static_cast<double>(sorted.size())));
        std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
        double threshold = std::max(sorted[k - 1], 0.0);  // all of the event once reached

        std::vector<Eigen::Index> elite_idx;
        for (Eigen::Index i = 0; i < margins.size(); ++i) {
            if (margins(i) <= threshold) elite_idx.push_back(i);
        }
        Eigen::MatrixXd elites(dim, static_cast<Eigen::Index>(elite_idx.size()));
        for (std::size_t i = 0; i < elite_idx.size(); ++i) elites.col(i) = x.col(elite_idx[i]);

        const Eigen::VectorXd log_q = mixture.logpdf(elites);
        const Eigen::VectorXd log_p = std_normal_logpdf_cols(elites);
        AisRefitResult refit = ais_refit(mixture, elites, log_p - log_q, config.cov_floor);
        report.extras["elite_threshold_" + std::to_string(it)] = threshold;
        if (refit.degenerate_components > 0) {
            if (++consecutive_degenerate >= 3) {
                throw ConvergenceError("adaptive IS: repeated degenerate refits");
            }
        } else {
            consecutive_degenerate = 0;
        }
        mixture = std::move(refit.mixture);
    }

    // Final importance-sampling batch with the adapted mixture.
    const Eigen::MatrixXd x = mixture.sample(config.final_n, rng);
    const Eigen::VectorXd log_w = std_normal_logpdf_cols(x) - mixture.logpdf(x);
    double hit_max = -std::numeric_limits<double>::infinity();
    std::vector<char> hit(config.final_n, 0);
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        if (problem.member(problem.eval_g(x.col(i)))) {
            hit[static_cast<std::size_t>(i)] = 1;
            ++report.hits;
            hit_max = std::max(hit_max, log_w(i));
        }
    }
    if (report.hits == 0) {
        report.p_est = 0.0;
        report.zero_hit_warning = true;
    } else {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < x.cols(); ++i) {
            if (hit[static_cast<std::size_t>(i)]) acc += std::exp(log_w(i) - hit_max);
        }
        report.p_est =
            std::exp(hit_max + std::log(acc) - std::log(static_cast<double>(config.final_n)));
    }
    const double shift = log_w.maxCoeff();
    const Eigen::ArrayXd u = (log_w.array() - shift).exp();
    report.weights.max_share = u.maxCoeff() / u.sum();
    report.weights.effective_sample_size = u.sum() * u.sum() / u.square().sum();
    report.n_samples = config.final_n;
    report.calls = static_cast<long long>(config.iterations) * config.n_per_iter + config.final_n;
    return report;
}

}  // namespace nofis
