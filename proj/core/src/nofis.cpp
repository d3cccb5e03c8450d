#include "nofis/nofis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "nofis/errors.hpp"
#include "nofis/math_util.hpp"

namespace nofis {

void TrainConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("train config: steps must be >= 1");
    if (layers_per_step < 1) throw std::invalid_argument("train config: layers_per_step must be >= 1");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (n_is < 1) throw std::invalid_argument("train config: n_is must be >= 1");
    if (!(temperature > 0.0)) throw std::invalid_argument("train config: temperature must be > 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("train config: learning_rate must be positive and finite");
    }
    if (loss == LossVariant::ForwardKl && stages != StageVariant::Staged) {
        throw std::invalid_argument("train config: forward KL is only defined for staged training");
    }
}

double tempered_exponent(const Bound& level, double tau, double gval) {
    if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
    double e = 0.0;
    if (std::isfinite(level.upper)) e = std::min(e, tau * (level.upper - gval));
    if (std::isfinite(level.lower)) e = std::min(e, tau * (gval - level.lower));
    return e;
}

double tempered_logdensity(const Bound& level, double tau,
                           const Eigen::Ref<const Eigen::VectorXd>& x, double gval) {
    return tempered_exponent(level, tau, gval) + std_normal_logpdf(x);
}

namespace {

/// d/dg of the tempered exponent. The boundary takes the inactive branch.
double exponent_slope(const Bound& level, double tau, double gval) {
    if (std::isfinite(level.upper) && gval > level.upper) return -tau;
    if (std::isfinite(level.lower) && gval < level.lower) return tau;
    return 0.0;
}

/// One injection point for the backward walk: the objective contains
/// coeff[n] * (sum of logdets up to `layer`) and a direct gradient `grad`
/// with respect to z_layer.
struct AnchorTerm {
    int layer = 0;  // 1-based transform count
    Eigen::VectorXd coeff;
    Eigen::MatrixXd grad;
};

/// Walks the layer chain top-down, injecting anchor terms, and accumulates
/// parameter gradients for layers in [first_trainable, top).
std::vector<LayerGrads> backward_walk(const FlowModel& model,
                                      const std::vector<LayerCache>& caches,
                                      const std::vector<AnchorTerm>& anchors, int first_trainable,
                                      int top) {
    const Eigen::Index n = anchors.front().coeff.size();
    std::vector<LayerGrads> grads;
    grads.reserve(top - first_trainable);
    for (int j = first_trainable; j < top; ++j) {
        grads.push_back(LayerGrads::zeros_like(model.layers[j]));
    }
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(model.dim, n);
    Eigen::VectorXd coeff_run = Eigen::VectorXd::Zero(n);
    for (int j = top - 1; j >= first_trainable; --j) {
        for (const AnchorTerm& a : anchors) {
            if (a.layer == j + 1) {
                v += a.grad;
                coeff_run += a.coeff;
            }
        }
        v = layer_backward(model.layers[j], caches[j], v, coeff_run, &grads[j - first_trainable]);
    }
    return grads;
}

struct LevelTerms {
    Eigen::VectorXd gvals;
    Eigen::VectorXd phi;          // tempered exponent + base log density at z
    Eigen::MatrixXd phi_grad;     // d phi / d z, per column
    double hit_fraction = 0.0;
};

/// Counted g evaluations plus the tempered target value and gradient at each
/// column of z.
LevelTerms level_terms(const Problem& problem, const Bound& level, double tau,
                       const Eigen::MatrixXd& z) {
    const Eigen::Index n = z.cols();
    LevelTerms t;
    t.gvals.resize(n);
    t.phi.resize(n);
    t.phi_grad.resize(z.rows(), n);
    long long hits = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double g = problem.eval_g(z.col(i));
        t.gvals(i) = g;
        t.phi(i) = tempered_exponent(level, tau, g) + std_normal_logpdf(z.col(i));
        const double slope = exponent_slope(level, tau, g);
        if (slope != 0.0) {
            t.phi_grad.col(i) = slope * problem.eval_grad_g(z.col(i)) - z.col(i);
        } else {
            t.phi_grad.col(i) = -z.col(i);
        }
        if (level.contains(g)) ++hits;
    }
    t.hit_fraction = static_cast<double>(hits) / static_cast<double>(n);
    return t;
}

void check_loss_inputs(const FlowModel& model, int m, const ThresholdSchedule& schedule,
                       const Eigen::Ref<const Eigen::MatrixXd>& z0, int layers_per_step) {
    if (m < 1 || m > schedule.steps()) throw std::invalid_argument("loss: step index out of range");
    if (layers_per_step < 1) throw std::invalid_argument("loss: layers_per_step must be >= 1");
    if (model.layer_count() < m * layers_per_step) {
        throw std::invalid_argument("loss: model has too few layers for step " + std::to_string(m));
    }
    if (z0.rows() != model.dim) throw std::invalid_argument("loss: batch dimension mismatch");
    if (z0.cols() < 1) throw std::invalid_argument("loss: empty batch");
}

}  // namespace

LossResult reverse_kl_loss(const FlowModel& model, int m, const Problem& problem,
                           const ThresholdSchedule& schedule, double tau,
                           const Eigen::Ref<const Eigen::MatrixXd>& z0, int layers_per_step,
                           bool freeze) {
    check_loss_inputs(model, m, schedule, z0, layers_per_step);
    const int top = m * layers_per_step;
    const Eigen::Index n = z0.cols();
    FlowForwardResult fwd = flow_forward(model, z0, top, /*with_caches=*/true);
    const LevelTerms terms = level_terms(problem, schedule.level(m - 1), tau, fwd.z);

    LossResult result;
    result.loss = -fwd.cum_logdet.mean() - terms.phi.mean();
    if (!std::isfinite(result.loss)) {
        throw TrainingDivergenceError("reverse KL loss diverged at step " + std::to_string(m), m);
    }
    result.mean_hit_fraction = terms.hit_fraction;
    result.mean_g = terms.gvals.mean();
    result.first_trainable = freeze ? (m - 1) * layers_per_step : 0;

    const double scale = -1.0 / static_cast<double>(n);
    AnchorTerm anchor;
    anchor.layer = top;
    anchor.coeff = Eigen::VectorXd::Constant(n, scale);
    anchor.grad = scale * terms.phi_grad;
    result.layer_grads = backward_walk(model, fwd.caches, {anchor}, result.first_trainable, top);
    return result;
}

LossResult forward_kl_loss(const FlowModel& model, int m, const Problem& problem,
                           const ThresholdSchedule& schedule, double tau,
                           const Eigen::Ref<const Eigen::MatrixXd>& z0, int layers_per_step,
                           bool freeze) {
    check_loss_inputs(model, m, schedule, z0, layers_per_step);
    const int top = m * layers_per_step;
    FlowForwardResult fwd = flow_forward(model, z0, top, /*with_caches=*/true);
    const LevelTerms terms = level_terms(problem, schedule.level(m - 1), tau, fwd.z);

    // Self-normalized importance weights drawn from q: log r = log p_m^tau - log q.
    const Eigen::VectorXd log_p0 = std_normal_logpdf_cols(z0);
    const Eigen::VectorXd psi = fwd.cum_logdet + terms.phi;  // differentiable part of log r
    const Eigen::VectorXd log_r = psi - log_p0;
    const double shift = log_r.maxCoeff();
    const Eigen::VectorXd u = (log_r.array() - shift).exp();
    const Eigen::VectorXd w = u / u.sum();
    const double loss = w.dot(log_r);

    LossResult result;
    result.loss = loss;
    if (!std::isfinite(result.loss)) {
        throw TrainingDivergenceError("forward KL loss diverged at step " + std::to_string(m), m);
    }
    result.mean_hit_fraction = terms.hit_fraction;
    result.mean_g = terms.gvals.mean();
    result.first_trainable = freeze ? (m - 1) * layers_per_step : 0;

    // d loss / d psi_n = w_n (1 + log r_n - loss); see the self-normalized
    // estimator's quotient rule.
    AnchorTerm anchor;
    anchor.layer = top;
    anchor.coeff = (w.array() * (1.0 + log_r.array() - loss)).matrix();
    anchor.grad = terms.phi_grad * anchor.coeff.asDiagonal();
    result.layer_grads = backward_walk(model, fwd.caches, {anchor}, result.first_trainable, top);
    return result;
}

namespace {

/// Mean of the per-level losses, all layers trainable; one epoch costs
/// steps * batch_size counted g calls.
LossResult mean_kl_loss(const FlowModel& model, const Problem& problem,
                        const ThresholdSchedule& schedule, double tau,
                        const Eigen::Ref<const Eigen::MatrixXd>& z0, int layers_per_step) {
    const int steps = schedule.steps();
    check_loss_inputs(model, steps, schedule, z0, layers_per_step);
    const Eigen::Index n = z0.cols();
    const int top = steps * layers_per_step;

    std::vector<LayerCache> caches(top);
    std::vector<AnchorTerm> anchors;
    anchors.reserve(steps);
    double loss = 0.0;
    LossResult result;
    Eigen::VectorXd cum = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd z = z0;
    int next_anchor = layers_per_step;
    const double scale = -1.0 / static_cast<double>(steps * n);
    for (int j = 0; j < top; ++j) {
        LayerResult step = layer_forward(model.layers[j], z, &caches[j], j);
        z = std::move(step.y);
        cum += step.logdet;
        if (j + 1 == next_anchor) {
            const int m = (j + 1) / layers_per_step;
            const LevelTerms terms = level_terms(problem, schedule.level(m - 1), tau, z);
            loss += (-cum.mean() - terms.phi.mean()) / static_cast<double>(steps);
            AnchorTerm anchor;
            anchor.layer = j + 1;
            anchor.coeff = Eigen::VectorXd::Constant(n, scale);
            anchor.grad = scale * terms.phi_grad;
            anchors.push_back(std::move(anchor));
            if (m == steps) {
                result.mean_hit_fraction = terms.hit_fraction;
                result.mean_g = terms.gvals.mean();
            }
            next_anchor += layers_per_step;
        }
    }
    result.loss = loss;
    if (!std::isfinite(result.loss)) {
        throw TrainingDivergenceError("mean-of-KLs loss diverged", 0);
    }
    result.first_trainable = 0;
    result.layer_grads = backward_walk(model, caches, anchors, 0, top);
    return result;
}

}  // namespace

TrainResult train(FlowModel& model, const Problem& problem, const ThresholdSchedule& schedule,
                  const TrainConfig& config, Rng& rng, TrainResult* partial) {
    config.validate();
    schedule.validate();
    if (model.dim != problem.dim()) throw std::invalid_argument("train: model/problem dimension mismatch");
    if (schedule.steps() != config.steps) {
        throw std::invalid_argument("train: schedule length must equal the configured step count");
    }
    if (!(schedule.final_level() == problem.bound())) {
        throw std::invalid_argument("train: schedule must terminate at the problem bound");
    }
    if (model.layer_count() != config.steps * config.layers_per_step) {
        throw std::invalid_argument("train: model must have steps * layers_per_step layers");
    }

    AdamConfig adam;
    adam.learning_rate = config.learning_rate;
    std::vector<std::pair<OptimizerState, OptimizerState>> opt;
    opt.reserve(model.layer_count());
    for (const CouplingLayer& layer : model.layers) {
        opt.emplace_back(OptimizerState::for_net(layer.scale_net, adam),
                         OptimizerState::for_net(layer.translate_net, adam));
    }

    TrainResult result;
    Eigen::MatrixXd z0(model.dim, config.batch_size);

    auto apply = [&](const LossResult& lr) {
        for (std::size_t k = 0; k < lr.layer_grads.size(); ++k) {
            const int j = lr.first_trainable + static_cast<int>(k);
            optimizer_step(model.layers[j].scale_net, lr.layer_grads[k].scale, opt[j].first);
            optimizer_step(model.layers[j].translate_net, lr.layer_grads[k].translate,
                           opt[j].second);
        }
    };

    auto run_block = [&](int level_index, bool freeze, StageVariant variant) {
        StepDiagnostics diag;
        diag.loss.reserve(config.epochs);
        for (int e = 0; e < config.epochs; ++e) {
            rng.fill_normal(z0);
            LossResult lr;
            try {
                switch (variant) {
                    case StageVariant::MeanOfKls:
                        lr = mean_kl_loss(model, problem, schedule, config.temperature, z0,
                                          config.layers_per_step);
                        break;
                    default:
                        lr = config.loss == LossVariant::ForwardKl
                                 ? forward_kl_loss(model, level_index, problem, schedule,
                                                   config.temperature, z0, config.layers_per_step,
                                                   freeze)
                                 : reverse_kl_loss(model, level_index, problem, schedule,
                                                   config.temperature, z0, config.layers_per_step,
                                                   freeze);
                        break;
                }
                apply(lr);
            } catch (const TrainingDivergenceError& err) {
                result.steps.push_back(std::move(diag));
                if (partial) *partial = result;
                throw TrainingDivergenceError(std::string(err.what()) + " (stage " +
                                                  std::to_string(level_index) + ", epoch " +
                                                  std::to_string(e + 1) + ")",
                                              err.step_index());
            }
            diag.loss.push_back(lr.loss);
            diag.hit_fraction.push_back(lr.mean_hit_fraction);
            diag.mean_g.push_back(lr.mean_g);
        }
        result.steps.push_back(std::move(diag));
    };

    switch (config.stages) {
        case StageVariant::Staged:
            for (int m = 1; m <= config.steps; ++m) run_block(m, config.freeze, config.stages);
            break;
        case StageVariant::TerminalOnly:
            // Same epoch budget, single loss at the last level, nothing frozen.
            for (int m = 1; m <= config.steps; ++m) {
                run_block(config.steps, /*freeze=*/false, StageVariant::Staged);
            }
            break;
        case StageVariant::MeanOfKls:
            // One epoch costs steps * batch_size calls, so the call budget is
            // matched by running `epochs` updates in total.
            run_block(config.steps, /*freeze=*/false, config.stages);
            break;
    }
    return result;
}

EstimateReport importance_estimate(const FlowModel& model, const Problem& problem, long long n_is,
                                   Rng& rng) {
    if (n_is < 1) throw std::invalid_argument("importance_estimate: n_is must be >= 1");
    if (model.dim != problem.dim()) {
        throw std::invalid_argument("importance_estimate: model/problem dimension mismatch");
    }
    FlowSampleResult s = flow_sample(model, n_is, model.layer_count(), rng);
    const Eigen::VectorXd log_p = std_normal_logpdf_cols(s.x);
    const Eigen::VectorXd log_w = log_p - s.log_q;

    EstimateReport report;
    report.n_samples = n_is;
    report.calls = n_is;

    double hit_lse_max = -std::numeric_limits<double>::infinity();
    std::vector<char> hit(n_is, 0);
    for (long long i = 0; i < n_is; ++i) {
        const double gval = problem.eval_g(s.x.col(i));
        if (problem.member(gval)) {
            hit[i] = 1;
            ++report.hits;
            hit_lse_max = std::max(hit_lse_max, log_w(i));
        }
    }

    if (report.hits == 0) {
        report.p_est = 0.0;
        report.zero_hit_warning = true;
    } else {
        double acc = 0.0;
        for (long long i = 0; i < n_is; ++i) {
            if (hit[i]) acc += std::exp(log_w(i) - hit_lse_max);
        }
        report.p_est = std::exp(hit_lse_max + std::log(acc) - std::log(static_cast<double>(n_is)));
    }

    // Weight diagnostics over the whole batch, computed under a shift so the
    // normalization never overflows.
    const double shift = log_w.maxCoeff();
    const Eigen::ArrayXd u = (log_w.array() - shift).exp();
    const double total = u.sum();
    report.weights.max_share = u.maxCoeff() / total;
    report.weights.effective_sample_size = total * total / u.square().sum();
    return report;
}

double temperature_lower_bound(const Problem& problem, const Bound& level,
                               const Eigen::Ref<const Eigen::VectorXd>& x_in,
                               const Eigen::Ref<const Eigen::VectorXd>& x_out,
                               std::optional<double> g_in, std::optional<double> g_out) {
    const double gi = g_in ? *g_in : problem.eval_g(x_in);
    const double go = g_out ? *g_out : problem.eval_g(x_out);
    if (!level.contains(gi)) {
        throw std::invalid_argument("temperature_lower_bound: x_in is not inside the level set");
    }
    if (level.contains(go)) {
        throw std::invalid_argument("temperature_lower_bound: x_out is not outside the level set");
    }
    const double log_ratio = 0.5 * (x_in.squaredNorm() - x_out.squaredNorm());
    const double excess = level.margin(go);
    const double bound = log_ratio / excess;
    return std::max(bound, 0.0);
}

}  // namespace nofis
