#include "ldga/objective.hpp"

#include <cmath>
#include <string>

namespace ldga {

namespace {

void check_finite(const Mat& m, const char* name) {
    if (!m.allFinite()) throw NonFiniteError(std::string("non-finite values in ") + name);
}

// B^(s) C, one modularity_matvec per assignment column.
Mat modularity_product(const LayerTopology& layer, double gamma, const Mat& c) {
    Mat out(c.rows(), c.cols());
    for (Eigen::Index p = 0; p < c.cols(); ++p) {
        const Vec x = c.col(p);
        out.col(p) = modularity_matvec(layer, gamma, x);
    }
    return out;
}

double theta_of(const MultilayerGraph& graph) {
    return static_cast<double>(graph.total_edges());
}

void validate_assignments(const SoftAssignments& assignments, const MultilayerGraph& graph,
                          const LossConfig& config) {
    if (assignments.num_layers() != graph.num_layers())
        throw std::invalid_argument("loss: assignment layer count mismatch");
    if (assignments.num_nodes() != graph.num_nodes)
        throw std::invalid_argument("loss: assignment node count mismatch");
    if (assignments.kappa() != config.kappa)
        throw std::invalid_argument("loss: assignment kappa mismatch");
}

Mat pooled_mean(const SoftAssignments& assignments) {
    Mat mean = assignments.layers[0];
    for (std::size_t s = 1; s < assignments.num_layers(); ++s) mean += assignments.layers[s];
    mean /= static_cast<double>(assignments.num_layers());
    return mean;
}

double skew_sum(const Mat& c) {
    const double target = static_cast<double>(c.rows()) / static_cast<double>(c.cols());
    double s = 0.0;
    for (Eigen::Index p = 0; p < c.cols(); ++p) {
        const double dev = c.col(p).sum() - target;
        s += dev * dev;
    }
    return s;
}

}  // namespace

double modularity_term(const SoftAssignments& assignments, const MultilayerGraph& graph,
                       const LossConfig& config) {
    validate_assignments(assignments, graph, config);
    const double theta = theta_of(graph);
    if (theta <= 0.0) throw std::runtime_error("modularity_term: graph has no edges");
    double trace_sum = 0.0;
    if (config.mode == LossMode::Pooled) {
        const Mat mean = pooled_mean(assignments);
        for (std::size_t s = 0; s < graph.num_layers(); ++s) {
            if (graph.layers[s].edge_count == 0) continue;
            trace_sum += (mean.array() *
                          modularity_product(graph.layers[s], config.gamma_for(s), mean).array())
                             .sum();
        }
    } else {
        for (std::size_t s = 0; s < graph.num_layers(); ++s) {
            if (graph.layers[s].edge_count == 0) continue;
            const Mat& c = assignments.layers[s];
            trace_sum +=
                (c.array() *
                 modularity_product(graph.layers[s], config.gamma_for(s), c).array())
                    .sum();
        }
    }
    return -trace_sum / theta;
}

double balance_term(const SoftAssignments& assignments, const LossConfig& config) {
    if (config.kappa < 2)
        throw std::invalid_argument("balance undefined for one community");
    if (assignments.kappa() != config.kappa)
        throw std::invalid_argument("balance_term: assignment kappa mismatch");
    const double n = static_cast<double>(assignments.num_nodes());
    const double kappa = static_cast<double>(config.kappa);
    const double scale = config.alpha * kappa / (n * n * (kappa - 1.0));
    if (config.mode == LossMode::Pooled) return scale * skew_sum(pooled_mean(assignments));
    double s = 0.0;
    for (const auto& c : assignments.layers) s += skew_sum(c);
    return scale * s / static_cast<double>(assignments.num_layers());
}

LossBreakdown loss_soft(const SoftAssignments& assignments, const MultilayerGraph& graph,
                        const LossConfig& config) {
    LossBreakdown out;
    out.modularity_term = modularity_term(assignments, graph, config);
    out.balance_term = balance_term(assignments, config);
    out.total = out.modularity_term + out.balance_term;
    out.theta = theta_of(graph);
    return out;
}

ModelGradients ModelGradients::zeros_like(const ModelParameters& params) {
    ModelGradients g;
    g.layer.resize(params.num_layers());
    for (std::size_t s = 0; s < params.num_layers(); ++s) {
        g.layer[s].attn_q = Mat::Zero(params.layer[s].attn_q.rows(), params.layer[s].attn_q.cols());
        g.layer[s].attn_k = Mat::Zero(params.layer[s].attn_k.rows(), params.layer[s].attn_k.cols());
        g.layer[s].attn_v = Mat::Zero(params.layer[s].attn_v.rows(), params.layer[s].attn_v.cols());
        g.layer[s].prototypes =
            Mat::Zero(params.layer[s].prototypes.rows(), params.layer[s].prototypes.cols());
        g.layer[s].fusion = 0.0;
    }
    g.out_proj = Mat::Zero(params.out_proj.rows(), params.out_proj.cols());
    g.scorer_w1 = Mat::Zero(params.scorer_w1.rows(), params.scorer_w1.cols());
    g.scorer_b1 = Vec::Zero(params.scorer_b1.size());
    g.scorer_w2 = Mat::Zero(params.scorer_w2.rows(), params.scorer_w2.cols());
    g.scorer_b2 = Vec::Zero(params.scorer_b2.size());
    g.prelu_slope = 0.0;
    return g;
}

BackwardResult backward(const MultilayerGraph& graph, const FeatureTensor& features,
                        const ModelParameters& params, const SoftAssignments* prev,
                        const LossConfig& config) {
    ForwardCache cache;
    SoftAssignments assignments = forward_cached(graph, features, params, prev, cache);
    for (std::size_t s = 0; s < assignments.num_layers(); ++s) {
        check_finite(cache.layer[s].enriched, "enriched features");
        check_finite(cache.layer[s].head_out, "attention output");
        check_finite(cache.layer[s].assign, "soft assignments");
    }
    check_finite(cache.z_uni, "unified representation");

    const std::size_t l = graph.num_layers();
    const auto n = static_cast<Eigen::Index>(graph.num_nodes);
    const auto d = static_cast<Eigen::Index>(params.dim());
    const double theta = theta_of(graph);
    if (theta <= 0.0) throw std::runtime_error("backward: graph has no edges");
    validate_assignments(assignments, graph, config);
    if (config.kappa < 2) throw std::invalid_argument("balance undefined for one community");

    // Loss and d loss / d C per layer.
    const double nn = static_cast<double>(graph.num_nodes);
    const double kappa = static_cast<double>(config.kappa);
    const double bal_scale = config.alpha * kappa / (nn * nn * (kappa - 1.0));
    const double target = nn / kappa;
    double trace_sum = 0.0;
    double skew = 0.0;
    std::vector<Mat> d_assign(l);

    if (config.mode == LossMode::Pooled) {
        const Mat mean = pooled_mean(assignments);
        Mat d_mean = Mat::Zero(n, config.kappa);
        for (std::size_t s = 0; s < l; ++s) {
            if (graph.layers[s].edge_count == 0) continue;
            const Mat bc = modularity_product(graph.layers[s], config.gamma_for(s), mean);
            trace_sum += (mean.array() * bc.array()).sum();
            d_mean -= (2.0 / theta) * bc;
        }
        skew = skew_sum(mean);
        const Eigen::RowVectorXd dev = mean.colwise().sum().array() - target;
        d_mean.rowwise() += (2.0 * bal_scale) * dev;
        for (std::size_t s = 0; s < l; ++s) d_assign[s] = d_mean / static_cast<double>(l);
    } else {
        for (std::size_t s = 0; s < l; ++s) {
            const Mat& c = assignments.layers[s];
            d_assign[s] = Mat::Zero(n, config.kappa);
            if (graph.layers[s].edge_count > 0) {
                const Mat bc = modularity_product(graph.layers[s], config.gamma_for(s), c);
                trace_sum += (c.array() * bc.array()).sum();
                d_assign[s] -= (2.0 / theta) * bc;
            }
            skew += skew_sum(c);
            const Eigen::RowVectorXd dev = c.colwise().sum().array() - target;
            d_assign[s].rowwise() += (2.0 * bal_scale / static_cast<double>(l)) * dev;
        }
        skew /= static_cast<double>(l);
    }

    LossBreakdown loss;
    loss.modularity_term = -trace_sum / theta;
    loss.balance_term = bal_scale * skew;
    loss.total = loss.modularity_term + loss.balance_term;
    loss.theta = theta;
    if (!std::isfinite(loss.total)) throw NonFiniteError("non-finite values in loss");

    ModelGradients grads = ModelGradients::zeros_like(params);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    Mat d_uni = Mat::Zero(n, d);
    std::vector<Mat> d_enriched(l, Mat::Zero(n, d));

    // Scorer (shared across layers) and residual split.
    for (std::size_t s = 0; s < l; ++s) {
        const auto& lc = cache.layer[s];
        const Mat& c = lc.assign;
        // Softmax rows: dG = C o (dC - rowdot 1^T).
        const Vec rowdot = (d_assign[s].array() * c.array()).rowwise().sum();
        const Mat d_logits =
            (c.array() * (d_assign[s].array().colwise() - rowdot.array())).matrix();
        grads.scorer_b2 += d_logits.colwise().sum();
        grads.scorer_w2.noalias() += lc.scorer_hidden.transpose() * d_logits;
        const Mat d_hidden = d_logits * params.scorer_w2.transpose();
        Mat d_pre(d_hidden.rows(), d_hidden.cols());
        double d_slope = 0.0;
        for (Eigen::Index i = 0; i < d_pre.rows(); ++i) {
            for (Eigen::Index j = 0; j < d_pre.cols(); ++j) {
                const double pre = lc.scorer_pre(i, j);
                if (pre >= 0.0) {
                    d_pre(i, j) = d_hidden(i, j);
                } else {
                    d_pre(i, j) = params.prelu_slope * d_hidden(i, j);
                    d_slope += d_hidden(i, j) * pre;
                }
            }
        }
        grads.prelu_slope += d_slope;
        grads.scorer_b1 += d_pre.colwise().sum();
        grads.scorer_w1.noalias() += lc.scorer_in.transpose() * d_pre;
        const Mat d_in = d_pre * params.scorer_w1.transpose();
        d_uni += d_in;
        d_enriched[s] += d_in;  // residual branch
    }

    // Aggregation.
    grads.out_proj.noalias() = cache.z_heads.transpose() * d_uni;
    const Mat d_heads = d_uni * params.out_proj.transpose();

    // Attention, per layer.
    for (std::size_t s = 0; s < l; ++s) {
        const auto& lc = cache.layer[s];
        const auto d_head = d_heads.middleCols(static_cast<Eigen::Index>(s) * d, d);
        Mat d_q = Mat::Zero(n, d);
        Mat d_k = Mat::Zero(n, d);
        Mat d_v = Mat::Zero(n, d);
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::size_t begin = lc.attn_offsets[i], end = lc.attn_offsets[i + 1];
            double weighted = 0.0;  // sum_a alpha_a * dalpha_a
            for (std::size_t a = begin; a < end; ++a)
                weighted += lc.attn[a] * d_head.row(i).dot(lc.v.row(lc.attn_targets[a]));
            for (std::size_t a = begin; a < end; ++a) {
                const NodeId j = lc.attn_targets[a];
                const double alpha = lc.attn[a];
                d_v.row(j) += alpha * d_head.row(i);
                const double d_score =
                    alpha * (d_head.row(i).dot(lc.v.row(j)) - weighted) * inv_sqrt_d;
                d_q.row(i) += d_score * lc.k.row(j);
                d_k.row(j) += d_score * lc.q.row(i);
            }
        }
        grads.layer[s].attn_q.noalias() = lc.enriched.transpose() * d_q;
        grads.layer[s].attn_k.noalias() = lc.enriched.transpose() * d_k;
        grads.layer[s].attn_v.noalias() = lc.enriched.transpose() * d_v;
        d_enriched[s].noalias() += d_q * params.layer[s].attn_q.transpose();
        d_enriched[s].noalias() += d_k * params.layer[s].attn_k.transpose();
        d_enriched[s].noalias() += d_v * params.layer[s].attn_v.transpose();
    }

    // Community-latent enrichment; previous assignments are constants.
    if (prev != nullptr) {
        for (std::size_t s = 0; s < l; ++s) {
            const Mat& p = prev->layers[s];
            const Mat pe = p * params.layer[s].prototypes;
            grads.layer[s].fusion = (pe.array() * d_enriched[s].array()).sum();
            grads.layer[s].prototypes.noalias() =
                params.layer[s].fusion * (p.transpose() * d_enriched[s]);
        }
    }

    return {std::move(grads), loss, std::move(assignments)};
}

AdamWState AdamWState::init(const ModelParameters& params) {
    AdamWState state;
    state.m = ModelGradients::zeros_like(params);
    state.v = ModelGradients::zeros_like(params);
    state.step = 0;
    return state;
}

namespace {

void adam_update(Mat& w, const Mat& g, Mat& m, Mat& v, double lr, double b1, double b2,
                 double eps, double decay, double bc1, double bc2) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v.array().matrix() + (1.0 - b2) * g.array().square().matrix();
    if (decay > 0.0) w -= lr * decay * w;
    w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

void adam_update(Vec& w, const Vec& g, Vec& m, Vec& v, double lr, double b1, double b2,
                 double eps, double decay, double bc1, double bc2) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v.array().matrix() + (1.0 - b2) * g.array().square().matrix();
    if (decay > 0.0) w -= lr * decay * w;
    w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

void adam_update(double& w, double g, double& m, double& v, double lr, double b1, double b2,
                 double eps, double decay, double bc1, double bc2) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    if (decay > 0.0) w -= lr * decay * w;
    w -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
}

}  // namespace

void adamw_step(ModelParameters& params, const ModelGradients& grads, AdamWState& state,
                const AdamWConfig& config) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    const double lr = config.learning_rate;
    const double wd = config.weight_decay;
    for (std::size_t s = 0; s < params.num_layers(); ++s) {
        auto& p = params.layer[s];
        const auto& g = grads.layer[s];
        auto& m = state.m.layer[s];
        auto& v = state.v.layer[s];
        adam_update(p.attn_q, g.attn_q, m.attn_q, v.attn_q, lr, config.beta1, config.beta2,
                    config.epsilon, wd, bc1, bc2);
        adam_update(p.attn_k, g.attn_k, m.attn_k, v.attn_k, lr, config.beta1, config.beta2,
                    config.epsilon, wd, bc1, bc2);
        adam_update(p.attn_v, g.attn_v, m.attn_v, v.attn_v, lr, config.beta1, config.beta2,
                    config.epsilon, wd, bc1, bc2);
        adam_update(p.prototypes, g.prototypes, m.prototypes, v.prototypes, lr, config.beta1,
                    config.beta2, config.epsilon, wd, bc1, bc2);
        // No decay on fusion: it must be free to grow from zero.
        adam_update(p.fusion, g.fusion, m.fusion, v.fusion, lr, config.beta1, config.beta2,
                    config.epsilon, 0.0, bc1, bc2);
    }
    adam_update(params.out_proj, grads.out_proj, state.m.out_proj, state.v.out_proj, lr,
                config.beta1, config.beta2, config.epsilon, wd, bc1, bc2);
    adam_update(params.scorer_w1, grads.scorer_w1, state.m.scorer_w1, state.v.scorer_w1, lr,
                config.beta1, config.beta2, config.epsilon, wd, bc1, bc2);
    adam_update(params.scorer_b1, grads.scorer_b1, state.m.scorer_b1, state.v.scorer_b1, lr,
                config.beta1, config.beta2, config.epsilon, wd, bc1, bc2);
    adam_update(params.scorer_w2, grads.scorer_w2, state.m.scorer_w2, state.v.scorer_w2, lr,
                config.beta1, config.beta2, config.epsilon, wd, bc1, bc2);
    adam_update(params.scorer_b2, grads.scorer_b2, state.m.scorer_b2, state.v.scorer_b2, lr,
                config.beta1, config.beta2, config.epsilon, wd, bc1, bc2);
    adam_update(params.prelu_slope, grads.prelu_slope, state.m.prelu_slope, state.v.prelu_slope,
                lr, config.beta1, config.beta2, config.epsilon, wd, bc1, bc2);
}

LossConfig loss_config_of(const TrainConfig& config) {
    LossConfig loss;
    loss.alpha = config.alpha;
    loss.gamma = config.gamma;
    loss.mode = config.mode;
    loss.kappa = config.kappa;
    return loss;
}

TrainResult train(const MultilayerGraph& graph, const FeatureTensor& features,
                  const TrainConfig& config) {
    if (features.num_layers() != graph.num_layers() || features.num_nodes() != graph.num_nodes)
        throw std::invalid_argument("train: feature shape does not match graph");
    ModelConfig model_config;
    model_config.dim = static_cast<std::uint32_t>(features.dim());
    model_config.ffn_dim = config.ffn_dim;
    model_config.kappa = config.kappa;

    AdamWConfig opt;
    opt.learning_rate = config.learning_rate;
    opt.beta1 = config.beta1;
    opt.beta2 = config.beta2;
    opt.epsilon = config.epsilon;
    opt.weight_decay = config.weight_decay;
    const LossConfig loss_cfg = loss_config_of(config);

    TrainResult result;
    result.params = ModelParameters::init(graph.num_layers(), model_config, config.seed);
    AdamWState state = AdamWState::init(result.params);

    SoftAssignments prev;
    bool have_prev = false;
    ModelParameters last_good = result.params;
    SoftAssignments last_good_assign;

    for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
        BackwardResult step;
        try {
            step = backward(graph, features, result.params, have_prev ? &prev : nullptr, loss_cfg);
        } catch (const NonFiniteError&) {
            result.params = last_good;
            result.assignments = last_good_assign;
            result.aborted_on_nan = true;
            return result;
        }
        if (!std::isfinite(step.loss.total)) {
            result.params = last_good;
            result.assignments = last_good_assign;
            result.aborted_on_nan = true;
            return result;
        }
        result.history.push_back(step.loss);
        last_good = result.params;
        last_good_assign = step.assignments;
        adamw_step(result.params, step.grads, state, opt);
        prev = std::move(step.assignments);
        have_prev = true;
    }

    result.assignments = forward(graph, features, result.params, have_prev ? &prev : nullptr);
    return result;
}

}  // namespace ldga
