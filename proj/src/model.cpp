#include "ldga/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ldga/rng.hpp"

namespace ldga {

namespace {

Mat uniform_fan_in(std::size_t rows, std::size_t cols, std::size_t fan_in, RngStream& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
    return m;
}

Vec uniform_fan_in_vec(std::size_t size, std::size_t fan_in, RngStream& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Vec v(size);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-bound, bound);
    return v;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

// Attention adjacency for one layer: a node's targets are its neighbors, or
// itself when it has none (softmax must stay defined).
void build_attention_adjacency(const LayerTopology& layer, LayerForwardCache& cache) {
    const std::size_t n = layer.num_nodes();
    cache.attn_offsets.assign(n + 1, 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cache.attn_offsets[i] = total;
        total += layer.degree[i] > 0 ? layer.degree[i] : 1;
    }
    cache.attn_offsets[n] = total;
    cache.attn_targets.resize(total);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t at = cache.attn_offsets[i];
        if (layer.degree[i] == 0) {
            cache.attn_targets[at] = static_cast<NodeId>(i);
        } else {
            for (NodeId j : layer.neighbors[i]) cache.attn_targets[at++] = j;
        }
    }
}

// Projections, per-edge softmax with max-subtraction, weighted value sum.
// Fills q/k/v/attn/head_out of the cache.
void attention_into_cache(const Mat& enriched, const LayerTopology& layer,
                          const LayerParameters& params, LayerForwardCache& lc) {
    build_attention_adjacency(layer, lc);
    lc.q.noalias() = enriched * params.attn_q;
    lc.k.noalias() = enriched * params.attn_k;
    lc.v.noalias() = enriched * params.attn_v;
    const auto n = enriched.rows();
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(enriched.cols()));
    lc.attn.resize(lc.attn_targets.size());
    lc.head_out = Mat::Zero(n, enriched.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t begin = lc.attn_offsets[i], end = lc.attn_offsets[i + 1];
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t a = begin; a < end; ++a) {
            const double e = lc.q.row(i).dot(lc.k.row(lc.attn_targets[a])) * inv_sqrt_d;
            lc.attn[a] = e;
            max_score = std::max(max_score, e);
        }
        double z = 0.0;
        for (std::size_t a = begin; a < end; ++a) {
            lc.attn[a] = std::exp(lc.attn[a] - max_score);
            z += lc.attn[a];
        }
        for (std::size_t a = begin; a < end; ++a) {
            lc.attn[a] /= z;
            lc.head_out.row(i) += lc.attn[a] * lc.v.row(lc.attn_targets[a]);
        }
    }
}

}  // namespace

ModelParameters ModelParameters::init(std::size_t num_layers, const ModelConfig& config,
                                      std::uint64_t seed) {
    require(num_layers >= 1, "ModelParameters::init: need at least one layer");
    require(config.dim > 0 && config.ffn_dim > 0 && config.kappa > 0,
            "ModelParameters::init: dims must be positive");
    const std::size_t d = config.dim;
    ModelParameters p;
    p.layer.resize(num_layers);
    for (std::size_t s = 0; s < num_layers; ++s) {
        RngStream rng(mix64(seed, 0x6c617965, s));  // "laye"
        p.layer[s].attn_q = uniform_fan_in(d, d, d, rng);
        p.layer[s].attn_k = uniform_fan_in(d, d, d, rng);
        p.layer[s].attn_v = uniform_fan_in(d, d, d, rng);
        p.layer[s].prototypes = Mat(config.kappa, d);
        for (Eigen::Index i = 0; i < p.layer[s].prototypes.rows(); ++i)
            for (Eigen::Index j = 0; j < p.layer[s].prototypes.cols(); ++j)
                p.layer[s].prototypes(i, j) = rng.normal(0.0, config.prototype_std);
        p.layer[s].fusion = 0.0;
    }
    RngStream rng(mix64(seed, 0x73686172));  // "shar"
    p.out_proj = uniform_fan_in(num_layers * d, d, num_layers * d, rng);
    p.scorer_w1 = uniform_fan_in(d, config.ffn_dim, d, rng);
    p.scorer_b1 = uniform_fan_in_vec(config.ffn_dim, d, rng);
    p.scorer_w2 = uniform_fan_in(config.ffn_dim, config.kappa, config.ffn_dim, rng);
    p.scorer_b2 = uniform_fan_in_vec(config.kappa, config.ffn_dim, rng);
    p.prelu_slope = config.prelu_init;
    return p;
}

FeatureTensor cle_enrich(const FeatureTensor& features, const SoftAssignments* prev,
                         const ModelParameters& params) {
    require(features.num_layers() == params.num_layers(),
            "cle_enrich: layer count mismatch");
    FeatureTensor out;
    out.layers.reserve(features.num_layers());
    for (std::size_t s = 0; s < features.num_layers(); ++s) {
        if (prev == nullptr) {
            out.layers.push_back(features.layers[s]);
            continue;
        }
        const Mat& c = prev->layers.at(s);
        const Mat& e = params.layer[s].prototypes;
        require(c.rows() == features.layers[s].rows(), "cle_enrich: node count mismatch");
        require(c.cols() == e.rows(), "cle_enrich: kappa mismatch");
        require(e.cols() == features.layers[s].cols(), "cle_enrich: dim mismatch");
        out.layers.push_back(features.layers[s] + params.layer[s].fusion * (c * e));
    }
    return out;
}

Mat sparse_attention(const Mat& enriched, const LayerTopology& layer,
                     const LayerParameters& params) {
    require(static_cast<std::size_t>(enriched.rows()) == layer.num_nodes(),
            "sparse_attention: node count mismatch");
    LayerForwardCache cache;
    attention_into_cache(enriched, layer, params, cache);
    return cache.head_out;
}

FeatureTensor aggregate_heads(const std::vector<Mat>& head_outputs,
                              const FeatureTensor& enriched, const ModelParameters& params) {
    const std::size_t l = params.num_layers();
    require(head_outputs.size() == l, "aggregate_heads: head count mismatch");
    const auto n = enriched.layers.at(0).rows();
    const auto d = enriched.layers.at(0).cols();
    require(params.out_proj.rows() == static_cast<Eigen::Index>(l) * d,
            "aggregate_heads: out_proj shape mismatch");
    Mat z_heads(n, static_cast<Eigen::Index>(l) * d);
    for (std::size_t s = 0; s < l; ++s) {
        require(head_outputs[s].rows() == n && head_outputs[s].cols() == d,
                "aggregate_heads: head shape mismatch");
        z_heads.middleCols(static_cast<Eigen::Index>(s) * d, d) = head_outputs[s];
    }
    Mat z_uni = z_heads * params.out_proj;
    FeatureTensor out;
    out.layers.reserve(l);
    for (std::size_t s = 0; s < l; ++s) out.layers.push_back(z_uni + enriched.layers[s]);
    return out;
}

Mat score(const Mat& layer_output, const ModelParameters& params) {
    require(layer_output.cols() == params.scorer_w1.rows(), "score: dim mismatch");
    Mat pre = layer_output * params.scorer_w1;
    pre.rowwise() += params.scorer_b1.transpose();
    const double a = params.prelu_slope;
    Mat hidden = pre.unaryExpr([a](double x) { return x >= 0.0 ? x : a * x; });
    Mat logits = hidden * params.scorer_w2;
    logits.rowwise() += params.scorer_b2.transpose();
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        logits.row(i) = (logits.row(i).array() - m).exp();
        logits.row(i) /= logits.row(i).sum();
    }
    return logits;
}

SoftAssignments forward_cached(const MultilayerGraph& graph, const FeatureTensor& features,
                               const ModelParameters& params, const SoftAssignments* prev,
                               ForwardCache& cache) {
    const std::size_t l = graph.num_layers();
    require(features.num_layers() == l, "forward: feature layer count mismatch");
    require(params.num_layers() == l, "forward: parameter layer count mismatch");
    require(features.num_nodes() == graph.num_nodes, "forward: node count mismatch");
    if (prev) {
        require(prev->num_layers() == l && prev->num_nodes() == graph.num_nodes &&
                    prev->kappa() == params.kappa(),
                "forward: previous assignment shape mismatch");
    }
    const auto n = static_cast<Eigen::Index>(graph.num_nodes);
    const auto d = static_cast<Eigen::Index>(params.dim());

    const FeatureTensor enriched = cle_enrich(features, prev, params);

    cache.layer.assign(l, {});
    cache.z_heads.resize(n, static_cast<Eigen::Index>(l) * d);
    for (std::size_t s = 0; s < l; ++s) {
        auto& lc = cache.layer[s];
        lc.enriched = enriched.layers[s];
        attention_into_cache(lc.enriched, graph.layers[s], params.layer[s], lc);
        cache.z_heads.middleCols(static_cast<Eigen::Index>(s) * d, d) = lc.head_out;
    }

    cache.z_uni.noalias() = cache.z_heads * params.out_proj;

    SoftAssignments assignments;
    assignments.layers.reserve(l);
    const double slope = params.prelu_slope;
    for (std::size_t s = 0; s < l; ++s) {
        auto& lc = cache.layer[s];
        lc.scorer_in = cache.z_uni + lc.enriched;
        lc.scorer_pre = lc.scorer_in * params.scorer_w1;
        lc.scorer_pre.rowwise() += params.scorer_b1.transpose();
        lc.scorer_hidden = lc.scorer_pre.unaryExpr(
            [slope](double x) { return x >= 0.0 ? x : slope * x; });
        Mat logits = lc.scorer_hidden * params.scorer_w2;
        logits.rowwise() += params.scorer_b2.transpose();
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const double m = logits.row(i).maxCoeff();
            logits.row(i) = (logits.row(i).array() - m).exp();
            logits.row(i) /= logits.row(i).sum();
        }
        lc.assign = logits;
        assignments.layers.push_back(std::move(logits));
    }
    return assignments;
}

SoftAssignments forward(const MultilayerGraph& graph, const FeatureTensor& features,
                        const ModelParameters& params, const SoftAssignments* prev) {
    ForwardCache cache;
    return forward_cached(graph, features, params, prev, cache);
}

ConsensusPartition global_allocate(const SoftAssignments& assignments) {
    const std::size_t l = assignments.num_layers();
    const std::size_t n = assignments.num_nodes();
    const std::size_t kappa = assignments.kappa();
    ConsensusPartition partition;
    partition.labels.assign(n, 0);
    partition.confidence.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double best = -1.0;
        std::uint32_t best_p = 0;
        // Community-major scan with strict improvement: ties resolve to the
        // smallest community index, then the smallest layer index.
        for (std::size_t p = 0; p < kappa; ++p) {
            for (std::size_t s = 0; s < l; ++s) {
                const double v = assignments.layers[s](static_cast<Eigen::Index>(i),
                                                       static_cast<Eigen::Index>(p));
                if (v > best) {
                    best = v;
                    best_p = static_cast<std::uint32_t>(p);
                }
            }
        }
        partition.labels[i] = best_p;
        partition.confidence[i] = best;
    }
    return partition;
}

std::size_t count_nonempty(const ConsensusPartition& partition, std::uint32_t kappa) {
    std::vector<bool> used(kappa, false);
    for (std::uint32_t label : partition.labels) {
        if (label >= kappa) throw std::out_of_range("count_nonempty: label out of range");
        used[label] = true;
    }
    std::size_t count = 0;
    for (bool u : used) count += u;
    return count;
}

}  // namespace ldga
