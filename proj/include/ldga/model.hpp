// Forward model: community-latent enrichment, per-layer edge-restricted
// attention, concatenate/down-project aggregation with residual, shared
// feed-forward scorer, and consensus allocation.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ldga/embed.hpp"
#include "ldga/graph.hpp"

namespace ldga {

struct ModelConfig {
    std::uint32_t dim = 512;
    std::uint32_t ffn_dim = 1024;
    std::uint32_t kappa = 8;
    double prelu_init = 0.25;
    double prototype_std = 0.02;
};

struct LayerParameters {
    Mat attn_q, attn_k, attn_v;  // d x d
    Mat prototypes;              // kappa x d
    double fusion = 0.0;         // starts at 0 so prototypes cannot distort inputs
};

struct ModelParameters {
    std::vector<LayerParameters> layer;
    Mat out_proj;    // (L*d) x d
    Mat scorer_w1;   // d x ffn
    Vec scorer_b1;   // ffn
    Mat scorer_w2;   // ffn x kappa
    Vec scorer_b2;   // kappa
    double prelu_slope = 0.25;

    std::size_t num_layers() const { return layer.size(); }
    std::size_t dim() const { return layer.empty() ? 0 : static_cast<std::size_t>(layer[0].attn_q.rows()); }
    std::size_t ffn_dim() const { return static_cast<std::size_t>(scorer_b1.size()); }
    std::size_t kappa() const { return static_cast<std::size_t>(scorer_b2.size()); }

    // Projection and scorer weights uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)),
    // prototypes normal(0, prototype_std), fusion coefficients zero.
    static ModelParameters init(std::size_t num_layers, const ModelConfig& config,
                                std::uint64_t seed);
};

// L slices of N x kappa row-stochastic assignments.
struct SoftAssignments {
    std::vector<Mat> layers;

    std::size_t num_layers() const { return layers.size(); }
    std::size_t num_nodes() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers[0].rows()); }
    std::size_t kappa() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers[0].cols()); }
};

struct ConsensusPartition {
    std::vector<std::uint32_t> labels;
    std::vector<double> confidence;
};

// Z' = Z + fusion * prev * prototypes, per layer. With no previous
// assignments the output equals the input exactly.
FeatureTensor cle_enrich(const FeatureTensor& features, const SoftAssignments* prev,
                         const ModelParameters& params);

// Attention restricted to the layer's edges; isolated nodes attend to
// themselves. Cost O(m_s * d) plus the three N x d projections.
Mat sparse_attention(const Mat& enriched, const LayerTopology& layer,
                     const LayerParameters& params);

// Concatenate heads, down-project, add the residual per layer.
FeatureTensor aggregate_heads(const std::vector<Mat>& head_outputs,
                              const FeatureTensor& enriched, const ModelParameters& params);

// Shared scorer: softmax(W2 * prelu(W1 z + b1) + b2) per row.
Mat score(const Mat& layer_output, const ModelParameters& params);

SoftAssignments forward(const MultilayerGraph& graph, const FeatureTensor& features,
                        const ModelParameters& params, const SoftAssignments* prev);

// argmax over all (layer, community) entries; ties prefer the smallest
// community index, then the smallest layer index.
ConsensusPartition global_allocate(const SoftAssignments& assignments);

// Number of distinct labels present in the partition.
std::size_t count_nonempty(const ConsensusPartition& partition, std::uint32_t kappa);

// Intermediates retained for the backward pass.
struct LayerForwardCache {
    Mat enriched;             // Z'
    Mat q, k, v;              // N x d
    std::vector<double> attn;      // weights aligned with attn_offsets/attn_targets
    std::vector<std::size_t> attn_offsets;  // per node, into attn_targets
    std::vector<NodeId> attn_targets;
    Mat head_out;             // attention output
    Mat scorer_in;            // Z_uni + Z'
    Mat scorer_pre;           // W1 z + b1
    Mat scorer_hidden;        // prelu(scorer_pre)
    Mat assign;               // C
};

struct ForwardCache {
    std::vector<LayerForwardCache> layer;
    Mat z_heads;  // N x (L*d)
    Mat z_uni;    // N x d
};

SoftAssignments forward_cached(const MultilayerGraph& graph, const FeatureTensor& features,
                               const ModelParameters& params, const SoftAssignments* prev,
                               ForwardCache& cache);

}  // namespace ldga
