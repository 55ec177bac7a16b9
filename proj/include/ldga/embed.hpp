// Per-layer feature initialization: truncated uniform random walks feeding
// skip-gram with negative sampling, run independently on every layer.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ldga/graph.hpp"

namespace ldga {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct WalkConfig {
    std::uint32_t window = 10;
    std::uint32_t walks_per_node = 20;
    std::uint32_t walk_length = 80;
    std::uint32_t dim = 512;
    std::uint32_t negatives = 5;
    std::uint32_t epochs = 1;
    double learning_rate = 0.025;
    std::uint64_t seed = 42;
};

void validate(const WalkConfig& config);

// L slices of N x d features, one per layer.
struct FeatureTensor {
    std::vector<Mat> layers;

    std::size_t num_layers() const { return layers.size(); }
    std::size_t num_nodes() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers[0].rows()); }
    std::size_t dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers[0].cols()); }
};

// walks_per_node walks from every node; isolated nodes yield a length-1 walk,
// all others walk exactly walk_length steps. Each walk draws from its own
// stream keyed by (seed, node, round), so results are order-independent.
std::vector<std::vector<NodeId>> random_walks(const LayerTopology& layer,
                                              const WalkConfig& config);

// Returns the N x d input-embedding matrix. With epochs == 0 this is the
// initialization: entries i.i.d. uniform in (-0.5/d, 0.5/d).
Mat train_skipgram(const std::vector<std::vector<NodeId>>& walks, std::size_t num_nodes,
                   const WalkConfig& config);

// Stacks per-layer embeddings; each layer's seed is derived from the layer's
// content hash, so permuting layers permutes the slices.
FeatureTensor init_features(const MultilayerGraph& graph, const WalkConfig& config);

}  // namespace ldga
