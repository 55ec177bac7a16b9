// Multilayer graph core: immutable topology, edge-list loaders, flattening,
// and matrix-free modularity-matrix products.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ldga {

using NodeId = std::uint32_t;

// One undirected, unweighted layer. Edges are stored once as (u < v) pairs;
// neighbor lists are symmetric and sorted.
struct LayerTopology {
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::vector<std::vector<NodeId>> neighbors;
    std::vector<std::uint32_t> degree;
    std::size_t edge_count = 0;

    std::size_t num_nodes() const { return neighbors.size(); }
};

struct EdgeCleanup {
    std::size_t self_loops_dropped = 0;
    std::size_t duplicate_edges_removed = 0;
};

// Canonicalizes, deduplicates, and drops self-loops, then builds the layer.
// Throws if a node index is outside [0, num_nodes).
LayerTopology make_layer(std::size_t num_nodes,
                         std::vector<std::pair<NodeId, NodeId>> edges,
                         EdgeCleanup* cleanup = nullptr);

// Shared node set across layers; no inter-layer edges.
struct MultilayerGraph {
    std::size_t num_nodes = 0;
    std::vector<LayerTopology> layers;
    // External identifier per node index, in first-appearance order.
    // Empty when nodes were created without names (e.g. by the generator).
    std::vector<std::string> node_names;

    std::size_t num_layers() const { return layers.size(); }
    std::size_t total_edges() const;
};

// Content hash over the edge sets, used for seeding and cache keys.
std::uint64_t layer_content_hash(const LayerTopology& layer);
std::uint64_t graph_content_hash(const MultilayerGraph& graph);

enum class EdgeListFormat { SingleFile, PerLayerFiles };

struct LoadSummary {
    std::size_t num_nodes = 0;
    std::size_t num_layers = 0;
    std::vector<std::size_t> layer_edge_counts;
    std::size_t self_loops_dropped = 0;
    std::size_t duplicate_edges_removed = 0;
};

// Single-file format: "layer u v" rows, '#' comments, blank lines skipped.
// Tokens (layers and nodes) map to dense indices in first-appearance order.
MultilayerGraph load_single_file_edgelist(std::istream& in,
                                          LoadSummary* summary = nullptr,
                                          const std::string& stream_name = "<stream>");

// Per-layer files: "u v" rows per file; the given order defines layer index.
MultilayerGraph load_per_layer_files(const std::vector<std::filesystem::path>& files,
                                     LoadSummary* summary = nullptr);

// Path front-end: SingleFile expects a file; PerLayerFiles expects a directory
// whose "*.edges" files, in lexicographic order, define the layers.
MultilayerGraph load_multilayer_edgelist(const std::filesystem::path& path,
                                         EdgeListFormat format,
                                         LoadSummary* summary = nullptr);

// Layer-aggregated weighted graph: weight = number of layers containing the edge.
struct FlatGraph {
    std::size_t num_nodes = 0;
    std::vector<std::tuple<NodeId, NodeId, std::uint32_t>> edges;
    std::vector<std::vector<std::pair<NodeId, std::uint32_t>>> neighbors;
    std::vector<double> strength;  // weighted degree
    double total_weight = 0.0;     // sum of edge weights
};

FlatGraph flatten(const MultilayerGraph& graph);

// y = B x with B = A - gamma * d d^T / (2m), computed without materializing B.
// Cost is O(m + N). Throws if the layer has no edges.
Eigen::VectorXd modularity_matvec(const LayerTopology& layer, double gamma,
                                  const Eigen::VectorXd& x);

}  // namespace ldga
