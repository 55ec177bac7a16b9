// Deterministic multilayer planted-partition benchmark generator:
// power-law community sizes and degrees, per-layer configuration-model
// stub matching with a mixing parameter, shared ground-truth labels.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ldga/graph.hpp"

namespace ldga {

struct GeneratorConfig {
    std::size_t num_nodes = 500;
    std::size_t num_layers = 4;
    double mu = 0.2;                  // probability an edge crosses communities
    std::uint32_t avg_degree = 16;
    std::uint32_t max_degree = 32;
    double degree_exponent = 2.0;     // power law for node degrees
    double community_exponent = 1.0;  // power law for community sizes
    std::size_t num_communities = 0;  // 0 = auto
    double community_size_ratio = 1.5;  // max/min community size in a draw
    std::uint64_t seed = 1;
};

struct GroundTruth {
    std::vector<std::uint32_t> labels;
    std::size_t num_communities = 0;
};

// Community count used when config.num_communities == 0.
std::size_t auto_community_count(const GeneratorConfig& config);

// Deterministic given config (bit-for-bit): same seed, same graph and labels.
std::pair<MultilayerGraph, GroundTruth> generate(const GeneratorConfig& config);

// Per-layer fraction of edges whose endpoints carry different labels.
std::vector<double> mixing_fraction(const MultilayerGraph& graph, const GroundTruth& truth);

}  // namespace ldga
