// Partition quality metrics: NMI, ARI, Purity, multilayer modularity, and a
// flatten + label-propagation baseline.
#pragma once

#include <cstdint>
#include <vector>

#include "ldga/graph.hpp"
#include "ldga/model.hpp"

namespace ldga {

using Labels = std::vector<std::uint32_t>;

enum class NmiNormalization { Geometric, Arithmetic, Max };

// Mutual information over the contingency table, natural log. When both
// entropies are zero: 1 if the partitions are identical, else 0; when exactly
// one is zero: 0.
double nmi(const Labels& pred, const Labels& truth,
           NmiNormalization norm = NmiNormalization::Geometric);

// Pair-counting adjusted Rand index with expected-index correction.
double ari(const Labels& pred, const Labels& truth);

// (1/N) * sum over predicted clusters of their largest truth-class overlap.
double purity(const Labels& pred, const Labels& truth);

struct MetricConfig {
    double resolution = 1.0;  // gamma
    double coupling = 1.0;    // ell
};

// Mucha-style multilayer modularity of a consensus partition. All nodes agree
// with themselves across layers, so the coupling contribution is
// ell * N * L * (L-1) over ordered layer pairs, and
// omega = sum_s m_s + ell * N * L * (L-1) / 2.
double multilayer_modularity(const MultilayerGraph& graph, const Labels& labels,
                             const MetricConfig& config);

// Asynchronous weighted label propagation on the flattened graph; random node
// order per sweep, stops when a sweep changes nothing or after 100 sweeps.
// Labels are compacted to 0..k-1 in first-appearance order.
ConsensusPartition label_propagation_baseline(const MultilayerGraph& graph, std::uint64_t seed);

}  // namespace ldga
