#include "ldga/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "ldga/rng.hpp"

namespace ldga {

namespace {

constexpr int kMaxSweeps = 100;

struct Contingency {
    std::vector<std::vector<std::size_t>> cells;  // pred cluster x truth class
    std::vector<std::size_t> pred_sizes;
    std::vector<std::size_t> truth_sizes;
    std::size_t n = 0;
};

std::vector<std::uint32_t> compact(const Labels& labels) {
    std::unordered_map<std::uint32_t, std::uint32_t> remap;
    std::vector<std::uint32_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] =
            remap.try_emplace(labels[i], static_cast<std::uint32_t>(remap.size()));
        out[i] = it->second;
    }
    return out;
}

Contingency contingency(const Labels& pred, const Labels& truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("metrics: label vectors differ in length");
    if (pred.empty()) throw std::invalid_argument("metrics: empty label vectors");
    const auto p = compact(pred);
    const auto t = compact(truth);
    const std::size_t kp = *std::max_element(p.begin(), p.end()) + 1;
    const std::size_t kt = *std::max_element(t.begin(), t.end()) + 1;
    Contingency c;
    c.cells.assign(kp, std::vector<std::size_t>(kt, 0));
    c.pred_sizes.assign(kp, 0);
    c.truth_sizes.assign(kt, 0);
    c.n = pred.size();
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ++c.cells[p[i]][t[i]];
        ++c.pred_sizes[p[i]];
        ++c.truth_sizes[t[i]];
    }
    return c;
}

double entropy(const std::vector<std::size_t>& sizes, std::size_t n) {
    double h = 0.0;
    for (std::size_t s : sizes) {
        if (s == 0) continue;
        const double q = static_cast<double>(s) / static_cast<double>(n);
        h -= q * std::log(q);
    }
    return h;
}

double pairs2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

double nmi(const Labels& pred, const Labels& truth, NmiNormalization norm) {
    const Contingency c = contingency(pred, truth);
    const double hp = entropy(c.pred_sizes, c.n);
    const double ht = entropy(c.truth_sizes, c.n);
    // Both single-cluster over the same nodes: identical partitions.
    if (hp == 0.0 && ht == 0.0) return 1.0;
    if (hp == 0.0 || ht == 0.0) return 0.0;
    double mi = 0.0;
    const double n = static_cast<double>(c.n);
    for (std::size_t i = 0; i < c.cells.size(); ++i) {
        for (std::size_t j = 0; j < c.cells[i].size(); ++j) {
            if (c.cells[i][j] == 0) continue;
            const double nij = static_cast<double>(c.cells[i][j]);
            mi += (nij / n) *
                  std::log(nij * n /
                           (static_cast<double>(c.pred_sizes[i]) *
                            static_cast<double>(c.truth_sizes[j])));
        }
    }
    double denom = 0.0;
    switch (norm) {
        case NmiNormalization::Geometric: denom = std::sqrt(hp * ht); break;
        case NmiNormalization::Arithmetic: denom = 0.5 * (hp + ht); break;
        case NmiNormalization::Max: denom = std::max(hp, ht); break;
    }
    return mi / denom;
}

double ari(const Labels& pred, const Labels& truth) {
    const Contingency c = contingency(pred, truth);
    double sum_cells = 0.0, sum_pred = 0.0, sum_truth = 0.0;
    for (const auto& row : c.cells)
        for (std::size_t cell : row) sum_cells += pairs2(static_cast<double>(cell));
    for (std::size_t s : c.pred_sizes) sum_pred += pairs2(static_cast<double>(s));
    for (std::size_t s : c.truth_sizes) sum_truth += pairs2(static_cast<double>(s));
    const double total = pairs2(static_cast<double>(c.n));
    const double expected = sum_pred * sum_truth / total;
    const double maximum = 0.5 * (sum_pred + sum_truth);
    if (maximum == expected) return 1.0;  // both partitions degenerate and identical in structure
    return (sum_cells - expected) / (maximum - expected);
}

double purity(const Labels& pred, const Labels& truth) {
    const Contingency c = contingency(pred, truth);
    std::size_t hit = 0;
    for (const auto& row : c.cells) hit += *std::max_element(row.begin(), row.end());
    return static_cast<double>(hit) / static_cast<double>(c.n);
}

double multilayer_modularity(const MultilayerGraph& graph, const Labels& labels,
                             const MetricConfig& config) {
    if (labels.size() != graph.num_nodes)
        throw std::invalid_argument("multilayer_modularity: label length mismatch");
    if (graph.total_edges() == 0)
        throw std::runtime_error("multilayer_modularity: graph has no edges");
    const double n = static_cast<double>(graph.num_nodes);
    const double layer_count = static_cast<double>(graph.num_layers());

    // Intra-layer term: 2 * intra-edge count minus the degree null model
    // summed per community, per layer (the B-sum over same-community pairs).
    double intra = 0.0;
    for (const auto& layer : graph.layers) {
        if (layer.edge_count == 0) continue;
        std::size_t intra_edges = 0;
        for (auto [u, v] : layer.edges)
            if (labels[u] == labels[v]) ++intra_edges;
        std::unordered_map<std::uint32_t, double> volume;
        for (std::size_t i = 0; i < graph.num_nodes; ++i)
            volume[labels[i]] += layer.degree[i];
        double null_sum = 0.0;
        for (const auto& [label, vol] : volume) null_sum += vol * vol;
        intra += 2.0 * static_cast<double>(intra_edges) -
                 config.resolution * null_sum / (2.0 * static_cast<double>(layer.edge_count));
    }

    // Consensus partition: every node matches itself in every other layer.
    const double coupling = config.coupling * n * layer_count * (layer_count - 1.0);
    const double omega = static_cast<double>(graph.total_edges()) + coupling / 2.0;
    return (intra + coupling) / (2.0 * omega);
}

ConsensusPartition label_propagation_baseline(const MultilayerGraph& graph, std::uint64_t seed) {
    const FlatGraph flat = flatten(graph);
    const std::size_t n = flat.num_nodes;
    std::vector<std::uint32_t> labels(n);
    std::iota(labels.begin(), labels.end(), 0);

    RngStream rng(mix64(seed, 0x6c626c70));  // "lblp"
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::unordered_map<std::uint32_t, double> tally;

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        rng.shuffle(order);
        bool changed = false;
        for (NodeId v : order) {
            if (flat.neighbors[v].empty()) continue;
            tally.clear();
            for (const auto& [u, w] : flat.neighbors[v]) tally[labels[u]] += w;
            double best = -1.0;
            std::vector<std::uint32_t> winners;
            for (const auto& [label, weight] : tally) {
                if (weight > best) {
                    best = weight;
                    winners.assign(1, label);
                } else if (weight == best) {
                    winners.push_back(label);
                }
            }
            std::sort(winners.begin(), winners.end());
            std::uint32_t chosen;
            if (std::find(winners.begin(), winners.end(), labels[v]) != winners.end())
                chosen = labels[v];  // keep the current label when it ties
            else
                chosen = winners[rng.uniform_int(winners.size())];
            if (chosen != labels[v]) {
                labels[v] = chosen;
                changed = true;
            }
        }
        if (!changed) break;
    }

    ConsensusPartition partition;
    partition.labels = compact(labels);
    partition.confidence.assign(n, 1.0);
    return partition;
}

}  // namespace ldga
