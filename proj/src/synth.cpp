#include "ldga/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "ldga/rng.hpp"

namespace ldga {

namespace {

constexpr int kMatchRounds = 100;

std::uint64_t edge_key(NodeId u, NodeId v) {
    if (u > v) std::swap(u, v);
    return (static_cast<std::uint64_t>(u) << 32) | v;
}

// Truncated power law with pdf proportional to x^(-tau) on [a, b].
double powerlaw_sample(double a, double b, double tau, double u) {
    if (std::abs(tau - 1.0) < 1e-12) return a * std::pow(b / a, u);
    const double e = 1.0 - tau;
    return std::pow(std::pow(a, e) + u * (std::pow(b, e) - std::pow(a, e)), 1.0 / e);
}

double powerlaw_mean(double a, double b, double tau) {
    if (std::abs(b - a) < 1e-12) return a;
    if (std::abs(tau - 1.0) < 1e-12) return (b - a) / std::log(b / a);
    if (std::abs(tau - 2.0) < 1e-12) return a * b * std::log(b / a) / (b - a);
    const double e1 = 1.0 - tau, e2 = 2.0 - tau;
    return (e1 / e2) * (std::pow(b, e2) - std::pow(a, e2)) / (std::pow(b, e1) - std::pow(a, e1));
}

// Lower cutoff so the truncated power law on [a, max] has the requested mean.
double solve_degree_cutoff(double mean, double dmax, double tau) {
    double lo = 0.01, hi = dmax;
    if (powerlaw_mean(lo, dmax, tau) >= mean) return lo;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (powerlaw_mean(mid, dmax, tau) < mean ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Apportion total proportionally to weights, largest remainder method.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> sizes(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = total * weights[i] / wsum;
        sizes[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += sizes[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t j = 0; assigned < total; ++j, ++assigned) sizes[remainders[j % remainders.size()].second] += 1;
    return sizes;
}

struct StubMatcher {
    std::unordered_set<std::uint64_t>& edge_set;
    std::vector<std::pair<NodeId, NodeId>>& edges;
    RngStream& rng;

    bool try_add(NodeId u, NodeId v, const std::vector<std::uint32_t>* labels, bool cross_only) {
        if (u == v) return false;
        if (labels && cross_only == ((*labels)[u] == (*labels)[v])) return false;
        const auto key = edge_key(u, v);
        if (edge_set.count(key)) return false;
        edge_set.insert(key);
        edges.emplace_back(std::min(u, v), std::max(u, v));
        return true;
    }

    // Replace an existing edge (a,b) of this pool with (u,a) and (v,b); keeps
    // the degrees of a and b while consuming the stubs of u and v.
    bool try_rewire(NodeId u, NodeId v, std::size_t pool_begin,
                    const std::vector<std::uint32_t>* labels, bool cross_only) {
        if (edges.size() <= pool_begin) return false;
        for (int attempt = 0; attempt < 32; ++attempt) {
            const std::size_t idx =
                pool_begin + static_cast<std::size_t>(rng.uniform_int(edges.size() - pool_begin));
            auto [a, b] = edges[idx];
            if (rng.bernoulli(0.5)) std::swap(a, b);
            if (u == a || v == b) continue;
            if (labels) {
                if (cross_only && ((*labels)[u] == (*labels)[a] || (*labels)[v] == (*labels)[b]))
                    continue;
                if (!cross_only && ((*labels)[u] != (*labels)[a] || (*labels)[v] != (*labels)[b]))
                    continue;
            }
            const auto k1 = edge_key(u, a), k2 = edge_key(v, b);
            if (k1 == k2 || edge_set.count(k1) || edge_set.count(k2)) continue;
            edge_set.erase(edge_key(edges[idx].first, edges[idx].second));
            edges[idx] = {std::min(u, a), std::max(u, a)};
            edge_set.insert(k1);
            edge_set.insert(k2);
            edges.emplace_back(std::min(v, b), std::max(v, b));
            return true;
        }
        return false;
    }

    // Pairs up stubs, retrying with reshuffles and falling back to rewiring.
    // Returns the number of stubs it had to drop.
    std::size_t match(std::vector<NodeId> stubs, const std::vector<std::uint32_t>* labels,
                      bool cross_only) {
        const std::size_t pool_begin = edges.size();
        const std::size_t initial = stubs.size();
        for (int round = 0; round < kMatchRounds && stubs.size() > 1; ++round) {
            rng.shuffle(stubs);
            std::vector<NodeId> leftover;
            for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
                const NodeId u = stubs[i], v = stubs[i + 1];
                if (!try_add(u, v, labels, cross_only)) {
                    if (round < kMatchRounds / 2 || !try_rewire(u, v, pool_begin, labels, cross_only)) {
                        leftover.push_back(u);
                        leftover.push_back(v);
                    }
                }
            }
            if (stubs.size() % 2 == 1) leftover.push_back(stubs.back());
            stubs = std::move(leftover);
        }
        const std::size_t cap = std::max<std::size_t>(8, initial / 100);
        if (stubs.size() > cap)
            throw std::runtime_error(
                "generate: infeasible degree sequence after " + std::to_string(kMatchRounds) +
                " rewiring rounds (" + std::to_string(stubs.size()) +
                " stubs unplaced); lower avg_degree/max_degree or mu, or enlarge communities");
        return stubs.size();
    }
};

void validate(const GeneratorConfig& c) {
    if (c.num_nodes < 4) throw std::invalid_argument("generate: num_nodes must be >= 4");
    if (c.num_layers < 1) throw std::invalid_argument("generate: num_layers must be >= 1");
    if (c.mu < 0.0 || c.mu > 1.0) throw std::invalid_argument("generate: mu must be in [0,1]");
    if (c.avg_degree > c.max_degree)
        throw std::invalid_argument("generate: avg_degree must be <= max_degree");
    if (c.max_degree >= c.num_nodes)
        throw std::invalid_argument("generate: max_degree must be < num_nodes");
    if (c.degree_exponent <= 0.0 || c.community_exponent <= 0.0)
        throw std::invalid_argument("generate: exponents must be positive");
    if (c.community_size_ratio < 1.0)
        throw std::invalid_argument("generate: community_size_ratio must be >= 1");
}

}  // namespace

std::size_t auto_community_count(const GeneratorConfig& config) {
    // Target community size of ~10x the average degree; N=500 at the default
    // degree 16 gives 3 communities.
    const double target = 10.0 * std::max<std::uint32_t>(1, config.avg_degree);
    const auto k = static_cast<std::size_t>(std::llround(config.num_nodes / target));
    return std::clamp<std::size_t>(k, 2, std::max<std::size_t>(2, config.num_nodes / 2));
}

std::pair<MultilayerGraph, GroundTruth> generate(const GeneratorConfig& config) {
    validate(config);
    const std::size_t n = config.num_nodes;
    const std::size_t k =
        config.num_communities > 0 ? config.num_communities : auto_community_count(config);
    if (k < 2 || 2 * k > n)
        throw std::invalid_argument("generate: num_communities must be in [2, N/2]");

    // Community sizes: k power-law draws, apportioned to sum to N.
    RngStream size_rng(mix64(config.seed, 0x73697a65));  // "size"
    std::vector<double> weights(k);
    for (auto& w : weights)
        w = powerlaw_sample(1.0, config.community_size_ratio, config.community_exponent,
                            size_rng.uniform());
    auto sizes = apportion(n, weights);
    for (std::size_t i = 0; i < k; ++i) {  // every community must hold >= 2 nodes
        while (sizes[i] < 2) {
            const auto largest =
                std::max_element(sizes.begin(), sizes.end()) - sizes.begin();
            --sizes[largest];
            ++sizes[i];
        }
    }

    // Labels: block partition of a shuffled node order.
    GroundTruth truth;
    truth.num_communities = k;
    truth.labels.assign(n, 0);
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream label_rng(mix64(config.seed, 0x6c61626c));  // "labl"
    label_rng.shuffle(order);
    std::size_t pos = 0;
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < sizes[c]; ++j) truth.labels[order[pos++]] = static_cast<std::uint32_t>(c);

    // Degree targets, shared across layers; stochastic rounding keeps the mean.
    RngStream degree_rng(mix64(config.seed, 0x64656772));  // "degr"
    const double dmin = solve_degree_cutoff(config.avg_degree, config.max_degree,
                                            config.degree_exponent);
    std::vector<std::uint32_t> target(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = powerlaw_sample(dmin, config.max_degree, config.degree_exponent,
                                         degree_rng.uniform());
        double t = std::floor(x);
        if (degree_rng.bernoulli(x - t)) t += 1.0;
        target[i] = static_cast<std::uint32_t>(
            std::clamp<double>(t, 1.0, config.max_degree));
    }

    MultilayerGraph graph;
    graph.num_nodes = n;
    for (std::size_t s = 0; s < config.num_layers; ++s) {
        RngStream rng(mix64(config.seed, 0x6c617972, s));  // "layr"
        std::vector<std::vector<NodeId>> intra_stubs(k);
        std::vector<NodeId> inter_stubs;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::uint32_t t = 0; t < target[i]; ++t) {
                if (rng.bernoulli(config.mu))
                    inter_stubs.push_back(static_cast<NodeId>(i));
                else
                    intra_stubs[truth.labels[i]].push_back(static_cast<NodeId>(i));
            }
        }
        std::unordered_set<std::uint64_t> edge_set;
        std::vector<std::pair<NodeId, NodeId>> edges;
        StubMatcher matcher{edge_set, edges, rng};
        for (std::size_t c = 0; c < k; ++c)
            matcher.match(std::move(intra_stubs[c]), &truth.labels, /*cross_only=*/false);
        matcher.match(std::move(inter_stubs), &truth.labels, /*cross_only=*/true);
        std::sort(edges.begin(), edges.end());
        graph.layers.push_back(make_layer(n, std::move(edges)));
    }
    return {std::move(graph), std::move(truth)};
}

std::vector<double> mixing_fraction(const MultilayerGraph& graph, const GroundTruth& truth) {
    if (truth.labels.size() != graph.num_nodes)
        throw std::invalid_argument("mixing_fraction: labels length must equal num_nodes");
    std::vector<double> result;
    result.reserve(graph.num_layers());
    for (const auto& layer : graph.layers) {
        std::size_t cross = 0;
        for (auto [u, v] : layer.edges)
            if (truth.labels[u] != truth.labels[v]) ++cross;
        result.push_back(layer.edge_count == 0
                             ? 0.0
                             : static_cast<double>(cross) / static_cast<double>(layer.edge_count));
    }
    return result;
}

}  // namespace ldga
