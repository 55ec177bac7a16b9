#include "ldga/embed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "ldga/rng.hpp"

namespace ldga {

namespace {

constexpr double kMinLrFraction = 1e-4;

std::vector<NodeId> one_walk(const LayerTopology& layer, NodeId start,
                             std::uint32_t length, RngStream& rng) {
    std::vector<NodeId> walk;
    if (layer.degree[start] == 0) return {start};
    walk.reserve(length);
    walk.push_back(start);
    NodeId current = start;
    for (std::uint32_t step = 1; step < length; ++step) {
        const auto& nbrs = layer.neighbors[current];
        current = nbrs[rng.uniform_int(nbrs.size())];
        walk.push_back(current);
    }
    return walk;
}

// Cumulative unigram^0.75 table for negative sampling.
struct NegativeTable {
    std::vector<double> cdf;

    explicit NegativeTable(const std::vector<std::uint64_t>& counts) {
        cdf.resize(counts.size());
        double total = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            total += std::pow(static_cast<double>(counts[i]), 0.75);
            cdf[i] = total;
        }
        if (total <= 0.0) throw std::runtime_error("train_skipgram: empty corpus");
        for (auto& c : cdf) c /= total;
    }

    NodeId sample(RngStream& rng) const {
        const double u = rng.uniform();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        return static_cast<NodeId>(std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1));
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void validate(const WalkConfig& config) {
    if (config.dim == 0) throw std::invalid_argument("WalkConfig: dim must be positive");
    if (config.window == 0 || config.walks_per_node == 0 || config.walk_length == 0)
        throw std::invalid_argument("WalkConfig: window, walks_per_node, walk_length must be positive");
    if (config.window >= config.walk_length)
        throw std::invalid_argument("WalkConfig: window must be < walk_length");
    if (config.learning_rate <= 0.0)
        throw std::invalid_argument("WalkConfig: learning_rate must be positive");
}

std::vector<std::vector<NodeId>> random_walks(const LayerTopology& layer,
                                              const WalkConfig& config) {
    validate(config);
    const std::size_t n = layer.num_nodes();
    std::vector<std::vector<NodeId>> corpus;
    corpus.reserve(n * config.walks_per_node);
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::uint32_t round = 0; round < config.walks_per_node; ++round) {
        RngStream order_rng(mix64(config.seed, 0x6f726472, round));  // "ordr"
        order_rng.shuffle(order);
        for (NodeId start : order) {
            RngStream walk_rng(mix64(config.seed, start, round));
            corpus.push_back(one_walk(layer, start, config.walk_length, walk_rng));
        }
    }
    return corpus;
}

Mat train_skipgram(const std::vector<std::vector<NodeId>>& walks, std::size_t num_nodes,
                   const WalkConfig& config) {
    validate(config);
    if (walks.empty()) throw std::invalid_argument("train_skipgram: empty corpus");
    const std::size_t d = config.dim;

    RngStream init_rng(mix64(config.seed, 0x696e6974));  // "init"
    std::vector<double> input(num_nodes * d);
    for (auto& x : input) x = (init_rng.uniform() - 0.5) / static_cast<double>(d);

    Mat result(num_nodes, d);
    if (config.epochs == 0) {
        for (std::size_t i = 0; i < num_nodes; ++i)
            for (std::size_t j = 0; j < d; ++j) result(i, j) = input[i * d + j];
        return result;
    }

    std::vector<std::uint64_t> counts(num_nodes, 0);
    std::uint64_t total_tokens = 0;
    for (const auto& walk : walks) {
        for (NodeId v : walk) {
            if (v >= num_nodes) throw std::out_of_range("train_skipgram: node id out of range");
            ++counts[v];
        }
        total_tokens += walk.size();
    }
    const NegativeTable negatives(counts);

    std::vector<double> context(num_nodes * d, 0.0);
    std::vector<double> accum(d);
    RngStream rng(mix64(config.seed, 0x7472696e));  // "trin"
    const double planned = static_cast<double>(total_tokens) * config.epochs;
    std::uint64_t processed = 0;

    for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (const auto& walk : walks) {
            for (std::size_t t = 0; t < walk.size(); ++t, ++processed) {
                const double lr = config.learning_rate *
                                  std::max(kMinLrFraction, 1.0 - static_cast<double>(processed) / planned);
                const auto b = static_cast<std::size_t>(1 + rng.uniform_int(config.window));
                const std::size_t lo = t >= b ? t - b : 0;
                const std::size_t hi = std::min(walk.size() - 1, t + b);
                const NodeId center = walk[t];
                double* const in = input.data() + static_cast<std::size_t>(center) * d;
                for (std::size_t c = lo; c <= hi; ++c) {
                    if (c == t) continue;
                    const NodeId positive = walk[c];
                    std::fill(accum.begin(), accum.end(), 0.0);
                    for (std::uint32_t neg = 0; neg <= config.negatives; ++neg) {
                        NodeId tgt;
                        double label;
                        if (neg == 0) {
                            tgt = positive;
                            label = 1.0;
                        } else {
                            tgt = negatives.sample(rng);
                            if (tgt == positive) continue;
                            label = 0.0;
                        }
                        double* const out = context.data() + static_cast<std::size_t>(tgt) * d;
                        double dot = 0.0;
                        for (std::size_t j = 0; j < d; ++j) dot += in[j] * out[j];
                        const double g = (label - sigmoid(dot)) * lr;
                        for (std::size_t j = 0; j < d; ++j) {
                            accum[j] += g * out[j];
                            out[j] += g * in[j];
                        }
                    }
                    for (std::size_t j = 0; j < d; ++j) in[j] += accum[j];
                }
            }
        }
    }

    for (std::size_t i = 0; i < num_nodes; ++i)
        for (std::size_t j = 0; j < d; ++j) result(i, j) = input[i * d + j];
    return result;
}

FeatureTensor init_features(const MultilayerGraph& graph, const WalkConfig& config) {
    validate(config);
    FeatureTensor features;
    features.layers.resize(graph.num_layers());
    const std::size_t workers =
        std::min<std::size_t>(graph.num_layers(),
                              std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (;;) {
            const std::size_t s = next.fetch_add(1);
            if (s >= graph.num_layers()) break;
            WalkConfig layer_config = config;
            layer_config.seed = mix64(config.seed, layer_content_hash(graph.layers[s]));
            const auto walks = random_walks(graph.layers[s], layer_config);
            features.layers[s] = train_skipgram(walks, graph.num_nodes, layer_config);
        }
    };
    if (workers <= 1) {
        run();
    } else {
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
        for (auto& t : pool) t.join();
    }
    return features;
}

}  // namespace ldga
