#include "ldga/graph.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ldga/rng.hpp"

namespace ldga {

namespace {

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> tokens;
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) tokens.push_back(tok);
    return tokens;
}

bool is_skippable(const std::string& line) {
    for (char c : line) {
        if (c == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;  // blank
}

// Maps arbitrary tokens to dense indices in first-appearance order.
struct TokenIndex {
    std::unordered_map<std::string, std::uint32_t> index;
    std::vector<std::string> names;

    std::uint32_t get(const std::string& token) {
        auto [it, inserted] = index.try_emplace(token, static_cast<std::uint32_t>(names.size()));
        if (inserted) names.push_back(token);
        return it->second;
    }
};

MultilayerGraph build_from_raw(std::size_t num_nodes,
                               std::vector<std::vector<std::pair<NodeId, NodeId>>> raw_layers,
                               std::vector<std::string> names, LoadSummary* summary) {
    MultilayerGraph g;
    g.num_nodes = num_nodes;
    g.node_names = std::move(names);
    EdgeCleanup total;
    for (auto& layer_edges : raw_layers) {
        EdgeCleanup c;
        g.layers.push_back(make_layer(num_nodes, std::move(layer_edges), &c));
        total.self_loops_dropped += c.self_loops_dropped;
        total.duplicate_edges_removed += c.duplicate_edges_removed;
    }
    if (summary) {
        summary->num_nodes = g.num_nodes;
        summary->num_layers = g.num_layers();
        summary->layer_edge_counts.clear();
        for (const auto& l : g.layers) summary->layer_edge_counts.push_back(l.edge_count);
        summary->self_loops_dropped = total.self_loops_dropped;
        summary->duplicate_edges_removed = total.duplicate_edges_removed;
    }
    return g;
}

}  // namespace

LayerTopology make_layer(std::size_t num_nodes,
                         std::vector<std::pair<NodeId, NodeId>> edges,
                         EdgeCleanup* cleanup) {
    EdgeCleanup c;
    std::vector<std::pair<NodeId, NodeId>> clean;
    clean.reserve(edges.size());
    for (auto [u, v] : edges) {
        if (u >= num_nodes || v >= num_nodes)
            throw std::out_of_range("make_layer: node index out of range");
        if (u == v) {
            ++c.self_loops_dropped;
            continue;
        }
        if (u > v) std::swap(u, v);
        clean.emplace_back(u, v);
    }
    std::sort(clean.begin(), clean.end());
    const auto unique_end = std::unique(clean.begin(), clean.end());
    c.duplicate_edges_removed = static_cast<std::size_t>(clean.end() - unique_end);
    clean.erase(unique_end, clean.end());

    LayerTopology layer;
    layer.edges = std::move(clean);
    layer.edge_count = layer.edges.size();
    layer.neighbors.assign(num_nodes, {});
    layer.degree.assign(num_nodes, 0);
    for (auto [u, v] : layer.edges) {
        layer.neighbors[u].push_back(v);
        layer.neighbors[v].push_back(u);
    }
    for (auto& nbrs : layer.neighbors) std::sort(nbrs.begin(), nbrs.end());
    for (std::size_t i = 0; i < num_nodes; ++i)
        layer.degree[i] = static_cast<std::uint32_t>(layer.neighbors[i].size());
    if (cleanup) *cleanup = c;
    return layer;
}

std::size_t MultilayerGraph::total_edges() const {
    std::size_t total = 0;
    for (const auto& l : layers) total += l.edge_count;
    return total;
}

std::uint64_t layer_content_hash(const LayerTopology& layer) {
    std::uint64_t h = fnv1a64(&layer.edge_count, sizeof(layer.edge_count));
    for (auto [u, v] : layer.edges) {
        h = fnv1a64(&u, sizeof(u), h);
        h = fnv1a64(&v, sizeof(v), h);
    }
    return h;
}

std::uint64_t graph_content_hash(const MultilayerGraph& graph) {
    std::uint64_t h = fnv1a64(&graph.num_nodes, sizeof(graph.num_nodes));
    for (const auto& layer : graph.layers) {
        std::uint64_t lh = layer_content_hash(layer);
        h = fnv1a64(&lh, sizeof(lh), h);
    }
    return h;
}

MultilayerGraph load_single_file_edgelist(std::istream& in, LoadSummary* summary,
                                          const std::string& stream_name) {
    TokenIndex nodes;
    TokenIndex layers;
    std::vector<std::vector<std::pair<NodeId, NodeId>>> raw;
    std::string line;
    std::size_t line_no = 0;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_skippable(line)) continue;
        const auto tokens = split_tokens(line);
        if (tokens.size() != 3)
            throw std::runtime_error(stream_name + ":" + std::to_string(line_no) +
                                     ": expected 'layer u v', got " +
                                     std::to_string(tokens.size()) + " tokens");
        const std::uint32_t s = layers.get(tokens[0]);
        const NodeId u = nodes.get(tokens[1]);
        const NodeId v = nodes.get(tokens[2]);
        if (s >= raw.size()) raw.resize(s + 1);
        raw[s].emplace_back(u, v);
        ++rows;
    }
    if (rows == 0) throw std::runtime_error(stream_name + ": empty edge list");
    return build_from_raw(nodes.names.size(), std::move(raw), std::move(nodes.names), summary);
}

MultilayerGraph load_per_layer_files(const std::vector<std::filesystem::path>& files,
                                     LoadSummary* summary) {
    if (files.empty()) throw std::runtime_error("load_per_layer_files: no layer files given");
    TokenIndex nodes;
    std::vector<std::vector<std::pair<NodeId, NodeId>>> raw;
    std::size_t rows = 0;
    for (const auto& path : files) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path.string());
        raw.emplace_back();
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (is_skippable(line)) continue;
            const auto tokens = split_tokens(line);
            if (tokens.size() != 2)
                throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                         ": expected 'u v', got " +
                                         std::to_string(tokens.size()) + " tokens");
            raw.back().emplace_back(nodes.get(tokens[0]), nodes.get(tokens[1]));
            ++rows;
        }
    }
    if (rows == 0) throw std::runtime_error("load_per_layer_files: empty edge lists");
    return build_from_raw(nodes.names.size(), std::move(raw), std::move(nodes.names), summary);
}

MultilayerGraph load_multilayer_edgelist(const std::filesystem::path& path,
                                         EdgeListFormat format, LoadSummary* summary) {
    if (format == EdgeListFormat::SingleFile) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path.string());
        return load_single_file_edgelist(in, summary, path.string());
    }
    if (!std::filesystem::is_directory(path))
        throw std::runtime_error(path.string() + " is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".edges")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw std::runtime_error("no *.edges files in " + path.string());
    return load_per_layer_files(files, summary);
}

FlatGraph flatten(const MultilayerGraph& graph) {
    std::map<std::pair<NodeId, NodeId>, std::uint32_t> multiplicity;
    for (const auto& layer : graph.layers)
        for (auto e : layer.edges) ++multiplicity[e];

    FlatGraph flat;
    flat.num_nodes = graph.num_nodes;
    flat.neighbors.assign(graph.num_nodes, {});
    flat.strength.assign(graph.num_nodes, 0.0);
    for (const auto& [edge, w] : multiplicity) {
        const auto [u, v] = edge;
        flat.edges.emplace_back(u, v, w);
        flat.neighbors[u].emplace_back(v, w);
        flat.neighbors[v].emplace_back(u, w);
        flat.strength[u] += w;
        flat.strength[v] += w;
        flat.total_weight += w;
    }
    return flat;
}

Eigen::VectorXd modularity_matvec(const LayerTopology& layer, double gamma,
                                  const Eigen::VectorXd& x) {
    if (layer.edge_count == 0)
        throw std::runtime_error("empty layer has no modularity matrix");
    const auto n = static_cast<Eigen::Index>(layer.num_nodes());
    if (x.size() != n) throw std::invalid_argument("modularity_matvec: size mismatch");

    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (auto [u, v] : layer.edges) {
        y[u] += x[v];
        y[v] += x[u];
    }
    double dx = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) dx += layer.degree[i] * x[i];
    const double scale = gamma * dx / (2.0 * static_cast<double>(layer.edge_count));
    for (Eigen::Index i = 0; i < n; ++i) y[i] -= scale * layer.degree[i];
    return y;
}

}  // namespace ldga
