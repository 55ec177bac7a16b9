#include "ldga/serialize.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ldga {

namespace {

void write_u32(std::ostream& out, std::uint32_t value) {
    unsigned char bytes[4] = {static_cast<unsigned char>(value & 0xff),
                              static_cast<unsigned char>((value >> 8) & 0xff),
                              static_cast<unsigned char>((value >> 16) & 0xff),
                              static_cast<unsigned char>((value >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (!in) throw std::runtime_error("unexpected end of binary file");
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_f32(std::ostream& out, float value) {
    static_assert(sizeof(float) == 4);
    std::uint32_t bits;
    std::memcpy(&bits, &value, 4);
    write_u32(out, bits);
}

float read_f32(std::istream& in) {
    const std::uint32_t bits = read_u32(in);
    float value;
    std::memcpy(&value, &bits, 4);
    return value;
}

void write_mat(std::ostream& out, const Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) write_f32(out, static_cast<float>(m(i, j)));
}

Mat read_mat(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<double>(read_f32(in));
    return m;
}

void write_vec(std::ostream& out, const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) write_f32(out, static_cast<float>(v[i]));
}

Vec read_vec(std::istream& in, Eigen::Index size) {
    Vec v(size);
    for (Eigen::Index i = 0; i < size; ++i) v[i] = static_cast<double>(read_f32(in));
    return v;
}

void expect_magic(std::istream& in, const char* magic, const std::string& what) {
    char buf[4];
    in.read(buf, 4);
    if (!in || std::memcmp(buf, magic, 4) != 0)
        throw std::runtime_error(what + ": bad magic");
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".json";
    return p;
}

}  // namespace

void save_feature_tensor(const std::filesystem::path& path, const FeatureTensor& tensor,
                         const nlohmann::json& sidecar_extra) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write("LDGF", 4);
    write_u32(out, static_cast<std::uint32_t>(tensor.num_layers()));
    write_u32(out, static_cast<std::uint32_t>(tensor.num_nodes()));
    write_u32(out, static_cast<std::uint32_t>(tensor.dim()));
    for (const auto& layer : tensor.layers) write_mat(out, layer);
    if (!out) throw std::runtime_error("write failed for " + path.string());

    nlohmann::json sidecar = sidecar_extra;
    sidecar["format"] = "LDGF";
    sidecar["layers"] = tensor.num_layers();
    sidecar["nodes"] = tensor.num_nodes();
    sidecar["dim"] = tensor.dim();
    write_json(sidecar_path(path), sidecar);
}

FeatureTensor load_feature_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    expect_magic(in, "LDGF", path.string());
    const std::uint32_t l = read_u32(in);
    const std::uint32_t n = read_u32(in);
    const std::uint32_t d = read_u32(in);
    FeatureTensor tensor;
    tensor.layers.reserve(l);
    for (std::uint32_t s = 0; s < l; ++s) tensor.layers.push_back(read_mat(in, n, d));
    return tensor;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params,
                     const nlohmann::json& manifest_extra) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const auto l = static_cast<std::uint32_t>(params.num_layers());
    const auto d = static_cast<std::uint32_t>(params.dim());
    const auto ffn = static_cast<std::uint32_t>(params.ffn_dim());
    const auto kappa = static_cast<std::uint32_t>(params.kappa());
    out.write("LDGC", 4);
    write_u32(out, 1);  // version
    write_u32(out, l);
    write_u32(out, d);
    write_u32(out, ffn);
    write_u32(out, kappa);
    for (const auto& layer : params.layer) {
        write_mat(out, layer.attn_q);
        write_mat(out, layer.attn_k);
        write_mat(out, layer.attn_v);
        write_mat(out, layer.prototypes);
        write_f32(out, static_cast<float>(layer.fusion));
    }
    write_mat(out, params.out_proj);
    write_mat(out, params.scorer_w1);
    write_vec(out, params.scorer_b1);
    write_mat(out, params.scorer_w2);
    write_vec(out, params.scorer_b2);
    write_f32(out, static_cast<float>(params.prelu_slope));
    if (!out) throw std::runtime_error("write failed for " + path.string());

    nlohmann::json manifest = manifest_extra;
    manifest["format"] = "LDGC";
    manifest["version"] = 1;
    manifest["shapes"] = {
        {"layers", l},         {"dim", d},
        {"ffn_dim", ffn},      {"kappa", kappa},
        {"attn", {d, d}},      {"prototypes", {kappa, d}},
        {"out_proj", {l * d, d}},
        {"scorer_w1", {d, ffn}}, {"scorer_w2", {ffn, kappa}},
    };
    write_json(sidecar_path(path), manifest);
}

ModelParameters load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    expect_magic(in, "LDGC", path.string());
    const std::uint32_t version = read_u32(in);
    if (version != 1)
        throw std::runtime_error(path.string() + ": unsupported checkpoint version " +
                                 std::to_string(version));
    const std::uint32_t l = read_u32(in);
    const std::uint32_t d = read_u32(in);
    const std::uint32_t ffn = read_u32(in);
    const std::uint32_t kappa = read_u32(in);
    ModelParameters params;
    params.layer.resize(l);
    for (auto& layer : params.layer) {
        layer.attn_q = read_mat(in, d, d);
        layer.attn_k = read_mat(in, d, d);
        layer.attn_v = read_mat(in, d, d);
        layer.prototypes = read_mat(in, kappa, d);
        layer.fusion = static_cast<double>(read_f32(in));
    }
    params.out_proj = read_mat(in, static_cast<Eigen::Index>(l) * d, d);
    params.scorer_w1 = read_mat(in, d, ffn);
    params.scorer_b1 = read_vec(in, ffn);
    params.scorer_w2 = read_mat(in, ffn, kappa);
    params.scorer_b2 = read_vec(in, kappa);
    params.prelu_slope = static_cast<double>(read_f32(in));
    return params;
}

void write_labels(const std::filesystem::path& path, const std::vector<std::uint32_t>& labels) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < labels.size(); ++i) out << i << " " << labels[i] << "\n";
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::uint32_t> read_labels(const std::filesystem::path& path,
                                       const MultilayerGraph& graph) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::unordered_map<std::string, NodeId> name_index;
    for (std::size_t i = 0; i < graph.node_names.size(); ++i)
        name_index[graph.node_names[i]] = static_cast<NodeId>(i);

    std::vector<std::uint32_t> labels(graph.num_nodes, 0);
    std::vector<bool> seen(graph.num_nodes, false);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream iss(line);
        std::string node_token, label_token, extra;
        if (!(iss >> node_token)) continue;  // blank line
        if (node_token[0] == '#') continue;
        if (!(iss >> label_token) || (iss >> extra))
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected 'node label'");
        NodeId node;
        if (!name_index.empty()) {
            const auto it = name_index.find(node_token);
            if (it == name_index.end())
                throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                         ": unknown node '" + node_token + "'");
            node = it->second;
        } else {
            node = static_cast<NodeId>(std::stoul(node_token));
            if (node >= graph.num_nodes)
                throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                         ": node index out of range");
        }
        labels[node] = static_cast<std::uint32_t>(std::stoul(label_token));
        seen[node] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw std::runtime_error(path.string() + ": no label for node " + std::to_string(i));
    return labels;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << value.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return nlohmann::json::parse(in);
}

}  // namespace ldga
