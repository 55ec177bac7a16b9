// Binary file formats (little-endian 32-bit floats) and label files.
//  - feature tensor: magic "LDGF", u32 L, N, d, then L*N*d floats,
//    layer-major then row-major, plus a JSON sidecar at <path>.json
//  - checkpoint: magic "LDGC", u32 version, L, d, ffn, kappa, then per layer
//    attn_q, attn_k, attn_v, prototypes, fusion; then out_proj, scorer_w1,
//    scorer_b1, scorer_w2, scorer_b2, prelu_slope; JSON manifest at
//    <path>.json
//  - labels: "node label" rows
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ldga/embed.hpp"
#include "ldga/graph.hpp"
#include "ldga/model.hpp"

#include "json.hpp"

namespace ldga {

void save_feature_tensor(const std::filesystem::path& path, const FeatureTensor& tensor,
                         const nlohmann::json& sidecar_extra = {});
FeatureTensor load_feature_tensor(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params,
                     const nlohmann::json& manifest_extra = {});
ModelParameters load_checkpoint(const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path, const std::vector<std::uint32_t>& labels);

// Node tokens resolve through graph.node_names when present, otherwise they
// must be integer indices. Every node must receive exactly one label.
std::vector<std::uint32_t> read_labels(const std::filesystem::path& path,
                                       const MultilayerGraph& graph);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace ldga
