// Differentiable multilayer-modularity loss with a balance regularizer,
// reverse-mode gradients for every model parameter, AdamW, and the
// alternating training loop.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ldga/graph.hpp"
#include "ldga/model.hpp"

namespace ldga {

enum class LossMode { PerLayer, Pooled };

struct LossConfig {
    double alpha = 1.0;
    double gamma = 1.0;
    std::vector<double> gamma_per_layer;  // optional per-layer override
    LossMode mode = LossMode::PerLayer;
    std::uint32_t kappa = 8;

    double gamma_for(std::size_t s) const {
        return s < gamma_per_layer.size() ? gamma_per_layer[s] : gamma;
    }
};

struct LossBreakdown {
    double modularity_term = 0.0;
    double balance_term = 0.0;
    double total = 0.0;
    double theta = 0.0;  // total undirected edge count over layers
};

// -(1/theta) * sum_s Tr(C^T B^(s) C), computed column-by-column through
// modularity_matvec. PerLayer pairs C^(s) with B^(s); Pooled uses the layer
// mean of the assignments for every layer. Layers without edges contribute
// nothing.
double modularity_term(const SoftAssignments& assignments, const MultilayerGraph& graph,
                       const LossConfig& config);

// alpha * kappa/(N^2 (kappa-1)) * sum_p (colsum_p - N/kappa)^2, averaged over
// layers in PerLayer mode, applied to the layer mean in Pooled mode. Lies in
// [0, alpha] for row-stochastic assignments.
double balance_term(const SoftAssignments& assignments, const LossConfig& config);

LossBreakdown loss_soft(const SoftAssignments& assignments, const MultilayerGraph& graph,
                        const LossConfig& config);

struct LayerGradients {
    Mat attn_q, attn_k, attn_v;
    Mat prototypes;
    double fusion = 0.0;
};

struct ModelGradients {
    std::vector<LayerGradients> layer;
    Mat out_proj;
    Mat scorer_w1;
    Vec scorer_b1;
    Mat scorer_w2;
    Vec scorer_b2;
    double prelu_slope = 0.0;

    static ModelGradients zeros_like(const ModelParameters& params);
};

// Thrown when a forward/backward intermediate stops being finite.
struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BackwardResult {
    ModelGradients grads;
    LossBreakdown loss;
    SoftAssignments assignments;
};

// d loss_soft(forward(...)) / d params. Previous assignments are constants.
BackwardResult backward(const MultilayerGraph& graph, const FeatureTensor& features,
                        const ModelParameters& params, const SoftAssignments* prev,
                        const LossConfig& config);

struct AdamWConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

struct AdamWState {
    ModelGradients m;
    ModelGradients v;
    std::int64_t step = 0;

    static AdamWState init(const ModelParameters& params);
};

// Decoupled weight decay; fusion coefficients are exempt so they can grow
// away from their zero initialization.
void adamw_step(ModelParameters& params, const ModelGradients& grads, AdamWState& state,
                const AdamWConfig& config);

struct TrainConfig {
    std::uint32_t epochs = 300;
    double learning_rate = 2e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 1;
    std::uint32_t kappa = 8;
    double alpha = 1.0;
    double gamma = 1.0;
    LossMode mode = LossMode::PerLayer;
    std::uint32_t ffn_dim = 1024;
};

LossConfig loss_config_of(const TrainConfig& config);

struct TrainResult {
    ModelParameters params;
    SoftAssignments assignments;
    std::vector<LossBreakdown> history;
    bool aborted_on_nan = false;
};

// Epoch loop: forward with the previous epoch's assignments, loss, backward,
// AdamW step. A non-finite loss aborts with the last good parameters.
TrainResult train(const MultilayerGraph& graph, const FeatureTensor& features,
                  const TrainConfig& config);

}  // namespace ldga
