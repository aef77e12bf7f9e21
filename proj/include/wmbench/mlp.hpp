#pragma once

#include <cstdint>
#include <vector>

#include "wmbench/features.hpp"

namespace wmbench {

// Labeled embedding set. Labels: 1 = watermarked, 0 = unwatermarked.
struct Dataset {
    std::vector<EmbeddingVector> x;
    std::vector<int> y;

    size_t size() const { return x.size(); }
    int dim() const { return x.empty() ? 0 : static_cast<int>(x.front().size()); }
    bool has_both_classes() const;
};

// Reference architecture: 1536 -> 512 -> 256 -> 128 -> 64 -> 1,
// ReLU between layers, sigmoid at the output.
inline const std::vector<int> kDefaultHiddenSizes = {512, 256, 128, 64};

// Fully-connected network parameters. weights[l] is row-major
// sizes[l+1] x sizes[l]; biases[l] has sizes[l+1] entries.
struct MLPParams {
    std::vector<int> sizes; // [input, hidden..., 1]
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    // He-style uniform init, U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
    static MLPParams init(const std::vector<int>& sizes, uint64_t seed);

    size_t parameter_count() const;
};

// Sigmoid output probability in (0,1). Throws on input dimension mismatch.
double mlp_forward(const MLPParams& params, const EmbeddingVector& x);

// Mean binary cross-entropy over the batch plus analytic gradients in the
// same shapes as the parameters. The oracle side of the gradient check uses
// finite differences against this.
struct MLPGradients {
    double loss = 0.0;
    std::vector<std::vector<double>> d_weights;
    std::vector<std::vector<double>> d_biases;
};
MLPGradients mlp_loss_and_grad(const MLPParams& params, const std::vector<EmbeddingVector>& x,
                               const std::vector<int>& y);

// Adam with the fixed momentum pair (beta1=0.5, beta2=0.999); learning rate,
// weight decay, batch size and shuffling come from the hyperparameter grid.
// The plateau scheduler halves the learning rate after `plateau_patience`
// epochs without sufficient improvement in training loss.
struct TrainConfig {
    double beta1 = 0.5;
    double beta2 = 0.999;
    double learning_rate = 2e-4;
    double weight_decay = 2e-3;
    int batch_size = 50;
    bool shuffle = true;
    int epochs = 150;
    double plateau_factor = 0.5;
    int plateau_patience = 50;
    double plateau_threshold = 1e-4; // relative improvement considered progress
    double adam_eps = 1e-8;
    uint64_t seed = 0;
};

struct TrainResult {
    MLPParams params;
    std::vector<double> epoch_loss; // one entry per epoch
    double final_learning_rate = 0.0;
};

// Trains in place from `params` as the starting point. Throws if the dataset
// is empty, single-class, or dimensioned differently from the network input.
TrainResult train_mlp(MLPParams params, const Dataset& dataset, const TrainConfig& config);

} // namespace wmbench
