#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "splloc/types.hpp"

namespace splloc::model {

// Temporal convolution, same padding, weight indexed [tap][in][out].
struct Conv1d {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    std::vector<double> weight;
    std::vector<double> bias;

    double& w(int k, int i, int o) {
        return weight[(static_cast<size_t>(k) * in_channels + i) * out_channels + o];
    }
    double w(int k, int i, int o) const {
        return weight[(static_cast<size_t>(k) * in_channels + i) * out_channels + o];
    }
};

Matrix conv_forward(const Conv1d& layer, const Matrix& input);

// Accumulates parameter gradients into grad; writes input gradients into
// d_input when non-null.
void conv_backward(const Conv1d& layer, const Matrix& input, const Matrix& d_output, Conv1d& grad, Matrix* d_input);

// Two convolutional layers per stream for the embedding, two more for the
// scores; ReLU between layers, sigmoid on the score logits.
struct StreamParams {
    Conv1d embed1, embed2, score1, score2;
};

struct HeadParams {
    StreamParams streams[2];  // appearance, motion
};

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], fan_in = kernel * in.
HeadParams init_params(int input_dim, int hidden_dim, int embed_dim, int num_categories, int kernel, uint64_t seed);

HeadParams zeros_like(const HeadParams& params);

// Visits every parameter in a fixed order (both streams, layer by layer,
// weights then bias). The order defines the checkpoint layout and the
// gradient-check indexing.
void visit_params(HeadParams& params, const std::function<void(double&)>& fn);
std::vector<double*> param_pointers(HeadParams& params);

struct StreamCache {
    Matrix input, z1, e1, x, z3, g, logits, a;
};

struct ForwardCache {
    StreamCache streams[2];
};

struct ForwardResult {
    Matrix embedding;  // fused T x D
    Tcas tcas;         // T x (C+1)
};

// Embedding X = mean of the two stream embeddings; TCAS A = mean of the two
// streams' per-snippet sigmoid scores.
ForwardResult forward(const Video& video, const HeadParams& params, ForwardCache* cache = nullptr);

// Exact gradients of the forward map: d_tcas is dLoss/dA, d_embedding is
// dLoss/dX (either may be empty for zero). Returns params-shaped gradients.
HeadParams backward(const HeadParams& params, const ForwardCache& cache, const Matrix& d_tcas,
                    const Matrix& d_embedding);

void accumulate(HeadParams& into, const HeadParams& grads);
void scale(HeadParams& params, double factor);

// params <- params - lr * grads.
void sgd_step(HeadParams& params, const HeadParams& grads, double lr);

void save_checkpoint(const HeadParams& params, const std::filesystem::path& file);
HeadParams load_checkpoint(const std::filesystem::path& file);

}  // namespace splloc::model
