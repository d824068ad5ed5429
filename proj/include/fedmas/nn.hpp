// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fedmas/tensor.hpp"

namespace fedmas {

enum class Activation { kRelu, kIdentity };

struct DenseLayer {
    Tensor weight;  // in_dim x out_dim
    Tensor bias;    // 1 x out_dim
    Activation act = Activation::kIdentity;

    std::size_t in_dim() const { return weight.rows; }
    std::size_t out_dim() const { return weight.cols; }
};

// A feed-forward stack. Layer i's out_dim must equal layer i+1's in_dim.
struct MlpParams {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
};

struct Gradients {
    struct LayerGrad {
        Tensor weight;
        Tensor bias;
    };
    std::vector<LayerGrad> layers;
};

// Per-layer values retained by forward() so backward() can replay the pass.
struct ForwardTrace {
    std::vector<Tensor> inputs;  // input seen by each layer
    std::vector<Tensor> pre;     // affine output before activation
    Tensor output;
};

struct BackwardResult {
    Gradients grads;
    Tensor input_grad;  // gradient w.r.t. the batch fed to forward()
};

void check_layer_chain(const MlpParams& p);

// Weights ~ N(0, 1/fan_in), biases zero. Draw order: layers in sequence,
// each weight matrix filled row-major. Reproducible from the rng state.
MlpParams make_mlp(std::span<const std::size_t> dims, std::span<const Activation> acts,
                   std::mt19937_64& rng);
MlpParams make_mlp(std::span<const std::size_t> dims, std::span<const Activation> acts,
                   std::uint64_t seed);

ForwardTrace forward(const MlpParams& p, const Tensor& x);
BackwardResult backward(const MlpParams& p, const ForwardTrace& trace, const Tensor& output_grad);

// p - lr * g, element-wise. Rejects non-finite gradients.
MlpParams sgd_step(const MlpParams& p, const Gradients& g, double lr);

std::size_t param_count(const MlpParams& p);
std::vector<double> to_flat(const MlpParams& p);
void write_flat(const MlpParams& p, std::span<double> out);
// Reads values into an existing parameter structure (shape template).
void read_flat(MlpParams& p, std::span<const double> in);

// lr_min + (lr_max - lr_min) * (1 + cos(pi * t / T)) / 2
double cosine_lr(std::size_t round_index, std::size_t total_rounds, double lr_max, double lr_min);

}  // namespace fedmas
