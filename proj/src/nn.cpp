// SPDX-License-Identifier: Apache-2.0
#include "fedmas/nn.hpp"

#include <cmath>
#include <string>

#include "fedmas/errors.hpp"

namespace fedmas {

void check_layer_chain(const MlpParams& p) {
    if (p.layers.empty()) {
        throw config_error("mlp has no layers");
    }
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const DenseLayer& l = p.layers[i];
        if (l.bias.rows != 1 || l.bias.cols != l.out_dim()) {
            throw config_error("layer " + std::to_string(i) + " bias shape mismatch");
        }
        if (i > 0 && p.layers[i - 1].out_dim() != l.in_dim()) {
            throw config_error("layer " + std::to_string(i - 1) + " out_dim " +
                               std::to_string(p.layers[i - 1].out_dim()) +
                               " does not chain into layer " + std::to_string(i) + " in_dim " +
                               std::to_string(l.in_dim()));
        }
    }
}

MlpParams make_mlp(std::span<const std::size_t> dims, std::span<const Activation> acts,
                   std::mt19937_64& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1) {
        throw config_error("make_mlp: need n+1 dims for n activations");
    }
    MlpParams p;
    p.layers.resize(dims.size() - 1);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        if (dims[i] == 0 || dims[i + 1] == 0) {
            throw config_error("make_mlp: zero layer dimension");
        }
        DenseLayer& l = p.layers[i];
        l.weight = Tensor(dims[i], dims[i + 1]);
        l.bias = Tensor(1, dims[i + 1]);
        l.act = acts[i];
        std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(double(dims[i])));
        for (double& v : l.weight.data) v = dist(rng);
    }
    return p;
}

MlpParams make_mlp(std::span<const std::size_t> dims, std::span<const Activation> acts,
                   std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return make_mlp(dims, acts, rng);
}

ForwardTrace forward(const MlpParams& p, const Tensor& x) {
    check_layer_chain(p);
    if (x.cols != p.input_dim()) {
        throw config_error("forward: batch has " + std::to_string(x.cols) +
                           " features, network expects " + std::to_string(p.input_dim()));
    }
    ForwardTrace trace;
    trace.inputs.reserve(p.layers.size());
    trace.pre.reserve(p.layers.size());
    Tensor cur = x;
    for (const DenseLayer& l : p.layers) {
        trace.inputs.push_back(cur);
        Tensor pre = add_row_broadcast(matmul(cur, l.weight), l.bias);
        trace.pre.push_back(pre);
        if (l.act == Activation::kRelu) {
            for (double& v : pre.data) v = v > 0.0 ? v : 0.0;
        }
        cur = std::move(pre);
    }
    require_finite(cur, "forward output");
    trace.output = std::move(cur);
    return trace;
}

BackwardResult backward(const MlpParams& p, const ForwardTrace& trace, const Tensor& output_grad) {
    if (trace.inputs.size() != p.layers.size() || trace.pre.size() != p.layers.size()) {
        throw contract_error("backward: trace does not match network depth");
    }
    if (!output_grad.same_shape(trace.output)) {
        throw contract_error("backward: output_grad shape mismatch");
    }
    BackwardResult res;
    res.grads.layers.resize(p.layers.size());
    Tensor g = output_grad;
    for (std::size_t li = p.layers.size(); li-- > 0;) {
        const DenseLayer& l = p.layers[li];
        if (l.act == Activation::kRelu) {
            const Tensor& pre = trace.pre[li];
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                if (!(pre.data[i] > 0.0)) g.data[i] = 0.0;
            }
        }
        Gradients::LayerGrad& lg = res.grads.layers[li];
        lg.weight = matmul_tn(trace.inputs[li], g);
        lg.bias = Tensor(1, l.out_dim());
        for (std::size_t r = 0; r < g.rows; ++r) {
            for (std::size_t c = 0; c < g.cols; ++c) {
                lg.bias.at(0, c) += g.at(r, c);
            }
        }
        g = matmul_nt(g, l.weight);
    }
    res.input_grad = std::move(g);
    return res;
}

MlpParams sgd_step(const MlpParams& p, const Gradients& g, double lr) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw contract_error("sgd_step: learning rate must be finite and >= 0");
    }
    if (g.layers.size() != p.layers.size()) {
        throw contract_error("sgd_step: gradient structure mismatch");
    }
    MlpParams out = p;
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const Gradients::LayerGrad& lg = g.layers[i];
        if (!lg.weight.same_shape(p.layers[i].weight) || !lg.bias.same_shape(p.layers[i].bias)) {
            throw contract_error("sgd_step: gradient shape mismatch at layer " + std::to_string(i));
        }
        if (!all_finite(lg.weight) || !all_finite(lg.bias)) {
            throw numeric_fault("sgd_step: non-finite gradient at layer " + std::to_string(i));
        }
        DenseLayer& l = out.layers[i];
        for (std::size_t j = 0; j < l.weight.data.size(); ++j) {
            l.weight.data[j] -= lr * lg.weight.data[j];
        }
        for (std::size_t j = 0; j < l.bias.data.size(); ++j) {
            l.bias.data[j] -= lr * lg.bias.data[j];
        }
    }
    return out;
}

std::size_t param_count(const MlpParams& p) {
    std::size_t n = 0;
    for (const DenseLayer& l : p.layers) n += l.weight.size() + l.bias.size();
    return n;
}

std::vector<double> to_flat(const MlpParams& p) {
    std::vector<double> out(param_count(p));
    write_flat(p, out);
    return out;
}

void write_flat(const MlpParams& p, std::span<double> out) {
    if (out.size() != param_count(p)) {
        throw contract_error("write_flat: buffer size mismatch");
    }
    std::size_t off = 0;
    for (const DenseLayer& l : p.layers) {
        std::copy(l.weight.data.begin(), l.weight.data.end(), out.begin() + off);
        off += l.weight.size();
        std::copy(l.bias.data.begin(), l.bias.data.end(), out.begin() + off);
        off += l.bias.size();
    }
}

void read_flat(MlpParams& p, std::span<const double> in) {
    if (in.size() != param_count(p)) {
        throw contract_error("read_flat: buffer size mismatch");
    }
    std::size_t off = 0;
    for (DenseLayer& l : p.layers) {
        std::copy(in.begin() + off, in.begin() + off + l.weight.size(), l.weight.data.begin());
        off += l.weight.size();
        std::copy(in.begin() + off, in.begin() + off + l.bias.size(), l.bias.data.begin());
        off += l.bias.size();
    }
}

double cosine_lr(std::size_t round_index, std::size_t total_rounds, double lr_max, double lr_min) {
    if (total_rounds == 0) {
        throw config_error("cosine_lr: total_rounds must be positive");
    }
    if (!(lr_min >= 0.0) || !(lr_min <= lr_max)) {
        throw config_error("cosine_lr: require 0 <= lr_min <= lr_max");
    }
    if (round_index > total_rounds) {
        throw contract_error("cosine_lr: round_index exceeds total_rounds");
    }
    const double t = double(round_index) / double(total_rounds);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(M_PI * t));
}

}  // namespace fedmas
