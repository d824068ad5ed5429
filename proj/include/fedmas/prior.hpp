// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>

#include "fedmas/nn.hpp"
#include "fedmas/tensor.hpp"

namespace fedmas {

// Frozen shared embedder. Every client holds a handle to the same instance
// (or an instance built from the same seed); it is never trained and never
// serialized into the federation protocol, so divergence measurements taken
// against it are consistent across clients. There is no mutation API.
class PriorEmbedder {
public:
    PriorEmbedder(std::size_t feature_dim, std::size_t embed_dim, std::uint64_t seed);

    // Unit-norm embedding per row; inputs that collapse to a zero vector are
    // rejected rather than silently renormalized.
    Tensor embed(const Tensor& x) const;

    std::size_t feature_dim() const { return params_.input_dim(); }
    std::size_t embed_dim() const { return params_.output_dim(); }
    std::uint64_t seed() const { return seed_; }
    const MlpParams& params() const { return params_; }

private:
    MlpParams params_;
    std::uint64_t seed_;
};

// Precomputed embeddings keyed by sample index, as an alternative target
// source when embeddings come from an external model computed offline.
struct EmbeddingTable {
    Tensor rows;  // N x dim, unit-norm

    std::size_t size() const { return rows.rows; }
    std::size_t dim() const { return rows.cols; }
};

// Binary embedding file: "FEMB", version u32, N u64, dim u32,
// N*dim f64 little-endian. Rows are re-normalized on load.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const Tensor& rows);

}  // namespace fedmas
