// SPDX-License-Identifier: Apache-2.0
#include "fedmas/prior.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <string>

#include "fedmas/errors.hpp"

namespace fedmas {

namespace {
constexpr std::uint32_t kEmbeddingVersion = 1;
constexpr char kEmbeddingMagic[4] = {'F', 'E', 'M', 'B'};
}  // namespace

PriorEmbedder::PriorEmbedder(std::size_t feature_dim, std::size_t embed_dim, std::uint64_t seed)
    : seed_(seed) {
    if (feature_dim == 0 || embed_dim == 0) {
        throw config_error("prior embedder dimensions must be positive");
    }
    const std::array<std::size_t, 3> dims{feature_dim, 8 * embed_dim, embed_dim};
    const std::array<Activation, 2> acts{Activation::kRelu, Activation::kIdentity};
    params_ = make_mlp(dims, acts, seed);
}

Tensor PriorEmbedder::embed(const Tensor& x) const {
    return l2_normalize_rows(forward(params_, x).output);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
        throw io_error("not an embedding file: " + path.string());
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kEmbeddingVersion) {
        throw io_error("unsupported embedding file version");
    }
    std::uint64_t n = 0;
    std::uint32_t dim = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    if (!in) throw io_error("embedding file truncated in header");
    if (n == 0) throw io_error("embedding file holds zero rows");
    if (dim == 0) throw io_error("embedding file declares zero dimension");

    Tensor rows{std::size_t(n), std::size_t(dim)};
    in.read(reinterpret_cast<char*>(rows.data.data()),
            std::streamsize(rows.data.size() * sizeof(double)));
    if (!in) throw io_error("embedding file truncated while reading rows");
    return EmbeddingTable{l2_normalize_rows(rows)};
}

void save_embeddings(const std::filesystem::path& path, const Tensor& rows) {
    if (rows.rows == 0 || rows.cols == 0) {
        throw contract_error("save_embeddings: empty table");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out.write(kEmbeddingMagic, 4);
    const std::uint32_t version = kEmbeddingVersion;
    const std::uint64_t n = rows.rows;
    const std::uint32_t dim = std::uint32_t(rows.cols);
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    out.write(reinterpret_cast<const char*>(rows.data.data()),
              std::streamsize(rows.data.size() * sizeof(double)));
    if (!out) throw io_error("failed writing " + path.string());
}

}  // namespace fedmas
