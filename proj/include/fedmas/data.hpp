// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fedmas/tensor.hpp"

namespace fedmas {

struct Dataset {
    Tensor features;  // N x D
    std::vector<int> labels;
    std::size_t num_classes = 0;
    std::vector<std::size_t> class_counts;  // recounted from labels at construction

    std::size_t size() const { return labels.size(); }
    std::size_t feature_dim() const { return features.cols; }
};

// Validates labels against K and fills class_counts.
Dataset make_dataset(Tensor features, std::vector<int> labels, std::size_t num_classes);

// Synthetic long-tailed classification data. Class k holds
// ceil(n_max * ratio^(-k / (K - 1))) samples from a class-specific Gaussian;
// class means are drawn once, before any sample, so counts never shift them.
Dataset gen_longtail(std::size_t num_classes, std::size_t n_max, double imbalance_ratio,
                     std::size_t feature_dim, std::uint64_t seed);

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

// Per-class split; test gets floor(fraction * M_k) samples of class k.
TrainTestSplit split_train_test(const Dataset& ds, double test_fraction, std::uint64_t seed);

struct Partition {
    // Per-client sorted sample indices; disjoint, covering all of the dataset,
    // no client empty.
    std::vector<std::vector<std::size_t>> assignments;

    std::size_t num_clients() const { return assignments.size(); }
};

void check_partition(const Partition& p, std::size_t dataset_size);

// Per class, client shares are drawn from Dir(alpha * 1_C) and the class's
// samples are split by largest-remainder rounding. Redraws until no client
// ends up empty overall.
Partition dirichlet_partition(const Dataset& ds, std::size_t num_clients, double alpha,
                              std::uint64_t seed);

// Per-class round-robin after a seeded shuffle; client class counts differ
// from floor(M_k / C) by at most one.
Partition iid_partition(const Dataset& ds, std::size_t num_clients, std::uint64_t seed);

struct ShotGroups {
    std::vector<std::size_t> head;    // class count > hi
    std::vector<std::size_t> medium;  // lo <= class count <= hi
    std::vector<std::size_t> tail;    // class count < lo
    std::size_t hi = 0;
    std::size_t lo = 0;
};

ShotGroups shot_groups(std::span<const std::size_t> class_counts, std::size_t hi, std::size_t lo);

// Flat binary dataset file: "FMAS", version u32, N u64, D u32, K u32,
// N*D features (f64 little-endian), N labels (u32).
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace fedmas
