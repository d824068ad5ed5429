// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fedmas/config.hpp"
#include "fedmas/data.hpp"
#include "fedmas/prior.hpp"
#include "fedmas/server.hpp"

namespace fedmas {

inline constexpr const char* kVersion = "0.1.0";

// Everything a run needs, derived deterministically from the config.
struct PreparedExperiment {
    Dataset full;
    Dataset train;
    Dataset test;
    Partition partition;
    PriorEmbedder prior;
    ShotGroups groups;
};

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg);

struct RunResult {
    std::filesystem::path output_dir;
    MetricsReport final_metrics;
    FederationResult federation;
};

// Runs one experiment and writes manifest.json, rounds.csv,
// final_metrics.json and diagnostics.csv under cfg.output_dir.
RunResult run_experiment(const ExperimentConfig& cfg);

struct SweepSpec {
    // Ordered override dimensions; cells are their cross product with the
    // last dimension varying fastest.
    std::vector<std::pair<std::string, std::vector<std::string>>> dims;

    bool empty() const { return dims.empty(); }
};

// "key=v1,v2;key2=w1,w2"
SweepSpec parse_grid(const std::string& spec);

struct SweepResult {
    std::filesystem::path summary_csv;
    std::size_t num_cells = 0;
};

// Cross-product sweep. Each cell gets the base config plus its overrides;
// unless the grid itself sweeps `seed`, a cell's seed is the base seed
// XOR its cell index. The summary aggregates final metrics as mean/std
// across seed replicates of each non-seed override combination.
SweepResult run_sweep(const ExperimentConfig& base, const SweepSpec& grid);

// Helpers shared with the test suites.
std::string format_double(double v);  // 17 significant digits
void write_rounds_csv(const std::filesystem::path& path, const FederationResult& fed,
                      std::size_t num_clients);
void write_diagnostics_csv(const std::filesystem::path& path, const FederationResult& fed);

}  // namespace fedmas
