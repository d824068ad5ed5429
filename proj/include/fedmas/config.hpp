// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fedmas {

enum class Method { kFedAvg, kFedAvgKd, kFedMas };

std::string method_name(Method m);
std::optional<Method> parse_method(const std::string& s);

struct ExperimentConfig {
    Method method = Method::kFedMas;

    std::size_t num_clients = 8;
    std::size_t num_classes = 10;
    std::size_t rounds = 50;
    std::size_t epochs = 5;      // local epochs per round
    std::size_t batch_size = 32;

    double lr_max = 0.1;  // cosine-annealed across rounds
    double lr_min = 0.0;
    double lambda_f = 3.0;  // weight on the embedding-matching term

    bool iid = false;
    double dirichlet_alpha = 0.5;

    double imbalance_ratio = 100.0;
    std::size_t n_max = 2000;  // largest class size
    std::size_t feature_dim = 16;
    std::size_t embed_dim = 32;
    std::size_t hidden_width = 32;

    // Shot-group thresholds on class counts; 0 means derive from dataset
    // size (hi = N/20, lo = N/200).
    std::size_t shot_hi = 0;
    std::size_t shot_lo = 0;

    std::uint64_t seed = 1;
    std::size_t eval_every = 1;
    std::string output_dir = "out";
};

using KeyValues = std::map<std::string, std::string>;

// Flat "key = value" file; '#' starts a comment. Unknown keys and unparsable
// lines are all reported together.
KeyValues read_config_file(const std::string& path, std::vector<std::string>& errors);

// Applies key/value pairs onto a config. Collects one message per bad field
// instead of stopping at the first.
void apply_key_values(ExperimentConfig& cfg, const KeyValues& kv, std::vector<std::string>& errors);

// Range/consistency checks over the whole config; appends to errors.
void validate(const ExperimentConfig& cfg, std::vector<std::string>& errors);

// Parses file + overrides and validates; throws config_error with every
// problem listed when anything is wrong.
ExperimentConfig load_config(const std::optional<std::string>& path, const KeyValues& overrides);

KeyValues config_to_key_values(const ExperimentConfig& cfg);

}  // namespace fedmas
