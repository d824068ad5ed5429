// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "fedmas/client.hpp"
#include "fedmas/config.hpp"
#include "fedmas/data.hpp"
#include "fedmas/eval.hpp"
#include "fedmas/prior.hpp"

namespace fedmas {

// In-process mirror of the wire protocol. The reply deliberately carries
// exactly one scalar beyond the parameter vector; the audit test keys off
// these serializations.
struct Broadcast {
    std::size_t round = 0;
    std::vector<double> params;
    double lr = 0.0;
};

struct ClientReply {
    int client_id = 0;
    std::vector<double> params;
    double rf = 0.0;
};

void to_json(nlohmann::json& j, const Broadcast& b);
void to_json(nlohmann::json& j, const ClientReply& r);

// rf_c / sum_j rf_j; all inputs must be finite and >= 0, and at least one
// must be positive.
std::vector<double> normalize_rescue_factors(std::span<const double> rfs);

// Convex combination of equal-length flat vectors; weights must sum to ~1.
std::vector<double> weighted_average(const std::vector<std::vector<double>>& params,
                                     std::span<const double> weights);

struct AggregateResult {
    std::vector<double> params;
    std::vector<double> weights;
};

AggregateResult mas_aggregate(const std::vector<std::vector<double>>& client_params,
                              std::span<const double> rfs);
AggregateResult fedavg_aggregate(const std::vector<std::vector<double>>& client_params,
                                 std::span<const std::size_t> sample_counts);

// Method dispatch used by the round loop. When every rescue factor is zero
// the normalized weights are undefined; that round falls back to
// sample-count weights and reports it.
AggregateResult aggregate_round(Method method, const std::vector<std::vector<double>>& client_params,
                                std::span<const double> rfs,
                                std::span<const std::size_t> sample_counts, bool& used_fallback);

struct RoundReport {
    std::size_t round = 0;
    double lr = 0.0;
    std::vector<double> rf;                  // per client
    std::vector<double> weights;             // aggregation weights used this round
    std::vector<double> contribution_share;  // cumulative mean weight through this round
    bool weight_fallback = false;            // all-zero RF forced sample-count weights
    std::optional<MetricsReport> metrics;
    std::vector<ClientDiagnostics> client_diags;
};

struct FederationInputs {
    const Dataset& train;
    const Dataset& test;
    const Partition& partition;
    const PriorEmbedder& prior;
    const ShotGroups& groups;
};

struct FederationResult {
    std::vector<double> final_params;
    std::vector<RoundReport> history;
    ModelSpec model_spec;
};

// Parallelism cap for the per-round client fan-out; FEDMAS_THREADS wins
// over hardware concurrency. Results never depend on the thread count.
std::size_t thread_cap(std::size_t num_tasks);

// Orchestrates `rounds` rounds of broadcast -> local update -> aggregate,
// evaluating the global model on the held-out test set every eval_every
// rounds (the final round is always evaluated).
FederationResult run_federation(const ExperimentConfig& cfg, const FederationInputs& in);

}  // namespace fedmas
