// SPDX-License-Identifier: Apache-2.0
#include "fedmas/server.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <string>
#include <thread>

#include "fedmas/errors.hpp"
#include "fedmas/rng.hpp"

namespace fedmas {

void to_json(nlohmann::json& j, const Broadcast& b) {
    j = nlohmann::json{{"round", b.round}, {"params", b.params}, {"lr", b.lr}};
}

void to_json(nlohmann::json& j, const ClientReply& r) {
    j = nlohmann::json{{"client_id", r.client_id}, {"params", r.params}, {"rf", r.rf}};
}

std::vector<double> normalize_rescue_factors(std::span<const double> rfs) {
    if (rfs.empty()) {
        throw contract_error("normalize_rescue_factors: no clients");
    }
    double sum = 0.0;
    for (double rf : rfs) {
        if (!std::isfinite(rf) || rf < 0.0) {
            throw contract_error("normalize_rescue_factors: rescue factors must be finite and >= 0");
        }
        sum += rf;
    }
    if (!(sum > 0.0)) {
        throw degenerate_weights_error("all rescue factors are zero");
    }
    std::vector<double> weights(rfs.size());
    for (std::size_t c = 0; c < rfs.size(); ++c) weights[c] = rfs[c] / sum;
    return weights;
}

std::vector<double> weighted_average(const std::vector<std::vector<double>>& params,
                                     std::span<const double> weights) {
    if (params.empty() || params.size() != weights.size()) {
        throw contract_error("weighted_average: params/weights size mismatch");
    }
    const std::size_t dim = params.front().size();
    for (const auto& p : params) {
        if (p.size() != dim) {
            throw contract_error("weighted_average: client parameter vectors differ in length");
        }
    }
    std::vector<double> out(dim, 0.0);
    for (std::size_t c = 0; c < params.size(); ++c) {
        const double w = weights[c];
        for (std::size_t j = 0; j < dim; ++j) {
            out[j] += w * params[c][j];
        }
    }
    for (double v : out) {
        if (!std::isfinite(v)) {
            throw numeric_fault("weighted_average: non-finite aggregate");
        }
    }
    return out;
}

AggregateResult mas_aggregate(const std::vector<std::vector<double>>& client_params,
                              std::span<const double> rfs) {
    if (client_params.size() != rfs.size()) {
        throw contract_error("mas_aggregate: params/rf count mismatch");
    }
    std::vector<double> weights = normalize_rescue_factors(rfs);
    std::vector<double> agg = weighted_average(client_params, weights);
    return {std::move(agg), std::move(weights)};
}

AggregateResult fedavg_aggregate(const std::vector<std::vector<double>>& client_params,
                                 std::span<const std::size_t> sample_counts) {
    if (client_params.size() != sample_counts.size()) {
        throw contract_error("fedavg_aggregate: params/count mismatch");
    }
    std::size_t total = 0;
    for (std::size_t n : sample_counts) total += n;
    if (total == 0) {
        throw contract_error("fedavg_aggregate: zero total samples");
    }
    std::vector<double> weights(sample_counts.size());
    for (std::size_t c = 0; c < sample_counts.size(); ++c) {
        weights[c] = double(sample_counts[c]) / double(total);
    }
    std::vector<double> agg = weighted_average(client_params, weights);
    return {std::move(agg), std::move(weights)};
}

AggregateResult aggregate_round(Method method, const std::vector<std::vector<double>>& client_params,
                                std::span<const double> rfs,
                                std::span<const std::size_t> sample_counts, bool& used_fallback) {
    used_fallback = false;
    if (method == Method::kFedMas) {
        try {
            return mas_aggregate(client_params, rfs);
        } catch (const degenerate_weights_error&) {
            used_fallback = true;
            return fedavg_aggregate(client_params, sample_counts);
        }
    }
    return fedavg_aggregate(client_params, sample_counts);
}

std::size_t thread_cap(std::size_t num_tasks) {
    std::size_t cap = std::thread::hardware_concurrency();
    if (cap == 0) cap = 1;
    if (const char* env = std::getenv("FEDMAS_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) {
            cap = std::size_t(v);
        }
    }
    return std::min(cap, std::max<std::size_t>(num_tasks, 1));
}

namespace {

// Runs fn(i) for i in [0, n), fanning out over at most thread_cap(n)
// workers. Exceptions are rethrown in task order, so failures are
// schedule-independent too.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = thread_cap(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

FederationResult run_federation(const ExperimentConfig& cfg, const FederationInputs& in) {
    const std::size_t num_clients = cfg.num_clients;
    if (in.partition.num_clients() != num_clients) {
        throw config_error("run_federation: partition has " +
                           std::to_string(in.partition.num_clients()) + " clients, config says " +
                           std::to_string(num_clients));
    }

    const ModelSpec spec{cfg.feature_dim, cfg.hidden_width, in.train.num_classes, cfg.embed_dim};
    const double lambda_f = cfg.method == Method::kFedAvg ? 0.0 : cfg.lambda_f;

    std::vector<ClientState> clients;
    clients.reserve(num_clients);
    std::vector<std::size_t> sample_counts(num_clients);
    for (std::size_t c = 0; c < num_clients; ++c) {
        clients.push_back(make_client_state(int(c), in.train, in.partition, in.prior));
        sample_counts[c] = clients.back().size();
    }

    FederationResult result;
    result.model_spec = spec;
    result.final_params =
        ClientModel::init(spec, derive_seed(cfg.seed, seed_tag::model_init)).to_flat();

    std::vector<double> weight_sums(num_clients, 0.0);
    for (std::size_t round = 0; round < cfg.rounds; ++round) {
        const double lr = cosine_lr(round, cfg.rounds, cfg.lr_max, cfg.lr_min);
        const Broadcast broadcast{round, result.final_params, lr};
        const ClientModel global_model = ClientModel::from_flat(spec, broadcast.params);

        std::vector<ClientReply> replies(num_clients);
        std::vector<ClientDiagnostics> diags(num_clients);
        parallel_for(num_clients, [&](std::size_t c) {
            LocalUpdateConfig lu;
            lu.epochs = cfg.epochs;
            lu.batch_size = cfg.batch_size;
            lu.lr = broadcast.lr;
            lu.lambda_f = lambda_f;
            lu.seed = derive_seed(cfg.seed, seed_tag::client_round, round, c);
            LocalUpdateResult r = local_update(clients[c], global_model, lu);
            replies[c] = ClientReply{int(c), std::move(r.params), r.rf};
            diags[c] = std::move(r.diag);
        });

        std::vector<std::vector<double>> client_params(num_clients);
        std::vector<double> rfs(num_clients);
        for (std::size_t c = 0; c < num_clients; ++c) {
            client_params[c] = std::move(replies[c].params);
            rfs[c] = replies[c].rf;
        }

        RoundReport report;
        report.round = round;
        report.lr = lr;
        report.rf = rfs;
        report.client_diags = std::move(diags);

        AggregateResult agg =
            aggregate_round(cfg.method, client_params, rfs, sample_counts, report.weight_fallback);
        result.final_params = std::move(agg.params);
        report.weights = std::move(agg.weights);

        for (std::size_t c = 0; c < num_clients; ++c) weight_sums[c] += report.weights[c];
        report.contribution_share.resize(num_clients);
        for (std::size_t c = 0; c < num_clients; ++c) {
            report.contribution_share[c] = weight_sums[c] / double(round + 1);
        }

        const bool eval_now = ((round + 1) % cfg.eval_every == 0) || (round + 1 == cfg.rounds);
        if (eval_now) {
            report.metrics =
                evaluate(ClientModel::from_flat(spec, result.final_params), in.test, in.groups);
        }
        result.history.push_back(std::move(report));
    }
    return result;
}

}  // namespace fedmas
