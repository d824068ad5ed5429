// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include <json.hpp>

#include "fedmas/errors.hpp"
#include "fedmas/rng.hpp"
#include "fedmas/runner.hpp"
#include "fedmas/server.hpp"
#include "test_support.hpp"

using namespace fedmas;

namespace {

ExperimentConfig tiny_config(Method method, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.method = method;
    cfg.num_clients = 3;
    cfg.num_classes = 4;
    cfg.rounds = 3;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.n_max = 60;
    cfg.imbalance_ratio = 10.0;
    cfg.feature_dim = 6;
    cfg.embed_dim = 5;
    cfg.hidden_width = 8;
    cfg.seed = seed;
    return cfg;
}

FederationResult run_tiny(Method method, std::uint64_t seed) {
    const ExperimentConfig cfg = tiny_config(method, seed);
    const PreparedExperiment prep = prepare_experiment(cfg);
    const FederationInputs in{prep.train, prep.test, prep.partition, prep.prior, prep.groups};
    return run_federation(cfg, in);
}

}  // namespace

TEST_SUITE("server") {

TEST_CASE("wire schema: broadcast and reply serialize exactly their fields") {
    const Broadcast b{3, {1.0, 2.0}, 0.05};
    const nlohmann::json jb = b;
    CHECK(jb.size() == 3);
    CHECK(jb.contains("round"));
    CHECK(jb.contains("params"));
    CHECK(jb.contains("lr"));

    const ClientReply r{1, {0.5, 0.25}, 2.5};
    const nlohmann::json jr = r;
    CHECK(jr.size() == 3);
    CHECK(jr.contains("client_id"));
    CHECK(jr.contains("params"));
    CHECK(jr.contains("rf"));
    CHECK(jr["rf"].is_number());
    CHECK(jr["params"].is_array());
}

TEST_CASE("normalize_rescue_factors: basic normalization and errors") {
    const std::vector<double> rfs{1.0, 3.0};
    const auto w = normalize_rescue_factors(rfs);
    CHECK(w[0] == doctest::Approx(0.25));
    CHECK(w[1] == doctest::Approx(0.75));

    CHECK_THROWS_AS(normalize_rescue_factors(std::vector<double>{0.0, 0.0}),
                    degenerate_weights_error);
    CHECK_THROWS_AS(normalize_rescue_factors(std::vector<double>{-1.0, 2.0}), contract_error);
}

TEST_CASE("normalize_rescue_factors: scaling invariance") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(0.01, 5.0);
    std::vector<double> rfs(8);
    for (double& v : rfs) v = dist(rng);
    const auto base = normalize_rescue_factors(rfs);
    for (double c : {1e-7, 0.5, 3.0, 1e9}) {
        std::vector<double> scaled = rfs;
        for (double& v : scaled) v *= c;
        const auto w = normalize_rescue_factors(scaled);
        for (std::size_t i = 0; i < w.size(); ++i) {
            CHECK(std::abs(w[i] - base[i]) < 1e-12);
        }
    }
}

TEST_CASE("mas_aggregate: identical vectors are a fixed point") {
    const std::vector<std::vector<double>> params{{1.0, -2.0}, {1.0, -2.0}, {1.0, -2.0}};
    const std::vector<double> rfs{0.2, 5.0, 1.0};
    const AggregateResult agg = mas_aggregate(params, rfs);
    CHECK(agg.params[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(agg.params[1] == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("mas_aggregate: two scalar params, rf 1 and 3") {
    const std::vector<std::vector<double>> params{{0.0}, {4.0}};
    const std::vector<double> rfs{1.0, 3.0};
    const AggregateResult agg = mas_aggregate(params, rfs);
    CHECK(agg.weights[0] == doctest::Approx(0.25));
    CHECK(agg.weights[1] == doctest::Approx(0.75));
    CHECK(agg.params[0] == doctest::Approx(3.0));
}

TEST_CASE("mas_aggregate with equal rfs equals fedavg with equal counts") {
    std::mt19937_64 rng(7);
    std::vector<std::vector<double>> params(4, std::vector<double>(10));
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& p : params) {
        for (double& v : p) v = dist(rng);
    }
    const AggregateResult mas = mas_aggregate(params, std::vector<double>{2.0, 2.0, 2.0, 2.0});
    const AggregateResult avg =
        fedavg_aggregate(params, std::vector<std::size_t>{7, 7, 7, 7});
    for (std::size_t j = 0; j < 10; ++j) {
        CHECK(std::abs(mas.params[j] - avg.params[j]) < 1e-12);
    }
}

TEST_CASE("fedavg_aggregate: simple mean and degenerate cases") {
    {
        const std::vector<std::vector<double>> params{{0.0}, {2.0}};
        const AggregateResult agg = fedavg_aggregate(params, std::vector<std::size_t>{1, 1});
        CHECK(agg.params[0] == doctest::Approx(1.0));
    }
    {
        const std::vector<std::vector<double>> params{{3.5, -1.0}};
        const AggregateResult agg = fedavg_aggregate(params, std::vector<std::size_t>{9});
        CHECK(agg.params[0] == doctest::Approx(3.5));
        CHECK(agg.params[1] == doctest::Approx(-1.0));
    }
    CHECK_THROWS_AS(fedavg_aggregate({{1.0}, {2.0}}, std::vector<std::size_t>{0, 0}),
                    contract_error);
    CHECK_THROWS_AS(mas_aggregate({{1.0}, {2.0, 3.0}}, std::vector<double>{1.0, 1.0}),
                    contract_error);
}

TEST_CASE("fedavg equals mas when rfs are proportional to sample counts") {
    std::mt19937_64 rng(11);
    std::vector<std::vector<double>> params(3, std::vector<double>(6));
    std::normal_distribution<double> dist(0.0, 2.0);
    for (auto& p : params) {
        for (double& v : p) v = dist(rng);
    }
    const std::vector<std::size_t> counts{10, 30, 60};
    const std::vector<double> rfs{1.0, 3.0, 6.0};
    const AggregateResult avg = fedavg_aggregate(params, counts);
    const AggregateResult mas = mas_aggregate(params, rfs);
    for (std::size_t j = 0; j < 6; ++j) {
        CHECK(std::abs(mas.params[j] - avg.params[j]) < 1e-12);
    }
}

TEST_CASE("weighted_average stays inside the per-coordinate envelope") {
    std::mt19937_64 rng(13);
    std::vector<std::vector<double>> params(5, std::vector<double>(12));
    std::normal_distribution<double> dist(0.0, 3.0);
    for (auto& p : params) {
        for (double& v : p) v = dist(rng);
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> rfs(5);
    for (double& v : rfs) v = u(rng) + 1e-3;
    const AggregateResult agg = mas_aggregate(params, rfs);

    double max_abs = 0.0;
    for (const auto& p : params) {
        for (double v : p) max_abs = std::max(max_abs, std::abs(v));
    }
    for (double v : agg.params) {
        CHECK(std::abs(v) <= max_abs + 1e-12);
    }
}

TEST_CASE("aggregate_round: all-zero rescue factors fall back to sample counts") {
    const std::vector<std::vector<double>> params{{1.0}, {3.0}};
    const std::vector<double> rfs{0.0, 0.0};
    const std::vector<std::size_t> counts{1, 3};
    bool fallback = false;
    const AggregateResult agg = aggregate_round(Method::kFedMas, params, rfs, counts, fallback);
    CHECK(fallback);
    CHECK(agg.params[0] == doctest::Approx(2.5));

    fallback = true;
    const AggregateResult avg = aggregate_round(Method::kFedAvg, params, rfs, counts, fallback);
    CHECK(!fallback);
    CHECK(avg.params[0] == doctest::Approx(2.5));
}

TEST_CASE("run_federation: zero rounds returns the seeded initial model") {
    ExperimentConfig cfg = tiny_config(Method::kFedMas, 3);
    cfg.rounds = 0;
    const PreparedExperiment prep = prepare_experiment(cfg);
    const FederationInputs in{prep.train, prep.test, prep.partition, prep.prior, prep.groups};
    const FederationResult res = run_federation(cfg, in);
    CHECK(res.history.empty());
    const ModelSpec spec{cfg.feature_dim, cfg.hidden_width, prep.train.num_classes, cfg.embed_dim};
    const auto expected =
        ClientModel::init(spec, derive_seed(cfg.seed, seed_tag::model_init)).to_flat();
    CHECK(res.final_params == expected);
}

TEST_CASE("run_federation: weights are a convex combination every round, every method") {
    for (Method method : {Method::kFedAvg, Method::kFedAvgKd, Method::kFedMas}) {
        const FederationResult res = run_tiny(method, 17);
        REQUIRE(res.history.size() == 3);
        for (const RoundReport& r : res.history) {
            double sum = 0.0;
            for (double w : r.weights) {
                CHECK(w >= 0.0);
                CHECK(w <= 1.0 + 1e-12);
                sum += w;
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
            for (double rf : r.rf) CHECK(rf >= 0.0);
            CHECK(r.client_diags.size() == 3);
        }
        CHECK(res.history.back().metrics.has_value());
    }
}

TEST_CASE("run_federation: contribution shares are cumulative means of weights") {
    const FederationResult res = run_tiny(Method::kFedMas, 23);
    std::vector<double> sums(3, 0.0);
    for (std::size_t r = 0; r < res.history.size(); ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
            sums[c] += res.history[r].weights[c];
            CHECK(res.history[r].contribution_share[c] ==
                  doctest::Approx(sums[c] / double(r + 1)).epsilon(1e-12));
        }
    }
    // With a single round the share is the round's weight vector itself.
    ExperimentConfig cfg = tiny_config(Method::kFedMas, 23);
    cfg.rounds = 1;
    const PreparedExperiment prep = prepare_experiment(cfg);
    const FederationInputs in{prep.train, prep.test, prep.partition, prep.prior, prep.groups};
    const FederationResult one = run_federation(cfg, in);
    CHECK(one.history[0].contribution_share == one.history[0].weights);
}

TEST_CASE("run_federation is deterministic and schedule-independent") {
    setenv("FEDMAS_THREADS", "1", 1);
    const FederationResult a = run_tiny(Method::kFedMas, 29);
    const FederationResult b = run_tiny(Method::kFedMas, 29);
    setenv("FEDMAS_THREADS", "4", 1);
    const FederationResult c = run_tiny(Method::kFedMas, 29);
    unsetenv("FEDMAS_THREADS");
    CHECK(a.final_params == b.final_params);
    CHECK(a.final_params == c.final_params);
    for (std::size_t r = 0; r < a.history.size(); ++r) {
        CHECK(a.history[r].rf == c.history[r].rf);
        CHECK(a.history[r].weights == c.history[r].weights);
    }
}

TEST_CASE("run_federation: eval cadence covers ceil(rounds / eval_every)") {
    ExperimentConfig cfg = tiny_config(Method::kFedAvg, 31);
    cfg.rounds = 5;
    cfg.eval_every = 2;
    const PreparedExperiment prep = prepare_experiment(cfg);
    const FederationInputs in{prep.train, prep.test, prep.partition, prep.prior, prep.groups};
    const FederationResult res = run_federation(cfg, in);
    std::size_t evaluated = 0;
    for (const RoundReport& r : res.history) {
        if (r.metrics) ++evaluated;
    }
    CHECK(evaluated == 3);  // rounds 1, 3 and the final round 4
    CHECK(res.history.back().metrics.has_value());
}

}  // TEST_SUITE
