// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedmas/data.hpp"
#include "fedmas/losses.hpp"
#include "fedmas/nn.hpp"
#include "fedmas/prior.hpp"

namespace fedmas {

struct ModelSpec {
    std::size_t feature_dim = 0;
    std::size_t hidden_width = 0;
    std::size_t num_classes = 0;
    std::size_t embed_dim = 0;
};

// The trainable model a client optimizes and the server aggregates:
// a shared encoder feeding a classifier head and a projector head whose
// output lives in the prior's embedding space. All three serialize into
// one flat vector; that vector is the only trained state on the wire.
struct ClientModel {
    MlpParams encoder;     // feature_dim -> hidden (relu)
    MlpParams classifier;  // hidden -> num_classes (linear)
    MlpParams projector;   // hidden -> hidden (relu) -> embed_dim (linear)

    std::size_t num_params() const;
    std::vector<double> to_flat() const;

    static ClientModel shaped(const ModelSpec& spec);
    static ClientModel from_flat(const ModelSpec& spec, std::span<const double> flat);
    static ClientModel init(const ModelSpec& spec, std::uint64_t seed);
};

// One client's immutable view of its data slice, with prior targets
// precomputed once (the prior is frozen, so they never change).
struct ClientState {
    int client_id = 0;
    std::vector<std::size_t> indices;  // into the training dataset, sorted
    Tensor features;
    std::vector<int> labels;
    std::vector<std::size_t> class_counts;  // local M_k
    Tensor prior_targets;                   // unit rows, aligned with features
    std::size_t num_classes = 0;

    std::size_t size() const { return labels.size(); }
};

ClientState make_client_state(int client_id, const Dataset& train, const Partition& partition,
                              const PriorEmbedder& prior);

// Class-aware divergence of a model against the prior over this client's
// data: per-class mean of the embedding-matching loss, full local pass,
// no parameter updates. Called on freshly received global parameters this
// yields w; nothing is mutated.
ClasswiseLoss measure_global_divergence(const ClientModel& model, const ClientState& state);

// RF = sum_k w_k * w_hat_k over classes the client observed.
double rescue_factor(const ClasswiseLoss& w, const ClasswiseLoss& w_hat);

struct ClientDiagnostics {
    ClasswiseLoss w;      // divergence of the received global model
    ClasswiseLoss w_hat;  // per-epoch mean divergence during training, summed over epochs
    double rf = 0.0;
    std::vector<double> epoch_total_loss;
    std::vector<double> epoch_sup_loss;
    std::vector<double> epoch_distill_loss;
};

struct LocalUpdateResult {
    std::vector<double> params;  // flat local model after training
    double rf = 0.0;
    ClientDiagnostics diag;
};

struct LocalUpdateConfig {
    std::size_t epochs = 1;
    std::size_t batch_size = 1;
    double lr = 0.0;        // fixed within the round
    double lambda_f = 0.0;  // weight of the embedding-matching term
    std::uint64_t seed = 0; // per client+round shuffle stream
};

// One round of local work: measure w against the received model, train
// `epochs` passes of mini-batch SGD on the combined objective while
// accumulating w_hat (per-epoch mean of per-batch class means, summed
// across epochs), then report the trained parameters and RF.
LocalUpdateResult local_update(const ClientState& state, const ClientModel& global_model,
                               const LocalUpdateConfig& cfg);

}  // namespace fedmas
