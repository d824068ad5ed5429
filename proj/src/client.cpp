// SPDX-License-Identifier: Apache-2.0
#include "fedmas/client.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <random>
#include <string>

#include "fedmas/errors.hpp"

namespace fedmas {

namespace {

void check_spec(const ModelSpec& spec) {
    if (spec.feature_dim == 0 || spec.hidden_width == 0 || spec.num_classes == 0 ||
        spec.embed_dim == 0) {
        throw config_error("model spec has a zero dimension");
    }
}

MlpParams shaped_mlp(std::span<const std::size_t> dims, std::span<const Activation> acts) {
    MlpParams p;
    p.layers.resize(dims.size() - 1);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        p.layers[i].weight = Tensor(dims[i], dims[i + 1]);
        p.layers[i].bias = Tensor(1, dims[i + 1]);
        p.layers[i].act = acts[i];
    }
    return p;
}

}  // namespace

std::size_t ClientModel::num_params() const {
    return param_count(encoder) + param_count(classifier) + param_count(projector);
}

std::vector<double> ClientModel::to_flat() const {
    std::vector<double> out(num_params());
    std::span<double> span(out);
    std::size_t off = 0;
    for (const MlpParams* p : {&encoder, &classifier, &projector}) {
        write_flat(*p, span.subspan(off, param_count(*p)));
        off += param_count(*p);
    }
    return out;
}

ClientModel ClientModel::shaped(const ModelSpec& spec) {
    check_spec(spec);
    ClientModel m;
    {
        const std::array<std::size_t, 2> dims{spec.feature_dim, spec.hidden_width};
        const std::array<Activation, 1> acts{Activation::kRelu};
        m.encoder = shaped_mlp(dims, acts);
    }
    {
        const std::array<std::size_t, 2> dims{spec.hidden_width, spec.num_classes};
        const std::array<Activation, 1> acts{Activation::kIdentity};
        m.classifier = shaped_mlp(dims, acts);
    }
    {
        const std::array<std::size_t, 3> dims{spec.hidden_width, spec.hidden_width,
                                              spec.embed_dim};
        const std::array<Activation, 2> acts{Activation::kRelu, Activation::kIdentity};
        m.projector = shaped_mlp(dims, acts);
    }
    return m;
}

ClientModel ClientModel::from_flat(const ModelSpec& spec, std::span<const double> flat) {
    ClientModel m = shaped(spec);
    if (flat.size() != m.num_params()) {
        throw contract_error("from_flat: expected " + std::to_string(m.num_params()) +
                             " parameters, got " + std::to_string(flat.size()));
    }
    std::size_t off = 0;
    for (MlpParams* p : {&m.encoder, &m.classifier, &m.projector}) {
        read_flat(*p, flat.subspan(off, param_count(*p)));
        off += param_count(*p);
    }
    return m;
}

// Biases start slightly positive. An all-zero bias stack can propagate an
// exactly-zero projector row (dead relu input), and the zero vector has no
// direction to normalize; a nonzero output bias removes that structural case.
constexpr double kBiasInit = 0.01;

ClientModel ClientModel::init(const ModelSpec& spec, std::uint64_t seed) {
    check_spec(spec);
    std::mt19937_64 rng(seed);
    ClientModel m;
    {
        const std::array<std::size_t, 2> dims{spec.feature_dim, spec.hidden_width};
        const std::array<Activation, 1> acts{Activation::kRelu};
        m.encoder = make_mlp(dims, acts, rng);
    }
    {
        const std::array<std::size_t, 2> dims{spec.hidden_width, spec.num_classes};
        const std::array<Activation, 1> acts{Activation::kIdentity};
        m.classifier = make_mlp(dims, acts, rng);
    }
    {
        const std::array<std::size_t, 3> dims{spec.hidden_width, spec.hidden_width,
                                              spec.embed_dim};
        const std::array<Activation, 2> acts{Activation::kRelu, Activation::kIdentity};
        m.projector = make_mlp(dims, acts, rng);
    }
    for (MlpParams* p : {&m.encoder, &m.classifier, &m.projector}) {
        for (DenseLayer& l : p->layers) {
            for (double& b : l.bias.data) b = kBiasInit;
        }
    }
    return m;
}

ClientState make_client_state(int client_id, const Dataset& train, const Partition& partition,
                              const PriorEmbedder& prior) {
    if (client_id < 0 || std::size_t(client_id) >= partition.num_clients()) {
        throw contract_error("client id " + std::to_string(client_id) + " outside partition");
    }
    ClientState st;
    st.client_id = client_id;
    st.indices = partition.assignments[std::size_t(client_id)];
    if (st.indices.empty()) {
        throw config_error("client " + std::to_string(client_id) + " has no data");
    }
    st.features = gather_rows(train.features, st.indices);
    st.labels.resize(st.indices.size());
    st.class_counts.assign(train.num_classes, 0);
    for (std::size_t i = 0; i < st.indices.size(); ++i) {
        st.labels[i] = train.labels[st.indices[i]];
        ++st.class_counts[std::size_t(st.labels[i])];
    }
    st.prior_targets = prior.embed(st.features);
    st.num_classes = train.num_classes;
    return st;
}

ClasswiseLoss measure_global_divergence(const ClientModel& model, const ClientState& state) {
    if (state.size() == 0) {
        throw config_error("measure_global_divergence: client has no data");
    }
    const Tensor hidden = forward(model.encoder, state.features).output;
    const Tensor projected = forward(model.projector, hidden).output;
    const Tensor y = l2_normalize_rows(projected);
    const DistillLoss d = distill_loss(y, state.prior_targets);
    return classwise_mean(d.per_sample, state.labels, state.num_classes);
}

double rescue_factor(const ClasswiseLoss& w, const ClasswiseLoss& w_hat) {
    if (w.num_classes() != w_hat.num_classes()) {
        throw contract_error("rescue_factor: class counts disagree");
    }
    double rf = 0.0;
    for (std::size_t k = 0; k < w.num_classes(); ++k) {
        if (w.has(k) && w_hat.has(k)) {
            rf += w.per_class[k] * w_hat.per_class[k];
        }
    }
    return rf;
}

LocalUpdateResult local_update(const ClientState& state, const ClientModel& global_model,
                               const LocalUpdateConfig& cfg) {
    if (cfg.epochs < 1) throw config_error("local_update: epochs must be >= 1");
    if (cfg.batch_size < 1) throw config_error("local_update: batch_size must be >= 1");

    const std::size_t k_total = state.num_classes;
    ClientModel model = global_model;

    LocalUpdateResult res;
    // w is measured on the received parameters, before the first step.
    res.diag.w = measure_global_divergence(model, state);

    ClasswiseLoss w_hat;
    w_hat.per_class.assign(k_total, 0.0);
    w_hat.per_class_count.assign(k_total, 0);  // epochs in which the class was seen

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(state.size());
    std::iota(order.begin(), order.end(), 0);

    try {
        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);

            // Running per-class mean over this epoch's batches.
            std::vector<double> epoch_sum(k_total, 0.0);
            std::vector<std::size_t> epoch_batches(k_total, 0);
            double sup_sum = 0.0;
            double distill_sum = 0.0;
            double total_sum = 0.0;
            std::size_t batch_count = 0;

            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                const std::span<const std::size_t> batch_idx(order.data() + start, end - start);

                const Tensor x = gather_rows(state.features, batch_idx);
                const Tensor targets = gather_rows(state.prior_targets, batch_idx);
                std::vector<int> labels(batch_idx.size());
                for (std::size_t i = 0; i < batch_idx.size(); ++i) {
                    labels[i] = state.labels[batch_idx[i]];
                }

                const ForwardTrace enc = forward(model.encoder, x);
                const ForwardTrace cls = forward(model.classifier, enc.output);
                const ForwardTrace proj = forward(model.projector, enc.output);
                const Tensor y = l2_normalize_rows(proj.output);

                const SupLoss sup = balanced_softmax_ce(cls.output, labels, state.class_counts);
                const DistillLoss distill = distill_loss(y, targets);

                const ClasswiseLoss batch_means =
                    classwise_mean(distill.per_sample, labels, k_total);
                for (std::size_t k = 0; k < k_total; ++k) {
                    if (batch_means.has(k)) {
                        epoch_sum[k] += batch_means.per_class[k];
                        ++epoch_batches[k];
                    }
                }
                sup_sum += sup.loss;
                distill_sum += distill.mean;
                total_sum += total_loss(sup.loss, distill.mean, cfg.lambda_f);
                ++batch_count;

                // The projector is trained only by the embedding-matching
                // term, the classifier only by the supervised term, the
                // encoder by both.
                const Tensor grad_raw =
                    l2_normalize_rows_backward(proj.output, scale(distill.grad_y, cfg.lambda_f));
                BackwardResult proj_back = backward(model.projector, proj, grad_raw);
                BackwardResult cls_back = backward(model.classifier, cls, sup.grad_logits);
                add_in_place(cls_back.input_grad, proj_back.input_grad);
                BackwardResult enc_back = backward(model.encoder, enc, cls_back.input_grad);

                model.encoder = sgd_step(model.encoder, enc_back.grads, cfg.lr);
                model.classifier = sgd_step(model.classifier, cls_back.grads, cfg.lr);
                model.projector = sgd_step(model.projector, proj_back.grads, cfg.lr);
            }

            for (std::size_t k = 0; k < k_total; ++k) {
                if (epoch_batches[k] > 0) {
                    w_hat.per_class[k] += epoch_sum[k] / double(epoch_batches[k]);
                    ++w_hat.per_class_count[k];
                }
            }
            res.diag.epoch_sup_loss.push_back(sup_sum / double(batch_count));
            res.diag.epoch_distill_loss.push_back(distill_sum / double(batch_count));
            res.diag.epoch_total_loss.push_back(total_sum / double(batch_count));
        }
    } catch (const numeric_fault& e) {
        throw numeric_fault("client " + std::to_string(state.client_id) + ", epoch " +
                            std::to_string(res.diag.epoch_total_loss.size()) + ": " + e.what());
    }

    res.diag.w_hat = std::move(w_hat);
    res.rf = rescue_factor(res.diag.w, res.diag.w_hat);
    res.diag.rf = res.rf;
    res.params = model.to_flat();
    return res;
}

}  // namespace fedmas
