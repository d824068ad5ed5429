// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "fedmas/tensor.hpp"

namespace fedmas {

// Per-class mean of some per-sample loss. A class nobody observed is flagged
// absent (count zero), never reported as a zero loss.
struct ClasswiseLoss {
    std::vector<double> per_class;
    std::vector<std::size_t> per_class_count;

    std::size_t num_classes() const { return per_class.size(); }
    bool has(std::size_t k) const { return per_class_count[k] > 0; }
};

ClasswiseLoss classwise_mean(std::span<const double> per_sample, std::span<const int> labels,
                             std::size_t num_classes);

struct DistillLoss {
    std::vector<double> per_sample;  // 2 - 2 <y, y'>, in [0, 4]
    double mean = 0.0;
    Tensor grad_y;  // d(mean)/dy; targets are frozen, nothing flows into y'
};

// Embedding-matching loss between unit-norm rows y and unit-norm targets.
// Both inputs must already be normalized (within 1e-6); the gradient w.r.t.
// the raw pre-normalization rows is obtained by chaining grad_y through
// l2_normalize_rows_backward.
DistillLoss distill_loss(const Tensor& y, const Tensor& y_target);

struct SupLoss {
    double loss = 0.0;
    Tensor grad_logits;  // (softmax(z + log M) - onehot) / batch
};

// Softmax cross-entropy on logits shifted by log class counts. Classes with
// zero count are treated as locally unreachable (shift -inf); a label whose
// count is zero is a data inconsistency.
SupLoss balanced_softmax_ce(const Tensor& logits, std::span<const int> labels,
                            std::span<const std::size_t> class_counts);

// sup + lambda_f * distill
double total_loss(double sup, double distill, double lambda_f);

}  // namespace fedmas
