// SPDX-License-Identifier: Apache-2.0
#include "fedmas/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fedmas/errors.hpp"

namespace fedmas {

namespace {

constexpr double kUnitNormTolerance = 1e-6;

void require_unit_rows(const Tensor& m, const char* what) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double n = l2_norm(m.row(i));
        if (std::abs(n - 1.0) > kUnitNormTolerance) {
            throw contract_error(std::string(what) + " row " + std::to_string(i) +
                                 " is not unit-norm (|v| = " + std::to_string(n) + ")");
        }
    }
}

}  // namespace

ClasswiseLoss classwise_mean(std::span<const double> per_sample, std::span<const int> labels,
                             std::size_t num_classes) {
    if (per_sample.size() != labels.size()) {
        throw contract_error("classwise_mean: losses and labels disagree in length");
    }
    ClasswiseLoss out;
    out.per_class.assign(num_classes, 0.0);
    out.per_class_count.assign(num_classes, 0);
    for (std::size_t i = 0; i < per_sample.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || std::size_t(y) >= num_classes) {
            throw data_error("classwise_mean: label " + std::to_string(y) + " out of range");
        }
        if (per_sample[i] < 0.0) {
            throw contract_error("classwise_mean: negative loss value");
        }
        out.per_class[std::size_t(y)] += per_sample[i];
        ++out.per_class_count[std::size_t(y)];
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (out.per_class_count[k] > 0) {
            out.per_class[k] /= double(out.per_class_count[k]);
        }
    }
    return out;
}

DistillLoss distill_loss(const Tensor& y, const Tensor& y_target) {
    if (!y.same_shape(y_target)) {
        throw contract_error("distill_loss: shape mismatch between projections and targets");
    }
    if (y.rows == 0) {
        throw contract_error("distill_loss: empty batch");
    }
    require_unit_rows(y, "projection");
    require_unit_rows(y_target, "target");

    DistillLoss out;
    out.per_sample.resize(y.rows);
    out.grad_y = Tensor(y.rows, y.cols);
    const double inv_batch = 1.0 / double(y.rows);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.rows; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < y.cols; ++j) dot += y.at(i, j) * y_target.at(i, j);
        const double loss = 2.0 - 2.0 * dot;
        out.per_sample[i] = loss > 0.0 ? loss : 0.0;
        sum += out.per_sample[i];
        for (std::size_t j = 0; j < y.cols; ++j) {
            out.grad_y.at(i, j) = -2.0 * y_target.at(i, j) * inv_batch;
        }
    }
    out.mean = sum * inv_batch;
    return out;
}

SupLoss balanced_softmax_ce(const Tensor& logits, std::span<const int> labels,
                            std::span<const std::size_t> class_counts) {
    if (logits.rows != labels.size()) {
        throw contract_error("balanced_softmax_ce: batch size mismatch");
    }
    if (logits.cols != class_counts.size()) {
        throw contract_error("balanced_softmax_ce: logit width vs class count length");
    }
    if (logits.rows == 0) {
        throw contract_error("balanced_softmax_ce: empty batch");
    }
    const std::size_t k_total = logits.cols;
    std::vector<double> shift(k_total);
    for (std::size_t k = 0; k < k_total; ++k) {
        shift[k] = class_counts[k] > 0 ? std::log(double(class_counts[k]))
                                       : -std::numeric_limits<double>::infinity();
    }

    SupLoss out;
    out.grad_logits = Tensor(logits.rows, logits.cols);
    const double inv_batch = 1.0 / double(logits.rows);
    double loss_sum = 0.0;
    std::vector<double> adjusted(k_total);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || std::size_t(y) >= k_total) {
            throw data_error("balanced_softmax_ce: label " + std::to_string(y) + " out of range");
        }
        if (class_counts[std::size_t(y)] == 0) {
            throw data_error("balanced_softmax_ce: label " + std::to_string(y) +
                             " refers to a class with zero count");
        }
        double row_max = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < k_total; ++k) {
            adjusted[k] = logits.at(i, k) + shift[k];
            if (adjusted[k] > row_max) row_max = adjusted[k];
        }
        double denom = 0.0;
        for (std::size_t k = 0; k < k_total; ++k) {
            denom += std::exp(adjusted[k] - row_max);  // absent classes add exp(-inf) = 0
        }
        loss_sum += std::log(denom) + row_max - adjusted[std::size_t(y)];
        for (std::size_t k = 0; k < k_total; ++k) {
            const double p = std::exp(adjusted[k] - row_max) / denom;
            out.grad_logits.at(i, k) =
                (p - (k == std::size_t(y) ? 1.0 : 0.0)) * inv_batch;
        }
    }
    out.loss = loss_sum * inv_batch;
    return out;
}

double total_loss(double sup, double distill, double lambda_f) {
    if (!std::isfinite(sup) || !std::isfinite(distill)) {
        throw numeric_fault("total_loss: non-finite component");
    }
    if (!(lambda_f >= 0.0)) {
        throw contract_error("total_loss: lambda_f must be non-negative");
    }
    return sup + lambda_f * distill;
}

}  // namespace fedmas
