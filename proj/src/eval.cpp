// SPDX-License-Identifier: Apache-2.0
#include "fedmas/eval.hpp"

#include <string>

#include "fedmas/errors.hpp"

namespace fedmas {

namespace {

std::optional<double> group_mean(const std::vector<std::size_t>& group,
                                 const std::vector<double>& per_class,
                                 const std::vector<bool>& defined) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k : group) {
        if (defined[k]) {
            sum += per_class[k];
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / double(n);
}

}  // namespace

MetricsReport evaluate(const ClientModel& model, const Dataset& test, const ShotGroups& groups) {
    if (test.size() == 0) {
        throw config_error("evaluate: empty test set");
    }
    const Tensor hidden = forward(model.encoder, test.features).output;
    const Tensor logits = forward(model.classifier, hidden).output;

    const std::size_t k_total = test.num_classes;
    std::vector<std::size_t> correct(k_total, 0);
    std::size_t correct_total = 0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        std::size_t pred = 0;
        for (std::size_t k = 1; k < logits.cols; ++k) {
            if (logits.at(i, k) > logits.at(i, pred)) pred = k;  // ties keep the lower index
        }
        if (pred == std::size_t(test.labels[i])) {
            ++correct[pred];
            ++correct_total;
        }
    }

    MetricsReport rep;
    rep.per_class_acc.assign(k_total, 0.0);
    rep.per_class_defined.assign(k_total, false);
    double balanced_sum = 0.0;
    std::size_t balanced_n = 0;
    for (std::size_t k = 0; k < k_total; ++k) {
        if (test.class_counts[k] > 0) {
            rep.per_class_defined[k] = true;
            rep.per_class_acc[k] = double(correct[k]) / double(test.class_counts[k]);
            balanced_sum += rep.per_class_acc[k];
            ++balanced_n;
        } else {
            rep.excluded_classes.push_back(k);
        }
    }
    rep.overall_acc = double(correct_total) / double(test.size());
    rep.balanced_acc = balanced_sum / double(balanced_n);

    rep.head_acc = group_mean(groups.head, rep.per_class_acc, rep.per_class_defined);
    rep.medium_acc = group_mean(groups.medium, rep.per_class_acc, rep.per_class_defined);
    rep.tail_acc = group_mean(groups.tail, rep.per_class_acc, rep.per_class_defined);

    double all_sum = 0.0;
    std::size_t all_n = 0;
    for (const auto& g : {rep.head_acc, rep.medium_acc, rep.tail_acc}) {
        if (g) {
            all_sum += *g;
            ++all_n;
        }
    }
    rep.all_avg = all_n > 0 ? all_sum / double(all_n) : 0.0;
    return rep;
}

std::optional<double> least_squares_slope(std::span<const double> y) {
    const std::size_t n = y.size();
    if (n < 2) return std::nullopt;
    const double x_mean = double(n - 1) / 2.0;
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= double(n);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = double(i) - x_mean;
        num += dx * (y[i] - y_mean);
        den += dx * dx;
    }
    return num / den;
}

}  // namespace fedmas
