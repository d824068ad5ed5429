// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "fedmas/client.hpp"
#include "fedmas/data.hpp"

namespace fedmas {

struct MetricsReport {
    double overall_acc = 0.0;
    double balanced_acc = 0.0;                // mean per-class acc over testable classes
    std::vector<double> per_class_acc;        // meaningful only where defined
    std::vector<bool> per_class_defined;      // class has >= 1 test sample
    std::vector<std::size_t> excluded_classes;
    std::optional<double> head_acc;           // mean per-class acc within the group
    std::optional<double> medium_acc;
    std::optional<double> tail_acc;
    double all_avg = 0.0;                     // mean of the defined group accuracies
};

// Argmax of raw classifier logits; no training-time count shift at inference.
MetricsReport evaluate(const ClientModel& model, const Dataset& test, const ShotGroups& groups);

// Least-squares slope of y against 0..n-1; needs at least two points.
std::optional<double> least_squares_slope(std::span<const double> y);

}  // namespace fedmas
