// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "fedmas/eval.hpp"
#include "fedmas/errors.hpp"
#include "test_support.hpp"

using namespace fedmas;

namespace {

// Model whose logits reproduce the input one-hot features: encoder and
// classifier are identity maps, so argmax(logits) == argmax(x).
ClientModel identity_model(std::size_t k) {
    const ModelSpec spec{k, k, k, 2};
    ClientModel m = ClientModel::shaped(spec);
    for (std::size_t i = 0; i < k; ++i) {
        m.encoder.layers[0].weight.at(i, i) = 1.0;
        m.classifier.layers[0].weight.at(i, i) = 1.0;
    }
    m.projector.layers[1].bias.at(0, 0) = 1.0;  // keep projections non-degenerate
    return m;
}

Dataset onehot_dataset(const std::vector<int>& labels, std::size_t k) {
    Tensor features(labels.size(), k);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        features.at(i, std::size_t(labels[i])) = 2.0;
    }
    return make_dataset(std::move(features), std::vector<int>(labels), k);
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("perfect classifier scores 1.0 everywhere") {
    const std::vector<int> labels{0, 0, 0, 0, 1, 1, 2, 2, 3};
    const Dataset test = onehot_dataset(labels, 4);
    const ShotGroups groups = shot_groups(test.class_counts, 3, 2);  // head {0}, tail {3}
    const MetricsReport m = evaluate(identity_model(4), test, groups);
    CHECK(m.overall_acc == doctest::Approx(1.0));
    CHECK(m.balanced_acc == doctest::Approx(1.0));
    REQUIRE(m.head_acc.has_value());
    REQUIRE(m.medium_acc.has_value());
    REQUIRE(m.tail_acc.has_value());
    CHECK(*m.head_acc == doctest::Approx(1.0));
    CHECK(*m.tail_acc == doctest::Approx(1.0));
    CHECK(m.all_avg == doctest::Approx(1.0));
}

TEST_CASE("constant predictor on a balanced two-class set is chance level") {
    const std::vector<int> labels{0, 0, 1, 1};
    const Dataset test = onehot_dataset(labels, 2);
    const ModelSpec spec{2, 2, 2, 2};
    ClientModel m = ClientModel::shaped(spec);
    m.encoder.layers[0].weight.at(0, 0) = 1.0;
    m.encoder.layers[0].weight.at(1, 1) = 1.0;
    m.classifier.layers[0].bias.at(0, 0) = 1.0;  // always predicts class 0
    const ShotGroups groups = shot_groups(test.class_counts, 3, 1);
    const MetricsReport rep = evaluate(m, test, groups);
    CHECK(rep.balanced_acc == doctest::Approx(0.5));
    CHECK(rep.overall_acc == doctest::Approx(0.5));
}

TEST_CASE("per-class accuracy equals the confusion-matrix diagonal over row sums") {
    std::mt19937_64 rng(41);
    const std::size_t k = 5;
    const ModelSpec spec{3, 6, k, 2};
    const ClientModel model = ClientModel::init(spec, 99);
    Tensor features = testsupport::random_tensor(60, 3, rng);
    std::vector<int> labels(60);
    std::uniform_int_distribution<int> dist(0, int(k) - 1);
    for (int& y : labels) y = dist(rng);
    const Dataset test = make_dataset(std::move(features), std::move(labels), k);
    const ShotGroups groups = shot_groups(test.class_counts, 100, 1);

    const MetricsReport rep = evaluate(model, test, groups);

    // Independent confusion-matrix accounting.
    std::vector<std::vector<std::size_t>> confusion(k, std::vector<std::size_t>(k, 0));
    const Tensor logits =
        forward(model.classifier, forward(model.encoder, test.features).output).output;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        std::size_t arg = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (logits.at(i, j) > logits.at(i, arg)) arg = j;
        }
        ++confusion[std::size_t(test.labels[i])][arg];
    }
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t row_sum = 0;
        for (std::size_t j = 0; j < k; ++j) row_sum += confusion[c][j];
        if (row_sum == 0) {
            CHECK(!rep.per_class_defined[c]);
            continue;
        }
        CHECK(rep.per_class_acc[c] ==
              doctest::Approx(double(confusion[c][c]) / double(row_sum)).epsilon(1e-12));
    }
}

TEST_CASE("balanced accuracy is invariant to class relabeling") {
    const std::vector<int> labels{0, 0, 0, 1, 1, 2};
    const Dataset test = onehot_dataset(labels, 3);
    const ShotGroups groups = shot_groups(test.class_counts, 10, 1);

    ClientModel model = identity_model(3);
    model.classifier.layers[0].weight.at(0, 0) = 0.0;  // class 0 firmly predicts class 1
    model.classifier.layers[0].weight.at(0, 1) = 2.0;
    const MetricsReport base = evaluate(model, test, groups);

    // Swap classes 0 and 2 in both the data and the classifier columns.
    std::vector<int> permuted_labels;
    for (int y : labels) permuted_labels.push_back(y == 0 ? 2 : (y == 2 ? 0 : y));
    Dataset permuted_test = onehot_dataset(permuted_labels, 3);
    ClientModel permuted_model = identity_model(3);
    permuted_model.classifier.layers[0].weight.at(2, 2) = 0.0;
    permuted_model.classifier.layers[0].weight.at(2, 1) = 2.0;
    const MetricsReport perm =
        evaluate(permuted_model, permuted_test, shot_groups(permuted_test.class_counts, 10, 1));

    CHECK(base.balanced_acc == doctest::Approx(perm.balanced_acc).epsilon(1e-12));
}

TEST_CASE("balanced equals overall on a class-balanced test set") {
    std::mt19937_64 rng(43);
    const std::size_t k = 4;
    std::vector<int> labels;
    for (std::size_t c = 0; c < k; ++c) {
        for (int i = 0; i < 12; ++i) labels.push_back(int(c));
    }
    Tensor features = testsupport::random_tensor(labels.size(), 3, rng);
    const Dataset test = make_dataset(std::move(features), std::move(labels), k);
    const ModelSpec spec{3, 5, k, 2};
    const MetricsReport rep = evaluate(ClientModel::init(spec, 7), test,
                                       shot_groups(test.class_counts, 100, 1));
    CHECK(rep.balanced_acc == doctest::Approx(rep.overall_acc).epsilon(1e-12));
}

TEST_CASE("classes without test samples are excluded and flagged") {
    const std::vector<int> labels{0, 0, 1};
    Tensor features(3, 4);
    features.at(0, 0) = 2.0;
    features.at(1, 0) = 2.0;
    features.at(2, 1) = 2.0;
    const Dataset test = make_dataset(std::move(features), std::vector<int>(labels), 4);
    const MetricsReport rep =
        evaluate(identity_model(4), test, shot_groups(test.class_counts, 10, 1));
    CHECK(rep.excluded_classes == std::vector<std::size_t>{2, 3});
    CHECK(!rep.per_class_defined[2]);
    CHECK(rep.balanced_acc == doctest::Approx(1.0));  // mean over classes 0 and 1 only
}

TEST_CASE("least_squares_slope: sign and edge cases") {
    const std::vector<double> decreasing{5.0, 4.0, 2.5, 1.0};
    auto slope = least_squares_slope(decreasing);
    REQUIRE(slope.has_value());
    CHECK(*slope < 0.0);

    const std::vector<double> rising{0.0, 1.0, 2.0};
    CHECK(*least_squares_slope(rising) == doctest::Approx(1.0));

    CHECK(!least_squares_slope(std::vector<double>{1.0}).has_value());
}

TEST_CASE("empty test set is rejected") {
    Tensor features(0, 4);
    const Dataset empty = make_dataset(std::move(features), {}, 4);
    CHECK_THROWS_AS(
        evaluate(identity_model(4), empty, shot_groups(empty.class_counts, 10, 1)),
        config_error);
}

}  // TEST_SUITE
