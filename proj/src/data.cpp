// SPDX-License-Identifier: Apache-2.0
#include "fedmas/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "fedmas/errors.hpp"

namespace fedmas {

namespace {

// Geometry of the synthetic classes. Class means are mutually orthogonal
// directions of fixed length under a seeded random rotation, so every pair
// of classes is equally far apart and class difficulty differs only through
// sample counts. When there are more classes than feature dimensions the
// directions cycle with flipped sign.
constexpr double kClassMeanRadius = 1.7;
constexpr double kClassNoiseSigma = 0.85;

constexpr std::uint32_t kDatasetVersion = 1;
constexpr char kDatasetMagic[4] = {'F', 'M', 'A', 'S'};

std::vector<std::size_t> recount(const std::vector<int>& labels, std::size_t num_classes) {
    std::vector<std::size_t> counts(num_classes, 0);
    for (int y : labels) {
        if (y < 0 || std::size_t(y) >= num_classes) {
            throw data_error("label " + std::to_string(y) + " outside [0, " +
                             std::to_string(num_classes) + ")");
        }
        ++counts[std::size_t(y)];
    }
    return counts;
}

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& ds) {
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        by_class[std::size_t(ds.labels[i])].push_back(i);
    }
    return by_class;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
    std::vector<int> labels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = ds.labels[idx[i]];
    return make_dataset(gather_rows(ds.features, idx), std::move(labels), ds.num_classes);
}

}  // namespace

Dataset make_dataset(Tensor features, std::vector<int> labels, std::size_t num_classes) {
    if (features.rows != labels.size()) {
        throw data_error("feature rows " + std::to_string(features.rows) + " vs labels " +
                         std::to_string(labels.size()));
    }
    if (num_classes == 0) {
        throw config_error("dataset needs at least one class");
    }
    Dataset ds;
    ds.class_counts = recount(labels, num_classes);
    ds.features = std::move(features);
    ds.labels = std::move(labels);
    ds.num_classes = num_classes;
    return ds;
}

Dataset gen_longtail(std::size_t num_classes, std::size_t n_max, double imbalance_ratio,
                     std::size_t feature_dim, std::uint64_t seed) {
    if (num_classes < 2) throw config_error("gen_longtail: need at least 2 classes");
    if (n_max < num_classes) throw config_error("gen_longtail: n_max must be >= num_classes");
    if (!(imbalance_ratio >= 1.0)) throw config_error("gen_longtail: imbalance_ratio must be >= 1");
    if (feature_dim == 0) throw config_error("gen_longtail: feature_dim must be positive");

    std::vector<std::size_t> counts(num_classes);
    std::size_t total = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        const double decay = std::pow(imbalance_ratio, -double(k) / double(num_classes - 1));
        counts[k] = std::size_t(std::ceil(double(n_max) * decay));
        if (counts[k] == 0) {
            throw config_error("gen_longtail: class " + std::to_string(k) + " rounds to 0 samples");
        }
        total += counts[k];
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    // Gram-Schmidt over seeded Gaussian draws: an orthonormal direction per
    // class (sign-flipped reuse once directions run out).
    const std::size_t distinct = std::min(num_classes, feature_dim);
    Tensor basis(distinct, feature_dim);
    for (std::size_t k = 0; k < distinct; ++k) {
        for (std::size_t d = 0; d < feature_dim; ++d) basis.at(k, d) = unit(rng);
        for (std::size_t j = 0; j < k; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < feature_dim; ++d) dot += basis.at(k, d) * basis.at(j, d);
            for (std::size_t d = 0; d < feature_dim; ++d) basis.at(k, d) -= dot * basis.at(j, d);
        }
        const double n = l2_norm(basis.row(k));
        if (!(n > 1e-9)) {
            throw config_error("gen_longtail: degenerate class direction draw");
        }
        for (std::size_t d = 0; d < feature_dim; ++d) basis.at(k, d) /= n;
    }
    Tensor means(num_classes, feature_dim);
    for (std::size_t k = 0; k < num_classes; ++k) {
        const double sign = (k / distinct) % 2 == 0 ? 1.0 : -1.0;
        for (std::size_t d = 0; d < feature_dim; ++d) {
            means.at(k, d) = sign * kClassMeanRadius * basis.at(k % distinct, d);
        }
    }

    Tensor features(total, feature_dim);
    std::vector<int> labels(total);
    std::size_t row = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        for (std::size_t i = 0; i < counts[k]; ++i, ++row) {
            for (std::size_t d = 0; d < feature_dim; ++d) {
                features.at(row, d) = means.at(k, d) + kClassNoiseSigma * unit(rng);
            }
            labels[row] = int(k);
        }
    }
    return make_dataset(std::move(features), std::move(labels), num_classes);
}

TrainTestSplit split_train_test(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0) || !(test_fraction < 1.0)) {
        throw config_error("split_train_test: fraction must be in [0, 1)");
    }
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (auto& cls : indices_by_class(ds)) {
        std::shuffle(cls.begin(), cls.end(), rng);
        const auto n_test = std::size_t(std::floor(test_fraction * double(cls.size()) + 1e-9));
        test_idx.insert(test_idx.end(), cls.begin(), cls.begin() + n_test);
        train_idx.insert(train_idx.end(), cls.begin() + n_test, cls.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    if (train_idx.empty()) {
        throw config_error("split_train_test: empty training set");
    }
    return {subset(ds, train_idx), subset(ds, test_idx)};
}

void check_partition(const Partition& p, std::size_t dataset_size) {
    std::vector<std::size_t> all;
    for (std::size_t c = 0; c < p.assignments.size(); ++c) {
        if (p.assignments[c].empty()) {
            throw config_error("partition leaves client " + std::to_string(c) + " empty");
        }
        all.insert(all.end(), p.assignments[c].begin(), p.assignments[c].end());
    }
    std::sort(all.begin(), all.end());
    if (all.size() != dataset_size) {
        throw data_error("partition covers " + std::to_string(all.size()) + " of " +
                         std::to_string(dataset_size) + " samples");
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (all[i] != i) {
            throw data_error("partition is not a disjoint cover of 0.." +
                             std::to_string(dataset_size - 1));
        }
    }
}

namespace {

// Split `count` items into integer shares closest to the given proportions.
std::vector<std::size_t> largest_remainder(const std::vector<double>& proportions,
                                           std::size_t count) {
    const std::size_t n = proportions.size();
    std::vector<std::size_t> shares(n);
    std::vector<std::pair<double, std::size_t>> fractional(n);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double target = proportions[i] * double(count);
        shares[i] = std::size_t(std::floor(target));
        fractional[i] = {target - std::floor(target), i};
        assigned += shares[i];
    }
    std::sort(fractional.begin(), fractional.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; assigned < count; ++i, ++assigned) {
        ++shares[fractional[i % n].second];
    }
    return shares;
}

Partition finalize_partition(std::vector<std::vector<std::size_t>> assignments,
                             std::size_t dataset_size) {
    for (auto& a : assignments) std::sort(a.begin(), a.end());
    Partition p{std::move(assignments)};
    check_partition(p, dataset_size);
    return p;
}

}  // namespace

Partition dirichlet_partition(const Dataset& ds, std::size_t num_clients, double alpha,
                              std::uint64_t seed) {
    if (num_clients == 0) throw config_error("dirichlet_partition: need at least one client");
    if (!(alpha > 0.0)) throw config_error("dirichlet_partition: alpha must be positive");
    if (ds.size() < num_clients) {
        throw config_error("dirichlet_partition: dataset too small for " +
                           std::to_string(num_clients) + " nonempty clients");
    }
    if (num_clients == 1) {
        std::vector<std::size_t> all(ds.size());
        std::iota(all.begin(), all.end(), 0);
        return finalize_partition({std::move(all)}, ds.size());
    }

    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gamma(alpha, 1.0);
    const auto by_class = indices_by_class(ds);

    constexpr int kMaxAttempts = 1000;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::vector<std::vector<std::size_t>> assignments(num_clients);
        for (const auto& cls : by_class) {
            if (cls.empty()) continue;
            std::vector<std::size_t> shuffled = cls;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);

            std::vector<double> p(num_clients);
            double sum = 0.0;
            for (double& v : p) {
                v = gamma(rng);
                sum += v;
            }
            if (!(sum > 0.0)) continue;  // all-zero gamma draw, redraw the class
            for (double& v : p) v /= sum;

            const auto shares = largest_remainder(p, shuffled.size());
            std::size_t off = 0;
            for (std::size_t c = 0; c < num_clients; ++c) {
                assignments[c].insert(assignments[c].end(), shuffled.begin() + off,
                                      shuffled.begin() + off + shares[c]);
                off += shares[c];
            }
        }
        const bool any_empty = std::any_of(assignments.begin(), assignments.end(),
                                           [](const auto& a) { return a.empty(); });
        if (!any_empty) {
            return finalize_partition(std::move(assignments), ds.size());
        }
    }
    throw config_error("dirichlet_partition: could not produce nonempty clients after " +
                       std::to_string(kMaxAttempts) + " attempts");
}

Partition iid_partition(const Dataset& ds, std::size_t num_clients, std::uint64_t seed) {
    if (num_clients == 0) throw config_error("iid_partition: need at least one client");
    if (ds.size() < num_clients) {
        throw config_error("iid_partition: dataset too small for " + std::to_string(num_clients) +
                           " nonempty clients");
    }
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> assignments(num_clients);
    std::size_t class_index = 0;
    for (auto& cls : indices_by_class(ds)) {
        std::shuffle(cls.begin(), cls.end(), rng);
        const std::size_t start = class_index % num_clients;
        for (std::size_t i = 0; i < cls.size(); ++i) {
            assignments[(start + i) % num_clients].push_back(cls[i]);
        }
        ++class_index;
    }
    for (std::size_t c = 0; c < num_clients; ++c) {
        if (assignments[c].empty()) {
            throw config_error("iid_partition: client " + std::to_string(c) +
                               " would be empty; dataset too small");
        }
    }
    return finalize_partition(std::move(assignments), ds.size());
}

ShotGroups shot_groups(std::span<const std::size_t> class_counts, std::size_t hi, std::size_t lo) {
    if (!(lo < hi)) {
        throw config_error("shot_groups: require lo < hi");
    }
    ShotGroups g;
    g.hi = hi;
    g.lo = lo;
    for (std::size_t k = 0; k < class_counts.size(); ++k) {
        if (class_counts[k] > hi) {
            g.head.push_back(k);
        } else if (class_counts[k] < lo) {
            g.tail.push_back(k);
        } else {
            g.medium.push_back(k);  // boundary counts land here
        }
    }
    return g;
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw io_error(std::string("dataset file truncated while reading ") + what);
    return v;
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out.write(kDatasetMagic, 4);
    write_raw(out, kDatasetVersion);
    write_raw(out, std::uint64_t(ds.size()));
    write_raw(out, std::uint32_t(ds.feature_dim()));
    write_raw(out, std::uint32_t(ds.num_classes));
    out.write(reinterpret_cast<const char*>(ds.features.data.data()),
              std::streamsize(ds.features.data.size() * sizeof(double)));
    for (int y : ds.labels) {
        write_raw(out, std::uint32_t(y));
    }
    if (!out) throw io_error("failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kDatasetMagic, 4) != 0) {
        throw io_error("not a dataset file: " + path.string());
    }
    const auto version = read_raw<std::uint32_t>(in, "version");
    if (version != kDatasetVersion) {
        throw io_error("unsupported dataset file version " + std::to_string(version));
    }
    const auto n = read_raw<std::uint64_t>(in, "sample count");
    const auto dim = read_raw<std::uint32_t>(in, "feature dim");
    const auto k = read_raw<std::uint32_t>(in, "class count");
    if (n == 0 || dim == 0 || k == 0) {
        throw io_error("dataset file declares an empty dataset: " + path.string());
    }
    Tensor features{std::size_t(n), std::size_t(dim)};
    in.read(reinterpret_cast<char*>(features.data.data()),
            std::streamsize(features.data.size() * sizeof(double)));
    if (!in) throw io_error("dataset file truncated while reading features");
    std::vector<int> labels(std::size_t(n), 0);
    for (auto& y : labels) {
        y = int(read_raw<std::uint32_t>(in, "labels"));
    }
    return make_dataset(std::move(features), std::move(labels), std::size_t(k));
}

}  // namespace fedmas
