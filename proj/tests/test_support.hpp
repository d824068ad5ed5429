// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fedmas/nn.hpp"
#include "fedmas/tensor.hpp"

namespace testsupport {

// Central finite differences of a scalar function over a flat parameter
// vector, at the given coordinates.
inline std::vector<double> finite_difference(
    const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& theta,
    const std::vector<std::size_t>& coords, double h = 1e-5) {
    std::vector<double> grads(coords.size());
    std::vector<double> probe = theta;
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const std::size_t j = coords[i];
        const double orig = probe[j];
        probe[j] = orig + h;
        const double fp = f(probe);
        probe[j] = orig - h;
        const double fm = f(probe);
        probe[j] = orig;
        grads[i] = (fp - fm) / (2.0 * h);
    }
    return grads;
}

// Relative error with a floor so near-zero gradients compare absolutely.
inline double gradient_rel_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

inline std::vector<std::size_t> sample_coords(std::size_t dim, std::size_t count,
                                              std::mt19937_64& rng) {
    std::vector<std::size_t> all(dim);
    for (std::size_t i = 0; i < dim; ++i) all[i] = i;
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min(count, dim));
    return all;
}

inline fedmas::Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                    double scale = 1.0) {
    fedmas::Tensor t(rows, cols);
    std::normal_distribution<double> dist(0.0, scale);
    for (double& v : t.data) v = dist(rng);
    return t;
}

inline fedmas::Tensor random_unit_rows(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    return fedmas::l2_normalize_rows(random_tensor(rows, cols, rng));
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    auto ranks = [n](const std::vector<double>& xs) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
            const double avg = (double(i) + double(j)) / 2.0 + 1.0;
            for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> ra = ranks(a);
    const std::vector<double> rb = ranks(b);
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= double(n);
    mb /= double(n);
    double num = 0.0;
    double va = 0.0;
    double vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(va * vb);
}

}  // namespace testsupport
