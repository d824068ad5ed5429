// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedmas {

// Dense row-major matrix of doubles. A batch stores one sample per row.
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows * cols entries, row-major

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Tensor(std::size_t r, std::size_t c, std::vector<double> values);

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

bool all_finite(const Tensor& t);
void require_finite(const Tensor& t, const char* what);

Tensor matmul(const Tensor& a, const Tensor& b);     // (m x k) * (k x n)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T * b
Tensor add(const Tensor& a, const Tensor& b);
void add_in_place(Tensor& a, const Tensor& b);
Tensor add_row_broadcast(const Tensor& a, const Tensor& row);  // row is 1 x cols
Tensor scale(const Tensor& a, double s);
Tensor gather_rows(const Tensor& src, std::span<const std::size_t> idx);

inline constexpr double kNormEpsilon = 1e-12;

double l2_norm(std::span<const double> v);

// Maps a row vector onto the unit sphere; rejects near-zero norms.
Tensor l2_normalize(const Tensor& v);

// Row-wise normalization for a batch.
Tensor l2_normalize_rows(const Tensor& m);

// Pulls a gradient w.r.t. normalized rows back to the raw (pre-normalization)
// rows through the full Jacobian (I - y y^T) / |v|.
Tensor l2_normalize_rows_backward(const Tensor& raw, const Tensor& grad_normalized);

}  // namespace fedmas
