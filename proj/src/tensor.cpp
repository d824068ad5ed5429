// SPDX-License-Identifier: Apache-2.0
#include "fedmas/tensor.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "fedmas/errors.hpp"

namespace fedmas {

Tensor::Tensor(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) {
        throw contract_error("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
}

bool all_finite(const Tensor& t) {
    for (double v : t.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void require_finite(const Tensor& t, const char* what) {
    if (!all_finite(t)) {
        throw numeric_fault(std::string("non-finite values in ") + what);
    }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw contract_error(std::string(op) + ": shape mismatch " + std::to_string(a.rows) + "x" +
                             std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                             std::to_string(b.cols));
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols != b.rows) {
        throw contract_error("matmul: inner dimensions " + std::to_string(a.cols) + " vs " +
                             std::to_string(b.rows));
    }
    Tensor out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            for (std::size_t j = 0; j < b.cols; ++j) {
                out.at(i, j) += aik * b.at(k, j);
            }
        }
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols != b.cols) {
        throw contract_error("matmul_nt: inner dimensions " + std::to_string(a.cols) + " vs " +
                             std::to_string(b.cols));
    }
    Tensor out(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) {
                s += a.at(i, k) * b.at(j, k);
            }
            out.at(i, j) = s;
        }
    }
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.rows != b.rows) {
        throw contract_error("matmul_tn: inner dimensions " + std::to_string(a.rows) + " vs " +
                             std::to_string(b.rows));
    }
    Tensor out(a.cols, b.cols);
    for (std::size_t i = 0; i < a.cols; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.rows; ++k) {
                s += a.at(k, i) * b.at(k, j);
            }
            out.at(i, j) = s;
        }
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

void add_in_place(Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add_in_place");
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

Tensor add_row_broadcast(const Tensor& a, const Tensor& row) {
    if (row.rows != 1 || row.cols != a.cols) {
        throw contract_error("add_row_broadcast: row must be 1x" + std::to_string(a.cols));
    }
    Tensor out = a;
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) {
            out.at(i, j) += row.at(0, j);
        }
    }
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (double& v : out.data) v *= s;
    return out;
}

Tensor gather_rows(const Tensor& src, std::span<const std::size_t> idx) {
    Tensor out(idx.size(), src.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= src.rows) {
            throw contract_error("gather_rows: index " + std::to_string(idx[i]) + " out of range");
        }
        auto r = src.row(idx[i]);
        std::copy(r.begin(), r.end(), out.row(i).begin());
    }
    return out;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

Tensor l2_normalize(const Tensor& v) {
    if (v.rows != 1) {
        throw contract_error("l2_normalize expects a single row vector");
    }
    return l2_normalize_rows(v);
}

Tensor l2_normalize_rows(const Tensor& m) {
    Tensor out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double n = l2_norm(m.row(i));
        if (!(n > kNormEpsilon)) {
            throw degenerate_embedding_error("row " + std::to_string(i) +
                                             " has near-zero norm, cannot normalize");
        }
        for (std::size_t j = 0; j < m.cols; ++j) {
            out.at(i, j) = m.at(i, j) / n;
        }
    }
    return out;
}

Tensor l2_normalize_rows_backward(const Tensor& raw, const Tensor& grad_normalized) {
    require_same_shape(raw, grad_normalized, "l2_normalize_rows_backward");
    Tensor out(raw.rows, raw.cols);
    for (std::size_t i = 0; i < raw.rows; ++i) {
        const double n = l2_norm(raw.row(i));
        if (!(n > kNormEpsilon)) {
            throw degenerate_embedding_error("row " + std::to_string(i) +
                                             " has near-zero norm, cannot normalize");
        }
        // d/dv (v/|v|) applied to g: (g - y (y.g)) / |v| with y = v/|v|.
        double dot = 0.0;
        for (std::size_t j = 0; j < raw.cols; ++j) {
            dot += (raw.at(i, j) / n) * grad_normalized.at(i, j);
        }
        for (std::size_t j = 0; j < raw.cols; ++j) {
            const double y = raw.at(i, j) / n;
            out.at(i, j) = (grad_normalized.at(i, j) - y * dot) / n;
        }
    }
    return out;
}

}  // namespace fedmas
