// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace fedmas {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid experiment setup: bad dimensions, bad hyperparameters, impossible splits.
struct config_error : error {
    using error::error;
};

// A caller violated an API contract (shape mismatch, unnormalized input, ...).
struct contract_error : error {
    using error::error;
};

// NaN/Inf appeared where the pipeline requires finite values.
struct numeric_fault : error {
    using error::error;
};

// Labels/counts disagree with the data they describe.
struct data_error : error {
    using error::error;
};

// Unreadable or malformed binary artifact files.
struct io_error : error {
    using error::error;
};

// A vector with (near-)zero norm cannot be mapped to the unit sphere.
struct degenerate_embedding_error : error {
    using error::error;
};

// All rescue factors are zero; normalized aggregation weights are undefined.
struct degenerate_weights_error : error {
    using error::error;
};

}  // namespace fedmas
