#pragma once

#include <stdexcept>
#include <string>

namespace jrlab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or width disagreement between tensors, layers, or model/data.
struct DimensionError : Error {
    using Error::Error;
};

// Out-of-range class label or index.
struct IndexError : Error {
    using Error::Error;
};

// Trace does not belong to the model it is replayed against.
struct StateError : Error {
    using Error::Error;
};

// Invalid hyperparameter, key, or option value.
struct ConfigError : Error {
    using Error::Error;
};

// Dataset-level violation (class too small, count mismatch at use site).
struct DataError : Error {
    using Error::Error;
};

// Malformed file contents (IDX, checkpoint).
struct ParseError : Error {
    using Error::Error;
};

// Checkpoint/dataset incompatibility at load time.
struct LoadError : Error {
    using Error::Error;
};

// Collinear or zero direction vectors for a slice basis.
struct BasisError : Error {
    using Error::Error;
};

// Operation requires activations the model does not satisfy.
struct UnsupportedActivationError : Error {
    using Error::Error;
};

// Training aborted on a non-finite loss; carries the diagnostic state.
struct TrainDivergence : Error {
    std::size_t iteration;
    double loss;
    TrainDivergence(std::size_t iter, double loss_value, const std::string& msg)
        : Error(msg), iteration(iter), loss(loss_value) {}
};

}  // namespace jrlab
