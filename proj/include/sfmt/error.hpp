#pragma once

#include <stdexcept>
#include <string>

namespace sfmt {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/extent disagreement between operands.
struct DimError : Error {
    using Error::Error;
};

// NaN/Inf where finite values are required.
struct NumericError : Error {
    using Error::Error;
};

// Out-of-range index (token id, class index, ...).
struct IndexError : Error {
    using Error::Error;
};

// API misuse: double backward, double merge, missing grad at step time.
struct StateError : Error {
    using Error::Error;
};

// Malformed or mismatched on-disk data (WAV, feature file, checkpoint).
struct FormatError : Error {
    using Error::Error;
};

// Invalid configuration or spec (counts, plans, hyperparameters).
struct ConfigError : Error {
    using Error::Error;
};

// Training-time failure (divergence, empty split).
struct TrainError : Error {
    using Error::Error;
};

// Metric preconditions violated (constant vector for PCC, empty set).
struct MetricError : Error {
    using Error::Error;
};

}  // namespace sfmt
