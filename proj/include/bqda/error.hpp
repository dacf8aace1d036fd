#pragma once

#include <stdexcept>
#include <string>

namespace bqda {

// Base of every error the library raises. The derived categories map 1:1
// onto CLI exit codes (see cli/commands.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Usage or configuration problem (exit 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed data, cube files or synthesis specs (exit 2).
class DataError : public Error {
public:
    using Error::Error;
};

// Model fitting failed, e.g. a singular class covariance (exit 3).
class FitError : public Error {
public:
    using Error::Error;
};

// Prediction/evaluation failed, e.g. band-count mismatch (exit 4).
class EvalError : public Error {
public:
    using Error::Error;
};

// Vector/matrix sizes disagree.
class DimensionError : public EvalError {
public:
    using EvalError::EvalError;
};

// Matrix failed symmetric positive-definite validation.
class NotPositiveDefinite : public DataError {
public:
    using DataError::DataError;
};

}  // namespace bqda
