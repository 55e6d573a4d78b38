#pragma once

#include <stdexcept>
#include <string>

namespace stlf {

/// Invalid user input or data (bad config, corrupt file, unmet precondition
/// on the data). Maps to CLI exit code 2.
class DataError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Programming or internal failure: shape mismatches inside a model, broken
/// invariants. Maps to CLI exit code 1.
class InternalError : public std::logic_error {
public:
	using std::logic_error::logic_error;
};

/// Shape mismatch between operands.
class ShapeError : public InternalError {
public:
	using InternalError::InternalError;
};

/// A run that could not produce results, e.g. every trial diverged. Maps to
/// CLI exit code 1.
class RunError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

} // namespace stlf
