#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace truthsr {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using MatD = Mat<double>;
using VecF = Vec<float>;
using VecD = Vec<double>;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file contents (bad JSONL line, bad codec header, ...).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Violated data contract (empty dataset, unknown item, missing key, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Model-level failure (checkpoint mismatch, total conflict, divergence).
class ModelError : public Error {
 public:
  using Error::Error;
};

inline void check_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

inline void check_data(bool ok, const std::string& what) {
  if (!ok) throw DataError(what);
}

}  // namespace truthsr
