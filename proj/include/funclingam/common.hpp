#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace funclingam {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class of every exception thrown by this library. Callers that need to
/// distinguish failure classes (e.g. to choose a process exit code) can catch
/// the subclasses below instead of matching message strings.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// An argument lies outside an operation's documented domain.
class invalid_argument_error : public error {
 public:
  using error::error;
};

/// Input data is malformed, inconsistent, or contains non-finite values.
class data_error : public error {
 public:
  using error::error;
};

/// A matrix or linear system is singular where invertibility is required.
class singularity_error : public error {
 public:
  using error::error;
};

/// Too few samples (or too low a sample-to-dimension ratio) for the request.
class insufficient_data_error : public error {
 public:
  using error::error;
};

/// Data is degenerate (constant, zero-variance, ...) where variation is needed.
class degenerate_data_error : public error {
 public:
  using error::error;
};

/// A numerical routine failed to produce a usable result.
class numeric_error : public error {
 public:
  using error::error;
};

/// Reading or writing a file failed.
class io_error : public error {
 public:
  using error::error;
};

inline void require_arg(bool condition, const std::string& message) {
  if (!condition) throw invalid_argument_error(message);
}

inline void require_finite(const Matrix& m, const std::string& context) {
  if (!m.allFinite()) throw data_error(context + ": non-finite values");
}

/// Exact symmetrization: 0.5*(a + a^T) is bitwise symmetric because IEEE
/// addition is commutative and scaling by 0.5 is exact.
inline Matrix symmetrized(const Matrix& a) {
  Matrix at = a.transpose();
  return 0.5 * (a + at);
}

}  // namespace funclingam
