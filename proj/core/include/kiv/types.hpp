#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace kiv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error taxonomy shared by every module. All throwing paths use one of
// these so callers can tell bad shapes from numerical breakdown.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

class FactorizationFailure : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

// Throws NonFinite if any entry of m is NaN or infinite.
void ensure_finite(const Eigen::Ref<const Matrix>& m, const char* name);
void ensure_finite(double x, const char* name);

}  // namespace kiv
