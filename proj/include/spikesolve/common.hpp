#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace spikesolve {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Error taxonomy. Every throwing operation in the library uses one of these;
// the CLI maps them onto exit codes (config=2, numerical=3, io=4).
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

struct DimensionMismatch : ConfigError {
  using ConfigError::ConfigError;
};
struct GridMismatch : ConfigError {
  using ConfigError::ConfigError;
};
struct PositionOutOfDomain : ConfigError {
  using ConfigError::ConfigError;
};
struct NonPositiveInput : ConfigError {
  using ConfigError::ConfigError;
};
struct EmptyMask : ConfigError {
  using ConfigError::ConfigError;
};
struct UnknownScenario : ConfigError {
  using ConfigError::ConfigError;
};
struct NonPositivePrediction : NumericalError {
  using NumericalError::NumericalError;
};
struct ZeroCertificate : NumericalError {
  using NumericalError::NumericalError;
};
struct EmptyComparison : ConfigError {
  using ConfigError::ConfigError;
};
struct NoMatches : ConfigError {
  using ConfigError::ConfigError;
};
struct MalformedHeader : IoError {
  using IoError::IoError;
};
struct ShapeMismatch : IoError {
  using IoError::IoError;
};

// ---------------------------------------------------------------------------
// Vec: a point or direction in the 1/2/3-d domain. Fixed capacity, value
// semantics; the runtime dim travels with the value.
// ---------------------------------------------------------------------------

struct Vec {
  int dim = 0;
  std::array<double, 3> c{0.0, 0.0, 0.0};

  Vec() = default;
  explicit Vec(double x) : dim(1), c{x, 0.0, 0.0} {}
  Vec(double x, double y) : dim(2), c{x, y, 0.0} {}
  Vec(double x, double y, double z) : dim(3), c{x, y, z} {}

  static Vec zero(int d) {
    Vec v;
    v.dim = d;
    return v;
  }

  double& operator[](int k) { return c[static_cast<std::size_t>(k)]; }
  double operator[](int k) const { return c[static_cast<std::size_t>(k)]; }

  Vec& operator+=(const Vec& o) {
    for (int k = 0; k < dim; ++k) c[k] += o.c[k];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int k = 0; k < dim; ++k) c[k] -= o.c[k];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int k = 0; k < dim; ++k) c[k] *= s;
    return *this;
  }

  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(double s, Vec a) { return a *= s; }

  friend bool operator==(const Vec& a, const Vec& b) {
    if (a.dim != b.dim) return false;
    for (int k = 0; k < a.dim; ++k)
      if (a.c[k] != b.c[k]) return false;
    return true;
  }

  double norm2() const {
    double s = 0.0;
    for (int k = 0; k < dim; ++k) s += c[k] * c[k];
    return s;
  }
  double norm() const { return std::sqrt(norm2()); }
};

inline double distance(const Vec& a, const Vec& b) {
  if (a.dim != b.dim) throw DimensionMismatch("distance: dim mismatch");
  return (a - b).norm();
}

}  // namespace spikesolve
