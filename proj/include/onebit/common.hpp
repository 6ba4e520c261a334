#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace onebit {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using BitVec = std::vector<std::uint8_t>;
using Rng = std::mt19937_64;

// LLR magnitude cap shared by the soft detectors and the SPA decoder input.
inline constexpr double kLlrClamp = 60.0;

struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DegenerateCovarianceError : std::domain_error {
  using std::domain_error::domain_error;
};
struct InvalidCovarianceError : std::domain_error {
  using std::domain_error::domain_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent substream seed for (base, point, trial); worker-count agnostic.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t point,
                                 std::uint64_t trial) {
  return splitmix64(splitmix64(base ^ (point + 1) * 0x9e3779b97f4a7c15ULL) ^
                    (trial + 1) * 0xc2b2ae3d27d4eb4fULL);
}

inline void hermitianize(CMat& x) { x = ((x + x.adjoint()) / 2.0).eval(); }

// i.i.d. CN(0, variance) samples.
inline CVec complex_gaussian(Eigen::Index n, double variance, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance / 2.0));
  CVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    v[i] = cplx(re, im);
  }
  return v;
}

inline CMat complex_gaussian(Eigen::Index rows, Eigen::Index cols,
                             double variance, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance / 2.0));
  CMat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      m(i, j) = cplx(re, im);
    }
  }
  return m;
}

}  // namespace onebit
