#include "onebit/quantize.hpp"

#include <cmath>

namespace onebit {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kClampTol = 1e-9;  // arcsine argument round-off allowance

inline double sgn_pos(double x) { return x < 0.0 ? -1.0 : 1.0; }

void require_finite(const CMat& v, const char* what) {
  if (!v.allFinite()) {
    throw InvalidInputError(std::string(what) + ": non-finite input");
  }
}

// Clamp a correlation entry to [-1, 1]; excess beyond kClampTol means the
// input was not a valid covariance.
inline double clamp_corr(double x, const char* what) {
  if (x > 1.0) {
    if (x > 1.0 + kClampTol) {
      throw InvalidCovarianceError(std::string(what) +
                                   ": normalized entry exceeds 1");
    }
    return 1.0;
  }
  if (x < -1.0) {
    if (x < -1.0 - kClampTol) {
      throw InvalidCovarianceError(std::string(what) +
                                   ": normalized entry below -1");
    }
    return -1.0;
  }
  return x;
}

}  // namespace

CVec quantize_1bit(const CVec& v) {
  require_finite(v, "quantize_1bit");
  CVec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out[i] = cplx(kInvSqrt2 * sgn_pos(v[i].real()),
                  kInvSqrt2 * sgn_pos(v[i].imag()));
  }
  return out;
}

CMat quantize_1bit(const CMat& v) {
  require_finite(v, "quantize_1bit");
  CMat out(v.rows(), v.cols());
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      out(i, j) = cplx(kInvSqrt2 * sgn_pos(v(i, j).real()),
                       kInvSqrt2 * sgn_pos(v(i, j).imag()));
    }
  }
  return out;
}

CMat arcsine_covariance(const CMat& c_s) {
  const Eigen::Index m = c_s.rows();
  if (c_s.cols() != m) {
    throw DimensionError("arcsine_covariance: matrix not square");
  }
  require_finite(c_s, "arcsine_covariance");
  RVec k(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = c_s(i, i).real();
    if (!(d > 0.0)) {
      throw DegenerateCovarianceError(
          "arcsine_covariance: non-positive diagonal entry");
    }
    k[i] = 1.0 / std::sqrt(d);
  }
  constexpr double two_over_pi = 2.0 / M_PI;
  CMat out(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double s = k[i] * k[j];
      const double re = clamp_corr(s * c_s(i, j).real(), "arcsine_covariance");
      const double im = clamp_corr(s * c_s(i, j).imag(), "arcsine_covariance");
      out(i, j) = cplx(two_over_pi * std::asin(re), two_over_pi * std::asin(im));
    }
  }
  hermitianize(out);
  out.diagonal().setOnes();  // unit diagonal is exact for a 1-bit output
  return out;
}

RVec bussgang_operator(const CMat& c_y) {
  const Eigen::Index m = c_y.rows();
  if (c_y.cols() != m) {
    throw DimensionError("bussgang_operator: matrix not square");
  }
  const double scale = std::sqrt(2.0 / M_PI);
  RVec a(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = c_y(i, i).real();
    if (!(d > 0.0)) {
      throw DegenerateCovarianceError(
          "bussgang_operator: non-positive diagonal entry");
    }
    a[i] = scale / std::sqrt(d);
  }
  return a;
}

CMat signal_covariance(const CMat& h, double symbol_energy,
                       double noise_variance, const RVec* per_user_energy) {
  if (!(symbol_energy > 0.0)) {
    throw InvalidInputError("signal_covariance: symbol energy must be > 0");
  }
  if (noise_variance < 0.0) {
    throw InvalidInputError("signal_covariance: negative noise variance");
  }
  require_finite(h, "signal_covariance");
  const Eigen::Index m = h.rows();
  const Eigen::Index k = h.cols();
  CMat c_y(m, m);
  if (per_user_energy != nullptr) {
    if (per_user_energy->size() != k) {
      throw DimensionError("signal_covariance: per-user energy size mismatch");
    }
    if ((per_user_energy->array() <= 0.0).any()) {
      throw InvalidInputError("signal_covariance: non-positive user energy");
    }
    c_y = h * per_user_energy->asDiagonal() * h.adjoint();
  } else {
    c_y = symbol_energy * (h * h.adjoint());
  }
  c_y.diagonal().array() += noise_variance;
  hermitianize(c_y);
  return c_y;
}

BussgangModel build_bussgang_model(const CMat& h, double symbol_energy,
                                   double noise_variance,
                                   const RVec* per_user_energy) {
  BussgangModel model;
  model.noise_variance = noise_variance;
  model.symbol_energy = symbol_energy;
  model.C_y = signal_covariance(h, symbol_energy, noise_variance,
                                per_user_energy);
  model.A = bussgang_operator(model.C_y);
  model.C_yq = arcsine_covariance(model.C_y);
  // A C_y A^H with diagonal A: entry (i,j) scales by a_i * a_j.
  model.C_nq = model.C_yq;
  for (Eigen::Index j = 0; j < model.C_y.cols(); ++j) {
    for (Eigen::Index i = 0; i < model.C_y.rows(); ++i) {
      model.C_nq(i, j) -= model.A[i] * model.A[j] * model.C_y(i, j);
    }
  }
  hermitianize(model.C_nq);
  return model;
}

BussgangModel unquantized_model(const CMat& h, double symbol_energy,
                                double noise_variance,
                                const RVec* per_user_energy) {
  BussgangModel model;
  model.noise_variance = noise_variance;
  model.symbol_energy = symbol_energy;
  model.C_y = signal_covariance(h, symbol_energy, noise_variance,
                                per_user_energy);
  model.A = RVec::Ones(h.rows());
  model.C_yq = model.C_y;
  model.C_nq = CMat::Zero(h.rows(), h.rows());
  return model;
}

}  // namespace onebit
