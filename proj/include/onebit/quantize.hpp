#pragma once

#include "onebit/common.hpp"

namespace onebit {

/// Statistically equivalent linear model of the 1-bit receiver,
/// y_q = A y + n_q, for a given channel and noise level.
/// A is diagonal and stored as a length-M vector.
struct BussgangModel {
  RVec A;      // diagonal Bussgang gain, sqrt(2/pi) * diag(C_y)^{-1/2}
  CMat C_y;    // covariance of the unquantized receive vector
  CMat C_yq;   // covariance of the 1-bit output (arcsine law)
  CMat C_nq;   // equivalent quantizer-noise covariance, C_yq - A C_y A^H
  double noise_variance = 0.0;
  double symbol_energy = 1.0;

  Eigen::Index antennas() const { return A.size(); }
};

/// Element-wise 1-bit quantizer: out[i] = (sgn(Re) + j sgn(Im)) / sqrt(2),
/// with sgn(0) = +1. Real and imaginary rails are quantized independently.
CVec quantize_1bit(const CVec& v);
CMat quantize_1bit(const CMat& v);

/// Covariance of the sign-quantized signal via the arcsine law:
/// (2/pi) (asin(K Re{C} K) + j asin(K Im{C} K)), K = diag(C)^{-1/2}.
/// Output is Hermitian with unit diagonal.
CMat arcsine_covariance(const CMat& c_s);

/// Diagonal of the Bussgang linear operator for covariance C_y.
RVec bussgang_operator(const CMat& c_y);

/// C_y = H D H^H + noise_variance I, with D = symbol_energy I or the
/// per-user energy matrix in the near-far scenario.
CMat signal_covariance(const CMat& h, double symbol_energy,
                       double noise_variance,
                       const RVec* per_user_energy = nullptr);

BussgangModel build_bussgang_model(const CMat& h, double symbol_energy,
                                   double noise_variance,
                                   const RVec* per_user_energy = nullptr);

/// Pass-through model (A = I, C_nq = 0) for validation runs that bypass
/// the quantizer.
BussgangModel unquantized_model(const CMat& h, double symbol_energy,
                                double noise_variance,
                                const RVec* per_user_energy = nullptr);

}  // namespace onebit
