#pragma once

#include "onebit/common.hpp"

namespace onebit {

using lcplx = std::complex<long double>;
using LCMat = Eigen::Matrix<lcplx, Eigen::Dynamic, Eigen::Dynamic>;
using LCVec = Eigen::Matrix<lcplx, Eigen::Dynamic, 1>;

/// State of the low-resolution-aware RLS channel estimator. The inverse
/// correlation matrix P is shared by all M antennas because the regressor
/// u(n) = A_p(n) x_p(n) is antenna-independent; this is what yields the
/// O(K^2 M) per-pilot cost. P is carried in extended precision: with
/// regularization as small as 1e-11 the pre-convergence transient of the
/// covariance-form recursion is ill-conditioned in double.
struct RlsState {
  LCMat inv_corr;  // P, K x K Hermitian positive definite
  CMat h_hat;      // M x K current channel estimates
  double lambda = 0.94;
  double delta = 1.0;
  int samples = 0;
  std::uint64_t flops = 0;  // complex multiply-accumulate count
};

RlsState make_rls_state(int antennas, int users, double lambda, double delta);

/// Scalar Bussgang gain of one pilot sample:
/// A_p(n) = sqrt(2/pi) (x_p(n)^H x_p(n) + noise_variance)^{-1/2}.
double pilot_linear_operator(const CVec& x_p, double noise_variance);

/// Core exponentially weighted RLS recursion on an explicit regressor;
/// one gain vector shared by all antenna rows.
void rls_update(RlsState& state, const CVec& regressor, const CVec& y);

/// One LRA-RLS step: regressor u(n) = A_p(n) x_p(n) against the quantized
/// observation column y_q(n).
void lra_rls_update(RlsState& state, const CVec& x_p, const CVec& y_q,
                    double noise_variance);

struct EstimatorReport {
  CMat h_hat;
  double nmse = 0.0;
  std::uint64_t flop_estimate = 0;
};

/// Run the full pilot block through LRA-RLS.
EstimatorReport lra_rls_estimate(const CMat& y_q_pilot, const CMat& x_p,
                                 double noise_variance, double lambda,
                                 double delta);

/// Ridge matched to the residual variance of the equivalent linear pilot
/// model (unit channel prior): delta = (sigma_n^2 A_p^2 + 1 - 2/pi) /
/// lambda^tau. Used as the default per-SNR delta schedule.
double rls_matched_delta(double noise_variance, double total_pilot_energy,
                         double lambda, int pilot_len);

/// Naive least squares on the quantized block (treats y_q as unquantized):
/// H_hat = Y_q X_p^H (X_p X_p^H)^{-1}.
CMat estimate_ls(const CMat& y_q_pilot, const CMat& x_p);

/// Bussgang LMMSE estimator on the stacked pilot model
/// y_qp = A~ (X~ h + n) + n_q, X~ = X_p^T kron I_M, prior h ~ CN(0, I).
/// The filter depends only on (X_p, noise variance) and can be reused
/// across frames.
class BlmmseEstimator {
 public:
  BlmmseEstimator(const CMat& x_p, double noise_variance, int antennas);

  CMat estimate(const CMat& y_q_pilot) const;

  std::uint64_t build_flops() const { return build_flops_; }
  std::uint64_t apply_flops() const { return apply_flops_; }

 private:
  CMat filter_;  // (M K) x (M tau)
  int antennas_ = 0;
  int users_ = 0;
  int pilot_len_ = 0;
  std::uint64_t build_flops_ = 0;
  std::uint64_t apply_flops_ = 0;
};

CMat estimate_blmmse(const CMat& y_q_pilot, const CMat& x_p,
                     double noise_variance);

/// ||H_hat - H||_F^2 / ||H||_F^2.
double nmse(const CMat& h_hat, const CMat& h_true);

}  // namespace onebit
