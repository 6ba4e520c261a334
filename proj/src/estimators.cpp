#include "onebit/estimators.hpp"

#include <cmath>

#include "onebit/quantize.hpp"

namespace onebit {

RlsState make_rls_state(int antennas, int users, double lambda, double delta) {
  if (antennas < 1 || users < 1) {
    throw DimensionError("rls: dimensions must be >= 1");
  }
  if (!(lambda > 0.0) || lambda > 1.0) {
    throw InvalidInputError("rls: forgetting factor must be in (0, 1]");
  }
  if (!(delta > 0.0)) {
    throw InvalidInputError("rls: regularization must be > 0");
  }
  RlsState state;
  state.inv_corr =
      LCMat::Identity(users, users) / static_cast<long double>(delta);
  state.h_hat = CMat::Zero(antennas, users);
  state.lambda = lambda;
  state.delta = delta;
  return state;
}

double pilot_linear_operator(const CVec& x_p, double noise_variance) {
  if (noise_variance < 0.0) {
    throw InvalidInputError("pilot_linear_operator: negative noise variance");
  }
  const double energy = x_p.squaredNorm() + noise_variance;
  if (!(energy > 0.0)) {
    throw DegenerateCovarianceError(
        "pilot_linear_operator: zero pilot energy and zero noise");
  }
  return std::sqrt(2.0 / M_PI) / std::sqrt(energy);
}

void rls_update(RlsState& state, const CVec& regressor, const CVec& y) {
  const Eigen::Index k = state.inv_corr.rows();
  const Eigen::Index m = state.h_hat.rows();
  if (regressor.size() != k || y.size() != m) {
    throw DimensionError("rls_update: dimension mismatch");
  }
  if (!regressor.allFinite() || !y.allFinite()) {
    throw InvalidInputError("rls_update: non-finite input");
  }
  const LCVec u = regressor.cast<lcplx>();
  const LCVec pu = state.inv_corr * u;
  const long double denom =
      static_cast<long double>(state.lambda) + (u.dot(pu)).real();
  const LCVec gain = pu / denom;
  // Shared gain; per-antenna a priori errors e_m = y_m - row_m(H_hat) u.
  const CVec gain_d = gain.cast<cplx>();
  const CVec err = y - state.h_hat * regressor;
  state.h_hat.noalias() += err * gain_d.adjoint();
  const Eigen::Matrix<lcplx, 1, Eigen::Dynamic> utp =
      u.adjoint() * state.inv_corr;
  state.inv_corr.noalias() -= gain * utp;
  state.inv_corr /= static_cast<long double>(state.lambda);
  state.inv_corr = ((state.inv_corr + state.inv_corr.adjoint()) / 2.0L).eval();
  state.samples += 1;
  state.flops += static_cast<std::uint64_t>(3 * k * k + 2 * m * k + 2 * k);
}

void lra_rls_update(RlsState& state, const CVec& x_p, const CVec& y_q,
                    double noise_variance) {
  const double a_p = pilot_linear_operator(x_p, noise_variance);
  rls_update(state, a_p * x_p, y_q);
}

EstimatorReport lra_rls_estimate(const CMat& y_q_pilot, const CMat& x_p,
                                 double noise_variance, double lambda,
                                 double delta) {
  if (y_q_pilot.cols() != x_p.cols()) {
    throw DimensionError("lra_rls_estimate: pilot length mismatch");
  }
  RlsState state = make_rls_state(static_cast<int>(y_q_pilot.rows()),
                                  static_cast<int>(x_p.rows()), lambda, delta);
  for (Eigen::Index n = 0; n < x_p.cols(); ++n) {
    lra_rls_update(state, x_p.col(n), y_q_pilot.col(n), noise_variance);
  }
  EstimatorReport report;
  report.h_hat = std::move(state.h_hat);
  report.flop_estimate = state.flops;
  return report;
}

double rls_matched_delta(double noise_variance, double total_pilot_energy,
                         double lambda, int pilot_len) {
  const double a_p2 =
      (2.0 / M_PI) / (total_pilot_energy + noise_variance);
  const double residual = noise_variance * a_p2 + (1.0 - 2.0 / M_PI);
  return residual / std::pow(lambda, pilot_len);
}

CMat estimate_ls(const CMat& y_q_pilot, const CMat& x_p) {
  if (y_q_pilot.cols() != x_p.cols()) {
    throw DimensionError("estimate_ls: pilot length mismatch");
  }
  const CMat gram = x_p * x_p.adjoint();
  Eigen::FullPivLU<CMat> lu(gram);
  if (!lu.isInvertible()) {
    throw DegenerateCovarianceError("estimate_ls: rank-deficient pilots");
  }
  return y_q_pilot * x_p.adjoint() * lu.inverse();
}

BlmmseEstimator::BlmmseEstimator(const CMat& x_p, double noise_variance,
                                 int antennas)
    : antennas_(antennas),
      users_(static_cast<int>(x_p.rows())),
      pilot_len_(static_cast<int>(x_p.cols())) {
  if (antennas < 1) {
    throw DimensionError("blmmse: antennas must be >= 1");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(antennas_) * pilot_len_;
  const Eigen::Index mk = static_cast<Eigen::Index>(antennas_) * users_;

  // Stacked pilot operator X~ = X_p^T kron I_M, so C_yp has M x M blocks
  // (x_p(n')^H x_p(n)) I_M + noise on the diagonal.
  CMat x_tilde = CMat::Zero(n, mk);
  for (int t = 0; t < pilot_len_; ++t) {
    for (int u = 0; u < users_; ++u) {
      for (int a = 0; a < antennas_; ++a) {
        x_tilde(static_cast<Eigen::Index>(t) * antennas_ + a,
                static_cast<Eigen::Index>(u) * antennas_ + a) = x_p(u, t);
      }
    }
  }
  CMat c_yp = x_tilde * x_tilde.adjoint();
  c_yp.diagonal().array() += noise_variance;
  hermitianize(c_yp);
  const RVec a_diag = bussgang_operator(c_yp);
  CMat c_yqp = arcsine_covariance(c_yp);
  c_yqp.diagonal().array() += 1e-10;  // guard near-singular stacked covariances

  // vec(H_hat) = X~^H A~^H C_yqp^{-1} y_qp; solve for the filter once.
  CMat lhs = x_tilde.adjoint();
  for (Eigen::Index j = 0; j < n; ++j) lhs.col(j) *= a_diag[j];
  Eigen::LDLT<CMat> ldlt(c_yqp);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("blmmse: stacked covariance factorization failed");
  }
  filter_ = ldlt.solve(lhs.adjoint()).adjoint();

  const auto nn = static_cast<std::uint64_t>(n);
  const auto mk64 = static_cast<std::uint64_t>(mk);
  build_flops_ = nn * nn * nn / 3 + (mk64 + 2) * nn * nn;
  apply_flops_ = mk64 * nn;
}

CMat BlmmseEstimator::estimate(const CMat& y_q_pilot) const {
  if (y_q_pilot.rows() != antennas_ || y_q_pilot.cols() != pilot_len_) {
    throw DimensionError("blmmse: pilot block shape mismatch");
  }
  // Stack time-major: y[t*M + a] = Y(a, t) = vec(Y).
  const CVec y_stacked =
      Eigen::Map<const CVec>(y_q_pilot.data(), y_q_pilot.size());
  const CVec h_vec = filter_ * y_stacked;
  return Eigen::Map<const CMat>(h_vec.data(), antennas_, users_);
}

CMat estimate_blmmse(const CMat& y_q_pilot, const CMat& x_p,
                     double noise_variance) {
  BlmmseEstimator est(x_p, noise_variance,
                      static_cast<int>(y_q_pilot.rows()));
  return est.estimate(y_q_pilot);
}

double nmse(const CMat& h_hat, const CMat& h_true) {
  if (h_hat.rows() != h_true.rows() || h_hat.cols() != h_true.cols()) {
    throw DimensionError("nmse: shape mismatch");
  }
  const double denom = h_true.squaredNorm();
  if (!(denom > 0.0)) {
    throw InvalidInputError("nmse: reference channel is zero");
  }
  return (h_hat - h_true).squaredNorm() / denom;
}

}  // namespace onebit
