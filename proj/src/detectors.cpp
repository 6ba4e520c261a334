#include "onebit/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace onebit {

namespace {

RVec resolve_energies(Eigen::Index users, double symbol_energy,
                      const RVec* per_user_energy) {
  if (per_user_energy != nullptr) {
    if (per_user_energy->size() != users) {
      throw DimensionError("detector: per-user energy size mismatch");
    }
    return *per_user_energy;
  }
  return RVec::Constant(users, symbol_energy);
}

// Diagonal A applied to a complex vector.
inline CVec a_times(const RVec& a, const CVec& v) {
  return (a.cast<cplx>().array() * v.array()).matrix();
}

// W = C^{-1} (A H D) with diagonal loading on near-singular C.
CMat mmse_filter_bank(const CMat& cov, const RVec& a, const CMat& h,
                      const RVec& energies) {
  CMat rhs = a.cast<cplx>().asDiagonal() * h;
  rhs = rhs * energies.cast<cplx>().asDiagonal();
  CMat loaded = cov;
  loaded.diagonal().array() += 1e-10;
  Eigen::LDLT<CMat> ldlt(loaded);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("lra-mmse: covariance factorization failed");
  }
  return ldlt.solve(rhs);
}

inline double mu_of(const CVec& w, const RVec& a, const CVec& h_col) {
  return w.dot(a_times(a, h_col)).real();
}

}  // namespace

LraMmseFilter build_lra_mmse(const CMat& h, const BussgangModel& model,
                             const RVec* per_user_energy) {
  if (model.antennas() != h.rows()) {
    throw DimensionError("build_lra_mmse: model/channel mismatch");
  }
  LraMmseFilter filter;
  filter.energies =
      resolve_energies(h.cols(), model.symbol_energy, per_user_energy);
  filter.w = mmse_filter_bank(model.C_yq, model.A, h, filter.energies);
  filter.model = model;
  filter.h_eff = h;
  return filter;
}

LraMmseFilter build_lra_mmse(const CMat& h, double symbol_energy,
                             double noise_variance,
                             const RVec* per_user_energy) {
  return build_lra_mmse(
      h, build_bussgang_model(h, symbol_energy, noise_variance,
                              per_user_energy),
      per_user_energy);
}

StreamStats stream_statistics(const LraMmseFilter& filter, int user) {
  if (user < 0 || user >= filter.h_eff.cols()) {
    throw DimensionError("stream_statistics: user index out of range");
  }
  const cplx inner =
      filter.w.col(user).dot(a_times(filter.model.A, filter.h_eff.col(user)));
  if (std::abs(inner.imag()) > 1e-6) {
    throw NumericalError(
        "stream_statistics: mu has non-negligible imaginary part");
  }
  const double mu = inner.real();
  if (mu < -1e-8 || mu > 1.0 + 1e-8) {
    throw NumericalError("stream_statistics: mu outside [0, 1]");
  }
  StreamStats stats;
  stats.mu = mu;
  stats.eta2 = filter.energies[user] * (mu - mu * mu);
  return stats;
}

int sic_order_next(const LraMmseFilter& filter,
                   const std::vector<int>& remaining) {
  if (remaining.empty()) {
    throw InvalidInputError("sic_order_next: empty candidate set");
  }
  int best = -1;
  double best_mu = -std::numeric_limits<double>::infinity();
  for (int k : remaining) {
    const double mu = stream_statistics(filter, k).mu;
    if (mu > best_mu || (mu == best_mu && (best < 0 || k < best))) {
      best_mu = mu;
      best = k;
    }
  }
  return best;
}

DetectionOutput detect_mrc(const CVec& y_q, const CMat& h,
                           const RVec* per_user_energy, double symbol_energy) {
  if (y_q.size() != h.rows()) {
    throw DimensionError("detect_mrc: dimension mismatch");
  }
  const RVec energies =
      resolve_energies(h.cols(), symbol_energy, per_user_energy);
  DetectionOutput out;
  out.hard_symbols.resize(h.cols());
  out.linear.resize(h.cols());
  for (Eigen::Index k = 0; k < h.cols(); ++k) {
    const double norm2 = h.col(k).squaredNorm();
    if (!(norm2 > 0.0)) {
      throw DegenerateCovarianceError("detect_mrc: zero channel column");
    }
    out.linear[k] = h.col(k).dot(y_q) / norm2;
    out.hard_symbols[k] = qpsk_slice(out.linear[k], energies[k]);
  }
  return out;
}

DetectionOutput detect_zf(const CVec& y_q, const CMat& h,
                          const RVec* per_user_energy, double symbol_energy) {
  if (y_q.size() != h.rows()) {
    throw DimensionError("detect_zf: dimension mismatch");
  }
  const RVec energies =
      resolve_energies(h.cols(), symbol_energy, per_user_energy);
  const CMat gram = h.adjoint() * h;
  Eigen::FullPivLU<CMat> lu(gram);
  if (!lu.isInvertible()) {
    throw DegenerateCovarianceError("detect_zf: rank-deficient channel");
  }
  DetectionOutput out;
  out.linear = lu.solve(h.adjoint() * y_q);
  out.hard_symbols.resize(h.cols());
  for (Eigen::Index k = 0; k < h.cols(); ++k) {
    out.hard_symbols[k] = qpsk_slice(out.linear[k], energies[k]);
  }
  return out;
}

CVec soft_residual(const CVec& y_q,
                   const std::vector<std::pair<int, cplx>>& decided,
                   const CMat& h, const RVec& a) {
  if (y_q.size() != h.rows() || a.size() != h.rows()) {
    throw DimensionError("soft_residual: dimension mismatch");
  }
  std::vector<bool> seen(h.cols(), false);
  CVec out = y_q;
  for (const auto& [k, x] : decided) {
    if (k < 0 || k >= h.cols()) {
      throw DimensionError("soft_residual: user index out of range");
    }
    if (seen[k]) {
      throw InvalidInputError("soft_residual: repeated user index");
    }
    seen[k] = true;
    out -= a_times(a, h.col(k)) * x;
  }
  return out;
}

Eigen::Vector2d soft_llr(cplx x_tilde, double mu, double eta2,
                         double symbol_energy) {
  if (!(eta2 > 0.0)) {
    throw InvalidInputError("soft_llr: eta^2 must be > 0");
  }
  const double s = std::sqrt(symbol_energy / 2.0);
  // Hypotheses sqrt(E/2)(r + j q), r,q in {+1,-1}; bit value 0 <-> +1 rail.
  double expo[2][2];
  double emax = -std::numeric_limits<double>::infinity();
  for (int ri = 0; ri < 2; ++ri) {
    for (int qi = 0; qi < 2; ++qi) {
      const double r = ri == 0 ? 1.0 : -1.0;
      const double q = qi == 0 ? 1.0 : -1.0;
      const cplx d = x_tilde - mu * cplx(s * r, s * q);
      expo[ri][qi] = -std::norm(d) / eta2;
      emax = std::max(emax, expo[ri][qi]);
    }
  }
  const auto lse2 = [emax](double a, double b) {
    return emax + std::log(std::exp(a - emax) + std::exp(b - emax));
  };
  Eigen::Vector2d llr;
  llr[0] = lse2(expo[0][0], expo[0][1]) - lse2(expo[1][0], expo[1][1]);
  llr[1] = lse2(expo[0][0], expo[1][0]) - lse2(expo[0][1], expo[1][1]);
  return llr;
}

SicDetector::SicDetector(const CMat& h, const BussgangModel& model,
                         RVec energies)
    : h_(h), a_(model.A), energies_(std::move(energies)) {
  const Eigen::Index m = h.rows();
  const Eigen::Index k = h.cols();
  if (model.antennas() != m) {
    throw DimensionError("sic: model/channel mismatch");
  }
  if (energies_.size() != k) {
    throw DimensionError("sic: energy vector size mismatch");
  }
  order_.reserve(k);
  stage_w_.resize(m, k);
  stage_mu_.resize(k);
  stage_eta2_.resize(k);

  CMat h_bar = h;  // columns zeroed as users are canceled
  CMat cov = model.C_yq;
  std::vector<int> remaining(k);
  for (Eigen::Index i = 0; i < k; ++i) remaining[i] = static_cast<int>(i);

  for (Eigen::Index stage = 0; stage < k; ++stage) {
    const CMat w = mmse_filter_bank(cov, a_, h_bar, energies_);
    int best = -1;
    double best_mu = -std::numeric_limits<double>::infinity();
    for (int cand : remaining) {
      const double mu = mu_of(w.col(cand), a_, h.col(cand));
      if (mu > best_mu) {
        best_mu = mu;
        best = cand;
      }
    }
    order_.push_back(best);
    stage_w_.col(stage) = w.col(best);
    stage_mu_[stage] = best_mu;
    const double mu = std::clamp(best_mu, 0.0, 1.0);
    stage_eta2_[stage] = energies_[best] * (mu - mu * mu);
    remaining.erase(std::find(remaining.begin(), remaining.end(), best));
    if (remaining.empty()) break;

    // Deflate: zero the decided column and rebuild the stage covariance;
    // A and C_nq stay frozen at their full-signal values.
    h_bar.col(best).setZero();
    const CMat ah = a_.cast<cplx>().asDiagonal() * h_bar;
    cov = ah * energies_.cast<cplx>().asDiagonal() * ah.adjoint() + model.C_nq;
    cov.diagonal() +=
        (model.noise_variance * a_.array().square()).matrix().cast<cplx>();
    hermitianize(cov);
  }
}

CVec SicDetector::detect_hard(const CVec& y_q) const {
  if (y_q.size() != h_.rows()) {
    throw DimensionError("sic: observation size mismatch");
  }
  CVec out(h_.cols());
  CVec residual = y_q;
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const int k = order_[i];
    const cplx sliced =
        qpsk_slice(stage_w_.col(static_cast<Eigen::Index>(i)).dot(residual),
                   energies_[k]);
    out[k] = sliced;
    residual -= a_times(a_, h_.col(k)) * sliced;
  }
  return out;
}

DetectionOutput SicDetector::detect_hard_traced(const CVec& y_q) const {
  if (y_q.size() != h_.rows()) {
    throw DimensionError("sic: observation size mismatch");
  }
  const Eigen::Index k = h_.cols();
  DetectionOutput out;
  out.hard_symbols.resize(k);
  SicTrace trace;
  trace.order = order_;
  trace.sliced.resize(k);
  trace.mu = stage_mu_;
  trace.eta2 = stage_eta2_;
  trace.residuals.resize(h_.rows(), k);
  CVec residual = y_q;
  for (Eigen::Index i = 0; i < k; ++i) {
    const int user = order_[i];
    trace.residuals.col(i) = residual;
    const cplx sliced =
        qpsk_slice(stage_w_.col(i).dot(residual), energies_[user]);
    trace.sliced[i] = sliced;
    out.hard_symbols[user] = sliced;
    residual = soft_residual(residual, {{user, sliced}}, h_, a_);
  }
  out.trace = std::move(trace);
  return out;
}

RMat SicDetector::detect_soft(const CVec& y_q) const {
  if (y_q.size() != h_.rows()) {
    throw DimensionError("sic: observation size mismatch");
  }
  RMat llrs(h_.cols(), 2);
  CVec residual = y_q;
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const int k = order_[i];
    const cplx z = stage_w_.col(static_cast<Eigen::Index>(i)).dot(residual);
    const double eta2 = std::max(stage_eta2_[i], 1e-30);
    const Eigen::Vector2d raw = soft_llr(z, stage_mu_[i], eta2, energies_[k]);
    llrs(k, 0) = std::clamp(raw[0], -kLlrClamp, kLlrClamp);
    llrs(k, 1) = std::clamp(raw[1], -kLlrClamp, kLlrClamp);
    residual -= a_times(a_, h_.col(k)) * qpsk_slice(z, energies_[k]);
  }
  return llrs;
}

namespace {

DetectionOutput run_sic(const CVec& y_q, const CMat& h, double symbol_energy,
                        double noise_variance, const RVec* per_user_energy,
                        bool soft) {
  const BussgangModel model =
      build_bussgang_model(h, symbol_energy, noise_variance, per_user_energy);
  const SicDetector sic(
      h, model, resolve_energies(h.cols(), symbol_energy, per_user_energy));
  if (!soft) return sic.detect_hard_traced(y_q);
  DetectionOutput out;
  out.llrs = sic.detect_soft(y_q);
  SicTrace trace;
  trace.order = sic.order();
  out.trace = std::move(trace);
  return out;
}

}  // namespace

DetectionOutput detect_sic_hard(const CVec& y_q, const CMat& h,
                                double symbol_energy, double noise_variance,
                                const RVec* per_user_energy) {
  return run_sic(y_q, h, symbol_energy, noise_variance, per_user_energy,
                 false);
}

DetectionOutput detect_sic_soft(const CVec& y_q, const CMat& h,
                                double symbol_energy, double noise_variance,
                                const RVec* per_user_energy) {
  return run_sic(y_q, h, symbol_energy, noise_variance, per_user_energy, true);
}

}  // namespace onebit
