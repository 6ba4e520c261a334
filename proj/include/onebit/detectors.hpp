#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "onebit/channel.hpp"
#include "onebit/quantize.hpp"

namespace onebit {

/// Linear LRA-MMSE filter bank W = C_yq^{-1} A H D solving
/// min_W E||x - W^H y_q||^2 under the equivalent linear model.
struct LraMmseFilter {
  CMat w;  // M x K
  BussgangModel model;
  CMat h_eff;
  RVec energies;  // per-user symbol energies (D diagonal)
};

LraMmseFilter build_lra_mmse(const CMat& h, double symbol_energy,
                             double noise_variance,
                             const RVec* per_user_energy = nullptr);
/// Same, with an injected equivalent-linear model (e.g. the pass-through
/// model for quantizer-bypass validation).
LraMmseFilter build_lra_mmse(const CMat& h, const BussgangModel& model,
                             const RVec* per_user_energy = nullptr);

struct StreamStats {
  double mu = 0.0;    // w_k^H A h_k, real by MMSE structure
  double eta2 = 0.0;  // E_k (mu - mu^2), filter-output noise variance
};

StreamStats stream_statistics(const LraMmseFilter& filter, int user);

/// Next detection pick: argmax over remaining users of mu_k
/// (minimum per-stream MSE); ties broken by lowest index.
int sic_order_next(const LraMmseFilter& filter,
                   const std::vector<int>& remaining);

struct SicTrace {
  std::vector<int> order;  // k_1 .. k_K
  CVec sliced;             // per-stage hard symbol
  RVec mu;                 // per-stage filter statistics
  RVec eta2;
  CMat residuals;  // column i = observation the i-th stage operated on
};

struct DetectionOutput {
  CVec hard_symbols;  // K, natural user order (hard detectors)
  CVec linear;        // unsliced filter outputs (mrc/zf)
  RMat llrs;          // K x 2, clamped to +-kLlrClamp (soft detectors)
  std::optional<SicTrace> trace;
};

DetectionOutput detect_mrc(const CVec& y_q, const CMat& h,
                           const RVec* per_user_energy = nullptr,
                           double symbol_energy = 1.0);
DetectionOutput detect_zf(const CVec& y_q, const CMat& h,
                          const RVec* per_user_energy = nullptr,
                          double symbol_energy = 1.0);

/// Interference subtraction y_q - A sum_j h_{k_j} x~_{k_j}.
CVec soft_residual(const CVec& y_q,
                   const std::vector<std::pair<int, cplx>>& decided,
                   const CMat& h, const RVec& a);

/// Per-bit LLRs (log P(b=0)/P(b=1)) of a Gray QPSK symbol observed through
/// x~ = mu x + z, z ~ CN(0, eta2): exact log-sum-exp over the 4 hypotheses
/// with uniform priors. Unclamped.
Eigen::Vector2d soft_llr(cplx x_tilde, double mu, double eta2,
                         double symbol_energy);

/// Successive interference canceler on the equivalent linear model. The
/// detection order, per-stage filters and stream statistics depend only on
/// (H, model), so they are precomputed once and reused across data columns
/// of a frame. A and C_nq stay frozen at their full-signal values; only the
/// signal part of the stage covariance is deflated.
class SicDetector {
 public:
  SicDetector(const CMat& h, const BussgangModel& model, RVec energies);

  CVec detect_hard(const CVec& y_q) const;
  DetectionOutput detect_hard_traced(const CVec& y_q) const;
  /// K x 2 LLR matrix in natural user order; cancellation uses the
  /// hard-sliced symbol at each stage.
  RMat detect_soft(const CVec& y_q) const;

  const std::vector<int>& order() const { return order_; }
  double stage_mu(int i) const { return stage_mu_[i]; }
  double stage_eta2(int i) const { return stage_eta2_[i]; }

 private:
  CMat h_;
  RVec a_;
  RVec energies_;
  std::vector<int> order_;
  CMat stage_w_;  // column i = receive filter of stage i
  RVec stage_mu_;
  RVec stage_eta2_;
};

DetectionOutput detect_sic_hard(const CVec& y_q, const CMat& h,
                                double symbol_energy, double noise_variance,
                                const RVec* per_user_energy = nullptr);
DetectionOutput detect_sic_soft(const CVec& y_q, const CMat& h,
                                double symbol_energy, double noise_variance,
                                const RVec* per_user_energy = nullptr);

}  // namespace onebit
