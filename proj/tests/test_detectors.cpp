#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "onebit/detectors.hpp"
#include "test_support.hpp"

using namespace onebit;
using testsup::qpsk_point;

namespace {

CVec random_qpsk(int users, const RVec& energies, Rng& rng) {
  std::uniform_int_distribution<int> bit(0, 1);
  CVec x(users);
  for (int k = 0; k < users; ++k) {
    x[k] = qpsk_point(bit(rng), bit(rng), energies[k]);
  }
  return x;
}

CVec quantized_observation(const CMat& h, const CVec& x, double sn2,
                           Rng& rng) {
  return quantize_1bit(CVec(h * x + complex_gaussian(h.rows(), sn2, rng)));
}

int count_symbol_errors(const CVec& detected, const CVec& truth) {
  int errors = 0;
  for (Eigen::Index k = 0; k < truth.size(); ++k) {
    if (std::abs(detected[k] - truth[k]) > 1e-9) ++errors;
  }
  return errors;
}

}  // namespace

TEST_CASE("K=1: MRC and ZF give identical hard decisions") {
  Rng rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const CMat h = generate_channel(8, 1, rng);
    const CVec y = complex_gaussian(8, 1.0, rng);
    CHECK(detect_mrc(y, h).hard_symbols == detect_zf(y, h).hard_symbols);
  }
}

TEST_CASE("orthogonal columns: ZF equals column-normalized MRC") {
  Rng rng(2);
  // orthonormalize two columns, then rescale
  const CMat g = generate_channel(16, 2, rng);
  const Eigen::HouseholderQR<CMat> qr(g);
  CMat q = qr.householderQ() * CMat::Identity(16, 2);
  q.col(0) *= 2.0;
  const CVec y = complex_gaussian(16, 1.0, rng);
  const DetectionOutput mrc = detect_mrc(y, q);
  const DetectionOutput zf = detect_zf(y, q);
  CHECK((mrc.linear - zf.linear).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ZF matches the pseudo-inverse oracle on a random 16x2 instance") {
  Rng rng(3);
  const CMat h = generate_channel(16, 2, rng);
  const CVec y = complex_gaussian(16, 1.0, rng);
  Eigen::JacobiSVD<CMat> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const CVec oracle = svd.solve(y);
  CHECK((detect_zf(y, h).linear - oracle).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(detect_zf(y, CMat::Zero(16, 2)),
                  DegenerateCovarianceError);
}

TEST_CASE("H = 0 gives a zero LRA-MMSE filter") {
  const CMat h = CMat::Zero(6, 2);
  const LraMmseFilter filter = build_lra_mmse(h, 1.0, 0.5);
  CHECK(filter.w.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("filter fixed point: C_yq W = sigma_x^2 A H") {
  Rng rng(4);
  const CMat h = generate_channel(16, 3, rng);
  const LraMmseFilter f = build_lra_mmse(h, 1.0, 0.4);
  const CMat lhs = f.model.C_yq * f.w;
  const CMat rhs =
      f.model.A.cast<cplx>().asDiagonal() * h * f.energies.cast<cplx>().asDiagonal();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("mu_k lies in (0,1) at finite SNR") {
  Rng rng(5);
  for (int rep = 0; rep < 25; ++rep) {
    const CMat h = generate_channel(12, 3, rng);
    const LraMmseFilter f = build_lra_mmse(h, 1.0, 0.8);
    for (int k = 0; k < 3; ++k) {
      const StreamStats stats = stream_statistics(f, k);
      CHECK(stats.mu > 0.0);
      CHECK(stats.mu < 1.0);
      CHECK(stats.eta2 > 0.0);
    }
  }
}

// W is the empirical MSE minimizer under the model it assumes (Gaussian
// symbols): single-entry perturbations cannot reduce the Monte-Carlo MSE.
TEST_CASE("LRA-MMSE local optimality") {
  Rng rng(6);
  const int antennas = 8, users = 2;
  const CMat h = generate_channel(antennas, users, rng);
  const double sn2 = noise_variance_for_snr_db(10.0, users, 1.0);
  const LraMmseFilter f = build_lra_mmse(h, 1.0, sn2);

  struct Perturbation {
    int row, col;
    cplx delta;
  };
  const double eps = 1e-3;
  const std::vector<Perturbation> perturbations = {
      {0, 0, cplx(eps, 0)},  {0, 0, cplx(-eps, 0)}, {0, 0, cplx(0, eps)},
      {3, 1, cplx(eps, 0)},  {3, 1, cplx(-eps, 0)}, {3, 1, cplx(0, -eps)},
      {5, 0, cplx(-eps, 0)}, {5, 0, cplx(0, eps)}};

  std::vector<double> mse(perturbations.size() + 1, 0.0);
  const long draws = 4'000'000;
  for (long t = 0; t < draws; ++t) {
    const CVec x = complex_gaussian(users, 1.0, rng);
    const CVec y =
        quantize_1bit(CVec(h * x + complex_gaussian(antennas, sn2, rng)));
    const CVec base_err = x - f.w.adjoint() * y;
    mse[0] += base_err.squaredNorm();
    for (std::size_t p = 0; p < perturbations.size(); ++p) {
      // only stream `col` changes under a single-entry perturbation
      const auto& pert = perturbations[p];
      const cplx err_k =
          base_err[pert.col] - std::conj(pert.delta) * y[pert.row];
      mse[p + 1] += base_err.squaredNorm() -
                    std::norm(base_err[pert.col]) + std::norm(err_k);
    }
  }
  for (std::size_t p = 1; p < mse.size(); ++p) {
    CHECK(mse[p] >= mse[0]);
  }
}

TEST_CASE("sic_order_next picks the strongest stream") {
  Rng rng(7);
  CMat h = generate_channel(16, 2, rng);
  h.col(0) *= 4.0;  // user 0 much stronger
  const LraMmseFilter f = build_lra_mmse(h, 1.0, 2.0);
  CHECK(sic_order_next(f, {0, 1}) == 0);
  CHECK(sic_order_next(f, {1}) == 1);
  CHECK_THROWS_AS(sic_order_next(f, {}), InvalidInputError);
}

TEST_CASE("SIC ordering is equivariant under user relabeling") {
  Rng rng(8);
  const CMat h = generate_channel(12, 3, rng);
  const double sn2 = 1.0;
  const RVec energies = RVec::Ones(3);
  const SicDetector plain(h, build_bussgang_model(h, 1.0, sn2), energies);

  const int new_pos[3] = {1, 2, 0};  // user j moves to column new_pos[j]
  CMat h_perm(12, 3);
  for (int j = 0; j < 3; ++j) h_perm.col(new_pos[j]) = h.col(j);
  const SicDetector permuted(h_perm, build_bussgang_model(h_perm, 1.0, sn2),
                             energies);
  for (int stage = 0; stage < 3; ++stage) {
    CHECK(permuted.order()[stage] == new_pos[plain.order()[stage]]);
  }
}

TEST_CASE("K=1: SIC equals the linear LRA-MMSE decision") {
  Rng rng(9);
  for (int rep = 0; rep < 200; ++rep) {
    const CMat h = generate_channel(8, 1, rng);
    const double sn2 = 0.8;
    const CVec x = random_qpsk(1, RVec::Ones(1), rng);
    const CVec y = quantized_observation(h, x, sn2, rng);
    const LraMmseFilter f = build_lra_mmse(h, 1.0, sn2);
    const cplx linear = (f.w.adjoint() * y)(0);
    const DetectionOutput sic = detect_sic_hard(y, h, 1.0, sn2);
    CHECK(sic.hard_symbols[0] == qpsk_slice(linear, 1.0));
  }
}

TEST_CASE("noiseless bypassed SIC recovers all symbols exactly") {
  Rng rng(10);
  for (int rep = 0; rep < 50; ++rep) {
    const int users = 4;
    const CMat h = generate_channel(8, users, rng);
    const RVec energies = RVec::Ones(users);
    const CVec x = random_qpsk(users, energies, rng);
    const CVec y = h * x;  // A = I, n = 0, no quantizer
    const BussgangModel model = unquantized_model(h, 1.0, 0.0);
    const SicDetector sic(h, model, energies);
    const CVec detected = sic.detect_hard(y);
    CHECK(count_symbol_errors(detected, x) == 0);
  }
}

TEST_CASE("SIC beats the linear detector at 10 dB (M=8, K=2)") {
  Rng rng(11);
  const int antennas = 8, users = 2, frames = 10'000;
  const double sn2 = noise_variance_for_snr_db(10.0, users, 1.0);
  const RVec energies = RVec::Ones(users);
  long err_sic = 0, err_lin = 0;
  for (int f = 0; f < frames; ++f) {
    const CMat h = generate_channel(antennas, users, rng);
    const CVec x = random_qpsk(users, energies, rng);
    const CVec y = quantized_observation(h, x, sn2, rng);
    const BussgangModel model = build_bussgang_model(h, 1.0, sn2);
    const SicDetector sic(h, model, energies);
    err_sic += count_symbol_errors(sic.detect_hard(y), x);
    const LraMmseFilter filter = build_lra_mmse(h, model);
    const CVec lin = filter.w.adjoint() * y;
    CVec lin_sliced(users);
    for (int k = 0; k < users; ++k) lin_sliced[k] = qpsk_slice(lin[k], 1.0);
    err_lin += count_symbol_errors(lin_sliced, x);
  }
  CHECK(err_sic <= err_lin);
}

TEST_CASE("soft_residual basics and trace consistency") {
  Rng rng(12);
  const int users = 3;
  const CMat h = generate_channel(8, users, rng);
  const double sn2 = 0.5;
  const RVec energies = RVec::Ones(users);
  const CVec x = random_qpsk(users, energies, rng);
  const CVec y = quantized_observation(h, x, sn2, rng);
  const BussgangModel model = build_bussgang_model(h, 1.0, sn2);

  CHECK(soft_residual(y, {}, h, model.A) == y);

  // all users decided correctly, noiseless, bypassed: exact zero
  const CVec y_lin = h * x;
  const RVec ones = RVec::Ones(8);
  const CVec res = soft_residual(
      y_lin, {{0, x[0]}, {1, x[1]}, {2, x[2]}}, h, ones);
  CHECK(res.cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(soft_residual(y, {{0, x[0]}, {0, x[0]}}, h, model.A),
                  InvalidInputError);

  // single cancellation equals the hard-SIC stage-2 residual bit for bit
  const SicDetector sic(h, model, energies);
  const DetectionOutput traced = sic.detect_hard_traced(y);
  const SicTrace& trace = *traced.trace;
  const CVec stage2 = soft_residual(
      y, {{trace.order[0], trace.sliced[0]}}, h, model.A);
  CHECK(stage2 == trace.residuals.col(1));
}

TEST_CASE("stream statistics arithmetic and Gaussian approximation") {
  // synthetic filter with mu = 0.5
  LraMmseFilter f;
  f.h_eff = CMat::Ones(1, 1);
  f.model.A = RVec::Ones(1);
  f.model.symbol_energy = 1.0;
  f.energies = RVec::Ones(1);
  f.w = CMat::Constant(1, 1, cplx(0.5, 0.0));
  const StreamStats s = stream_statistics(f, 0);
  CHECK(s.mu == doctest::Approx(0.5));
  CHECK(s.eta2 == doctest::Approx(0.25));

  f.w(0, 0) = cplx(1.0 - 1e-9, 0.0);
  CHECK(stream_statistics(f, 0).eta2 ==
        doctest::Approx(0.0).epsilon(1e-8));

  // empirical variance of x~ - mu x matches eta^2 within 5%
  Rng rng(13);
  const int antennas = 16, users = 2;
  const CMat h = generate_channel(antennas, users, rng);
  const double sn2 = noise_variance_for_snr_db(10.0, users, 1.0);
  const LraMmseFilter filter = build_lra_mmse(h, 1.0, sn2);
  const StreamStats stats = stream_statistics(filter, 0);
  double acc = 0.0;
  const long draws = 100'000;
  for (long t = 0; t < draws; ++t) {
    const CVec x = complex_gaussian(users, 1.0, rng);
    const CVec y =
        quantize_1bit(CVec(h * x + complex_gaussian(antennas, sn2, rng)));
    const cplx z = (filter.w.col(0).dot(y)) - stats.mu * x[0];
    acc += std::norm(z);
  }
  CHECK(acc / draws == doctest::Approx(stats.eta2).epsilon(0.05));
}

TEST_CASE("soft_llr closed forms, symmetry, brute force") {
  CHECK(soft_llr(cplx(0, 0), 0.5, 0.2, 1.0) == Eigen::Vector2d::Zero());
  CHECK_THROWS_AS(soft_llr(cplx(0.1, 0.1), 0.5, 0.0, 1.0),
                  InvalidInputError);

  // brute-force evaluation at the pinned point
  {
    const cplx x_tilde(0.3, 0.1);
    const double mu = 0.6, eta2 = 0.2, sx2 = 1.0;
    const double s = std::sqrt(sx2 / 2.0);
    double num_i = 0, den_i = 0, num_q = 0, den_q = 0;
    for (int bi = 0; bi < 2; ++bi) {
      for (int bq = 0; bq < 2; ++bq) {
        const cplx hyp(s * (1 - 2 * bi), s * (1 - 2 * bq));
        const double p = std::exp(-std::norm(x_tilde - mu * hyp) / eta2);
        (bi == 0 ? num_i : den_i) += p;
        (bq == 0 ? num_q : den_q) += p;
      }
    }
    const Eigen::Vector2d llr = soft_llr(x_tilde, mu, eta2, sx2);
    CHECK(std::abs(llr[0] - std::log(num_i / den_i)) < 1e-10);
    CHECK(std::abs(llr[1] - std::log(num_q / den_q)) < 1e-10);
  }

  Rng rng(14);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  for (int rep = 0; rep < 1000; ++rep) {
    const cplx x_tilde(unif(rng) * 2 - 1, unif(rng) * 2 - 1);
    const double mu = unif(rng);
    const double eta2 = unif(rng);
    const double sx2 = 0.5 + unif(rng);
    const Eigen::Vector2d llr = soft_llr(x_tilde, mu, eta2, sx2);

    // Gray QPSK closed form: llr = 4 mu sqrt(E/2) (Re, Im) / eta^2
    const double scale = 4.0 * mu * std::sqrt(sx2 / 2.0) / eta2;
    CHECK(llr[0] == doctest::Approx(scale * x_tilde.real()).epsilon(1e-9));
    CHECK(llr[1] == doctest::Approx(scale * x_tilde.imag()).epsilon(1e-9));

    // hard-decision consistency and odd symmetry
    CHECK((llr[0] < 0) == (x_tilde.real() < 0));
    const Eigen::Vector2d flipped = soft_llr(-x_tilde, mu, eta2, sx2);
    CHECK(flipped[0] == doctest::Approx(-llr[0]).epsilon(1e-12));
    CHECK(flipped[1] == doctest::Approx(-llr[1]).epsilon(1e-12));
  }
}

TEST_CASE("soft SIC: K=1 equals linear filter + soft_llr") {
  Rng rng(15);
  const CMat h = generate_channel(8, 1, rng);
  const double sn2 = 1.0;
  const CVec x = random_qpsk(1, RVec::Ones(1), rng);
  const CVec y = quantized_observation(h, x, sn2, rng);
  const DetectionOutput out = detect_sic_soft(y, h, 1.0, sn2);
  const LraMmseFilter f = build_lra_mmse(h, 1.0, sn2);
  const StreamStats stats = stream_statistics(f, 0);
  const Eigen::Vector2d expected =
      soft_llr((f.w.adjoint() * y)(0), stats.mu, stats.eta2, 1.0);
  CHECK(out.llrs(0, 0) ==
        doctest::Approx(std::clamp(expected[0], -kLlrClamp, kLlrClamp)));
  CHECK(out.llrs(0, 1) ==
        doctest::Approx(std::clamp(expected[1], -kLlrClamp, kLlrClamp)));
}

TEST_CASE("soft SIC LLRs flip sign with the observation") {
  Rng rng(16);
  const int users = 3;
  const CMat h = generate_channel(12, users, rng);
  const double sn2 = 0.7;
  const CVec x = random_qpsk(users, RVec::Ones(users), rng);
  const CVec y = quantized_observation(h, x, sn2, rng);
  const DetectionOutput a = detect_sic_soft(y, h, 1.0, sn2);
  const DetectionOutput b = detect_sic_soft(CVec(-y), h, 1.0, sn2);
  CHECK((a.llrs + b.llrs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("soft and hard SIC agree at high SNR") {
  Rng rng(17);
  const int antennas = 16, users = 2, frames = 5000;
  const double sn2 = noise_variance_for_snr_db(30.0, users, 1.0);
  const RVec energies = RVec::Ones(users);
  long agree = 0, total = 0;
  for (int f = 0; f < frames; ++f) {
    const CMat h = generate_channel(antennas, users, rng);
    const CVec x = random_qpsk(users, energies, rng);
    const CVec y = quantized_observation(h, x, sn2, rng);
    const BussgangModel model = build_bussgang_model(h, 1.0, sn2);
    const SicDetector sic(h, model, energies);
    const CVec hard = sic.detect_hard(y);
    const RMat llrs = sic.detect_soft(y);
    for (int k = 0; k < users; ++k) {
      const cplx from_llr(llrs(k, 0) < 0 ? -std::sqrt(0.5) : std::sqrt(0.5),
                          llrs(k, 1) < 0 ? -std::sqrt(0.5) : std::sqrt(0.5));
      agree += std::abs(from_llr - hard[k]) < 1e-12 ? 1 : 0;
      ++total;
    }
  }
  CHECK(static_cast<double>(agree) / total >= 0.999);
}

TEST_CASE("ML sandwich on M=4, K=2 at 10 dB") {
  Rng rng(18);
  const int antennas = 4, users = 2, frames = 3000;
  const double sn2 = noise_variance_for_snr_db(10.0, users, 1.0);
  const RVec energies = RVec::Ones(users);
  long err_ml = 0, err_sic = 0, err_mrc = 0;
  for (int f = 0; f < frames; ++f) {
    const CMat h = generate_channel(antennas, users, rng);
    const CVec x = random_qpsk(users, energies, rng);
    const CVec y = quantized_observation(h, x, sn2, rng);
    err_ml += count_symbol_errors(testsup::ml_oracle_1bit(y, h, 1.0, sn2), x);
    err_sic += count_symbol_errors(
        detect_sic_hard(y, h, 1.0, sn2).hard_symbols, x);
    err_mrc += count_symbol_errors(detect_mrc(y, h).hard_symbols, x);
  }
  CHECK(err_ml <= err_sic);
  CHECK(err_sic <= err_mrc);
}

TEST_CASE("uncoded BER ordering mrc >= zf >= lra-mmse >= sic-hard") {
  Rng rng(19);
  const int antennas = 32, users = 4, frames = 2000;
  const RVec energies = RVec::Ones(users);
  for (const double snr_db : {0.0, 5.0, 10.0}) {
    const double sn2 = noise_variance_for_snr_db(snr_db, users, 1.0);
    long err[4] = {0, 0, 0, 0};  // mrc, zf, mmse, sic
    const long bits = 2L * users * frames;
    for (int f = 0; f < frames; ++f) {
      const CMat h = generate_channel(antennas, users, rng);
      const CVec x = random_qpsk(users, energies, rng);
      const CVec y = quantized_observation(h, x, sn2, rng);
      const BussgangModel model = build_bussgang_model(h, 1.0, sn2);
      const LraMmseFilter filter = build_lra_mmse(h, model);
      const SicDetector sic(h, model, energies);
      const CVec lin = filter.w.adjoint() * y;
      CVec mmse_sliced(users);
      for (int k = 0; k < users; ++k) mmse_sliced[k] = qpsk_slice(lin[k], 1.0);
      const CVec outs[4] = {detect_mrc(y, h).hard_symbols,
                            detect_zf(y, h).hard_symbols, mmse_sliced,
                            sic.detect_hard(y)};
      for (int d = 0; d < 4; ++d) {
        for (int k = 0; k < users; ++k) {
          if ((outs[d][k].real() < 0) != (x[k].real() < 0)) ++err[d];
          if ((outs[d][k].imag() < 0) != (x[k].imag() < 0)) ++err[d];
        }
      }
    }
    const auto slack = [&](long a, long b) {
      const double pa = static_cast<double>(a) / bits;
      const double pb = static_cast<double>(b) / bits;
      return 2.0 * std::sqrt((pa * (1 - pa) + pb * (1 - pb)) /
                             static_cast<double>(bits));
    };
    const double ber[4] = {
        static_cast<double>(err[0]) / bits, static_cast<double>(err[1]) / bits,
        static_cast<double>(err[2]) / bits, static_cast<double>(err[3]) / bits};
    CHECK(ber[1] <= ber[0] + slack(err[1], err[0]));  // zf <= mrc
    CHECK(ber[2] <= ber[1] + slack(err[2], err[1]));  // mmse <= zf
    CHECK(ber[3] <= ber[2] + slack(err[3], err[2]));  // sic <= mmse
  }
}
