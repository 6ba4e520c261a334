#include "onebit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "onebit/detectors.hpp"
#include "onebit/estimators.hpp"

namespace onebit {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kPerfectCsi: return "perfect-csi";
    case EstimatorKind::kLs: return "ls";
    case EstimatorKind::kBlmmse: return "blmmse";
    case EstimatorKind::kLraRls: return "lra-rls";
  }
  return "?";
}

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kMrc: return "mrc";
    case DetectorKind::kZf: return "zf";
    case DetectorKind::kLraMmse: return "lra-mmse";
    case DetectorKind::kSicHard: return "sic-hard";
    case DetectorKind::kSicSoft: return "sic-soft";
  }
  return "?";
}

EstimatorKind estimator_from_string(const std::string& name) {
  if (name == "perfect-csi") return EstimatorKind::kPerfectCsi;
  if (name == "ls") return EstimatorKind::kLs;
  if (name == "blmmse") return EstimatorKind::kBlmmse;
  if (name == "lra-rls") return EstimatorKind::kLraRls;
  throw ConfigError("unknown estimator: " + name);
}

DetectorKind detector_from_string(const std::string& name) {
  if (name == "mrc") return DetectorKind::kMrc;
  if (name == "zf") return DetectorKind::kZf;
  if (name == "lra-mmse") return DetectorKind::kLraMmse;
  if (name == "sic-hard") return DetectorKind::kSicHard;
  if (name == "sic-soft") return DetectorKind::kSicSoft;
  throw ConfigError("unknown detector: " + name);
}

void ExperimentSpec::validate() const {
  if (sweep_db.empty()) throw ConfigError("sweep must not be empty");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (users < 1 || antennas < users) throw ConfigError("need M >= K >= 1");
  if (pilot_len < 1) throw ConfigError("pilot length must be >= 1");
  if (!(symbol_energy > 0.0)) throw ConfigError("symbol energy must be > 0");
  if (near_far_db < 0.0) throw ConfigError("near_far_db must be >= 0");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (!(rls.lambda > 0.0) || rls.lambda > 1.0) {
    throw ConfigError("rls lambda must be in (0, 1]");
  }
  if (rls.delta.mode == DeltaSchedule::Mode::kExplicit) {
    if (rls.delta.values.size() != 1 &&
        rls.delta.values.size() != sweep_db.size()) {
      throw ConfigError("explicit delta schedule must match sweep length");
    }
    for (const double d : rls.delta.values) {
      if (!(d > 0.0)) throw ConfigError("delta values must be > 0");
    }
  }
  if (pilot_mode == PilotMode::kOrthogonal) {
    const bool pow2 = pilot_len > 0 && (pilot_len & (pilot_len - 1)) == 0;
    if (pilot_len < users || !pow2) {
      throw ConfigError(
          "orthogonal pilots need tau >= K and tau a power of two");
    }
  }
  if (metric == SweepMetric::kNmse) {
    if (estimator == EstimatorKind::kPerfectCsi) {
      throw ConfigError("nmse sweep needs an actual estimator");
    }
    if (coded) throw ConfigError("nmse sweep cannot be coded");
  } else {
    if (!coded && data_len < 1) {
      throw ConfigError("data_len must be >= 1 for BER sweeps");
    }
  }
  if (coded) {
    if (detector != DetectorKind::kLraMmse &&
        detector != DetectorKind::kSicSoft) {
      throw ConfigError("coded mode needs a soft-output detector "
                        "(lra-mmse or sic-soft)");
    }
    if (ldpc_block_len % 2 != 0) {
      throw ConfigError("LDPC block length must be even for QPSK packing");
    }
    if (spa_max_iter < 1) throw ConfigError("spa_max_iter must be >= 1");
  }
}

RVec ExperimentSpec::energies() const {
  RVec e = RVec::Constant(users, symbol_energy);
  if (near_far_db > 0.0) {
    e[0] = symbol_energy * std::pow(10.0, near_far_db / 10.0);
  }
  return e;
}

int ExperimentSpec::effective_data_len() const {
  return coded ? ldpc_block_len / 2 : data_len;
}

double ExperimentSpec::noise_variance_at(double point_db) const {
  const double snr_db =
      coded ? snr_db_for_ebn0_db(point_db, ldpc_rate) : point_db;
  return noise_variance_for_snr_db(snr_db, users, symbol_energy);
}

double ExperimentSpec::delta_at(int point_index) const {
  const double point = sweep_db.at(point_index);
  switch (rls.delta.mode) {
    case DeltaSchedule::Mode::kExplicit:
      return rls.delta.values.size() == 1 ? rls.delta.values[0]
                                          : rls.delta.values.at(point_index);
    case DeltaSchedule::Mode::kLogLinear: {
      const auto [lo_it, hi_it] =
          std::minmax_element(sweep_db.begin(), sweep_db.end());
      if (*hi_it == *lo_it) return rls.delta.log_lo;
      const double t = (point - *lo_it) / (*hi_it - *lo_it);
      return std::pow(10.0, std::log10(rls.delta.log_lo) +
                                t * (std::log10(rls.delta.log_hi) -
                                     std::log10(rls.delta.log_lo)));
    }
    case DeltaSchedule::Mode::kAuto:
    default:
      return rls_matched_delta(noise_variance_at(point), energies().sum(),
                               rls.lambda, pilot_len);
  }
}

namespace {

struct PointShared {
  double noise_variance = 0.0;
  double delta = 0.0;
  RVec user_energy;
  std::shared_ptr<const BlmmseEstimator> blmmse;  // cached when pilots fixed
  std::shared_ptr<const LdpcCode> code;
};

struct TrialCounts {
  double nmse_value = 0.0;
  std::vector<std::uint64_t> errors;  // per user
  std::uint64_t bits_per_user = 0;
};

FrameConfig frame_config_for(const ExperimentSpec& spec,
                             const PointShared& shared) {
  FrameConfig fc;
  fc.antennas = spec.antennas;
  fc.users = spec.users;
  fc.pilot_len = spec.pilot_len;
  // NMSE sweeps never touch the payload block.
  fc.data_len =
      spec.metric == SweepMetric::kNmse ? 0 : spec.effective_data_len();
  fc.symbol_energy = spec.symbol_energy;
  fc.noise_variance = shared.noise_variance;
  if (spec.near_far_db > 0.0) fc.per_user_energy = shared.user_energy;
  fc.pilot_mode = spec.pilot_mode;
  fc.bypass_quantizer = spec.bypass_quantizer;
  return fc;
}

// Coded frames carry one LDPC codeword per user; everything else matches
// transmit(). Fills info_bits with the transmitted message per user.
UplinkFrame transmit_coded(const FrameConfig& config, const LdpcCode& code,
                           std::vector<BitVec>& info_bits, Rng& rng) {
  config.validate();
  const RVec energy = config.energies();
  UplinkFrame frame;
  frame.H = generate_channel(config.antennas, config.users, rng);
  frame.X_p = generate_pilots(config.users, config.pilot_len,
                              config.symbol_energy, config.pilot_mode, rng);
  for (int u = 0; u < config.users; ++u) {
    const double scale = std::sqrt(energy[u] / config.symbol_energy);
    if (scale != 1.0) frame.X_p.row(u) *= scale;
  }
  info_bits.resize(config.users);
  frame.payload_bits.resize(config.users);
  frame.X_d.resize(config.users, config.data_len);
  std::uniform_int_distribution<int> bit(0, 1);
  for (int u = 0; u < config.users; ++u) {
    BitVec& info = info_bits[u];
    info.resize(code.info_len);
    for (auto& b : info) b = static_cast<std::uint8_t>(bit(rng));
    frame.payload_bits[u] = code.encode(info);
    frame.X_d.row(u) =
        qpsk_modulate(frame.payload_bits[u], energy[u]).transpose();
  }
  const CMat noise_p = complex_gaussian(config.antennas, config.pilot_len,
                                        config.noise_variance, rng);
  const CMat y_pilot = frame.H * frame.X_p + noise_p;
  const CMat noise_d = complex_gaussian(config.antennas, config.data_len,
                                        config.noise_variance, rng);
  const CMat y_data = frame.H * frame.X_d + noise_d;
  if (config.bypass_quantizer) {
    frame.Y_q_pilot = y_pilot;
    frame.Y_q_data = y_data;
  } else {
    frame.Y_q_pilot = quantize_1bit(y_pilot);
    frame.Y_q_data = quantize_1bit(y_data);
  }
  return frame;
}

CMat estimate_channel(const ExperimentSpec& spec, const PointShared& shared,
                      const UplinkFrame& frame) {
  switch (spec.estimator) {
    case EstimatorKind::kPerfectCsi:
      return frame.H;
    case EstimatorKind::kLs:
      return estimate_ls(frame.Y_q_pilot, frame.X_p);
    case EstimatorKind::kBlmmse:
      if (shared.blmmse) return shared.blmmse->estimate(frame.Y_q_pilot);
      return estimate_blmmse(frame.Y_q_pilot, frame.X_p,
                             shared.noise_variance);
    case EstimatorKind::kLraRls:
      return lra_rls_estimate(frame.Y_q_pilot, frame.X_p,
                              shared.noise_variance, spec.rls.lambda,
                              shared.delta)
          .h_hat;
  }
  throw ConfigError("unknown estimator kind");
}

BussgangModel detector_model(const ExperimentSpec& spec,
                             const PointShared& shared, const CMat& h_used) {
  const RVec* pue = spec.near_far_db > 0.0 ? &shared.user_energy : nullptr;
  if (spec.bypass_quantizer) {
    return unquantized_model(h_used, spec.symbol_energy,
                             shared.noise_variance, pue);
  }
  return build_bussgang_model(h_used, spec.symbol_energy,
                              shared.noise_variance, pue);
}

TrialCounts run_uncoded_trial(const ExperimentSpec& spec,
                              const PointShared& shared, int point_index,
                              int trial) {
  Rng rng(derive_seed(spec.base_seed, static_cast<std::uint64_t>(point_index),
                      static_cast<std::uint64_t>(trial)));
  const UplinkFrame frame = transmit(frame_config_for(spec, shared), rng);
  const CMat h_used = estimate_channel(spec, shared, frame);

  TrialCounts counts;
  counts.errors.assign(spec.users, 0);
  counts.bits_per_user = 2ULL * static_cast<std::uint64_t>(spec.data_len);

  const RVec* pue = spec.near_far_db > 0.0 ? &shared.user_energy : nullptr;

  // Per-frame detector state reused across data columns.
  CMat zf_pinv;
  RVec mrc_norms;
  std::unique_ptr<LraMmseFilter> mmse;
  std::unique_ptr<SicDetector> sic;
  switch (spec.detector) {
    case DetectorKind::kMrc: {
      mrc_norms.resize(spec.users);
      for (int k = 0; k < spec.users; ++k) {
        mrc_norms[k] = h_used.col(k).squaredNorm();
        if (!(mrc_norms[k] > 0.0)) {
          throw DegenerateCovarianceError("mrc: zero channel column");
        }
      }
      break;
    }
    case DetectorKind::kZf: {
      const CMat gram = h_used.adjoint() * h_used;
      Eigen::FullPivLU<CMat> lu(gram);
      if (!lu.isInvertible()) {
        throw DegenerateCovarianceError("zf: rank-deficient channel");
      }
      zf_pinv = lu.solve(h_used.adjoint());
      break;
    }
    case DetectorKind::kLraMmse: {
      mmse = std::make_unique<LraMmseFilter>(
          build_lra_mmse(h_used, detector_model(spec, shared, h_used), pue));
      break;
    }
    case DetectorKind::kSicHard:
    case DetectorKind::kSicSoft: {
      sic = std::make_unique<SicDetector>(
          h_used, detector_model(spec, shared, h_used), shared.user_energy);
      break;
    }
  }

  CVec sliced(spec.users);
  for (int t = 0; t < spec.data_len; ++t) {
    const CVec y = frame.Y_q_data.col(t);
    switch (spec.detector) {
      case DetectorKind::kMrc:
        for (int k = 0; k < spec.users; ++k) {
          sliced[k] = qpsk_slice(h_used.col(k).dot(y) / mrc_norms[k],
                                 shared.user_energy[k]);
        }
        break;
      case DetectorKind::kZf: {
        const CVec x = zf_pinv * y;
        for (int k = 0; k < spec.users; ++k) {
          sliced[k] = qpsk_slice(x[k], shared.user_energy[k]);
        }
        break;
      }
      case DetectorKind::kLraMmse: {
        const CVec x = mmse->w.adjoint() * y;
        for (int k = 0; k < spec.users; ++k) {
          sliced[k] = qpsk_slice(x[k], shared.user_energy[k]);
        }
        break;
      }
      case DetectorKind::kSicHard:
        sliced = sic->detect_hard(y);
        break;
      case DetectorKind::kSicSoft: {
        const RMat llrs = sic->detect_soft(y);
        for (int k = 0; k < spec.users; ++k) {
          const double s = std::sqrt(shared.user_energy[k] / 2.0);
          sliced[k] = cplx(llrs(k, 0) < 0.0 ? -s : s,
                           llrs(k, 1) < 0.0 ? -s : s);
        }
        break;
      }
    }
    for (int k = 0; k < spec.users; ++k) {
      const auto& bits = frame.payload_bits[k];
      const std::uint8_t bit_i = sliced[k].real() < 0.0 ? 1 : 0;
      const std::uint8_t bit_q = sliced[k].imag() < 0.0 ? 1 : 0;
      if (bit_i != bits[2 * t]) counts.errors[k] += 1;
      if (bit_q != bits[2 * t + 1]) counts.errors[k] += 1;
    }
  }
  return counts;
}

TrialCounts run_coded_trial(const ExperimentSpec& spec,
                            const PointShared& shared, int point_index,
                            int trial) {
  Rng rng(derive_seed(spec.base_seed, static_cast<std::uint64_t>(point_index),
                      static_cast<std::uint64_t>(trial)));
  const LdpcCode& code = *shared.code;
  std::vector<BitVec> info_bits;
  const UplinkFrame frame =
      transmit_coded(frame_config_for(spec, shared), code, info_bits, rng);
  const CMat h_used = estimate_channel(spec, shared, frame);
  const RVec* pue = spec.near_far_db > 0.0 ? &shared.user_energy : nullptr;
  const int symbols = spec.effective_data_len();

  // K LLR streams, 2 bits per symbol.
  std::vector<std::vector<double>> llr(
      spec.users, std::vector<double>(code.block_len, 0.0));
  if (spec.detector == DetectorKind::kLraMmse) {
    const LraMmseFilter filter =
        build_lra_mmse(h_used, detector_model(spec, shared, h_used), pue);
    std::vector<StreamStats> stats(spec.users);
    for (int k = 0; k < spec.users; ++k) {
      stats[k] = stream_statistics(filter, k);
      stats[k].eta2 = std::max(stats[k].eta2, 1e-30);
    }
    for (int t = 0; t < symbols; ++t) {
      const CVec x = filter.w.adjoint() * frame.Y_q_data.col(t);
      for (int k = 0; k < spec.users; ++k) {
        const Eigen::Vector2d l = soft_llr(x[k], stats[k].mu, stats[k].eta2,
                                           shared.user_energy[k]);
        llr[k][2 * t] = std::clamp(l[0], -kLlrClamp, kLlrClamp);
        llr[k][2 * t + 1] = std::clamp(l[1], -kLlrClamp, kLlrClamp);
      }
    }
  } else {
    const SicDetector sic(h_used, detector_model(spec, shared, h_used),
                          shared.user_energy);
    for (int t = 0; t < symbols; ++t) {
      const RMat l = sic.detect_soft(frame.Y_q_data.col(t));
      for (int k = 0; k < spec.users; ++k) {
        llr[k][2 * t] = l(k, 0);
        llr[k][2 * t + 1] = l(k, 1);
      }
    }
  }

  TrialCounts counts;
  counts.errors.assign(spec.users, 0);
  counts.bits_per_user = static_cast<std::uint64_t>(code.info_len);
  for (int k = 0; k < spec.users; ++k) {
    const DecodeResult decoded = decode_spa(code, llr[k], spec.spa_max_iter);
    for (int j = 0; j < code.info_len; ++j) {
      counts.errors[k] +=
          decoded.bits[code.info_cols[j]] != info_bits[k][j] ? 1 : 0;
    }
  }
  return counts;
}

TrialCounts run_nmse_trial(const ExperimentSpec& spec,
                           const PointShared& shared, int point_index,
                           int trial) {
  Rng rng(derive_seed(spec.base_seed, static_cast<std::uint64_t>(point_index),
                      static_cast<std::uint64_t>(trial)));
  const UplinkFrame frame = transmit(frame_config_for(spec, shared), rng);
  const CMat h_hat = estimate_channel(spec, shared, frame);
  TrialCounts counts;
  counts.nmse_value = nmse(h_hat, frame.H);
  return counts;
}

double binomial_stderr(double p, double n_bits) {
  if (n_bits <= 0.0) return 0.0;
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / n_bits);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<CurveRecord> run_point(const ExperimentSpec& spec,
                                   int point_index) {
  spec.validate();
  const double point_db = spec.sweep_db.at(point_index);
  const auto start = std::chrono::steady_clock::now();

  PointShared shared;
  shared.noise_variance = spec.noise_variance_at(point_db);
  shared.user_energy = spec.energies();
  if (spec.estimator == EstimatorKind::kLraRls) {
    shared.delta = spec.delta_at(point_index);
  }
  if (spec.estimator == EstimatorKind::kBlmmse &&
      spec.pilot_mode == PilotMode::kOrthogonal) {
    // Orthogonal pilots are deterministic: one filter serves every trial.
    Rng dummy(0);
    CMat x_p = generate_pilots(spec.users, spec.pilot_len, spec.symbol_energy,
                               spec.pilot_mode, dummy);
    for (int u = 0; u < spec.users; ++u) {
      const double scale =
          std::sqrt(shared.user_energy[u] / spec.symbol_energy);
      if (scale != 1.0) x_p.row(u) *= scale;
    }
    shared.blmmse = std::make_shared<BlmmseEstimator>(
        x_p, shared.noise_variance, spec.antennas);
  }
  if (spec.coded) {
    shared.code = std::make_shared<LdpcCode>(
        build_code(spec.ldpc_block_len, spec.ldpc_rate, spec.ldpc_col_weight,
                   spec.ldpc_seed));
  }

  std::vector<TrialCounts> results(spec.trials);
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::string error_message;

  const auto worker = [&]() {
    while (!failed.load(std::memory_order_relaxed)) {
      const int t = next.fetch_add(1);
      if (t >= spec.trials) break;
      try {
        if (spec.metric == SweepMetric::kNmse) {
          results[t] = run_nmse_trial(spec, shared, point_index, t);
        } else if (spec.coded) {
          results[t] = run_coded_trial(spec, shared, point_index, t);
        } else {
          results[t] = run_uncoded_trial(spec, shared, point_index, t);
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (error_message.empty()) {
          error_message = "trial " + std::to_string(t) + " at point " +
                          std::to_string(point_db) + " dB: " + e.what();
        }
        failed.store(true);
        break;
      }
    }
  };
  int n_workers = spec.workers > 0
                      ? spec.workers
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_workers = std::max(1, std::min(n_workers, spec.trials));
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failed.load()) {
    throw NumericalError("run_point failed: " + error_message);
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  CurveRecord base;
  base.point_db = point_db;
  base.trials = spec.trials;
  base.estimator = to_string(spec.estimator);
  base.detector =
      spec.metric == SweepMetric::kNmse ? "-" : to_string(spec.detector);
  base.antennas = spec.antennas;
  base.users = spec.users;
  base.pilot_len = spec.pilot_len;
  base.coded = spec.coded;
  base.near_far_db = spec.near_far_db;
  base.seed = spec.base_seed;
  base.wall_seconds = wall;

  std::vector<CurveRecord> records;
  if (spec.metric == SweepMetric::kNmse) {
    double mean = 0.0;
    for (const auto& r : results) mean += r.nmse_value;
    mean /= spec.trials;
    double var = 0.0;
    for (const auto& r : results) {
      var += (r.nmse_value - mean) * (r.nmse_value - mean);
    }
    var = spec.trials > 1 ? var / (spec.trials - 1) : 0.0;
    CurveRecord rec = base;
    rec.metric = "nmse";
    rec.value = mean;
    rec.stderr_value = std::sqrt(var / spec.trials);
    records.push_back(std::move(rec));
    return records;
  }

  std::vector<std::uint64_t> errors(spec.users, 0);
  std::uint64_t bits_per_user = 0;
  for (const auto& r : results) {
    for (int k = 0; k < spec.users; ++k) errors[k] += r.errors[k];
    bits_per_user += r.bits_per_user;
  }
  std::uint64_t total_errors = 0;
  for (const auto e : errors) total_errors += e;
  const double total_bits =
      static_cast<double>(bits_per_user) * spec.users;

  CurveRecord rec = base;
  rec.metric = spec.coded ? "ber_coded" : "ber_uncoded";
  rec.value = static_cast<double>(total_errors) / total_bits;
  rec.stderr_value = binomial_stderr(rec.value, total_bits);
  records.push_back(rec);

  if (spec.near_far_db > 0.0) {
    for (int k = 0; k < spec.users; ++k) {
      CurveRecord per_user = base;
      per_user.metric = "ber_per_user";
      per_user.user_index = k;
      per_user.value = static_cast<double>(errors[k]) /
                       static_cast<double>(bits_per_user);
      per_user.stderr_value =
          binomial_stderr(per_user.value, static_cast<double>(bits_per_user));
      records.push_back(std::move(per_user));
    }
  }
  return records;
}

std::vector<CurveRecord> run_sweep(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<CurveRecord> records;
  for (std::size_t i = 0; i < spec.sweep_db.size(); ++i) {
    auto point_records = run_point(spec, static_cast<int>(i));
    records.insert(records.end(), point_records.begin(), point_records.end());
  }
  return records;
}

std::string csv_header() {
  return "point_db,metric,value,stderr,trials,estimator,detector,M,K,tau,"
         "coded,near_far_db,user_index,seed";
}

namespace {

std::string record_to_csv(const CurveRecord& r) {
  std::ostringstream line;
  line << format_double(r.point_db) << ',' << r.metric << ','
       << format_double(r.value) << ',' << format_double(r.stderr_value) << ','
       << r.trials << ',' << r.estimator << ',' << r.detector << ','
       << r.antennas << ',' << r.users << ',' << r.pilot_len << ','
       << (r.coded ? 1 : 0) << ',' << format_double(r.near_far_db) << ','
       << r.user_index << ',' << r.seed;
  return line.str();
}

}  // namespace

void write_csv(const std::vector<CurveRecord>& records,
               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_csv: cannot open " + path);
  out << csv_header() << '\n';
  for (const auto& r : records) out << record_to_csv(r) << '\n';
  if (!out) throw IoError("write_csv: write failed for " + path);
}

std::vector<CurveRecord> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) {
    throw IoError("read_csv: unexpected header in " + path);
  }
  std::vector<CurveRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 14) {
      throw IoError("read_csv: malformed row in " + path);
    }
    CurveRecord r;
    r.point_db = std::stod(fields[0]);
    r.metric = fields[1];
    r.value = std::stod(fields[2]);
    r.stderr_value = std::stod(fields[3]);
    r.trials = std::stol(fields[4]);
    r.estimator = fields[5];
    r.detector = fields[6];
    r.antennas = std::stoi(fields[7]);
    r.users = std::stoi(fields[8]);
    r.pilot_len = std::stoi(fields[9]);
    r.coded = fields[10] == "1";
    r.near_far_db = std::stod(fields[11]);
    r.user_index = std::stoi(fields[12]);
    r.seed = std::stoull(fields[13]);
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

nlohmann::json record_to_json(const CurveRecord& r) {
  return nlohmann::json{{"point_db", r.point_db},
                        {"metric", r.metric},
                        {"value", r.value},
                        {"stderr", r.stderr_value},
                        {"trials", r.trials},
                        {"estimator", r.estimator},
                        {"detector", r.detector},
                        {"M", r.antennas},
                        {"K", r.users},
                        {"tau", r.pilot_len},
                        {"coded", r.coded},
                        {"near_far_db", r.near_far_db},
                        {"user_index", r.user_index},
                        {"seed", r.seed},
                        {"wall_seconds", r.wall_seconds}};
}

}  // namespace

void write_json(const std::vector<CurveRecord>& records,
                const ExperimentSpec& spec, const std::string& path) {
  nlohmann::json doc;
  doc["artifact_version"] = kArtifactVersion;
  doc["snr_definition"] = kSnrDefinition;
  doc["ebn0_definition"] = kEbn0Definition;
  doc["llr_clamp"] = kLlrClamp;
  doc["spec"] = spec_to_json(spec);
  doc["records"] = nlohmann::json::array();
  for (const auto& r : records) doc["records"].push_back(record_to_json(r));
  std::ofstream out(path);
  if (!out) throw IoError("write_json: cannot open " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write_json: write failed for " + path);
}

nlohmann::json spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json rls{{"lambda", spec.rls.lambda}};
  switch (spec.rls.delta.mode) {
    case DeltaSchedule::Mode::kAuto:
      rls["delta"] = {{"mode", "auto"}};
      break;
    case DeltaSchedule::Mode::kLogLinear:
      rls["delta"] = {{"mode", "log-linear"},
                      {"lo", spec.rls.delta.log_lo},
                      {"hi", spec.rls.delta.log_hi}};
      break;
    case DeltaSchedule::Mode::kExplicit:
      rls["delta"] = {{"mode", "explicit"}, {"values", spec.rls.delta.values}};
      break;
  }
  return nlohmann::json{
      {"antennas", spec.antennas},
      {"users", spec.users},
      {"pilot_len", spec.pilot_len},
      {"data_len", spec.data_len},
      {"symbol_energy", spec.symbol_energy},
      {"sweep_db", spec.sweep_db},
      {"metric", spec.metric == SweepMetric::kNmse ? "nmse" : "ber"},
      {"estimator", to_string(spec.estimator)},
      {"detector", to_string(spec.detector)},
      {"coded", spec.coded},
      {"trials", spec.trials},
      {"rls", rls},
      {"near_far_db", spec.near_far_db},
      {"base_seed", spec.base_seed},
      {"pilot_mode",
       spec.pilot_mode == PilotMode::kOrthogonal ? "orthogonal" : "random"},
      {"bypass_quantizer", spec.bypass_quantizer},
      {"ldpc",
       {{"block_len", spec.ldpc_block_len},
        {"rate", spec.ldpc_rate},
        {"col_weight", spec.ldpc_col_weight},
        {"seed", spec.ldpc_seed},
        {"max_iter", spec.spa_max_iter}}},
      {"workers", spec.workers}};
}

namespace {

void reject_unknown_keys(const nlohmann::json& obj,
                         const std::vector<std::string>& allowed,
                         const std::string& scope) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown config key: " + scope + key);
    }
  }
}

DeltaSchedule delta_from_json(const nlohmann::json& j) {
  DeltaSchedule delta;
  if (j.is_number()) {
    delta.mode = DeltaSchedule::Mode::kExplicit;
    delta.values = {j.get<double>()};
    return delta;
  }
  if (!j.is_object()) {
    throw ConfigError("rls.delta must be a number or an object");
  }
  reject_unknown_keys(j, {"mode", "lo", "hi", "values"}, "rls.delta.");
  const std::string mode = j.value("mode", "auto");
  if (mode == "auto") {
    delta.mode = DeltaSchedule::Mode::kAuto;
  } else if (mode == "log-linear") {
    delta.mode = DeltaSchedule::Mode::kLogLinear;
    delta.log_lo = j.value("lo", delta.log_lo);
    delta.log_hi = j.value("hi", delta.log_hi);
  } else if (mode == "explicit") {
    delta.mode = DeltaSchedule::Mode::kExplicit;
    if (!j.contains("values")) {
      throw ConfigError("explicit delta schedule needs values");
    }
    delta.values = j.at("values").get<std::vector<double>>();
  } else {
    throw ConfigError("unknown delta mode: " + mode);
  }
  return delta;
}

}  // namespace

ExperimentSpec spec_from_json(const nlohmann::json& config) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown_keys(
      config,
      {"antennas", "users", "pilot_len", "data_len", "symbol_energy",
       "sweep_db", "metric", "estimator", "detector", "estimators",
       "detectors", "coded", "trials", "rls", "near_far_db", "base_seed",
       "pilot_mode", "bypass_quantizer", "ldpc", "workers"},
      "");
  if (config.contains("estimators") || config.contains("detectors")) {
    throw ConfigError(
        "estimators/detectors lists are expanded by the CLI; use the "
        "singular keys here");
  }
  ExperimentSpec spec;
  spec.antennas = config.value("antennas", spec.antennas);
  spec.users = config.value("users", spec.users);
  spec.pilot_len = config.value("pilot_len", spec.pilot_len);
  spec.data_len = config.value("data_len", spec.data_len);
  spec.symbol_energy = config.value("symbol_energy", spec.symbol_energy);
  if (config.contains("sweep_db")) {
    spec.sweep_db = config.at("sweep_db").get<std::vector<double>>();
  }
  if (config.contains("metric")) {
    const std::string metric = config.at("metric").get<std::string>();
    if (metric == "nmse") {
      spec.metric = SweepMetric::kNmse;
    } else if (metric == "ber") {
      spec.metric = SweepMetric::kBer;
    } else {
      throw ConfigError("unknown metric: " + metric);
    }
  }
  if (config.contains("estimator")) {
    spec.estimator =
        estimator_from_string(config.at("estimator").get<std::string>());
  }
  if (config.contains("detector")) {
    spec.detector =
        detector_from_string(config.at("detector").get<std::string>());
  }
  spec.coded = config.value("coded", spec.coded);
  spec.trials = config.value("trials", spec.trials);
  if (config.contains("rls")) {
    const auto& rls = config.at("rls");
    reject_unknown_keys(rls, {"lambda", "delta"}, "rls.");
    spec.rls.lambda = rls.value("lambda", spec.rls.lambda);
    if (rls.contains("delta")) {
      spec.rls.delta = delta_from_json(rls.at("delta"));
    }
  }
  spec.near_far_db = config.value("near_far_db", spec.near_far_db);
  spec.base_seed = config.value("base_seed", spec.base_seed);
  if (config.contains("pilot_mode")) {
    const std::string mode = config.at("pilot_mode").get<std::string>();
    if (mode == "orthogonal") {
      spec.pilot_mode = PilotMode::kOrthogonal;
    } else if (mode == "random") {
      spec.pilot_mode = PilotMode::kRandom;
    } else {
      throw ConfigError("unknown pilot mode: " + mode);
    }
  }
  spec.bypass_quantizer =
      config.value("bypass_quantizer", spec.bypass_quantizer);
  if (config.contains("ldpc")) {
    const auto& ldpc = config.at("ldpc");
    reject_unknown_keys(ldpc, {"block_len", "rate", "col_weight", "seed",
                               "max_iter"},
                        "ldpc.");
    spec.ldpc_block_len = ldpc.value("block_len", spec.ldpc_block_len);
    spec.ldpc_rate = ldpc.value("rate", spec.ldpc_rate);
    spec.ldpc_col_weight = ldpc.value("col_weight", spec.ldpc_col_weight);
    spec.ldpc_seed = ldpc.value("seed", spec.ldpc_seed);
    spec.spa_max_iter = ldpc.value("max_iter", spec.spa_max_iter);
  }
  spec.workers = config.value("workers", spec.workers);
  return spec;
}

}  // namespace onebit
