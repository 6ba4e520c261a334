#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "onebit/channel.hpp"
#include "onebit/ldpc.hpp"

namespace onebit {

inline constexpr const char* kArtifactVersion = "0.1.0";
// Conventions echoed into every JSON result file.
inline constexpr const char* kSnrDefinition =
    "snr = symbol_energy * K / noise_variance per receive antenna, "
    "unit-variance channel entries";
inline constexpr const char* kEbn0Definition = "ebn0 = snr / (2 * code_rate)";

enum class EstimatorKind { kPerfectCsi, kLs, kBlmmse, kLraRls };
enum class DetectorKind { kMrc, kZf, kLraMmse, kSicHard, kSicSoft };
enum class SweepMetric { kNmse, kBer };

std::string to_string(EstimatorKind kind);
std::string to_string(DetectorKind kind);
EstimatorKind estimator_from_string(const std::string& name);
DetectorKind detector_from_string(const std::string& name);

/// Per-SNR RLS regularization. "auto" matches the ridge to the residual
/// variance of the equivalent linear pilot model; "log-linear" interpolates
/// fixed endpoints across the sweep; "explicit" pins values per point.
struct DeltaSchedule {
  enum class Mode { kAuto, kLogLinear, kExplicit };
  Mode mode = Mode::kAuto;
  double log_lo = 1e-11;
  double log_hi = 3e-1;
  std::vector<double> values;
};

struct RlsConfig {
  double lambda = 0.94;
  DeltaSchedule delta;
};

struct ExperimentSpec {
  int antennas = 32;
  int users = 4;
  int pilot_len = 16;
  int data_len = 8;
  double symbol_energy = 1.0;
  std::vector<double> sweep_db;  // SNR dB, or Eb/N0 dB in coded mode
  SweepMetric metric = SweepMetric::kBer;
  EstimatorKind estimator = EstimatorKind::kPerfectCsi;
  DetectorKind detector = DetectorKind::kLraMmse;
  bool coded = false;
  int trials = 100;
  RlsConfig rls;
  double near_far_db = 0.0;  // > 0 boosts user 0 by this many dB
  std::uint64_t base_seed = 1;
  PilotMode pilot_mode = PilotMode::kOrthogonal;
  bool bypass_quantizer = false;
  int ldpc_block_len = 512;
  double ldpc_rate = 0.5;
  int ldpc_col_weight = 3;
  std::uint64_t ldpc_seed = 0x5eed;
  int spa_max_iter = 50;
  int workers = 0;  // 0 = hardware concurrency

  void validate() const;
  RVec energies() const;
  /// Payload symbols per frame (codeword length / 2 in coded mode).
  int effective_data_len() const;
  double noise_variance_at(double point_db) const;
  double delta_at(int point_index) const;
};

struct CurveRecord {
  double point_db = 0.0;
  std::string metric;
  double value = 0.0;
  double stderr_value = 0.0;
  long trials = 0;
  std::string estimator;
  std::string detector;
  int antennas = 0;
  int users = 0;
  int pilot_len = 0;
  bool coded = false;
  double near_far_db = 0.0;
  int user_index = -1;  // -1 = aggregate
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;  // not part of the CSV schema
};

std::vector<CurveRecord> run_point(const ExperimentSpec& spec,
                                   int point_index);
std::vector<CurveRecord> run_sweep(const ExperimentSpec& spec);

std::string csv_header();
void write_csv(const std::vector<CurveRecord>& records,
               const std::string& path);
std::vector<CurveRecord> read_csv(const std::string& path);
void write_json(const std::vector<CurveRecord>& records,
                const ExperimentSpec& spec, const std::string& path);

nlohmann::json spec_to_json(const ExperimentSpec& spec);
/// Strict parse: unknown keys are rejected.
ExperimentSpec spec_from_json(const nlohmann::json& config);

}  // namespace onebit
