#pragma once

#include <optional>

#include "onebit/common.hpp"

namespace onebit {

enum class PilotMode { kOrthogonal, kRandom };

/// One block-fading uplink frame: K users, M antennas, tau pilot symbols
/// followed by data_len payload symbols per user.
struct FrameConfig {
  int antennas = 0;    // M
  int users = 0;       // K
  int pilot_len = 0;   // tau
  int data_len = 0;
  double symbol_energy = 1.0;
  double noise_variance = 1.0;
  RVec per_user_energy;  // empty -> uniform symbol_energy
  std::uint64_t seed = 1;
  PilotMode pilot_mode = PilotMode::kOrthogonal;
  bool bypass_quantizer = false;  // diagnostic mode: keep Y unquantized

  void validate() const;
  /// Resolved K-vector of per-user symbol energies.
  RVec energies() const;
};

struct UplinkFrame {
  CMat H;          // M x K
  CMat X_p;        // K x tau pilots
  CMat X_d;        // K x data_len payload symbols
  CMat Y_q_pilot;  // M x tau quantized receive block
  CMat Y_q_data;   // M x data_len
  std::vector<BitVec> payload_bits;  // per user, 2*data_len bits
};

/// i.i.d. CN(0,1) Rayleigh block-fading channel.
CMat generate_channel(int antennas, int users, Rng& rng);

/// Gray-mapped QPSK, 2 bits/symbol, bit pair (b_I, b_Q) ->
/// sqrt(E/2) * ((1-2 b_I) + j (1-2 b_Q)).
CVec qpsk_modulate(const BitVec& bits, double symbol_energy);
BitVec qpsk_hard_demap(const CVec& symbols);

/// Nearest QPSK constellation point (sign slicing).
inline cplx qpsk_slice(cplx x, double symbol_energy) {
  const double s = std::sqrt(symbol_energy / 2.0);
  return cplx(x.real() < 0.0 ? -s : s, x.imag() < 0.0 ? -s : s);
}

/// K x tau pilot matrix of QPSK-alphabet entries, row energy tau*E.
/// Orthogonal mode (X_p X_p^H = tau E I) needs tau >= K and tau a power
/// of two (Sylvester construction).
CMat generate_pilots(int users, int pilot_len, double symbol_energy,
                     PilotMode mode, Rng& rng);

UplinkFrame transmit(const FrameConfig& config, Rng& rng);
UplinkFrame transmit(const FrameConfig& config);

// SNR convention used throughout: SNR = symbol_energy * K / noise_variance
// per receive antenna with unit-variance channel entries.
double noise_variance_for_snr_db(double snr_db, int users,
                                 double symbol_energy);
// E_b/N_0 = SNR / (M_c * R) with M_c = 2 for QPSK.
double snr_db_for_ebn0_db(double ebn0_db, double code_rate);

}  // namespace onebit
