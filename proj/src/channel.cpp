#include "onebit/channel.hpp"

#include <bit>
#include <cmath>

#include "onebit/quantize.hpp"

namespace onebit {

void FrameConfig::validate() const {
  if (users < 1 || antennas < users) {
    throw ConfigError("frame config: need M >= K >= 1");
  }
  if (pilot_len < 1) {
    throw ConfigError("frame config: pilot length must be >= 1");
  }
  if (data_len < 0) {
    throw ConfigError("frame config: negative data length");
  }
  if (!(symbol_energy > 0.0) || !(noise_variance >= 0.0)) {
    throw ConfigError("frame config: energies must be positive");
  }
  if (per_user_energy.size() != 0 && per_user_energy.size() != users) {
    throw ConfigError("frame config: per-user energy size mismatch");
  }
  if (per_user_energy.size() != 0 && (per_user_energy.array() <= 0.0).any()) {
    throw ConfigError("frame config: non-positive user energy");
  }
}

RVec FrameConfig::energies() const {
  if (per_user_energy.size() != 0) return per_user_energy;
  return RVec::Constant(users, symbol_energy);
}

CMat generate_channel(int antennas, int users, Rng& rng) {
  if (antennas < 1 || users < 1) {
    throw DimensionError("generate_channel: dimensions must be >= 1");
  }
  return complex_gaussian(antennas, users, 1.0, rng);
}

CVec qpsk_modulate(const BitVec& bits, double symbol_energy) {
  if (bits.size() % 2 != 0) {
    throw InvalidInputError("qpsk_modulate: odd bit count");
  }
  const double s = std::sqrt(symbol_energy / 2.0);
  CVec out(bits.size() / 2);
  for (Eigen::Index t = 0; t < out.size(); ++t) {
    out[t] = cplx(s * (1.0 - 2.0 * bits[2 * t]),
                  s * (1.0 - 2.0 * bits[2 * t + 1]));
  }
  return out;
}

BitVec qpsk_hard_demap(const CVec& symbols) {
  BitVec bits(2 * static_cast<std::size_t>(symbols.size()));
  for (Eigen::Index t = 0; t < symbols.size(); ++t) {
    bits[2 * t] = symbols[t].real() < 0.0 ? 1 : 0;
    bits[2 * t + 1] = symbols[t].imag() < 0.0 ? 1 : 0;
  }
  return bits;
}

namespace {

// Rows of the Sylvester Hadamard matrix of order n (n a power of two):
// H(i, j) = (-1)^popcount(i & j).
inline double hadamard_entry(unsigned i, unsigned j) {
  return (std::popcount(i & j) & 1u) ? -1.0 : 1.0;
}

}  // namespace

CMat generate_pilots(int users, int pilot_len, double symbol_energy,
                     PilotMode mode, Rng& rng) {
  if (users < 1 || pilot_len < 1) {
    throw DimensionError("generate_pilots: dimensions must be >= 1");
  }
  const double s = std::sqrt(symbol_energy / 2.0);
  CMat x_p(users, pilot_len);
  if (mode == PilotMode::kOrthogonal) {
    const bool pow2 = std::has_single_bit(static_cast<unsigned>(pilot_len));
    if (pilot_len < users || !pow2) {
      throw ConfigError(
          "generate_pilots: orthogonal mode needs tau >= K and tau a power "
          "of two");
    }
    for (int k = 0; k < users; ++k) {
      for (int n = 0; n < pilot_len; ++n) {
        const double h = hadamard_entry(static_cast<unsigned>(k),
                                        static_cast<unsigned>(n));
        x_p(k, n) = cplx(s * h, s * h);  // +-(1+j)/sqrt(2) * sqrt(E)
      }
    }
  } else {
    std::uniform_int_distribution<int> bit(0, 1);
    for (int k = 0; k < users; ++k) {
      for (int n = 0; n < pilot_len; ++n) {
        x_p(k, n) = cplx(s * (1.0 - 2.0 * bit(rng)), s * (1.0 - 2.0 * bit(rng)));
      }
    }
  }
  return x_p;
}

UplinkFrame transmit(const FrameConfig& config, Rng& rng) {
  config.validate();
  const int m = config.antennas;
  const int k = config.users;
  const RVec energy = config.energies();

  UplinkFrame frame;
  frame.H = generate_channel(m, k, rng);
  frame.X_p = generate_pilots(k, config.pilot_len, config.symbol_energy,
                              config.pilot_mode, rng);
  // Near-far: scale each user's whole transmission to its energy.
  for (int u = 0; u < k; ++u) {
    const double scale = std::sqrt(energy[u] / config.symbol_energy);
    if (scale != 1.0) frame.X_p.row(u) *= scale;
  }

  frame.payload_bits.resize(k);
  frame.X_d.resize(k, config.data_len);
  std::uniform_int_distribution<int> bit(0, 1);
  for (int u = 0; u < k; ++u) {
    BitVec& bits = frame.payload_bits[u];
    bits.resize(2 * static_cast<std::size_t>(config.data_len));
    for (auto& b : bits) b = static_cast<std::uint8_t>(bit(rng));
    frame.X_d.row(u) = qpsk_modulate(bits, energy[u]).transpose();
  }

  const CMat noise_p =
      complex_gaussian(m, config.pilot_len, config.noise_variance, rng);
  const CMat y_pilot = frame.H * frame.X_p + noise_p;
  const CMat noise_d =
      complex_gaussian(m, config.data_len, config.noise_variance, rng);
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

UplinkFrame transmit(const FrameConfig& config) {
  Rng rng(config.seed);
  return transmit(config, rng);
}

double noise_variance_for_snr_db(double snr_db, int users,
                                 double symbol_energy) {
  return symbol_energy * users / std::pow(10.0, snr_db / 10.0);
}

double snr_db_for_ebn0_db(double ebn0_db, double code_rate) {
  return ebn0_db + 10.0 * std::log10(2.0 * code_rate);
}

}  // namespace onebit
