#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "onebit/channel.hpp"
#include "onebit/detectors.hpp"
#include "onebit/ldpc.hpp"
#include "test_support.hpp"

using namespace onebit;

namespace {

BitVec random_message(const LdpcCode& code, Rng& rng) {
  std::uniform_int_distribution<int> bit(0, 1);
  BitVec info(code.info_len);
  for (auto& b : info) b = static_cast<std::uint8_t>(bit(rng));
  return info;
}

std::vector<double> strong_llrs(const BitVec& codeword) {
  std::vector<double> llrs(codeword.size());
  for (std::size_t i = 0; i < codeword.size(); ++i) {
    llrs[i] = codeword[i] ? -kLlrClamp : kLlrClamp;
  }
  return llrs;
}

}  // namespace

TEST_CASE("(3,6) construction at n=512: weights, rank, determinism") {
  const LdpcCode code = build_code(512, 0.5, 3, 101);
  CHECK(code.block_len == 512);
  CHECK(code.info_len == 256);
  CHECK(code.checks() == 256);
  CHECK(code.row_weight == 6);
  CHECK(code.edges() == 512 * 3);

  // regular degrees
  for (int c = 0; c < code.checks(); ++c) {
    CHECK(code.chk_ptr[c + 1] - code.chk_ptr[c] == 6);
  }
  for (int v = 0; v < code.block_len; ++v) {
    CHECK(code.var_ptr[v + 1] - code.var_ptr[v] == 3);
  }

  // G H^T = 0: every generator row satisfies every check
  for (int r = 0; r < code.info_len; ++r) {
    CHECK(code.syndrome_ok(code.generator_row(r)));
  }

  const LdpcCode again = build_code(512, 0.5, 3, 101);
  CHECK(again.edge_var == code.edge_var);
  CHECK(again.chk_ptr == code.chk_ptr);
  CHECK(again.info_cols == code.info_cols);

  CHECK_THROWS_AS(build_code(512, 0.7, 3, 1), ConfigError);  // 3*512 % 153
}

TEST_CASE("encode produces valid codewords; systematic info placement") {
  const LdpcCode code = build_code(512, 0.5, 3, 7);
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const BitVec info = random_message(code, rng);
    const BitVec cw = code.encode(info);
    CHECK(code.syndrome_ok(cw));
    for (int j = 0; j < code.info_len; ++j) {
      CHECK(cw[code.info_cols[j]] == info[j]);
    }
  }
}

TEST_CASE("noiseless decode returns the codeword immediately") {
  const LdpcCode code = build_code(512, 0.5, 3, 7);
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const BitVec cw = code.encode(random_message(code, rng));
    const DecodeResult res = decode_spa(code, strong_llrs(cw));
    CHECK(res.syndrome_ok);
    CHECK(res.iterations_used <= 1);
    CHECK(res.bits == cw);
  }
}

TEST_CASE("high-magnitude round trip over 1000 random messages") {
  const LdpcCode code = build_code(512, 0.5, 3, 7);
  Rng rng(3);
  int exact = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const BitVec info = random_message(code, rng);
    const BitVec cw = code.encode(info);
    const DecodeResult res = decode_spa(code, strong_llrs(cw));
    exact += res.bits == cw ? 1 : 0;
  }
  CHECK(exact == 1000);
}

TEST_CASE("single erasure is corrected within 5 iterations") {
  const LdpcCode code = build_code(512, 0.5, 3, 7);
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const BitVec cw = code.encode(random_message(code, rng));
    std::vector<double> llrs = strong_llrs(cw);
    const int erased = static_cast<int>(rng() % code.block_len);
    llrs[erased] = 0.0;

    // syndrome brute force: the erased position has a unique completion
    BitVec flipped = cw;
    flipped[erased] ^= 1;
    CHECK(code.syndrome_ok(cw));
    CHECK_FALSE(code.syndrome_ok(flipped));

    const DecodeResult res = decode_spa(code, llrs);
    CHECK(res.syndrome_ok);
    CHECK(res.iterations_used <= 5);
    CHECK(res.bits == cw);
  }
}

TEST_CASE("all-zero LLRs: flagged result, no crash") {
  const LdpcCode code = build_code(512, 0.5, 3, 7);
  const std::vector<double> llrs(code.block_len, 0.0);
  const DecodeResult res = decode_spa(code, llrs);
  CHECK(res.syndrome_ok == code.syndrome_ok(res.bits));

  std::vector<double> bad(code.block_len, 0.0);
  bad[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(decode_spa(code, bad), InvalidInputError);
  CHECK_THROWS_AS(decode_spa(code, std::vector<double>(10, 0.0)),
                  DimensionError);
}

TEST_CASE("SPA output is invariant under check-row permutation") {
  const LdpcCode code = build_code(512, 0.5, 3, 7);

  // rebuild with the check rows listed in reverse order
  ParityMatrix parity;
  parity.rows = code.checks();
  parity.cols = code.block_len;
  parity.row_support.resize(parity.rows);
  for (int c = 0; c < parity.rows; ++c) {
    const int src = parity.rows - 1 - c;
    for (std::int32_t e = code.chk_ptr[src]; e < code.chk_ptr[src + 1]; ++e) {
      parity.row_support[c].push_back(code.edge_var[e]);
    }
  }
  const LdpcCode permuted = code_from_parity(parity);

  Rng rng(5);
  std::normal_distribution<double> noise(0.0, 2.0);
  for (int rep = 0; rep < 10; ++rep) {
    const BitVec cw = code.encode(random_message(code, rng));
    std::vector<double> llrs(code.block_len);
    for (int i = 0; i < code.block_len; ++i) {
      llrs[i] = (cw[i] ? -2.0 : 2.0) + noise(rng);
    }
    const DecodeResult a = decode_spa(code, llrs, 30);
    const DecodeResult b = decode_spa(permuted, llrs, 30);
    CHECK(a.bits == b.bits);
    CHECK(a.syndrome_ok == b.syndrome_ok);
  }
}

TEST_CASE("alist round trip preserves the parity structure") {
  const LdpcCode code = build_code(512, 0.5, 3, 7);
  const std::string path =
      (std::filesystem::temp_directory_path() / "onebit_test_code.alist")
          .string();
  write_alist(code, path);
  const ParityMatrix parity = read_alist(path);
  CHECK(parity.rows == code.checks());
  CHECK(parity.cols == code.block_len);

  const LdpcCode rebuilt = code_from_parity(parity);
  CHECK(rebuilt.edge_var == code.edge_var);
  CHECK(rebuilt.chk_ptr == code.chk_ptr);
  CHECK(rebuilt.info_cols == code.info_cols);

  Rng rng(6);
  const BitVec info = random_message(code, rng);
  CHECK(rebuilt.encode(info) == code.encode(info));
  std::remove(path.c_str());

  CHECK_THROWS_AS(read_alist("/nonexistent/path.alist"), IoError);
}

// Coding gain: coded BER < uncoded BER at the same operating point
// (E_b/N_0 = 6 dB, M=32, K=4, perfect CSI, linear LRA-MMSE).
TEST_CASE("LDPC provides coding gain at 6 dB") {
  const LdpcCode code = build_code(512, 0.5, 3, 7);
  const int antennas = 32, users = 4, frames = 120;
  const double sn2 =
      noise_variance_for_snr_db(snr_db_for_ebn0_db(6.0, 0.5), users, 1.0);
  Rng rng(2027);
  std::uniform_int_distribution<int> bit(0, 1);

  long coded_errors = 0, uncoded_errors = 0;
  long coded_bits = 0, uncoded_bits = 0;
  for (int f = 0; f < frames; ++f) {
    const CMat h = generate_channel(antennas, users, rng);
    const LraMmseFilter filter = build_lra_mmse(h, 1.0, sn2);
    std::vector<StreamStats> stats(users);
    for (int k = 0; k < users; ++k) stats[k] = stream_statistics(filter, k);

    std::vector<BitVec> info(users), cw(users);
    CMat x_d(users, code.block_len / 2);
    for (int k = 0; k < users; ++k) {
      info[k] = random_message(code, rng);
      cw[k] = code.encode(info[k]);
      x_d.row(k) = qpsk_modulate(cw[k], 1.0).transpose();
    }
    const CMat y = quantize_1bit(
        CMat(h * x_d +
             complex_gaussian(antennas, x_d.cols(), sn2, rng)));

    std::vector<std::vector<double>> llrs(
        users, std::vector<double>(code.block_len));
    for (int t = 0; t < x_d.cols(); ++t) {
      const CVec z = filter.w.adjoint() * y.col(t);
      for (int k = 0; k < users; ++k) {
        // uncoded reference: hard decisions on the same filter output
        const std::uint8_t bi = z[k].real() < 0 ? 1 : 0;
        const std::uint8_t bq = z[k].imag() < 0 ? 1 : 0;
        uncoded_errors += bi != cw[k][2 * t] ? 1 : 0;
        uncoded_errors += bq != cw[k][2 * t + 1] ? 1 : 0;
        uncoded_bits += 2;
        const Eigen::Vector2d l =
            soft_llr(z[k], stats[k].mu, std::max(stats[k].eta2, 1e-30), 1.0);
        llrs[k][2 * t] = std::clamp(l[0], -kLlrClamp, kLlrClamp);
        llrs[k][2 * t + 1] = std::clamp(l[1], -kLlrClamp, kLlrClamp);
      }
    }
    for (int k = 0; k < users; ++k) {
      const DecodeResult res = decode_spa(code, llrs[k]);
      for (int j = 0; j < code.info_len; ++j) {
        coded_errors += res.bits[code.info_cols[j]] != info[k][j] ? 1 : 0;
      }
      coded_bits += code.info_len;
    }
  }
  const double coded_ber = static_cast<double>(coded_errors) / coded_bits;
  const double uncoded_ber =
      static_cast<double>(uncoded_errors) / uncoded_bits;
  MESSAGE("coded BER ", coded_ber, " vs uncoded BER ", uncoded_ber);
  CHECK(coded_ber < uncoded_ber);
  CHECK(uncoded_ber > 0.0);
}
