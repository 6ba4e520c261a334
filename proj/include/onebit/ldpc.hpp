#pragma once

#include <string>

#include "onebit/common.hpp"

namespace onebit {

/// Regular LDPC code with a systematic encoder derived by GF(2) elimination.
/// The parity-check matrix is stored as edge lists grouped by check and by
/// variable; the generator is kept implicitly as the parity map over the
/// info positions (column permutation recorded in info_cols/parity_cols).
struct LdpcCode {
  int block_len = 0;  // n
  int info_len = 0;   // k
  double rate = 0.5;
  int col_weight = 3;
  int row_weight = 6;
  std::uint64_t seed = 0;

  // edge e in [chk_ptr[c], chk_ptr[c+1]) belongs to check c
  std::vector<std::int32_t> chk_ptr;
  std::vector<std::int32_t> edge_var;  // variable of edge e
  // edges incident to variable v: var_edges[var_ptr[v] .. var_ptr[v+1])
  std::vector<std::int32_t> var_ptr;
  std::vector<std::int32_t> var_edges;

  std::vector<std::int32_t> info_cols;    // k info positions
  std::vector<std::int32_t> parity_cols;  // m parity (pivot) positions
  std::vector<std::uint64_t> parity_map;  // m rows, bit-packed over info bits
  int map_words = 0;

  int checks() const { return block_len - info_len; }
  int edges() const { return static_cast<int>(edge_var.size()); }

  BitVec encode(const BitVec& info) const;
  /// Row r of the systematic generator in original column order
  /// (the encoding of the r-th unit info vector).
  BitVec generator_row(int r) const;
  bool syndrome_ok(const BitVec& codeword) const;
};

/// Seeded regular construction: socket assignment, double-edge repair,
/// bounded 4-cycle swap passes, full-rank retry.
LdpcCode build_code(int block_len = 512, double rate = 0.5,
                    int col_weight = 3, std::uint64_t seed = 0x5eed);

struct DecodeResult {
  BitVec bits;  // full codeword (hard decisions)
  int iterations_used = 0;
  bool syndrome_ok = false;
};

/// Log-domain sum-product decoding (tanh rule, flooding schedule), early
/// stop on a satisfied syndrome. Inputs are clamped to +-kLlrClamp;
/// LLR >= 0 means bit 0.
DecodeResult decode_spa(const LdpcCode& code, const std::vector<double>& llrs,
                        int max_iter = 50);

/// Parity-check matrix exchange in alist text format.
struct ParityMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::vector<std::int32_t>> row_support;  // per check
};

void write_alist(const LdpcCode& code, const std::string& path);
ParityMatrix read_alist(const std::string& path);
/// Rebuild a full code (encoder included) from an imported parity matrix;
/// requires a regular, full-rank matrix.
LdpcCode code_from_parity(const ParityMatrix& parity);

}  // namespace onebit
