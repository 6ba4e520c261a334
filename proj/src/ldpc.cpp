#include "onebit/ldpc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace onebit {

namespace {

// Dense GF(2) rows, bit-packed.
struct BitMatrix {
  int rows = 0, cols = 0, words = 0;
  std::vector<std::uint64_t> data;

  BitMatrix(int r, int c)
      : rows(r), cols(c), words((c + 63) / 64), data(
            static_cast<std::size_t>(r) * ((c + 63) / 64), 0) {}
  std::uint64_t* row(int r) { return data.data() + static_cast<std::size_t>(r) * words; }
  const std::uint64_t* row(int r) const {
    return data.data() + static_cast<std::size_t>(r) * words;
  }
  bool get(int r, int c) const { return (row(r)[c >> 6] >> (c & 63)) & 1u; }
  void set(int r, int c) { row(r)[c >> 6] |= 1ULL << (c & 63); }
  void xor_rows(int dst, int src) {
    auto* d = row(dst);
    const auto* s = row(src);
    for (int w = 0; w < words; ++w) d[w] ^= s[w];
  }
  void swap_rows(int a, int b) {
    if (a == b) return;
    auto* pa = row(a);
    auto* pb = row(b);
    for (int w = 0; w < words; ++w) std::swap(pa[w], pb[w]);
  }
};

// Assign check sockets to columns; repair same-check duplicates within a
// column by swapping sockets across columns.
std::vector<std::vector<std::int32_t>> assign_sockets(int n, int m,
                                                      int col_weight,
                                                      int row_weight,
                                                      Rng& rng) {
  std::vector<std::int32_t> sockets;
  sockets.reserve(static_cast<std::size_t>(m) * row_weight);
  for (int c = 0; c < m; ++c) {
    for (int r = 0; r < row_weight; ++r) sockets.push_back(c);
  }
  std::shuffle(sockets.begin(), sockets.end(), rng);

  const auto col_ok = [&](int j) {
    for (int a = 0; a < col_weight; ++a) {
      for (int b = a + 1; b < col_weight; ++b) {
        if (sockets[j * col_weight + a] == sockets[j * col_weight + b]) {
          return false;
        }
      }
    }
    return true;
  };
  std::uniform_int_distribution<std::size_t> pick(0, sockets.size() - 1);
  for (int pass = 0; pass < 200; ++pass) {
    bool clean = true;
    for (int j = 0; j < n; ++j) {
      int guard = 0;
      while (!col_ok(j) && guard++ < 1000) {
        std::swap(sockets[static_cast<std::size_t>(j) * col_weight +
                          (rng() % col_weight)],
                  sockets[pick(rng)]);
        clean = false;
      }
    }
    bool all_ok = true;
    for (int j = 0; j < n; ++j) all_ok = all_ok && col_ok(j);
    if (all_ok) break;
    if (clean) break;
  }
  for (int j = 0; j < n; ++j) {
    if (!col_ok(j)) return {};
  }
  std::vector<std::vector<std::int32_t>> cols(n);
  for (int j = 0; j < n; ++j) {
    cols[j].assign(sockets.begin() + static_cast<std::size_t>(j) * col_weight,
                   sockets.begin() +
                       static_cast<std::size_t>(j + 1) * col_weight);
    std::sort(cols[j].begin(), cols[j].end());
  }
  return cols;
}

// Best-effort girth-4 reduction: a 4-cycle is two columns sharing two
// checks; break it by swapping one edge with a random edge of a third
// column, keeping all degrees intact.
void reduce_four_cycles(std::vector<std::vector<std::int32_t>>& cols,
                        int col_weight, Rng& rng) {
  const int n = static_cast<int>(cols.size());
  std::uniform_int_distribution<int> pick_col(0, n - 1);
  std::uniform_int_distribution<int> pick_slot(0, col_weight - 1);
  for (int pass = 0; pass < 60; ++pass) {
    std::map<std::pair<std::int32_t, std::int32_t>, int> pair_owner;
    int violations = 0;
    for (int j = 0; j < n; ++j) {
      for (int a = 0; a < col_weight; ++a) {
        for (int b = a + 1; b < col_weight; ++b) {
          const auto key = std::make_pair(cols[j][a], cols[j][b]);
          auto [it, inserted] = pair_owner.try_emplace(key, j);
          if (inserted) continue;
          ++violations;
          // swap edge (cols[j][b]) with a random edge elsewhere
          for (int attempt = 0; attempt < 50; ++attempt) {
            const int j2 = pick_col(rng);
            if (j2 == j) continue;
            const int s2 = pick_slot(rng);
            const std::int32_t c1 = cols[j][b];
            const std::int32_t c2 = cols[j2][s2];
            if (c1 == c2) continue;
            if (std::count(cols[j].begin(), cols[j].end(), c2) > 0) continue;
            if (std::count(cols[j2].begin(), cols[j2].end(), c1) > 0) continue;
            cols[j][b] = c2;
            cols[j2][s2] = c1;
            std::sort(cols[j].begin(), cols[j].end());
            std::sort(cols[j2].begin(), cols[j2].end());
            break;
          }
        }
      }
    }
    if (violations == 0) break;
  }
}

void build_edge_structure(LdpcCode& code,
                          const std::vector<std::vector<std::int32_t>>& cols) {
  const int n = code.block_len;
  const int m = code.checks();
  std::vector<std::vector<std::int32_t>> rows(m);
  for (int j = 0; j < n; ++j) {
    for (const auto c : cols[j]) rows[c].push_back(j);
  }
  code.chk_ptr.assign(m + 1, 0);
  code.edge_var.clear();
  code.edge_var.reserve(static_cast<std::size_t>(n) * code.col_weight);
  for (int c = 0; c < m; ++c) {
    for (const auto v : rows[c]) code.edge_var.push_back(v);
    code.chk_ptr[c + 1] = static_cast<std::int32_t>(code.edge_var.size());
  }
  code.var_ptr.assign(n + 1, 0);
  for (const auto v : code.edge_var) code.var_ptr[v + 1]++;
  for (int v = 0; v < n; ++v) code.var_ptr[v + 1] += code.var_ptr[v];
  code.var_edges.resize(code.edge_var.size());
  std::vector<std::int32_t> cursor(code.var_ptr.begin(),
                                   code.var_ptr.end() - 1);
  for (std::int32_t e = 0; e < static_cast<std::int32_t>(code.edge_var.size());
       ++e) {
    code.var_edges[cursor[code.edge_var[e]]++] = e;
  }
}

// Reduced row echelon over GF(2); returns false when rank < rows.
bool derive_systematic(LdpcCode& code,
                       const std::vector<std::vector<std::int32_t>>& cols) {
  const int n = code.block_len;
  const int m = code.checks();
  BitMatrix h(m, n);
  for (int j = 0; j < n; ++j) {
    for (const auto c : cols[j]) h.set(c, j);
  }
  std::vector<std::int32_t> pivot_cols;
  std::vector<char> is_pivot(n, 0);
  int r = 0;
  for (int c = 0; c < n && r < m; ++c) {
    int sel = -1;
    for (int rr = r; rr < m; ++rr) {
      if (h.get(rr, c)) {
        sel = rr;
        break;
      }
    }
    if (sel < 0) continue;
    h.swap_rows(r, sel);
    for (int rr = 0; rr < m; ++rr) {
      if (rr != r && h.get(rr, c)) h.xor_rows(rr, r);
    }
    pivot_cols.push_back(c);
    is_pivot[c] = 1;
    ++r;
  }
  if (r < m) return false;

  code.parity_cols = pivot_cols;
  code.info_cols.clear();
  code.info_cols.reserve(code.info_len);
  for (int c = 0; c < n; ++c) {
    if (!is_pivot[c]) code.info_cols.push_back(c);
  }
  code.map_words = (code.info_len + 63) / 64;
  code.parity_map.assign(
      static_cast<std::size_t>(m) * code.map_words, 0);
  for (int i = 0; i < m; ++i) {
    auto* dst = code.parity_map.data() +
                static_cast<std::size_t>(i) * code.map_words;
    for (int j = 0; j < code.info_len; ++j) {
      if (h.get(i, code.info_cols[j])) dst[j >> 6] |= 1ULL << (j & 63);
    }
  }
  return true;
}

}  // namespace

BitVec LdpcCode::encode(const BitVec& info) const {
  if (static_cast<int>(info.size()) != info_len) {
    throw DimensionError("ldpc encode: info length mismatch");
  }
  std::vector<std::uint64_t> packed(map_words, 0);
  for (int j = 0; j < info_len; ++j) {
    if (info[j]) packed[j >> 6] |= 1ULL << (j & 63);
  }
  BitVec codeword(block_len, 0);
  for (int j = 0; j < info_len; ++j) codeword[info_cols[j]] = info[j] & 1;
  const int m = checks();
  for (int i = 0; i < m; ++i) {
    const auto* row = parity_map.data() + static_cast<std::size_t>(i) * map_words;
    int par = 0;
    for (int w = 0; w < map_words; ++w) {
      par ^= std::popcount(row[w] & packed[w]) & 1;
    }
    codeword[parity_cols[i]] = static_cast<std::uint8_t>(par);
  }
  return codeword;
}

BitVec LdpcCode::generator_row(int r) const {
  if (r < 0 || r >= info_len) {
    throw DimensionError("ldpc generator_row: index out of range");
  }
  BitVec unit(info_len, 0);
  unit[r] = 1;
  return encode(unit);
}

bool LdpcCode::syndrome_ok(const BitVec& codeword) const {
  if (static_cast<int>(codeword.size()) != block_len) {
    throw DimensionError("ldpc syndrome: codeword length mismatch");
  }
  const int m = checks();
  for (int c = 0; c < m; ++c) {
    int par = 0;
    for (std::int32_t e = chk_ptr[c]; e < chk_ptr[c + 1]; ++e) {
      par ^= codeword[edge_var[e]] & 1;
    }
    if (par) return false;
  }
  return true;
}

LdpcCode build_code(int block_len, double rate, int col_weight,
                    std::uint64_t seed) {
  if (block_len < 4 || col_weight < 2) {
    throw ConfigError("ldpc: block length or column weight too small");
  }
  const double m_exact = block_len * (1.0 - rate);
  const int m = static_cast<int>(std::lround(m_exact));
  if (std::abs(m_exact - m) > 1e-9 || m < 1 || m >= block_len) {
    throw ConfigError("ldpc: n (1 - R) must be a positive integer");
  }
  const long edges = static_cast<long>(block_len) * col_weight;
  if (edges % m != 0) {
    throw ConfigError("ldpc: column weight * n must be divisible by checks");
  }
  const int row_weight = static_cast<int>(edges / m);

  for (int attempt = 0; attempt < 64; ++attempt) {
    Rng rng(splitmix64(seed + static_cast<std::uint64_t>(attempt)));
    auto cols = assign_sockets(block_len, m, col_weight, row_weight, rng);
    if (cols.empty()) continue;
    reduce_four_cycles(cols, col_weight, rng);

    LdpcCode code;
    code.block_len = block_len;
    code.info_len = block_len - m;
    code.rate = rate;
    code.col_weight = col_weight;
    code.row_weight = row_weight;
    code.seed = seed;
    if (!derive_systematic(code, cols)) continue;  // rank deficient, retry
    build_edge_structure(code, cols);
    return code;
  }
  throw NumericalError("ldpc: construction failed (seed " +
                       std::to_string(seed) + "): no full-rank draw");
}

DecodeResult decode_spa(const LdpcCode& code, const std::vector<double>& llrs,
                        int max_iter) {
  const int n = code.block_len;
  if (static_cast<int>(llrs.size()) != n) {
    throw DimensionError("decode_spa: LLR length mismatch");
  }
  for (const double l : llrs) {
    if (!std::isfinite(l)) {
      throw InvalidInputError("decode_spa: non-finite LLR");
    }
  }
  const int m = code.checks();
  const int edges = code.edges();

  std::vector<double> intrinsic(n);
  for (int v = 0; v < n; ++v) {
    intrinsic[v] = std::clamp(llrs[v], -kLlrClamp, kLlrClamp);
  }

  DecodeResult result;
  result.bits.resize(n);
  for (int v = 0; v < n; ++v) result.bits[v] = intrinsic[v] < 0.0 ? 1 : 0;
  if (code.syndrome_ok(result.bits)) {
    result.iterations_used = 0;
    result.syndrome_ok = true;
    return result;
  }

  constexpr double kProdCap = 1.0 - 1e-15;
  std::vector<double> v2c(edges), c2v(edges, 0.0), tanh_buf(edges);
  std::vector<double> fwd, bwd;
  fwd.reserve(code.row_weight + 1);
  bwd.reserve(code.row_weight + 1);
  for (int e = 0; e < edges; ++e) v2c[e] = intrinsic[code.edge_var[e]];
  std::vector<double> posterior(n);

  for (int iter = 1; iter <= max_iter; ++iter) {
    // CN update with forward/backward partial products
    for (int e = 0; e < edges; ++e) tanh_buf[e] = std::tanh(v2c[e] / 2.0);
    for (int c = 0; c < m; ++c) {
      const int lo = code.chk_ptr[c];
      const int hi = code.chk_ptr[c + 1];
      const int deg = hi - lo;
      fwd.assign(deg + 1, 1.0);
      bwd.assign(deg + 1, 1.0);
      for (int i = 0; i < deg; ++i) fwd[i + 1] = fwd[i] * tanh_buf[lo + i];
      for (int i = deg - 1; i >= 0; --i) bwd[i] = bwd[i + 1] * tanh_buf[lo + i];
      for (int i = 0; i < deg; ++i) {
        const double prod =
            std::clamp(fwd[i] * bwd[i + 1], -kProdCap, kProdCap);
        c2v[lo + i] = 2.0 * std::atanh(prod);
      }
    }
    // VN update and posterior
    for (int v = 0; v < n; ++v) {
      double sum = intrinsic[v];
      for (std::int32_t i = code.var_ptr[v]; i < code.var_ptr[v + 1]; ++i) {
        sum += c2v[code.var_edges[i]];
      }
      posterior[v] = sum;
      result.bits[v] = sum < 0.0 ? 1 : 0;
      for (std::int32_t i = code.var_ptr[v]; i < code.var_ptr[v + 1]; ++i) {
        v2c[code.var_edges[i]] = sum - c2v[code.var_edges[i]];
      }
    }
    if (code.syndrome_ok(result.bits)) {
      result.iterations_used = iter;
      result.syndrome_ok = true;
      return result;
    }
  }
  result.iterations_used = max_iter;
  result.syndrome_ok = false;
  return result;
}

void write_alist(const LdpcCode& code, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_alist: cannot open " + path);
  const int n = code.block_len;
  const int m = code.checks();
  std::vector<std::vector<std::int32_t>> col_support(n), row_support(m);
  for (int c = 0; c < m; ++c) {
    for (std::int32_t e = code.chk_ptr[c]; e < code.chk_ptr[c + 1]; ++e) {
      row_support[c].push_back(code.edge_var[e]);
      col_support[code.edge_var[e]].push_back(c);
    }
  }
  int max_col = 0, max_row = 0;
  for (const auto& s : col_support)
    max_col = std::max<int>(max_col, static_cast<int>(s.size()));
  for (const auto& s : row_support)
    max_row = std::max<int>(max_row, static_cast<int>(s.size()));

  out << n << ' ' << m << '\n';
  out << max_col << ' ' << max_row << '\n';
  for (int j = 0; j < n; ++j) {
    out << col_support[j].size() << (j + 1 < n ? ' ' : '\n');
  }
  for (int c = 0; c < m; ++c) {
    out << row_support[c].size() << (c + 1 < m ? ' ' : '\n');
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < max_col; ++i) {
      const int val =
          i < static_cast<int>(col_support[j].size()) ? col_support[j][i] + 1 : 0;
      out << val << (i + 1 < max_col ? ' ' : '\n');
    }
  }
  for (int c = 0; c < m; ++c) {
    for (int i = 0; i < max_row; ++i) {
      const int val =
          i < static_cast<int>(row_support[c].size()) ? row_support[c][i] + 1 : 0;
      out << val << (i + 1 < max_row ? ' ' : '\n');
    }
  }
  if (!out) throw IoError("write_alist: write failed for " + path);
}

ParityMatrix read_alist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_alist: cannot open " + path);
  ParityMatrix parity;
  int max_col = 0, max_row = 0;
  if (!(in >> parity.cols >> parity.rows >> max_col >> max_row)) {
    throw IoError("read_alist: malformed header in " + path);
  }
  std::vector<int> col_w(parity.cols), row_w(parity.rows);
  for (auto& w : col_w) in >> w;
  for (auto& w : row_w) in >> w;
  // skip the per-column lists, read the per-row lists
  for (int j = 0; j < parity.cols; ++j) {
    for (int i = 0; i < max_col; ++i) {
      int v;
      in >> v;
    }
  }
  parity.row_support.resize(parity.rows);
  for (int c = 0; c < parity.rows; ++c) {
    for (int i = 0; i < max_row; ++i) {
      int v;
      if (!(in >> v)) throw IoError("read_alist: truncated file " + path);
      if (v > 0) parity.row_support[c].push_back(v - 1);
    }
  }
  return parity;
}

LdpcCode code_from_parity(const ParityMatrix& parity) {
  const int n = parity.cols;
  const int m = parity.rows;
  if (n < 2 || m < 1 || m >= n) {
    throw ConfigError("code_from_parity: bad dimensions");
  }
  std::vector<std::vector<std::int32_t>> cols(n);
  for (int c = 0; c < m; ++c) {
    for (const auto v : parity.row_support[c]) {
      if (v < 0 || v >= n) {
        throw ConfigError("code_from_parity: variable index out of range");
      }
      cols[v].push_back(c);
    }
  }
  const std::size_t col_weight = cols[0].size();
  for (const auto& s : cols) {
    if (s.size() != col_weight) {
      throw ConfigError("code_from_parity: irregular column weights");
    }
  }
  const std::size_t row_weight = parity.row_support[0].size();
  for (const auto& s : parity.row_support) {
    if (s.size() != row_weight) {
      throw ConfigError("code_from_parity: irregular row weights");
    }
  }
  LdpcCode code;
  code.block_len = n;
  code.info_len = n - m;
  code.rate = static_cast<double>(code.info_len) / n;
  code.col_weight = static_cast<int>(col_weight);
  code.row_weight = static_cast<int>(row_weight);
  if (!derive_systematic(code, cols)) {
    throw ConfigError("code_from_parity: parity matrix is rank deficient");
  }
  build_edge_structure(code, cols);
  return code;
}

}  // namespace onebit
