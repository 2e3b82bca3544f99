#include "dieclust/distance_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "dieclust/grid_io.hpp"

namespace dieclust {

DistanceMatrix::DistanceMatrix(std::size_t n)
    : n_(n), d_(pair_count(n), 0.0), scores_(pair_count(n)) {
  ids_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids_.push_back(std::to_string(i));
}

DistanceMatrix DistanceMatrix::from_dense(const std::vector<std::vector<double>>& dense) {
  DistanceMatrix dm(dense.size());
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i].size() != dense.size()) throw std::invalid_argument("dense matrix not square");
    for (std::size_t j = i + 1; j < dense.size(); ++j) {
      if (!std::isfinite(dense[i][j])) throw std::invalid_argument("non-finite distance");
      dm.upper(i, j) = dense[i][j];
    }
  }
  return dm;
}

DistanceMatrix assemble_distance_matrix(std::span<const ScoredPair> scores, std::size_t n,
                                        std::vector<std::string> ids, double procrustes_floor) {
  if (ids.size() != n) throw std::invalid_argument("id table size does not match N");
  const std::size_t m = pair_count(n);
  if (scores.size() != m) throw std::invalid_argument("expected one score per unordered pair");

  DistanceMatrix dm(n);
  dm.ids() = std::move(ids);
  std::vector<char> seen(m, 0);
  for (const auto& s : scores) {
    const std::size_t i = std::min(s.i, s.j), j = std::max(s.i, s.j);
    if (i == j || j >= n) throw std::invalid_argument("invalid pair index");
    const std::size_t idx = pair_index(n, i, j);
    if (idx >= m || seen[idx]) throw std::invalid_argument("duplicate pair score");
    seen[idx] = 1;
    dm.scores()[idx] = s.score;
  }

  // Pass 1: the substitution value for degenerate pairs.
  double p_max = -std::numeric_limits<double>::infinity();
  for (const auto& s : dm.scores())
    if (!s.degenerate) p_max = std::max(p_max, s.p);
  if (m > 0 && !std::isfinite(p_max))
    throw DegenerateInputError("all pairs degenerate; no Procrustes scale available");

  std::vector<double> inv_n(m), log_p(m);
  for (std::size_t k = 0; k < m; ++k) {
    auto& s = dm.scores()[k];
    if (s.degenerate) s.p = p_max;
    inv_n[k] = s.degenerate ? 1.0 : 1.0 / s.n;
    log_p[k] = std::log(std::max(s.p, procrustes_floor));
  }

  // Pass 2: min-max scale both statistics to [0,1].
  auto& rs = dm.rescale();
  if (m > 0) {
    const auto [n_lo, n_hi] = std::minmax_element(inv_n.begin(), inv_n.end());
    const auto [p_lo, p_hi] = std::minmax_element(log_p.begin(), log_p.end());
    rs = {*n_lo, *n_hi, *p_lo, *p_hi};
  }
  auto scaled = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };
  for (std::size_t k = 0; k < m; ++k)
    dm.values()[k] = scaled(inv_n[k], rs.inv_n_min, rs.inv_n_max) +
                     scaled(log_p[k], rs.log_p_min, rs.log_p_max);
  return dm;
}

namespace {

template <bool Parallel>
std::vector<ScoredPair> score_pairs_impl(std::span<const ImageFeatures> features,
                                         const MatchingConfig& cfg) {
  cfg.validate();
  const std::size_t n = features.size();
  const std::size_t m = pair_count(n);
  std::vector<ScoredPair> out(m);
  // Row offsets let each task recover (i, j) from its flat pair index.
  std::vector<std::size_t> row_start(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) row_start[i + 1] = row_start[i] + (n - i - 1);

  auto work = [&](std::size_t k) {
    const auto it = std::upper_bound(row_start.begin(), row_start.end(), k);
    const std::size_t i = static_cast<std::size_t>(it - row_start.begin()) - 1;
    const std::size_t j = i + 1 + (k - row_start[i]);
    out[k] = {i, j, score_pair(features[i], features[j], cfg)};
  };

  const auto count = static_cast<long long>(m);
  if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (long long k = 0; k < count; ++k) work(static_cast<std::size_t>(k));
  } else {
    for (long long k = 0; k < count; ++k) work(static_cast<std::size_t>(k));
  }
  return out;
}

}  // namespace

std::vector<ScoredPair> score_all_pairs(std::span<const ImageFeatures> features,
                                        const MatchingConfig& cfg) {
  return score_pairs_impl<true>(features, cfg);
}

std::vector<ScoredPair> score_all_pairs_serial(std::span<const ImageFeatures> features,
                                               const MatchingConfig& cfg) {
  return score_pairs_impl<false>(features, cfg);
}

void write_distance_matrix(std::ostream& out, const DistanceMatrix& dm) {
  out.write("DCD1", 4);
  le::put_u32(out, static_cast<std::uint32_t>(dm.size()));
  for (const auto& id : dm.ids()) {
    le::put_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  for (double d : dm.values()) le::put_f32(out, static_cast<float>(d));
  for (const auto& s : dm.scores())
    le::put_u16(out, static_cast<std::uint16_t>(std::clamp(s.n, 0, 65535)));
  for (const auto& s : dm.scores()) le::put_f32(out, static_cast<float>(s.p));
  const auto& r = dm.rescale();
  le::put_f64(out, r.inv_n_min);
  le::put_f64(out, r.inv_n_max);
  le::put_f64(out, r.log_p_min);
  le::put_f64(out, r.log_p_max);
}

DistanceMatrix read_distance_matrix(std::istream& in) {
  le::expect_magic(in, "DCD1");
  const std::size_t n = le::get_u32(in);
  if (n > (1u << 20)) throw FormatError("implausible N");
  DistanceMatrix dm(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto len = le::get_u32(in);
    if (len > (1u << 16)) throw FormatError("implausible id length");
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw FormatError("truncated id table");
    dm.ids()[i] = std::move(id);
  }
  for (double& d : dm.values()) d = le::get_f32(in);
  for (auto& s : dm.scores()) {
    s.n = le::get_u16(in);
    s.degenerate = s.n <= 2;
  }
  for (auto& s : dm.scores()) s.p = le::get_f32(in);
  auto& r = dm.rescale();
  r.inv_n_min = le::get_f64(in);
  r.inv_n_max = le::get_f64(in);
  r.log_p_min = le::get_f64(in);
  r.log_p_max = le::get_f64(in);
  return dm;
}

void write_distance_matrix_file(const std::string& path, const DistanceMatrix& dm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  write_distance_matrix(out, dm);
}

DistanceMatrix read_distance_matrix_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_distance_matrix(in);
}

void write_distance_csv(std::ostream& out, const DistanceMatrix& dm) {
  out << "i,j,id_i,id_j,d,n,p,rotation_deg,degenerate\n";
  out.precision(9);
  const std::size_t n = dm.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t k = pair_index(n, i, j);
      const auto& s = dm.scores()[k];
      out << i << ',' << j << ',' << dm.ids()[i] << ',' << dm.ids()[j] << ',' << dm.values()[k]
          << ',' << s.n << ',' << s.p << ',' << s.rotation_deg << ',' << (s.degenerate ? 1 : 0)
          << '\n';
    }
}

}  // namespace dieclust
