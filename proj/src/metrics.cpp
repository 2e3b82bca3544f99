#include "dieclust/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace dieclust {

namespace {

struct Contingency {
  std::vector<int> row_sums;
  std::vector<int> col_sums;
  std::map<std::pair<int, int>, int> cells;
  std::size_t total = 0;
};

Contingency contingency(std::span<const int> l, std::span<const int> c) {
  if (l.size() != c.size()) throw std::invalid_argument("labelings differ in length");
  if (l.empty()) throw std::invalid_argument("empty labeling");
  std::unordered_map<int, int> lr, cr;
  Contingency t;
  t.total = l.size();
  for (std::size_t i = 0; i < l.size(); ++i) {
    auto [li, a] = lr.try_emplace(l[i], static_cast<int>(lr.size()));
    auto [ci, b] = cr.try_emplace(c[i], static_cast<int>(cr.size()));
    if (a) t.row_sums.push_back(0);
    if (b) t.col_sums.push_back(0);
    ++t.row_sums[li->second];
    ++t.col_sums[ci->second];
    ++t.cells[{li->second, ci->second}];
  }
  return t;
}

double entropy(const std::vector<int>& counts, double n) {
  double h = 0.0;
  for (int c : counts)
    if (c > 0) h -= (c / n) * std::log(c / n);
  return h;
}

double choose2(double v) { return v * (v - 1.0) / 2.0; }

}  // namespace

double nmi(std::span<const int> truth, std::span<const int> predicted) {
  const auto t = contingency(truth, predicted);
  const double n = static_cast<double>(t.total);
  const double hl = entropy(t.row_sums, n);
  const double hc = entropy(t.col_sums, n);
  if (hl == 0.0 && hc == 0.0) return 1.0;
  if (hl == 0.0 || hc == 0.0) return 0.0;
  double mi = 0.0;
  for (const auto& [key, count] : t.cells) {
    const double pij = count / n;
    mi += pij * std::log(pij / ((t.row_sums[key.first] / n) * (t.col_sums[key.second] / n)));
  }
  return std::clamp(mi / std::sqrt(hl * hc), 0.0, 1.0);
}

double ari(std::span<const int> truth, std::span<const int> predicted) {
  const auto t = contingency(truth, predicted);
  double index = 0.0, rows = 0.0, cols = 0.0;
  for (const auto& [key, count] : t.cells) index += choose2(count);
  for (int r : t.row_sums) rows += choose2(r);
  for (int c : t.col_sums) cols += choose2(c);
  const double total = choose2(static_cast<double>(t.total));
  const double expected = total > 0 ? rows * cols / total : 0.0;
  const double max_index = 0.5 * (rows + cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double class_sensitivity(std::span<const int> truth, std::span<const int> predicted, int class_id) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("labelings differ in length");
  std::unordered_map<int, int> overlap;
  int size = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == class_id) {
      ++size;
      ++overlap[predicted[i]];
    }
  if (size == 0) throw std::invalid_argument("unknown class id");
  int best = 0;
  for (const auto& [cluster, count] : overlap) best = std::max(best, count);
  return static_cast<double>(best) / size;
}

double class_fdr(std::span<const int> truth, std::span<const int> predicted, int class_id) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("labelings differ in length");
  std::set<int> touched;
  int size = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == class_id) {
      ++size;
      touched.insert(predicted[i]);
    }
  if (size == 0) throw std::invalid_argument("unknown class id");
  int foreign = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] != class_id && touched.count(predicted[i])) ++foreign;
  return static_cast<double>(foreign) / (size + foreign);
}

std::vector<ClassStats> class_report(std::span<const int> truth, std::span<const int> predicted) {
  std::map<int, int> sizes;
  for (int l : truth) ++sizes[l];
  std::vector<ClassStats> out;
  for (const auto& [id, size] : sizes)
    out.push_back({id, size, class_sensitivity(truth, predicted, id),
                   class_fdr(truth, predicted, id)});
  return out;
}

WeightedSummary weighted_summary(std::span<const ClassStats> reports) {
  if (reports.empty()) throw std::invalid_argument("empty class report");
  double w = 0.0, s = 0.0, f = 0.0;
  for (const auto& r : reports) {
    w += r.size;
    s += r.size * r.sensitivity;
    f += r.size * r.fdr;
  }
  return {s / w, f / w};
}

VerificationBound verification_bound(std::int64_t k, std::int64_t k_tilde, std::int64_t n) {
  if (k < 1) throw std::invalid_argument("K must be >= 1");
  if (k_tilde < k) throw std::invalid_argument("K-tilde must be >= K");
  // 2 K Kt - K^2 - Kt^2/2 - Kt/2 = (4 K Kt - 2 K^2 - Kt^2 - Kt) / 2, Kt^2 + Kt is even.
  const std::int64_t twice = 4 * k * k_tilde - 2 * k * k - k_tilde * k_tilde - k_tilde;
  VerificationBound b;
  b.verification = twice / 2 + (twice % 2 != 0 && twice > 0 ? 1 : 0);
  b.oracle = k * (k - 1) / 2;
  if (n > 1) {
    b.brute_force = n * (n - 1) / 2;
    b.reduction = 1.0 - static_cast<double>(b.verification) / static_cast<double>(b.brute_force);
    b.oracle_reduction = 1.0 - static_cast<double>(b.oracle) / static_cast<double>(b.brute_force);
  }
  return b;
}

std::map<int, int> frequency_chart(const Partition& p) {
  if (p.size() == 0) throw std::invalid_argument("empty partition");
  std::map<int, int> chart;
  for (int s : p.cluster_sizes()) ++chart[s];
  return chart;
}

DieLinkGraph die_link_graph(const Partition& obverse, const std::vector<std::string>& obverse_ids,
                            const Partition& reverse, const std::vector<std::string>& reverse_ids,
                            std::span<const CoinRecord> coins) {
  if (obverse_ids.size() != obverse.size() || reverse_ids.size() != reverse.size())
    throw std::invalid_argument("id tables do not match partitions");
  std::unordered_map<std::string, int> obv_index, rev_index;
  for (std::size_t i = 0; i < obverse_ids.size(); ++i) obv_index[obverse_ids[i]] = obverse[i];
  for (std::size_t i = 0; i < reverse_ids.size(); ++i) rev_index[reverse_ids[i]] = reverse[i];

  std::map<std::pair<int, int>, int> edges;
  for (const auto& coin : coins) {
    const auto o = obv_index.find(coin.obverse_image);
    const auto r = rev_index.find(coin.reverse_image);
    if (o == obv_index.end() || r == rev_index.end())
      throw std::invalid_argument("coin " + coin.coin_id + " references an unknown image");
    ++edges[{o->second, r->second}];
  }

  DieLinkGraph g;
  std::set<int> obv, rev;
  for (const auto& [key, count] : edges) {
    g.edges.push_back({key.first, key.second, count});
    obv.insert(key.first);
    rev.insert(key.second);
  }
  g.obverse_dies.assign(obv.begin(), obv.end());
  g.reverse_dies.assign(rev.begin(), rev.end());

  // Union-find over obverse vertices [0, |obv|) and reverse vertices after them.
  std::map<int, int> ov, rv;
  for (int o : g.obverse_dies) ov.emplace(o, static_cast<int>(ov.size()));
  for (int r : g.reverse_dies) rv.emplace(r, static_cast<int>(ov.size() + rv.size()));
  std::vector<int> parent(ov.size() + rv.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : g.edges) parent[find(ov[e.obverse])] = find(rv[e.reverse]);
  std::map<int, int> comp;
  for (std::size_t v = 0; v < parent.size(); ++v) ++comp[find(static_cast<int>(v))];
  for (const auto& [root, size] : comp) g.component_sizes.push_back(size);
  std::sort(g.component_sizes.rbegin(), g.component_sizes.rend());
  return g;
}

void write_die_link_csv(std::ostream& out, const DieLinkGraph& g) {
  out << "obverse_die,reverse_die,coins\n";
  for (const auto& e : g.edges) out << e.obverse + 1 << ',' << e.reverse + 1 << ',' << e.count << '\n';
}

void write_die_link_dot(std::ostream& out, const DieLinkGraph& g) {
  out << "graph die_links {\n";
  for (int o : g.obverse_dies) out << "  O" << o + 1 << " [shape=circle];\n";
  for (int r : g.reverse_dies) out << "  R" << r + 1 << " [shape=box];\n";
  for (const auto& e : g.edges)
    out << "  O" << e.obverse + 1 << " -- R" << e.reverse + 1 << " [weight=" << e.count
        << ", label=\"" << e.count << "\"];\n";
  out << "}\n";
}

}  // namespace dieclust
