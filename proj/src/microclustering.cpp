#include "dieclust/microclustering.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "dieclust/grid_io.hpp"
#include "json.hpp"

namespace dieclust {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}
}  // namespace

void PriorConfig::validate() const {
  if (!(size_mean >= 1.0)) throw std::invalid_argument("size_mean must be >= 1");
  if (!(size_variance >= size_mean - 1.0 - 1e-12))
    throw std::invalid_argument("size_variance must be >= size_mean - 1");
  if (max_cluster_size < 1) throw std::invalid_argument("max_cluster_size must be >= 1");
}

SizePrior::SizePrior(const PriorConfig& cfg) : mean_(cfg.size_mean - 1.0), var_(cfg.size_variance) {
  cfg.validate();
}

double SizePrior::log_pmf(int size) const {
  if (size < 1) return kNegInf;
  const auto k = static_cast<std::size_t>(size - 1);
  if (k < cache_.size()) return cache_[k];
  for (std::size_t x = cache_.size(); x <= k; ++x) {
    const double xd = static_cast<double>(x);
    double v;
    if (mean_ <= 0.0) {
      v = x == 0 ? 0.0 : kNegInf;
    } else if (var_ - mean_ <= 1e-12 * std::max(1.0, mean_)) {
      v = xd * std::log(mean_) - mean_ - std::lgamma(xd + 1.0);
    } else {
      const double r = mean_ * mean_ / (var_ - mean_);
      v = std::lgamma(xd + r) - std::lgamma(r) - std::lgamma(xd + 1.0) +
          r * std::log(r / (r + mean_)) + xd * std::log(mean_ / (r + mean_));
    }
    cache_.push_back(v);
  }
  return cache_[k];
}

void LikelihoodParams::validate() const {
  if (!(cohesion_shape > 0.0 && cohesion_rate > 0.0 && repulsion_shape > 0.0 &&
        repulsion_rate > 0.0))
    throw std::invalid_argument("likelihood parameters must be positive");
}

double gamma_log_pdf(double x, double shape, double rate) {
  x = std::max(x, kDistanceFloor);
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_partition_posterior(const DistanceMatrix& d, const Partition& partition,
                               const PriorConfig& prior, const LikelihoodParams& like) {
  if (partition.size() != d.size()) throw std::invalid_argument("partition size mismatch");
  like.validate();
  const SizePrior sizes(prior);
  double total = 0.0;
  for (int s : partition.cluster_sizes()) total += sizes.log_pmf(s);
  const std::size_t n = d.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dij = d(i, j);
      if (!std::isfinite(dij)) throw std::invalid_argument("non-finite distance");
      total += partition[i] == partition[j]
                   ? gamma_log_pdf(dij, like.cohesion_shape, like.cohesion_rate)
                   : gamma_log_pdf(dij, like.repulsion_shape, like.repulsion_rate);
    }
  return total;
}

LikelihoodParams estimate_likelihood_params(const DistanceMatrix& d, const Partition& init) {
  if (init.size() != d.size()) throw std::invalid_argument("partition size mismatch");
  double sw = 0, sw2 = 0, sb = 0, sb2 = 0;
  std::size_t nw = 0, nb = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j) {
      const double v = d(i, j);
      if (init[i] == init[j]) {
        sw += v;
        sw2 += v * v;
        ++nw;
      } else {
        sb += v;
        sb2 += v * v;
        ++nb;
      }
    }
  if (nw == 0 || nb == 0) return LikelihoodParams{};

  static constexpr double kMaxShape = 1e4;
  auto fit = [](double s, double s2, std::size_t count, double& shape, double& rate) {
    const double mean = std::max(s / count, kDistanceFloor);
    const double var = std::max(0.0, s2 / count - (s / count) * (s / count));
    shape = var > 0.0 ? std::min(kMaxShape, mean * mean / var) : kMaxShape;
    rate = shape / mean;
  };
  LikelihoodParams out;
  fit(sw, sw2, nw, out.cohesion_shape, out.cohesion_rate);
  fit(sb, sb2, nb, out.repulsion_shape, out.repulsion_rate);
  if (!(out.cohesion_mean() < out.repulsion_mean()))
    throw LikelihoodOrderError("within-cluster mean distance is not below between-cluster mean");
  return out;
}

Partition kmedoids_init(const DistanceMatrix& d, int k) {
  const std::size_t n = d.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) throw std::invalid_argument("k must be in [1, N]");

  std::vector<int> medoids;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<char> is_medoid(n, 0);
  {
    std::size_t best = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += d(i, j);
      if (s < best_sum) {
        best_sum = s;
        best = i;
      }
    }
    medoids.push_back(static_cast<int>(best));
    is_medoid[best] = 1;
    for (std::size_t j = 0; j < n; ++j) nearest[j] = d(best, j);
  }
  while (medoids.size() < static_cast<std::size_t>(k)) {
    std::size_t best = n;
    double best_gain = -1.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (is_medoid[c]) continue;
      double gain = 0.0;
      for (std::size_t j = 0; j < n; ++j) gain += std::max(0.0, nearest[j] - d(c, j));
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    medoids.push_back(static_cast<int>(best));
    is_medoid[best] = 1;
    for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], d(best, j));
  }

  std::vector<int> assign(n, 0);
  for (int round = 0; round < 100; ++round) {
    std::fill(is_medoid.begin(), is_medoid.end(), 0);
    for (int m : medoids) is_medoid[m] = 1;
    for (std::size_t j = 0; j < n; ++j) {
      int best = 0;
      for (std::size_t c = 0; c < medoids.size(); ++c) {
        if (static_cast<std::size_t>(medoids[c]) == j) {
          best = static_cast<int>(c);
          break;
        }
        if (d(medoids[c], j) < d(medoids[best], j)) best = static_cast<int>(c);
      }
      if (is_medoid[j] && static_cast<std::size_t>(medoids[best]) != j) {
        for (std::size_t c = 0; c < medoids.size(); ++c)
          if (static_cast<std::size_t>(medoids[c]) == j) best = static_cast<int>(c);
      }
      assign[j] = best;
    }
    bool changed = false;
    for (std::size_t c = 0; c < medoids.size(); ++c) {
      std::vector<int> members;
      for (std::size_t j = 0; j < n; ++j)
        if (assign[j] == static_cast<int>(c)) members.push_back(static_cast<int>(j));
      auto cost = [&](int cand) {
        double s = 0.0;
        for (int l : members) s += d(cand, l);
        return s;
      };
      int best = medoids[c];
      double best_cost = cost(best);
      for (int cand : members) {
        const double cc = cost(cand);
        if (cc < best_cost) {
          best_cost = cc;
          best = cand;
        }
      }
      if (best != medoids[c]) {
        medoids[c] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return Partition(assign);
}

Partition enforce_cluster_cap(const DistanceMatrix& d, const Partition& p, int cap) {
  if (cap < 1) throw std::invalid_argument("cap must be >= 1");
  std::vector<int> labels(p.size());
  int next = 0;
  for (auto& members : p.clusters()) {
    if (static_cast<int>(members.size()) <= cap) {
      for (int m : members) labels[m] = next;
      ++next;
      continue;
    }
    int medoid = members.front();
    double best = std::numeric_limits<double>::infinity();
    for (int c : members) {
      double s = 0.0;
      for (int l : members) s += d(c, l);
      if (s < best) {
        best = s;
        medoid = c;
      }
    }
    std::stable_sort(members.begin(), members.end(),
                     [&](int a, int b) { return d(medoid, a) < d(medoid, b); });
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k > 0 && k % static_cast<std::size_t>(cap) == 0) ++next;
      labels[members[k]] = next;
    }
    ++next;
  }
  return Partition(labels);
}

// ---------------------------------------------------------------------------

ChaperonesSampler::ChaperonesSampler(const DistanceMatrix& d, const PriorConfig& prior,
                                     const LikelihoodParams& like, const Partition& init,
                                     std::uint64_t seed, double tau)
    : n_(d.size()), cap_(prior.max_cluster_size), tau_(tau), rng_(seed), d_(&d), prior_(prior),
      like_(like) {
  prior.validate();
  like.validate();
  if (init.size() != n_) throw std::invalid_argument("initial partition size mismatch");
  for (int s : init.cluster_sizes())
    if (s > cap_) throw std::invalid_argument("initial partition violates the cluster-size cap");

  const SizePrior sizes(prior);
  log_size_.resize(n_ + 2);
  for (std::size_t s = 0; s < log_size_.size(); ++s) log_size_[s] = sizes.log_pmf(static_cast<int>(s));

  h_.assign(n_ * n_, 0.0);
  std::vector<double> dist;
  dist.reserve(pair_count(n_));
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j) {
      const double v = d(i, j);
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite distance");
      dist.push_back(v);
      const double coh = gamma_log_pdf(v, like.cohesion_shape, like.cohesion_rate);
      const double rep = gamma_log_pdf(v, like.repulsion_shape, like.repulsion_rate);
      log_repulsion_total_ += rep;
      h_[i * n_ + j] = h_[j * n_ + i] = coh - rep;
    }

  if (!(tau_ > 0.0)) {
    if (dist.empty()) {
      tau_ = 1.0;
    } else {
      std::vector<double> sorted = dist;
      const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
      std::nth_element(sorted.begin(), mid, sorted.end());
      tau_ = *mid / 3.0;
      if (!(tau_ > 0.0)) tau_ = 1.0;
    }
  }
  pair_cdf_.resize(dist.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    acc += std::exp(-dist[k] / tau_);
    pair_cdf_[k] = acc;
  }
  row_start_.assign(n_ + 1, 0);
  for (std::size_t i = 0; i < n_; ++i) row_start_[i + 1] = row_start_[i] + (n_ - i - 1);

  label_.assign(n_, -1);
  slot_.assign(n_, 0);
  active_pos_.clear();
  for (std::size_t i = 0; i < n_; ++i) {
    const int c = init[i];
    while (static_cast<int>(members_.size()) <= c) {
      members_.emplace_back();
      active_pos_.push_back(static_cast<int>(active_.size()));
      active_.push_back(static_cast<int>(members_.size()) - 1);
    }
    label_[i] = c;
    slot_[i] = static_cast<int>(members_[c].size());
    members_[c].push_back(static_cast<int>(i));
  }
  log_post_ = 0.0;
  log_post_ = -consistency_error();
}

double ChaperonesSampler::consistency_error() const {
  double total = log_repulsion_total_;
  for (int c : active_) {
    const auto& m = members_[c];
    total += lp(static_cast<int>(m.size()));
    for (std::size_t a = 0; a < m.size(); ++a)
      for (std::size_t b = a + 1; b < m.size(); ++b) total += h(m[a], m[b]);
  }
  return std::abs(total - log_post_);
}

Partition ChaperonesSampler::partition() const { return Partition(label_); }

int ChaperonesSampler::max_cluster_size() const {
  int best = 0;
  for (int c : active_) best = std::max(best, static_cast<int>(members_[c].size()));
  return best;
}

std::pair<int, int> ChaperonesSampler::draw_pair() {
  const double u = rng_.uniform() * pair_cdf_.back();
  auto it = std::upper_bound(pair_cdf_.begin(), pair_cdf_.end(), u);
  if (it == pair_cdf_.end()) --it;
  const std::size_t k = static_cast<std::size_t>(it - pair_cdf_.begin());
  const auto row = std::upper_bound(row_start_.begin(), row_start_.end(), k);
  const std::size_t i = static_cast<std::size_t>(row - row_start_.begin()) - 1;
  const std::size_t j = i + 1 + (k - row_start_[i]);
  return {static_cast<int>(i), static_cast<int>(j)};
}

double ChaperonesSampler::sum_to(int item, const std::vector<int>& members) const {
  double s = 0.0;
  for (int m : members) s += h(item, m);
  return s;
}

double ChaperonesSampler::cross_sum(const std::vector<int>& a, const std::vector<int>& b) const {
  double s = 0.0;
  for (int x : a) s += sum_to(x, b);
  return s;
}

double ChaperonesSampler::allocate(int i, int j, std::vector<int> others, std::vector<int>& side_i,
                                   std::vector<int>& side_j, const std::vector<char>* target,
                                   bool sample) {
  // Random order as an auxiliary variable, drawn identically for both directions.
  for (std::size_t k = others.size(); k > 1; --k) std::swap(others[k - 1], others[rng_.below(k)]);
  side_i.assign(1, i);
  side_j.assign(1, j);
  double log_q = 0.0;
  for (int k : others) {
    const int si = static_cast<int>(side_i.size()), sj = static_cast<int>(side_j.size());
    double wi = si + 1 > cap_ ? kNegInf : sum_to(k, side_i) + lp(si + 1) - lp(si);
    double wj = sj + 1 > cap_ ? kNegInf : sum_to(k, side_j) + lp(sj + 1) - lp(sj);
    const double norm = log_add_exp(wi, wj);
    bool to_i;
    if (sample) {
      to_i = wi != kNegInf && std::log(rng_.uniform()) < wi - norm;
    } else {
      to_i = (*target)[static_cast<std::size_t>(k)] != 0;
    }
    const double chosen = to_i ? wi - norm : wj - norm;
    if (chosen == kNegInf) return kNegInf;
    log_q += chosen;
    (to_i ? side_i : side_j).push_back(k);
  }
  return log_q;
}

int ChaperonesSampler::new_cluster() {
  int c;
  if (!free_.empty()) {
    c = free_.back();
    free_.pop_back();
  } else {
    c = static_cast<int>(members_.size());
    members_.emplace_back();
    active_pos_.push_back(0);
  }
  active_pos_[c] = static_cast<int>(active_.size());
  active_.push_back(c);
  return c;
}

void ChaperonesSampler::release_cluster(int c) {
  const int pos = active_pos_[c];
  const int last = active_.back();
  active_[pos] = last;
  active_pos_[last] = pos;
  active_.pop_back();
  free_.push_back(c);
}

void ChaperonesSampler::move_item(int item, int to) {
  const int from = label_[item];
  auto& src = members_[from];
  const int pos = slot_[item];
  src[pos] = src.back();
  slot_[src[pos]] = pos;
  src.pop_back();
  label_[item] = to;
  slot_[item] = static_cast<int>(members_[to].size());
  members_[to].push_back(item);
  if (src.empty()) release_cluster(from);
}

void ChaperonesSampler::step() {
  ++iteration_;
  if (n_ < 2) return;
  const auto [i, j] = draw_pair();
  const int ci = label_[i], cj = label_[j];

  if (ci == cj) {
    ++stats_.split.proposed;
    std::vector<int> others;
    for (int m : members_[ci])
      if (m != i && m != j) others.push_back(m);
    const int total = static_cast<int>(members_[ci].size());
    std::vector<int> side_i, side_j;
    const double log_q = allocate(i, j, std::move(others), side_i, side_j, nullptr, true);
    const double delta = lp(static_cast<int>(side_i.size())) + lp(static_cast<int>(side_j.size())) -
                         lp(total) - cross_sum(side_i, side_j);
    const double log_accept = delta + std::log(0.5) - log_q;
    if (std::log(rng_.uniform()) < log_accept) {
      const int fresh = new_cluster();
      for (int m : side_j) move_item(m, fresh);
      log_post_ += delta;
      ++stats_.split.accepted;
    }
    return;
  }

  if (rng_.uniform() < 0.5) {
    ++stats_.merge.proposed;
    const auto& a = members_[ci];
    const auto& b = members_[cj];
    const int merged = static_cast<int>(a.size() + b.size());
    if (merged > cap_) {
      ++stats_.capped.proposed;
      return;
    }
    std::vector<int> others;
    std::vector<char> target(n_, 0);
    for (int m : a) {
      target[static_cast<std::size_t>(m)] = 1;
      if (m != i) others.push_back(m);
    }
    for (int m : b)
      if (m != j) others.push_back(m);
    std::vector<int> side_i, side_j;
    const double log_q = allocate(i, j, std::move(others), side_i, side_j, &target, false);
    const double delta = lp(merged) - lp(static_cast<int>(a.size())) -
                         lp(static_cast<int>(b.size())) + cross_sum(a, b);
    const double log_accept = delta + log_q - std::log(0.5);
    if (std::log(rng_.uniform()) < log_accept) {
      const std::vector<int> moving = b;
      for (int m : moving) move_item(m, ci);
      log_post_ += delta;
      ++stats_.merge.accepted;
    }
    return;
  }

  ++stats_.reallocate.proposed;
  const auto& a = members_[ci];
  const auto& b = members_[cj];
  const std::size_t movable = a.size() + b.size() - 2;
  if (movable == 0) {
    ++stats_.reallocate.accepted;
    return;
  }
  std::size_t r = rng_.below(movable);
  int k = -1;
  for (int m : a)
    if (m != i && r-- == 0) {
      k = m;
      break;
    }
  if (k < 0)
    for (int m : b)
      if (m != j && r-- == 0) {
        k = m;
        break;
      }
  const int from = label_[k];
  const int to = from == ci ? cj : ci;
  const int s_from = static_cast<int>(members_[from].size());
  const int s_to = static_cast<int>(members_[to].size());
  if (s_to + 1 > cap_) {
    ++stats_.capped.proposed;
    return;
  }
  const double delta = sum_to(k, members_[to]) - sum_to(k, members_[from]) + lp(s_from - 1) +
                       lp(s_to + 1) - lp(s_from) - lp(s_to);
  // Heat-bath choice between staying and moving.
  const double p_move = delta >= 0 ? 1.0 / (1.0 + std::exp(-delta))
                                   : std::exp(delta) / (1.0 + std::exp(delta));
  if (rng_.uniform() < p_move) {
    move_item(k, to);
    log_post_ += delta;
    ++stats_.reallocate.accepted;
  }
}

// ---------------------------------------------------------------------------

void write_coclustering(std::ostream& out, const CoClusteringMatrix& q) {
  out.write("DCQ1", 4);
  le::put_u32(out, static_cast<std::uint32_t>(q.size()));
  for (double v : q.values()) le::put_f32(out, static_cast<float>(v));
}

CoClusteringMatrix read_coclustering(std::istream& in) {
  le::expect_magic(in, "DCQ1");
  const std::size_t n = le::get_u32(in);
  if (n > (1u << 20)) throw FormatError("implausible N");
  CoClusteringMatrix q(n);
  for (double& v : q.values()) v = le::get_f32(in);
  return q;
}

void McmcConfig::validate() const {
  if (!(iterations > burn_in)) throw std::invalid_argument("iterations must exceed burn_in");
  if (thin < 1) throw std::invalid_argument("thin must be >= 1");
  if (chains < 1) throw std::invalid_argument("chains must be >= 1");
}

McmcResult run_mcmc(const DistanceMatrix& d, const PriorConfig& prior,
                    const LikelihoodParams& like, const Partition& init, const McmcConfig& cfg) {
  cfg.validate();
  const std::size_t n = d.size();
  McmcResult result;
  result.coclustering = CoClusteringMatrix(n);

  std::vector<std::vector<std::uint32_t>> counts(static_cast<std::size_t>(cfg.chains));
  std::vector<std::uint64_t> retained(static_cast<std::size_t>(cfg.chains), 0);
  std::vector<SamplerStats> stats(static_cast<std::size_t>(cfg.chains));
  std::vector<int> max_seen(static_cast<std::size_t>(cfg.chains), 0);

#pragma omp parallel for schedule(static, 1)
  for (int c = 0; c < cfg.chains; ++c) {
    auto& cnt = counts[static_cast<std::size_t>(c)];
    cnt.assign(pair_count(n), 0);
    ChaperonesSampler sampler(d, prior, like, init,
                              cfg.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(c));
    int local_max = sampler.max_cluster_size();
    for (std::uint64_t t = 1; t <= cfg.iterations; ++t) {
      sampler.step();
      local_max = std::max(local_max, sampler.max_cluster_size());
      if (c == 0 && cfg.log_every && t % cfg.log_every == 0) {
        const auto& st = sampler.stats();
        const std::uint64_t prop = st.split.proposed + st.merge.proposed + st.reallocate.proposed;
        const std::uint64_t acc = st.split.accepted + st.merge.accepted + st.reallocate.accepted;
        result.diagnostics.push_back({t, sampler.num_clusters(), sampler.log_posterior(),
                                      prop ? static_cast<double>(acc) / prop : 0.0});
      }
      if (t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0) {
        ++retained[static_cast<std::size_t>(c)];
        if (c == 0) result.cluster_trace.push_back(sampler.num_clusters());
        const auto& labels = sampler.raw_labels();
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = a + 1; b < n; ++b)
            if (labels[a] == labels[b]) ++cnt[pair_index(n, a, b)];
      }
    }
    stats[static_cast<std::size_t>(c)] = sampler.stats();
    max_seen[static_cast<std::size_t>(c)] = local_max;
  }

  std::uint64_t total = 0;
  for (int c = 0; c < cfg.chains; ++c) {
    total += retained[static_cast<std::size_t>(c)];
    const auto& cnt = counts[static_cast<std::size_t>(c)];
    for (std::size_t k = 0; k < cnt.size(); ++k) result.coclustering.values()[k] += cnt[k];
    const auto& s = stats[static_cast<std::size_t>(c)];
    for (auto [dst, src] : {std::pair{&result.stats.split, &s.split},
                            std::pair{&result.stats.merge, &s.merge},
                            std::pair{&result.stats.reallocate, &s.reallocate},
                            std::pair{&result.stats.capped, &s.capped}}) {
      dst->proposed += src->proposed;
      dst->accepted += src->accepted;
    }
    result.max_cluster_size_seen = std::max(result.max_cluster_size_seen, max_seen[c]);
  }
  if (total > 0)
    for (double& v : result.coclustering.values()) v /= static_cast<double>(total);
  result.retained = total;
  return result;
}

void write_diagnostics_jsonl(std::ostream& out, const std::vector<ChainDiagnostic>& diag) {
  for (const auto& d : diag)
    out << nlohmann::json{{"iteration", d.iteration},
                          {"K", d.clusters},
                          {"log_posterior", d.log_posterior},
                          {"acceptance", d.acceptance}}
               .dump()
        << '\n';
}

double binder_loss(const CoClusteringMatrix& q, const Partition& p) {
  if (q.size() != p.size()) throw std::invalid_argument("size mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j)
      loss += p[i] == p[j] ? 1.0 - q(i, j) : q(i, j);
  return loss;
}

Partition salso_point_estimate(const CoClusteringMatrix& q, int n_restarts, std::uint64_t seed) {
  const std::size_t n = q.size();
  if (n == 0) return Partition{};
  n_restarts = std::max(1, n_restarts);
  // cost[i][j] = 1 - 2 q_ij: placing i with j adds this on top of a constant.
  std::vector<double> cost(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = i == j ? 0.0 : 1.0 - 2.0 * q(i, j);

  Rng rng(seed);
  Partition best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < n_restarts; ++r) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);

    std::vector<int> label(n, -1);
    std::vector<std::vector<double>> acc;  // acc[c][i] = sum of cost[i][m] over members m of c
    std::vector<int> size;
    auto insert = [&](std::size_t item, int c) {
      if (c < 0) {
        for (std::size_t k = 0; k < size.size() && c < 0; ++k)
          if (size[k] == 0) c = static_cast<int>(k);
        if (c < 0) {
          c = static_cast<int>(size.size());
          size.push_back(0);
          acc.emplace_back(n, 0.0);
        }
      }
      label[item] = c;
      ++size[c];
      for (std::size_t k = 0; k < n; ++k) acc[c][k] += cost[k * n + item];
    };
    auto remove = [&](std::size_t item) {
      const int c = label[item];
      --size[c];
      for (std::size_t k = 0; k < n; ++k) acc[c][k] -= cost[k * n + item];
      label[item] = -1;
    };
    // Cheapest non-empty cluster, or -1 (new cluster, cost 0) when none is negative.
    auto cheapest = [&](std::size_t item, double& best_cost) {
      int choice = -1;
      best_cost = 0.0;
      for (std::size_t c = 0; c < size.size(); ++c) {
        if (size[c] == 0) continue;
        if (acc[c][item] < best_cost) {
          best_cost = acc[c][item];
          choice = static_cast<int>(c);
        }
      }
      return choice;
    };

    for (int item : order) {
      double unused = 0.0;
      insert(static_cast<std::size_t>(item), cheapest(static_cast<std::size_t>(item), unused));
    }
    for (int sweep = 0; sweep < 1000; ++sweep) {
      bool changed = false;
      for (int it : order) {
        const auto item = static_cast<std::size_t>(it);
        const int before = label[item];
        remove(item);
        const double stay_cost = size[before] == 0 ? 0.0 : acc[before][item];
        double best_cost = 0.0;
        const int choice = cheapest(item, best_cost);
        // Move only on strict improvement so the loss never increases.
        const bool same_slot = choice == before || (choice < 0 && size[before] == 0);
        if (same_slot || !(best_cost < stay_cost - 1e-12)) {
          insert(item, before);
        } else {
          insert(item, choice);
          changed = true;
        }
      }
      if (!changed) break;
    }

    Partition candidate(label);
    const double loss = binder_loss(q, candidate);
    if (loss < best_loss - 1e-12) {
      best_loss = loss;
      best = std::move(candidate);
    }
  }
  return best;
}

}  // namespace dieclust
