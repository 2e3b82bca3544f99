#ifndef DIECLUST_MICROCLUSTERING_HPP
#define DIECLUST_MICROCLUSTERING_HPP

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dieclust/distance_matrix.hpp"
#include "dieclust/partition.hpp"

namespace dieclust {

struct PriorConfig {
  double size_mean = 5.0;
  double size_variance = 15.0;
  int max_cluster_size = 25;

  void validate() const;
};

/// Cluster sizes s = 1 + X with X negative binomial of mean mu-1 and
/// variance nu (Poisson when nu == mu-1, a point mass at 1 when mu == 1).
class SizePrior {
 public:
  explicit SizePrior(const PriorConfig& cfg);
  double log_pmf(int size) const;

 private:
  double mean_;     // of X
  double var_;      // of X
  mutable std::vector<double> cache_;
};

struct LikelihoodParams {
  double cohesion_shape = 4.0;
  double cohesion_rate = 8.0;
  double repulsion_shape = 16.0;
  double repulsion_rate = 32.0 / 3.0;

  double cohesion_mean() const { return cohesion_shape / cohesion_rate; }
  double repulsion_mean() const { return repulsion_shape / repulsion_rate; }
  void validate() const;
};

/// Distances are floored here before Gamma log-densities are taken.
inline constexpr double kDistanceFloor = 1e-6;

double gamma_log_pdf(double x, double shape, double rate);

class LikelihoodOrderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unnormalized log posterior: sum_k log prior(s_k) + within-pair cohesion
/// + between-pair repulsion log-densities.
double log_partition_posterior(const DistanceMatrix& d, const Partition& partition,
                               const PriorConfig& prior, const LikelihoodParams& like);

/// Moment-matched Gamma fits to the within- and between-cluster distances
/// of `init`. Falls back to LikelihoodParams{} if either population is
/// empty; throws LikelihoodOrderError if cohesion mean >= repulsion mean.
LikelihoodParams estimate_likelihood_params(const DistanceMatrix& d, const Partition& init);

/// BUILD followed by alternating assignment / medoid update.
Partition kmedoids_init(const DistanceMatrix& d, int k);

/// Splits clusters larger than `cap` by distance to their medoid.
Partition enforce_cluster_cap(const DistanceMatrix& d, const Partition& p, int cap);

/// Uniform [0,1) doubles and bounded integers from a 64-bit Mersenne
/// twister, independent of standard-library distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * n); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

struct MoveStats {
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  double rate() const { return proposed ? static_cast<double>(accepted) / proposed : 0.0; }
};

struct SamplerStats {
  MoveStats split;
  MoveStats merge;
  MoveStats reallocate;
  MoveStats capped;  ///< proposals rejected because of the size cap
};

/// Chaperones split-merge sampler. Each step draws a pair (i,j) with
/// probability proportional to exp(-d_ij / tau) and updates only the
/// clusters holding i and j:
///   - same cluster: sequential-allocation split, MH against merge;
///   - different clusters: with probability 1/2 a merge (MH against the
///     split that would recreate the current pair), otherwise a heat-bath
///     move of one other member between the two clusters.
/// Partitions with a cluster larger than the cap have zero mass.
class ChaperonesSampler {
 public:
  ChaperonesSampler(const DistanceMatrix& d, const PriorConfig& prior,
                    const LikelihoodParams& like, const Partition& init, std::uint64_t seed,
                    double tau = 0.0);

  void step();

  Partition partition() const;
  const std::vector<int>& raw_labels() const { return label_; }
  int num_clusters() const { return static_cast<int>(active_.size()); }
  int max_cluster_size() const;
  double log_posterior() const { return log_post_; }
  const SamplerStats& stats() const { return stats_; }
  std::uint64_t iteration() const { return iteration_; }
  double tau() const { return tau_; }

  /// Recomputes the cached log posterior from scratch; returns the absolute
  /// difference from the incremental value.
  double consistency_error() const;

 private:
  double h(int a, int b) const { return h_[static_cast<std::size_t>(a) * n_ + b]; }
  double lp(int size) const { return log_size_[static_cast<std::size_t>(size)]; }
  std::pair<int, int> draw_pair();
  double sum_to(int item, const std::vector<int>& members) const;
  double cross_sum(const std::vector<int>& a, const std::vector<int>& b) const;
  /// Log-probability that sequential allocation of `others` yields the
  /// given sides; when `sample` is true the sides are drawn instead.
  double allocate(int i, int j, std::vector<int> others, std::vector<int>& side_i,
                  std::vector<int>& side_j, const std::vector<char>* target, bool sample);
  void move_item(int item, int to);
  int new_cluster();
  void release_cluster(int c);

  std::size_t n_;
  int cap_;
  double tau_;
  std::vector<double> h_;
  std::vector<double> log_size_;
  std::vector<double> pair_cdf_;
  std::vector<std::size_t> row_start_;

  std::vector<int> label_;
  std::vector<std::vector<int>> members_;
  std::vector<int> slot_;  // position of each item inside its cluster
  std::vector<int> free_;
  std::vector<int> active_;
  std::vector<int> active_pos_;

  double log_post_ = 0.0;
  double log_repulsion_total_ = 0.0;
  Rng rng_;
  SamplerStats stats_;
  std::uint64_t iteration_ = 0;
  const DistanceMatrix* d_;
  PriorConfig prior_;
  LikelihoodParams like_;
};

/// Posterior same-cluster probabilities, upper triangular.
class CoClusteringMatrix {
 public:
  CoClusteringMatrix() = default;
  explicit CoClusteringMatrix(std::size_t n) : n_(n), q_(pair_count(n), 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 1.0;
    return i < j ? q_[pair_index(n_, i, j)] : q_[pair_index(n_, j, i)];
  }
  double& upper(std::size_t i, std::size_t j) { return q_[pair_index(n_, i, j)]; }
  std::vector<double>& values() { return q_; }
  const std::vector<double>& values() const { return q_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> q_;
};

/// "DCQ1", u32 N, upper-triangular f32.
void write_coclustering(std::ostream& out, const CoClusteringMatrix& q);
CoClusteringMatrix read_coclustering(std::istream& in);

struct McmcConfig {
  std::uint64_t iterations = 750000;
  std::uint64_t burn_in = 375000;
  std::uint64_t thin = 10;
  std::uint64_t seed = 1;
  /// Diagnostics line every this many iterations; 0 disables.
  std::uint64_t log_every = 10000;
  /// Independent chains averaged into one co-clustering matrix.
  int chains = 1;

  void validate() const;
};

struct ChainDiagnostic {
  std::uint64_t iteration = 0;
  int clusters = 0;
  double log_posterior = 0.0;
  double acceptance = 0.0;
};

struct McmcResult {
  CoClusteringMatrix coclustering;
  std::vector<int> cluster_trace;  ///< K at each retained sample (first chain)
  std::vector<ChainDiagnostic> diagnostics;
  SamplerStats stats;
  std::uint64_t retained = 0;
  int max_cluster_size_seen = 0;
};

McmcResult run_mcmc(const DistanceMatrix& d, const PriorConfig& prior,
                    const LikelihoodParams& like, const Partition& init, const McmcConfig& cfg);

/// JSON lines: {"iteration":..,"K":..,"log_posterior":..,"acceptance":..}.
void write_diagnostics_jsonl(std::ostream& out, const std::vector<ChainDiagnostic>& diag);

double binder_loss(const CoClusteringMatrix& q, const Partition& p);

/// Greedy sequential allocation under Binder loss, then one-item
/// reallocation sweeps to a fixed point; best of `n_restarts` item orders.
Partition salso_point_estimate(const CoClusteringMatrix& q, int n_restarts, std::uint64_t seed);

}  // namespace dieclust

#endif
