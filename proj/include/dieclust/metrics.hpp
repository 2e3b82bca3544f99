#ifndef DIECLUST_METRICS_HPP
#define DIECLUST_METRICS_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dieclust/partition.hpp"

namespace dieclust {

/// Normalized mutual information I(l,c) / sqrt(H(l) H(c)), natural logs.
/// Two constant labelings give 1.
double nmi(std::span<const int> truth, std::span<const int> predicted);

/// Pair-counting adjusted Rand index.
double ari(std::span<const int> truth, std::span<const int> predicted);

/// Largest overlap of any predicted cluster with the class, over class size.
double class_sensitivity(std::span<const int> truth, std::span<const int> predicted, int class_id);

/// w / (|class| + w), w = items outside the class that share a predicted
/// cluster with some member of the class.
double class_fdr(std::span<const int> truth, std::span<const int> predicted, int class_id);

struct ClassStats {
  int class_id = 0;
  int size = 0;
  double sensitivity = 0.0;
  double fdr = 0.0;
};

std::vector<ClassStats> class_report(std::span<const int> truth, std::span<const int> predicted);

struct WeightedSummary {
  double sensitivity = 0.0;
  double fdr = 0.0;
};

/// Class-size weighted means.
WeightedSummary weighted_summary(std::span<const ClassStats> reports);

struct VerificationBound {
  std::int64_t verification = 0;  ///< ceil(2 K Kt - K^2 - Kt^2/2 - Kt/2)
  std::int64_t oracle = 0;        ///< K (K-1) / 2
  std::int64_t brute_force = 0;   ///< N (N-1) / 2, 0 when N is not given
  double reduction = 0.0;         ///< 1 - verification / brute_force
  double oracle_reduction = 0.0;  ///< 1 - oracle / brute_force
};

/// K true classes, K-tilde clusters after breaking up false discoveries.
VerificationBound verification_bound(std::int64_t k, std::int64_t k_tilde, std::int64_t n = 0);

/// cluster size -> number of clusters of that size.
std::map<int, int> frequency_chart(const Partition& p);

struct CoinRecord {
  std::string coin_id;
  std::string obverse_image;
  std::string reverse_image;
};

struct DieLinkGraph {
  struct Edge {
    int obverse = 0;
    int reverse = 0;
    int count = 0;
  };
  std::vector<Edge> edges;       ///< sorted by (obverse, reverse)
  std::vector<int> obverse_dies; ///< distinct obverse cluster ids in use
  std::vector<int> reverse_dies;
  std::vector<int> component_sizes;  ///< vertices per connected component, descending
};

/// Throws std::invalid_argument on coin records naming unknown images.
DieLinkGraph die_link_graph(const Partition& obverse, const std::vector<std::string>& obverse_ids,
                            const Partition& reverse, const std::vector<std::string>& reverse_ids,
                            std::span<const CoinRecord> coins);

void write_die_link_csv(std::ostream& out, const DieLinkGraph& g);
/// Graphviz DOT; obverse vertices are circles, reverse vertices boxes.
void write_die_link_dot(std::ostream& out, const DieLinkGraph& g);

}  // namespace dieclust

#endif
