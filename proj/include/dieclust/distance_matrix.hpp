#ifndef DIECLUST_DISTANCE_MATRIX_HPP
#define DIECLUST_DISTANCE_MATRIX_HPP

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dieclust/matching.hpp"

namespace dieclust {

/// Row-major position of (i, j), i < j, in an upper-triangular array.
inline std::size_t pair_index(std::size_t n, std::size_t i, std::size_t j) {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}
inline std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2; }

struct RescaleParams {
  double inv_n_min = 0.0;
  double inv_n_max = 0.0;
  double log_p_min = 0.0;
  double log_p_max = 0.0;
};

/// Symmetric dissimilarities with per-pair provenance. The diagonal is
/// implicit and zero.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n);

  /// Builds a matrix from a dense symmetric table (provenance left empty).
  static DistanceMatrix from_dense(const std::vector<std::vector<double>>& dense);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    return i < j ? d_[pair_index(n_, i, j)] : d_[pair_index(n_, j, i)];
  }
  double& upper(std::size_t i, std::size_t j) { return d_[pair_index(n_, i, j)]; }

  std::vector<double>& values() { return d_; }
  const std::vector<double>& values() const { return d_; }
  std::vector<PairScore>& scores() { return scores_; }
  const std::vector<PairScore>& scores() const { return scores_; }
  std::vector<std::string>& ids() { return ids_; }
  const std::vector<std::string>& ids() const { return ids_; }
  RescaleParams& rescale() { return rescale_; }
  const RescaleParams& rescale() const { return rescale_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
  std::vector<PairScore> scores_;
  std::vector<std::string> ids_;
  RescaleParams rescale_;
};

struct ScoredPair {
  std::size_t i = 0;
  std::size_t j = 0;
  PairScore score;
};

/// Two-pass assembly: degenerate pairs get p := max non-degenerate p and
/// 1/n := 1, then 1/n and log p are min-max scaled to [0,1] and summed.
/// Throws DegenerateInputError when every pair is degenerate.
DistanceMatrix assemble_distance_matrix(std::span<const ScoredPair> scores, std::size_t n,
                                        std::vector<std::string> ids, double procrustes_floor);

/// Scores every unordered pair; OpenMP with dynamic scheduling over pairs.
std::vector<ScoredPair> score_all_pairs(std::span<const ImageFeatures> features,
                                        const MatchingConfig& cfg);
/// Same computation on one thread, for cross-checking the parallel kernel.
std::vector<ScoredPair> score_all_pairs_serial(std::span<const ImageFeatures> features,
                                               const MatchingConfig& cfg);

/// "DCD1" binary layout, see README.
void write_distance_matrix(std::ostream& out, const DistanceMatrix& dm);
DistanceMatrix read_distance_matrix(std::istream& in);
void write_distance_matrix_file(const std::string& path, const DistanceMatrix& dm);
DistanceMatrix read_distance_matrix_file(const std::string& path);

/// One row per pair: i,j,id_i,id_j,d,n,p,rotation_deg,degenerate.
void write_distance_csv(std::ostream& out, const DistanceMatrix& dm);

}  // namespace dieclust

#endif
