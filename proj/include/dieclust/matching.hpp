#ifndef DIECLUST_MATCHING_HPP
#define DIECLUST_MATCHING_HPP

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dieclust/gp_keypoints.hpp"
#include "dieclust/grid.hpp"

namespace dieclust {

inline constexpr int kDescriptorDim = 128;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

using DescriptorMatrix = Eigen::Matrix<float, Eigen::Dynamic, kDescriptorDim, Eigen::RowMajor>;

/// 4x4 spatial x 8 orientation gradient histograms, L2-normalized, fixed
/// orientation. Rows of `flat` are all-zero descriptors of gradient-free patches.
struct DescriptorSet {
  DescriptorMatrix descriptors;
  std::vector<bool> flat;
  std::vector<Point2> points;

  std::size_t size() const { return points.size(); }
};

DescriptorSet compute_descriptors(const GrayImage& img, const KeypointSet& kps, int patch_radius);

struct Match {
  int a = 0;
  int b = 0;
  friend bool operator==(const Match&, const Match&) = default;
};

enum class MatchStage { prematched, filtered };

struct MatchSet {
  std::vector<Match> matches;
  MatchStage stage = MatchStage::prematched;

  std::size_t size() const { return matches.size(); }
};

/// Nearest-neighbour descriptor matching with Lowe's ratio test, made
/// one-to-one by keeping the closer of competing matches on the B side.
MatchSet prematch(const DescriptorSet& a, const DescriptorSet& b, double ratio_threshold);

/// True when ‖a_m - a_n‖ / ‖b_m - b_n‖ lies in [1/(1+delta), 1+delta].
bool distortion_consistent(Point2 a_m, Point2 a_n, Point2 b_m, Point2 b_n, double delta);

/// Greedy consensus: repeatedly drop the violating match that is consistent
/// with the fewest others until all retained pairs are consistent.
MatchSet low_distortion_filter(const MatchSet& matches, std::span<const Point2> pts_a,
                               std::span<const Point2> pts_b, double distortion_bound);

struct ProcrustesResult {
  double distance = 0.0;
  double rotation_deg = 0.0;
};

/// Rigid (rotation + translation) alignment of a onto b in closed form.
/// Throws std::invalid_argument on empty or unequal inputs.
ProcrustesResult procrustes_distance(std::span<const Point2> a, std::span<const Point2> b);

struct MatchingConfig {
  int patch_radius = 24;
  double ratio_threshold = 0.8;
  double distortion_bound = 0.15;
  double rotation_gate_deg = 20.0;
  /// Lower bound applied to p before taking logs.
  double procrustes_floor = 1e-4;

  static MatchingConfig for_height(int height);
  void validate() const;
};

/// Everything the pair stage needs from one image.
struct ImageFeatures {
  std::string image_id;
  int height = 0;
  DescriptorSet descriptors;
};

ImageFeatures extract_features(const GrayImage& img, const KeypointSet& kps,
                               const MatchingConfig& cfg);

struct PairScore {
  int n = 0;
  double p = 0.0;
  double rotation_deg = 0.0;
  bool degenerate = true;
};

PairScore score_pair(const ImageFeatures& a, const ImageFeatures& b, const MatchingConfig& cfg);

}  // namespace dieclust

#endif
