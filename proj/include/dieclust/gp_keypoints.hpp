#ifndef DIECLUST_GP_KEYPOINTS_HPP
#define DIECLUST_GP_KEYPOINTS_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dieclust/grid.hpp"

namespace dieclust {

struct KernelConfig {
  double lengthscale = 10.24;
  /// Half-width (Chebyshev) beyond which the half-lengthscale factor is zero.
  double truncation_radius = 40.96;
  int n_keypoints = 300;

  /// lengthscale = frac * height, truncation at 4 lengthscales.
  static KernelConfig for_height(int height, double frac = 0.02, int n_keypoints = 300);
  void validate() const;
};

/// exp(-|x-y|^2 / (2 l^2)).
double se_kernel(Pixel x, Pixel y, double lengthscale);

/// The edge-weighted kernel k(x,y) = sum_z g(x-z) w(z) g(z-y), where g is the
/// squared-exponential kernel at half the lengthscale, truncated to a
/// (2R+1)^2 box. Holds a reference to the weight grid.
class ReweightedKernel {
 public:
  ReweightedKernel(const Grid<double>& weights, double lengthscale, double truncation_radius);

  double operator()(Pixel x, Pixel y) const;

  /// Truncated half-lengthscale factor g along one axis, indexed by offset.
  double factor(int offset) const {
    const int a = offset < 0 ? -offset : offset;
    return a > radius_ ? 0.0 : factor_[static_cast<std::size_t>(a)];
  }
  int radius() const { return radius_; }
  const Grid<double>& weights() const { return *weights_; }

 private:
  const Grid<double>* weights_;
  int radius_;
  std::vector<double> factor_;
};

struct VarianceField {
  Grid<double> values;
  int n_selected = 0;
};

/// Prior variances k(x,x) for every pixel, as a separable convolution of the
/// weights with g^2. Rows are processed in parallel.
VarianceField prior_variance_field(const WeightField& field, const KernelConfig& cfg);

/// Direct per-pixel summation of k(x,x); serial reference for the convolution.
VarianceField prior_variance_field_reference(const WeightField& field, const KernelConfig& cfg);

struct Keypoint {
  int x = 0;
  int y = 0;
  double variance = 0.0;  ///< field value when selected
};

struct KeypointSet {
  std::string image_id;
  std::vector<Keypoint> points;
  /// True when the field collapsed before n_keypoints were found.
  bool exhausted = false;
};

/// Greedy maximum-variance selection with the diagonal (rank-one) posterior
/// update. Exposed so tests can inspect intermediate fields.
class VarianceUpdater {
 public:
  static constexpr double kRoundoff = 1e-12;

  VarianceUpdater(const WeightField& field, const KernelConfig& cfg);

  const VarianceField& field() const { return current_; }
  const VarianceField& prior() const { return prior_; }

  /// Row-major-first argmax of the current field over in-region pixels.
  /// Returns false when no pixel has positive variance.
  bool argmax(Pixel& best, double& value) const;

  /// Subtracts k(.,p)^2 / prior(p); values within round-off of zero
  /// (kRoundoff * max prior) are clamped to 0, and the field at p becomes 0.
  void condition_on(Pixel p);

  /// k(., p) on the (4R+1)^2 window around p, clipped to the grid.
  /// Window origin is returned in `origin`; row-major with `extent` columns.
  std::vector<double> kernel_column(Pixel p, Pixel& origin, int& extent_x, int& extent_y) const;

 private:
  const WeightField* field_;
  ReweightedKernel kernel_;
  VarianceField prior_;
  VarianceField current_;
  double floor_ = 0.0;
};

KeypointSet select_keypoints(const WeightField& field, const KernelConfig& cfg,
                             std::string image_id = {});

/// Exact Schur-complement posterior variance given the selected points.
/// Gram diagonal is regularized by 1e-8 * max(G). Throws std::runtime_error
/// if the regularized Gram matrix is still not positive definite.
VarianceField exact_posterior_variance(const WeightField& field, const KernelConfig& cfg,
                                       std::span<const Pixel> selected);

/// CSV with header image_id,rank,x,y,variance.
void write_keypoints_csv(std::ostream& out, std::span<const KeypointSet> sets);
std::vector<KeypointSet> read_keypoints_csv(std::istream& in);

/// Keypoints in the DCW1 grid container: a 3-column grid, one row per
/// keypoint holding (x, y, variance).
Grid<double> keypoints_to_grid(const KeypointSet& set);
KeypointSet keypoints_from_grid(const Grid<double>& grid, std::string image_id);

}  // namespace dieclust

#endif
