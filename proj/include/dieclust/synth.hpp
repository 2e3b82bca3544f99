#ifndef DIECLUST_SYNTH_HPP
#define DIECLUST_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dieclust/grid.hpp"

namespace dieclust {

/// Procedural coin-die benchmark. All dies share one coin-type layout
/// (legend glyphs around the rim, a central figure of arcs and strokes);
/// each die perturbs it and adds its own small details. Each coin is a
/// degraded strike of its die.
struct SyntheticBenchmarkSpec {
  int n_dies = 20;
  /// Coins per die are 1 + X, X negative binomial with mean size_mean - 1
  /// and variance size_variance.
  double size_mean = 5.0;
  double size_variance = 15.0;
  /// Overrides the sampled sizes when non-empty (one entry per die).
  std::vector<int> fixed_sizes;

  int image_size = 256;
  /// Die-to-die displacement of layout elements, in coin radii.
  double die_jitter = 0.013;
  int die_details = 3;

  double blur_sigma_min = 0.4;  ///< pixels
  double blur_sigma_max = 1.9;
  double noise_level = 0.06;
  double contrast_jitter = 0.15;
  double wear_strength = 0.6;
  double rotation_jitter_deg = 4.0;
  double shift_jitter = 0.01;  ///< fraction of the image size
  double duplicate_probability = 0.0;

  void validate() const;
  /// Every degradation knob set to zero.
  static SyntheticBenchmarkSpec pristine(int n_dies);
};

struct SyntheticImage {
  std::string id;
  int die = 0;
  int coin = 0;            ///< global coin index; duplicates share it
  bool duplicate = false;  ///< second photograph of an earlier coin
  int grade = 1;           ///< preservation, 1 (fine) .. 5 (badly worn)
  GrayImage image;
};

struct SyntheticBenchmark {
  std::vector<SyntheticImage> images;
  std::vector<int> labels() const;
  std::vector<std::string> ids() const;
};

SyntheticBenchmark generate_synthetic_benchmark(const SyntheticBenchmarkSpec& spec,
                                                std::uint64_t seed);

/// Writes <dir>/images/<id>.png, <dir>/labels.csv (image_id,die_id) and
/// <dir>/manifest.csv (image_id,path,grade); creates directories.
void write_synthetic_benchmark(const std::string& dir, const SyntheticBenchmark& bench);

}  // namespace dieclust

#endif
