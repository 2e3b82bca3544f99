#ifndef DIECLUST_IMAGING_HPP
#define DIECLUST_IMAGING_HPP

#include <cstdint>
#include <span>
#include <string>

#include "dieclust/grid.hpp"

namespace dieclust {

struct PreprocessConfig {
  int target_height = 512;
  double tv_weight_1 = 0.08;
  double tv_weight_2 = 0.04;
  int tv_max_iters = 100;
  double clahe_clip = 2.0;
  int clahe_tiles = 8;
  double mask_radius_frac = 0.92;

  void validate() const;
};

/// Decodes PNG/JPEG bytes, converts to gray and resizes to `target_height`
/// (width rounded to preserve aspect ratio). Values are scaled to [0,1].
GrayImage load_and_normalize(std::span<const std::uint8_t> raw_image_bytes, int target_height);
GrayImage load_and_normalize_file(const std::string& path, int target_height);

/// Isotropic discrete total variation with forward differences.
double total_variation(const GrayImage& img);

struct TvResult {
  GrayImage image;
  int iterations = 0;
  bool converged = false;
};

/// ROF denoising by Chambolle's dual projection. Output is clipped to [0,1]
/// and never has larger total variation than the input.
TvResult tv_denoise(const GrayImage& img, double weight, int max_iters = 100);

/// Contrast limited adaptive histogram equalization over a tiles x tiles grid.
/// `clip` is relative to the mean bin count; infinity disables clipping.
GrayImage clahe(const GrayImage& img, double clip, int tiles);

/// tv_denoise -> clahe -> tv_denoise.
GrayImage preprocess(const GrayImage& img, const PreprocessConfig& cfg);

/// |3x3 eight-neighbour Laplacian| with reflect-101 borders. Unmasked.
WeightField laplacian_relief(const GrayImage& img);

/// Zeroes weights outside the disk. Throws DegenerateInputError when nothing
/// non-zero survives.
WeightField apply_circular_mask(const WeightField& field, double center_x, double center_y,
                                double radius);

/// Disk centred on the image with radius frac * min(w,h)/2.
CircularMask default_mask(int width, int height, double radius_frac);

}  // namespace dieclust

#endif
