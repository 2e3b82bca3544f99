#include "dieclust/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace dieclust {

void validate_gray_image(const GrayImage& img) {
  if (img.width() < 8 || img.height() < 8)
    throw std::invalid_argument("image must be at least 8x8");
  for (double v : img.values()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw std::invalid_argument("image values must be finite and in [0,1]");
  }
}

void PreprocessConfig::validate() const {
  if (target_height < 64) throw std::invalid_argument("target_height must be >= 64");
  if (!(tv_weight_1 > 0.0) || !(tv_weight_2 > 0.0))
    throw std::invalid_argument("tv weights must be > 0");
  if (tv_max_iters < 1) throw std::invalid_argument("tv_max_iters must be >= 1");
  if (!(clahe_clip > 0.0)) throw std::invalid_argument("clahe_clip must be > 0");
  if (clahe_tiles < 1) throw std::invalid_argument("clahe_tiles must be >= 1");
  if (!(mask_radius_frac > 0.0) || mask_radius_frac > 1.0)
    throw std::invalid_argument("mask_radius_frac must be in (0,1]");
}

GrayImage load_and_normalize(std::span<const std::uint8_t> raw_image_bytes, int target_height) {
  if (raw_image_bytes.empty()) throw FormatError("empty image buffer");
  if (target_height < 8) throw std::invalid_argument("target_height too small");
  const cv::Mat buf(1, static_cast<int>(raw_image_bytes.size()), CV_8U,
                    const_cast<std::uint8_t*>(raw_image_bytes.data()));
  cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
  if (decoded.empty()) throw FormatError("undecodable image data");

  double scale = 1.0 / 255.0;
  if (decoded.depth() == CV_16U) scale = 1.0 / 65535.0;
  cv::Mat as_double;
  decoded.convertTo(as_double, CV_64F, scale);

  const int new_width = static_cast<int>(
      std::lround(static_cast<double>(decoded.cols) * target_height / decoded.rows));
  if (new_width < 8) throw DegenerateInputError("degenerate width after resize");

  cv::Mat resized;
  if (decoded.rows == target_height && new_width == decoded.cols) {
    resized = as_double;
  } else {
    const int interp = target_height < decoded.rows ? cv::INTER_AREA : cv::INTER_LINEAR;
    cv::resize(as_double, resized, cv::Size(new_width, target_height), 0, 0, interp);
  }

  GrayImage out(resized.cols, resized.rows);
  for (int y = 0; y < resized.rows; ++y) {
    const double* row = resized.ptr<double>(y);
    for (int x = 0; x < resized.cols; ++x) out(x, y) = std::clamp(row[x], 0.0, 1.0);
  }
  return out;
}

GrayImage load_and_normalize_file(const std::string& path, int target_height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open image file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_and_normalize(bytes, target_height);
}

double total_variation(const GrayImage& img) {
  const int w = img.width(), h = img.height();
  double tv = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x + 1 < w ? img(x + 1, y) - img(x, y) : 0.0;
      const double dy = y + 1 < h ? img(x, y + 1) - img(x, y) : 0.0;
      tv += std::sqrt(dx * dx + dy * dy);
    }
  }
  return tv;
}

namespace {

// Backward-difference divergence, the negative adjoint of the forward gradient.
void divergence(const Grid<double>& px, const Grid<double>& py, Grid<double>& div) {
  const int w = px.width(), h = px.height();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double d = 0.0;
      if (x < w - 1) d += px(x, y);
      if (x > 0) d -= px(x - 1, y);
      if (y < h - 1) d += py(x, y);
      if (y > 0) d -= py(x, y - 1);
      div(x, y) = d;
    }
  }
}

}  // namespace

TvResult tv_denoise(const GrayImage& img, double weight, int max_iters) {
  if (!(weight > 0.0)) throw std::invalid_argument("tv weight must be > 0");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  const int w = img.width(), h = img.height();
  constexpr double kStep = 0.25;
  constexpr double kTol = 1e-4;

  Grid<double> px(w, h), py(w, h), div(w, h), g(w, h);
  TvResult result;
  for (int it = 0; it < max_iters; ++it) {
    divergence(px, py, div);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = div[i] - img[i] / weight;

    double max_change = 0.0;
#pragma omp parallel for schedule(static) reduction(max : max_change)
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double gx = x + 1 < w ? g(x + 1, y) - g(x, y) : 0.0;
        const double gy = y + 1 < h ? g(x, y + 1) - g(x, y) : 0.0;
        const double norm = std::sqrt(gx * gx + gy * gy);
        const double denom = 1.0 + kStep * norm;
        const double nx = (px(x, y) + kStep * gx) / denom;
        const double ny = (py(x, y) + kStep * gy) / denom;
        max_change = std::max({max_change, std::abs(nx - px(x, y)), std::abs(ny - py(x, y))});
        px(x, y) = nx;
        py(x, y) = ny;
      }
    }
    result.iterations = it + 1;
    if (max_change < kTol) {
      result.converged = true;
      break;
    }
  }

  divergence(px, py, div);
  GrayImage out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::clamp(img[i] - weight * div[i], 0.0, 1.0);

  // An unconverged iterate can in principle overshoot; the input is always feasible.
  if (total_variation(out) > total_variation(img)) {
    result.image = img;
    result.converged = false;
    return result;
  }
  result.image = std::move(out);
  return result;
}

GrayImage clahe(const GrayImage& img, double clip, int tiles) {
  if (tiles < 1) throw std::invalid_argument("clahe tiles must be >= 1");
  if (!(clip > 0.0)) throw std::invalid_argument("clahe clip must be > 0");
  const int w = img.width(), h = img.height();
  if (w < tiles || h < tiles) throw std::invalid_argument("image smaller than tile grid");

  constexpr int kBins = 256;
  auto bin_of = [](double v) { return std::min(kBins - 1, static_cast<int>(v * kBins)); };

  std::vector<int> x_edges(tiles + 1), y_edges(tiles + 1);
  for (int t = 0; t <= tiles; ++t) {
    x_edges[t] = static_cast<int>(static_cast<long long>(t) * w / tiles);
    y_edges[t] = static_cast<int>(static_cast<long long>(t) * h / tiles);
  }

  // Per-tile lookup tables mapping bin -> equalized value.
  std::vector<std::array<double, kBins>> luts(static_cast<std::size_t>(tiles) * tiles);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < tiles * tiles; ++t) {
    const int tx = t % tiles, ty = t / tiles;
    std::array<double, kBins> hist{};
    int count = 0;
    for (int y = y_edges[ty]; y < y_edges[ty + 1]; ++y)
      for (int x = x_edges[tx]; x < x_edges[tx + 1]; ++x) {
        hist[bin_of(img(x, y))] += 1.0;
        ++count;
      }
    if (std::isfinite(clip)) {
      const double limit = std::max(1.0, clip * count / kBins);
      double excess = 0.0;
      for (double& b : hist) {
        if (b > limit) {
          excess += b - limit;
          b = limit;
        }
      }
      const double share = excess / kBins;
      for (double& b : hist) b += share;
    }
    double cdf = 0.0;
    auto& lut = luts[t];
    for (int b = 0; b < kBins; ++b) {
      cdf += hist[b];
      lut[b] = std::clamp(cdf / count, 0.0, 1.0);
    }
  }

  std::vector<double> x_centers(tiles), y_centers(tiles);
  for (int t = 0; t < tiles; ++t) {
    x_centers[t] = 0.5 * (x_edges[t] + x_edges[t + 1] - 1);
    y_centers[t] = 0.5 * (y_edges[t] + y_edges[t + 1] - 1);
  }
  auto locate = [tiles](const std::vector<double>& centers, int coord, int& lo, int& hi,
                        double& frac) {
    if (coord <= centers.front()) {
      lo = hi = 0;
      frac = 0.0;
    } else if (coord >= centers.back()) {
      lo = hi = tiles - 1;
      frac = 0.0;
    } else {
      lo = 0;
      while (lo + 1 < tiles && centers[lo + 1] <= coord) ++lo;
      hi = std::min(lo + 1, tiles - 1);
      frac = hi == lo ? 0.0 : (coord - centers[lo]) / (centers[hi] - centers[lo]);
    }
  };

  GrayImage out(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    int ty0 = 0, ty1 = 0;
    double fy = 0.0;
    locate(y_centers, y, ty0, ty1, fy);
    for (int x = 0; x < w; ++x) {
      int tx0 = 0, tx1 = 0;
      double fx = 0.0;
      locate(x_centers, x, tx0, tx1, fx);
      const int b = bin_of(img(x, y));
      const double v00 = luts[static_cast<std::size_t>(ty0) * tiles + tx0][b];
      const double v10 = luts[static_cast<std::size_t>(ty0) * tiles + tx1][b];
      const double v01 = luts[static_cast<std::size_t>(ty1) * tiles + tx0][b];
      const double v11 = luts[static_cast<std::size_t>(ty1) * tiles + tx1][b];
      const double top = v00 + fx * (v10 - v00);
      const double bottom = v01 + fx * (v11 - v01);
      out(x, y) = std::clamp(top + fy * (bottom - top), 0.0, 1.0);
    }
  }
  return out;
}

GrayImage preprocess(const GrayImage& img, const PreprocessConfig& cfg) {
  cfg.validate();
  GrayImage stage = tv_denoise(img, cfg.tv_weight_1, cfg.tv_max_iters).image;
  stage = clahe(stage, cfg.clahe_clip, cfg.clahe_tiles);
  return tv_denoise(stage, cfg.tv_weight_2, cfg.tv_max_iters).image;
}

WeightField laplacian_relief(const GrayImage& img) {
  const int w = img.width(), h = img.height();
  auto reflect = [](int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
  };
  WeightField field;
  field.weights = Grid<double>(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Differences, so flat neighbourhoods give exactly zero.
      const double c = img(x, y);
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (dx != 0 || dy != 0) acc += img(reflect(x + dx, w), reflect(y + dy, h)) - c;
      field.weights(x, y) = std::abs(acc);
    }
  }
  return field;
}

WeightField apply_circular_mask(const WeightField& field, double center_x, double center_y,
                                double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("mask radius must be > 0");
  CircularMask mask{center_x, center_y, radius};
  if (field.masked) {
    // Intersecting with an existing identical mask is a no-op; otherwise the
    // smaller disk wins only where both contain the pixel.
    if (field.mask.center_x == center_x && field.mask.center_y == center_y)
      mask.radius = std::min(radius, field.mask.radius);
  }
  WeightField out;
  out.weights = field.weights;
  out.mask = mask;
  out.masked = true;
  bool any = false;
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (!mask.contains(x, y) || !field.in_region(x, y)) {
        out.weights(x, y) = 0.0;
      } else if (out.weights(x, y) > 0.0) {
        any = true;
      }
    }
  }
  if (!any) throw DegenerateInputError("masked weight field is identically zero");
  return out;
}

CircularMask default_mask(int width, int height, double radius_frac) {
  return {0.5 * (width - 1), 0.5 * (height - 1), radius_frac * 0.5 * std::min(width, height)};
}

}  // namespace dieclust
