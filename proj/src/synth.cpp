#include "dieclust/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include <opencv2/imgproc.hpp>

#include "dieclust/grid_io.hpp"

namespace dieclust {

namespace {

using Polyline = std::vector<cv::Point2d>;

constexpr int kSupersample = 3;
constexpr double kFlan = 0.38;
constexpr double kBackground = 0.12;
constexpr double kRelief = 0.45;
constexpr double kStrokeWidth = 0.022;  // coin radii
// A duplicate is the same photograph under other lighting, re-digitized.
constexpr double kDuplicateGain = 0.2;
constexpr double kDuplicateNoise = 0.15;

Polyline arc(double cx, double cy, double r, double a0, double a1, int steps = 12) {
  Polyline p;
  for (int k = 0; k <= steps; ++k) {
    const double a = a0 + (a1 - a0) * k / steps;
    p.emplace_back(cx + r * std::cos(a), cy + r * std::sin(a));
  }
  return p;
}

// Letter-like glyphs in a unit box centred on the origin, y pointing down.
std::vector<std::vector<Polyline>> glyph_library() {
  constexpr double pi = std::numbers::pi;
  return {
      {{{-0.35, 0.5}, {0, -0.5}, {0.35, 0.5}}, {{-0.18, 0.1}, {0.18, 0.1}}},                // A
      {{{0.3, -0.5}, {-0.3, -0.5}, {-0.3, 0.5}, {0.3, 0.5}}, {{-0.3, 0}, {0.15, 0}}},      // E
      {{{-0.3, -0.5}, {-0.3, 0.5}}, {{-0.3, 0}, {0.3, 0}}, {{0.3, -0.5}, {0.3, 0.5}}},     // H
      {{{0, -0.5}, {0, 0.5}}},                                                             // I
      {{{-0.3, -0.5}, {-0.3, 0.5}}, {{0.3, -0.5}, {-0.3, 0.05}, {0.3, 0.5}}},              // K
      {{{-0.4, 0.5}, {-0.4, -0.5}, {0, 0.2}, {0.4, -0.5}, {0.4, 0.5}}},                    // M
      {{{-0.3, 0.5}, {-0.3, -0.5}, {0.3, 0.5}, {0.3, -0.5}}},                              // N
      {arc(0, 0, 0.45, 0, 2 * pi, 20)},                                                    // O
      {{{-0.3, 0.5}, {-0.3, -0.5}}, arc(-0.05, -0.25, 0.25, -pi / 2, pi / 2)},             // P
      {{{-0.35, -0.5}, {0.35, -0.5}}, {{0, -0.5}, {0, 0.5}}},                              // T
      {{{-0.35, -0.5}, {0, 0.5}, {0.35, -0.5}}},                                           // V
      {{{-0.35, -0.5}, {0.35, 0.5}}, {{0.35, -0.5}, {-0.35, 0.5}}},                        // X
      {arc(0, 0, 0.45, 0.25 * pi, 1.75 * pi, 16)},                                         // C
      {arc(0, -0.25, 0.25, 0, 1.5 * pi), arc(0, 0.25, 0.25, -0.5 * pi, pi)},               // S
  };
}

Polyline place(const Polyline& glyph, double cx, double cy, double size, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Polyline out;
  for (const auto& p : glyph) {
    const double x = p.x * size, y = p.y * size;
    out.emplace_back(cx + c * x - s * y, cy + s * x + c * y);
  }
  return out;
}

// Shared layout for the coin type.
struct TypeLayout {
  struct Glyph {
    int shape;
    double angle;  // position around the rim
  };
  std::vector<Glyph> legend;
  std::vector<Polyline> figure;
};

TypeLayout make_type_layout(std::mt19937_64& rng, std::size_t n_shapes) {
  constexpr double pi = std::numbers::pi;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TypeLayout t;
  const int n_legend = 16;
  for (int g = 0; g < n_legend; ++g) {
    const double a = 0.65 * pi + (1.7 * pi) * (g + 0.5) / n_legend;
    t.legend.push_back({static_cast<int>(u(rng) * n_shapes), a});
  }
  for (int k = 0; k < 7; ++k) {
    const double r = 0.45 * std::sqrt(u(rng));
    const double phi = 2 * pi * u(rng);
    const double a0 = 2 * pi * u(rng);
    t.figure.push_back(arc(r * std::cos(phi), r * std::sin(phi), 0.08 + 0.22 * u(rng), a0,
                           a0 + (0.4 + 0.6 * u(rng)) * pi));
  }
  for (int k = 0; k < 8; ++k) {
    Polyline p;
    double x = 0.9 * (u(rng) - 0.5), y = 0.9 * (u(rng) - 0.5);
    for (int v = 0; v < 3; ++v) {
      p.emplace_back(x, y);
      x += 0.25 * (u(rng) - 0.5);
      y += 0.25 * (u(rng) - 0.5);
    }
    t.figure.push_back(p);
  }
  return t;
}

std::vector<Polyline> make_die(const TypeLayout& t, const std::vector<std::vector<Polyline>>& lib,
                               double jitter, int details, std::mt19937_64& rng) {
  constexpr double pi = std::numbers::pi;
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Polyline> strokes;
  for (const auto& g : t.legend) {
    const double a = g.angle + 0.5 * jitter * n(rng);
    const double r = 0.8 + 0.5 * jitter * n(rng);
    const double size = 0.12 * (1.0 + 2.0 * jitter * n(rng));
    const double tilt = a + pi / 2 + 3.0 * jitter * n(rng);
    for (const auto& s : lib[static_cast<std::size_t>(g.shape)])
      strokes.push_back(place(s, r * std::cos(a), r * std::sin(a), size, tilt));
  }
  for (const auto& f : t.figure) {
    const double dx = jitter * n(rng), dy = jitter * n(rng);
    Polyline p;
    for (const auto& q : f) p.emplace_back(q.x + dx + 0.3 * jitter * n(rng), q.y + dy + 0.3 * jitter * n(rng));
    strokes.push_back(p);
  }
  // Die-specific locks and letters details.
  for (int k = 0; k < details; ++k) {
    const double r = 0.6 * std::sqrt(u(rng));
    const double phi = 2 * pi * u(rng);
    const double a0 = 2 * pi * u(rng);
    strokes.push_back(arc(r * std::cos(phi), r * std::sin(phi), 0.03 + 0.05 * u(rng), a0,
                          a0 + (0.6 + 0.8 * u(rng)) * pi, 8));
  }
  return strokes;
}

cv::Mat render_die(const std::vector<Polyline>& strokes, int size) {
  const int big = size * kSupersample;
  const double radius = 0.47 * big;
  const double c = 0.5 * (big - 1);
  cv::Mat mask(big, big, CV_8U, cv::Scalar(0));
  constexpr int shift = 4;
  const double scale = 1 << shift;
  const int thickness = std::max(1, static_cast<int>(std::lround(kStrokeWidth * radius)));
  for (const auto& s : strokes) {
    std::vector<cv::Point> pts;
    for (const auto& p : s)
      pts.emplace_back(static_cast<int>(std::lround((c + p.x * radius) * scale)),
                       static_cast<int>(std::lround((c + p.y * radius) * scale)));
    cv::polylines(mask, pts, false, cv::Scalar(255), thickness, cv::LINE_AA, shift);
  }
  cv::Mat relief;
  mask.convertTo(relief, CV_64F, 1.0 / 255.0);
  cv::GaussianBlur(relief, relief, cv::Size(0, 0), 0.6 * kSupersample);

  cv::Mat img(big, big, CV_64F);
  const double flan_r = 0.98 * 0.5 * big;
  for (int y = 0; y < big; ++y)
    for (int x = 0; x < big; ++x) {
      const double dx = x - c, dy = y - c;
      const bool inside = dx * dx + dy * dy <= flan_r * flan_r;
      img.at<double>(y, x) = inside ? kFlan + kRelief * relief.at<double>(y, x) : kBackground;
    }
  cv::Mat out;
  cv::resize(img, out, cv::Size(size, size), 0, 0, cv::INTER_AREA);
  return out;
}

GrayImage to_gray(const cv::Mat& m) {
  GrayImage g(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) g(x, y) = std::clamp(m.at<double>(y, x), 0.0, 1.0);
  return g;
}

struct Strike {
  cv::Mat geometry;  // warped, blurred, worn die image before lighting
  double severity = 0.0;
};

Strike strike(const cv::Mat& die, const SyntheticBenchmarkSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int size = die.rows;
  cv::Mat img = die.clone();

  const double angle = spec.rotation_jitter_deg * u(rng);
  const double sx = spec.shift_jitter * size * u(rng), sy = spec.shift_jitter * size * u(rng);
  if (angle != 0.0 || sx != 0.0 || sy != 0.0) {
    const double c = 0.5 * (size - 1);
    cv::Mat rot = cv::getRotationMatrix2D(cv::Point2f(static_cast<float>(c), static_cast<float>(c)), angle, 1.0);
    rot.at<double>(0, 2) += sx;
    rot.at<double>(1, 2) += sy;
    cv::warpAffine(die, img, rot, die.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT,
                   cv::Scalar(kBackground));
  }

  double wear = 0.0;
  if (spec.wear_strength > 0.0) {
    // Flattened relief in a few smooth patches: pull towards the flan level.
    wear = spec.wear_strength * 0.5 * (1.0 + u(rng));
    cv::Mat field(size, size, CV_64F, cv::Scalar(0.0));
    const int blobs = 3;
    for (int b = 0; b < blobs; ++b) {
      const double bx = size * (0.5 + 0.3 * u(rng)), by = size * (0.5 + 0.3 * u(rng));
      const double br = size * (0.12 + 0.08 * std::abs(u(rng)));
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const double d2 = ((x - bx) * (x - bx) + (y - by) * (y - by)) / (br * br);
          field.at<double>(y, x) += std::exp(-0.5 * d2);
        }
    }
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double a = wear * std::min(1.0, field.at<double>(y, x));
        double& v = img.at<double>(y, x);
        if (v > kFlan) v = kFlan + (1.0 - a) * (v - kFlan);
      }
  }

  double sigma = 0.0;
  if (spec.blur_sigma_max > 0.0) {
    sigma = spec.blur_sigma_min + (spec.blur_sigma_max - spec.blur_sigma_min) * 0.5 * (1.0 + u(rng));
    if (sigma > 0.0) cv::GaussianBlur(img, img, cv::Size(0, 0), sigma);
  }
  const double blur_span = std::max(spec.blur_sigma_max, 1e-9);
  const double wear_span = std::max(spec.wear_strength, 1e-9);
  return {img, 0.5 * (sigma / blur_span + wear / wear_span)};
}

// Sensor noise is kept separate so a second photograph of the same coin can
// reuse it under different lighting.
cv::Mat noise_field(int size, double level, std::mt19937_64& rng) {
  cv::Mat f(size, size, CV_64F, cv::Scalar(0.0));
  if (level > 0.0) {
    std::normal_distribution<double> n(0.0, level);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) f.at<double>(y, x) = n(rng);
  }
  return f;
}

cv::Mat photograph(const cv::Mat& geometry, const cv::Mat& noise, double contrast_jitter,
                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double gain = 1.0 + contrast_jitter * u(rng);
  const double offset = 0.25 * contrast_jitter * u(rng);
  cv::Mat img = geometry + noise;
  if (gain != 1.0 || offset != 0.0) img = gain * img + offset;
  return img;
}

int sample_size(double mean, double variance, std::mt19937_64& rng) {
  const double m = mean - 1.0;
  if (m <= 0.0) return 1;
  if (variance <= m) return 1 + static_cast<int>(std::poisson_distribution<int>(m)(rng));
  // Gamma-Poisson mixture: r = m^2 / (v - m), scale (v - m) / m.
  std::gamma_distribution<double> gamma(m * m / (variance - m), (variance - m) / m);
  const double lambda = gamma(rng);
  if (lambda <= 0.0) return 1;
  return 1 + static_cast<int>(std::poisson_distribution<long>(lambda)(rng));
}

std::string image_id(int die, int coin, bool dup) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "d%03d_c%04d%s", die + 1, coin + 1, dup ? "_dup" : "");
  return buf;
}

}  // namespace

void SyntheticBenchmarkSpec::validate() const {
  if (n_dies < 2) throw std::invalid_argument("n_dies must be >= 2");
  if (!fixed_sizes.empty()) {
    if (static_cast<int>(fixed_sizes.size()) != n_dies)
      throw std::invalid_argument("fixed_sizes needs one entry per die");
    for (int s : fixed_sizes)
      if (s < 1) throw std::invalid_argument("die sizes must be >= 1");
  }
  if (!(size_mean >= 1.0)) throw std::invalid_argument("size_mean must be >= 1");
  if (!(size_variance >= 0.0)) throw std::invalid_argument("size_variance must be >= 0");
  if (image_size < 32) throw std::invalid_argument("image_size must be >= 32");
  if (die_jitter < 0 || die_details < 0) throw std::invalid_argument("negative die variation");
  if (blur_sigma_min < 0 || blur_sigma_max < blur_sigma_min)
    throw std::invalid_argument("blur range must satisfy 0 <= min <= max");
  if (noise_level < 0 || contrast_jitter < 0 || contrast_jitter >= 1 || rotation_jitter_deg < 0 ||
      shift_jitter < 0 || shift_jitter > 0.1)
    throw std::invalid_argument("degradation knob out of range");
  if (wear_strength < 0 || wear_strength > 1) throw std::invalid_argument("wear_strength must be in [0,1]");
  if (duplicate_probability < 0 || duplicate_probability > 1)
    throw std::invalid_argument("duplicate_probability must be in [0,1]");
}

SyntheticBenchmarkSpec SyntheticBenchmarkSpec::pristine(int n_dies) {
  SyntheticBenchmarkSpec s;
  s.n_dies = n_dies;
  s.blur_sigma_min = s.blur_sigma_max = 0.0;
  s.noise_level = 0.0;
  s.contrast_jitter = 0.0;
  s.wear_strength = 0.0;
  s.rotation_jitter_deg = 0.0;
  s.shift_jitter = 0.0;
  return s;
}

std::vector<int> SyntheticBenchmark::labels() const {
  std::vector<int> out;
  for (const auto& im : images) out.push_back(im.die);
  return out;
}

std::vector<std::string> SyntheticBenchmark::ids() const {
  std::vector<std::string> out;
  for (const auto& im : images) out.push_back(im.id);
  return out;
}

SyntheticBenchmark generate_synthetic_benchmark(const SyntheticBenchmarkSpec& spec,
                                                std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const auto lib = glyph_library();
  const TypeLayout layout = make_type_layout(rng, lib.size());

  std::vector<int> sizes = spec.fixed_sizes;
  if (sizes.empty())
    for (int d = 0; d < spec.n_dies; ++d) sizes.push_back(sample_size(spec.size_mean, spec.size_variance, rng));

  SyntheticBenchmark bench;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int coin = 0;
  for (int d = 0; d < spec.n_dies; ++d) {
    const cv::Mat die = render_die(make_die(layout, lib, spec.die_jitter, spec.die_details, rng), spec.image_size);
    for (int k = 0; k < sizes[static_cast<std::size_t>(d)]; ++k, ++coin) {
      const Strike s = strike(die, spec, rng);
      const int grade = 1 + std::clamp(static_cast<int>(s.severity * 5.0), 0, 4);
      const cv::Mat noise = noise_field(spec.image_size, spec.noise_level, rng);
      bench.images.push_back({image_id(d, coin, false), d, coin, false, grade,
                              to_gray(photograph(s.geometry, noise, spec.contrast_jitter, rng))});
      if (spec.duplicate_probability > 0.0 && u(rng) < spec.duplicate_probability) {
        const cv::Mat light = noise + noise_field(spec.image_size, kDuplicateNoise * spec.noise_level, rng);
        bench.images.push_back({image_id(d, coin, true), d, coin, true, grade,
                                to_gray(photograph(s.geometry, light, kDuplicateGain, rng))});
      }
    }
  }
  return bench;
}

void write_synthetic_benchmark(const std::string& dir, const SyntheticBenchmark& bench) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  std::ofstream labels(fs::path(dir) / "labels.csv");
  std::ofstream manifest(fs::path(dir) / "manifest.csv");
  if (!labels || !manifest) throw std::runtime_error("cannot write benchmark into " + dir);
  labels << "image_id,die_id\n";
  manifest << "image_id,path,grade\n";
  for (const auto& im : bench.images) {
    const std::string rel = "images/" + im.id + ".png";
    write_png8((fs::path(dir) / rel).string(), im.image);
    labels << im.id << ',' << im.die + 1 << '\n';
    manifest << im.id << ',' << rel << ',' << im.grade << '\n';
  }
}

}  // namespace dieclust
