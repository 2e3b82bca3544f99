#include "dieclust/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace dieclust {

DescriptorSet compute_descriptors(const GrayImage& img, const KeypointSet& kps, int patch_radius) {
  if (patch_radius < 2) throw std::invalid_argument("patch_radius must be >= 2");
  const int w = img.width(), h = img.height();
  const std::size_t n = kps.points.size();

  DescriptorSet out;
  out.descriptors = DescriptorMatrix::Zero(static_cast<Eigen::Index>(n), kDescriptorDim);
  out.flat.assign(n, true);
  out.points.reserve(n);

  constexpr int kCells = 4;
  constexpr int kOrient = 8;
  const double cell = 2.0 * patch_radius / kCells;
  const double sigma = patch_radius;
  const double two_pi = 2.0 * std::numbers::pi;

  for (std::size_t k = 0; k < n; ++k) {
    const auto& kp = kps.points[k];
    out.points.push_back({static_cast<double>(kp.x), static_cast<double>(kp.y)});
    std::array<double, kDescriptorDim> hist{};
    for (int dy = -patch_radius; dy <= patch_radius; ++dy) {
      const int y = kp.y + dy;
      if (y < 1 || y >= h - 1) continue;
      for (int dx = -patch_radius; dx <= patch_radius; ++dx) {
        const int x = kp.x + dx;
        if (x < 1 || x >= w - 1) continue;
        const double gx = 0.5 * (img(x + 1, y) - img(x - 1, y));
        const double gy = 0.5 * (img(x, y + 1) - img(x, y - 1));
        const double mag = std::sqrt(gx * gx + gy * gy);
        if (mag == 0.0) continue;
        const double weight = mag * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));

        // Trilinear distribution over (row cell, column cell, orientation).
        const double u = (dx + patch_radius) / cell - 0.5;
        const double v = (dy + patch_radius) / cell - 0.5;
        double theta = std::atan2(gy, gx);
        if (theta < 0.0) theta += two_pi;
        const double o = theta / two_pi * kOrient;
        const int u0 = static_cast<int>(std::floor(u)), v0 = static_cast<int>(std::floor(v));
        const int o0 = static_cast<int>(std::floor(o));
        const double fu = u - u0, fv = v - v0, fo = o - o0;
        for (int iv = 0; iv < 2; ++iv) {
          const int cv = v0 + iv;
          if (cv < 0 || cv >= kCells) continue;
          const double wv = iv ? fv : 1.0 - fv;
          for (int iu = 0; iu < 2; ++iu) {
            const int cu = u0 + iu;
            if (cu < 0 || cu >= kCells) continue;
            const double wu = iu ? fu : 1.0 - fu;
            for (int io = 0; io < 2; ++io) {
              const int co = (o0 + io) % kOrient;
              const double wo = io ? fo : 1.0 - fo;
              hist[static_cast<std::size_t>((cv * kCells + cu) * kOrient + co)] +=
                  weight * wv * wu * wo;
            }
          }
        }
      }
    }

    auto normalize = [&hist]() {
      double norm = 0.0;
      for (double v : hist) norm += v * v;
      norm = std::sqrt(norm);
      if (norm < 1e-12) return false;
      for (double& v : hist) v /= norm;
      return true;
    };
    if (!normalize()) continue;
    for (double& v : hist) v = std::min(v, 0.2);
    if (!normalize()) continue;
    out.flat[k] = false;
    for (int i = 0; i < kDescriptorDim; ++i)
      out.descriptors(static_cast<Eigen::Index>(k), i) = static_cast<float>(hist[i]);
  }
  return out;
}

MatchSet prematch(const DescriptorSet& a, const DescriptorSet& b, double ratio_threshold) {
  MatchSet out;
  out.stage = MatchStage::prematched;
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nb = static_cast<Eigen::Index>(b.size());
  if (na == 0 || nb == 0) return out;

  // |x - y|^2 = |x|^2 + |y|^2 - 2 x.y; descriptors are unit or zero.
  const Eigen::MatrixXf dots = a.descriptors * b.descriptors.transpose();
  const Eigen::VectorXf a_sq = a.descriptors.rowwise().squaredNorm();
  const Eigen::VectorXf b_sq = b.descriptors.rowwise().squaredNorm();
  const double ratio_sq = ratio_threshold * ratio_threshold;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<int> best_b(static_cast<std::size_t>(na), -1);
  std::vector<double> best_d(static_cast<std::size_t>(na), kInf);
  for (Eigen::Index i = 0; i < na; ++i) {
    if (a.flat[i]) continue;
    double d1 = kInf, d2 = kInf;
    int j1 = -1;
    for (Eigen::Index j = 0; j < nb; ++j) {
      if (b.flat[j]) continue;
      const double d = std::max(0.0, static_cast<double>(a_sq(i)) + b_sq(j) - 2.0 * dots(i, j));
      if (d < d1) {
        d2 = d1;
        d1 = d;
        j1 = static_cast<int>(j);
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (j1 < 0) continue;
    if (d1 < ratio_sq * d2) {
      best_b[i] = j1;
      best_d[i] = d1;
    }
  }

  // One-to-one: for each b keep the closest a (lowest a index on ties).
  std::vector<int> owner(static_cast<std::size_t>(nb), -1);
  for (Eigen::Index i = 0; i < na; ++i) {
    const int j = best_b[i];
    if (j < 0) continue;
    int& cur = owner[j];
    if (cur < 0 || best_d[i] < best_d[cur]) cur = static_cast<int>(i);
  }
  for (Eigen::Index i = 0; i < na; ++i) {
    const int j = best_b[i];
    if (j >= 0 && owner[j] == i) out.matches.push_back({static_cast<int>(i), j});
  }
  return out;
}

bool distortion_consistent(Point2 a_m, Point2 a_n, Point2 b_m, Point2 b_n, double delta) {
  const double da = std::hypot(a_m.x - a_n.x, a_m.y - a_n.y);
  const double db = std::hypot(b_m.x - b_n.x, b_m.y - b_n.y);
  if (da == 0.0 && db == 0.0) return true;
  if (da == 0.0 || db == 0.0) return false;
  const double r = da / db;
  return r <= 1.0 + delta && r >= 1.0 / (1.0 + delta);
}

MatchSet low_distortion_filter(const MatchSet& matches, std::span<const Point2> pts_a,
                               std::span<const Point2> pts_b, double distortion_bound) {
  const std::size_t m = matches.size();
  MatchSet out;
  out.stage = MatchStage::filtered;
  // Two or fewer matches are passed through; score_pair treats them as degenerate anyway.
  if (m <= 2) {
    out.matches = matches.matches;
    return out;
  }

  std::vector<char> consistent(m * m, 1);
  std::vector<int> score(m, 0), violations(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto& p = matches.matches[i];
      const auto& q = matches.matches[j];
      const bool ok =
          distortion_consistent(pts_a[p.a], pts_a[q.a], pts_b[p.b], pts_b[q.b], distortion_bound);
      consistent[i * m + j] = consistent[j * m + i] = ok ? 1 : 0;
      if (ok) {
        ++score[i];
        ++score[j];
      } else {
        ++violations[i];
        ++violations[j];
      }
    }
  }

  std::vector<char> active(m, 1);
  for (;;) {
    std::size_t drop = m;
    for (std::size_t i = 0; i < m; ++i) {
      if (!active[i] || violations[i] == 0) continue;
      if (drop == m || score[i] < score[drop] ||
          (score[i] == score[drop] && violations[i] > violations[drop]))
        drop = i;
    }
    if (drop == m) break;
    active[drop] = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!active[j]) continue;
      if (consistent[drop * m + j])
        --score[j];
      else
        --violations[j];
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    if (active[i]) out.matches.push_back(matches.matches[i]);
  return out;
}

ProcrustesResult procrustes_distance(std::span<const Point2> a, std::span<const Point2> b) {
  if (a.empty()) throw std::invalid_argument("procrustes of an empty point set");
  if (a.size() != b.size()) throw std::invalid_argument("procrustes inputs differ in length");
  const double n = static_cast<double>(a.size());
  Point2 ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca.x += a[i].x;
    ca.y += a[i].y;
    cb.x += b[i].x;
    cb.y += b[i].y;
  }
  ca.x /= n;
  ca.y /= n;
  cb.x /= n;
  cb.y /= n;

  double cross = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ax = a[i].x - ca.x, ay = a[i].y - ca.y;
    const double bx = b[i].x - cb.x, by = b[i].y - cb.y;
    dot += ax * bx + ay * by;
    cross += ax * by - ay * bx;
  }
  const double theta = (cross == 0.0 && dot == 0.0) ? 0.0 : std::atan2(cross, dot);
  const double c = std::cos(theta), s = std::sin(theta);

  double residual = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ax = a[i].x - ca.x, ay = a[i].y - ca.y;
    const double rx = c * ax - s * ay - (b[i].x - cb.x);
    const double ry = s * ax + c * ay - (b[i].y - cb.y);
    residual += rx * rx + ry * ry;
  }
  double deg = theta * 180.0 / std::numbers::pi;
  if (deg <= -180.0) deg += 360.0;
  return {std::sqrt(residual), deg};
}

MatchingConfig MatchingConfig::for_height(int height) {
  MatchingConfig cfg;
  cfg.patch_radius = std::max(4, static_cast<int>(std::lround(24.0 * height / 512.0)));
  return cfg;
}

void MatchingConfig::validate() const {
  if (patch_radius < 2) throw std::invalid_argument("patch_radius must be >= 2");
  if (!(ratio_threshold > 0.0) || ratio_threshold > 1.0)
    throw std::invalid_argument("ratio_threshold must be in (0,1]");
  if (!(distortion_bound > 0.0)) throw std::invalid_argument("distortion_bound must be > 0");
  if (!(rotation_gate_deg > 0.0)) throw std::invalid_argument("rotation_gate_deg must be > 0");
  if (!(procrustes_floor > 0.0)) throw std::invalid_argument("procrustes_floor must be > 0");
}

ImageFeatures extract_features(const GrayImage& img, const KeypointSet& kps,
                               const MatchingConfig& cfg) {
  return {kps.image_id, img.height(), compute_descriptors(img, kps, cfg.patch_radius)};
}

PairScore score_pair(const ImageFeatures& a, const ImageFeatures& b, const MatchingConfig& cfg) {
  PairScore score;
  const MatchSet pre = prematch(a.descriptors, b.descriptors, cfg.ratio_threshold);
  if (pre.size() == 0) return score;
  const MatchSet kept =
      low_distortion_filter(pre, a.descriptors.points, b.descriptors.points, cfg.distortion_bound);
  score.n = static_cast<int>(kept.size());
  if (score.n <= 2) return score;

  std::vector<Point2> pa, pb;
  pa.reserve(kept.size());
  pb.reserve(kept.size());
  const double sa = 1.0 / a.height, sb = 1.0 / b.height;
  for (const auto& m : kept.matches) {
    const auto& p = a.descriptors.points[m.a];
    const auto& q = b.descriptors.points[m.b];
    pa.push_back({p.x * sa, p.y * sa});
    pb.push_back({q.x * sb, q.y * sb});
  }
  const auto pr = procrustes_distance(pa, pb);
  score.rotation_deg = pr.rotation_deg;
  if (std::abs(pr.rotation_deg) > cfg.rotation_gate_deg) {
    score.n = 0;
    return score;
  }
  score.p = pr.distance;
  score.degenerate = false;
  return score;
}

}  // namespace dieclust
