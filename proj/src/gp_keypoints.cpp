#include "dieclust/gp_keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace dieclust {

KernelConfig KernelConfig::for_height(int height, double frac, int n_keypoints) {
  KernelConfig cfg;
  cfg.lengthscale = frac * height;
  cfg.truncation_radius = 4.0 * cfg.lengthscale;
  cfg.n_keypoints = n_keypoints;
  return cfg;
}

void KernelConfig::validate() const {
  if (!(lengthscale > 0.0)) throw std::invalid_argument("lengthscale must be > 0");
  if (truncation_radius < 3.0 * lengthscale)
    throw std::invalid_argument("truncation_radius must be >= 3 * lengthscale");
  if (n_keypoints < 1) throw std::invalid_argument("n_keypoints must be >= 1");
}

double se_kernel(Pixel x, Pixel y, double lengthscale) {
  if (!(lengthscale > 0.0)) throw std::invalid_argument("lengthscale must be > 0");
  const double dx = x.x - y.x, dy = x.y - y.y;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * lengthscale * lengthscale));
}

ReweightedKernel::ReweightedKernel(const Grid<double>& weights, double lengthscale,
                                   double truncation_radius)
    : weights_(&weights), radius_(static_cast<int>(std::floor(truncation_radius))) {
  if (!(lengthscale > 0.0)) throw std::invalid_argument("lengthscale must be > 0");
  if (radius_ < 0) throw std::invalid_argument("negative truncation radius");
  const double half = 0.5 * lengthscale;
  factor_.resize(static_cast<std::size_t>(radius_) + 1);
  for (int d = 0; d <= radius_; ++d) factor_[d] = std::exp(-(d * d) / (2.0 * half * half));
}

double ReweightedKernel::operator()(Pixel x, Pixel y) const {
  const auto& w = *weights_;
  const int x0 = std::max({0, x.x - radius_, y.x - radius_});
  const int x1 = std::min({w.width() - 1, x.x + radius_, y.x + radius_});
  const int y0 = std::max({0, x.y - radius_, y.y - radius_});
  const int y1 = std::min({w.height() - 1, x.y + radius_, y.y + radius_});
  double acc = 0.0;
  for (int zy = y0; zy <= y1; ++zy) {
    const double gy = factor(x.y - zy) * factor(zy - y.y);
    if (gy == 0.0) continue;
    double row = 0.0;
    for (int zx = x0; zx <= x1; ++zx) row += factor(x.x - zx) * w(zx, zy) * factor(zx - y.x);
    acc += gy * row;
  }
  return acc;
}

namespace {

void require_nonzero(const Grid<double>& g, const char* what) {
  for (double v : g.values())
    if (v > 0.0) return;
  throw DegenerateInputError(what);
}

}  // namespace

VarianceField prior_variance_field(const WeightField& field, const KernelConfig& cfg) {
  cfg.validate();
  require_nonzero(field.weights, "weight field is identically zero");
  const ReweightedKernel kernel(field.weights, cfg.lengthscale, cfg.truncation_radius);
  const int w = field.width(), h = field.height(), r = kernel.radius();
  std::vector<double> sq(static_cast<std::size_t>(r) + 1);
  for (int d = 0; d <= r; ++d) sq[d] = kernel.factor(d) * kernel.factor(d);

  Grid<double> tmp(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      const int lo = std::max(0, x - r), hi = std::min(w - 1, x + r);
      for (int zx = lo; zx <= hi; ++zx) acc += sq[std::abs(x - zx)] * field.weights(zx, y);
      tmp(x, y) = acc;
    }
  }
  VarianceField out{Grid<double>(w, h), 0};
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const int lo = std::max(0, y - r), hi = std::min(h - 1, y + r);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int zy = lo; zy <= hi; ++zy) acc += sq[std::abs(y - zy)] * tmp(x, zy);
      out.values(x, y) = acc;
    }
  }
  return out;
}

VarianceField prior_variance_field_reference(const WeightField& field, const KernelConfig& cfg) {
  cfg.validate();
  require_nonzero(field.weights, "weight field is identically zero");
  const ReweightedKernel kernel(field.weights, cfg.lengthscale, cfg.truncation_radius);
  VarianceField out{Grid<double>(field.width(), field.height()), 0};
  for (int y = 0; y < field.height(); ++y)
    for (int x = 0; x < field.width(); ++x) out.values(x, y) = kernel({x, y}, {x, y});
  return out;
}

VarianceUpdater::VarianceUpdater(const WeightField& field, const KernelConfig& cfg)
    : field_(&field),
      kernel_(field.weights, cfg.lengthscale, cfg.truncation_radius),
      prior_(prior_variance_field(field, cfg)),
      current_(prior_) {
  const auto& v = prior_.values.values();
  floor_ = kRoundoff * *std::max_element(v.begin(), v.end());
}

bool VarianceUpdater::argmax(Pixel& best, double& value) const {
  const auto& f = current_.values;
  double best_value = 0.0;
  bool found = false;
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      if (!field_->in_region(x, y)) continue;
      const double v = f(x, y);
      if (v > best_value) {
        best_value = v;
        best = {x, y};
        found = true;
      }
    }
  }
  value = best_value;
  return found;
}

std::vector<double> VarianceUpdater::kernel_column(Pixel p, Pixel& origin, int& extent_x,
                                                   int& extent_y) const {
  const auto& weights = field_->weights;
  const int w = weights.width(), h = weights.height(), r = kernel_.radius();

  // u(z) = g(z - p) w(z) on the support box of g(. - p).
  const int zx0 = std::max(0, p.x - r), zx1 = std::min(w - 1, p.x + r);
  const int zy0 = std::max(0, p.y - r), zy1 = std::min(h - 1, p.y + r);
  const int x0 = std::max(0, p.x - 2 * r), x1 = std::min(w - 1, p.x + 2 * r);
  const int y0 = std::max(0, p.y - 2 * r), y1 = std::min(h - 1, p.y + 2 * r);
  origin = {x0, y0};
  extent_x = x1 - x0 + 1;
  extent_y = y1 - y0 + 1;
  const int zrows = zy1 - zy0 + 1;

  // Horizontal pass: t(x, zy) = sum_zx g(x - zx) u(zx, zy).
  std::vector<double> t(static_cast<std::size_t>(extent_x) * zrows, 0.0);
  for (int zy = zy0; zy <= zy1; ++zy) {
    const double gy = kernel_.factor(zy - p.y);
    double* trow = &t[static_cast<std::size_t>(zy - zy0) * extent_x];
    for (int zx = zx0; zx <= zx1; ++zx) {
      const double u = gy * kernel_.factor(zx - p.x) * weights(zx, zy);
      if (u == 0.0) continue;
      const int lo = std::max(x0, zx - r), hi = std::min(x1, zx + r);
      for (int x = lo; x <= hi; ++x) trow[x - x0] += kernel_.factor(x - zx) * u;
    }
  }
  // Vertical pass: c(x, y) = sum_zy g(y - zy) t(x, zy).
  std::vector<double> column(static_cast<std::size_t>(extent_x) * extent_y, 0.0);
  for (int zy = zy0; zy <= zy1; ++zy) {
    const double* trow = &t[static_cast<std::size_t>(zy - zy0) * extent_x];
    const int lo = std::max(y0, zy - r), hi = std::min(y1, zy + r);
    for (int y = lo; y <= hi; ++y) {
      const double gy = kernel_.factor(y - zy);
      double* crow = &column[static_cast<std::size_t>(y - y0) * extent_x];
      for (int i = 0; i < extent_x; ++i) crow[i] += gy * trow[i];
    }
  }
  return column;
}

void VarianceUpdater::condition_on(Pixel p) {
  const double pivot = prior_.values(p.x, p.y);
  auto& f = current_.values;
  if (pivot > 0.0) {
    Pixel origin;
    int ex = 0, ey = 0;
    const auto column = kernel_column(p, origin, ex, ey);
    for (int j = 0; j < ey; ++j) {
      for (int i = 0; i < ex; ++i) {
        const double c = column[static_cast<std::size_t>(j) * ex + i];
        double& v = f(origin.x + i, origin.y + j);
        v -= c * c / pivot;
        if (v <= floor_) v = 0.0;
      }
    }
  }
  f(p.x, p.y) = 0.0;
  ++current_.n_selected;
}

KeypointSet select_keypoints(const WeightField& field, const KernelConfig& cfg,
                             std::string image_id) {
  cfg.validate();
  std::size_t in_region = 0;
  for (int y = 0; y < field.height(); ++y)
    for (int x = 0; x < field.width(); ++x) in_region += field.in_region(x, y) ? 1 : 0;
  if (static_cast<std::size_t>(cfg.n_keypoints) > in_region)
    throw std::invalid_argument("n_keypoints exceeds the number of in-mask pixels");

  VarianceUpdater updater(field, cfg);
  KeypointSet out;
  out.image_id = std::move(image_id);
  out.points.reserve(static_cast<std::size_t>(cfg.n_keypoints));
  for (int n = 0; n < cfg.n_keypoints; ++n) {
    Pixel best;
    double value = 0.0;
    if (!updater.argmax(best, value)) {
      out.exhausted = true;
      break;
    }
    out.points.push_back({best.x, best.y, value});
    updater.condition_on(best);
  }
  return out;
}

VarianceField exact_posterior_variance(const WeightField& field, const KernelConfig& cfg,
                                       std::span<const Pixel> selected) {
  cfg.validate();
  const ReweightedKernel kernel(field.weights, cfg.lengthscale, cfg.truncation_radius);
  const int w = field.width(), h = field.height();
  const auto n = static_cast<Eigen::Index>(selected.size());

  VarianceField out{Grid<double>(w, h), static_cast<int>(selected.size())};
  if (n == 0) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.values(x, y) = kernel({x, y}, {x, y});
    return out;
  }

  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      gram(i, j) = gram(j, i) = kernel(selected[i], selected[j]);
  const double jitter = 1e-8 * gram.maxCoeff();
  gram.diagonal().array() += jitter;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw std::runtime_error("singular Gram matrix");

  Eigen::VectorXd v(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (Eigen::Index i = 0; i < n; ++i) v(i) = kernel({x, y}, selected[i]);
      const double reduction = v.dot(llt.solve(v));
      out.values(x, y) = std::max(0.0, kernel({x, y}, {x, y}) - reduction);
    }
  }
  return out;
}

void write_keypoints_csv(std::ostream& out, std::span<const KeypointSet> sets) {
  out << "image_id,rank,x,y,variance\n";
  out.precision(17);
  for (const auto& set : sets)
    for (std::size_t r = 0; r < set.points.size(); ++r) {
      const auto& p = set.points[r];
      out << set.image_id << ',' << r << ',' << p.x << ',' << p.y << ',' << p.variance << '\n';
    }
}

std::vector<KeypointSet> read_keypoints_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty keypoint csv");
  std::vector<KeypointSet> sets;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, rank, x, y, var;
    if (!std::getline(ss, id, ',') || !std::getline(ss, rank, ',') || !std::getline(ss, x, ',') ||
        !std::getline(ss, y, ',') || !std::getline(ss, var))
      throw FormatError("malformed keypoint csv line: " + line);
    if (sets.empty() || sets.back().image_id != id) sets.push_back({id, {}, false});
    sets.back().points.push_back({std::stoi(x), std::stoi(y), std::stod(var)});
  }
  return sets;
}

Grid<double> keypoints_to_grid(const KeypointSet& set) {
  Grid<double> g(3, static_cast<int>(set.points.size()));
  for (int r = 0; r < g.height(); ++r) {
    g(0, r) = set.points[r].x;
    g(1, r) = set.points[r].y;
    g(2, r) = set.points[r].variance;
  }
  return g;
}

KeypointSet keypoints_from_grid(const Grid<double>& grid, std::string image_id) {
  if (grid.width() != 3 && grid.height() > 0) throw FormatError("keypoint grid must have 3 columns");
  KeypointSet set{std::move(image_id), {}, false};
  for (int r = 0; r < grid.height(); ++r)
    set.points.push_back({static_cast<int>(std::lround(grid(0, r))),
                          static_cast<int>(std::lround(grid(1, r))), grid(2, r)});
  return set;
}

}  // namespace dieclust
