#ifndef DIECLUST_GRID_HPP
#define DIECLUST_GRID_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dieclust {

/// Integer pixel location; x is the column, y the row.
struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major 2-D grid.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    if (width < 0 || height < 0) throw std::invalid_argument("negative grid dimension");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  Pixel pixel(std::size_t idx) const {
    return {static_cast<int>(idx % static_cast<std::size_t>(width_)),
            static_cast<int>(idx / static_cast<std::size_t>(width_))};
  }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Grayscale intensities in [0,1].
using GrayImage = Grid<double>;

struct CircularMask {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 0.0;

  bool contains(int x, int y) const {
    const double dx = x - center_x;
    const double dy = y - center_y;
    return dx * dx + dy * dy <= radius * radius;
  }
};

/// Non-negative relief-edge weights with the region they were restricted to.
/// A default mask (radius 0) means "no mask applied yet": every pixel counts.
struct WeightField {
  Grid<double> weights;
  CircularMask mask;
  bool masked = false;

  int width() const { return weights.width(); }
  int height() const { return weights.height(); }
  bool in_region(int x, int y) const { return !masked || mask.contains(x, y); }
};

/// Throws std::invalid_argument if any value is non-finite or outside [0,1],
/// or the image is smaller than 8x8.
void validate_gray_image(const GrayImage& img);

}  // namespace dieclust

#endif
