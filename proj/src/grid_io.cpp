#include "dieclust/grid_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include <opencv2/imgcodecs.hpp>

namespace dieclust {

namespace le {

namespace {
template <typename U>
void put_uint(std::ostream& out, U v) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}
template <typename U>
U get_uint(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw FormatError("truncated input");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}
}  // namespace

void put_u16(std::ostream& out, std::uint16_t v) { put_uint(out, v); }
void put_u32(std::ostream& out, std::uint32_t v) { put_uint(out, v); }
void put_f32(std::ostream& out, float v) { put_uint(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::ostream& out, double v) { put_uint(out, std::bit_cast<std::uint64_t>(v)); }
std::uint16_t get_u16(std::istream& in) { return get_uint<std::uint16_t>(in); }
std::uint32_t get_u32(std::istream& in) { return get_uint<std::uint32_t>(in); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get_uint<std::uint32_t>(in)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_uint<std::uint64_t>(in)); }

void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0)
    throw FormatError(std::string("bad magic, expected ") + magic);
}

}  // namespace le

void write_grid(std::ostream& out, const Grid<double>& grid) {
  out.write("DCW1", 4);
  le::put_u32(out, static_cast<std::uint32_t>(grid.width()));
  le::put_u32(out, static_cast<std::uint32_t>(grid.height()));
  for (double v : grid.values()) le::put_f32(out, static_cast<float>(v));
}

Grid<double> read_grid(std::istream& in) {
  le::expect_magic(in, "DCW1");
  const auto w = le::get_u32(in);
  const auto h = le::get_u32(in);
  if (w > (1u << 16) || h > (1u << 16)) throw FormatError("implausible grid dimensions");
  Grid<double> grid(static_cast<int>(w), static_cast<int>(h));
  for (auto& v : grid.values()) v = le::get_f32(in);
  return grid;
}

void write_grid_file(const std::string& path, const Grid<double>& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  write_grid(out, grid);
}

Grid<double> read_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_grid(in);
}

void write_png16(const std::string& path, const Grid<double>& grid, bool write_sidecar) {
  const auto [lo_it, hi_it] = std::minmax_element(grid.values().begin(), grid.values().end());
  const double lo = grid.empty() ? 0.0 : *lo_it;
  const double hi = grid.empty() ? 0.0 : *hi_it;
  const double span = hi > lo ? hi - lo : 1.0;
  cv::Mat m(grid.height(), grid.width(), CV_16U);
  for (int y = 0; y < grid.height(); ++y) {
    auto* row = m.ptr<std::uint16_t>(y);
    for (int x = 0; x < grid.width(); ++x)
      row[x] = static_cast<std::uint16_t>(std::lround((grid(x, y) - lo) / span * 65535.0));
  }
  if (!cv::imwrite(path, m)) throw FormatError("cannot write " + path);
  if (write_sidecar) {
    std::ofstream side(path + ".json");
    side << nlohmann::json{{"min", lo}, {"max", hi}, {"levels", 65535}}.dump(2) << "\n";
  }
}

namespace {

cv::Mat to_u8(const GrayImage& img) {
  cv::Mat m(img.height(), img.width(), CV_8U);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width(); ++x)
      row[x] = static_cast<std::uint8_t>(std::lround(std::clamp(img(x, y), 0.0, 1.0) * 255.0));
  }
  return m;
}

}  // namespace

void write_png8(const std::string& path, const GrayImage& img) {
  if (!cv::imwrite(path, to_u8(img))) throw FormatError("cannot write " + path);
}

std::vector<std::uint8_t> encode_png8(const GrayImage& img) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", to_u8(img), buf)) throw FormatError("png encoding failed");
  return buf;
}

}  // namespace dieclust
