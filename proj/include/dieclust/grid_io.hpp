#ifndef DIECLUST_GRID_IO_HPP
#define DIECLUST_GRID_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dieclust/grid.hpp"

namespace dieclust {

/// Binary grid container: "DCW1", u32 width, u32 height, row-major f32 LE.
void write_grid(std::ostream& out, const Grid<double>& grid);
Grid<double> read_grid(std::istream& in);
void write_grid_file(const std::string& path, const Grid<double>& grid);
Grid<double> read_grid_file(const std::string& path);

/// Writes a 16-bit PNG. Values are min-max scaled; the scale goes into a
/// JSON sidecar at `<path>.json` ({"min":..,"max":..}).
void write_png16(const std::string& path, const Grid<double>& grid, bool write_sidecar);

/// 8-bit PNG of a [0,1] image, for synthetic inputs and thumbnails.
void write_png8(const std::string& path, const GrayImage& img);
std::vector<std::uint8_t> encode_png8(const GrayImage& img);

namespace le {
void put_u16(std::ostream& out, std::uint16_t v);
void put_u32(std::ostream& out, std::uint32_t v);
void put_f32(std::ostream& out, float v);
void put_f64(std::ostream& out, double v);
std::uint16_t get_u16(std::istream& in);
std::uint32_t get_u32(std::istream& in);
float get_f32(std::istream& in);
double get_f64(std::istream& in);
void expect_magic(std::istream& in, const char (&magic)[5]);
}  // namespace le

}  // namespace dieclust

#endif
