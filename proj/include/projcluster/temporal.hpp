#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "projcluster/core.hpp"

namespace projcluster {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-second detection mask. `geometry` is the grid size, which is the
/// frame size scaled down when rasterizing at scale < 1.
struct BinaryGrid {
  FrameGeometry geometry;
  std::vector<std::uint8_t> cells;  // row-major, values 0 or 1

  BinaryGrid() = default;
  explicit BinaryGrid(FrameGeometry g)
      : geometry(g), cells(static_cast<std::size_t>(g.cells()), 0) {}

  [[nodiscard]] std::uint8_t at(int x, int y) const { return cells[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return cells[index(x, y)]; }
  [[nodiscard]] std::int64_t ones() const noexcept;

 private:
  [[nodiscard]] std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * geometry.width + x;
  }
};

/// Elementwise sum of a window's binary grids; every count lies in
/// [0, window_length].
struct ProjectionImage {
  FrameGeometry geometry;
  int window_length = 0;
  std::vector<std::uint16_t> counts;  // row-major

  ProjectionImage() = default;
  ProjectionImage(FrameGeometry g, int length)
      : geometry(g), window_length(length), counts(static_cast<std::size_t>(g.cells()), 0) {}

  [[nodiscard]] std::uint16_t at(int x, int y) const {
    return counts[static_cast<std::size_t>(y) * geometry.width + x];
  }
  std::uint16_t& at(int x, int y) {
    return counts[static_cast<std::size_t>(y) * geometry.width + x];
  }
};

/// Grid size for a frame rasterized at `scale`: ceil(width*scale) x ceil(height*scale).
[[nodiscard]] FrameGeometry grid_geometry(const FrameGeometry& frame, double scale);

/// Half-open cell span [begin, end) covered by the pixel span [lo, hi) at `scale`.
struct CellSpan {
  int begin = 0;
  int end = 0;
};
[[nodiscard]] CellSpan cell_span(int lo, int hi, double scale, int grid_extent);

/// Marks every grid cell that intersects any detection box. Partially covered
/// cells are set, so thin boxes survive downscaling.
[[nodiscard]] BinaryGrid rasterize(std::span<const Detection> frame_dets,
                                   const FrameGeometry& geometry, double scale = 1.0);

/// Sums the grids of one window. Throws ShapeError on an empty input or on
/// mismatched grid sizes.
[[nodiscard]] ProjectionImage project(std::span<const BinaryGrid> grids);

/// Block max-pooling by an integer factor; the last block may be partial.
[[nodiscard]] BinaryGrid downsample_max(const BinaryGrid& grid, int factor);

enum class PgmFormat { kAscii, kBinary };

/// Writes an 8-bit PGM (P2 or P5).
void write_pgm(std::ostream& out, const FrameGeometry& geometry,
               std::span<const std::uint8_t> pixels, PgmFormat format = PgmFormat::kBinary);
void write_pgm(const std::filesystem::path& path, const FrameGeometry& geometry,
               std::span<const std::uint8_t> pixels, PgmFormat format = PgmFormat::kBinary);

/// Writes an 8-bit binary PPM (P6); `rgb` holds three bytes per pixel.
void write_ppm(std::ostream& out, const FrameGeometry& geometry, std::span<const std::uint8_t> rgb);
void write_ppm(const std::filesystem::path& path, const FrameGeometry& geometry,
               std::span<const std::uint8_t> rgb);

struct GrayImage {
  FrameGeometry geometry;
  std::vector<std::uint8_t> pixels;
};

/// Reads a P2 or P5 PGM, rescaling to 0..255 when maxval differs.
[[nodiscard]] GrayImage read_pgm(std::istream& in);
[[nodiscard]] GrayImage read_pgm(const std::filesystem::path& path);

/// 0 maps to black and 1 to white.
[[nodiscard]] std::vector<std::uint8_t> to_gray(const BinaryGrid& grid);
/// Linear gray ramp: 0 is black, window_length is white.
[[nodiscard]] std::vector<std::uint8_t> to_gray(const ProjectionImage& pi);

}  // namespace projcluster
