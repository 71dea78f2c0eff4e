#include "projcluster/temporal.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <fstream>
#include <numeric>
#include <ostream>
#include <string>

#include "projcluster/ingest.hpp"

namespace projcluster {

std::int64_t BinaryGrid::ones() const noexcept {
  return std::count(cells.begin(), cells.end(), std::uint8_t{1});
}

FrameGeometry grid_geometry(const FrameGeometry& frame, double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) throw PreconditionError("scale must lie in (0, 1]");
  if (!frame.valid()) throw PreconditionError("frame geometry must be positive");
  if (scale == 1.0) return frame;
  return FrameGeometry{static_cast<int>(std::ceil(frame.width * scale)),
                       static_cast<int>(std::ceil(frame.height * scale))};
}

CellSpan cell_span(int lo, int hi, double scale, int grid_extent) {
  if (scale == 1.0) return {std::clamp(lo, 0, grid_extent), std::clamp(hi, 0, grid_extent)};
  // Cell c covers pixels [c/scale, (c+1)/scale).
  const int begin = static_cast<int>(std::floor(lo * scale));
  const int end = static_cast<int>(std::ceil(hi * scale));
  return {std::clamp(begin, 0, grid_extent), std::clamp(end, 0, grid_extent)};
}

BinaryGrid rasterize(std::span<const Detection> frame_dets, const FrameGeometry& geometry,
                     double scale) {
  BinaryGrid grid(grid_geometry(geometry, scale));
  const int gw = grid.geometry.width;
  for (const auto& d : frame_dets) {
    const CellSpan xs = cell_span(d.box.x, d.box.right(), scale, gw);
    const CellSpan ys = cell_span(d.box.y, d.box.bottom(), scale, grid.geometry.height);
    if (xs.begin >= xs.end) continue;
    for (int y = ys.begin; y < ys.end; ++y) {
      auto row = grid.cells.begin() + static_cast<std::ptrdiff_t>(y) * gw;
      std::fill(row + xs.begin, row + xs.end, std::uint8_t{1});
    }
  }
  return grid;
}

ProjectionImage project(std::span<const BinaryGrid> grids) {
  if (grids.empty()) throw ShapeError("project: no grids");
  const FrameGeometry g = grids.front().geometry;
  for (const auto& grid : grids) {
    if (grid.geometry != g || grid.cells.size() != static_cast<std::size_t>(g.cells())) {
      throw ShapeError("project: grid " + std::to_string(grid.geometry.width) + "x" +
                       std::to_string(grid.geometry.height) + " does not match " +
                       std::to_string(g.width) + "x" + std::to_string(g.height));
    }
  }
  ProjectionImage pi(g, static_cast<int>(grids.size()));
  for (const auto& grid : grids) {
    std::transform(pi.counts.begin(), pi.counts.end(), grid.cells.begin(), pi.counts.begin(),
                   [](std::uint16_t c, std::uint8_t b) { return static_cast<std::uint16_t>(c + b); });
  }
  return pi;
}

BinaryGrid downsample_max(const BinaryGrid& grid, int factor) {
  if (factor < 1) throw PreconditionError("downsample factor must be at least 1");
  const FrameGeometry g{(grid.geometry.width + factor - 1) / factor,
                        (grid.geometry.height + factor - 1) / factor};
  BinaryGrid out(g);
  for (int y = 0; y < grid.geometry.height; ++y) {
    for (int x = 0; x < grid.geometry.width; ++x) {
      if (grid.at(x, y)) out.at(x / factor, y / factor) = 1;
    }
  }
  return out;
}

void write_pgm(std::ostream& out, const FrameGeometry& geometry,
               std::span<const std::uint8_t> pixels, PgmFormat format) {
  if (pixels.size() != static_cast<std::size_t>(geometry.cells())) {
    throw ShapeError("write_pgm: pixel count does not match geometry");
  }
  if (format == PgmFormat::kBinary) {
    out << "P5\n" << geometry.width << ' ' << geometry.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    return;
  }
  out << "P2\n" << geometry.width << ' ' << geometry.height << "\n255\n";
  for (int y = 0; y < geometry.height; ++y) {
    for (int x = 0; x < geometry.width; ++x) {
      if (x) out << ' ';
      out << static_cast<int>(pixels[static_cast<std::size_t>(y) * geometry.width + x]);
    }
    out << '\n';
  }
}

void write_pgm(const std::filesystem::path& path, const FrameGeometry& geometry,
               std::span<const std::uint8_t> pixels, PgmFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_pgm(out, geometry, pixels, format);
  if (!out) throw IoError("write failure on " + path.string());
}

void write_ppm(std::ostream& out, const FrameGeometry& geometry, std::span<const std::uint8_t> rgb) {
  if (rgb.size() != static_cast<std::size_t>(geometry.cells()) * 3) {
    throw ShapeError("write_ppm: pixel count does not match geometry");
  }
  out << "P6\n" << geometry.width << ' ' << geometry.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

void write_ppm(const std::filesystem::path& path, const FrameGeometry& geometry,
               std::span<const std::uint8_t> rgb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_ppm(out, geometry, rgb);
  if (!out) throw IoError("write failure on " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping `#` comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace

GrayImage read_pgm(std::istream& in) {
  const std::string magic = pnm_token(in);
  if (magic != "P2" && magic != "P5") throw IoError("not a PGM image (magic '" + magic + "')");
  GrayImage img;
  int maxval = 0;
  try {
    img.geometry.width = std::stoi(pnm_token(in));
    img.geometry.height = std::stoi(pnm_token(in));
    maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    throw IoError("malformed PGM header");
  }
  if (!img.geometry.valid() || maxval < 1 || maxval > 255) throw IoError("unsupported PGM header");
  img.pixels.resize(static_cast<std::size_t>(img.geometry.cells()));
  if (magic == "P5") {
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw IoError("truncated PGM");
  } else {
    for (auto& p : img.pixels) {
      int v = 0;
      if (!(in >> v)) throw IoError("truncated PGM");
      p = static_cast<std::uint8_t>(std::clamp(v, 0, maxval));
    }
  }
  if (maxval != 255) {
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>((p * 255 + maxval / 2) / maxval);
  }
  return img;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_pgm(in);
}

std::vector<std::uint8_t> to_gray(const BinaryGrid& grid) {
  std::vector<std::uint8_t> px(grid.cells.size());
  std::transform(grid.cells.begin(), grid.cells.end(), px.begin(),
                 [](std::uint8_t c) { return static_cast<std::uint8_t>(c ? 255 : 0); });
  return px;
}

std::vector<std::uint8_t> to_gray(const ProjectionImage& pi) {
  std::vector<std::uint8_t> px(pi.counts.size());
  const int denom = std::max(1, pi.window_length);
  std::transform(pi.counts.begin(), pi.counts.end(), px.begin(), [denom](std::uint16_t c) {
    // round(c * 255 / denom) in integers
    return static_cast<std::uint8_t>((2 * 255 * static_cast<int>(c) + denom) / (2 * denom));
  });
  return px;
}

}  // namespace projcluster
