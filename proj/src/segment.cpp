#include "projcluster/segment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "tsv.hpp"

namespace projcluster {

namespace {

// floor(a / b) for b > 0
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && (a < 0)) --q;
  return q;
}

class DisjointSets {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void join(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }
  [[nodiscard]] std::size_t size() const { return parent_.size(); }

 private:
  std::vector<int> parent_;
};

}  // namespace

void PipelineConfig::validate() const {
  if (window_length_s < 1) throw PreconditionError("window length must be at least 1 second");
  if (area_threshold_cells && *area_threshold_cells < 1) {
    throw PreconditionError("area threshold must be at least 1 cell");
  }
  if (!(nms_iou > 0.0 && nms_iou < 1.0)) throw PreconditionError("nms iou must lie in (0, 1)");
  if (!(score_threshold > 0.0 && score_threshold <= 1.0)) {
    throw PreconditionError("score threshold must lie in (0, 1]");
  }
  if (!(scale > 0.0 && scale <= 1.0)) throw PreconditionError("scale must lie in (0, 1]");
  if (merge_iou && !(*merge_iou > 0.0 && *merge_iou < 1.0)) {
    throw PreconditionError("merge iou must lie in (0, 1)");
  }
  if (duration_s && *duration_s < 0) throw PreconditionError("duration must be non-negative");
}

std::int64_t default_area_threshold(const FrameGeometry& grid) noexcept {
  return std::max<std::int64_t>(1, std::llround(0.002 * static_cast<double>(grid.cells())));
}

std::int64_t PipelineConfig::area_threshold_for(const FrameGeometry& grid) const {
  return area_threshold_cells ? *area_threshold_cells : default_area_threshold(grid);
}

std::vector<std::int64_t> histogram(const ProjectionImage& pi) {
  std::vector<std::int64_t> hist(static_cast<std::size_t>(pi.window_length) + 1, 0);
  for (const std::uint16_t c : pi.counts) {
    if (c >= hist.size()) hist.resize(c + 1, 0);
    ++hist[c];
  }
  return hist;
}

int isodata_threshold(std::span<const std::int64_t> histogram) {
  const int bins = static_cast<int>(histogram.size());
  int lowest = -1;
  int highest = -1;
  for (int v = 0; v < bins; ++v) {
    if (histogram[v] < 0) throw PreconditionError("histogram counts must be non-negative");
    if (histogram[v] > 0) {
      if (lowest < 0) lowest = v;
      highest = v;
    }
  }
  if (lowest < 0 || lowest == highest) {
    throw NoContrastError("projection holds fewer than two distinct values");
  }

  // Cumulative count and value mass of the classes {v <= t}.
  std::vector<std::int64_t> count(bins), mass(bins);
  std::int64_t n = 0, s = 0;
  for (int v = 0; v < bins; ++v) {
    n += histogram[v];
    s += histogram[v] * v;
    count[v] = n;
    mass[v] = s;
  }

  // Midpoint of the class means, rounded half down:
  //   mid = (S_lo/N_lo + S_hi/N_hi) / 2 = num / den
  //   round_half_down(mid) = ceil(mid - 1/2) = -floor((den - 2 num) / (2 den))
  const auto midpoint = [&](int t) {
    const std::int64_t n_lo = count[t], s_lo = mass[t];
    const std::int64_t n_hi = n - n_lo, s_hi = s - s_lo;
    const std::int64_t num = s_lo * n_hi + s_hi * n_lo;
    const std::int64_t den = 2 * n_lo * n_hi;
    return static_cast<int>(-floor_div(den - 2 * num, 2 * den));
  };

  int t = lowest;
  while (true) {
    const int next = midpoint(t);
    if (next == t) return t;
    t = next;
  }
}

int isodata_threshold(const ProjectionImage& pi) {
  const auto hist = histogram(pi);
  return isodata_threshold(std::span<const std::int64_t>(hist));
}

ClusterImage connected_components(const ProjectionImage& pi, int threshold) {
  const int w = pi.geometry.width;
  const int h = pi.geometry.height;
  ClusterImage ci;
  ci.geometry = pi.geometry;
  ci.threshold_used = threshold;
  ci.labels.assign(pi.counts.size(), -1);

  const auto fg = [&](int x, int y) { return static_cast<int>(pi.at(x, y)) > threshold; };
  const auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };

  // First pass: provisional labels, merging with the already-visited
  // neighbours W, NW, N and NE.
  DisjointSets sets;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fg(x, y)) continue;
      int label = -1;
      const auto visit = [&](int nx, int ny) {
        if (nx < 0 || nx >= w || ny < 0) return;
        const int other = ci.labels[idx(nx, ny)];
        if (other < 0) return;
        if (label < 0) label = other;
        else sets.join(label, other);
      };
      visit(x - 1, y);
      visit(x - 1, y - 1);
      visit(x, y - 1);
      visit(x + 1, y - 1);
      ci.labels[idx(x, y)] = label < 0 ? sets.make() : label;
    }
  }

  // Second pass: dense ids in raster discovery order.
  std::vector<std::int32_t> dense(sets.size(), 0);
  std::int32_t next = 0;
  for (auto& label : ci.labels) {
    if (label < 0) {
      label = 0;
      continue;
    }
    const int root = sets.find(label);
    if (dense[root] == 0) dense[root] = ++next;
    label = dense[root];
  }
  ci.component_count = next;
  return ci;
}

std::vector<Region> area_filter(const ClusterImage& ci, const ProjectionImage& pi,
                                std::int64_t area_threshold, int window_index) {
  if (area_threshold < 1) throw PreconditionError("area threshold must be at least 1 cell");
  if (ci.geometry != pi.geometry) throw ShapeError("area_filter: cluster/projection mismatch");

  struct Stats {
    int x0 = std::numeric_limits<int>::max(), y0 = std::numeric_limits<int>::max();
    int x1 = -1, y1 = -1;
    std::int64_t area = 0;
    std::int64_t mass = 0;
  };
  std::vector<Stats> stats(static_cast<std::size_t>(ci.component_count) + 1);
  for (int y = 0; y < ci.geometry.height; ++y) {
    for (int x = 0; x < ci.geometry.width; ++x) {
      const std::int32_t label = ci.at(x, y);
      if (label == 0) continue;
      Stats& s = stats[label];
      s.x0 = std::min(s.x0, x);
      s.y0 = std::min(s.y0, y);
      s.x1 = std::max(s.x1, x);
      s.y1 = std::max(s.y1, y);
      ++s.area;
      s.mass += pi.at(x, y);
    }
  }

  std::vector<Region> regions;
  for (std::size_t label = 1; label < stats.size(); ++label) {
    const Stats& s = stats[label];
    if (s.area < area_threshold) continue;
    Region r;
    r.window_index = window_index;
    r.box = BBox{s.x0, s.y0, s.x1 - s.x0 + 1, s.y1 - s.y0 + 1};
    r.area_cells = s.area;
    r.mean_count = static_cast<double>(s.mass) / static_cast<double>(s.area);
    r.confidence = r.mean_count / static_cast<double>(std::max(1, pi.window_length));
    regions.push_back(r);
  }
  return regions;
}

std::vector<Region> merge_overlapping(std::vector<Region> regions, double iou_threshold,
                                      int window_length) {
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < regions.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < regions.size(); ++j) {
        if (iou(regions[i].box, regions[j].box) <= iou_threshold) continue;
        Region& a = regions[i];
        const Region& b = regions[j];
        const int x0 = std::min(a.box.x, b.box.x), y0 = std::min(a.box.y, b.box.y);
        const int x1 = std::max(a.box.right(), b.box.right());
        const int y1 = std::max(a.box.bottom(), b.box.bottom());
        const double mass = a.mean_count * static_cast<double>(a.area_cells) +
                            b.mean_count * static_cast<double>(b.area_cells);
        a.box = BBox{x0, y0, x1 - x0, y1 - y0};
        a.area_cells += b.area_cells;
        a.mean_count = mass / static_cast<double>(a.area_cells);
        a.confidence = a.mean_count / static_cast<double>(std::max(1, window_length));
        regions.erase(regions.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
        break;
      }
    }
  }
  return regions;
}

BBox grid_to_frame(const BBox& cells, double scale, const FrameGeometry& frame) {
  if (scale == 1.0) return cells;
  const int x0 = static_cast<int>(std::floor(cells.x / scale));
  const int y0 = static_cast<int>(std::floor(cells.y / scale));
  const int x1 = std::min(frame.width, static_cast<int>(std::ceil(cells.right() / scale)));
  const int y1 = std::min(frame.height, static_cast<int>(std::ceil(cells.bottom() / scale)));
  return BBox{x0, y0, x1 - x0, y1 - y0};
}

RegionSet process_window(const Window& window, const std::string& session_id,
                         const FrameGeometry& geometry, const PipelineConfig& cfg,
                         WindowTrace* trace) {
  RegionSet out;
  out.session_id = session_id;
  out.window_index = window.index;
  out.start_s = window.start_s;
  out.length_s = window.length_s;

  std::vector<BinaryGrid> grids;
  grids.reserve(window.frames.size());
  for (const auto& frame : window.frames) {
    if (frame.empty()) {
      grids.push_back(rasterize({}, geometry, cfg.scale));
    } else {
      const auto kept = nms(frame, cfg.nms_iou);
      grids.push_back(rasterize(kept, geometry, cfg.scale));
    }
  }
  ProjectionImage pi = project(grids);
  grids.clear();

  int threshold = 0;
  try {
    threshold = isodata_threshold(pi);
  } catch (const NoContrastError&) {
    if (trace) trace->projection = std::move(pi);
    return out;
  }

  ClusterImage ci = connected_components(pi, threshold);
  auto regions = area_filter(ci, pi, cfg.area_threshold_for(pi.geometry), window.index);
  if (cfg.merge_iou) regions = merge_overlapping(std::move(regions), *cfg.merge_iou, window.length_s);
  for (auto& r : regions) r.box = grid_to_frame(r.box, cfg.scale, geometry);
  out.regions = std::move(regions);

  if (trace) {
    trace->projection = std::move(pi);
    trace->clusters = std::move(ci);
  }
  return out;
}

std::vector<RegionSet> detect_hands(const DetectionStream& stream, const PipelineConfig& cfg) {
  cfg.validate();
  const WindowOptions opts{cfg.keep_partial, cfg.duration_s};
  const auto wins = windows(stream, cfg.window_length_s, opts);
  std::vector<RegionSet> out(wins.size());
  if (wins.empty()) return out;

  unsigned workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(wins.size()));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    for (std::size_t i = next++; i < wins.size(); i = next++) {
      try {
        out[i] = process_window(wins[i], stream.session_id, stream.geometry, cfg);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned k = 0; k < workers; ++k) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

void write_regions(std::ostream& out, std::span<const RegionSet> sets) {
  for (const auto& set : sets) {
    for (const auto& r : set.regions) {
      out << set.session_id << '\t' << set.window_index << '\t' << set.start_s << '\t' << r.box.x
          << '\t' << r.box.y << '\t' << r.box.w << '\t' << r.box.h << '\t' << r.area_cells << '\t'
          << tsv::format_double(r.confidence) << '\n';
    }
  }
}

void save_regions(const std::filesystem::path& path, std::span<const RegionSet> sets) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_regions(out, sets);
  if (!out) throw IoError("write failure on " + path.string());
}

std::vector<RegionSet> parse_regions(std::istream& in, int window_length) {
  if (window_length < 1) throw PreconditionError("window length must be at least 1 second");
  std::map<std::pair<std::string, int>, RegionSet> by_window;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = tsv::strip_cr(raw);
    if (tsv::skippable(line)) continue;
    const auto f = tsv::split(line);
    if (f.size() != 9) {
      throw ParseError(line_no, "expected 9 tab-separated fields, found " + std::to_string(f.size()));
    }
    const auto window_index = tsv::parse_number<int>(f[1]);
    const auto start_s = tsv::parse_number<int>(f[2]);
    const auto x = tsv::parse_number<int>(f[3]);
    const auto y = tsv::parse_number<int>(f[4]);
    const auto w = tsv::parse_number<int>(f[5]);
    const auto h = tsv::parse_number<int>(f[6]);
    const auto area = tsv::parse_number<std::int64_t>(f[7]);
    const auto conf = tsv::parse_number<double>(f[8]);
    if (!window_index || !start_s || !x || !y || !w || !h || !area || !conf) {
      throw ParseError(line_no, "malformed region record");
    }
    if (*w <= 0 || *h <= 0 || *area <= 0) throw ValidationError(line_no, "empty region");
    if (!(*conf > 0.0 && *conf <= 1.0)) throw ValidationError(line_no, "confidence outside (0, 1]");

    auto& set = by_window[{std::string(f[0]), *window_index}];
    set.session_id = std::string(f[0]);
    set.window_index = *window_index;
    set.start_s = *start_s;
    set.length_s = window_length;
    Region r;
    r.window_index = *window_index;
    r.box = BBox{*x, *y, *w, *h};
    r.area_cells = *area;
    r.confidence = *conf;
    r.mean_count = *conf * window_length;
    set.regions.push_back(r);
  }
  std::vector<RegionSet> out;
  out.reserve(by_window.size());
  for (auto& [key, set] : by_window) out.push_back(std::move(set));
  return out;
}

std::vector<RegionSet> load_regions(const std::filesystem::path& path, int window_length) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_regions(in, window_length);
}

}  // namespace projcluster
