#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "projcluster/core.hpp"
#include "projcluster/ingest.hpp"
#include "projcluster/temporal.hpp"

namespace projcluster {

/// The projection has a single distinct value, so there is nothing to separate.
class NoContrastError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Connected components of the thresholded projection. 0 is background;
/// components are numbered 1..component_count in raster-scan discovery order.
struct ClusterImage {
  FrameGeometry geometry;
  std::vector<std::int32_t> labels;  // row-major
  int threshold_used = 0;
  int component_count = 0;

  [[nodiscard]] std::int32_t at(int x, int y) const {
    return labels[static_cast<std::size_t>(y) * geometry.width + x];
  }
};

struct Region {
  int window_index = 0;
  BBox box;  // tight box around the component
  std::int64_t area_cells = 0;
  double mean_count = 0.0;  // mean projection value inside the component
  double confidence = 0.0;  // mean_count / window_length, in (0, 1]
};

struct RegionSet {
  std::string session_id;
  int window_index = 0;
  int start_s = 0;
  int length_s = 12;
  std::vector<Region> regions;
};

struct PipelineConfig {
  int window_length_s = 12;
  /// Minimum component area in grid cells. Unset means 0.2% of the grid.
  std::optional<std::int64_t> area_threshold_cells;
  double nms_iou = 0.5;
  double score_threshold = 0.5;
  double scale = 1.0;
  bool keep_partial = false;
  std::optional<int> duration_s;
  /// Merge regions whose IoU exceeds this value. Off by default.
  std::optional<double> merge_iou;
  /// Worker threads for window processing; 0 uses every available core.
  unsigned threads = 0;

  /// Throws PreconditionError on a non-positive threshold or window length.
  void validate() const;
  [[nodiscard]] std::int64_t area_threshold_for(const FrameGeometry& grid) const;
};

/// Default area threshold: 0.2% of the grid's cells, at least 1.
[[nodiscard]] std::int64_t default_area_threshold(const FrameGeometry& grid) noexcept;

/// ISODATA (intermeans) threshold of a value histogram, where histogram[v]
/// counts the cells holding value v.
///
/// A threshold t splits the cells into {v <= t} and {v > t}. t is a fixpoint
/// when t equals the midpoint of the two class means rounded half down. The
/// map from t to that midpoint is monotone in t, so iterating it from the
/// lowest occupied value climbs to the smallest fixpoint and cannot cycle.
///
/// Throws NoContrastError when fewer than two distinct values are present.
[[nodiscard]] int isodata_threshold(std::span<const std::int64_t> histogram);
[[nodiscard]] int isodata_threshold(const ProjectionImage& pi);

/// Value histogram of a projection, indexed 0..window_length.
[[nodiscard]] std::vector<std::int64_t> histogram(const ProjectionImage& pi);

/// 8-connected labeling of the cells whose count exceeds `threshold`.
[[nodiscard]] ClusterImage connected_components(const ProjectionImage& pi, int threshold);

/// Keeps the components with at least `area_threshold` cells. Boxes are in
/// grid coordinates.
[[nodiscard]] std::vector<Region> area_filter(const ClusterImage& ci, const ProjectionImage& pi,
                                              std::int64_t area_threshold, int window_index = 0);

/// Greedily merges regions whose IoU exceeds `iou_threshold` into their
/// union box. Area and mean count are combined by cell weight.
[[nodiscard]] std::vector<Region> merge_overlapping(std::vector<Region> regions,
                                                    double iou_threshold, int window_length);

/// Maps a box in grid cells back to frame pixels.
[[nodiscard]] BBox grid_to_frame(const BBox& cells, double scale, const FrameGeometry& frame);

/// Intermediate images of one window, kept for debug dumps.
struct WindowTrace {
  ProjectionImage projection;
  std::optional<ClusterImage> clusters;
};

/// Runs NMS, rasterization, projection, thresholding, labeling and area
/// filtering for one window. A window without contrast yields no regions.
[[nodiscard]] RegionSet process_window(const Window& window, const std::string& session_id,
                                       const FrameGeometry& geometry, const PipelineConfig& cfg,
                                       WindowTrace* trace = nullptr);

/// Processes every window of the stream, in parallel, and returns one
/// RegionSet per window ordered by window index.
[[nodiscard]] std::vector<RegionSet> detect_hands(const DetectionStream& stream,
                                                  const PipelineConfig& cfg);

/// Writes `session_id window_index start_s x y w h area_cells confidence` records.
void write_regions(std::ostream& out, std::span<const RegionSet> sets);
void save_regions(const std::filesystem::path& path, std::span<const RegionSet> sets);

/// Reads region records back. Only windows with at least one region appear.
[[nodiscard]] std::vector<RegionSet> parse_regions(std::istream& in, int window_length);
[[nodiscard]] std::vector<RegionSet> load_regions(const std::filesystem::path& path,
                                                  int window_length);

}  // namespace projcluster
