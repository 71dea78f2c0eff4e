#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "projcluster/core.hpp"
#include "projcluster/segment.hpp"

namespace projcluster {

/// A metric was requested over an empty population.
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Boxes keyed by frame index (seconds).
using FrameBoxes = std::map<int, std::vector<BBox>>;

struct GroundTruthSet {
  std::string session_id;
  FrameBoxes frames;

  [[nodiscard]] std::size_t box_count() const noexcept;
};

/// Reads `session_id frame x y w h` records. Boxes are clipped to the frame
/// and boxes left without area are dropped.
[[nodiscard]] GroundTruthSet parse_ground_truth(std::istream& in, const FrameGeometry& geometry);
[[nodiscard]] GroundTruthSet load_ground_truth(const std::filesystem::path& path,
                                               const FrameGeometry& geometry);
void write_ground_truth(std::ostream& out, const GroundTruthSet& gt);
void save_ground_truth(const std::filesystem::path& path, const GroundTruthSet& gt);

struct ScoredBox {
  int frame_index = 0;
  BBox box;
  double confidence = 0.0;
};

/// Per-frame matching IoUs: pairs are taken greedily in descending IoU with
/// each ground-truth box matched at most once. One value per prediction;
/// unmatched predictions get 0.
[[nodiscard]] std::vector<double> matched_ious(const FrameBoxes& pred, const GroundTruthSet& gt);

/// Lower median (the element at (n-1)/2 after sorting). Throws
/// UndefinedMetricError on an empty input.
[[nodiscard]] double lower_median(std::vector<double> values);

/// Median of matched_ious. Throws UndefinedMetricError without predictions.
[[nodiscard]] double match_and_median_iou(const FrameBoxes& pred, const GroundTruthSet& gt);

/// All-points interpolated average precision.
///
/// Predictions are ranked by descending confidence (ties keep input order).
/// Each prediction is compared with the ground-truth box of its frame it
/// overlaps most; it is a true positive when that IoU is at least `iou_min`
/// and the box has not been claimed by a higher-ranked prediction. AP is the
/// area under the precision envelope, max precision at any equal or higher
/// recall. Throws UndefinedMetricError when there is no ground truth.
[[nodiscard]] double average_precision(std::span<const ScoredBox> pred, const GroundTruthSet& gt,
                                       double iou_min = 0.5);

/// Replicates each window's regions across every second of the window.
[[nodiscard]] std::vector<ScoredBox> replicate_regions(std::span<const RegionSet> sets);

[[nodiscard]] FrameBoxes by_frame(std::span<const ScoredBox> boxes);
[[nodiscard]] FrameBoxes by_frame(std::span<const Detection> dets);

/// 100 * (baseline - ours) / baseline. Throws UndefinedMetricError when
/// baseline is zero.
[[nodiscard]] double reduction_pct(std::int64_t baseline_count, std::int64_t ours_count);

struct SessionReport {
  std::string session_id;
  std::int64_t baseline_count = 0;
  std::int64_t ours_count = 0;
  double reduction_pct = 0.0;
  double median_iou_baseline = 0.0;
  double median_iou_ours = 0.0;
  double ap_05 = 0.0;
};

/// Fills every column for one session. Regions count once per second of
/// their window, matching a per-frame detector count.
[[nodiscard]] SessionReport session_report(std::span<const Detection> baseline,
                                           std::span<const RegionSet> ours,
                                           const GroundTruthSet& gt);

/// Aligned plain-text table with the columns of a per-session reduction report.
void print_report_table(std::ostream& out, std::span<const SessionReport> reports);
/// One tab-separated record per session, preceded by a `#` header line.
void write_report_records(std::ostream& out, std::span<const SessionReport> reports);

}  // namespace projcluster
