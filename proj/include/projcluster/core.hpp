#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace projcluster {

/// Axis-aligned box in integer pixels, half-open: [x, x+w) x [y, y+h).
struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  [[nodiscard]] constexpr std::int64_t area() const noexcept {
    return static_cast<std::int64_t>(w) * h;
  }
  [[nodiscard]] constexpr int right() const noexcept { return x + w; }
  [[nodiscard]] constexpr int bottom() const noexcept { return y + h; }
  [[nodiscard]] constexpr bool valid() const noexcept { return w > 0 && h > 0; }

  friend constexpr bool operator==(const BBox&, const BBox&) = default;
};

/// One scored box on one sampled frame. frame_index is in seconds (1 fps).
struct Detection {
  int frame_index = 0;
  BBox box;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct FrameGeometry {
  int width = 0;
  int height = 0;

  [[nodiscard]] constexpr bool valid() const noexcept { return width > 0 && height > 0; }
  [[nodiscard]] constexpr std::int64_t cells() const noexcept {
    return static_cast<std::int64_t>(width) * height;
  }
  friend constexpr bool operator==(const FrameGeometry&, const FrameGeometry&) = default;
};

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Area of the overlap of two boxes; 0 when disjoint.
[[nodiscard]] std::int64_t intersection_area(const BBox& a, const BBox& b) noexcept;

/// Intersection over union. Areas are accumulated exactly in integers and
/// divided once, so the result is bit-identical across platforms.
[[nodiscard]] double iou(const BBox& a, const BBox& b) noexcept;

/// Clip a box to the frame. The result may have zero width or height.
[[nodiscard]] BBox clip(const BBox& box, const FrameGeometry& geometry) noexcept;

/// Greedy non-maximum suppression over the detections of one frame.
///
/// Repeatedly keeps the best remaining detection and discards every other
/// detection whose IoU with it exceeds `iou_threshold`. Equal scores are
/// ordered by their position in `dets` (earlier wins). The output is sorted
/// by descending score.
///
/// Throws PreconditionError if the detections span more than one frame or
/// the threshold is outside (0, 1).
[[nodiscard]] std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold);

}  // namespace projcluster
