#include "projcluster/core.hpp"

#include <algorithm>
#include <numeric>

namespace projcluster {

std::int64_t intersection_area(const BBox& a, const BBox& b) noexcept {
  const std::int64_t w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const std::int64_t h = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (w <= 0 || h <= 0) return 0;
  return w * h;
}

double iou(const BBox& a, const BBox& b) noexcept {
  const std::int64_t inter = intersection_area(a, b);
  if (inter == 0) return 0.0;
  const std::int64_t uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

BBox clip(const BBox& box, const FrameGeometry& geometry) noexcept {
  const int x0 = std::clamp(box.x, 0, geometry.width);
  const int y0 = std::clamp(box.y, 0, geometry.height);
  const int x1 = std::clamp(box.right(), 0, geometry.width);
  const int y1 = std::clamp(box.bottom(), 0, geometry.height);
  return BBox{x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw PreconditionError("nms: iou threshold must lie in (0, 1)");
  }
  if (dets.empty()) return {};
  const int frame = dets.front().frame_index;
  for (const auto& d : dets) {
    if (d.frame_index != frame) {
      throw PreconditionError("nms: detections span frames " + std::to_string(frame) + " and " +
                              std::to_string(d.frame_index));
    }
  }

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<char> suppressed(dets.size(), 0);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (suppressed[i]) continue;
    const Detection& keep = dets[order[i]];
    kept.push_back(keep);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (!suppressed[j] && iou(keep.box, dets[order[j]].box) > iou_threshold) suppressed[j] = 1;
    }
  }
  return kept;
}

}  // namespace projcluster
