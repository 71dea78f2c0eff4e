#include "projcluster/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

#include "tsv.hpp"

namespace projcluster {

std::size_t GroundTruthSet::box_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [frame, boxes] : frames) n += boxes.size();
  return n;
}

GroundTruthSet parse_ground_truth(std::istream& in, const FrameGeometry& geometry) {
  if (!geometry.valid()) throw PreconditionError("frame geometry must be positive");
  GroundTruthSet gt;
  bool have_session = false;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = tsv::strip_cr(raw);
    if (tsv::skippable(line)) continue;
    const auto f = tsv::split(line);
    if (f.size() != 6) {
      throw ParseError(line_no, "expected 6 tab-separated fields, found " + std::to_string(f.size()));
    }
    const auto frame = tsv::parse_number<int>(f[1]);
    const auto x = tsv::parse_number<int>(f[2]);
    const auto y = tsv::parse_number<int>(f[3]);
    const auto w = tsv::parse_number<int>(f[4]);
    const auto h = tsv::parse_number<int>(f[5]);
    if (f[0].empty() || !frame || !x || !y || !w || !h) {
      throw ParseError(line_no, "malformed ground-truth record");
    }
    if (*frame < 0) throw ValidationError(line_no, "negative frame_index");
    if (*w < 0 || *h < 0) throw ValidationError(line_no, "negative box dimensions");
    if (!have_session) {
      gt.session_id = std::string(f[0]);
      have_session = true;
    } else if (f[0] != gt.session_id) {
      throw ValidationError(line_no, "session id '" + std::string(f[0]) + "' differs from '" +
                                         gt.session_id + "'");
    }
    const BBox box = clip(BBox{*x, *y, *w, *h}, geometry);
    if (box.area() == 0) continue;
    gt.frames[*frame].push_back(box);
  }
  if (in.bad()) throw IoError("read failure");
  return gt;
}

GroundTruthSet load_ground_truth(const std::filesystem::path& path, const FrameGeometry& geometry) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_ground_truth(in, geometry);
}

void write_ground_truth(std::ostream& out, const GroundTruthSet& gt) {
  for (const auto& [frame, boxes] : gt.frames) {
    for (const auto& b : boxes) {
      out << gt.session_id << '\t' << frame << '\t' << b.x << '\t' << b.y << '\t' << b.w << '\t'
          << b.h << '\n';
    }
  }
}

void save_ground_truth(const std::filesystem::path& path, const GroundTruthSet& gt) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_ground_truth(out, gt);
  if (!out) throw IoError("write failure on " + path.string());
}

std::vector<double> matched_ious(const FrameBoxes& pred, const GroundTruthSet& gt) {
  std::vector<double> out;
  static const std::vector<BBox> kNone;
  for (const auto& [frame, preds] : pred) {
    const auto it = gt.frames.find(frame);
    const auto& truth = it == gt.frames.end() ? kNone : it->second;

    struct Pair {
      double iou;
      std::size_t p;
      std::size_t g;
    };
    std::vector<Pair> pairs;
    for (std::size_t p = 0; p < preds.size(); ++p) {
      for (std::size_t g = 0; g < truth.size(); ++g) {
        const double v = iou(preds[p], truth[g]);
        if (v > 0.0) pairs.push_back({v, p, g});
      }
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const Pair& a, const Pair& b) { return a.iou > b.iou; });

    std::vector<double> best(preds.size(), 0.0);
    std::vector<char> pred_used(preds.size(), 0), gt_used(truth.size(), 0);
    for (const auto& pr : pairs) {
      if (pred_used[pr.p] || gt_used[pr.g]) continue;
      pred_used[pr.p] = gt_used[pr.g] = 1;
      best[pr.p] = pr.iou;
    }
    out.insert(out.end(), best.begin(), best.end());
  }
  return out;
}

double lower_median(std::vector<double> values) {
  if (values.empty()) throw UndefinedMetricError("median of an empty set");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

double match_and_median_iou(const FrameBoxes& pred, const GroundTruthSet& gt) {
  auto ious = matched_ious(pred, gt);
  if (ious.empty()) throw UndefinedMetricError("median IoU needs at least one prediction");
  return lower_median(std::move(ious));
}

double average_precision(std::span<const ScoredBox> pred, const GroundTruthSet& gt,
                         double iou_min) {
  const std::size_t positives = gt.box_count();
  if (positives == 0) throw UndefinedMetricError("average precision needs ground truth");

  std::vector<std::size_t> order(pred.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pred[a].confidence > pred[b].confidence;
  });

  std::map<int, std::vector<char>> claimed;
  for (const auto& [frame, boxes] : gt.frames) claimed[frame].assign(boxes.size(), 0);

  std::vector<double> precision, recall;
  precision.reserve(order.size());
  recall.reserve(order.size());
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const ScoredBox& p = pred[order[rank]];
    const auto it = gt.frames.find(p.frame_index);
    if (it != gt.frames.end()) {
      double best = 0.0;
      std::size_t best_g = 0;
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        const double v = iou(p.box, it->second[g]);
        if (v > best) {
          best = v;
          best_g = g;
        }
      }
      auto& used = claimed[p.frame_index];
      if (best > 0.0 && best >= iou_min && !used[best_g]) {
        used[best_g] = 1;
        ++tp;
      }
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(positives));
  }

  // Precision envelope, then sum over recall steps.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

std::vector<ScoredBox> replicate_regions(std::span<const RegionSet> sets) {
  std::vector<ScoredBox> out;
  for (const auto& set : sets) {
    for (int s = 0; s < set.length_s; ++s) {
      for (const auto& r : set.regions) out.push_back({set.start_s + s, r.box, r.confidence});
    }
  }
  return out;
}

FrameBoxes by_frame(std::span<const ScoredBox> boxes) {
  FrameBoxes out;
  for (const auto& b : boxes) out[b.frame_index].push_back(b.box);
  return out;
}

FrameBoxes by_frame(std::span<const Detection> dets) {
  FrameBoxes out;
  for (const auto& d : dets) out[d.frame_index].push_back(d.box);
  return out;
}

double reduction_pct(std::int64_t baseline_count, std::int64_t ours_count) {
  if (baseline_count == 0) throw UndefinedMetricError("reduction undefined for zero baseline detections");
  return 100.0 * static_cast<double>(baseline_count - ours_count) /
         static_cast<double>(baseline_count);
}

SessionReport session_report(std::span<const Detection> baseline, std::span<const RegionSet> ours,
                             const GroundTruthSet& gt) {
  SessionReport r;
  r.session_id = gt.session_id;
  const auto replicated = replicate_regions(ours);
  r.baseline_count = static_cast<std::int64_t>(baseline.size());
  r.ours_count = static_cast<std::int64_t>(replicated.size());
  r.reduction_pct = reduction_pct(r.baseline_count, r.ours_count);
  r.median_iou_baseline = match_and_median_iou(by_frame(baseline), gt);
  r.median_iou_ours = replicated.empty() ? 0.0 : match_and_median_iou(by_frame(replicated), gt);
  r.ap_05 = average_precision(replicated, gt, 0.5);
  return r;
}

void print_report_table(std::ostream& out, std::span<const SessionReport> reports) {
  std::size_t name_w = std::string("Session").size();
  for (const auto& r : reports) name_w = std::max(name_w, r.session_id.size());

  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::left << std::setw(static_cast<int>(name_w)) << "Session" << std::right << "  "
      << std::setw(12) << "Baseline" << std::setw(10) << "Ours" << std::setw(14) << "MedIoU base"
      << std::setw(13) << "MedIoU ours" << std::setw(11) << "Reduction" << std::setw(8) << "AP@0.5"
      << '\n';
  out << std::string(name_w + 2 + 12 + 10 + 14 + 13 + 11 + 8, '-') << '\n';
  out << std::fixed;
  for (const auto& r : reports) {
    std::ostringstream red;
    red << std::fixed << std::setprecision(1) << r.reduction_pct << '%';
    out << std::left << std::setw(static_cast<int>(name_w)) << r.session_id << std::right << "  "
        << std::setw(12) << r.baseline_count << std::setw(10) << r.ours_count
        << std::setprecision(2) << std::setw(14) << r.median_iou_baseline << std::setw(13)
        << r.median_iou_ours << std::setw(11) << red.str() << std::setw(8) << r.ap_05 << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

void write_report_records(std::ostream& out, std::span<const SessionReport> reports) {
  out << "#session_id\tbaseline_count\tours_count\treduction_pct\tmedian_iou_baseline\t"
         "median_iou_ours\tap_05\n";
  for (const auto& r : reports) {
    out << r.session_id << '\t' << r.baseline_count << '\t' << r.ours_count << '\t'
        << tsv::format_double(r.reduction_pct) << '\t' << tsv::format_double(r.median_iou_baseline)
        << '\t' << tsv::format_double(r.median_iou_ours) << '\t' << tsv::format_double(r.ap_05)
        << '\n';
  }
}

}  // namespace projcluster
