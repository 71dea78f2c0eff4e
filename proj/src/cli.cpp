#include "projcluster/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "projcluster/augment.hpp"
#include "projcluster/eval.hpp"
#include "projcluster/ingest.hpp"
#include "projcluster/segment.hpp"
#include "projcluster/synth.hpp"
#include "projcluster/temporal.hpp"
#include "tsv.hpp"

namespace projcluster::cli {

namespace fs = std::filesystem;

namespace {

enum class LogLevel { kQuiet, kInfo, kDebug };

LogLevel log_level() {
  const char* env = std::getenv("PROJCLUSTER_LOG");
  if (!env) return LogLevel::kInfo;
  const std::string v(env);
  if (v == "quiet" || v == "error" || v == "0") return LogLevel::kQuiet;
  if (v == "debug" || v == "2") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

/// Thrown for bad flag combinations found after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* flag) {
  if (!fs::is_regular_file(path)) throw IoError(std::string(flag) + ": no such file: " + path);
}

struct PipelineFlags {
  int width = 0;
  int height = 0;
  int window = 12;
  std::optional<std::int64_t> area_th;
  double nms_iou = 0.5;
  double score_th = 0.5;
  double scale = 1.0;
  unsigned threads = 0;
  std::optional<int> duration;
  bool keep_partial = false;
  std::optional<double> merge_iou;

  void add_geometry(CLI::App& app) {
    app.add_option("--width", width, "Frame width in pixels")->required()->check(CLI::PositiveNumber);
    app.add_option("--height", height, "Frame height in pixels")->required()->check(CLI::PositiveNumber);
  }
  void add_window(CLI::App& app) {
    app.add_option("--window", window, "Window length in seconds")->capture_default_str()
        ->check(CLI::PositiveNumber);
  }
  void add_pipeline(CLI::App& app) {
    add_geometry(app);
    add_window(app);
    app.add_option("--area-th", area_th, "Minimum region area in grid cells (default 0.2% of grid)");
    app.add_option("--nms-iou", nms_iou, "NMS IoU threshold")->capture_default_str();
    app.add_option("--score-th", score_th, "Minimum detection score")->capture_default_str();
    app.add_option("--scale", scale, "Projection grid scale in (0, 1]")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads (default: all cores)");
    app.add_option("--duration", duration, "Session length in seconds (default: last frame + 1)");
    app.add_flag("--keep-partial", keep_partial, "Also process a trailing partial window");
    app.add_option("--merge-iou", merge_iou, "Merge regions overlapping above this IoU");
  }

  [[nodiscard]] FrameGeometry geometry() const { return {width, height}; }
  [[nodiscard]] PipelineConfig config() const {
    PipelineConfig cfg;
    cfg.window_length_s = window;
    cfg.area_threshold_cells = area_th;
    cfg.nms_iou = nms_iou;
    cfg.score_threshold = score_th;
    cfg.scale = scale;
    cfg.threads = threads;
    cfg.duration_s = duration;
    cfg.keep_partial = keep_partial;
    cfg.merge_iou = merge_iou;
    cfg.validate();
    return cfg;
  }
};

// ---------------------------------------------------------------- aggregate

struct AggregateArgs {
  PipelineFlags pipeline;
  std::string in;
  std::string out;
  std::string dump_dir;
  std::uint64_t seed = 0;
};

int cmd_aggregate(const AggregateArgs& a, std::ostream& out, std::ostream& err) {
  const LogLevel level = log_level();
  const auto t0 = std::chrono::steady_clock::now();
  require_file(a.in, "--in");
  const PipelineConfig cfg = a.pipeline.config();

  const DetectionStream stream = load_stream(a.in, a.pipeline.geometry(), cfg.score_threshold);
  const WindowOptions wopts{cfg.keep_partial, cfg.duration_s};
  const auto wins = windows(stream, cfg.window_length_s, wopts);

  std::vector<RegionSet> sets;
  std::vector<std::optional<int>> thresholds(wins.size());
  if (!a.dump_dir.empty()) {
    fs::create_directories(a.dump_dir);
    for (std::size_t i = 0; i < wins.size(); ++i) {
      WindowTrace trace;
      sets.push_back(process_window(wins[i], stream.session_id, stream.geometry, cfg, &trace));
      std::ostringstream stem;
      stem << "window_" << std::setw(5) << std::setfill('0') << wins[i].index;
      write_pgm(fs::path(a.dump_dir) / (stem.str() + "_projection.pgm"), trace.projection.geometry,
                to_gray(trace.projection));
      if (trace.clusters) {
        thresholds[i] = trace.clusters->threshold_used;
        std::vector<std::uint8_t> px(trace.clusters->labels.size());
        std::transform(trace.clusters->labels.begin(), trace.clusters->labels.end(), px.begin(),
                       [](std::int32_t l) { return static_cast<std::uint8_t>(l ? 255 : 0); });
        write_pgm(fs::path(a.dump_dir) / (stem.str() + "_clusters.pgm"), trace.clusters->geometry, px);
      }
    }
  } else {
    sets = detect_hands(stream, cfg);
  }
  save_regions(a.out, sets);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::size_t total_regions = 0;
  for (const auto& s : sets) total_regions += s.regions.size();
  if (level >= LogLevel::kInfo) {
    out << "window  start_s  detections  regions";
    if (!a.dump_dir.empty()) out << "  threshold";
    out << '\n';
    for (std::size_t i = 0; i < sets.size(); ++i) {
      out << std::setw(6) << sets[i].window_index << std::setw(9) << sets[i].start_s
          << std::setw(12) << wins[i].detection_count() << std::setw(9) << sets[i].regions.size();
      if (!a.dump_dir.empty()) {
        out << std::setw(11) << (thresholds[i] ? std::to_string(*thresholds[i]) : "-");
      }
      out << '\n';
    }
  }
  const double frames = static_cast<double>(wins.size()) * cfg.window_length_s;
  const double speed = seconds > 0 ? frames / seconds : 0.0;
  // The summary is the command's result, so it is printed even when quiet.
  out << std::fixed << std::setprecision(1) << "processed " << static_cast<long long>(frames)
      << " frames (" << wins.size() << " windows, " << total_regions << " regions) in "
      << std::setprecision(3) << seconds << " s: " << std::setprecision(1) << speed
      << "x real-time at 1 fps (detector inference excluded)\n"
      << std::defaultfloat;
  if (level >= LogLevel::kDebug) {
    err << "debug: " << stream.detections.size() << " detections after score filter, grid "
        << grid_geometry(stream.geometry, cfg.scale).width << "x"
        << grid_geometry(stream.geometry, cfg.scale).height << ", area threshold "
        << cfg.area_threshold_for(grid_geometry(stream.geometry, cfg.scale)) << " cells\n";
  }
  return kOk;
}

// ----------------------------------------------------------------- evaluate

struct EvaluateArgs {
  PipelineFlags pipeline;
  std::string baseline;
  std::string regions;
  std::string gt;
  std::string counts;
  std::string out;
};

int evaluate_counts(const EvaluateArgs& a, std::ostream& out) {
  require_file(a.counts, "--counts");
  std::ifstream in(a.counts);
  std::vector<SessionReport> rows;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = tsv::strip_cr(raw);
    if (tsv::skippable(line)) continue;
    const auto f = tsv::split(line);
    if (f.size() != 3) throw ParseError(line_no, "expected session, baseline count, ours count");
    const auto b = tsv::parse_number<std::int64_t>(f[1]);
    const auto o = tsv::parse_number<std::int64_t>(f[2]);
    if (!b || !o) throw ParseError(line_no, "counts must be integers");
    if (*b < 0 || *o < 0) throw ValidationError(line_no, "counts must be non-negative");
    SessionReport r;
    r.session_id = std::string(f[0]);
    r.baseline_count = *b;
    r.ours_count = *o;
    r.reduction_pct = reduction_pct(*b, *o);
    rows.push_back(r);
  }
  if (rows.empty()) throw UsageError("counts file holds no sessions");

  std::size_t name_w = 7;
  for (const auto& r : rows) name_w = std::max(name_w, r.session_id.size());
  out << std::left << std::setw(static_cast<int>(name_w)) << "Session" << std::right
      << std::setw(12) << "Baseline" << std::setw(10) << "Ours" << std::setw(11) << "Reduction\n";
  double sum = 0.0;
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(name_w)) << r.session_id << std::right
        << std::setw(12) << r.baseline_count << std::setw(10) << r.ours_count << std::setw(9)
        << std::fixed << std::setprecision(1) << r.reduction_pct << "%\n";
    sum += r.reduction_pct;
  }
  out << "mean reduction: " << std::fixed << std::setprecision(1)
      << sum / static_cast<double>(rows.size()) << "%\n"
      << std::defaultfloat;
  if (!a.out.empty()) {
    std::ofstream rec(a.out);
    if (!rec) throw IoError("cannot write " + a.out);
    rec << "#session_id\tbaseline_count\tours_count\treduction_pct\n";
    for (const auto& r : rows) {
      rec << r.session_id << '\t' << r.baseline_count << '\t' << r.ours_count << '\t'
          << tsv::format_double(r.reduction_pct) << '\n';
    }
  }
  return kOk;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  if (!a.counts.empty()) return evaluate_counts(a, out);
  if (a.baseline.empty() || a.regions.empty() || a.gt.empty()) {
    throw UsageError("evaluate needs --baseline, --regions and --gt (or --counts)");
  }
  if (a.pipeline.width <= 0 || a.pipeline.height <= 0) {
    throw UsageError("evaluate needs --width and --height");
  }
  require_file(a.baseline, "--baseline");
  require_file(a.regions, "--regions");
  require_file(a.gt, "--gt");

  const FrameGeometry g = a.pipeline.geometry();
  const DetectionStream baseline = load_stream(a.baseline, g, a.pipeline.score_th);
  const auto regions = load_regions(a.regions, a.pipeline.window);
  const GroundTruthSet gt = load_ground_truth(a.gt, g);
  if (gt.box_count() == 0) throw UsageError("ground-truth file " + a.gt + " holds no boxes");

  if (!baseline.session_id.empty() && baseline.session_id != gt.session_id) {
    throw UsageError("session id mismatch: baseline '" + baseline.session_id + "' vs ground truth '" +
                     gt.session_id + "'");
  }
  for (const auto& set : regions) {
    if (set.session_id != gt.session_id) {
      throw UsageError("session id mismatch: regions '" + set.session_id + "' vs ground truth '" +
                       gt.session_id + "'");
    }
  }

  const SessionReport report = session_report(baseline.detections, regions, gt);
  print_report_table(out, std::span<const SessionReport>(&report, 1));
  if (!a.out.empty()) {
    std::ofstream rec(a.out);
    if (!rec) throw IoError("cannot write " + a.out);
    write_report_records(rec, std::span<const SessionReport>(&report, 1));
  }
  return kOk;
}

// ---------------------------------------------------------------- augsearch

struct AugsearchArgs {
  std::string oracle;
  double delta = 0.01;
  std::size_t images = 350;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out;
};

int cmd_augsearch(const AugsearchArgs& a, std::ostream& out) {
  augment::SearchOptions opts;
  opts.delta = a.delta;
  opts.image_count = a.images;
  opts.seed = a.seed;
  opts.threads = std::max(1u, a.threads);
  const auto oracle = augment::subprocess_oracle(a.oracle);

  const auto& angles = augment::default_angle_candidates();
  std::vector<augment::SearchResult> searches;
  searches.push_back(augment::range_search(augment::Transform::kShear, angles, oracle, opts));
  searches.push_back(augment::range_search(augment::Transform::kRotate, angles, oracle, opts));
  searches.push_back(augment::translate_search(augment::default_translate_candidates(), oracle, opts));

  augment::AugPlan plan;
  plan.shear_max_deg = searches[0].optimum;
  plan.rotate_max_deg = searches[1].optimum;
  plan.translate_max_px = searches[2].optimum;
  const auto sweep = augment::probability_sweep(plan, oracle, a.seed, opts);

  augment::print_search_table(out, searches);
  out << '\n';
  augment::print_sweep_table(out, sweep);
  if (!a.out.empty()) {
    std::ofstream rec(a.out);
    if (!rec) throw IoError("cannot write " + a.out);
    augment::write_search_records(rec, searches, &sweep);
  }
  return kOk;
}

// -------------------------------------------------------------------- synth

struct SynthArgs {
  std::string scene = "occlusion";
  std::uint64_t seed = 42;
  int duration = 12;
  std::string out;
  std::string gt;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  if (a.scene != "occlusion") throw UsageError("unknown scene '" + a.scene + "'");
  if (a.duration < 0) throw UsageError("--duration must be non-negative");
  const auto scene = synth::generate(synth::occlusion_scene(a.seed, a.duration));
  for (const auto& w : scene.warnings) err << "warning: " << w << '\n';
  save_stream(a.out, scene.stream);
  if (!a.gt.empty()) save_ground_truth(a.gt, scene.ground_truth);
  if (log_level() >= LogLevel::kInfo) {
    out << "wrote " << scene.stream.detections.size() << " detections over " << a.duration
        << " s (" << scene.stream.geometry.width << "x" << scene.stream.geometry.height << ")\n";
  }
  return kOk;
}

// ------------------------------------------------------------------- render

struct RenderArgs {
  PipelineFlags pipeline;
  std::string in;
  std::string regions;
  std::string background;
  std::optional<int> window_index;
  std::string out;
};

void draw_outline(std::vector<std::uint8_t>& rgb, const FrameGeometry& g, const BBox& box) {
  const BBox b = clip(box, g);
  if (b.area() == 0) return;
  const auto put = [&](int x, int y) {
    const std::size_t i = (static_cast<std::size_t>(y) * g.width + x) * 3;
    rgb[i] = 0;
    rgb[i + 1] = 255;
    rgb[i + 2] = 0;
  };
  for (int x = b.x; x < b.right(); ++x) {
    put(x, b.y);
    put(x, b.bottom() - 1);
  }
  for (int y = b.y; y < b.bottom(); ++y) {
    put(b.x, y);
    put(b.right() - 1, y);
  }
}

int cmd_render(const RenderArgs& a) {
  if (a.in.empty() && a.regions.empty()) {
    throw UsageError("render needs --in (projection) and/or --regions");
  }
  if (!a.in.empty()) require_file(a.in, "--in");
  if (!a.regions.empty()) require_file(a.regions, "--regions");
  if (!a.background.empty()) require_file(a.background, "--background");
  const FrameGeometry frame = a.pipeline.geometry();

  // Canvas: projection of one window, a background frame, or black.
  FrameGeometry canvas_geometry = frame;
  std::vector<std::uint8_t> gray;
  if (!a.in.empty()) {
    const PipelineConfig cfg = a.pipeline.config();
    const auto stream = load_stream(a.in, frame, cfg.score_threshold);
    const auto wins = windows(stream, cfg.window_length_s, {true, cfg.duration_s});
    const int k = a.window_index.value_or(0);
    if (k < 0 || k >= static_cast<int>(wins.size())) {
      throw UsageError("window " + std::to_string(k) + " is not in the stream");
    }
    std::vector<BinaryGrid> grids;
    for (const auto& f : wins[k].frames) {
      grids.push_back(f.empty() ? rasterize({}, frame, cfg.scale)
                                : rasterize(nms(f, cfg.nms_iou), frame, cfg.scale));
    }
    const ProjectionImage pi = project(grids);
    canvas_geometry = pi.geometry;
    gray = to_gray(pi);
  } else if (!a.background.empty()) {
    auto bg = read_pgm(a.background);
    if (bg.geometry != frame) throw UsageError("background size does not match --width/--height");
    gray = std::move(bg.pixels);
  } else {
    gray.assign(static_cast<std::size_t>(frame.cells()), 0);
  }

  if (a.regions.empty()) {
    write_pgm(a.out, canvas_geometry, gray);
    return kOk;
  }
  if (canvas_geometry != frame) throw UsageError("region overlays need --scale 1");
  std::vector<std::uint8_t> rgb(gray.size() * 3);
  for (std::size_t i = 0; i < gray.size(); ++i) rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = gray[i];
  for (const auto& set : load_regions(a.regions, a.pipeline.window)) {
    if (a.window_index && set.window_index != *a.window_index) continue;
    for (const auto& r : set.regions) draw_outline(rgb, frame, r.box);
  }
  write_ppm(a.out, frame, rgb);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long-term hand detection from per-frame detections: time projection, "
               "ISODATA clustering and small-region removal",
               "projcluster"};
  app.require_subcommand(1);

  AggregateArgs agg;
  auto* aggregate = app.add_subcommand("aggregate", "Turn a detection stream into per-window regions");
  aggregate->add_option("--in", agg.in, "Detection file (TSV)")->required();
  aggregate->add_option("--out", agg.out, "Region file to write (TSV)")->required();
  aggregate->add_option("--dump-dir", agg.dump_dir, "Write projection/cluster PGMs per window here");
  aggregate->add_option("--seed", agg.seed, "Unused; accepted for uniformity");
  agg.pipeline.add_pipeline(*aggregate);

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Per-session reduction, median IoU and AP@0.5");
  evaluate->add_option("--baseline", ev.baseline, "Per-frame detector output (TSV)");
  evaluate->add_option("--regions", ev.regions, "Region file from aggregate");
  evaluate->add_option("--gt", ev.gt, "Ground-truth file (TSV, no score column)");
  evaluate->add_option("--counts", ev.counts, "Only compute reductions from session/baseline/ours counts");
  evaluate->add_option("--out", ev.out, "Machine-readable report to write");
  evaluate->add_option("--width", ev.pipeline.width, "Frame width in pixels");
  evaluate->add_option("--height", ev.pipeline.height, "Frame height in pixels");
  evaluate->add_option("--score-th", ev.pipeline.score_th, "Minimum baseline detection score")
      ->capture_default_str();
  ev.pipeline.add_window(*evaluate);

  AugsearchArgs as;
  auto* augsearch = app.add_subcommand("augsearch", "Separable augmentation range search and probability sweep");
  augsearch->add_option("--oracle", as.oracle, "Command scoring an augmentation descriptor file")->required();
  augsearch->add_option("--delta", as.delta, "Score drop treated as significant")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  augsearch->add_option("--images", as.images, "Training images described to the oracle")->capture_default_str();
  augsearch->add_option("--seed", as.seed, "Sampling seed")->capture_default_str();
  augsearch->add_option("--threads", as.threads, "Concurrent oracle calls")->capture_default_str();
  augsearch->add_option("--out", as.out, "Machine-readable search records to write");

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic detection stream with planted ground truth");
  synth_cmd->add_option("--scene", sy.scene, "Scene name (occlusion)")->capture_default_str();
  synth_cmd->add_option("--seed", sy.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--duration", sy.duration, "Length in seconds")->capture_default_str();
  synth_cmd->add_option("--out", sy.out, "Detection file to write")->required();
  synth_cmd->add_option("--gt", sy.gt, "Ground-truth file to write");

  RenderArgs rd;
  auto* render = app.add_subcommand("render", "Draw projections and region boxes as PGM/PPM");
  render->add_option("--in", rd.in, "Detection file; renders the projection of --window-index");
  render->add_option("--regions", rd.regions, "Region file; draws region outlines");
  render->add_option("--background", rd.background, "PGM frame to draw on");
  render->add_option("--window-index", rd.window_index, "Window to render (default: all regions / window 0)");
  render->add_option("--out", rd.out, "Image to write")->required();
  render->add_option("--nms-iou", rd.pipeline.nms_iou, "NMS IoU threshold")->capture_default_str();
  render->add_option("--score-th", rd.pipeline.score_th, "Minimum detection score")->capture_default_str();
  render->add_option("--scale", rd.pipeline.scale, "Projection grid scale")->capture_default_str();
  rd.pipeline.add_geometry(*render);
  rd.pipeline.add_window(*render);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kInvalidInput;
  }

  try {
    if (aggregate->parsed()) return cmd_aggregate(agg, out, err);
    if (evaluate->parsed()) return cmd_evaluate(ev, out);
    if (augsearch->parsed()) return cmd_augsearch(as, out);
    if (synth_cmd->parsed()) return cmd_synth(sy, out, err);
    if (render->parsed()) return cmd_render(rd);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }
  return kInvalidInput;
}

}  // namespace projcluster::cli
