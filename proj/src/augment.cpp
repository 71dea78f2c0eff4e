#include "projcluster/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "projcluster/rng.hpp"
#include "tsv.hpp"

namespace projcluster::augment {

namespace {

constexpr double kRangeSlack = 1e-9;
constexpr double kCornerSnap = 1e-9;

// x' = a x + b y + tx,  y' = c x + d y + ty
struct Affine {
  double a = 1, b = 0, c = 0, d = 1, tx = 0, ty = 0;

  [[nodiscard]] std::pair<double, double> apply(double x, double y) const {
    return {a * x + b * y + tx, c * x + d * y + ty};
  }
  [[nodiscard]] Affine inverse() const {
    const double det = a * d - b * c;
    Affine inv;
    inv.a = d / det;
    inv.b = -b / det;
    inv.c = -c / det;
    inv.d = a / det;
    inv.tx = -(inv.a * tx + inv.b * ty);
    inv.ty = -(inv.c * tx + inv.d * ty);
    return inv;
  }
};

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

Affine make_affine(Transform kind, double m, int width, int height) {
  const double cx = width / 2.0;
  const double cy = height / 2.0;
  Affine t;
  switch (kind) {
    case Transform::kFlip:
      if (m != 0.0) {
        t.a = -1.0;
        t.tx = width;
      }
      break;
    case Transform::kScale: {
      const double f = 1.0 + m;
      t.a = t.d = f;
      t.tx = cx - f * cx;
      t.ty = cy - f * cy;
      break;
    }
    case Transform::kShear: {
      const double k = std::tan(radians(m));
      t.b = k;
      t.tx = -k * cy;
      break;
    }
    case Transform::kRotate: {
      const double cs = std::cos(radians(m));
      const double sn = std::sin(radians(m));
      t.a = cs;
      t.b = -sn;
      t.c = sn;
      t.d = cs;
      t.tx = cx - cs * cx + sn * cy;
      t.ty = cy - sn * cx - cs * cy;
      break;
    }
    case Transform::kTranslate:
      t.tx = m;
      break;
  }
  return t;
}

BBox map_box(const BBox& box, const Affine& t) {
  const double xs[2] = {static_cast<double>(box.x), static_cast<double>(box.right())};
  const double ys[2] = {static_cast<double>(box.y), static_cast<double>(box.bottom())};
  double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
  for (const double x : xs) {
    for (const double y : ys) {
      const auto [u, v] = t.apply(x, y);
      x0 = std::min(x0, u);
      y0 = std::min(y0, v);
      x1 = std::max(x1, u);
      y1 = std::max(y1, v);
    }
  }
  const int ix0 = static_cast<int>(std::floor(x0 + kCornerSnap));
  const int iy0 = static_cast<int>(std::floor(y0 + kCornerSnap));
  const int ix1 = static_cast<int>(std::ceil(x1 - kCornerSnap));
  const int iy1 = static_cast<int>(std::ceil(y1 - kCornerSnap));
  return BBox{ix0, iy0, ix1 - ix0, iy1 - iy0};
}

void check_magnitude(Transform kind, double magnitude, const AugPlan& plan) {
  const auto fail = [&](const std::string& why) {
    throw RangeError(std::string(name(kind)) + " magnitude " + tsv::format_double(magnitude) + " " +
                     why);
  };
  if (!std::isfinite(magnitude)) fail("is not finite");
  if (kind == Transform::kFlip) {
    if (magnitude != 0.0 && magnitude != 1.0) fail("must be 0 or 1");
    if (magnitude == 1.0 && !plan.flip) fail("but flipping is disabled in the plan");
    return;
  }
  if (std::abs(magnitude) > plan.max_magnitude(kind) + kRangeSlack) {
    fail("exceeds the plan's range of " + tsv::format_double(plan.max_magnitude(kind)));
  }
}

std::string format_score(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

std::string OracleError::format_candidate(double c) { return tsv::format_double(c); }

std::string_view name(Transform t) noexcept {
  switch (t) {
    case Transform::kFlip: return "flip";
    case Transform::kScale: return "scale";
    case Transform::kShear: return "shear";
    case Transform::kRotate: return "rotate";
    case Transform::kTranslate: return "translate";
  }
  return "unknown";
}

std::optional<Transform> parse_transform(std::string_view text) noexcept {
  for (const Transform t : kAllTransforms) {
    if (name(t) == text) return t;
  }
  return std::nullopt;
}

void AugPlan::validate() const {
  if (shear_max_deg < 0 || rotate_max_deg < 0 || translate_max_px < 0) {
    throw PreconditionError("augmentation ranges must be non-negative");
  }
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw PreconditionError("augmentation probability must lie in [0, 1]");
  }
  for (const double c : scale_choices) {
    if (!(c > 0.0)) throw PreconditionError("scale choices must be positive");
  }
}

double AugPlan::max_magnitude(Transform t) const {
  switch (t) {
    case Transform::kFlip: return flip ? 1.0 : 0.0;
    case Transform::kScale: {
      double m = 0.0;
      for (const double c : scale_choices) m = std::max(m, std::abs(c - 1.0));
      return m;
    }
    case Transform::kShear: return shear_max_deg;
    case Transform::kRotate: return rotate_max_deg;
    case Transform::kTranslate: return translate_max_px;
  }
  return 0.0;
}

BBox transform_box(const BBox& box, Transform kind, double magnitude, int width, int height) {
  return map_box(box, make_affine(kind, magnitude, width, height));
}

LabeledImage apply_transform(const LabeledImage& img, Transform kind, double magnitude,
                             const AugPlan& plan) {
  check_magnitude(kind, magnitude, plan);
  const int w = img.image.width;
  const int h = img.image.height;
  const Affine forward = make_affine(kind, magnitude, w, h);
  const Affine inverse = forward.inverse();

  LabeledImage out;
  out.image = Image(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const auto [sx, sy] = inverse.apply(u + 0.5, v + 0.5);
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      if (fx < 0 || fy < 0 || fx >= w || fy >= h) continue;
      out.image.at(u, v) = img.image.at(static_cast<int>(fx), static_cast<int>(fy));
    }
  }

  const FrameGeometry frame{w, h};
  for (const auto& box : img.boxes) {
    const BBox clipped = clip(map_box(box, forward), frame);
    if (clipped.area() * 4 < box.area() || clipped.area() == 0) continue;
    out.boxes.push_back(clipped);
  }
  return out;
}

LabeledImage apply_transforms(const LabeledImage& img, std::span<const AppliedTransform> steps,
                              const AugPlan& plan) {
  LabeledImage cur = img;
  for (const auto& s : steps) cur = apply_transform(cur, s.kind, s.magnitude, plan);
  return cur;
}

AugmentationSet sample_augmentation(const AugPlan& plan, std::size_t image_count,
                                    std::uint64_t seed) {
  plan.validate();
  AugmentationSet set;
  set.plan = plan;
  set.per_image.resize(image_count);
  Rng rng(seed);
  for (auto& steps : set.per_image) {
    for (const Transform t : kAllTransforms) {
      if (t == Transform::kFlip && !plan.flip) continue;
      if (t == Transform::kScale && plan.scale_choices.empty()) continue;
      if (t != Transform::kFlip && t != Transform::kScale && plan.max_magnitude(t) < 1.0) continue;
      if (!rng.bernoulli(plan.probability)) continue;
      double m = 0.0;
      switch (t) {
        case Transform::kFlip:
          m = 1.0;
          break;
        case Transform::kScale: {
          const auto k = rng.uniform_int(0, static_cast<std::int64_t>(plan.scale_choices.size()) - 1);
          m = plan.scale_choices[static_cast<std::size_t>(k)] - 1.0;
          break;
        }
        default: {
          const auto limit = static_cast<std::int64_t>(std::floor(plan.max_magnitude(t)));
          m = static_cast<double>(rng.uniform_int(-limit, limit));
          break;
        }
      }
      steps.push_back({t, m});
    }
  }
  return set;
}

AugmentationSet unaugmented(std::size_t image_count, const AugPlan& plan) {
  AugmentationSet set;
  set.plan = plan;
  set.per_image.resize(image_count);
  return set;
}

void write_augmentation_set(std::ostream& out, const AugmentationSet& set) {
  const AugPlan& p = set.plan;
  out << "#augset v1\n";
  out << "plan\t" << tsv::format_double(p.shear_max_deg) << '\t'
      << tsv::format_double(p.rotate_max_deg) << '\t' << tsv::format_double(p.translate_max_px)
      << '\t' << (p.flip ? 1 : 0) << '\t' << tsv::format_double(p.probability) << '\n';
  out << "scale";
  for (const double c : p.scale_choices) out << '\t' << tsv::format_double(c);
  out << '\n';
  out << "images\t" << set.per_image.size() << '\n';
  for (std::size_t i = 0; i < set.per_image.size(); ++i) {
    for (const auto& s : set.per_image[i]) {
      out << "t\t" << i << '\t' << name(s.kind) << '\t' << tsv::format_double(s.magnitude) << '\n';
    }
  }
}

AugmentationSet parse_augmentation_set(std::istream& in) {
  AugmentationSet set;
  set.plan.scale_choices.clear();
  std::string raw;
  std::size_t line_no = 0;
  const auto bad = [&](const std::string& why) {
    throw std::runtime_error("augmentation set line " + std::to_string(line_no) + ": " + why);
  };
  const auto num = [&](std::string_view f) {
    const auto v = tsv::parse_number<double>(f);
    if (!v) bad("bad number '" + std::string(f) + "'");
    return *v;
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = tsv::strip_cr(raw);
    if (tsv::skippable(line)) continue;
    const auto f = tsv::split(line);
    if (f[0] == "plan") {
      if (f.size() != 6) bad("plan record needs 6 fields");
      set.plan.shear_max_deg = num(f[1]);
      set.plan.rotate_max_deg = num(f[2]);
      set.plan.translate_max_px = num(f[3]);
      set.plan.flip = num(f[4]) != 0.0;
      set.plan.probability = num(f[5]);
    } else if (f[0] == "scale") {
      for (std::size_t i = 1; i < f.size(); ++i) set.plan.scale_choices.push_back(num(f[i]));
    } else if (f[0] == "images") {
      if (f.size() != 2) bad("images record needs 2 fields");
      set.per_image.resize(static_cast<std::size_t>(num(f[1])));
    } else if (f[0] == "t") {
      if (f.size() != 4) bad("transform record needs 4 fields");
      const auto idx = static_cast<std::size_t>(num(f[1]));
      const auto kind = parse_transform(f[2]);
      if (!kind) bad("unknown transform '" + std::string(f[2]) + "'");
      if (idx >= set.per_image.size()) bad("image index out of range");
      set.per_image[idx].push_back({*kind, num(f[3])});
    } else {
      bad("unknown record '" + std::string(f[0]) + "'");
    }
  }
  return set;
}

ScoreOracle subprocess_oracle(std::string command) {
  return [command = std::move(command)](const AugmentationSet& set) -> double {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path();
    std::string tmpl = (dir / "projcluster-augset-XXXXXX").string();
    const int fd = mkstemp(tmpl.data());
    if (fd < 0) throw OracleError("cannot create descriptor temp file");
    close(fd);
    const fs::path desc = tmpl;
    const fs::path err = tmpl + ".stderr";
    struct Cleanup {
      fs::path a, b;
      ~Cleanup() {
        std::error_code ec;
        fs::remove(a, ec);
        fs::remove(b, ec);
      }
    } cleanup{desc, err};

    {
      std::ofstream out(desc);
      write_augmentation_set(out, set);
      if (!out) throw OracleError("cannot write descriptor " + desc.string());
    }

    const std::string shell = command + " '" + desc.string() + "' 2>'" + err.string() + "'";
    FILE* pipe = popen(shell.c_str(), "r");
    if (!pipe) throw OracleError("cannot start oracle command");
    std::string output;
    char buf[512];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
    const int status = pclose(pipe);

    if (status != 0) {
      std::ifstream ein(err);
      std::stringstream errtext;
      errtext << ein.rdbuf();
      const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
      throw OracleError("oracle exited with status " + std::to_string(code) + ": " + errtext.str());
    }

    const auto first = output.find_first_not_of(" \t\r\n");
    const auto last = output.find_last_not_of(" \t\r\n");
    const std::string_view text =
        first == std::string::npos ? std::string_view{}
                                   : std::string_view(output).substr(first, last - first + 1);
    const auto score = tsv::parse_number<double>(text);
    if (!score) throw OracleError("oracle printed '" + std::string(text) + "', expected one score");
    return *score;
  };
}

const std::vector<double>& default_angle_candidates() {
  static const std::vector<double> c{1, 2, 4, 8, 16, 32};
  return c;
}

const std::vector<double>& default_translate_candidates() {
  static const std::vector<double> c{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 800};
  return c;
}

const std::vector<double>& default_probabilities() {
  static const std::vector<double> p{0.0, 0.25, 0.5, 0.75, 1.0};
  return p;
}

double largest_within_tolerance(std::span<const std::pair<double, double>> scores, double delta) {
  if (scores.empty()) throw PreconditionError("no candidates to choose from");
  double best = scores.front().second;
  for (const auto& [c, s] : scores) best = std::max(best, s);
  double chosen = scores.front().first;
  for (const auto& [c, s] : scores) {
    if (s >= best - delta) chosen = std::max(chosen, c);
  }
  return chosen;
}

namespace {

// Scores every descriptor, optionally concurrently, keeping candidate order.
std::vector<double> score_all(const std::vector<AugmentationSet>& sets,
                              std::span<const double> candidates, const ScoreOracle& oracle,
                              unsigned threads) {
  const auto eval = [&](std::size_t i) {
    double s = 0.0;
    try {
      s = oracle(sets[i]);
    } catch (const OracleError& e) {
      if (e.candidate()) throw;
      throw OracleError(candidates[i], e.what());
    } catch (const std::exception& e) {
      throw OracleError(candidates[i], e.what());
    }
    if (!(s >= 0.0 && s <= 1.0)) {
      throw OracleError(candidates[i], "score " + tsv::format_double(s) + " outside [0, 1]");
    }
    return s;
  };

  std::vector<double> scores(sets.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < sets.size(); ++i) scores[i] = eval(i);
    return scores;
  }
  for (std::size_t begin = 0; begin < sets.size(); begin += threads) {
    const std::size_t end = std::min(sets.size(), begin + threads);
    std::vector<std::future<double>> jobs;
    for (std::size_t i = begin; i < end; ++i) jobs.push_back(std::async(std::launch::async, eval, i));
    for (std::size_t i = begin; i < end; ++i) scores[i] = jobs[i - begin].get();
  }
  return scores;
}

void check_candidates(std::span<const double> candidates) {
  if (candidates.empty()) throw PreconditionError("candidate list is empty");
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!(candidates[i] >= 0.0)) throw PreconditionError("candidates must be non-negative");
    if (i && !(candidates[i] > candidates[i - 1])) {
      throw PreconditionError("candidates must be strictly ascending");
    }
  }
}

SearchResult search(Transform kind, std::span<const double> candidates, const ScoreOracle& oracle,
                    const SearchOptions& options) {
  check_candidates(candidates);
  if (!(options.delta >= 0.0)) throw PreconditionError("delta must be non-negative");

  std::vector<AugmentationSet> sets;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    AugPlan plan;
    plan.flip = false;
    plan.scale_choices.clear();
    plan.probability = 1.0;
    if (kind == Transform::kShear) plan.shear_max_deg = candidates[i];
    if (kind == Transform::kRotate) plan.rotate_max_deg = candidates[i];
    if (kind == Transform::kTranslate) plan.translate_max_px = candidates[i];
    sets.push_back(sample_augmentation(plan, options.image_count, derive_seed(options.seed, i)));
  }
  const auto scores = score_all(sets, candidates, oracle, options.threads);

  SearchResult result;
  result.kind = kind;
  for (std::size_t i = 0; i < candidates.size(); ++i) result.scores.emplace_back(candidates[i], scores[i]);
  result.optimum = largest_within_tolerance(result.scores, options.delta);
  return result;
}

}  // namespace

SearchResult range_search(Transform kind, std::span<const double> candidates,
                          const ScoreOracle& oracle, const SearchOptions& options) {
  if (kind != Transform::kShear && kind != Transform::kRotate) {
    throw PreconditionError("range_search covers shear and rotate only");
  }
  return search(kind, candidates, oracle, options);
}

SearchResult translate_search(std::span<const double> candidates, const ScoreOracle& oracle,
                              const SearchOptions& options) {
  return search(Transform::kTranslate, candidates, oracle, options);
}

SweepResult probability_sweep(const AugPlan& plan, const ScoreOracle& oracle, std::uint64_t seed,
                              const SearchOptions& options) {
  const auto& ps = default_probabilities();
  std::vector<AugmentationSet> sets;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    AugPlan p = plan;
    p.probability = ps[i];
    sets.push_back(sample_augmentation(p, options.image_count, derive_seed(seed, i)));
  }
  const auto scores = score_all(sets, ps, oracle, options.threads);

  SweepResult result;
  std::size_t best = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    result.scores.emplace_back(ps[i], scores[i]);
    if (scores[i] > scores[best]) best = i;
  }
  result.best_probability = ps[best];
  return result;
}

void print_search_table(std::ostream& out, std::span<const SearchResult> searches) {
  for (const auto& s : searches) {
    const bool px = s.kind == Transform::kTranslate;
    out << name(s.kind) << " range search\n";
    out << "  " << std::setw(10) << (px ? "max px" : "max deg") << std::setw(10) << "score" << '\n';
    for (const auto& [c, score] : s.scores) {
      out << "  " << std::setw(10) << tsv::format_double(c) << std::setw(10) << format_score(score)
          << (c == s.optimum ? "  <- optimum" : "") << '\n';
    }
  }
  out << "\nMethod      Optimal range\n";
  out << "-------------------------\n";
  for (const auto& s : searches) {
    const std::string unit = s.kind == Transform::kTranslate ? "" : " deg";
    std::string label(name(s.kind));
    label[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
    out << std::left << std::setw(12) << label << std::right << "[-" << tsv::format_double(s.optimum)
        << unit << ", " << tsv::format_double(s.optimum) << unit << "]\n";
  }
}

void print_sweep_table(std::ostream& out, const SweepResult& sweep) {
  out << "Probability of applying each augmentation\n";
  for (const auto& [p, s] : sweep.scores) out << std::setw(8) << tsv::format_double(p);
  out << '\n';
  for (const auto& [p, s] : sweep.scores) out << std::setw(8) << format_score(s);
  out << "\np* = " << tsv::format_double(sweep.best_probability) << '\n';
}

void write_search_records(std::ostream& out, std::span<const SearchResult> searches,
                          const SweepResult* sweep) {
  for (const auto& s : searches) {
    for (const auto& [c, score] : s.scores) {
      out << "candidate\t" << name(s.kind) << '\t' << tsv::format_double(c) << '\t'
          << tsv::format_double(score) << '\n';
    }
    out << "optimum\t" << name(s.kind) << '\t' << tsv::format_double(s.optimum) << '\n';
  }
  if (sweep) {
    for (const auto& [p, score] : sweep->scores) {
      out << "candidate\tprobability\t" << tsv::format_double(p) << '\t' << tsv::format_double(score)
          << '\n';
    }
    out << "optimum\tprobability\t" << tsv::format_double(sweep->best_probability) << '\n';
  }
}

}  // namespace projcluster::augment
