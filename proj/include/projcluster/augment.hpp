#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "projcluster/core.hpp"

namespace projcluster::augment {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major grayscale

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  [[nodiscard]] std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const Image&, const Image&) = default;
};

struct LabeledImage {
  Image image;
  std::vector<BBox> boxes;

  friend bool operator==(const LabeledImage&, const LabeledImage&) = default;
};

enum class Transform { kFlip, kScale, kShear, kRotate, kTranslate };

inline constexpr std::array<Transform, 5> kAllTransforms = {
    Transform::kFlip, Transform::kScale, Transform::kShear, Transform::kRotate,
    Transform::kTranslate};

[[nodiscard]] std::string_view name(Transform t) noexcept;
[[nodiscard]] std::optional<Transform> parse_transform(std::string_view text) noexcept;

/// Magnitude outside the range a plan declares for a transform.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Ranges for each augmentation plus the probability of applying each one.
///
/// Magnitudes are: flip 0 or 1; scale the fractional change (factor - 1, so
/// 0.8 is -0.2); shear and rotate in degrees; translate in horizontal pixels.
/// A magnitude of 0 is the identity for every transform.
struct AugPlan {
  double shear_max_deg = 0.0;
  double rotate_max_deg = 0.0;
  double translate_max_px = 0.0;
  std::vector<double> scale_choices{0.8, 1.2};
  bool flip = true;
  double probability = 0.0;

  /// Throws PreconditionError on negative ranges or p outside [0, 1].
  void validate() const;
  /// Largest |magnitude| allowed for `t`.
  [[nodiscard]] double max_magnitude(Transform t) const;

  friend bool operator==(const AugPlan&, const AugPlan&) = default;
};

struct AppliedTransform {
  Transform kind = Transform::kFlip;
  double magnitude = 0.0;

  friend bool operator==(const AppliedTransform&, const AppliedTransform&) = default;
};

/// Applies one affine transform about the image centre with nearest-neighbour
/// resampling; pixels mapped from outside the source are 0. Each box becomes
/// the bounding box of its four transformed corners, clipped to the frame,
/// and is dropped when less than 25% of its original area remains.
///
/// Throws RangeError when `magnitude` exceeds the plan's range for `kind`.
[[nodiscard]] LabeledImage apply_transform(const LabeledImage& img, Transform kind,
                                           double magnitude, const AugPlan& plan);
[[nodiscard]] LabeledImage apply_transforms(const LabeledImage& img,
                                            std::span<const AppliedTransform> steps,
                                            const AugPlan& plan);

/// Maps a box through `kind` without touching pixels (same rule as above,
/// before clipping).
[[nodiscard]] BBox transform_box(const BBox& box, Transform kind, double magnitude, int width,
                                 int height);

/// Descriptor of an augmented training set: the plan, and for every image the
/// transforms drawn for it.
struct AugmentationSet {
  AugPlan plan;
  std::vector<std::vector<AppliedTransform>> per_image;

  friend bool operator==(const AugmentationSet&, const AugmentationSet&) = default;
};

/// Draws, independently per image and per transform, whether to apply it
/// (with plan.probability) and a uniform magnitude within its range. Angles
/// and pixel shifts are drawn from the integers in [-max, max]; scale picks
/// one of plan.scale_choices.
[[nodiscard]] AugmentationSet sample_augmentation(const AugPlan& plan, std::size_t image_count,
                                                  std::uint64_t seed);
[[nodiscard]] AugmentationSet unaugmented(std::size_t image_count, const AugPlan& plan = {});

void write_augmentation_set(std::ostream& out, const AugmentationSet& set);
[[nodiscard]] AugmentationSet parse_augmentation_set(std::istream& in);

/// Validation score in [0, 1] for an augmented training set.
using ScoreOracle = std::function<double(const AugmentationSet&)>;

/// An oracle call failed; carries the candidate being evaluated.
class OracleError : public std::runtime_error {
 public:
  OracleError(double candidate, const std::string& what)
      : std::runtime_error("candidate " + format_candidate(candidate) + ": " + what),
        candidate_(candidate) {}
  explicit OracleError(const std::string& what)
      : std::runtime_error(what), candidate_(std::nullopt) {}
  [[nodiscard]] std::optional<double> candidate() const noexcept { return candidate_; }

 private:
  static std::string format_candidate(double c);
  std::optional<double> candidate_;
};

/// Runs `command <descriptor-path>` through the shell, where the descriptor is
/// written with write_augmentation_set to a temporary file, and parses one
/// decimal score from its standard output. A non-zero exit raises
/// OracleError carrying the command's stderr.
[[nodiscard]] ScoreOracle subprocess_oracle(std::string command);

struct SearchOptions {
  /// Scores within delta of the best count as no significant decrease.
  double delta = 0.01;
  /// Size of the training set described to the oracle.
  std::size_t image_count = 350;
  std::uint64_t seed = 0;
  /// Concurrent oracle evaluations.
  unsigned threads = 1;
};

struct SearchResult {
  Transform kind = Transform::kRotate;
  double optimum = 0.0;
  std::vector<std::pair<double, double>> scores;  // candidate -> score, in candidate order
};

[[nodiscard]] const std::vector<double>& default_angle_candidates();
[[nodiscard]] const std::vector<double>& default_translate_candidates();
[[nodiscard]] const std::vector<double>& default_probabilities();

/// Largest candidate whose score is at least (best score - delta).
[[nodiscard]] double largest_within_tolerance(std::span<const std::pair<double, double>> scores,
                                              double delta);

/// Evaluates each symmetric range [-c, c] with only `kind` enabled and
/// applied to every image, then picks the largest candidate without a
/// significant drop. `kind` must be shear or rotate.
[[nodiscard]] SearchResult range_search(Transform kind, std::span<const double> candidates,
                                        const ScoreOracle& oracle, const SearchOptions& options = {});

/// The same search over horizontal translation in pixels.
[[nodiscard]] SearchResult translate_search(std::span<const double> candidates,
                                            const ScoreOracle& oracle,
                                            const SearchOptions& options = {});

struct SweepResult {
  double best_probability = 0.0;
  std::vector<std::pair<double, double>> scores;  // p -> score, ascending p
};

/// Scores the plan at each p in {0, 0.25, 0.5, 0.75, 1} and returns the
/// argmax; ties go to the smaller p.
[[nodiscard]] SweepResult probability_sweep(const AugPlan& plan, const ScoreOracle& oracle,
                                            std::uint64_t seed, const SearchOptions& options = {});

void print_search_table(std::ostream& out, std::span<const SearchResult> searches);
void print_sweep_table(std::ostream& out, const SweepResult& sweep);
void write_search_records(std::ostream& out, std::span<const SearchResult> searches,
                          const SweepResult* sweep);

}  // namespace projcluster::augment
