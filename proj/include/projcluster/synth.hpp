#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "projcluster/core.hpp"
#include "projcluster/eval.hpp"
#include "projcluster/ingest.hpp"
#include "projcluster/rng.hpp"

namespace projcluster::synth {

/// A near-camera hand. Each visible second it emits one detection whose
/// corners are offset by independent uniform integers in [-jitter, jitter].
struct HandSpec {
  BBox box;
  int jitter = 0;
  std::set<int> occluded_s;  // seconds with no detection
};

/// A small far-group box that emits a detection with the given probability.
struct DistractorSpec {
  BBox box;
  double flicker_probability = 0.5;
};

struct SceneSpec {
  std::string session_id = "synth";
  FrameGeometry geometry{858, 480};
  int duration_s = 12;
  std::vector<HandSpec> hands;
  std::vector<DistractorSpec> distractors;
  std::uint64_t seed = 0;
  /// Used only for the fully-occluded warning.
  int window_length_s = 12;
};

struct Scene {
  DetectionStream stream;
  GroundTruthSet ground_truth;
  std::vector<std::string> warnings;
};

/// Throws PreconditionError when a box leaves the frame, a hand is smaller
/// than four times any distractor, or a probability is outside [0, 1].
void validate(const SceneSpec& spec);

/// Deterministic for a given scene. Ground truth holds every hand box for
/// every second, occluded or not.
[[nodiscard]] Scene generate(const SceneSpec& spec);

/// Three hands (the third occluded for 4 of the first 12 seconds) and five
/// small flickering distractors in an 858x480 frame.
[[nodiscard]] SceneSpec occlusion_scene(std::uint64_t seed = 42, int duration_s = 12);

}  // namespace projcluster::synth
