#include "projcluster/synth.hpp"

#include <algorithm>

namespace projcluster::synth {

namespace {

bool inside(const BBox& b, const FrameGeometry& g) {
  return b.valid() && b.x >= 0 && b.y >= 0 && b.right() <= g.width && b.bottom() <= g.height;
}

}  // namespace

void validate(const SceneSpec& spec) {
  if (!spec.geometry.valid()) throw PreconditionError("scene geometry must be positive");
  if (spec.duration_s < 0) throw PreconditionError("scene duration must be non-negative");
  if (spec.window_length_s < 1) throw PreconditionError("window length must be at least 1");
  for (const auto& h : spec.hands) {
    if (!inside(h.box, spec.geometry)) throw PreconditionError("hand box outside the frame");
    if (h.jitter < 0) throw PreconditionError("jitter must be non-negative");
    for (const auto& d : spec.distractors) {
      if (h.box.area() < 4 * d.box.area()) {
        throw PreconditionError("hand boxes must be at least 4x the area of every distractor");
      }
    }
  }
  for (const auto& d : spec.distractors) {
    if (!inside(d.box, spec.geometry)) throw PreconditionError("distractor box outside the frame");
    if (!(d.flicker_probability >= 0.0 && d.flicker_probability <= 1.0)) {
      throw PreconditionError("flicker probability must lie in [0, 1]");
    }
  }
}

Scene generate(const SceneSpec& spec) {
  validate(spec);
  Scene scene;
  scene.stream.session_id = spec.session_id;
  scene.stream.geometry = spec.geometry;
  scene.ground_truth.session_id = spec.session_id;

  Rng rng(spec.seed);
  for (int s = 0; s < spec.duration_s; ++s) {
    for (const auto& hand : spec.hands) {
      scene.ground_truth.frames[s].push_back(hand.box);
      if (hand.occluded_s.contains(s)) continue;
      const int j = hand.jitter;
      const int x0 = hand.box.x + static_cast<int>(rng.uniform_int(-j, j));
      const int y0 = hand.box.y + static_cast<int>(rng.uniform_int(-j, j));
      const int x1 = hand.box.right() + static_cast<int>(rng.uniform_int(-j, j));
      const int y1 = hand.box.bottom() + static_cast<int>(rng.uniform_int(-j, j));
      const double score = rng.uniform(0.6, 1.0);
      const BBox box = clip(BBox{x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)}, spec.geometry);
      if (box.area() > 0) scene.stream.detections.push_back({s, box, score});
    }
    for (const auto& d : spec.distractors) {
      const bool fire = rng.bernoulli(d.flicker_probability);
      const double score = rng.uniform(0.5, 0.8);
      if (fire) scene.stream.detections.push_back({s, d.box, score});
    }
  }

  const int full_windows = spec.duration_s / spec.window_length_s;
  for (std::size_t k = 0; k < spec.hands.size(); ++k) {
    for (int w = 0; w < full_windows; ++w) {
      bool all = true;
      for (int s = w * spec.window_length_s; s < (w + 1) * spec.window_length_s && all; ++s) {
        all = spec.hands[k].occluded_s.contains(s);
      }
      if (all) {
        scene.warnings.push_back("hand " + std::to_string(k) + " is occluded for all of window " +
                                 std::to_string(w) + "; nothing detectable");
      }
    }
  }
  return scene;
}

SceneSpec occlusion_scene(std::uint64_t seed, int duration_s) {
  SceneSpec spec;
  spec.session_id = "synth-occlusion";
  spec.geometry = {858, 480};
  spec.duration_s = duration_s;
  spec.seed = seed;

  HandSpec left{{120, 300, 90, 80}, 3, {}};
  HandSpec middle{{380, 320, 80, 90}, 3, {}};
  HandSpec right{{620, 290, 90, 85}, 3, {}};
  // Occluded for seconds 3..6 of every 12-second span.
  for (int s = 0; s < duration_s; ++s) {
    if (s % 12 >= 3 && s % 12 <= 6) right.occluded_s.insert(s);
  }
  spec.hands = {left, middle, right};

  spec.distractors = {
      {{100, 60, 20, 20}, 0.5}, {{250, 50, 18, 22}, 0.5}, {{420, 70, 20, 20}, 0.5},
      {{560, 55, 22, 18}, 0.5}, {{720, 65, 20, 20}, 0.5},
  };
  return spec;
}

}  // namespace projcluster::synth
