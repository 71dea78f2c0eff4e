#include <doctest.h>

#include <sstream>

#include "projcluster/ingest.hpp"
#include "projcluster/synth.hpp"

using namespace projcluster;
using namespace projcluster::synth;

TEST_SUITE("synth") {
  TEST_CASE("rng draws stay in range and are reproducible") {
    Rng a(5), b(5);
    for (int i = 0; i < 1000; ++i) {
      const auto v = a.uniform_int(-3, 3);
      CHECK(v >= -3);
      CHECK(v <= 3);
      CHECK(v == b.uniform_int(-3, 3));
      const double u = a.uniform(0.6, 1.0);
      CHECK(u >= 0.6);
      CHECK(u < 1.0);
      (void)b.uniform(0.6, 1.0);
    }
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    Rng c(1);
    CHECK(!c.bernoulli(0.0));
    CHECK(c.bernoulli(1.0));
  }

  TEST_CASE("empty scene") {
    SceneSpec spec;
    const auto scene = generate(spec);
    CHECK(scene.stream.detections.empty());
    CHECK(scene.ground_truth.box_count() == 0);
    CHECK(scene.warnings.empty());
  }

  TEST_CASE("a steady hand without jitter repeats its box") {
    SceneSpec spec;
    spec.hands.push_back({{100, 100, 80, 80}, 0, {}});
    const auto scene = generate(spec);
    REQUIRE(scene.stream.detections.size() == 12);
    for (int f = 0; f < 12; ++f) {
      CHECK(scene.stream.detections[static_cast<std::size_t>(f)].frame_index == f);
      CHECK(scene.stream.detections[static_cast<std::size_t>(f)].box == BBox{100, 100, 80, 80});
      CHECK(scene.stream.detections[static_cast<std::size_t>(f)].score >= 0.6);
    }
    CHECK(scene.ground_truth.box_count() == 12);
  }

  TEST_CASE("generation is deterministic per seed") {
    const auto write = [](std::uint64_t seed) {
      std::ostringstream out;
      write_stream(out, generate(occlusion_scene(seed, 60)).stream);
      return out.str();
    };
    CHECK(write(42) == write(42));
    CHECK(write(42) != write(43));
  }

  TEST_CASE("each hand is detectable whenever it is visible") {
    const auto spec = occlusion_scene(42, 36);
    const auto scene = generate(spec);
    for (const auto& hand : spec.hands) {
      int hits = 0;
      for (const auto& d : scene.stream.detections) hits += iou(d.box, hand.box) >= 0.5 ? 1 : 0;
      CHECK(hits == spec.duration_s - static_cast<int>(hand.occluded_s.size()));
    }
    for (const auto& d : scene.stream.detections) {
      CHECK(d.score >= 0.5);
      CHECK(d.score < 1.0);
    }
    CHECK(scene.ground_truth.box_count() == 3 * 36);
    CHECK(spec.hands[2].occluded_s.size() == 12);
  }

  TEST_CASE("scene validation") {
    SceneSpec spec;
    spec.hands.push_back({{0, 0, 20, 20}, 1, {}});
    spec.distractors.push_back({{100, 100, 10, 10}, 0.5});
    CHECK_NOTHROW(validate(spec));  // exactly 4x
    spec.distractors.push_back({{100, 100, 11, 10}, 0.5});
    CHECK_THROWS_AS(validate(spec), PreconditionError);
    spec.distractors.pop_back();
    spec.hands.push_back({{850, 0, 20, 20}, 1, {}});
    CHECK_THROWS_AS(validate(spec), PreconditionError);
    spec.hands.pop_back();
    spec.distractors[0].flicker_probability = 1.5;
    CHECK_THROWS_AS(validate(spec), PreconditionError);
  }

  TEST_CASE("a hand hidden for a whole window triggers a warning") {
    SceneSpec spec;
    spec.duration_s = 24;
    HandSpec hand{{100, 100, 80, 80}, 0, {}};
    for (int s = 12; s < 24; ++s) hand.occluded_s.insert(s);
    spec.hands.push_back(hand);
    const auto scene = generate(spec);
    REQUIRE(scene.warnings.size() == 1);
    CHECK(scene.warnings[0].find("window 1") != std::string::npos);
    CHECK(generate(occlusion_scene()).warnings.empty());
  }
}
