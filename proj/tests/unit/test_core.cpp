#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "projcluster/core.hpp"

using namespace projcluster;

namespace {

BBox random_box(std::mt19937& rng, int extent = 100, int max_side = 40) {
  std::uniform_int_distribution<int> pos(0, extent - 1), side(1, max_side);
  return BBox{pos(rng), pos(rng), side(rng), side(rng)};
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("iou examples") {
    CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
    CHECK(iou({0, 0, 10, 10}, {20, 20, 5, 5}) == 0.0);
    // inter 50, union 150
    CHECK(intersection_area({0, 0, 10, 10}, {5, 0, 10, 10}) == 50);
    CHECK(iou({0, 0, 10, 10}, {5, 0, 10, 10}) == 1.0 / 3.0);
    // touching edges do not overlap (half-open)
    CHECK(iou({0, 0, 10, 10}, {10, 0, 10, 10}) == 0.0);
  }

  TEST_CASE("iou is symmetric, bounded, and exact on identity") {
    std::mt19937 rng(7);
    for (int i = 0; i < 2000; ++i) {
      const BBox a = random_box(rng), b = random_box(rng);
      const double v = iou(a, b);
      CHECK(v == iou(b, a));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(iou(a, a) == 1.0);
    }
  }

  TEST_CASE("clip to frame") {
    const FrameGeometry g{100, 100};
    CHECK(clip({-5, 0, 20, 10}, g) == BBox{0, 0, 15, 10});
    CHECK(clip({95, 95, 20, 20}, g) == BBox{95, 95, 5, 5});
    CHECK(clip({120, 0, 5, 5}, g).area() == 0);
  }

  TEST_CASE("nms examples") {
    const Detection a{0, {0, 0, 10, 10}, 0.9};
    const Detection b{0, {2, 0, 10, 10}, 0.8};
    const Detection far{0, {50, 50, 10, 10}, 0.95};

    const std::vector<Detection> one{a};
    CHECK(nms(one, 0.5) == one);

    // IoU(a, b) = 80/120
    CHECK(iou(a.box, b.box) == 80.0 / 120.0);
    const std::vector<Detection> pair{a, b};
    CHECK(nms(pair, 0.5) == std::vector<Detection>{a});
    CHECK(oracle::nms_reference(pair, 1, 2) == std::vector<Detection>{a});

    const std::vector<Detection> disjoint{b, far};
    CHECK(nms(disjoint, 0.5) == std::vector<Detection>{far, b});
    CHECK(nms(std::vector<Detection>{}, 0.5).empty());
  }

  TEST_CASE("nms breaks score ties by input order") {
    const Detection first{3, {0, 0, 10, 10}, 0.7};
    const Detection second{3, {1, 0, 10, 10}, 0.7};
    CHECK(nms(std::vector<Detection>{first, second}, 0.5) == std::vector<Detection>{first});
    CHECK(nms(std::vector<Detection>{second, first}, 0.5) == std::vector<Detection>{second});
  }

  TEST_CASE("nms rejects mixed frames and bad thresholds") {
    const std::vector<Detection> mixed{{0, {0, 0, 5, 5}, 0.9}, {1, {0, 0, 5, 5}, 0.9}};
    CHECK_THROWS_AS((void)nms(mixed, 0.5), PreconditionError);
    const std::vector<Detection> ok{{0, {0, 0, 5, 5}, 0.9}};
    CHECK_THROWS_AS((void)nms(ok, 0.0), PreconditionError);
    CHECK_THROWS_AS((void)nms(ok, 1.0), PreconditionError);
  }

  TEST_CASE("nms properties on random frames") {
    std::mt19937 rng(2024);
    std::uniform_int_distribution<int> count(0, 50);
    std::uniform_int_distribution<int> score_bucket(0, 20);  // coarse scores force ties
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<Detection> dets;
      const int n = count(rng);
      for (int i = 0; i < n; ++i) dets.push_back({5, random_box(rng), score_bucket(rng) / 20.0});

      const auto kept = nms(dets, 0.5);
      CHECK(kept == oracle::nms_reference(dets, 1, 2));
      for (const auto& k : kept) CHECK(std::find(dets.begin(), dets.end(), k) != dets.end());
      for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i) CHECK(kept[i - 1].score >= kept[i].score);
        for (std::size_t j = i + 1; j < kept.size(); ++j) CHECK(iou(kept[i].box, kept[j].box) <= 0.5);
      }
      CHECK(nms(kept, 0.5) == kept);
    }
  }
}
