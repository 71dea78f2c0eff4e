#include <doctest.h>

#include <random>
#include <sstream>

#include "projcluster/ingest.hpp"

using namespace projcluster;

namespace {

DetectionStream parse(const std::string& text, FrameGeometry g = {100, 100}, double th = 0.5) {
  std::istringstream in(text);
  return parse_stream(in, g, th);
}

DetectionStream frames_upto(int last) {
  DetectionStream s;
  s.geometry = {100, 100};
  for (int f = 0; f <= last; ++f) s.detections.push_back({f, {0, 0, 5, 5}, 0.9});
  return s;
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("empty input yields an empty stream") {
    const auto s = parse("");
    CHECK(s.detections.empty());
    CHECK(parse("# only a comment\n\n").detections.empty());
  }

  TEST_CASE("score filter, clipping and zero-area drop") {
    const auto s = parse(
        "s1\t0\t10\t10\t5\t5\t0.1\n"      // below threshold
        "s1\t0\t-5\t0\t20\t10\t0.9\n"     // clipped to (0,0,15,10)
        "s1\t1\t150\t0\t10\t10\t0.9\n"    // entirely outside: dropped
        "s1\t1\t0\t0\t0\t10\t0.9\n");     // zero width: dropped
    REQUIRE(s.detections.size() == 1);
    CHECK(s.session_id == "s1");
    CHECK(s.detections[0].box == BBox{0, 0, 15, 10});
  }

  TEST_CASE("records are sorted by frame, stable within a frame") {
    const auto s = parse(
        "s\t2\t0\t0\t5\t5\t0.9\n"
        "s\t0\t1\t0\t5\t5\t0.9\n"
        "s\t2\t2\t0\t5\t5\t0.9\n"
        "s\t0\t3\t0\t5\t5\t0.9\n");
    REQUIRE(s.detections.size() == 4);
    CHECK(s.detections[0].box.x == 1);
    CHECK(s.detections[1].box.x == 3);
    CHECK(s.detections[2].box.x == 0);
    CHECK(s.detections[3].box.x == 2);
  }

  TEST_CASE("malformed records name their line") {
    try {
      (void)parse("# header\ns\t0\t0\t0\t5\t5\t0.9\ns\t1\tx\t0\t5\t5\t0.9\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS((void)parse("s\t0\t0\t0\t5\t5\n"), ParseError);
    CHECK_THROWS_AS((void)parse("s\t0\t0\t0\t5\t5\t0.9\textra\n"), ParseError);
  }

  TEST_CASE("impossible values are validation errors") {
    CHECK_THROWS_AS((void)parse("s\t0\t0\t0\t-5\t5\t0.9\n"), ValidationError);
    CHECK_THROWS_AS((void)parse("s\t-1\t0\t0\t5\t5\t0.9\n"), ValidationError);
    CHECK_THROWS_AS((void)parse("s\t0\t0\t0\t5\t5\t1.5\n"), ValidationError);
    CHECK_THROWS_AS((void)parse("a\t0\t0\t0\t5\t5\t0.9\nb\t0\t0\t0\t5\t5\t0.9\n"), ValidationError);
  }

  TEST_CASE("windows use floor division") {
    auto w = windows(frames_upto(35), 12);
    REQUIRE(w.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(w[i].index == i);
      CHECK(w[i].start_s == 12 * i);
      CHECK(w[i].frames.size() == 12);
      CHECK(w[i].detection_count() == 12);
    }
    CHECK(windows(frames_upto(10), 12).empty());
    w = windows(frames_upto(24), 12);
    CHECK(w.size() == 2);
    CHECK(w[0].detection_count() + w[1].detection_count() == 24);  // frame 24 dropped
  }

  TEST_CASE("partial window and explicit duration") {
    const auto w = windows(frames_upto(24), 12, {.keep_partial = true});
    REQUIRE(w.size() == 3);
    CHECK(w[2].frames.size() == 12);
    CHECK(w[2].detection_count() == 1);
    CHECK(windows(DetectionStream{}, 12, {.duration_s = 36}).size() == 3);
    CHECK_THROWS_AS((void)windows(frames_upto(3), 0), PreconditionError);
  }

  TEST_CASE("windows partition the retained frames") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      DetectionStream s;
      s.geometry = {64, 64};
      std::uniform_int_distribution<int> frame(0, 100), n(0, 200);
      const int count = n(rng);
      for (int i = 0; i < count; ++i) s.detections.push_back({frame(rng), {1, 1, 3, 3}, 0.8});
      std::stable_sort(s.detections.begin(), s.detections.end(),
                       [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
      const int len = 1 + trial % 13;
      const auto ws = windows(s, len);
      std::size_t in_windows = 0;
      for (const auto& w : ws) {
        for (int k = 0; k < len; ++k)
          for (const auto& d : w.frames[k]) CHECK(d.frame_index == w.start_s + k);
        in_windows += w.detection_count();
      }
      const int kept_until = static_cast<int>(ws.size()) * len;
      const auto tail = std::count_if(s.detections.begin(), s.detections.end(),
                                      [&](const Detection& d) { return d.frame_index >= kept_until; });
      CHECK(in_windows + static_cast<std::size_t>(tail) == s.detections.size());
    }
  }

  TEST_CASE("load, write, reload round trip") {
    std::mt19937 rng(3);
    std::ostringstream text;
    std::uniform_int_distribution<int> coord(-20, 120), side(0, 40), frame(0, 50);
    std::uniform_real_distribution<double> score(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
      text << "sess\t" << frame(rng) << '\t' << coord(rng) << '\t' << coord(rng) << '\t' << side(rng)
           << '\t' << side(rng) << '\t' << score(rng) << '\n';
    }
    const auto first = parse(text.str());
    std::ostringstream out;
    write_stream(out, first);
    const auto second = parse(out.str());
    CHECK(first == second);
    std::ostringstream again;
    write_stream(again, second);
    CHECK(out.str() == again.str());
  }
}
