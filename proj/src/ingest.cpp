#include "projcluster/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "tsv.hpp"

namespace projcluster {

namespace {

constexpr std::size_t kStreamFields = 7;

template <typename T>
T field(std::string_view text, std::size_t line, const char* name) {
  const auto value = tsv::parse_number<T>(text);
  if (!value) {
    throw ParseError(line, std::string("field '") + name + "' is not a valid number: '" +
                               std::string(text) + "'");
  }
  return *value;
}

}  // namespace

DetectionStream parse_stream(std::istream& in, const FrameGeometry& geometry,
                             double score_threshold) {
  if (!geometry.valid()) throw PreconditionError("frame geometry must be positive");

  DetectionStream stream;
  stream.geometry = geometry;
  bool have_session = false;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = tsv::strip_cr(raw);
    if (tsv::skippable(line)) continue;

    const auto fields = tsv::split(line);
    if (fields.size() != kStreamFields) {
      throw ParseError(line_no, "expected 7 tab-separated fields, found " +
                                    std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(line_no, "empty session id");

    Detection det;
    det.frame_index = field<int>(fields[1], line_no, "frame_index");
    det.box.x = field<int>(fields[2], line_no, "x");
    det.box.y = field<int>(fields[3], line_no, "y");
    det.box.w = field<int>(fields[4], line_no, "w");
    det.box.h = field<int>(fields[5], line_no, "h");
    det.score = field<double>(fields[6], line_no, "score");

    if (det.frame_index < 0) throw ValidationError(line_no, "negative frame_index");
    if (det.box.w < 0 || det.box.h < 0) throw ValidationError(line_no, "negative box dimensions");
    if (!(det.score >= 0.0 && det.score <= 1.0)) {
      throw ValidationError(line_no, "score outside [0, 1]");
    }

    if (!have_session) {
      stream.session_id = std::string(fields[0]);
      have_session = true;
    } else if (fields[0] != stream.session_id) {
      throw ValidationError(line_no, "session id '" + std::string(fields[0]) +
                                         "' differs from '" + stream.session_id + "'");
    }

    if (det.score < score_threshold) continue;
    det.box = clip(det.box, geometry);
    if (det.box.area() == 0) continue;
    stream.detections.push_back(det);
  }
  if (in.bad()) throw IoError("read failure");

  std::stable_sort(stream.detections.begin(), stream.detections.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.frame_index < b.frame_index;
                   });
  return stream;
}

DetectionStream load_stream(const std::filesystem::path& path, const FrameGeometry& geometry,
                            double score_threshold) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_stream(in, geometry, score_threshold);
}

void write_stream(std::ostream& out, const DetectionStream& stream) {
  for (const auto& d : stream.detections) {
    out << stream.session_id << '\t' << d.frame_index << '\t' << d.box.x << '\t' << d.box.y
        << '\t' << d.box.w << '\t' << d.box.h << '\t' << tsv::format_double(d.score) << '\n';
  }
}

void save_stream(const std::filesystem::path& path, const DetectionStream& stream) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_stream(out, stream);
  if (!out) throw IoError("write failure on " + path.string());
}

std::size_t Window::detection_count() const noexcept {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.size();
  return n;
}

int stream_duration(const DetectionStream& stream, const WindowOptions& options) {
  if (options.duration_s) return std::max(0, *options.duration_s);
  if (stream.detections.empty()) return 0;
  return stream.detections.back().frame_index + 1;
}

int window_count(const DetectionStream& stream, int length_s, const WindowOptions& options) {
  if (length_s < 1) throw PreconditionError("window length must be at least 1 second");
  const int n = stream_duration(stream, options);
  int count = n / length_s;
  if (options.keep_partial && n % length_s != 0) ++count;
  return count;
}

std::vector<Window> windows(const DetectionStream& stream, int length_s,
                            const WindowOptions& options) {
  const int count = window_count(stream, length_s, options);
  std::vector<Window> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out[i].index = i;
    out[i].start_s = i * length_s;
    out[i].length_s = length_s;
    out[i].frames.resize(static_cast<std::size_t>(length_s));
  }
  for (const auto& d : stream.detections) {
    const int w = d.frame_index / length_s;
    if (w >= count) break;  // sorted, so everything after is in the dropped tail
    out[w].frames[d.frame_index - out[w].start_s].push_back(d);
  }
  return out;
}

}  // namespace projcluster
