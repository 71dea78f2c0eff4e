#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "projcluster/core.hpp"

namespace projcluster {

/// Malformed record in a detection or ground-truth file.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed record with impossible values (negative sizes, bad score).
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DetectionStream {
  std::string session_id;
  FrameGeometry geometry;
  /// Sorted by frame_index; file order is kept within a frame.
  std::vector<Detection> detections;

  friend bool operator==(const DetectionStream&, const DetectionStream&) = default;
};

/// Reads `session_id frame x y w h score` records (tab-separated, `#`
/// comments). Drops detections scoring below `score_threshold`, clips boxes
/// to the frame, and drops boxes left with no area. All records must carry
/// the same session id.
[[nodiscard]] DetectionStream parse_stream(std::istream& in, const FrameGeometry& geometry,
                                           double score_threshold);
[[nodiscard]] DetectionStream load_stream(const std::filesystem::path& path,
                                          const FrameGeometry& geometry, double score_threshold);

void write_stream(std::ostream& out, const DetectionStream& stream);
void save_stream(const std::filesystem::path& path, const DetectionStream& stream);

struct Window {
  int index = 0;
  int start_s = 0;
  int length_s = 12;
  /// Exactly length_s slots, one per second; slots may be empty.
  std::vector<std::vector<Detection>> frames;

  [[nodiscard]] std::size_t detection_count() const noexcept;
};

struct WindowOptions {
  /// Emit a trailing partial window instead of dropping it.
  bool keep_partial = false;
  /// Session length in seconds. When unset it is max(frame_index) + 1.
  std::optional<int> duration_s;
};

/// Number of seconds n covered by the stream under `options`.
[[nodiscard]] int stream_duration(const DetectionStream& stream, const WindowOptions& options = {});

/// Number of windows `windows` will produce: floor(n / length_s), plus one
/// for a trailing partial window when requested.
[[nodiscard]] int window_count(const DetectionStream& stream, int length_s,
                               const WindowOptions& options = {});

/// Partitions the stream into consecutive windows of `length_s` seconds.
[[nodiscard]] std::vector<Window> windows(const DetectionStream& stream, int length_s,
                                          const WindowOptions& options = {});

}  // namespace projcluster
