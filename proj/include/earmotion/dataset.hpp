#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace earmotion {

enum class ClipLabel { background, movement };
enum class Split { train, val, test };

std::string_view to_string(ClipLabel label) noexcept;
std::string_view to_string(Split split) noexcept;
ClipLabel parse_clip_label(std::string_view text);
Split parse_split(std::string_view text);

/// One timed EquiFACS code from an annotation file.
struct AnnotationRecord {
  std::string video_id;
  std::string au_code;
  double start_s = 0;
  double end_s = 0;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

/// CSV with header line, one `video_id,au_code,start_s,end_s` record per line.
std::vector<AnnotationRecord> parse_annotations(const std::filesystem::path& path);
std::vector<AnnotationRecord> parse_annotations(std::istream& in);

/// Keeps records whose code starts with one of `ear_prefixes`, in order.
std::vector<AnnotationRecord> filter_ear_records(std::span<const AnnotationRecord> records,
                                                 const std::vector<std::string>& ear_prefixes = {"EAD"});

// Clip boundaries are kept as integer milliseconds so that sampled
// boundaries survive JSON round trips and comparisons exactly.
using Millis = std::int64_t;
inline constexpr Millis kMinClipMs = 500;
inline constexpr Millis kMaxClipMs = 3000;

Millis to_millis(double seconds);

struct FrameRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;
};

struct ClipEntry {
  std::string video_id;
  Millis start_ms = 0;
  Millis end_ms = 0;
  ClipLabel label = ClipLabel::background;
  std::optional<std::string> au_code;
  Split split = Split::train;

  double start_s() const noexcept { return start_ms / 1000.0; }
  double end_s() const noexcept { return end_ms / 1000.0; }
  Millis duration_ms() const noexcept { return end_ms - start_ms; }

  /// Stable identifier used to name per-clip feature files.
  std::string clip_id() const;

  /// Frame indices [round(start*fps), round(end*fps)).
  FrameRange frames(double fps) const;

  friend bool operator==(const ClipEntry&, const ClipEntry&) = default;
};

struct BackgroundSample {
  std::vector<ClipEntry> entries;
  std::size_t shortfall = 0;
};

/// Draws up to `target_count` background clips of uniform duration in
/// [0.5, 3] s that overlap neither the records' intervals nor each other.
/// Placement is rejection-sampled with kPlacementAttempts tries per clip.
BackgroundSample sample_background(std::span<const AnnotationRecord> records, double video_duration_s,
                                   std::size_t target_count, std::uint64_t seed);

inline constexpr int kPlacementAttempts = 1000;

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct ManifestOptions {
  std::vector<std::string> ear_prefixes{"EAD"};
  SplitFractions fractions;
  bool subject_wise = false;
  std::string source;
};

struct ClipManifest {
  std::vector<ClipEntry> entries;
  std::uint64_t seed = 0;
  std::string source;
  std::size_t shortfall = 0;

  std::size_t count(ClipLabel label) const;
  std::size_t count(Split split) const;
  std::vector<ClipEntry> split(Split split) const;

  friend bool operator==(const ClipManifest&, const ClipManifest&) = default;
};

/// Movement clip interval for an annotation: the annotation itself, or a
/// window centred on its midpoint when shorter than 0.5 s or longer than 3 s,
/// shifted back inside [0, video_duration].
ClipEntry movement_clip(const AnnotationRecord& record, double video_duration_s);

/// Balanced, split-assigned manifest. `per_video_durations` lists every
/// video (seconds); ear records of videos missing from it are rejected.
ClipManifest build_manifest(std::span<const AnnotationRecord> records,
                            const std::map<std::string, double>& per_video_durations, std::uint64_t seed,
                            const ManifestOptions& options = {});

std::string manifest_to_json(const ClipManifest& manifest);
ClipManifest manifest_from_json(std::string_view text);
void write_manifest(const ClipManifest& manifest, const std::filesystem::path& path);
ClipManifest read_manifest(const std::filesystem::path& path);

}  // namespace earmotion
