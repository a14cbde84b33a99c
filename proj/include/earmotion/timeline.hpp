#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "earmotion/features.hpp"

namespace earmotion {

enum class WindowLabel { background, movement, unobserved };

std::string_view to_string(WindowLabel label) noexcept;
WindowLabel parse_window_label(std::string_view text);

struct TimelineEntry {
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  double score = 0;  ///< NaN for unobserved windows
  WindowLabel label = WindowLabel::background;
  std::optional<bool> gt_overlap;  ///< set when ground truth was supplied

  friend bool operator==(const TimelineEntry& a, const TimelineEntry& b);
};

/// Per-window verdicts across a full-length video.
struct DetectionTimeline {
  std::string video_id;
  std::vector<TimelineEntry> entries;
  std::vector<FrameWindow> ground_truth;

  friend bool operator==(const DetectionTimeline&, const DetectionTimeline&) = default;
};

struct WindowVerdict {
  double score = 0;
  WindowLabel label = WindowLabel::background;
};

/// Classifies the frames [begin, end) of the video. Throwing an
/// earmotion::Error marks that window unobserved.
using WindowClassifier = std::function<WindowVerdict(const FrameWindow&)>;

inline constexpr std::int64_t kDefaultInferWindow = 50;
inline constexpr std::int64_t kDefaultInferStride = 35;

/// Windows come from window_plan(num_frames, window, stride). A window is
/// gt-positive when it shares at least one frame with a ground-truth interval.
DetectionTimeline sliding_window_infer(std::int64_t num_frames, const WindowClassifier& classify,
                                       std::int64_t window = kDefaultInferWindow,
                                       std::int64_t stride = kDefaultInferStride,
                                       std::span<const FrameWindow> ground_truth = {});

enum class TimelineFormat { csv, json };

// CSV columns: start_frame,end_frame,score,label,gt_overlap. Unobserved
// scores are written as "nan"; gt_overlap is 0/1 or empty without ground truth.
void export_timeline(const DetectionTimeline& timeline, const std::filesystem::path& path, TimelineFormat format);
DetectionTimeline import_timeline(const std::filesystem::path& path, TimelineFormat format);

std::string timeline_to_csv(const DetectionTimeline& timeline);
DetectionTimeline timeline_from_csv(std::string_view text);
std::string timeline_to_json(const DetectionTimeline& timeline);
DetectionTimeline timeline_from_json(std::string_view text);

}  // namespace earmotion
