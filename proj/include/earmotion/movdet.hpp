#pragma once

#include <optional>
#include <span>
#include <vector>

#include "earmotion/dataset.hpp"
#include "earmotion/frames.hpp"
#include "earmotion/optflow.hpp"
#include "earmotion/timeline.hpp"

namespace earmotion {

struct MovDetConfig {
  int sample_stride = 1;   ///< frames between the two frames of an analysed pair
  double threshold = 1.0;  ///< px/frame
  FlowParams flow;
};

void validate(const MovDetConfig& config);

struct MovDetResult {
  ClipLabel label = ClipLabel::background;
  double score = 0;  ///< mean of the per-pair ROI flow magnitudes
  std::vector<double> per_pair_scores;
  std::vector<std::size_t> pair_starts;  ///< first frame of each scored pair
};

/// Movement iff score > threshold; a tie is background.
ClipLabel movdet_label(double score, double threshold) noexcept;

/// Scores pairs (i, i + stride) for i = 0, stride, 2*stride, ... where both
/// frames have a box. Each frame is cropped to its own box and the second
/// crop is resized to the first crop's shape before computing flow.
MovDetResult movdet_classify(const FrameSequence& clip, const RegionTrack& roi, const MovDetConfig& config);

struct ScoredClip {
  double score = 0;
  ClipLabel label = ClipLabel::background;
};

struct Calibration {
  double threshold = 0;
  double train_accuracy = 0;
};

/// Threshold maximising training accuracy among the midpoints of adjacent
/// distinct sorted scores; the smallest such midpoint wins ties.
Calibration calibrate_threshold(std::span<const ScoredClip> train_results);

/// Accuracy of `movdet_label(score, threshold)` against the labels.
double threshold_accuracy(std::span<const ScoredClip> results, double threshold);

WindowClassifier movdet_window_classifier(const FrameSequence& video, const RegionTrack& roi,
                                          const MovDetConfig& config);

/// Windows of round(window_s * fps) frames every round(stride_s * fps)
/// frames (stride defaults to the window, tiling the video). Windows without
/// a visible ear are unobserved.
DetectionTimeline movdet_timeline(const FrameSequence& video, const RegionTrack& roi, const MovDetConfig& config,
                                  double window_s, std::optional<double> stride_s = std::nullopt);

}  // namespace earmotion
