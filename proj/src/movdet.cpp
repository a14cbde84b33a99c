#include "earmotion/movdet.hpp"

#include <algorithm>
#include <cmath>

namespace earmotion {

void validate(const MovDetConfig& config) {
  require(config.sample_stride >= 1, "sample_stride must be >= 1");
  require(config.threshold > 0 && std::isfinite(config.threshold), "threshold must be positive");
  validate(config.flow);
}

ClipLabel movdet_label(double score, double threshold) noexcept {
  return score > threshold ? ClipLabel::movement : ClipLabel::background;
}

MovDetResult movdet_classify(const FrameSequence& clip, const RegionTrack& roi, const MovDetConfig& config) {
  validate(config);
  validate(clip);
  validate(roi, clip);
  const auto stride = static_cast<std::size_t>(config.sample_stride);
  require(clip.size() >= stride + 1, "clip has fewer than sample_stride + 1 frames");

  MovDetResult result;
  for (std::size_t i = 0; i + stride < clip.size(); i += stride) {
    const auto& box0 = roi.boxes[i];
    const auto& box1 = roi.boxes[i + stride];
    if (!box0 || !box1) continue;
    const Plane first = crop(to_gray_plane(clip.frames[i]), *box0);
    Plane second = crop(to_gray_plane(clip.frames[i + stride]), *box1);
    second = resize_bilinear(second, first.rows(), first.cols());
    const FlowField flow = farneback_flow(first, second, config.flow);
    result.per_pair_scores.push_back(mean_flow_magnitude(flow));
    result.pair_starts.push_back(i);
  }
  if (result.per_pair_scores.empty()) fail(Errc::no_observable_region, "no sampled pair has a visible ear box");
  double sum = 0;
  for (double s : result.per_pair_scores) sum += s;
  result.score = sum / static_cast<double>(result.per_pair_scores.size());
  result.label = movdet_label(result.score, config.threshold);
  return result;
}

double threshold_accuracy(std::span<const ScoredClip> results, double threshold) {
  require(!results.empty(), "no scored clips");
  std::size_t correct = 0;
  for (const auto& r : results) correct += movdet_label(r.score, threshold) == r.label;
  return static_cast<double>(correct) / static_cast<double>(results.size());
}

Calibration calibrate_threshold(std::span<const ScoredClip> train_results) {
  const bool has_mv = std::any_of(train_results.begin(), train_results.end(),
                                  [](const ScoredClip& r) { return r.label == ClipLabel::movement; });
  const bool has_bg = std::any_of(train_results.begin(), train_results.end(),
                                  [](const ScoredClip& r) { return r.label == ClipLabel::background; });
  if (!has_mv || !has_bg) fail(Errc::single_class, "calibration needs both movement and background clips");

  std::vector<double> scores;
  for (const auto& r : train_results) scores.push_back(r.score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  if (scores.size() < 2) fail(Errc::validation, "all scores are identical; no threshold separates them");

  // Sweep the cut upward; movement predictions above the cut shrink one
  // distinct score at a time.
  std::vector<ScoredClip> sorted(train_results.begin(), train_results.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoredClip& a, const ScoredClip& b) { return a.score < b.score; });
  std::size_t correct = static_cast<std::size_t>(
      std::count_if(sorted.begin(), sorted.end(), [](const ScoredClip& r) { return r.label == ClipLabel::movement; }));
  Calibration best{0, -1};
  std::size_t k = 0;
  for (std::size_t u = 0; u + 1 < scores.size(); ++u) {
    while (k < sorted.size() && sorted[k].score <= scores[u]) {
      correct += sorted[k].label == ClipLabel::background ? 1 : 0;
      correct -= sorted[k].label == ClipLabel::movement ? 1 : 0;
      ++k;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(sorted.size());
    if (acc > best.train_accuracy) best = {0.5 * (scores[u] + scores[u + 1]), acc};
  }
  return best;
}

WindowClassifier movdet_window_classifier(const FrameSequence& video, const RegionTrack& roi,
                                          const MovDetConfig& config) {
  return [&video, &roi, config](const FrameWindow& w) {
    const auto begin = static_cast<std::size_t>(w.begin);
    const auto end = static_cast<std::size_t>(w.end);
    if (end - begin < static_cast<std::size_t>(config.sample_stride) + 1)
      fail(Errc::no_observable_region, "window too short for one frame pair");
    const MovDetResult r = movdet_classify(video.slice(begin, end), roi.slice(begin, end), config);
    return WindowVerdict{r.score, r.label == ClipLabel::movement ? WindowLabel::movement : WindowLabel::background};
  };
}

DetectionTimeline movdet_timeline(const FrameSequence& video, const RegionTrack& roi, const MovDetConfig& config,
                                  double window_s, std::optional<double> stride_s) {
  require(window_s > 0, "window length must be positive");
  require(!stride_s || *stride_s > 0, "window stride must be positive");
  validate(config);
  validate(video);
  validate(roi, video);
  const auto window = std::max<std::int64_t>(1, std::llround(window_s * video.fps));
  const auto stride = stride_s ? std::max<std::int64_t>(1, std::llround(*stride_s * video.fps)) : window;
  return sliding_window_infer(static_cast<std::int64_t>(video.size()), movdet_window_classifier(video, roi, config),
                              window, stride);
}

}  // namespace earmotion
