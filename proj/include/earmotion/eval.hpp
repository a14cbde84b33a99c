#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "earmotion/classifier.hpp"
#include "earmotion/metrics.hpp"
#include "earmotion/timeline.hpp"

namespace earmotion {

struct ClipPrediction {
  std::string clip_id;
  ClipLabel truth = ClipLabel::background;
  ClipLabel predicted = ClipLabel::background;
  double score = 0;
};

struct EvalReport {
  Confusion counts;
  Metrics scores;
  std::vector<ClipPrediction> predictions;
  std::map<std::string, std::string> method;
};

EvalReport make_report(std::vector<ClipPrediction> predictions, std::map<std::string, std::string> method);

/// Runs the model over every sequence and scores it against the labels.
EvalReport evaluate_model(const TrainedModel& model, const std::vector<LabeledSequence>& test_set);

/// Metrics printed with format_metric, plus counts and per-clip rows.
std::string report_to_json(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& path);

/// Frames spanned by a feature sequence: (T - 1) * step + window.
std::int64_t feature_frame_count(const FeatureSequence& features);

/// Classifies a frame window from the rows of `video_features` whose
/// extraction window is centred inside it; windows with no such row are
/// reported unobserved.
WindowClassifier model_window_classifier(const TrainedModel& model, const FeatureSequence& video_features);

}  // namespace earmotion
