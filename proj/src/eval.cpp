#include "earmotion/eval.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "earmotion/binary_io.hpp"

namespace earmotion {

// ---------------------------------------------------------------- metrics

Confusion confusion(std::span<const ClipLabel> predictions, std::span<const ClipLabel> truth) {
  require(predictions.size() == truth.size(), "prediction and truth lists differ in length");
  require(!predictions.empty(), "confusion of an empty prediction list");
  Confusion c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] == ClipLabel::movement;
    const bool t = truth[i] == ClipLabel::movement;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Metrics metrics(const Confusion& c) {
  if (c.total() == 0) fail(Errc::validation, "metrics of zero clips");
  Metrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  m.f1_degenerate = denom == 0;
  m.f1 = denom == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
  return m;
}

std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5f", value);
  std::string s(buf);
  while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

// ---------------------------------------------------------------- timeline

std::string_view to_string(WindowLabel label) noexcept {
  switch (label) {
    case WindowLabel::movement: return "movement";
    case WindowLabel::background: return "background";
    case WindowLabel::unobserved: return "unobserved";
  }
  return "unobserved";
}

WindowLabel parse_window_label(std::string_view text) {
  for (WindowLabel l : {WindowLabel::background, WindowLabel::movement, WindowLabel::unobserved})
    if (to_string(l) == text) return l;
  fail(Errc::parse, "unknown window label '" + std::string(text) + "'");
}

bool operator==(const TimelineEntry& a, const TimelineEntry& b) {
  const bool same_score = (std::isnan(a.score) && std::isnan(b.score)) || a.score == b.score;
  return a.start_frame == b.start_frame && a.end_frame == b.end_frame && same_score && a.label == b.label &&
         a.gt_overlap == b.gt_overlap;
}

DetectionTimeline sliding_window_infer(std::int64_t num_frames, const WindowClassifier& classify, std::int64_t window,
                                       std::int64_t stride, std::span<const FrameWindow> ground_truth) {
  require(window > 0 && stride > 0, "window and stride must be positive");
  const WindowPlan plan = window_plan(num_frames, window, stride);
  DetectionTimeline timeline;
  timeline.ground_truth.assign(ground_truth.begin(), ground_truth.end());
  for (const auto& w : plan.windows) {
    TimelineEntry e;
    e.start_frame = w.begin;
    e.end_frame = w.end;
    try {
      const WindowVerdict v = classify(w);
      e.score = v.score;
      e.label = v.label;
    } catch (const Error&) {
      e.score = std::numeric_limits<double>::quiet_NaN();
      e.label = WindowLabel::unobserved;
    }
    if (!ground_truth.empty()) {
      bool hit = false;
      for (const auto& g : ground_truth) hit = hit || (w.begin < g.end && g.begin < w.end);
      e.gt_overlap = hit;
    }
    timeline.entries.push_back(e);
  }
  return timeline;
}

namespace {

std::string format_score(double score) {
  if (std::isnan(score)) return "nan";
  char buf[40];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, score);
  return std::string(buf, ptr);
}

}  // namespace

std::string timeline_to_csv(const DetectionTimeline& timeline) {
  std::string out = "start_frame,end_frame,score,label,gt_overlap\n";
  for (const auto& e : timeline.entries) {
    out += std::to_string(e.start_frame) + "," + std::to_string(e.end_frame) + "," + format_score(e.score) + "," +
           std::string(to_string(e.label)) + "," + (e.gt_overlap ? (*e.gt_overlap ? "1" : "0") : "") + "\n";
  }
  return out;
}

DetectionTimeline timeline_from_csv(std::string_view text) {
  DetectionTimeline t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 || line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 5) fail(Errc::parse, "timeline line " + std::to_string(line_no) + ": expected 5 fields");
    TimelineEntry e;
    try {
      e.start_frame = std::stoll(f[0]);
      e.end_frame = std::stoll(f[1]);
      e.score = f[2] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[2]);
    } catch (const std::exception&) {
      fail(Errc::parse, "timeline line " + std::to_string(line_no) + ": bad number");
    }
    e.label = parse_window_label(f[3]);
    if (!f[4].empty()) e.gt_overlap = f[4] == "1";
    t.entries.push_back(e);
  }
  return t;
}

std::string timeline_to_json(const DetectionTimeline& timeline) {
  nlohmann::ordered_json j;
  j["video_id"] = timeline.video_id;
  auto& gt = j["ground_truth"] = nlohmann::ordered_json::array();
  for (const auto& g : timeline.ground_truth) gt.push_back({g.begin, g.end});
  auto& entries = j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : timeline.entries) {
    nlohmann::ordered_json row;
    row["start_frame"] = e.start_frame;
    row["end_frame"] = e.end_frame;
    row["score"] = std::isnan(e.score) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(e.score);
    row["label"] = to_string(e.label);
    row["gt_overlap"] = e.gt_overlap ? nlohmann::ordered_json(*e.gt_overlap) : nlohmann::ordered_json(nullptr);
    entries.push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

DetectionTimeline timeline_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    DetectionTimeline t;
    t.video_id = j.value("video_id", std::string());
    for (const auto& g : j.at("ground_truth")) t.ground_truth.push_back({g.at(0).get<std::int64_t>(), g.at(1).get<std::int64_t>()});
    for (const auto& row : j.at("entries")) {
      TimelineEntry e;
      e.start_frame = row.at("start_frame").get<std::int64_t>();
      e.end_frame = row.at("end_frame").get<std::int64_t>();
      e.score = row.at("score").is_null() ? std::numeric_limits<double>::quiet_NaN() : row.at("score").get<double>();
      e.label = parse_window_label(row.at("label").get<std::string>());
      if (!row.at("gt_overlap").is_null()) e.gt_overlap = row.at("gt_overlap").get<bool>();
      t.entries.push_back(e);
    }
    return t;
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::parse, std::string("timeline: ") + ex.what());
  }
}

void export_timeline(const DetectionTimeline& timeline, const std::filesystem::path& path, TimelineFormat format) {
  detail::write_file_atomic(path, format == TimelineFormat::csv ? timeline_to_csv(timeline) : timeline_to_json(timeline));
}

DetectionTimeline import_timeline(const std::filesystem::path& path, TimelineFormat format) {
  const std::string text = detail::read_file(path);
  return format == TimelineFormat::csv ? timeline_from_csv(text) : timeline_from_json(text);
}

// ---------------------------------------------------------------- reports

EvalReport make_report(std::vector<ClipPrediction> predictions, std::map<std::string, std::string> method) {
  std::vector<ClipLabel> preds, truth;
  for (const auto& p : predictions) {
    preds.push_back(p.predicted);
    truth.push_back(p.truth);
  }
  EvalReport r;
  r.counts = confusion(preds, truth);
  r.scores = metrics(r.counts);
  r.predictions = std::move(predictions);
  r.method = std::move(method);
  return r;
}

EvalReport evaluate_model(const TrainedModel& model, const std::vector<LabeledSequence>& test_set) {
  std::vector<ClipPrediction> preds;
  for (const auto& s : test_set) {
    const Prediction p = predict(model, s.features);
    preds.push_back({s.clip_id, s.label, p.label, p.probability});
  }
  auto method = model.metadata;
  method["layers"] = std::to_string(model.config.num_layers);
  method["hidden"] = std::to_string(model.config.hidden_size);
  method["lr"] = format_metric(model.config.learning_rate);
  return make_report(std::move(preds), std::move(method));
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["tp"] = r.counts.tp;
  j["fp"] = r.counts.fp;
  j["fn"] = r.counts.fn;
  j["tn"] = r.counts.tn;
  j["accuracy"] = format_metric(r.scores.accuracy);
  j["f1"] = format_metric(r.scores.f1);
  if (r.scores.f1_degenerate) j["warning"] = "no positives predicted or present; F1 reported as 0";
  auto& rows = j["predictions"] = nlohmann::ordered_json::array();
  for (const auto& p : r.predictions) {
    rows.push_back({{"clip_id", p.clip_id},
                    {"truth", to_string(p.truth)},
                    {"predicted", to_string(p.predicted)},
                    {"score", p.score}});
  }
  return j.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  detail::write_file_atomic(path, report_to_json(report));
}

std::int64_t feature_frame_count(const FeatureSequence& f) {
  require(f.length() >= 1, "empty feature sequence");
  return (f.length() - 1) * static_cast<std::int64_t>(f.step) + f.window;
}

WindowClassifier model_window_classifier(const TrainedModel& model, const FeatureSequence& video_features) {
  if (video_features.dim() != model.config.input_dim)
    fail(Errc::dimension_mismatch, "video features are " + std::to_string(video_features.dim()) +
                                       "-d, model expects " + std::to_string(model.config.input_dim));
  return [&model, &video_features](const FrameWindow& w) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index k = 0; k < video_features.length(); ++k) {
      // Twice the centre keeps the comparison in integers.
      const std::int64_t centre2 = 2 * k * static_cast<std::int64_t>(video_features.step) + video_features.window;
      if (centre2 >= 2 * w.begin && centre2 < 2 * w.end) rows.push_back(k);
    }
    if (rows.empty()) fail(Errc::no_observable_region, "no feature window centred in frame window");
    FeatureMatrix sub(static_cast<Eigen::Index>(rows.size()), video_features.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = video_features.data.row(rows[i]);
    const Prediction p = predict(model, sub);
    return WindowVerdict{p.probability, p.label == ClipLabel::movement ? WindowLabel::movement : WindowLabel::background};
  };
}

}  // namespace earmotion
