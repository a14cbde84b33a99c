#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "earmotion/eval.hpp"
#include "earmotion/rng.hpp"
#include "earmotion/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace earmotion;

namespace {

constexpr auto M = ClipLabel::movement;
constexpr auto B = ClipLabel::background;

std::vector<ClipLabel> repeat(ClipLabel l, int n) { return std::vector<ClipLabel>(static_cast<std::size_t>(n), l); }

std::vector<ClipLabel> concat(std::initializer_list<std::vector<ClipLabel>> parts) {
  std::vector<ClipLabel> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

WindowClassifier constant(double p) {
  return [p](const FrameWindow&) {
    return WindowVerdict{p, p > 0.5 ? WindowLabel::movement : WindowLabel::background};
  };
}

}  // namespace

TEST(Metrics, ConfusionCounts) {
  const std::vector<ClipLabel> pred{M, M, B, B, M};
  const std::vector<ClipLabel> truth{M, B, M, B, M};
  EXPECT_EQ(confusion(pred, truth), (Confusion{2, 1, 1, 1}));
  EXPECT_ERRC(confusion(std::vector<ClipLabel>{M}, std::vector<ClipLabel>{}), Errc::validation);
}

TEST(Metrics, HandCases) {
  // tp 10, fp 1, fn 2, tn 3
  const auto pred = concat({repeat(M, 10), repeat(M, 1), repeat(B, 2), repeat(B, 3)});
  const auto truth = concat({repeat(M, 10), repeat(B, 1), repeat(M, 2), repeat(B, 3)});
  const Metrics m = metrics(confusion(pred, truth));
  EXPECT_EQ(format_metric(m.accuracy), "0.8125");
  EXPECT_EQ(format_metric(m.f1), "0.86957");
  EXPECT_EQ(format_metric(metrics({1, 1, 0, 1}).accuracy), "0.66667");
  EXPECT_EQ(format_metric(0.75), "0.75");
  EXPECT_EQ(format_metric(1.0), "1.0");
  EXPECT_EQ(format_metric(0.0), "0.0");
}

TEST(Metrics, DegenerateF1) {
  const Metrics m = metrics({0, 0, 0, 5});
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_TRUE(m.f1_degenerate);
  EXPECT_FALSE(metrics({0, 1, 0, 5}).f1_degenerate);
  EXPECT_ERRC(metrics({}), Errc::validation);
}

TEST(Metrics, AgreeWithBruteForce) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<ClipLabel> pred, truth;
    std::vector<bool> bp, bt;
    for (std::size_t i = 0; i < n; ++i) {
      bp.push_back(rng.bernoulli(0.5));
      bt.push_back(rng.bernoulli(0.5));
      pred.push_back(bp.back() ? M : B);
      truth.push_back(bt.back() ? M : B);
    }
    const Metrics m = metrics(confusion(pred, truth));
    const auto o = oracle::brute_force_scores(bp, bt);
    ASSERT_EQ(m.accuracy, o.accuracy);
    ASSERT_EQ(m.f1, o.f1);
  }
}

TEST(Metrics, PermutationInvariant) {
  Rng rng(6);
  std::vector<std::pair<ClipLabel, ClipLabel>> pairs;
  for (int i = 0; i < 30; ++i) pairs.emplace_back(rng.bernoulli(0.4) ? M : B, rng.bernoulli(0.6) ? M : B);
  auto split = [](const auto& ps) {
    std::vector<ClipLabel> a, b;
    for (const auto& [p, t] : ps) a.push_back(p), b.push_back(t);
    return confusion(a, b);
  };
  const Confusion base = split(pairs);
  for (int k = 0; k < 10; ++k) {
    rng.shuffle(pairs);
    EXPECT_EQ(split(pairs), base);
  }
}

TEST(SlidingWindow, InferenceDefaultsTileTheVideo) {
  const auto t = sliding_window_infer(120, constant(0.9));
  ASSERT_EQ(t.entries.size(), 3u);
  EXPECT_EQ(t.entries[1].start_frame, 35);
  EXPECT_EQ(t.entries[1].end_frame, 85);
  for (const auto& e : t.entries) {
    EXPECT_EQ(e.label, WindowLabel::movement);
    EXPECT_FALSE(e.gt_overlap.has_value());
  }
}

TEST(SlidingWindow, FailingWindowsAreUnobserved) {
  const WindowClassifier flaky = [](const FrameWindow& w) -> WindowVerdict {
    if (w.begin == 35) fail(Errc::no_observable_region, "hidden");
    return {0.1, WindowLabel::background};
  };
  const auto t = sliding_window_infer(120, flaky);
  EXPECT_EQ(t.entries[0].label, WindowLabel::background);
  EXPECT_EQ(t.entries[1].label, WindowLabel::unobserved);
  EXPECT_TRUE(std::isnan(t.entries[1].score));
}

TEST(SlidingWindow, GroundTruthOverlap) {
  const std::vector<FrameWindow> gt{{84, 90}};
  const auto t = sliding_window_infer(120, constant(0.1), 50, 35, gt);
  ASSERT_EQ(t.entries.size(), 3u);
  EXPECT_EQ(t.entries[0].gt_overlap, false);
  EXPECT_EQ(t.entries[1].gt_overlap, true);
  EXPECT_EQ(t.entries[2].gt_overlap, true);
  const std::vector<FrameWindow> touching{{85, 86}};
  EXPECT_EQ(sliding_window_infer(120, constant(0.1), 50, 35, touching).entries[1].gt_overlap, false);
}

TEST(Timeline, CsvAndJsonRoundTrip) {
  testing_support::TempDir dir;
  const std::vector<FrameWindow> gt{{10, 40}};
  const WindowClassifier mixed = [](const FrameWindow& w) -> WindowVerdict {
    if (w.begin == 70) fail(Errc::no_observable_region, "hidden");
    return {w.begin / 100.0 + 0.123456789, w.begin ? WindowLabel::movement : WindowLabel::background};
  };
  auto t = sliding_window_infer(120, mixed, 50, 35, gt);
  export_timeline(t, dir / "t.csv", TimelineFormat::csv);
  const auto from_csv = import_timeline(dir / "t.csv", TimelineFormat::csv);
  EXPECT_EQ(from_csv.entries, t.entries);
  t.video_id = "S1_video";
  export_timeline(t, dir / "t.json", TimelineFormat::json);
  EXPECT_EQ(import_timeline(dir / "t.json", TimelineFormat::json), t);
  const std::string csv = testing_support::slurp(dir / "t.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find(",nan,unobserved,0\n"), std::string::npos);
}

TEST(Timeline, EmptyTimelineIsHeaderOnly) {
  EXPECT_EQ(timeline_to_csv({}), "start_frame,end_frame,score,label,gt_overlap\n");
  EXPECT_ERRC(timeline_from_csv("h\n1,2,x,movement,\n"), Errc::parse);
  EXPECT_ERRC(timeline_from_csv("h\n1,2,0.5,maybe,\n"), Errc::parse);
  EXPECT_ERRC(timeline_from_json("{"), Errc::parse);
}

TEST(ModelWindows, UseFeatureRowsCentredInWindow) {
  // feature 0 of each row carries the class; 10 rows of 16-frame windows = 160 frames
  FeatureSequence video;
  video.stream = Stream::i3d_rgb;
  video.data = FeatureMatrix::Zero(10, 4);
  for (int k = 0; k < 10; ++k) video.data(k, 0) = k >= 5 ? 1.0f : -1.0f;
  TrainedModel model;
  model.config.input_dim = 4;
  model.config.num_layers = 1;
  model.config.hidden_size = 1;
  model.params = nn::LstmParams<float>::zeros(model.config.shape());
  // h saturates toward the sign of the last row's feature 0
  model.params.layers[0].w_in(2, 0) = 20.0f;   // cell candidate
  model.params.layers[0].bias(0) = 20.0f;      // input gate open
  model.params.layers[0].bias(3) = 20.0f;      // output gate open
  model.params.fc_weight(0) = 20.0f;
  const auto t = sliding_window_infer(feature_frame_count(video), model_window_classifier(model, video), 32, 32);
  ASSERT_EQ(t.entries.size(), 5u);
  EXPECT_EQ(feature_frame_count(video), 160);
  for (std::size_t k = 0; k < 5; ++k)
    EXPECT_EQ(t.entries[k].label, k >= 2 ? WindowLabel::movement : WindowLabel::background) << k;
  // a 4-frame window holds no centre of a 16-frame extraction window
  EXPECT_EQ(sliding_window_infer(20, model_window_classifier(model, video), 4, 16).entries[0].label,
            WindowLabel::unobserved);
  TrainedModel wide = model;
  wide.config.input_dim = 8;
  EXPECT_ERRC(model_window_classifier(wide, video), Errc::dimension_mismatch);
}

TEST(Report, JsonCarriesCountsAndFormattedMetrics) {
  std::vector<ClipPrediction> preds{{"a", M, M, 0.9}, {"b", B, M, 0.6}, {"c", B, B, 0.1}};
  const auto r = make_report(preds, {{"stream", "i3d-rgb"}});
  const auto j = nlohmann::json::parse(report_to_json(r));
  EXPECT_EQ(j["tp"], 1);
  EXPECT_EQ(j["fp"], 1);
  EXPECT_EQ(j["tn"], 1);
  EXPECT_EQ(j["accuracy"], "0.66667");
  EXPECT_EQ(j["f1"], "0.66667");
  EXPECT_EQ(j["method"]["stream"], "i3d-rgb");
  EXPECT_EQ(j["predictions"].size(), 3u);
  EXPECT_FALSE(j.contains("warning"));
  const auto degenerate = nlohmann::json::parse(report_to_json(make_report({{"c", B, B, 0.1}}, {})));
  EXPECT_TRUE(degenerate.contains("warning"));
}

TEST(Report, EvaluateModelScoresEverySequence) {
  TrainedModel model;
  model.config.input_dim = 768;
  model.config.num_layers = 1;
  model.config.hidden_size = 2;
  model.params = nn::LstmParams<float>::zeros(model.config.shape());
  const auto set = generate_feature_dataset({3, 2, 4, 768, 1.0, 0.3, 1});
  const auto r = evaluate_model(model, set);
  EXPECT_EQ(r.predictions.size(), 6u);
  EXPECT_EQ(r.counts, (Confusion{0, 0, 3, 3}));
  EXPECT_EQ(r.method.at("layers"), "1");
}
