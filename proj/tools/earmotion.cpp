// earmotion command line: dataset preparation, movDet, LSTM training,
// evaluation, full-video inference and synthetic fixtures.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>

#include "earmotion/classifier.hpp"
#include "earmotion/dataset.hpp"
#include "earmotion/eval.hpp"
#include "earmotion/features.hpp"
#include "earmotion/flat_toml.hpp"
#include "earmotion/frames.hpp"
#include "earmotion/movdet.hpp"
#include "earmotion/rng.hpp"
#include "earmotion/synth.hpp"

namespace fs = std::filesystem;
using namespace earmotion;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(Errc::io, "write failed for " + path.string());
}

// durations.csv (video_id,duration_s) wins; otherwise every <id>.frames header.
std::map<std::string, double> video_durations(const fs::path& dir) {
  std::map<std::string, double> out;
  const fs::path table = dir / "durations.csv";
  if (fs::exists(table)) {
    std::ifstream in(table);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (n == 1 || line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) fail(Errc::parse, table.string() + ":" + std::to_string(n) + ": expected 2 fields");
      try {
        out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
      } catch (const std::exception&) {
        fail(Errc::parse, table.string() + ":" + std::to_string(n) + ": bad duration");
      }
    }
    return out;
  }
  if (!fs::is_directory(dir)) fail(Errc::io, "no such video directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".frames") continue;
    const FramesHeader h = read_frames_header(e.path());
    out[e.path().stem().string()] = h.count / h.fps;
  }
  return out;
}

LstmConfig lstm_config(const FlatToml& t, std::uint64_t seed) {
  LstmConfig c;
  c.num_layers = static_cast<int>(t.integer("lstm.num_layers", c.num_layers));
  c.hidden_size = static_cast<int>(t.integer("lstm.hidden_size", c.hidden_size));
  c.dropout = t.number("lstm.dropout", c.dropout);
  c.learning_rate = t.number("lstm.learning_rate", c.learning_rate);
  c.max_epochs = static_cast<int>(t.integer("lstm.max_epochs", c.max_epochs));
  c.patience = static_cast<int>(t.integer("lstm.patience", c.patience));
  c.batch_size = static_cast<int>(t.integer("lstm.batch_size", c.batch_size));
  c.seed = seed;
  return c;
}

FlowParams flow_params(const FlatToml& t) {
  FlowParams p;
  p.pyramid_levels = static_cast<int>(t.integer("flow.pyramid_levels", p.pyramid_levels));
  p.pyramid_scale = t.number("flow.pyramid_scale", p.pyramid_scale);
  p.expansion_window = static_cast<int>(t.integer("flow.expansion_window", p.expansion_window));
  p.iterations_per_level = static_cast<int>(t.integer("flow.iterations_per_level", p.iterations_per_level));
  p.poly_sigma = t.number("flow.poly_sigma", p.poly_sigma);
  p.regularization_eps = t.number("flow.regularization_eps", p.regularization_eps);
  p.averaging_window = static_cast<int>(t.integer("flow.averaging_window", p.averaging_window));
  return p;
}

struct FeatureSet {
  std::vector<LabeledSequence> items;
  std::optional<FeatureSequence> first;  // metadata source for reports
};

FeatureSet load_split(const fs::path& dir, const ClipManifest& manifest, Split split) {
  FeatureSet set;
  for (const auto& e : manifest.split(split)) {
    const std::string id = e.clip_id();
    FeatureSequence f = read_features(dir / (id + ".efseq"));
    if (set.first && (f.stream != set.first->stream || f.dim() != set.first->dim()))
      fail(Errc::validation, id + ": feature stream differs from the rest of the split");
    LabeledSequence s{f.data, e.label, id};
    if (!set.first) {
      f.data.resize(0, f.dim());
      set.first = std::move(f);
    }
    set.items.push_back(std::move(s));
  }
  if (set.items.empty()) fail(Errc::validation, std::string("manifest has no ") + std::string(to_string(split)) + " clips");
  return set;
}

std::map<std::string, std::string> feature_metadata(const FeatureSequence& f) {
  char fps[32];
  std::snprintf(fps, sizeof fps, "%g", f.fps);
  return {{"stream", std::string(to_string(f.stream))},
          {"fps", fps},
          {"window", std::to_string(f.window)},
          {"step", std::to_string(f.step)},
          {"sample_rate", std::to_string(f.sample_rate)}};
}

std::string movdet_json(const MovDetResult& r, double threshold) {
  nlohmann::ordered_json j;
  j["label"] = to_string(r.label);
  j["score"] = r.score;
  j["threshold"] = threshold;
  j["per_pair_scores"] = r.per_pair_scores;
  j["pair_starts"] = r.pair_starts;
  return j.dump(2);
}

SynthSpec synth_spec(const FlatToml& t) {
  SynthSpec s;
  s.height = static_cast<int>(t.integer("clip.height", s.height));
  s.width = static_cast<int>(t.integer("clip.width", s.width));
  s.num_frames = static_cast<int>(t.integer("clip.num_frames", s.num_frames));
  s.fps = t.number("clip.fps", s.fps);
  const auto patch = t.numbers("clip.patch", {double(s.patch.x), double(s.patch.y), double(s.patch.w), double(s.patch.h)});
  require(patch.size() == 4, "clip.patch must be [x, y, w, h]");
  s.patch = {int(patch[0]), int(patch[1]), int(patch[2]), int(patch[3])};
  const auto vel = t.numbers("clip.velocity", {0, 0});
  require(vel.size() == 2, "clip.velocity must be [vx, vy]");
  require(vel[0] == std::round(vel[0]) && vel[1] == std::round(vel[1]), "clip.velocity must be integer px/frame");
  s.vx = int(vel[0]);
  s.vy = int(vel[1]);
  const std::string texture = t.string("clip.texture", "noise");
  require(texture == "noise" || texture == "checker", "clip.texture must be noise or checker");
  s.texture = texture == "noise" ? TextureKind::noise : TextureKind::checker;
  s.texture_seed = t.unsigned_integer("clip.texture_seed", s.texture_seed);
  s.checker_period = static_cast<int>(t.integer("clip.checker_period", s.checker_period));
  const std::string bg = t.string("clip.background", "uniform");
  require(bg == "uniform" || bg == "static-noise", "clip.background must be uniform or static-noise");
  s.background = bg == "uniform" ? BackgroundKind::uniform : BackgroundKind::static_noise;
  s.background_seed = t.unsigned_integer("clip.background_seed", s.background_seed);
  const auto value = t.integer("clip.background_value", s.background_value);
  require(value >= 0 && value <= 255, "clip.background_value must be 0..255");
  s.background_value = static_cast<std::uint8_t>(value);
  const auto motion = t.numbers("clip.motion", {double(s.motion_begin), double(s.motion_end)});
  require(motion.size() == 2, "clip.motion must be [begin, end]");
  s.motion_begin = int(motion[0]);
  s.motion_end = int(motion[1]);
  s.roi_margin = static_cast<int>(t.integer("clip.roi_margin", s.roi_margin));
  const std::string policy = t.string("clip.roi_policy", "follow");
  require(policy == "follow" || policy == "common", "clip.roi_policy must be follow or common");
  s.roi_policy = policy == "follow" ? RoiPolicy::follow : RoiPolicy::common;
  return s;
}

FeatureDatasetSpec feature_spec(const FlatToml& t) {
  FeatureDatasetSpec s;
  s.n_per_class = static_cast<int>(t.integer("features.n_per_class", s.n_per_class));
  s.min_length = static_cast<int>(t.integer("features.min_length", s.min_length));
  s.max_length = static_cast<int>(t.integer("features.max_length", s.max_length));
  s.dim = static_cast<int>(t.integer("features.dim", s.dim));
  s.mean_shift = t.number("features.mean_shift", s.mean_shift);
  s.noise_sigma = t.number("features.noise_sigma", s.noise_sigma);
  s.seed = t.unsigned_integer("features.seed", s.seed);
  return s;
}

// Feature files for the clips of an existing manifest, labels taken from it.
void synth_for_manifest(const FeatureDatasetSpec& spec, double fps, const ClipManifest& manifest, const fs::path& out) {
  Rng lengths(derive_seed(spec.seed, "lengths"));
  for (const auto& e : manifest.entries) {
    const int length = static_cast<int>(lengths.range(spec.min_length, spec.max_length));
    LabeledSequence s = generate_feature_sequence(e.label, length, spec.dim, spec.mean_shift, spec.noise_sigma,
                                                  derive_seed(spec.seed, e.clip_id()));
    s.clip_id = e.clip_id();
    write_features(to_feature_sequence(s, fps), out / (s.clip_id + ".efseq"));
  }
}

// Standalone set: one fake 1 s clip per sequence on a "synth" video, split
// per class in order by the given fractions.
ClipManifest synth_manifest(const std::vector<LabeledSequence>& seqs, const SplitFractions& f, std::uint64_t seed) {
  ClipManifest m;
  m.seed = seed;
  m.source = "synth";
  std::map<ClipLabel, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < seqs.size(); ++i) by_class[seqs[i].label].push_back(i);
  m.entries.resize(seqs.size());
  for (auto& [label, idx] : by_class) {
    const auto n = idx.size();
    const auto n_train = static_cast<std::size_t>(std::llround(n * f.train));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(n * f.val)));
    for (std::size_t k = 0; k < n; ++k) {
      ClipEntry& e = m.entries[idx[k]];
      e.video_id = "synth";
      e.start_ms = static_cast<Millis>(idx[k]) * 2000;
      e.end_ms = e.start_ms + 1000;
      e.label = label;
      if (label == ClipLabel::movement) e.au_code = "EAD101";
      e.split = k < n_train ? Split::train : k < n_train + n_val ? Split::val : Split::test;
    }
  }
  return m;
}

SplitFractions parse_fractions(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      fail(Errc::parse, "bad split fraction '" + part + "'");
    }
  }
  require(v.size() == 3, "--split expects train,val,test");
  return {v[0], v[1], v[2]};
}

std::string grid_csv(const GridResult& result, const std::map<std::string, std::string>& meta) {
  std::string out = "method,fps,layers,hidden,lr,sample_rate,window,step,accuracy,f1\n";
  for (const auto& r : result.rows) {
    out += meta.at("stream") + "+lstm," + meta.at("fps") + "," + std::to_string(r.config.num_layers) + "," +
           std::to_string(r.config.hidden_size) + "," + format_metric(r.config.learning_rate) + "," +
           meta.at("sample_rate") + "," + meta.at("window") + "," + meta.at("step") + "," +
           format_metric(r.val_accuracy) + "," + format_metric(r.val_f1) + "\n";
  }
  return out;
}

std::vector<FrameWindow> annotation_windows(const fs::path& csv, const std::string& video_id, double fps) {
  std::vector<FrameWindow> out;
  const auto ear = filter_ear_records(parse_annotations(csv));
  for (const auto& r : ear) {
    if (r.video_id != video_id) continue;
    out.push_back({std::llround(r.start_s * fps), std::llround(r.end_s * fps)});
  }
  return out;
}

TimelineFormat format_for(const fs::path& path) {
  return path.extension() == ".json" ? TimelineFormat::json : TimelineFormat::csv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equine ear-movement detection toolkit"};
  app.require_subcommand(1);

  // preprocess
  std::string annotations, videos, manifest_out, split_text = "0.7,0.15,0.15";
  std::uint64_t seed = 0;
  bool subject_wise = false;
  std::vector<std::string> prefixes{"EAD"};
  auto* pre = app.add_subcommand("preprocess", "Build a balanced clip manifest from annotations");
  pre->add_option("--annotations", annotations, "Annotation CSV (video_id,au_code,start_s,end_s)")->required();
  pre->add_option("--videos", videos, "Directory with durations.csv or <video_id>.frames files")->required();
  pre->add_option("--seed", seed, "Sampling and split seed")->required();
  pre->add_option("--out", manifest_out, "Manifest JSON")->required();
  pre->add_option("--split", split_text, "train,val,test fractions")->capture_default_str();
  pre->add_flag("--subject-wise", subject_wise, "Keep each video inside one split");
  pre->add_option("--ear-prefix", prefixes, "AU code prefixes counted as ear movement")->capture_default_str();

  // movdet
  std::string clip_path, roi_path, config_path, timeline_out;
  double threshold = 1.0, fps_dirs = 25.0, window_s = 2.0;
  std::optional<double> stride_s;
  int stride = 1;
  bool as_json = false;
  auto* mov = app.add_subcommand("movdet", "Optical-flow magnitude baseline on one clip or a full video");
  mov->add_option("--clip", clip_path, ".frames file or image directory")->required();
  mov->add_option("--roi", roi_path, "Region track CSV (frame_idx,x,y,w,h); full frame when omitted");
  mov->add_option("--threshold", threshold, "Movement threshold, px/frame")->capture_default_str();
  mov->add_option("--stride", stride, "Frames between the two frames of a pair")->capture_default_str();
  mov->add_flag("--json", as_json, "Print the result as JSON");
  mov->add_option("--fps", fps_dirs, "Frame rate of image directories")->capture_default_str();
  mov->add_option("--config", config_path, "TOML with [flow] parameters");
  mov->add_option("--timeline", timeline_out, "Classify windows over the clip and write a timeline (.csv/.json)");
  mov->add_option("--window-s", window_s, "Timeline window, seconds")->capture_default_str();
  mov->add_option("--stride-s", stride_s, "Timeline stride, seconds (default: the window)");

  // features
  auto* feat = app.add_subcommand("features", "Feature file utilities");
  feat->require_subcommand(1);
  std::string inspect_path, rgb_path, flow_path, fused_out;
  auto* inspect = feat->add_subcommand("inspect", "Print header metadata as JSON");
  inspect->add_option("file", inspect_path)->required();
  auto* fuse = feat->add_subcommand("fuse", "Average an RGB and a flow sequence into an i3d-mixed one");
  fuse->add_option("--rgb", rgb_path)->required();
  fuse->add_option("--flow", flow_path)->required();
  fuse->add_option("--out", fused_out)->required();

  // train / grid / eval
  std::string features_dir, manifest_path, model_out, out_dir;
  auto* tr = app.add_subcommand("train", "Train one LSTM configuration");
  tr->add_option("--features", features_dir, "Directory of <clip_id>.efseq files")->required();
  tr->add_option("--manifest", manifest_path)->required();
  tr->add_option("--config", config_path, "TOML with an [lstm] table");
  tr->add_option("--seed", seed)->required();
  tr->add_option("--out", model_out)->required();

  auto* grid = app.add_subcommand("grid", "Grid search over the layer/hidden/lr lattice");
  grid->add_option("--features", features_dir)->required();
  grid->add_option("--manifest", manifest_path)->required();
  grid->add_option("--config", config_path, "TOML with [lstm] defaults and [grid] lattice");
  grid->add_option("--seed", seed)->required();
  grid->add_option("--out", out_dir, "Directory for grid_results.csv and best.eflm")->required();

  std::string model_path, report_path;
  auto* ev = app.add_subcommand("eval", "Score a model on the manifest's test split");
  ev->add_option("--model", model_path)->required();
  ev->add_option("--features", features_dir)->required();
  ev->add_option("--manifest", manifest_path)->required();
  ev->add_option("--report", report_path)->required();

  // infer
  std::string video_features, video_id;
  std::int64_t window = kDefaultInferWindow, win_stride = kDefaultInferStride;
  auto* inf = app.add_subcommand("infer", "Sliding-window inference over a full video");
  inf->add_option("--video-features", video_features)->required();
  inf->add_option("--model", model_path)->required();
  inf->add_option("--window", window)->capture_default_str();
  inf->add_option("--stride", win_stride)->capture_default_str();
  inf->add_option("--out", timeline_out, "Timeline .csv or .json")->required();
  inf->add_option("--annotations", annotations, "Ground-truth annotation CSV");
  inf->add_option("--video-id", video_id, "Video to take ground truth for (default: the feature clip_id)");

  // synth
  auto* syn = app.add_subcommand("synth", "Synthetic fixtures");
  syn->require_subcommand(1);
  std::string spec_path;
  auto* syn_clip = syn->add_subcommand("clip", "Moving-patch clip: clip.frames, roi.csv, clip.json");
  syn_clip->add_option("--spec", spec_path)->required();
  syn_clip->add_option("--out", out_dir)->required();
  auto* syn_feat = syn->add_subcommand("features", "Separable feature sequences as .efseq files");
  syn_feat->add_option("--spec", spec_path)->required();
  syn_feat->add_option("--out", out_dir)->required();
  syn_feat->add_option("--manifest", manifest_path, "Emit one file per clip of this manifest, with its labels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) {
      ManifestOptions opts;
      opts.ear_prefixes = prefixes;
      opts.fractions = parse_fractions(split_text);
      opts.subject_wise = subject_wise;
      opts.source = annotations;
      const ClipManifest m = build_manifest(parse_annotations(annotations), video_durations(videos), seed, opts);
      write_manifest(m, manifest_out);
      std::cout << "movement " << m.count(ClipLabel::movement) << ", background " << m.count(ClipLabel::background)
                << ", train/val/test " << m.count(Split::train) << "/" << m.count(Split::val) << "/"
                << m.count(Split::test) << "\n";
      if (m.shortfall) std::cerr << "warning: " << m.shortfall << " background clips could not be placed\n";
    } else if (*mov) {
      MovDetConfig cfg;
      cfg.threshold = threshold;
      cfg.sample_stride = stride;
      if (!config_path.empty()) cfg.flow = flow_params(FlatToml::load(config_path));
      const FrameSequence clip = load_clip(clip_path, fps_dirs);
      const RegionTrack roi = roi_path.empty() ? RegionTrack::full_frame(clip.size(), clip.rows(), clip.cols())
                                               : read_region_track(roi_path, clip.size());
      if (!timeline_out.empty()) {
        DetectionTimeline t = movdet_timeline(clip, roi, cfg, window_s, stride_s);
        t.video_id = fs::path(clip_path).stem().string();
        export_timeline(t, timeline_out, format_for(timeline_out));
      } else {
        const MovDetResult r = movdet_classify(clip, roi, cfg);
        if (as_json) std::cout << movdet_json(r, threshold) << "\n";
        else std::cout << to_string(r.label) << " " << r.score << "\n";
      }
    } else if (*feat) {
      if (*inspect) {
        std::cout << describe_features(read_features(inspect_path));
      } else {
        write_features(late_fusion(read_features(rgb_path), read_features(flow_path)), fused_out);
      }
    } else if (*tr) {
      const FlatToml cfg = config_path.empty() ? FlatToml{} : FlatToml::load(config_path);
      const ClipManifest m = read_manifest(manifest_path);
      const FeatureSet train_set = load_split(features_dir, m, Split::train);
      const FeatureSet val_set = load_split(features_dir, m, Split::val);
      LstmConfig c = lstm_config(cfg, seed);
      c.input_dim = static_cast<int>(train_set.first->dim());
      TrainedModel model = train(train_set.items, val_set.items, c);
      model.metadata = feature_metadata(*train_set.first);
      save_model(model, model_out);
      std::cout << "best epoch " << model.best_epoch << " of " << model.history.size() << ", val accuracy "
                << format_metric(model.history[model.best_epoch - 1].val_accuracy) << "\n";
    } else if (*grid) {
      const FlatToml cfg = config_path.empty() ? FlatToml{} : FlatToml::load(config_path);
      const ClipManifest m = read_manifest(manifest_path);
      const FeatureSet train_set = load_split(features_dir, m, Split::train);
      const FeatureSet val_set = load_split(features_dir, m, Split::val);
      LstmConfig base = lstm_config(cfg, seed);
      base.input_dim = static_cast<int>(train_set.first->dim());
      GridLattice lattice;
      std::vector<double> layers(lattice.layers.begin(), lattice.layers.end());
      std::vector<double> hidden(lattice.hidden.begin(), lattice.hidden.end());
      layers = cfg.numbers("grid.layers", layers);
      hidden = cfg.numbers("grid.hidden", hidden);
      lattice.layers.assign(layers.begin(), layers.end());
      lattice.hidden.assign(hidden.begin(), hidden.end());
      lattice.learning_rates = cfg.numbers("grid.learning_rates", lattice.learning_rates);
      GridResult result = grid_search(train_set.items, val_set.items, base, lattice);
      const auto meta = feature_metadata(*train_set.first);
      result.best.metadata = meta;
      fs::create_directories(out_dir);
      write_text(fs::path(out_dir) / "grid_results.csv", grid_csv(result, meta));
      save_model(result.best, fs::path(out_dir) / "best.eflm");
      const auto& b = result.rows[result.best_index].config;
      std::cout << "best: layers " << b.num_layers << ", hidden " << b.hidden_size << ", lr "
                << format_metric(b.learning_rate) << ", val accuracy "
                << format_metric(result.rows[result.best_index].val_accuracy) << "\n";
    } else if (*ev) {
      const TrainedModel model = load_model(model_path);
      const ClipManifest m = read_manifest(manifest_path);
      const FeatureSet test_set = load_split(features_dir, m, Split::test);
      const EvalReport report = evaluate_model(model, test_set.items);
      write_report(report, report_path);
      std::cout << "accuracy " << format_metric(report.scores.accuracy) << ", f1 " << format_metric(report.scores.f1)
                << "\n";
      if (report.scores.f1_degenerate) std::cerr << "warning: no positives predicted or present; F1 reported as 0\n";
    } else if (*inf) {
      const TrainedModel model = load_model(model_path);
      const FeatureSequence f = read_features(video_features);
      std::vector<FrameWindow> gt;
      const std::string vid = video_id.empty() ? f.clip_id : video_id;
      if (!annotations.empty()) gt = annotation_windows(annotations, vid, f.fps);
      DetectionTimeline t =
          sliding_window_infer(feature_frame_count(f), model_window_classifier(model, f), window, win_stride, gt);
      t.video_id = vid;
      export_timeline(t, timeline_out, format_for(timeline_out));
    } else if (*syn) {
      const FlatToml spec = FlatToml::load(spec_path);
      fs::create_directories(out_dir);
      const fs::path out(out_dir);
      if (*syn_clip) {
        const SynthClip c = generate_clip(synth_spec(spec));
        write_frames(c.frames, out / "clip.frames");
        write_region_track(c.roi, out / "roi.csv");
        nlohmann::ordered_json j;
        j["label"] = to_string(c.label);
        j["frames"] = c.frames.size();
        j["fps"] = c.frames.fps;
        write_text(out / "clip.json", j.dump(2) + "\n");
      } else {
        const FeatureDatasetSpec fs_spec = feature_spec(spec);
        const double fps = spec.number("features.fps", 25.0);
        if (!manifest_path.empty()) {
          synth_for_manifest(fs_spec, fps, read_manifest(manifest_path), out);
        } else {
          const auto seqs = generate_feature_dataset(fs_spec);
          ClipManifest m = synth_manifest(seqs, parse_fractions(spec.string("features.split", "0.7,0.15,0.15")),
                                          fs_spec.seed);
          for (std::size_t i = 0; i < seqs.size(); ++i) {
            LabeledSequence s = seqs[i];
            s.clip_id = m.entries[i].clip_id();
            write_features(to_feature_sequence(s, fps), out / (s.clip_id + ".efseq"));
          }
          write_manifest(m, out / "manifest.json");
        }
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3 + static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
