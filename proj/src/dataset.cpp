#include "earmotion/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <regex>

#include "earmotion/binary_io.hpp"
#include "earmotion/error.hpp"
#include "earmotion/rng.hpp"

namespace earmotion {

std::string_view to_string(ClipLabel label) noexcept {
  return label == ClipLabel::movement ? "movement" : "background";
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

ClipLabel parse_clip_label(std::string_view text) {
  if (text == "movement") return ClipLabel::movement;
  if (text == "background") return ClipLabel::background;
  fail(Errc::parse, "unknown clip label '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  fail(Errc::parse, "unknown split '" + std::string(text) + "'");
}

// ------------------------------------------------------------- annotations

namespace {

std::string trimmed(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

double parse_seconds(const std::string& field, std::size_t line_no) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v))
    fail(Errc::parse, "line " + std::to_string(line_no) + ": bad time value '" + field + "'");
  return v;
}

}  // namespace

std::vector<AnnotationRecord> parse_annotations(std::istream& in) {
  static const std::regex code_shape("[A-Z]+[0-9]+");
  std::vector<AnnotationRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trimmed(line).empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      fields.push_back(trimmed(std::string_view(line).substr(start, comma == std::string::npos ? comma : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    const std::string where = "line " + std::to_string(line_no);
    if (fields.size() != 4) fail(Errc::parse, where + ": expected 4 fields, got " + std::to_string(fields.size()));
    if (fields[0].empty()) fail(Errc::parse, where + ": empty video id");
    if (!std::regex_match(fields[1], code_shape)) fail(Errc::parse, where + ": malformed code '" + fields[1] + "'");
    AnnotationRecord rec{fields[0], fields[1], parse_seconds(fields[2], line_no), parse_seconds(fields[3], line_no)};
    if (rec.start_s < 0) fail(Errc::validation, where + ": negative start time");
    if (rec.end_s <= rec.start_s) fail(Errc::validation, where + ": end time not after start time");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<AnnotationRecord> parse_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  return parse_annotations(in);
}

std::vector<AnnotationRecord> filter_ear_records(std::span<const AnnotationRecord> records,
                                                 const std::vector<std::string>& ear_prefixes) {
  std::vector<AnnotationRecord> out;
  for (const auto& r : records) {
    const bool ear = std::any_of(ear_prefixes.begin(), ear_prefixes.end(),
                                 [&](const std::string& p) { return r.au_code.starts_with(p); });
    if (ear) out.push_back(r);
  }
  return out;
}

// ------------------------------------------------------------- clips

Millis to_millis(double seconds) { return static_cast<Millis>(std::llround(seconds * 1000.0)); }

std::string ClipEntry::clip_id() const {
  return video_id + "_" + std::to_string(start_ms) + "_" + std::to_string(end_ms);
}

FrameRange ClipEntry::frames(double fps) const {
  require(fps > 0, "fps must be positive");
  return {static_cast<std::int64_t>(std::llround(start_s() * fps)),
          static_cast<std::int64_t>(std::llround(end_s() * fps))};
}

namespace {

struct Interval {
  Millis begin;
  Millis end;
};

bool overlaps(const Interval& a, const Interval& b) { return a.begin < b.end && b.begin < a.end; }

class BackgroundSampler {
 public:
  BackgroundSampler(std::string video_id, Millis duration_ms, std::vector<Interval> occupied, std::uint64_t seed)
      : video_id_(std::move(video_id)), duration_ms_(duration_ms), occupied_(std::move(occupied)), rng_(seed) {}

  std::optional<ClipEntry> draw() {
    if (exhausted_) return std::nullopt;
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const Millis len = rng_.range(kMinClipMs, kMaxClipMs);
      if (len > duration_ms_) continue;
      const Millis start = rng_.range(0, duration_ms_ - len);
      const Interval candidate{start, start + len};
      const bool clash = std::any_of(occupied_.begin(), occupied_.end(),
                                     [&](const Interval& o) { return overlaps(candidate, o); });
      if (clash) continue;
      occupied_.push_back(candidate);
      ClipEntry e;
      e.video_id = video_id_;
      e.start_ms = candidate.begin;
      e.end_ms = candidate.end;
      e.label = ClipLabel::background;
      return e;
    }
    exhausted_ = true;
    return std::nullopt;
  }

 private:
  std::string video_id_;
  Millis duration_ms_;
  std::vector<Interval> occupied_;
  Rng rng_;
  bool exhausted_ = false;
};

}  // namespace

BackgroundSample sample_background(std::span<const AnnotationRecord> records, double video_duration_s,
                                   std::size_t target_count, std::uint64_t seed) {
  if (!(video_duration_s > 0)) fail(Errc::validation, "video duration must be positive");
  std::vector<Interval> occupied;
  std::string video_id = records.empty() ? std::string() : records.front().video_id;
  for (const auto& r : records) {
    require(r.video_id == video_id, "sample_background expects records of a single video");
    occupied.push_back({to_millis(r.start_s), to_millis(r.end_s)});
  }
  BackgroundSampler sampler(video_id, to_millis(video_duration_s), std::move(occupied), seed);
  BackgroundSample out;
  while (out.entries.size() < target_count) {
    auto e = sampler.draw();
    if (!e) break;
    out.entries.push_back(std::move(*e));
  }
  out.shortfall = target_count - out.entries.size();
  return out;
}

ClipEntry movement_clip(const AnnotationRecord& record, double video_duration_s) {
  const Millis video_ms = to_millis(video_duration_s);
  if (video_ms < kMinClipMs)
    fail(Errc::validation, "video " + record.video_id + " is shorter than the minimum clip length");
  Millis start = to_millis(record.start_s);
  Millis end = to_millis(record.end_s);
  const Millis len = end - start;
  if (len > kMaxClipMs || len < kMinClipMs) {
    const Millis target = len > kMaxClipMs ? kMaxClipMs : kMinClipMs;
    // Centre on the midpoint; integer halving keeps the length exact.
    start = start + (len - target) / 2;
    end = start + target;
  }
  if (start < 0) {
    end -= start;
    start = 0;
  }
  if (end > video_ms) {
    start = std::max<Millis>(0, start - (end - video_ms));
    end = video_ms;
  }
  ClipEntry e;
  e.video_id = record.video_id;
  e.start_ms = start;
  e.end_ms = end;
  e.label = ClipLabel::movement;
  e.au_code = record.au_code;
  return e;
}

// ------------------------------------------------------------- manifest

std::size_t ClipManifest::count(ClipLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ClipEntry& e) { return e.label == label; }));
}

std::size_t ClipManifest::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ClipEntry& e) { return e.split == s; }));
}

std::vector<ClipEntry> ClipManifest::split(Split s) const {
  std::vector<ClipEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out), [&](const ClipEntry& e) { return e.split == s; });
  return out;
}

namespace {

void validate_fractions(const SplitFractions& f) {
  require(f.train >= 0 && f.val >= 0 && f.test >= 0, "split fractions must be non-negative");
  require(std::abs(f.train + f.val + f.test - 1.0) < 1e-9, "split fractions must sum to 1");
}

void assign_stratified(std::vector<ClipEntry>& entries, const SplitFractions& f, Rng& rng) {
  for (ClipLabel label : {ClipLabel::movement, ClipLabel::background}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].label == label) idx.push_back(i);
    rng.shuffle(idx);
    const auto n = static_cast<double>(idx.size());
    const auto n_train = std::min(idx.size(), static_cast<std::size_t>(std::llround(n * f.train)));
    const auto n_val = std::min(idx.size() - n_train, static_cast<std::size_t>(std::llround(n * f.val)));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      entries[idx[k]].split = k < n_train ? Split::train : k < n_train + n_val ? Split::val : Split::test;
    }
  }
}

void assign_subject_wise(std::vector<ClipEntry>& entries, const SplitFractions& f, Rng& rng) {
  std::map<std::string, std::size_t> per_video;
  for (const auto& e : entries) ++per_video[e.video_id];
  std::vector<std::string> videos;
  for (const auto& [id, n] : per_video) videos.push_back(id);
  rng.shuffle(videos);
  const auto total = static_cast<double>(entries.size());
  std::map<std::string, Split> assignment;
  double filled = 0;
  for (const auto& v : videos) {
    Split s = Split::test;
    if (f.train > 0 && filled < f.train * total) {
      s = Split::train;
    } else if (f.val > 0 && filled < (f.train + f.val) * total) {
      s = Split::val;
    } else if (f.test == 0) {
      s = f.val > 0 ? Split::val : Split::train;
    }
    assignment[v] = s;
    filled += static_cast<double>(per_video[v]);
  }
  for (auto& e : entries) e.split = assignment[e.video_id];
}

}  // namespace

ClipManifest build_manifest(std::span<const AnnotationRecord> records,
                            const std::map<std::string, double>& per_video_durations, std::uint64_t seed,
                            const ManifestOptions& options) {
  validate_fractions(options.fractions);
  const auto ear = filter_ear_records(records, options.ear_prefixes);
  if (ear.empty()) fail(Errc::empty_positive_class, "no ear annotation records");
  for (const auto& [video, dur] : per_video_durations) {
    if (!(dur > 0)) fail(Errc::validation, "video " + video + " has non-positive duration");
  }

  ClipManifest manifest;
  manifest.seed = seed;
  manifest.source = options.source;

  std::map<std::string, std::vector<Interval>> occupied;
  std::map<std::string, std::size_t> positives;
  for (const auto& r : ear) {
    const auto it = per_video_durations.find(r.video_id);
    if (it == per_video_durations.end()) fail(Errc::validation, "no duration for video " + r.video_id);
    ClipEntry e = movement_clip(r, it->second);
    occupied[r.video_id].push_back({to_millis(r.start_s), to_millis(r.end_s)});
    occupied[r.video_id].push_back({e.start_ms, e.end_ms});
    ++positives[r.video_id];
    manifest.entries.push_back(std::move(e));
  }

  // Each video first tries to match its own positives; any deficit is then
  // spread round-robin over the videos that still have room.
  std::map<std::string, BackgroundSampler> samplers;
  for (const auto& [video, dur] : per_video_durations) {
    samplers.emplace(video, BackgroundSampler(video, to_millis(dur), occupied[video], derive_seed(seed, video)));
  }
  std::map<std::string, std::vector<ClipEntry>> backgrounds;
  std::size_t deficit = 0;
  for (auto& [video, sampler] : samplers) {
    const std::size_t want = positives[video];
    for (std::size_t k = 0; k < want; ++k) {
      auto e = sampler.draw();
      if (!e) {
        deficit += want - k;
        break;
      }
      backgrounds[video].push_back(std::move(*e));
    }
  }
  bool progress = true;
  while (deficit > 0 && progress) {
    progress = false;
    for (auto& [video, sampler] : samplers) {
      if (deficit == 0) break;
      if (auto e = sampler.draw()) {
        backgrounds[video].push_back(std::move(*e));
        --deficit;
        progress = true;
      }
    }
  }
  manifest.shortfall = deficit;
  for (auto& [video, list] : backgrounds) {
    std::sort(list.begin(), list.end(), [](const ClipEntry& a, const ClipEntry& b) { return a.start_ms < b.start_ms; });
    for (auto& e : list) manifest.entries.push_back(std::move(e));
  }

  Rng split_rng(derive_seed(seed, "split"));
  if (options.subject_wise) {
    assign_subject_wise(manifest.entries, options.fractions, split_rng);
  } else {
    assign_stratified(manifest.entries, options.fractions, split_rng);
  }
  return manifest;
}

std::string manifest_to_json(const ClipManifest& manifest) {
  nlohmann::ordered_json doc;
  doc["seed"] = manifest.seed;
  doc["source"] = manifest.source;
  doc["shortfall"] = manifest.shortfall;
  doc["counts"] = {{"movement", manifest.count(ClipLabel::movement)},
                   {"background", manifest.count(ClipLabel::background)},
                   {"train", manifest.count(Split::train)},
                   {"val", manifest.count(Split::val)},
                   {"test", manifest.count(Split::test)}};
  auto& arr = doc["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json j;
    j["clip_id"] = e.clip_id();
    j["video_id"] = e.video_id;
    j["start_ms"] = e.start_ms;
    j["end_ms"] = e.end_ms;
    j["label"] = to_string(e.label);
    j["au_code"] = e.au_code ? nlohmann::ordered_json(*e.au_code) : nlohmann::ordered_json(nullptr);
    j["split"] = to_string(e.split);
    arr.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

ClipManifest manifest_from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    ClipManifest m;
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.source = doc.value("source", std::string());
    m.shortfall = doc.value("shortfall", std::size_t{0});
    for (const auto& j : doc.at("entries")) {
      ClipEntry e;
      e.video_id = j.at("video_id").get<std::string>();
      e.start_ms = j.at("start_ms").get<Millis>();
      e.end_ms = j.at("end_ms").get<Millis>();
      e.label = parse_clip_label(j.at("label").get<std::string>());
      if (j.contains("au_code") && !j.at("au_code").is_null()) e.au_code = j.at("au_code").get<std::string>();
      e.split = parse_split(j.at("split").get<std::string>());
      require(e.end_ms > e.start_ms, "manifest entry with non-positive duration");
      require(e.au_code.has_value() == (e.label == ClipLabel::movement), "au_code presence must match label");
      m.entries.push_back(std::move(e));
    }
    return m;
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::parse, std::string("manifest: ") + ex.what());
  }
}

void write_manifest(const ClipManifest& manifest, const std::filesystem::path& path) {
  detail::write_file_atomic(path, manifest_to_json(manifest));
}

ClipManifest read_manifest(const std::filesystem::path& path) { return manifest_from_json(detail::read_file(path)); }

}  // namespace earmotion
