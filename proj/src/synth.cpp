#include "earmotion/synth.hpp"

#include <algorithm>
#include <cmath>

#include "earmotion/rng.hpp"

namespace earmotion {

Plane band_limited_noise(int rows, int cols, std::uint64_t seed, double smoothing_sigma) {
  require(rows > 0 && cols > 0, "noise canvas must be non-empty");
  Rng rng(seed);
  Plane white(rows, cols);
  for (auto& v : white.pixels()) v = rng.uniform();
  Plane smooth = gaussian_blur(white, smoothing_sigma);
  const auto [lo, hi] = std::minmax_element(smooth.pixels().begin(), smooth.pixels().end());
  const double low = *lo;
  const double span = std::max(*hi - *lo, 1e-12);
  for (auto& v : smooth.pixels()) v = 255.0 * (v - low) / span;
  return smooth;
}

TranslatedPair generate_translated_pair(int rows, int cols, int dx, int dy, std::uint64_t seed) {
  const int margin = std::max(std::abs(dx), std::abs(dy)) + 1;
  const Plane canvas = band_limited_noise(rows + 2 * margin, cols + 2 * margin, seed);
  TranslatedPair pair{Plane(rows, cols), Plane(rows, cols), dx, dy};
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      pair.prev(r, c) = canvas(r + margin, c + margin);
      pair.next(r, c) = canvas(r + margin - dy, c + margin - dx);
    }
  }
  return pair;
}

namespace {

int steps_moved(const SynthSpec& s, int frame) {
  const int end = s.motion_end < 0 ? s.num_frames - 1 : s.motion_end;
  return std::clamp(frame - s.motion_begin, 0, std::max(0, end - s.motion_begin));
}

Rect patch_at(const SynthSpec& s, int frame) {
  const int k = steps_moved(s, frame);
  return {s.patch.x + s.vx * k, s.patch.y + s.vy * k, s.patch.w, s.patch.h};
}

bool moving_between(const SynthSpec& s, int frame) { return steps_moved(s, frame + 1) != steps_moved(s, frame); }

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0)); }

}  // namespace

SynthClip generate_clip(const SynthSpec& s) {
  require(s.height > 0 && s.width > 0 && s.num_frames >= 1, "synthetic clip dimensions must be positive");
  require(s.fps > 0, "fps must be positive");
  require(!s.patch.empty(), "patch must be non-empty");
  require(s.texture == TextureKind::noise || s.checker_period >= 1, "checker period must be >= 1");
  for (int t = 0; t < s.num_frames; ++t) {
    if (!patch_at(s, t).inside(s.height, s.width)) fail(Errc::validation, "patch leaves the frame at frame " + std::to_string(t));
  }

  Image8 background(s.height, s.width, 1, s.background_value);
  if (s.background == BackgroundKind::static_noise) {
    const Plane noise = band_limited_noise(s.height, s.width, s.background_seed);
    for (int r = 0; r < s.height; ++r)
      for (int c = 0; c < s.width; ++c) background(r, c) = to_u8(noise(r, c));
  }
  Image8 texture(s.patch.h, s.patch.w);
  if (s.texture == TextureKind::noise) {
    const Plane noise = band_limited_noise(s.patch.h, s.patch.w, s.texture_seed);
    for (int r = 0; r < s.patch.h; ++r)
      for (int c = 0; c < s.patch.w; ++c) texture(r, c) = to_u8(noise(r, c));
  } else {
    for (int r = 0; r < s.patch.h; ++r)
      for (int c = 0; c < s.patch.w; ++c)
        texture(r, c) = ((r / s.checker_period + c / s.checker_period) % 2) ? 220 : 35;
  }

  SynthClip clip;
  clip.frames.fps = s.fps;
  clip.frames.color_space = ColorSpace::gray;
  for (int t = 0; t < s.num_frames; ++t) {
    Image8 frame = background;
    const Rect p = patch_at(s, t);
    for (int r = 0; r < p.h; ++r)
      for (int c = 0; c < p.w; ++c) frame(p.y + r, p.x + c) = texture(r, c);
    clip.frames.frames.push_back(std::move(frame));
  }

  for (int t = 0; t + 1 < s.num_frames; ++t) {
    FlowField gt{Plane(s.height, s.width), Plane(s.height, s.width)};
    if (moving_between(s, t)) {
      const Rect p = patch_at(s, t);
      for (int r = p.y; r < p.y + p.h; ++r)
        for (int c = p.x; c < p.x + p.w; ++c) {
          gt.u(r, c) = s.vx;
          gt.v(r, c) = s.vy;
        }
    }
    clip.ground_truth.push_back(std::move(gt));
  }

  const bool any_motion = (s.vx != 0 || s.vy != 0) && steps_moved(s, s.num_frames - 1) > 0;
  clip.label = any_motion ? ClipLabel::movement : ClipLabel::background;

  if (s.roi_policy == RoiPolicy::follow) {
    for (int t = 0; t < s.num_frames; ++t) {
      const Rect p = patch_at(s, t);
      const int x0 = std::max(0, p.x - s.roi_margin), y0 = std::max(0, p.y - s.roi_margin);
      const int x1 = std::min(s.width, p.x + p.w + s.roi_margin), y1 = std::min(s.height, p.y + p.h + s.roi_margin);
      clip.roi.boxes.push_back(Rect{x0, y0, x1 - x0, y1 - y0});
    }
  } else {
    int x0 = 0, y0 = 0, x1 = s.width, y1 = s.height;
    for (int t = 0; t < s.num_frames; ++t) {
      const Rect p = patch_at(s, t);
      x0 = std::max(x0, p.x);
      y0 = std::max(y0, p.y);
      x1 = std::min(x1, p.x + p.w);
      y1 = std::min(y1, p.y + p.h);
    }
    x0 += s.roi_margin;
    y0 += s.roi_margin;
    x1 -= s.roi_margin;
    y1 -= s.roi_margin;
    if (x1 <= x0 || y1 <= y0) fail(Errc::validation, "patch positions share no common region");
    clip.roi.boxes.assign(static_cast<std::size_t>(s.num_frames), Rect{x0, y0, x1 - x0, y1 - y0});
  }
  return clip;
}

Stream stream_for_dim(int dim) {
  if (dim == 768) return Stream::videomae_rgb;
  if (dim == 1024) return Stream::i3d_rgb;
  fail(Errc::dimension_mismatch, "no stream produces " + std::to_string(dim) + "-d features");
}

LabeledSequence generate_feature_sequence(ClipLabel label, int length, int dim, double mean_shift,
                                          double noise_sigma, std::uint64_t seed) {
  require(length >= 1 && dim >= 1, "sequence shape must be positive");
  Rng rng(seed);
  LabeledSequence s;
  s.label = label;
  s.features.resize(length, dim);
  const double centre = label == ClipLabel::movement ? mean_shift : -mean_shift;
  for (int t = 0; t < length; ++t)
    for (int d = 0; d < dim; ++d)
      s.features(t, d) = static_cast<float>((d == 0 ? centre : 0.0) + noise_sigma * rng.normal());
  return s;
}

std::vector<LabeledSequence> generate_feature_dataset(const FeatureDatasetSpec& spec) {
  require(spec.n_per_class >= 1, "n_per_class must be >= 1");
  require(spec.min_length >= 1 && spec.max_length >= spec.min_length, "invalid length range");
  require(spec.noise_sigma >= 0, "noise sigma must be non-negative");
  Rng rng(derive_seed(spec.seed, "lengths"));
  std::vector<LabeledSequence> out;
  for (int i = 0; i < spec.n_per_class; ++i) {
    for (ClipLabel label : {ClipLabel::movement, ClipLabel::background}) {
      const int length = static_cast<int>(rng.range(spec.min_length, spec.max_length));
      const std::string id = std::string(label == ClipLabel::movement ? "synth-movement-" : "synth-background-") +
                             std::to_string(i);
      LabeledSequence s = generate_feature_sequence(label, length, spec.dim, spec.mean_shift, spec.noise_sigma,
                                                    derive_seed(spec.seed, id));
      s.clip_id = id;
      out.push_back(std::move(s));
    }
  }
  return out;
}

FeatureSequence to_feature_sequence(const LabeledSequence& seq, double fps) {
  FeatureSequence f;
  f.data = seq.features;
  f.stream = stream_for_dim(static_cast<int>(seq.features.cols()));
  f.fps = fps;
  f.window = 16;
  f.step = 16;
  f.sample_rate = 1;
  f.clip_id = seq.clip_id;
  return f;
}

}  // namespace earmotion
