#include "earmotion/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "earmotion/rng.hpp"

namespace earmotion {

void validate(const AugmentSpec& spec) {
  require(spec.flip_probability >= 0 && spec.flip_probability <= 1, "flip probability must lie in [0, 1]");
  require(spec.brightness >= 0 && spec.brightness < 1, "brightness range must lie in [0, 1)");
  require(spec.contrast >= 0 && spec.contrast < 1, "contrast range must lie in [0, 1)");
  require(spec.saturation >= 0 && spec.saturation < 1, "saturation range must lie in [0, 1)");
  require(spec.hue >= 0 && spec.hue <= 0.5, "hue range must lie in [0, 0.5]");
}

AugmentDraw draw_augmentation(const AugmentSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  AugmentDraw d;
  // Draw every value unconditionally so that one range does not shift the
  // random stream of the others.
  d.flip = rng.bernoulli(spec.flip_probability);
  d.factors.brightness = rng.uniform(1.0 - spec.brightness, 1.0 + spec.brightness);
  d.factors.contrast = rng.uniform(1.0 - spec.contrast, 1.0 + spec.contrast);
  d.factors.saturation = rng.uniform(1.0 - spec.saturation, 1.0 + spec.saturation);
  d.factors.hue_shift = rng.uniform(-spec.hue, spec.hue);
  return d;
}

namespace {

std::uint8_t to_u8(double v) {
  // std::nearbyint honours the default FE_TONEAREST mode: ties to even.
  return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
}

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0;
  if (delta > 0) {
    if (mx == r) {
      h = std::fmod((g - b) / delta, 6.0);
    } else if (mx == g) {
      h = (b - r) / delta + 2.0;
    } else {
      h = (r - g) / delta + 4.0;
    }
    h /= 6.0;
    if (h < 0) h += 1.0;
  }
  const double s = mx > 0 ? delta / mx : 0.0;
  return {h, s, mx};
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double sector = h * 6.0;
  const int i = static_cast<int>(sector) % 6;
  const double f = sector - std::floor(sector);
  const double p = v * (1 - s);
  const double q = v * (1 - s * f);
  const double t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

}  // namespace

Image8 apply_photometric(const Image8& frame, const PhotometricFactors& factors) {
  Image8 out = frame;
  auto px = out.pixels();
  const bool color = frame.channels() == 3;

  if (factors.brightness != 1.0) {
    for (auto& v : px) v = to_u8(v * factors.brightness);
  }
  if (factors.contrast != 1.0) {
    double mean = 0;
    if (color) {
      for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) mean += luma(out(r, c, 0), out(r, c, 1), out(r, c, 2));
    } else {
      for (auto v : px) mean += v;
    }
    mean /= static_cast<double>(out.rows()) * out.cols();
    for (auto& v : px) v = to_u8(mean + factors.contrast * (v - mean));
  }
  if (color && factors.saturation != 1.0) {
    for (int r = 0; r < out.rows(); ++r) {
      for (int c = 0; c < out.cols(); ++c) {
        const double gray = luma(out(r, c, 0), out(r, c, 1), out(r, c, 2));
        for (int ch = 0; ch < 3; ++ch) out(r, c, ch) = to_u8(gray + factors.saturation * (out(r, c, ch) - gray));
      }
    }
  }
  if (color && factors.hue_shift != 0.0) {
    for (int r = 0; r < out.rows(); ++r) {
      for (int c = 0; c < out.cols(); ++c) {
        auto [h, s, v] = rgb_to_hsv(out(r, c, 0), out(r, c, 1), out(r, c, 2));
        const auto rgb = hsv_to_rgb(h + factors.hue_shift, s, v);
        for (int ch = 0; ch < 3; ++ch) out(r, c, ch) = to_u8(rgb[ch]);
      }
    }
  }
  return out;
}

FrameSequence augment_clip(const FrameSequence& frames, const AugmentSpec& spec, std::uint64_t seed) {
  require(!frames.frames.empty(), "cannot augment an empty clip");
  validate(frames);
  const AugmentDraw d = draw_augmentation(spec, seed);
  FrameSequence out;
  out.fps = frames.fps;
  out.color_space = frames.color_space;
  out.frames.reserve(frames.size());
  for (const auto& f : frames.frames) {
    Image8 g = d.flip ? flip_horizontal(f) : f;
    out.frames.push_back(apply_photometric(g, d.factors));
  }
  return out;
}

}  // namespace earmotion
