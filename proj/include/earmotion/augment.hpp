#pragma once

#include <cstdint>

#include "earmotion/frames.hpp"

namespace earmotion {

/// Jitter ranges are half-widths: brightness 0.2 draws a factor in [0.8, 1.2],
/// hue 0.05 draws a shift in [-0.05, 0.05] of the hue circle.
struct AugmentSpec {
  double flip_probability = 0.5;
  double brightness = 0.2;
  double contrast = 0.2;
  double saturation = 0.2;
  double hue = 0.05;

  static AugmentSpec identity() { return {0.0, 0.0, 0.0, 0.0, 0.0}; }
};

void validate(const AugmentSpec& spec);

/// Factors drawn once per clip and applied to every frame.
struct PhotometricFactors {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue_shift = 0.0;
};

struct AugmentDraw {
  bool flip = false;
  PhotometricFactors factors;
};

AugmentDraw draw_augmentation(const AugmentSpec& spec, std::uint64_t seed);

/// Brightness, contrast, saturation then hue, each result rounded
/// half-to-even and clamped to [0, 255]. Saturation and hue leave
/// single-channel frames unchanged.
Image8 apply_photometric(const Image8& frame, const PhotometricFactors& factors);

/// Same clip with one seeded flip decision and one set of jitter factors.
FrameSequence augment_clip(const FrameSequence& frames, const AugmentSpec& spec, std::uint64_t seed);

}  // namespace earmotion
