#include <gtest/gtest.h>

#include "earmotion/augment.hpp"
#include "earmotion/rng.hpp"
#include "support.hpp"

using namespace earmotion;

namespace {

FrameSequence random_clip(int n, int rows, int cols, int channels, std::uint64_t seed) {
  Rng rng(seed);
  FrameSequence s;
  s.color_space = channels == 3 ? ColorSpace::rgb : ColorSpace::gray;
  for (int k = 0; k < n; ++k) {
    Image8 f(rows, cols, channels);
    for (auto& v : f.pixels()) v = static_cast<std::uint8_t>(rng.below(256));
    s.frames.push_back(std::move(f));
  }
  return s;
}

}  // namespace

TEST(Augment, FlipTwiceIsIdentity) {
  const auto clip = random_clip(3, 5, 7, 3, 1);
  for (const auto& f : clip.frames) EXPECT_EQ(flip_horizontal(flip_horizontal(f)), f);
}

TEST(Augment, FlipMirrorsColumns) {
  Image8 f(1, 3, 1);
  f(0, 0) = 1;
  f(0, 1) = 2;
  f(0, 2) = 3;
  const Image8 g = flip_horizontal(f);
  EXPECT_EQ(g(0, 0), 3);
  EXPECT_EQ(g(0, 2), 1);
}

TEST(Augment, IdentitySpecLeavesClipUnchanged) {
  const auto clip = random_clip(4, 6, 6, 3, 2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto out = augment_clip(clip, AugmentSpec::identity(), seed);
    EXPECT_EQ(out.frames, clip.frames);
    EXPECT_EQ(out.fps, clip.fps);
  }
}

TEST(Augment, BrightnessOnUniformGrayRoundsHalfEven) {
  // 128 * 1.2 = 153.6, nearest 8-bit value 154.
  const Image8 gray(4, 4, 1, 128);
  const Image8 out = apply_photometric(gray, {1.2, 1.0, 1.0, 0.0});
  for (auto v : out.pixels()) EXPECT_EQ(v, 154);
}

TEST(Augment, ExactHalvesGoToEven) {
  // 5 * 0.5 = 2.5 -> 2, 7 * 0.5 = 3.5 -> 4, 255 * 1.1 clamps to 255.
  Image8 f(1, 3, 1);
  f(0, 0) = 5;
  f(0, 1) = 7;
  f(0, 2) = 255;
  const Image8 dim = apply_photometric(f, {0.5, 1.0, 1.0, 0.0});
  EXPECT_EQ(dim(0, 0), 2);
  EXPECT_EQ(dim(0, 1), 4);
  EXPECT_EQ(apply_photometric(f, {1.1, 1.0, 1.0, 0.0})(0, 2), 255);
}

TEST(Augment, ContrastPivotsOnMean) {
  Image8 f(1, 2, 1);
  f(0, 0) = 100;
  f(0, 1) = 200;
  const Image8 out = apply_photometric(f, {1.0, 0.5, 1.0, 0.0});
  EXPECT_EQ(out(0, 0), 125);
  EXPECT_EQ(out(0, 1), 175);
  const Image8 flat(3, 3, 1, 90);
  EXPECT_EQ(apply_photometric(flat, {1.0, 1.2, 1.0, 0.0}), flat);
}

TEST(Augment, SaturationZeroGivesGray) {
  Image8 f(1, 1, 3);
  f(0, 0, 0) = 200;
  f(0, 0, 1) = 100;
  f(0, 0, 2) = 50;
  const Image8 out = apply_photometric(f, {1.0, 1.0, 0.0, 0.0});
  const double y = 0.299 * 200 + 0.587 * 100 + 0.114 * 50;
  for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(out(0, 0, ch), static_cast<int>(std::nearbyint(y)));
}

TEST(Augment, HueShiftRotatesPrimaries) {
  Image8 red(1, 1, 3);
  red(0, 0, 0) = 255;
  // A third of the circle takes red to green.
  const Image8 out = apply_photometric(red, {1.0, 1.0, 1.0, 1.0 / 3.0});
  EXPECT_EQ(out(0, 0, 0), 0);
  EXPECT_EQ(out(0, 0, 1), 255);
  EXPECT_EQ(out(0, 0, 2), 0);
  // A full turn is the identity.
  const auto clip = random_clip(1, 4, 4, 3, 9);
  const Image8 turned = apply_photometric(clip.frames[0], {1.0, 1.0, 1.0, 1.0});
  for (std::size_t i = 0; i < turned.size(); ++i)
    EXPECT_NEAR(turned.pixels()[i], clip.frames[0].pixels()[i], 1);
}

TEST(Augment, SingleChannelIgnoresColourJitter) {
  const auto clip = random_clip(1, 4, 4, 1, 3);
  EXPECT_EQ(apply_photometric(clip.frames[0], {1.0, 1.0, 0.3, 0.2}), clip.frames[0]);
}

TEST(Augment, DrawsStayInRanges) {
  const AugmentSpec spec;
  int flips = 0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    const auto d = draw_augmentation(spec, seed);
    flips += d.flip;
    EXPECT_GE(d.factors.brightness, 0.8);
    EXPECT_LE(d.factors.brightness, 1.2);
    EXPECT_GE(d.factors.contrast, 0.8);
    EXPECT_LE(d.factors.contrast, 1.2);
    EXPECT_GE(d.factors.saturation, 0.8);
    EXPECT_LE(d.factors.saturation, 1.2);
    EXPECT_GE(d.factors.hue_shift, -0.05);
    EXPECT_LE(d.factors.hue_shift, 0.05);
  }
  EXPECT_NEAR(flips / 2000.0, 0.5, 0.05);
}

TEST(Augment, OneDrawPerClipAndDeterministic) {
  const Image8 flat(3, 5, 3, 120);
  FrameSequence clip;
  clip.color_space = ColorSpace::rgb;
  clip.frames.assign(4, flat);
  const auto out = augment_clip(clip, AugmentSpec{}, 17);
  for (const auto& f : out.frames) EXPECT_EQ(f, out.frames.front());
  EXPECT_EQ(augment_clip(clip, AugmentSpec{}, 17).frames, out.frames);
}

TEST(Augment, FlipProbabilityOneAlwaysFlips) {
  const auto clip = random_clip(2, 3, 4, 1, 5);
  AugmentSpec spec = AugmentSpec::identity();
  spec.flip_probability = 1.0;
  const auto out = augment_clip(clip, spec, 1);
  for (std::size_t k = 0; k < clip.size(); ++k) EXPECT_EQ(out.frames[k], flip_horizontal(clip.frames[k]));
}

TEST(Augment, InvalidSpecRejected) {
  AugmentSpec spec;
  spec.brightness = 1.5;
  EXPECT_ERRC(draw_augmentation(spec, 0), Errc::validation);
  spec = {};
  spec.flip_probability = 2;
  EXPECT_ERRC(draw_augmentation(spec, 0), Errc::validation);
}
