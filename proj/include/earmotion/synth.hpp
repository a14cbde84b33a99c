#pragma once

#include <cstdint>
#include <vector>

#include "earmotion/classifier.hpp"
#include "earmotion/dataset.hpp"
#include "earmotion/features.hpp"
#include "earmotion/frames.hpp"
#include "earmotion/optflow.hpp"

namespace earmotion {

enum class TextureKind { noise, checker };
enum class BackgroundKind { static_noise, uniform };

/// `follow`: each frame's box is the patch expanded by the margin (clipped to
/// the frame). `common`: one box shared by all frames, the region covered by
/// the patch in every frame shrunk by the margin.
enum class RoiPolicy { follow, common };

struct SynthSpec {
  int height = 64;
  int width = 64;
  int num_frames = 8;
  double fps = 25.0;
  Rect patch{16, 16, 24, 24};  ///< position in frame 0
  int vx = 0;                  ///< px/frame, integer for exact ground truth
  int vy = 0;
  TextureKind texture = TextureKind::noise;
  std::uint64_t texture_seed = 1;
  int checker_period = 4;
  BackgroundKind background = BackgroundKind::uniform;
  std::uint64_t background_seed = 2;
  std::uint8_t background_value = 128;
  /// The patch moves between frames t and t+1 for t in [motion_begin, motion_end);
  /// motion_end < 0 means until the last frame.
  int motion_begin = 0;
  int motion_end = -1;
  int roi_margin = 2;
  RoiPolicy roi_policy = RoiPolicy::follow;
};

struct SynthClip {
  FrameSequence frames;
  std::vector<FlowField> ground_truth;  ///< one per consecutive pair
  RegionTrack roi;
  ClipLabel label = ClipLabel::background;
};

/// Throws if the patch leaves the frame at any time.
SynthClip generate_clip(const SynthSpec& spec);

/// Gaussian-smoothed white noise stretched to [0, 255].
Plane band_limited_noise(int rows, int cols, std::uint64_t seed, double smoothing_sigma = 1.5);

/// Two frames of one noise canvas, the second translated by (dx, dy): the
/// true flow is (dx, dy) at every pixel.
struct TranslatedPair {
  Plane prev;
  Plane next;
  int dx = 0;
  int dy = 0;
};
TranslatedPair generate_translated_pair(int rows, int cols, int dx, int dy, std::uint64_t seed);

struct FeatureDatasetSpec {
  int n_per_class = 16;
  int min_length = 2;
  int max_length = 6;
  int dim = 768;
  double mean_shift = 1.0;  ///< class 1 rows centre on +shift*e1, class 0 on -shift*e1
  double noise_sigma = 0.3;
  std::uint64_t seed = 0;
};

/// Stream tag implied by a feature width: 768 -> videomae-rgb, 1024 -> i3d-rgb.
Stream stream_for_dim(int dim);

/// Movement and background sequences interleaved (m, b, m, b, ...).
std::vector<LabeledSequence> generate_feature_dataset(const FeatureDatasetSpec& spec);

LabeledSequence generate_feature_sequence(ClipLabel label, int length, int dim, double mean_shift,
                                          double noise_sigma, std::uint64_t seed);

FeatureSequence to_feature_sequence(const LabeledSequence& seq, double fps = 25.0);

}  // namespace earmotion
