#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace earmotion {

enum class Stream : std::uint8_t { i3d_rgb = 0, i3d_flow = 1, i3d_mixed = 2, videomae_rgb = 3 };

std::string_view to_string(Stream stream) noexcept;
Stream parse_stream(std::string_view text);

/// Feature width fixed by each backbone: 1024 for the I3D streams, 768 for VideoMAE.
int expected_dim(Stream stream) noexcept;

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// T x D per-window features of one clip, rows in extraction order.
struct FeatureSequence {
  FeatureMatrix data;
  Stream stream = Stream::i3d_rgb;
  double fps = 25.0;
  std::uint32_t window = 16;
  std::uint32_t step = 16;
  std::uint32_t sample_rate = 1;
  std::string clip_id;

  Eigen::Index length() const noexcept { return data.rows(); }
  Eigen::Index dim() const noexcept { return data.cols(); }
};

/// Metadata equality plus bitwise equality of the payload.
bool bit_equal(const FeatureSequence& a, const FeatureSequence& b);

/// Throws dimension_mismatch / non_finite / validation errors.
void validate(const FeatureSequence& seq);

struct FrameWindow {
  std::int64_t begin = 0;
  std::int64_t end = 0;
  friend bool operator==(const FrameWindow&, const FrameWindow&) = default;
};

struct WindowPlan {
  std::vector<FrameWindow> windows;
  bool short_window = false;  ///< the whole input was shorter than one window
};

/// Full windows [k*step, k*step + window) inside [0, num_frames). An input
/// shorter than one window yields the single flagged window [0, num_frames).
WindowPlan window_plan(std::int64_t num_frames, std::int64_t window, std::int64_t step);

/// Element-wise mean of an RGB and a flow sequence with matching shape and
/// extraction metadata; the result is tagged i3d-mixed.
FeatureSequence late_fusion(const FeatureSequence& rgb, const FeatureSequence& flow);

// `.efseq`: "EFSQ", u16 version, u8 stream, u32 T, u32 D, u32 fps*1000,
// u32 window, u32 step, u32 sample_rate, u16 id length, id bytes, then T*D
// float32, row-major, little-endian.
inline constexpr std::uint16_t kFeatureFormatVersion = 1;

std::string encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(std::string_view bytes, const std::string& source = "<memory>");
void write_features(const FeatureSequence& seq, const std::filesystem::path& path);
FeatureSequence read_features(const std::filesystem::path& path);

/// Header fields as a JSON object (no payload).
std::string describe_features(const FeatureSequence& seq);

}  // namespace earmotion
