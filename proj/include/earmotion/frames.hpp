#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "earmotion/image.hpp"

namespace earmotion {

enum class ColorSpace { gray, rgb };

struct FrameSequence {
  std::vector<Image8> frames;
  double fps = 25.0;
  ColorSpace color_space = ColorSpace::gray;

  std::size_t size() const noexcept { return frames.size(); }
  int rows() const noexcept { return frames.empty() ? 0 : frames.front().rows(); }
  int cols() const noexcept { return frames.empty() ? 0 : frames.front().cols(); }

  /// Frames [begin, end) with the same fps and color space.
  FrameSequence slice(std::size_t begin, std::size_t end) const;
};

/// Throws unless all frames share a shape matching the color space and fps > 0.
void validate(const FrameSequence& seq);

/// Per-frame ear box; std::nullopt means the ear is not visible in that frame.
struct RegionTrack {
  std::vector<std::optional<Rect>> boxes;

  std::size_t size() const noexcept { return boxes.size(); }
  RegionTrack slice(std::size_t begin, std::size_t end) const;
  static RegionTrack full_frame(std::size_t frames, int rows, int cols);
};

void validate(const RegionTrack& track, const FrameSequence& seq);

// `.frames` container: "EFRM", u32 H, W, C, N, fps*1000, then N frames, each
// stored as C planes of H*W bytes. All integers little-endian.
void write_frames(const FrameSequence& seq, const std::filesystem::path& path);
FrameSequence read_frames(const std::filesystem::path& path);

struct FramesHeader {
  std::uint32_t rows = 0, cols = 0, channels = 0, count = 0;
  double fps = 0;
};
FramesHeader read_frames_header(const std::filesystem::path& path);

/// All *.png / *.pgm files of a directory in lexicographic filename order.
FrameSequence read_frame_directory(const std::filesystem::path& dir, double fps);

/// Reads a `.frames` file or an image directory depending on what `path` is.
FrameSequence load_clip(const std::filesystem::path& path, double fps_for_directories);

Image8 read_pgm(const std::filesystem::path& path);
void write_pgm(const Image8& image, const std::filesystem::path& path);
Image8 read_png(const std::filesystem::path& path);
void write_png(const Image8& image, const std::filesystem::path& path);

// Region track CSV: header `frame_idx,x,y,w,h`, frames without a row have no box.
RegionTrack read_region_track(const std::filesystem::path& path, std::size_t frame_count);
void write_region_track(const RegionTrack& track, const std::filesystem::path& path);

}  // namespace earmotion
