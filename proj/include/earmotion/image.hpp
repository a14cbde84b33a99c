#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "earmotion/error.hpp"

namespace earmotion {

/// Dense row-major image with interleaved channels.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int rows, int cols, int channels = 1, T fill = T{})
      : rows_(rows), cols_(cols), channels_(channels) {
    require(rows >= 0 && cols >= 0 && channels >= 1, "image dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(rows) * cols * channels, fill);
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(int r, int c, int ch = 0) noexcept { return data_[index(r, c, ch)]; }
  const T& operator()(int r, int c, int ch = 0) const noexcept { return data_[index(r, c, ch)]; }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int r, int c, int ch) const noexcept {
    return (static_cast<std::size_t>(r) * cols_ + c) * channels_ + ch;
  }

  int rows_ = 0;
  int cols_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using Image8 = Image<std::uint8_t>;
using Plane = Image<double>;

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool empty() const noexcept { return w <= 0 || h <= 0; }
  bool inside(int rows, int cols) const noexcept {
    return x >= 0 && y >= 0 && w >= 0 && h >= 0 && x + w <= cols && y + h <= rows;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Index into [0, n) with mirror reflection that does not repeat the edge
/// sample (… 2 1 | 0 1 2 … n-1 | n-2 …).
inline int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Luma 0.299/0.587/0.114 for RGB, identity for single-channel input.
Plane to_gray_plane(const Image8& image);
Image8 to_gray8(const Image8& image);

Image8 crop(const Image8& image, const Rect& roi);
Plane crop(const Plane& image, const Rect& roi);

Image8 resize_bilinear(const Image8& image, int rows, int cols);
Plane resize_bilinear(const Plane& image, int rows, int cols);

/// Bilinear sample with coordinates clamped to the image.
double sample_bilinear(const Plane& image, double row, double col) noexcept;

Image8 flip_horizontal(const Image8& image);

/// Normalized 1-D Gaussian taps of length 2*radius+1.
std::vector<double> gaussian_kernel(int radius, double sigma);

/// Separable correlation with reflection at borders.
Plane convolve_separable(const Plane& image, std::span<const double> row_kernel,
                         std::span<const double> col_kernel);

Plane gaussian_blur(const Plane& image, double sigma);

}  // namespace earmotion
