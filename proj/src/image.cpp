#include "earmotion/image.hpp"

#include <algorithm>
#include <cmath>

namespace earmotion {

Plane to_gray_plane(const Image8& image) {
  Plane out(image.rows(), image.cols());
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols(); ++c) {
      if (image.channels() >= 3) {
        out(r, c) = 0.299 * image(r, c, 0) + 0.587 * image(r, c, 1) + 0.114 * image(r, c, 2);
      } else {
        out(r, c) = image(r, c, 0);
      }
    }
  }
  return out;
}

Image8 to_gray8(const Image8& image) {
  if (image.channels() == 1) return image;
  const Plane gray = to_gray_plane(image);
  Image8 out(image.rows(), image.cols());
  for (int r = 0; r < image.rows(); ++r)
    for (int c = 0; c < image.cols(); ++c)
      out(r, c) = static_cast<std::uint8_t>(std::clamp(std::nearbyint(gray(r, c)), 0.0, 255.0));
  return out;
}

namespace {

template <typename T>
Image<T> crop_impl(const Image<T>& image, const Rect& roi) {
  require(!roi.empty(), "crop region is empty");
  require(roi.inside(image.rows(), image.cols()), "crop region exceeds image bounds");
  Image<T> out(roi.h, roi.w, image.channels());
  for (int r = 0; r < roi.h; ++r)
    for (int c = 0; c < roi.w; ++c)
      for (int ch = 0; ch < image.channels(); ++ch) out(r, c, ch) = image(roi.y + r, roi.x + c, ch);
  return out;
}

// Half-pixel-centre mapping, matching the usual image resize convention.
template <typename T, typename Store>
Image<T> resize_impl(const Image<T>& image, int rows, int cols, Store store) {
  require(rows > 0 && cols > 0, "resize target must be non-empty");
  require(!image.empty(), "cannot resize an empty image");
  Image<T> out(rows, cols, image.channels());
  const double sy = static_cast<double>(image.rows()) / rows;
  const double sx = static_cast<double>(image.cols()) / cols;
  for (int r = 0; r < rows; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, image.rows() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.rows() - 1);
    const double wy = fy - y0;
    for (int c = 0; c < cols; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, image.cols() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.cols() - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < image.channels(); ++ch) {
        const double top = (1 - wx) * image(y0, x0, ch) + wx * image(y0, x1, ch);
        const double bottom = (1 - wx) * image(y1, x0, ch) + wx * image(y1, x1, ch);
        out(r, c, ch) = store((1 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

}  // namespace

Image8 crop(const Image8& image, const Rect& roi) { return crop_impl(image, roi); }
Plane crop(const Plane& image, const Rect& roi) { return crop_impl(image, roi); }

Image8 resize_bilinear(const Image8& image, int rows, int cols) {
  if (image.rows() == rows && image.cols() == cols) return image;
  return resize_impl(image, rows, cols, [](double v) {
    return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
  });
}

Plane resize_bilinear(const Plane& image, int rows, int cols) {
  if (image.rows() == rows && image.cols() == cols) return image;
  return resize_impl(image, rows, cols, [](double v) { return v; });
}

double sample_bilinear(const Plane& image, double row, double col) noexcept {
  row = std::clamp(row, 0.0, image.rows() - 1.0);
  col = std::clamp(col, 0.0, image.cols() - 1.0);
  const int y0 = static_cast<int>(row);
  const int x0 = static_cast<int>(col);
  const int y1 = std::min(y0 + 1, image.rows() - 1);
  const int x1 = std::min(x0 + 1, image.cols() - 1);
  const double wy = row - y0;
  const double wx = col - x0;
  return (1 - wy) * ((1 - wx) * image(y0, x0) + wx * image(y0, x1)) +
         wy * ((1 - wx) * image(y1, x0) + wx * image(y1, x1));
}

Image8 flip_horizontal(const Image8& image) {
  Image8 out(image.rows(), image.cols(), image.channels());
  for (int r = 0; r < image.rows(); ++r)
    for (int c = 0; c < image.cols(); ++c)
      for (int ch = 0; ch < image.channels(); ++ch)
        out(r, c, ch) = image(r, image.cols() - 1 - c, ch);
  return out;
}

std::vector<double> gaussian_kernel(int radius, double sigma) {
  require(radius >= 0 && sigma > 0, "invalid gaussian kernel parameters");
  std::vector<double> taps(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += taps[i + radius];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

Plane convolve_separable(const Plane& image, std::span<const double> row_kernel,
                         std::span<const double> col_kernel) {
  const int rows = image.rows();
  const int cols = image.cols();
  const int rr = static_cast<int>(row_kernel.size()) / 2;
  const int cr = static_cast<int>(col_kernel.size()) / 2;
  Plane tmp(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0;
      for (int k = -rr; k <= rr; ++k) acc += row_kernel[k + rr] * image(r, reflect_index(c + k, cols));
      tmp(r, c) = acc;
    }
  }
  Plane out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0;
      for (int k = -cr; k <= cr; ++k) acc += col_kernel[k + cr] * tmp(reflect_index(r + k, rows), c);
      out(r, c) = acc;
    }
  }
  return out;
}

Plane gaussian_blur(const Plane& image, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const auto taps = gaussian_kernel(radius, sigma);
  return convolve_separable(image, taps, taps);
}

}  // namespace earmotion
