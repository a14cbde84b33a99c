#pragma once

#include <optional>

#include "earmotion/image.hpp"

namespace earmotion {

struct FlowParams {
  int pyramid_levels = 3;
  double pyramid_scale = 0.5;
  int expansion_window = 11;  ///< odd, >= 3
  int iterations_per_level = 3;
  double poly_sigma = 1.5;
  double regularization_eps = 1e-3;
  int averaging_window = 15;  ///< odd; neighbourhood over which the displacement constraints are pooled
};

void validate(const FlowParams& params);

/// Displacement (px/frame) from the first frame to the second: content at x
/// in the first frame is found at x + (u, v) in the second.
struct FlowField {
  Plane u;
  Plane v;

  int rows() const noexcept { return u.rows(); }
  int cols() const noexcept { return u.cols(); }
};

/// Local quadratic model f(p + x) ~ x'Ax + b'x + c around every pixel p, with
/// x = (column offset, row offset). A is stored as its three distinct entries.
struct PolyExpansion {
  Plane c;
  Plane bx, by;
  Plane axx, axy, ayy;
};

/// Gaussian-weighted least-squares fit of the quadratic model over a
/// window x window neighbourhood, reflecting at the borders.
PolyExpansion polynomial_expansion(const Plane& frame, int window, double sigma);

/// Pyramidal dense flow from two equally sized grayscale frames.
FlowField farneback_flow(const Plane& prev, const Plane& next, const FlowParams& params = {});

/// RGB input is reduced to luma first.
FlowField farneback_flow(const Image8& prev, const Image8& next, const FlowParams& params = {});

/// Mean of sqrt(u^2 + v^2) over `roi`, or over the whole field.
double mean_flow_magnitude(const FlowField& flow, std::optional<Rect> roi = std::nullopt);

}  // namespace earmotion
