#include "earmotion/optflow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>

namespace earmotion {

void validate(const FlowParams& p) {
  require(p.pyramid_levels >= 1, "pyramid_levels must be >= 1");
  require(p.pyramid_scale > 0 && p.pyramid_scale < 1, "pyramid_scale must lie in (0, 1)");
  require(p.expansion_window >= 3 && p.expansion_window % 2 == 1, "expansion_window must be odd and >= 3");
  require(p.iterations_per_level >= 1, "iterations_per_level must be >= 1");
  require(p.poly_sigma > 0, "poly_sigma must be positive");
  require(p.regularization_eps > 0, "regularization_eps must be positive");
  require(p.averaging_window >= 1 && p.averaging_window % 2 == 1, "averaging_window must be odd");
}

// ------------------------------------------------------------ expansion

PolyExpansion polynomial_expansion(const Plane& frame, int window, double sigma) {
  require(window >= 3 && window % 2 == 1, "expansion window must be odd and >= 3");
  require(sigma > 0, "poly_sigma must be positive");
  require(window <= frame.rows() && window <= frame.cols(), "expansion window larger than frame");

  const int n = window / 2;
  const int rows = frame.rows();
  const int cols = frame.cols();
  std::vector<double> g(2 * n + 1);
  for (int i = -n; i <= n; ++i) g[i + n] = std::exp(-0.5 * i * i / (sigma * sigma));

  // Normal equations of the weighted fit with basis {1, x, y, x^2, y^2, xy}.
  Eigen::Matrix<double, 6, 6> G = Eigen::Matrix<double, 6, 6>::Zero();
  for (int y = -n; y <= n; ++y) {
    for (int x = -n; x <= n; ++x) {
      const double w = g[x + n] * g[y + n];
      const Eigen::Matrix<double, 6, 1> phi(1.0, x, y, double(x) * x, double(y) * y, double(x) * y);
      G += w * phi * phi.transpose();
    }
  }
  const Eigen::Matrix<double, 6, 6> Ginv = G.inverse();

  // Horizontal moments sum g(x) x^k f for k = 0..2.
  std::array<Plane, 3> hmom{Plane(rows, cols), Plane(rows, cols), Plane(rows, cols)};
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double m0 = 0, m1 = 0, m2 = 0;
      for (int x = -n; x <= n; ++x) {
        const double v = g[x + n] * frame(r, reflect_index(c + x, cols));
        m0 += v;
        m1 += v * x;
        m2 += v * x * x;
      }
      hmom[0](r, c) = m0;
      hmom[1](r, c) = m1;
      hmom[2](r, c) = m2;
    }
  }

  PolyExpansion out{Plane(rows, cols), Plane(rows, cols), Plane(rows, cols),
                    Plane(rows, cols), Plane(rows, cols), Plane(rows, cols)};
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Eigen::Matrix<double, 6, 1> m = Eigen::Matrix<double, 6, 1>::Zero();
      for (int y = -n; y <= n; ++y) {
        const int rr = reflect_index(r + y, rows);
        const double w = g[y + n];
        const double h0 = hmom[0](rr, c), h1 = hmom[1](rr, c), h2 = hmom[2](rr, c);
        m[0] += w * h0;
        m[1] += w * h1;
        m[2] += w * y * h0;
        m[3] += w * h2;
        m[4] += w * y * y * h0;
        m[5] += w * y * h1;
      }
      const Eigen::Matrix<double, 6, 1> coef = Ginv * m;
      out.c(r, c) = coef[0];
      out.bx(r, c) = coef[1];
      out.by(r, c) = coef[2];
      out.axx(r, c) = coef[3];
      out.ayy(r, c) = coef[4];
      out.axy(r, c) = 0.5 * coef[5];
    }
  }
  return out;
}

// ------------------------------------------------------------ flow

namespace {

Plane downsample(const Plane& image, double scale) {
  const Plane blurred = gaussian_blur(image, 0.5 / scale);
  const int rows = std::max(1, static_cast<int>(std::lround(image.rows() * scale)));
  const int cols = std::max(1, static_cast<int>(std::lround(image.cols() * scale)));
  return resize_bilinear(blurred, rows, cols);
}

// Ten planes of the pooled least-squares system G d = h per pixel.
struct Constraints {
  Plane g11, g12, g22, h1, h2;
};

Constraints build_constraints(const PolyExpansion& e0, const PolyExpansion& e1, const FlowField& flow) {
  const int rows = e0.c.rows();
  const int cols = e0.c.cols();
  Constraints k{Plane(rows, cols), Plane(rows, cols), Plane(rows, cols), Plane(rows, cols), Plane(rows, cols)};
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double du = flow.u(r, c);
      const double dv = flow.v(r, c);
      const double tc = c + du;
      const double tr = r + dv;
      // A target outside the second frame carries no information; the pooled
      // neighbourhood fills it in.
      if (tc < 0 || tr < 0 || tc > cols - 1 || tr > rows - 1) continue;
      const double a11 = 0.5 * (e0.axx(r, c) + sample_bilinear(e1.axx, tr, tc));
      const double a12 = 0.5 * (e0.axy(r, c) + sample_bilinear(e1.axy, tr, tc));
      const double a22 = 0.5 * (e0.ayy(r, c) + sample_bilinear(e1.ayy, tr, tc));
      const double db1 = -0.5 * (sample_bilinear(e1.bx, tr, tc) - e0.bx(r, c)) + a11 * du + a12 * dv;
      const double db2 = -0.5 * (sample_bilinear(e1.by, tr, tc) - e0.by(r, c)) + a12 * du + a22 * dv;
      k.g11(r, c) = a11 * a11 + a12 * a12;
      k.g12(r, c) = a12 * (a11 + a22);
      k.g22(r, c) = a12 * a12 + a22 * a22;
      k.h1(r, c) = a11 * db1 + a12 * db2;
      k.h2(r, c) = a12 * db1 + a22 * db2;
    }
  }
  return k;
}

void solve_flow(Constraints k, int averaging_window, double eps, FlowField& flow) {
  const int radius = averaging_window / 2;
  if (radius > 0) {
    const auto taps = gaussian_kernel(radius, 0.3 * radius);
    for (Plane* p : {&k.g11, &k.g12, &k.g22, &k.h1, &k.h2}) *p = convolve_separable(*p, taps, taps);
  }
  for (int r = 0; r < flow.rows(); ++r) {
    for (int c = 0; c < flow.cols(); ++c) {
      const double a = k.g11(r, c) + eps;
      const double b = k.g12(r, c);
      const double d = k.g22(r, c) + eps;
      const double det = a * d - b * b;
      double u = (d * k.h1(r, c) - b * k.h2(r, c)) / det;
      double v = (a * k.h2(r, c) - b * k.h1(r, c)) / det;
      if (!std::isfinite(u) || !std::isfinite(v)) u = v = 0.0;
      flow.u(r, c) = u;
      flow.v(r, c) = v;
    }
  }
}

}  // namespace

FlowField farneback_flow(const Plane& prev, const Plane& next, const FlowParams& params) {
  validate(params);
  require(prev.channels() == 1 && next.channels() == 1, "flow expects single-channel frames");
  require(prev.same_shape(next), "frames differ in shape");
  require(prev.rows() >= params.expansion_window && prev.cols() >= params.expansion_window,
          "frame smaller than the expansion window");

  // Levels too small for the expansion window are skipped.
  std::vector<Plane> pyr0{prev}, pyr1{next};
  for (int level = 1; level < params.pyramid_levels; ++level) {
    Plane a = downsample(pyr0.back(), params.pyramid_scale);
    if (a.rows() < params.expansion_window || a.cols() < params.expansion_window) break;
    pyr0.push_back(std::move(a));
    pyr1.push_back(downsample(pyr1.back(), params.pyramid_scale));
  }

  FlowField flow;
  for (int level = static_cast<int>(pyr0.size()) - 1; level >= 0; --level) {
    const Plane& f0 = pyr0[level];
    const Plane& f1 = pyr1[level];
    if (flow.u.empty()) {
      flow.u = Plane(f0.rows(), f0.cols());
      flow.v = Plane(f0.rows(), f0.cols());
    } else {
      const double sx = static_cast<double>(f0.cols()) / flow.cols();
      const double sy = static_cast<double>(f0.rows()) / flow.rows();
      flow.u = resize_bilinear(flow.u, f0.rows(), f0.cols());
      flow.v = resize_bilinear(flow.v, f0.rows(), f0.cols());
      for (auto& x : flow.u.pixels()) x *= sx;
      for (auto& y : flow.v.pixels()) y *= sy;
    }
    const PolyExpansion e0 = polynomial_expansion(f0, params.expansion_window, params.poly_sigma);
    const PolyExpansion e1 = polynomial_expansion(f1, params.expansion_window, params.poly_sigma);
    for (int it = 0; it < params.iterations_per_level; ++it) {
      solve_flow(build_constraints(e0, e1, flow), params.averaging_window, params.regularization_eps, flow);
    }
  }
  return flow;
}

FlowField farneback_flow(const Image8& prev, const Image8& next, const FlowParams& params) {
  return farneback_flow(to_gray_plane(prev), to_gray_plane(next), params);
}

double mean_flow_magnitude(const FlowField& flow, std::optional<Rect> roi) {
  const Rect area = roi.value_or(Rect{0, 0, flow.cols(), flow.rows()});
  if (area.empty()) fail(Errc::validation, "empty region of interest");
  require(area.inside(flow.rows(), flow.cols()), "region of interest outside flow field");
  double sum = 0;
  for (int r = area.y; r < area.y + area.h; ++r)
    for (int c = area.x; c < area.x + area.w; ++c) sum += std::hypot(flow.u(r, c), flow.v(r, c));
  return sum / (static_cast<double>(area.w) * area.h);
}

}  // namespace earmotion
