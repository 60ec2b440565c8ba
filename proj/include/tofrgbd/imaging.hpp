#pragma once

#include <span>
#include <vector>

#include "tofrgbd/image.hpp"

namespace tofrgbd {

/// How taps outside the raster are valued.
///  - kClamp: replicate the nearest edge pixel.
///  - kZero:  contribute zero.
enum class Boundary { kClamp, kZero };

struct BilinearSample {
  std::vector<double> values;  // one per channel
  bool in_bounds = false;
};

/// Bilinear lookup at continuous coordinates (x = column, y = row).
///
/// The cell is chosen with floor(), so an integer coordinate belongs to the
/// cell to its right/below. in_bounds is false as soon as a tap with nonzero
/// weight falls outside the raster, i.e. unless 0 <= x <= w-1 and 0 <= y <= h-1.
BilinearSample sample_bilinear(const Image& img, double x, double y,
                               Boundary boundary = Boundary::kClamp);

// Same lookup writing into a caller-provided span of img.channels() values.
bool sample_bilinear_into(const Image& img, double x, double y, Boundary boundary,
                          std::span<double> out) noexcept;

struct WarpResult {
  Image image;
  Mask valid;
};

/// Backward warp: out(m, n) = img(m + u(m, n), n + v(m, n)).
WarpResult warp_image(const Image& img, const FlowField& flow,
                      Boundary boundary = Boundary::kClamp);

/// Partial derivatives of warp_image's output w.r.t. the flow, per pixel and
/// channel. At integer sample coordinates the right/lower cell is used.
struct WarpGradient {
  Image d_u;
  Image d_v;
};

WarpGradient warp_gradient(const Image& img, const FlowField& flow,
                           Boundary boundary = Boundary::kClamp);

struct SobelResult {
  Image gx;
  Image gy;
};

/// 3x3 Sobel responses with replicate padding, unnormalized:
///   gx = [[-1,0,1],[-2,0,2],[-1,0,1]] applied as a correlation, gy its transpose.
SobelResult sobel(const Image& img);

/// Adjoint of sobel(): returns gx^T a + gy^T b for per-pixel cotangents a, b.
Image sobel_adjoint(const Image& grad_gx, const Image& grad_gy);

}  // namespace tofrgbd
