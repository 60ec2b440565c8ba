#pragma once

#include <cstddef>

#include "tofrgbd/geometry.hpp"
#include "tofrgbd/image.hpp"

namespace tofrgbd::calib {

/// Normal-equation condition numbers above this are treated as rank-deficient.
inline constexpr double kMaxCondition = 1e12;

/// Least-squares fit of flow ~ (tx/D + cx, ty/D + cy).
///
/// Focal lengths are absorbed: tx, ty are in pixel * depth units. Use
/// to_physical() to divide them back out.
struct CalibEstimate {
  double tx = 0.0;
  double ty = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double residual_rms = 0.0;  // pixels, RMS end-point residual over participating pixels
  std::size_t pixel_count = 0;
  double condition = 0.0;  // 2-norm condition number of the 2x2 normal matrix
};

/// Solves
///   argmin sum_p || W(p) - (tx/D(p) + cx, ty/D(p) + cy) ||^2
/// over pixels with mask = 1, D > 0 and finite flow. The x and y parts decouple
/// into two 2-unknown systems sharing the design columns [1/D, 1].
///
/// Throws DegenerateError with fewer than two participating pixels or when
/// the depth is (numerically) constant on them.
CalibEstimate estimate_params(const FlowField& flow, const Image& depth, const Mask& mask);

/// W_convt(p) = (tx/D(p) + cx, ty/D(p) + cy). Non-positive depth throws.
FlowField convt_flow(const Image& depth, const CalibEstimate& est);

/// As above; pixels outside `mask` get zero flow and are not checked.
FlowField convt_flow(const Image& depth, const CalibEstimate& est, const Mask& mask);

enum Param : int { kTx = 0, kTy = 1, kCx = 2, kCy = 3 };

/// Sensitivities of the estimate to every input pixel. Each raster has four
/// channels indexed by Param; non-participating pixels are exactly zero.
struct CalibJacobian {
  Image wrt_flow_u;
  Image wrt_flow_v;
  Image wrt_depth;
};

CalibJacobian estimate_params_jacobian(const FlowField& flow, const Image& depth,
                                       const Mask& mask);

/// Splits the focal lengths back out of the absorbed translations.
WeakCalibParams to_physical(const CalibEstimate& est, double fx, double fy);

}  // namespace tofrgbd::calib
