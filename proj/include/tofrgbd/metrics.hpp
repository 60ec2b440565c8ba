#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tofrgbd/image.hpp"

namespace tofrgbd::metrics {

inline constexpr double kDefaultLambda = 10.0;
inline constexpr double kDefaultRangeLimit = 4.0;  // meters

/// Mean end-point error over the mask. Empty mask throws DegenerateError.
double aepe(const FlowField& pred, const FlowField& gt, const Mask& mask);

/// sum_s alpha_s / N_s * sum_p |pred_s(p) - gt_s(p)|_1, N_s the valid count of
/// scale s. A scale with an empty mask contributes nothing.
double flow_loss_multiscale(std::span<const FlowField> preds, std::span<const FlowField> gts,
                            std::span<const double> alphas, std::span<const Mask> masks);

// Uniform per-scale weights.
std::vector<double> default_scale_weights(std::size_t scales);

struct DepthLoss {
  double total = 0.0;      // data + lambda * gradient
  double data = 0.0;       // (1/N) sum |pred - gt|
  double gradient = 0.0;   // (1/N) sum |Sx(pred - gt)| + |Sy(pred - gt)|, unweighted
};

/// Masked L1 depth loss plus lambda-weighted L1 on Sobel gradients; N is the
/// number of valid pixels.
DepthLoss depth_loss(const Image& pred, const Image& gt, const Mask& mask,
                     double lambda = kDefaultLambda);

/// Subgradient of depth_loss().total w.r.t. pred. sign(0) is taken as 0, and
/// residual or Sobel magnitudes below 1e-10 of max |pred|, |gt| on the mask
/// count as 0.
Image depth_loss_gradient(const Image& pred, const Image& gt, const Mask& mask,
                          double lambda = kDefaultLambda);

struct QuantileReport {
  double mae_low = 0.0;      // ranks [0, N/4)
  double mae_mid = 0.0;      // ranks [N/4, N/2)
  double mae_high = 0.0;     // ranks [N/2, 3N/4)
  double mae_outlier = 0.0;  // ranks [3N/4, N)
  double mae_all = 0.0;
  double outlier_fraction = 0.0;
  double range_limit = kDefaultRangeLimit;
  std::size_t pixel_count = 0;
};

/// Classes valid pixels with gt < range_limit by |input - gt| (stable, ties
/// by row-major index) and reports the MAE of |pred - gt| per class.
QuantileReport quantile_mae(const Image& input_depth, const Image& pred, const Image& gt,
                            const Mask& mask, double range_limit = kDefaultRangeLimit);

/// Masked mean absolute error. Empty mask throws DegenerateError.
double masked_mae(const Image& a, const Image& b, const Mask& mask);

/// Masked mean of (a - b).
double masked_mean_error(const Image& a, const Image& b, const Mask& mask);

}  // namespace tofrgbd::metrics
