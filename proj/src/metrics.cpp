#include "tofrgbd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "summation.hpp"
#include "tofrgbd/error.hpp"
#include "tofrgbd/imaging.hpp"

namespace tofrgbd::metrics {

namespace {

using detail::KahanSum;

void check_depth_pair(const Image& a, const Image& b, const Mask& mask, const char* what) {
  if (a.channels() != 1 || b.channels() != 1) {
    throw ContractError(std::string(what) + " expects one-channel rasters");
  }
  require_same_size(a, b, what);
  require_same_size(a, mask, what);
}

double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// sign() with magnitudes at or below `floor` counted as exact zeros.
double sign(double v, double floor) noexcept { return std::abs(v) <= floor ? 0.0 : sign(v); }

// Residual magnitudes treated as exact zeros by the subgradient: 1e-10 of
// the data scale, above both double roundoff and the 1e-12 kernel
// normalization guard.
double zero_floor(const Image& a, const Image& b, const Mask& mask) {
  double scale = 0.0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!mask(x, y)) continue;
      scale = std::max({scale, std::abs(a.at(x, y)), std::abs(b.at(x, y))});
    }
  }
  return 1e-10 * scale;
}

// a - b on the mask, zero elsewhere, so masked-out values never reach the
// Sobel stencil of a valid neighbor.
Image masked_difference(const Image& a, const Image& b, const Mask& mask) {
  Image d(a.width(), a.height());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (mask(x, y)) d.at(x, y) = a.at(x, y) - b.at(x, y);
    }
  }
  return d;
}

}  // namespace

double aepe(const FlowField& pred, const FlowField& gt, const Mask& mask) {
  require_same_size(pred.image(), gt.image(), "aepe");
  require_same_size(pred.image(), mask, "aepe");
  const std::size_t n = mask.count();
  if (n == 0) throw DegenerateError("aepe: empty mask");
  KahanSum sum;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!mask(x, y)) continue;
      sum += std::hypot(pred.u(x, y) - gt.u(x, y), pred.v(x, y) - gt.v(x, y));
    }
  }
  return sum.value() / static_cast<double>(n);
}

double flow_loss_multiscale(std::span<const FlowField> preds, std::span<const FlowField> gts,
                            std::span<const double> alphas, std::span<const Mask> masks) {
  if (preds.size() != gts.size() || preds.size() != alphas.size() ||
      preds.size() != masks.size()) {
    throw ContractError("flow_loss_multiscale: scale counts differ (" +
                        std::to_string(preds.size()) + " preds, " + std::to_string(gts.size()) +
                        " gts, " + std::to_string(alphas.size()) + " weights, " +
                        std::to_string(masks.size()) + " masks)");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const FlowField& p = preds[s];
    const FlowField& g = gts[s];
    require_same_size(p.image(), g.image(), "flow_loss_multiscale");
    require_same_size(p.image(), masks[s], "flow_loss_multiscale");
    const std::size_t n = masks[s].count();
    if (n == 0) continue;
    KahanSum sum;
    for (int y = 0; y < p.height(); ++y) {
      for (int x = 0; x < p.width(); ++x) {
        if (!masks[s](x, y)) continue;
        sum += std::abs(p.u(x, y) - g.u(x, y)) + std::abs(p.v(x, y) - g.v(x, y));
      }
    }
    total += alphas[s] / static_cast<double>(n) * sum.value();
  }
  return total;
}

std::vector<double> default_scale_weights(std::size_t scales) {
  return std::vector<double>(scales, 1.0);
}

DepthLoss depth_loss(const Image& pred, const Image& gt, const Mask& mask, double lambda) {
  check_depth_pair(pred, gt, mask, "depth_loss");
  const std::size_t n = mask.count();
  if (n == 0) throw DegenerateError("depth_loss: empty mask");
  const Image err = masked_difference(pred, gt, mask);
  const SobelResult g = sobel(err);
  KahanSum data;
  KahanSum grad;
  for (int y = 0; y < err.height(); ++y) {
    for (int x = 0; x < err.width(); ++x) {
      if (!mask(x, y)) continue;
      data += std::abs(err.at(x, y));
      grad += std::abs(g.gx.at(x, y)) + std::abs(g.gy.at(x, y));
    }
  }
  DepthLoss loss;
  loss.data = data.value() / static_cast<double>(n);
  loss.gradient = grad.value() / static_cast<double>(n);
  loss.total = loss.data + lambda * loss.gradient;
  return loss;
}

Image depth_loss_gradient(const Image& pred, const Image& gt, const Mask& mask, double lambda) {
  check_depth_pair(pred, gt, mask, "depth_loss_gradient");
  const std::size_t n = mask.count();
  if (n == 0) throw DegenerateError("depth_loss_gradient: empty mask");
  const double inv_n = 1.0 / static_cast<double>(n);
  const Image err = masked_difference(pred, gt, mask);
  const SobelResult g = sobel(err);
  const double floor = zero_floor(pred, gt, mask);
  Image out(err.width(), err.height());
  Image cot_x(err.width(), err.height());
  Image cot_y(err.width(), err.height());
  for (int y = 0; y < err.height(); ++y) {
    for (int x = 0; x < err.width(); ++x) {
      if (!mask(x, y)) continue;
      out.at(x, y) = inv_n * sign(err.at(x, y), floor);
      cot_x.at(x, y) = lambda * inv_n * sign(g.gx.at(x, y), floor);
      cot_y.at(x, y) = lambda * inv_n * sign(g.gy.at(x, y), floor);
    }
  }
  const Image back = sobel_adjoint(cot_x, cot_y);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (mask(x, y)) out.at(x, y) += back.at(x, y);
    }
  }
  return out;
}

QuantileReport quantile_mae(const Image& input_depth, const Image& pred, const Image& gt,
                            const Mask& mask, double range_limit) {
  check_depth_pair(pred, gt, mask, "quantile_mae");
  check_depth_pair(input_depth, gt, mask, "quantile_mae");

  struct Entry {
    double input_error;
    double pred_error;
  };
  std::vector<Entry> entries;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!mask(x, y) || !(gt.at(x, y) < range_limit)) continue;
      entries.push_back({std::abs(input_depth.at(x, y) - gt.at(x, y)),
                         std::abs(pred.at(x, y) - gt.at(x, y))});
    }
  }
  const std::size_t n = entries.size();
  if (n < 4) {
    throw DegenerateError("quantile_mae needs at least 4 valid in-range pixels, got " +
                          std::to_string(n));
  }
  // Entries are already in row-major order, so a stable sort breaks ties by index.
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.input_error < b.input_error;
  });

  const std::size_t b1 = n / 4;
  const std::size_t b2 = n / 2;
  const std::size_t b3 = (3 * n) / 4;
  const auto class_mae = [&](std::size_t lo, std::size_t hi) {
    if (hi <= lo) return 0.0;
    KahanSum s;
    for (std::size_t i = lo; i < hi; ++i) s += entries[i].pred_error;
    return s.value() / static_cast<double>(hi - lo);
  };

  QuantileReport r;
  r.mae_low = class_mae(0, b1);
  r.mae_mid = class_mae(b1, b2);
  r.mae_high = class_mae(b2, b3);
  r.mae_outlier = class_mae(b3, n);
  r.mae_all = class_mae(0, n);
  r.outlier_fraction = static_cast<double>(n - b3) / static_cast<double>(n);
  r.range_limit = range_limit;
  r.pixel_count = n;
  return r;
}

double masked_mae(const Image& a, const Image& b, const Mask& mask) {
  check_depth_pair(a, b, mask, "masked_mae");
  const std::size_t n = mask.count();
  if (n == 0) throw DegenerateError("masked_mae: empty mask");
  KahanSum s;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (mask(x, y)) s += std::abs(a.at(x, y) - b.at(x, y));
    }
  }
  return s.value() / static_cast<double>(n);
}

double masked_mean_error(const Image& a, const Image& b, const Mask& mask) {
  check_depth_pair(a, b, mask, "masked_mean_error");
  const std::size_t n = mask.count();
  if (n == 0) throw DegenerateError("masked_mean_error: empty mask");
  KahanSum s;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (mask(x, y)) s += a.at(x, y) - b.at(x, y);
    }
  }
  return s.value() / static_cast<double>(n);
}

}  // namespace tofrgbd::metrics
