#include "tofrgbd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tofrgbd/error.hpp"
#include "tofrgbd/imaging.hpp"

namespace tofrgbd {

namespace {

// Fixed-point refinement of the virtual-to-ToF correspondence.
constexpr int kMaxRefineIterations = 200;
constexpr double kRefineTolerance = 1e-12;  // pixels
// Bilinear support whose depths spread by more than this ratio straddles an
// occlusion boundary; such pixels are masked out.
constexpr double kMaxSupportDepthRatio = 1.10;

double ray_norm(double x, double y, const WeakCalibParams& p, PrincipalPoint c) noexcept {
  const double a = (x - c.x) / p.fx;
  const double b = (y - c.y) / p.fy;
  return std::sqrt(1.0 + a * a + b * b);
}

double uniform(std::mt19937_64& rng, double half_range) {
  if (half_range == 0.0) return 0.0;
  std::uniform_real_distribution<double> dist(-half_range, half_range);
  return dist(rng);
}

// Every tap with nonzero bilinear weight at (x, y) lies on a valid pixel and
// the tap depths do not straddle a discontinuity.
bool support_is_consistent(const Image& depth, const Mask& mask, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = (x - x0) > 0.0 ? x0 + 1 : x0;
  const int y1 = (y - y0) > 0.0 ? y0 + 1 : y0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int ty = y0; ty <= y1; ++ty) {
    for (int tx = x0; tx <= x1; ++tx) {
      if (!depth.contains(tx, ty) || !mask(tx, ty)) return false;
      const double z = depth.at(tx, ty);
      if (!(z > 0.0)) return false;
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
  }
  return hi <= kMaxSupportDepthRatio * lo;
}

}  // namespace

void WeakCalibParams::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw DomainError("focal lengths must be positive (fx=" + std::to_string(fx) +
                      ", fy=" + std::to_string(fy) + ")");
  }
  if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(tx) || !std::isfinite(ty) ||
      !std::isfinite(cx) || !std::isfinite(cy)) {
    throw DomainError("calibration parameters must be finite");
  }
}

PrincipalPoint image_center(int width, int height) noexcept {
  return {0.5 * (width - 1), 0.5 * (height - 1)};
}

FlowField flow_from_depth(const Image& depth, const WeakCalibParams& params) {
  return flow_from_depth(depth, params, Mask(depth.width(), depth.height(), true));
}

FlowField flow_from_depth(const Image& depth, const WeakCalibParams& params,
                          const Mask& valid) {
  params.validate();
  if (depth.channels() != 1) throw ContractError("flow_from_depth expects a depth raster");
  require_same_size(depth, valid, "flow_from_depth");
  FlowField flow(depth.width(), depth.height());
  const double kx = params.fx * params.tx;
  const double ky = params.fy * params.ty;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!valid(x, y)) continue;
      const double z = depth.at(x, y);
      if (!(z > 0.0)) {
        throw DomainError("flow_from_depth: non-positive depth " + std::to_string(z) +
                          " at (" + std::to_string(x) + ", " + std::to_string(y) + ")");
      }
      flow.u(x, y) = kx / z + params.cx;
      flow.v(x, y) = ky / z + params.cy;
    }
  }
  return flow;
}

Image plane_correct(const Image& radial, const WeakCalibParams& params,
                    PrincipalPoint principal) {
  params.validate();
  if (radial.channels() != 1) throw ContractError("plane_correct expects a depth raster");
  Image out(radial.width(), radial.height());
  for (int y = 0; y < radial.height(); ++y) {
    for (int x = 0; x < radial.width(); ++x) {
      const double r = radial.at(x, y);
      if (r < 0.0) throw DomainError("plane_correct: negative radial distance");
      out.at(x, y) = r / ray_norm(x, y, params, principal);
    }
  }
  return out;
}

Image radial_from_plane(const Image& depth, const WeakCalibParams& params,
                        PrincipalPoint principal) {
  params.validate();
  if (depth.channels() != 1) throw ContractError("radial_from_plane expects a depth raster");
  Image out(depth.width(), depth.height());
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double z = depth.at(x, y);
      if (z < 0.0) throw DomainError("radial_from_plane: negative depth");
      out.at(x, y) = z * ray_norm(x, y, params, principal);
    }
  }
  return out;
}

void PerturbationConfig::validate() const {
  if (!(principal_frac >= 0.0) || !(translation_frac >= 0.0)) {
    throw DomainError("perturbation fractions must be non-negative");
  }
  if (!std::isfinite(t_ref_x) || !std::isfinite(t_ref_y) || !std::isfinite(principal_frac) ||
      !std::isfinite(translation_frac)) {
    throw DomainError("perturbation config must be finite");
  }
}

CalibPerturbation sample_perturbation(const PerturbationConfig& cfg, int width, int height) {
  std::mt19937_64 rng(cfg.seed);
  return sample_perturbation(cfg, width, height, rng);
}

CalibPerturbation sample_perturbation(const PerturbationConfig& cfg, int width, int height,
                                      std::mt19937_64& rng) {
  cfg.validate();
  if (width <= 0 || height <= 0) throw DimensionError("sample_perturbation: empty image size");
  CalibPerturbation p;
  p.cx = uniform(rng, cfg.principal_frac * width);
  p.cy = uniform(rng, cfg.principal_frac * height);
  p.tx = uniform(rng, cfg.translation_frac * std::abs(cfg.t_ref_x));
  p.ty = uniform(rng, cfg.translation_frac * std::abs(cfg.t_ref_y));
  return p;
}

WeakCalibParams with_perturbation(WeakCalibParams base, const CalibPerturbation& p) noexcept {
  base.tx = p.tx;
  base.ty = p.ty;
  base.cx = p.cx;
  base.cy = p.cy;
  return base;
}

void DataSample::validate() const {
  calib.validate();
  if (gt_depth.channels() != 1 || tof_depth.channels() != 1 || amplitude.channels() != 1) {
    throw ContractError("depth and amplitude rasters must have one channel");
  }
  if (rgb.channels() != 3) throw ContractError("rgb raster must have three channels");
  require_same_size(gt_depth, tof_depth, "sample tof_depth");
  require_same_size(gt_depth, amplitude, "sample amplitude");
  require_same_size(gt_depth, rgb, "sample rgb");
  require_same_size(gt_depth, mask, "sample mask");
  if (gt_flow) require_same_size(gt_depth, *gt_flow, "sample gt_flow");
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      // Once misaligned, the mask lives at the virtual view and says nothing
      // about the ToF-view rasters.
      const bool tof_ok = !aligned || tof_depth.at(x, y) > 0.0;
      if (mask(x, y) && !(gt_depth.at(x, y) > 0.0 && tof_ok)) {
        throw DomainError("sample: non-positive depth on valid pixel (" + std::to_string(x) +
                          ", " + std::to_string(y) + ")");
      }
    }
  }
}

DataSample augment_sample(const DataSample& s, const CalibPerturbation& perturb) {
  s.validate();
  if (!s.aligned) throw ContractError("augment_sample expects an aligned sample");
  if (s.mask.count() == 0) throw DegenerateError("augment_sample: empty valid mask");

  const WeakCalibParams params = with_perturbation(s.calib, perturb);
  const double kx = params.fx * params.tx;
  const double ky = params.fy * params.ty;
  const int w = s.width();
  const int h = s.height();
  const auto at = [w](int x, int y) {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
           static_cast<std::size_t>(x);
  };

  // Nearest-pixel z-buffered splat of every pixel carrying depth.
  std::vector<double> zbuf(s.gt_depth.pixel_count(), std::numeric_limits<double>::infinity());
  std::vector<long> source(s.gt_depth.pixel_count(), -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double z = s.gt_depth.at(x, y);
      if (!(z > 0.0)) continue;
      const long qx = std::lround(x + kx / z + params.cx);
      const long qy = std::lround(y + ky / z + params.cy);
      if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
      const std::size_t q = at(static_cast<int>(qx), static_cast<int>(qy));
      if (z < zbuf[q]) {
        zbuf[q] = z;
        source[q] = static_cast<long>(at(x, y));
      }
    }
  }

  DataSample out;
  out.rgb = Image(w, h, 3);
  out.amplitude = s.amplitude;
  out.tof_depth = s.tof_depth;
  out.gt_depth = Image(w, h);
  out.mask = Mask(w, h, false);
  out.calib = params;
  // A zero drift leaves the pair aligned.
  out.aligned = perturb == CalibPerturbation{};
  out.seed = s.seed;
  FlowField flow(w, h);

  double depth_sample[1];
  for (int qy = 0; qy < h; ++qy) {
    for (int qx = 0; qx < w; ++qx) {
      const long src = source[at(qx, qy)];
      if (src < 0) continue;
      const double sx = static_cast<double>(src % w);
      const double sy = static_cast<double>(src / w);

      // Solve pos = q - W(z(pos)) starting from the splat source, so that the
      // analytic inverse flow lands exactly where the depth was sampled.
      double px = sx;
      double py = sy;
      bool converged = false;
      for (int it = 0; it < kMaxRefineIterations; ++it) {
        sample_bilinear_into(s.gt_depth, px, py, Boundary::kClamp, depth_sample);
        const double z = depth_sample[0];
        if (!(z > 0.0)) break;
        const double nx = qx - (kx / z + params.cx);
        const double ny = qy - (ky / z + params.cy);
        const double step = std::max(std::abs(nx - px), std::abs(ny - py));
        px = nx;
        py = ny;
        if (step <= kRefineTolerance) {
          converged = true;
          break;
        }
      }
      if (!converged) continue;
      if (px < 0.0 || py < 0.0 || px > w - 1 || py > h - 1) continue;

      const bool in_bounds =
          sample_bilinear_into(s.gt_depth, px, py, Boundary::kClamp, depth_sample);
      const double z = depth_sample[0];
      if (!in_bounds || !(z > 0.0)) continue;
      out.gt_depth.at(qx, qy) = z;
      sample_bilinear_into(s.rgb, px, py, Boundary::kClamp, out.rgb.pixel(qx, qy));
      flow.u(qx, qy) = -(kx / z + params.cx);
      flow.v(qx, qy) = -(ky / z + params.cy);

      const bool near_source = std::abs(px - sx) <= 1.0 && std::abs(py - sy) <= 1.0;
      out.mask.set(qx, qy, near_source && support_is_consistent(s.gt_depth, s.mask, px, py));
    }
  }
  out.gt_flow = std::move(flow);
  return out;
}

}  // namespace tofrgbd
