#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "tofrgbd/image.hpp"

namespace tofrgbd {

/// Weak-calibration model between the RGB camera and the (rectified) ToF
/// sensor: focal lengths are fixed; in-plane translation and principal-point
/// offset drift.
struct WeakCalibParams {
  double fx = 1.0;  // pixels
  double fy = 1.0;  // pixels
  double tx = 0.0;  // scene units (meters)
  double ty = 0.0;
  double cx = 0.0;  // pixels
  double cy = 0.0;

  void validate() const;

  friend bool operator==(const WeakCalibParams&, const WeakCalibParams&) = default;
};

struct PrincipalPoint {
  double x = 0.0;
  double y = 0.0;
};

// Image center in pixel-center coordinates: ((w-1)/2, (h-1)/2).
PrincipalPoint image_center(int width, int height) noexcept;

/// Correspondence flow from the first view to the second for a scene at
/// perpendicular depth z: (fx*tx/z + cx, fy*ty/z + cy).
///
/// Every pixel is evaluated; a non-positive depth throws DomainError.
FlowField flow_from_depth(const Image& depth, const WeakCalibParams& params);

/// As above, but pixels outside `valid` get zero flow and are never checked.
FlowField flow_from_depth(const Image& depth, const WeakCalibParams& params, const Mask& valid);

/// Radial (point-to-point) distance to perpendicular (point-to-plane) depth.
/// Zero marks an invalid pixel and passes through; negative values throw.
Image plane_correct(const Image& radial, const WeakCalibParams& params, PrincipalPoint principal);

/// Inverse of plane_correct.
Image radial_from_plane(const Image& depth, const WeakCalibParams& params,
                        PrincipalPoint principal);

struct PerturbationConfig {
  double principal_frac = 0.025;   // c ranges over +-frac * image size
  double translation_frac = 0.30;  // t ranges over +-frac * |t_ref|
  double t_ref_x = 0.0;            // largest |t_x| among the devices, meters
  double t_ref_y = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Drift of the weakly-calibrated parameters relative to the aligned state.
struct CalibPerturbation {
  double tx = 0.0;
  double ty = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  friend bool operator==(const CalibPerturbation&, const CalibPerturbation&) = default;
};

// Uniform draw over the configured ranges, seeded from cfg.seed.
CalibPerturbation sample_perturbation(const PerturbationConfig& cfg, int width, int height);

// Uniform draw using a caller-owned generator (cfg.seed is ignored).
CalibPerturbation sample_perturbation(const PerturbationConfig& cfg, int width, int height,
                                      std::mt19937_64& rng);

WeakCalibParams with_perturbation(WeakCalibParams base, const CalibPerturbation& p) noexcept;

/// One {amplitude, RGB, ToF depth, ground-truth depth, mask} record.
struct DataSample {
  Image rgb;        // 3 channels in [0, 1]
  Image amplitude;  // 1 channel, normalized to [0, 1]
  Image tof_depth;  // meters, perpendicular depth
  Image gt_depth;   // meters, perpendicular depth
  Mask mask;
  WeakCalibParams calib;
  bool aligned = true;
  std::uint64_t seed = 0;
  std::optional<FlowField> gt_flow;

  int width() const noexcept { return gt_depth.width(); }
  int height() const noexcept { return gt_depth.height(); }

  // Throws DimensionError / DomainError when the record is inconsistent.
  void validate() const;
};

/// Turns an aligned sample into a misaligned one as seen by a virtual RGB
/// camera displaced by `perturb`.
///
/// gt_depth and rgb move to the virtual view; amplitude and tof_depth stay
/// put. gt_flow maps virtual-RGB pixels to ToF pixels, i.e. it is the
/// negated flow_from_depth relation evaluated at the warped depth, so
/// warp_image(original, gt_flow) reproduces the virtual-view rasters.
/// Pixels not reached by a splat, occluded, or straddling a depth
/// discontinuity are masked out.
DataSample augment_sample(const DataSample& s, const CalibPerturbation& perturb);

}  // namespace tofrgbd
