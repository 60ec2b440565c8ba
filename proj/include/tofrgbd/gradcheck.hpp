#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tofrgbd/image.hpp"
#include "tofrgbd/imaging.hpp"
#include "tofrgbd/kpn.hpp"

namespace tofrgbd::gradcheck {

/// Outcome of comparing analytic derivatives with central differences.
///
/// Each compared block (a pixel's channel vector for warp, a Jacobian column
/// otherwise) scores ||a - n|| / max(||a||, ||n||, kAbsFloor).
struct Report {
  std::string op;
  std::string detail;
  double eps = 0.0;
  double max_rel_error = 0.0;
  std::size_t blocks = 0;
  std::size_t skipped = 0;  // blocks whose difference stencil straddles a kink
};

inline constexpr double kAbsFloor = 1e-8;

/// d warp_image / d(u, v) at every pixel. Pixels whose sample coordinate lies
/// within 2 eps of a cell edge are skipped (bilinear is only piecewise smooth).
Report check_warp(const Image& img, const FlowField& flow, double eps,
                  Boundary boundary = Boundary::kClamp);

/// Every column of estimate_params_jacobian (per pixel: u, v, depth).
Report check_calib(const FlowField& flow, const Image& depth, const Mask& mask, double eps);

/// Every column of the apply() Jacobian: each raw weight, bias and depth value.
Report check_kpn(const Image& depth, const kpn::KernelField& kf, kpn::Variant variant,
                 double eps);

struct WarpInstance {
  Image img;
  FlowField flow;
};
struct CalibInstance {
  FlowField flow;
  Image depth;
  Mask mask;
};
struct KpnInstance {
  Image depth;
  kpn::KernelField kernels;
};

// Sample coordinates stay at least 0.1 px away from cell edges and inside the raster.
WarpInstance random_warp_instance(std::mt19937_64& rng, int width, int height, int channels);
// Flow from random parameters plus noise, so the fit has nonzero residuals.
CalibInstance random_calib_instance(std::mt19937_64& rng, int width, int height);
// Weights with |w| in [0.1, 1] and random signs, so no stencil crosses |w|'s kink.
KpnInstance random_kpn_instance(std::mt19937_64& rng, int width, int height, int k);

/// Seeded battery used by the CLI: `op` is "warp", "calib", "kpn" or "all";
/// one report per op (per variant for kpn) with the worst error over
/// `instances` random instances.
std::vector<Report> run_suite(const std::string& op, std::uint64_t seed, int instances,
                              double eps);

}  // namespace tofrgbd::gradcheck
