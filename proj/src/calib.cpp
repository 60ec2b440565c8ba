#include "tofrgbd/calib.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "summation.hpp"
#include "tofrgbd/error.hpp"

namespace tofrgbd::calib {

namespace {

using detail::KahanSum;

// Normal equations of one axis: [[sss, ss], [ss, n]] [t c]^T = [ssu, su]^T,
// with s = 1/D. Both axes share the matrix.
struct NormalSystem {
  double sss = 0.0;
  double ss = 0.0;
  double n = 0.0;
  double det = 0.0;
  double condition = 0.0;

  // Inverse applied to (a, b).
  void solve(double a, double b, double& t, double& c) const noexcept {
    t = (n * a - ss * b) / det;
    c = (-ss * a + sss * b) / det;
  }
};

bool participates(const FlowField& flow, const Image& depth, const Mask& mask, int x, int y) {
  return mask(x, y) && depth.at(x, y) > 0.0 && std::isfinite(flow.u(x, y)) &&
         std::isfinite(flow.v(x, y));
}

void check_inputs(const FlowField& flow, const Image& depth, const Mask& mask) {
  if (depth.channels() != 1) throw ContractError("calibration expects a one-channel depth");
  require_same_size(depth, flow, "estimate_params flow");
  require_same_size(depth, mask, "estimate_params mask");
}

NormalSystem make_system(const FlowField& flow, const Image& depth, const Mask& mask) {
  KahanSum sss;
  KahanSum ss;
  std::size_t n = 0;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!participates(flow, depth, mask, x, y)) continue;
      const double s = 1.0 / depth.at(x, y);
      sss += s * s;
      ss += s;
      ++n;
    }
  }
  if (n < 2) {
    throw DegenerateError("estimate_params needs at least 2 valid pixels, got " +
                          std::to_string(n));
  }
  NormalSystem sys;
  sys.sss = sss.value();
  sys.ss = ss.value();
  sys.n = static_cast<double>(n);
  sys.det = sys.sss * sys.n - sys.ss * sys.ss;

  const double half_trace = 0.5 * (sys.sss + sys.n);
  const double half_diff = 0.5 * (sys.sss - sys.n);
  const double lmax = half_trace + std::hypot(half_diff, sys.ss);
  const double lmin = sys.det / lmax;
  sys.condition = lmin > 0.0 ? lmax / lmin : INFINITY;
  if (!(sys.det > 0.0) || !(sys.condition <= kMaxCondition)) {
    throw DegenerateError("estimate_params: depth is constant on the mask (condition " +
                          std::to_string(sys.condition) + ")");
  }
  return sys;
}

}  // namespace

CalibEstimate estimate_params(const FlowField& flow, const Image& depth, const Mask& mask) {
  check_inputs(flow, depth, mask);
  const NormalSystem sys = make_system(flow, depth, mask);

  KahanSum su, sv, ssu, ssv;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!participates(flow, depth, mask, x, y)) continue;
      const double s = 1.0 / depth.at(x, y);
      su += flow.u(x, y);
      sv += flow.v(x, y);
      ssu += s * flow.u(x, y);
      ssv += s * flow.v(x, y);
    }
  }

  CalibEstimate est;
  sys.solve(ssu.value(), su.value(), est.tx, est.cx);
  sys.solve(ssv.value(), sv.value(), est.ty, est.cy);
  est.pixel_count = static_cast<std::size_t>(sys.n);
  est.condition = sys.condition;

  KahanSum sq;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!participates(flow, depth, mask, x, y)) continue;
      const double s = 1.0 / depth.at(x, y);
      const double ru = flow.u(x, y) - (est.tx * s + est.cx);
      const double rv = flow.v(x, y) - (est.ty * s + est.cy);
      sq += ru * ru + rv * rv;
    }
  }
  est.residual_rms = std::sqrt(sq.value() / sys.n);
  return est;
}

FlowField convt_flow(const Image& depth, const CalibEstimate& est) {
  return convt_flow(depth, est, Mask(depth.width(), depth.height(), true));
}

FlowField convt_flow(const Image& depth, const CalibEstimate& est, const Mask& mask) {
  if (depth.channels() != 1) throw ContractError("convt_flow expects a one-channel depth");
  require_same_size(depth, mask, "convt_flow");
  FlowField flow(depth.width(), depth.height());
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!mask(x, y)) continue;
      const double z = depth.at(x, y);
      if (!(z > 0.0)) {
        throw DomainError("convt_flow: non-positive depth at (" + std::to_string(x) + ", " +
                          std::to_string(y) + ")");
      }
      flow.u(x, y) = est.tx / z + est.cx;
      flow.v(x, y) = est.ty / z + est.cy;
    }
  }
  return flow;
}

CalibJacobian estimate_params_jacobian(const FlowField& flow, const Image& depth,
                                       const Mask& mask) {
  const CalibEstimate est = estimate_params(flow, depth, mask);
  const NormalSystem sys = make_system(flow, depth, mask);
  const int w = depth.width();
  const int h = depth.height();
  CalibJacobian jac{Image(w, h, 4), Image(w, h, 4), Image(w, h, 4)};

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!participates(flow, depth, mask, x, y)) continue;
      const double z = depth.at(x, y);
      const double s = 1.0 / z;

      // d(t, c)/dW(p) = M^-1 (s_p, 1)
      double dt = 0.0;
      double dc = 0.0;
      sys.solve(s, 1.0, dt, dc);
      jac.wrt_flow_u.at(x, y, kTx) = dt;
      jac.wrt_flow_u.at(x, y, kCx) = dc;
      jac.wrt_flow_v.at(x, y, kTy) = dt;
      jac.wrt_flow_v.at(x, y, kCy) = dc;

      // d(t, c)/ds_p = M^-1 (r_p - s_p t, -t), r_p the fit residual;
      // ds_p/dD_p = -1/D_p^2.
      const double ds_dz = -s * s;
      const double ru = flow.u(x, y) - (est.tx * s + est.cx);
      const double rv = flow.v(x, y) - (est.ty * s + est.cy);
      sys.solve(ru - s * est.tx, -est.tx, dt, dc);
      jac.wrt_depth.at(x, y, kTx) = dt * ds_dz;
      jac.wrt_depth.at(x, y, kCx) = dc * ds_dz;
      sys.solve(rv - s * est.ty, -est.ty, dt, dc);
      jac.wrt_depth.at(x, y, kTy) = dt * ds_dz;
      jac.wrt_depth.at(x, y, kCy) = dc * ds_dz;
    }
  }
  return jac;
}

WeakCalibParams to_physical(const CalibEstimate& est, double fx, double fy) {
  WeakCalibParams p;
  p.fx = fx;
  p.fy = fy;
  p.validate();
  p.tx = est.tx / fx;
  p.ty = est.ty / fy;
  p.cx = est.cx;
  p.cy = est.cy;
  return p;
}

}  // namespace tofrgbd::calib
