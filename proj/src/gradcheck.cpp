#include "tofrgbd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tofrgbd/calib.hpp"
#include "tofrgbd/error.hpp"

namespace tofrgbd::gradcheck {

namespace {

double block_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0;
  double na = 0.0;
  double nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), kAbsFloor});
}

void record(Report& r, double err) {
  r.max_rel_error = std::max(r.max_rel_error, err);
  ++r.blocks;
}

bool near_cell_edge(double coord, double eps) {
  const double frac = coord - std::floor(coord);
  return frac < 2.0 * eps || frac > 1.0 - 2.0 * eps;
}

void check_eps(double eps) {
  if (!(eps > 0.0)) throw DomainError("gradcheck: eps must be positive");
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

Report check_warp(const Image& img, const FlowField& flow, double eps, Boundary boundary) {
  check_eps(eps);
  require_same_size(img, flow, "check_warp");
  Report r{"warp", "d/du, d/dv", eps};
  const WarpGradient g = warp_gradient(img, flow, boundary);
  const int c = img.channels();
  FlowField probe = flow;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int axis = 0; axis < 2; ++axis) {
        const double base = axis == 0 ? flow.u(x, y) : flow.v(x, y);
        const double coord = (axis == 0 ? x : y) + base;
        if (near_cell_edge(coord, eps)) {
          ++r.skipped;
          continue;
        }
        double& slot = axis == 0 ? probe.u(x, y) : probe.v(x, y);
        slot = base + eps;
        const Image plus = warp_image(img, probe, boundary).image;
        slot = base - eps;
        const Image minus = warp_image(img, probe, boundary).image;
        slot = base;
        std::vector<double> analytic(static_cast<std::size_t>(c));
        std::vector<double> numeric(static_cast<std::size_t>(c));
        for (int k = 0; k < c; ++k) {
          analytic[static_cast<std::size_t>(k)] = (axis == 0 ? g.d_u : g.d_v).at(x, y, k);
          numeric[static_cast<std::size_t>(k)] =
              (plus.at(x, y, k) - minus.at(x, y, k)) / (2.0 * eps);
        }
        record(r, block_error(analytic, numeric));
      }
    }
  }
  return r;
}

Report check_calib(const FlowField& flow, const Image& depth, const Mask& mask, double eps) {
  check_eps(eps);
  Report r{"calib", "d(t_x, t_y, c_x, c_y)/d(u, v, depth)", eps};
  const calib::CalibJacobian jac = calib::estimate_params_jacobian(flow, depth, mask);
  const auto params = [](const calib::CalibEstimate& e) {
    return std::vector<double>{e.tx, e.ty, e.cx, e.cy};
  };
  FlowField f = flow;
  Image d = depth;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!mask(x, y) || !(depth.at(x, y) > 0.0)) continue;
      for (int input = 0; input < 3; ++input) {
        double& slot = input == 0 ? f.u(x, y) : input == 1 ? f.v(x, y) : d.at(x, y);
        const double base = slot;
        const double h = input == 2 ? eps * std::max(1.0, std::abs(base)) : eps;
        slot = base + h;
        const auto plus = params(calib::estimate_params(f, d, mask));
        slot = base - h;
        const auto minus = params(calib::estimate_params(f, d, mask));
        slot = base;
        const Image& j = input == 0 ? jac.wrt_flow_u : input == 1 ? jac.wrt_flow_v : jac.wrt_depth;
        std::vector<double> analytic(4);
        std::vector<double> numeric(4);
        for (int p = 0; p < 4; ++p) {
          analytic[static_cast<std::size_t>(p)] = j.at(x, y, p);
          numeric[static_cast<std::size_t>(p)] =
              (plus[static_cast<std::size_t>(p)] - minus[static_cast<std::size_t>(p)]) / (2.0 * h);
        }
        record(r, block_error(analytic, numeric));
      }
    }
  }
  return r;
}

Report check_kpn(const Image& depth, const kpn::KernelField& kf, kpn::Variant variant,
                 double eps) {
  check_eps(eps);
  Report r{"kpn", std::string(kpn::name(variant)), eps};
  const kpn::KpnJacobian jac = kpn::apply_gradient(depth, kf, variant);
  const int w = depth.width();
  const int h = depth.height();
  const int k = kf.k();
  const int rad = k / 2;
  const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const auto idx = [w](int x, int y) {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
  };

  // Dense analytic columns for bias and depth, assembled from slot form.
  std::vector<double> bias_cols(n * n, 0.0);   // [input q][output p]
  std::vector<double> depth_cols(n * n, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int i = 0; i < kf.taps(); ++i) {
        const int qx = std::clamp(x + i % k - rad, 0, w - 1);
        const int qy = std::clamp(y + i / k - rad, 0, h - 1);
        bias_cols[idx(qx, qy) * n + idx(x, y)] += jac.d_bias.at(x, y, i);
        depth_cols[idx(qx, qy) * n + idx(x, y)] += jac.d_depth.at(x, y, i);
      }
    }
  }

  kpn::KernelField probe = kf;
  Image d = depth;
  const auto column = [&](double& slot) {
    const double base = slot;
    slot = base + eps;
    const Image plus = kpn::apply(d, probe, variant);
    slot = base - eps;
    const Image minus = kpn::apply(d, probe, variant);
    slot = base;
    std::vector<double> col(n);
    for (std::size_t p = 0; p < n; ++p) col[p] = (plus.data()[p] - minus.data()[p]) / (2.0 * eps);
    return col;
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t q = idx(x, y);
      for (int i = 0; i < kf.taps(); ++i) {
        std::vector<double> analytic(n, 0.0);
        analytic[q] = jac.d_weights.at(x, y, i);
        record(r, block_error(analytic, column(probe.weights(x, y)[static_cast<std::size_t>(i)])));
      }
      const std::vector<double> b(bias_cols.begin() + static_cast<std::ptrdiff_t>(q * n),
                                  bias_cols.begin() + static_cast<std::ptrdiff_t>((q + 1) * n));
      record(r, block_error(b, column(probe.bias(x, y))));
      const std::vector<double> dd(depth_cols.begin() + static_cast<std::ptrdiff_t>(q * n),
                                   depth_cols.begin() + static_cast<std::ptrdiff_t>((q + 1) * n));
      record(r, block_error(dd, column(d.at(x, y))));
    }
  }
  return r;
}

WarpInstance random_warp_instance(std::mt19937_64& rng, int width, int height, int channels) {
  if (width < 3 || height < 3) throw ContractError("random_warp_instance: need at least 3x3");
  WarpInstance inst{Image(width, height, channels), FlowField(width, height)};
  for (double& v : inst.img.data()) v = uniform(rng, 0.0, 1.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // Target cell anywhere inside the raster, fractional part in [0.1, 0.9].
      const double tx = std::floor(uniform(rng, 0.0, width - 1.0)) + uniform(rng, 0.1, 0.9);
      const double ty = std::floor(uniform(rng, 0.0, height - 1.0)) + uniform(rng, 0.1, 0.9);
      inst.flow.u(x, y) = tx - x;
      inst.flow.v(x, y) = ty - y;
    }
  }
  return inst;
}

CalibInstance random_calib_instance(std::mt19937_64& rng, int width, int height) {
  CalibInstance inst{FlowField(width, height), Image(width, height), Mask(width, height, true)};
  const double tx = uniform(rng, -60.0, 60.0);
  const double ty = uniform(rng, -60.0, 60.0);
  const double cx = uniform(rng, -10.0, 10.0);
  const double cy = uniform(rng, -10.0, 10.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double z = uniform(rng, 0.5, 5.0);
      inst.depth.at(x, y) = z;
      inst.flow.u(x, y) = tx / z + cx + uniform(rng, -0.5, 0.5);
      inst.flow.v(x, y) = ty / z + cy + uniform(rng, -0.5, 0.5);
      if (uniform(rng, 0.0, 1.0) < 0.1) inst.mask.set(x, y, false);
    }
  }
  return inst;
}

KpnInstance random_kpn_instance(std::mt19937_64& rng, int width, int height, int k) {
  KpnInstance inst{Image(width, height), kpn::KernelField(width, height, k)};
  for (double& v : inst.depth.data()) v = uniform(rng, 0.5, 5.0);
  for (double& v : inst.kernels.all_weights()) {
    const double mag = uniform(rng, 0.1, 1.0);
    v = uniform(rng, 0.0, 1.0) < 0.5 ? -mag : mag;
  }
  for (double& v : inst.kernels.all_bias()) v = uniform(rng, -0.5, 0.5);
  return inst;
}

std::vector<Report> run_suite(const std::string& op, std::uint64_t seed, int instances,
                              double eps) {
  if (op != "warp" && op != "calib" && op != "kpn" && op != "all") {
    throw ContractError("gradcheck: unknown op '" + op + "' (expected warp, calib, kpn or all)");
  }
  if (instances <= 0) throw ContractError("gradcheck: instance count must be positive");
  std::mt19937_64 rng(seed);
  std::vector<Report> reports;
  const auto merge = [](Report& into, const Report& r) {
    into.max_rel_error = std::max(into.max_rel_error, r.max_rel_error);
    into.blocks += r.blocks;
    into.skipped += r.skipped;
  };
  if (op == "warp" || op == "all") {
    Report total{"warp", "d/du, d/dv", eps};
    for (int i = 0; i < instances; ++i) {
      const WarpInstance inst = random_warp_instance(rng, 9, 7, 3);
      merge(total, check_warp(inst.img, inst.flow, eps));
    }
    reports.push_back(total);
  }
  if (op == "calib" || op == "all") {
    Report total{"calib", "d(t_x, t_y, c_x, c_y)/d(u, v, depth)", eps};
    for (int i = 0; i < instances; ++i) {
      const CalibInstance inst = random_calib_instance(rng, 8, 6);
      merge(total, check_calib(inst.flow, inst.depth, inst.mask, eps));
    }
    reports.push_back(total);
  }
  if (op == "kpn" || op == "all") {
    for (const kpn::Variant v : kpn::kAllVariants) {
      Report total{"kpn", std::string(kpn::name(v)), eps};
      for (int i = 0; i < instances; ++i) {
        const KpnInstance inst = random_kpn_instance(rng, 6, 5, 3);
        merge(total, check_kpn(inst.depth, inst.kernels, v, eps));
      }
      reports.push_back(total);
    }
  }
  return reports;
}

}  // namespace tofrgbd::gradcheck
