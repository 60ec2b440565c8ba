#include "tofrgbd/tof_sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <thread>

#include "tofrgbd/error.hpp"

namespace tofrgbd::sim {

namespace {

// Stream ids under the scene seed; random_scene uses stream 0.
constexpr std::uint64_t kPixelStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

// Lower bound on |s - x|^2 in the bounce weight; keeps surfels drawn right
// next to x from dominating.
constexpr double kMinBounceDistance2 = 1e-4;

constexpr double kAmbient = 0.2;

template <typename Fn>
void parallel_rows(int height, int threads, Fn&& fn) {
  int n = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n = std::clamp(n, 1, std::max(height, 1));
  if (n == 1) {
    for (int y = 0; y < height; ++y) fn(y);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    pool.emplace_back([&, t] {
      for (int y = t; y < height; y += n) fn(y);
    });
  }
  for (std::thread& th : pool) th.join();
}

}  // namespace

double angular(double frequency_hz) noexcept { return 2.0 * std::numbers::pi * frequency_hz; }

double unambiguous_range(double frequency_hz) noexcept {
  return kSpeedOfLight / (2.0 * frequency_hz);
}

double default_focal(int width) noexcept { return 525.0 * static_cast<double>(width) / 640.0; }

WeakCalibParams default_params(int width) {
  WeakCalibParams p;
  p.fx = default_focal(width);
  p.fy = p.fx;
  return p;
}

TransientRaster::TransientRaster(int width, int height)
    : width_(width),
      height_(height),
      pixels_(static_cast<std::size_t>(std::max(width, 0)) *
              static_cast<std::size_t>(std::max(height, 0))) {
  if (width < 0 || height < 0) throw ContractError("TransientRaster: negative size");
}

RenderResult render_transients(const Scene& scene, const WeakCalibParams& params,
                               const RenderOptions& options) {
  scene.validate();
  params.validate();
  if (options.width <= 0 || options.height <= 0) {
    throw ContractError("render_transients: image size must be positive");
  }
  if (options.mpi && options.bounce_samples <= 0) {
    throw ContractError("render_transients: MPI needs at least one bounce sample");
  }
  const int w = options.width;
  const int h = options.height;
  const PrincipalPoint pp = image_center(w, h);
  RenderResult r{TransientRaster(w, h), Image(w, h), Image(w, h, 3), Image(w, h),
                 Image(w, h, 3), Mask(w, h, false)};

  std::optional<SurfaceSampler> sampler;
  if (options.mpi) sampler.emplace(scene);
  const std::uint64_t pixel_seed = derive_seed(scene.seed, kPixelStream);
  const Vec3 camera = Vec3::Zero();

  parallel_rows(h, options.threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const Vec3 dir =
          Vec3((x - pp.x) / params.fx, (y - pp.y) / params.fy, 1.0).normalized();
      const auto hit = intersect(scene, camera, dir);
      if (!hit) continue;
      const double dist = hit->t;
      const double cos_x = std::max(0.0, -hit->normal.dot(dir));
      const double rho_x = hit->albedo.ir;
      r.hit.set(x, y, true);
      r.radial.at(x, y) = dist;
      r.albedo.at(x, y) = rho_x;
      for (int c = 0; c < 3; ++c) {
        r.normals.at(x, y, c) = hit->normal[c];
        r.rgb.at(x, y, c) = std::min(1.0, hit->albedo.rgb[static_cast<std::size_t>(c)] *
                                              (kAmbient + (1.0 - kAmbient) * cos_x));
      }

      std::vector<Impulse>& list = r.transients.at(x, y);
      list.push_back({2.0 * dist / kSpeedOfLight, rho_x * cos_x / (dist * dist)});
      if (!sampler) continue;

      const std::uint64_t index =
          static_cast<std::uint64_t>(y) * static_cast<std::uint64_t>(w) + static_cast<std::uint64_t>(x);
      std::mt19937_64 rng(derive_seed(pixel_seed, index));
      const double measure = sampler->total_area() / options.bounce_samples;
      const Vec3& px = hit->point;
      const Vec3& nx = hit->normal;
      for (int i = 0; i < options.bounce_samples; ++i) {
        const SurfaceSampler::Sample s = sampler->draw(rng);
        const Vec3 to_light = camera - s.point;
        const double dl2 = to_light.squaredNorm();
        const double dl = std::sqrt(dl2);
        const double cos_sl = s.normal.dot(to_light) / dl;
        if (cos_sl <= 0.0) continue;
        const Vec3 sx = px - s.point;
        const double dsx = sx.norm();
        if (dsx == 0.0) continue;
        const double cos_s = s.normal.dot(sx) / dsx;
        const double cos_xs = -nx.dot(sx) / dsx;
        if (cos_s <= 0.0 || cos_xs <= 0.0) continue;
        if (!visible(scene, camera, s.point) || !visible(scene, s.point, px)) continue;
        const double g_ls = cos_sl / dl2;
        const double g_sx = cos_s * cos_xs / std::max(dsx * dsx, kMinBounceDistance2);
        const double energy =
            s.albedo.ir * rho_x * g_ls * g_sx / std::numbers::pi * measure;
        list.push_back({(dl + dsx + dist) / kSpeedOfLight, energy});
      }
    }
  });
  return r;
}

TransientRaster bin_transients(const TransientRaster& tr, double bin_width) {
  if (!(bin_width > 0.0)) throw DomainError("bin_transients: bin width must be positive");
  TransientRaster out(tr.width(), tr.height());
  for (int y = 0; y < tr.height(); ++y) {
    for (int x = 0; x < tr.width(); ++x) {
      std::map<long long, double> bins;
      for (const Impulse& imp : tr.at(x, y)) {
        bins[static_cast<long long>(std::floor(imp.delay / bin_width))] += imp.energy;
      }
      for (const auto& [bin, energy] : bins) {
        out.at(x, y).push_back({(static_cast<double>(bin) + 0.5) * bin_width, energy});
      }
    }
  }
  return out;
}

CorrelationPair correlate(const TransientRaster& tr, double omega) {
  if (!(omega > 0.0)) throw DomainError("correlate: angular frequency must be positive");
  CorrelationPair cp{Image(tr.width(), tr.height()), Image(tr.width(), tr.height()), omega};
  for (int y = 0; y < tr.height(); ++y) {
    for (int x = 0; x < tr.width(); ++x) {
      double s = 0.0;
      double c = 0.0;
      for (const Impulse& imp : tr.at(x, y)) {
        s += imp.energy * std::sin(omega * imp.delay);
        c += imp.energy * std::cos(omega * imp.delay);
      }
      cp.c_sin.at(x, y) = s;
      cp.c_cos.at(x, y) = c;
    }
  }
  return cp;
}

PhaseDepth phase_to_depth(const CorrelationPair& cp, double relative_threshold) {
  require_same_size(cp.c_sin, cp.c_cos, "phase_to_depth");
  if (!(cp.omega > 0.0)) throw DomainError("phase_to_depth: angular frequency must be positive");
  const int w = cp.c_sin.width();
  const int h = cp.c_sin.height();
  PhaseDepth out{Image(w, h), Image(w, h), Mask(w, h, false)};
  double max_amp = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double a = std::hypot(cp.c_sin.at(x, y), cp.c_cos.at(x, y));
      out.amplitude.at(x, y) = a;
      max_amp = std::max(max_amp, a);
    }
  }
  const double floor = relative_threshold * max_amp;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double a = out.amplitude.at(x, y);
      if (!(a > floor) || a == 0.0) continue;
      double phi = std::atan2(cp.c_sin.at(x, y), cp.c_cos.at(x, y));
      if (phi < 0.0) phi += kTwoPi;
      if (phi >= kTwoPi) phi -= kTwoPi;
      out.radial.at(x, y) = kSpeedOfLight * phi / (2.0 * cp.omega);
      out.valid.set(x, y, true);
    }
  }
  return out;
}

CorrelationPair add_noise(const CorrelationPair& cp, double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0.0)) throw DomainError("add_noise: sigma must be non-negative");
  CorrelationPair out = cp;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (int y = 0; y < out.c_sin.height(); ++y) {
    for (int x = 0; x < out.c_sin.width(); ++x) {
      out.c_sin.at(x, y) += noise(rng);
      out.c_cos.at(x, y) += noise(rng);
    }
  }
  return out;
}

Image normalize_amplitude(const Image& raw_amplitude, const Image& depth) {
  if (raw_amplitude.channels() != 1 || depth.channels() != 1) {
    throw ContractError("normalize_amplitude expects one-channel rasters");
  }
  require_same_size(raw_amplitude, depth, "normalize_amplitude");
  Image out(raw_amplitude.width(), raw_amplitude.height());
  double peak = 0.0;
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const double d = depth.at(x, y);
      if (d < 0.0) throw DomainError("normalize_amplitude: negative depth");
      const double v = raw_amplitude.at(x, y) * d * d;
      out.at(x, y) = v;
      peak = std::max(peak, v);
    }
  }
  if (peak > 0.0) {
    for (double& v : out.data()) v = std::max(0.0, v / peak);
  }
  return out;
}

Image normalize_unit_range(const Image& img, const Mask& mask) {
  if (img.channels() != 1) throw ContractError("normalize_unit_range expects one channel");
  require_same_size(img, mask, "normalize_unit_range");
  double lo = INFINITY;
  double hi = -INFINITY;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!mask(x, y)) continue;
      lo = std::min(lo, img.at(x, y));
      hi = std::max(hi, img.at(x, y));
    }
  }
  Image out(img.width(), img.height());
  if (!(hi > lo)) return out;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (mask(x, y)) out.at(x, y) = (img.at(x, y) - lo) / (hi - lo);
    }
  }
  return out;
}

DataSample synthesize_sample(const Scene& scene, const WeakCalibParams& params,
                             const SynthConfig& config) {
  if (!(config.frequency > 0.0)) throw DomainError("synthesize_sample: frequency must be positive");
  const RenderResult render = render_transients(scene, params, config.render);
  const double omega = angular(config.frequency);
  CorrelationPair cp = correlate(render.transients, omega);
  std::mt19937_64 rng(derive_seed(scene.seed, kNoiseStream));
  cp = add_noise(cp, config.sigma, rng);
  const PhaseDepth pd = phase_to_depth(cp, config.amplitude_threshold);

  const int w = config.render.width;
  const int h = config.render.height;
  const PrincipalPoint pp = image_center(w, h);
  const double range = unambiguous_range(config.frequency);

  DataSample s;
  s.calib = params;
  s.aligned = true;
  s.seed = scene.seed;
  s.rgb = render.rgb;
  s.tof_depth = plane_correct(pd.radial, params, pp);
  s.gt_depth = plane_correct(render.radial, params, pp);
  s.mask = Mask(w, h, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool keep = render.hit(x, y) && pd.valid(x, y) && s.tof_depth.at(x, y) > 0.0 &&
                        render.radial.at(x, y) < range;
      s.mask.set(x, y, keep);
    }
  }
  s.amplitude = normalize_amplitude(pd.amplitude, s.tof_depth);
  s.validate();
  return s;
}

}  // namespace tofrgbd::sim
