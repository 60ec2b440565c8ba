#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tofrgbd/geometry.hpp"
#include "tofrgbd/image.hpp"
#include "tofrgbd/scene.hpp"

namespace tofrgbd::sim {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kDefaultFrequency = 20e6;     // Hz

// Angular modulation frequency for a frequency in Hz.
double angular(double frequency_hz) noexcept;

// c / (2 f): the largest radial distance measured without phase wrapping.
double unambiguous_range(double frequency_hz) noexcept;

// Focal length in pixels for an image `width` wide, scaled from 525 px at 640.
double default_focal(int width) noexcept;

struct Impulse {
  double delay = 0.0;   // seconds
  double energy = 0.0;  // >= 0
};

/// Per-pixel impulse lists. The first impulse of a lit pixel is the direct
/// path; a pixel whose ray misses everything has an empty list.
class TransientRaster {
 public:
  TransientRaster() = default;
  TransientRaster(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::vector<Impulse>& at(int x, int y) noexcept { return pixels_[index(x, y)]; }
  const std::vector<Impulse>& at(int x, int y) const noexcept { return pixels_[index(x, y)]; }

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::vector<Impulse>> pixels_;
};

struct RenderOptions {
  int width = 640;
  int height = 480;
  bool mpi = true;
  int bounce_samples = 64;
  int threads = 0;  // 0: hardware concurrency; results do not depend on it
};

struct RenderResult {
  TransientRaster transients;
  Image radial;   // true camera-to-surface distance, 0 where the ray misses
  Image normals;  // 3 channels, unit, facing the camera
  Image albedo;   // IR albedo
  Image rgb;      // 3 channels in [0, 1]
  Mask hit;
};

/// Casts one ray per pixel center from the origin (principal point at the
/// image center, focal lengths from params). Direct impulse: delay 2r/c,
/// energy albedo * cos(theta) / r^2. With MPI, each pixel adds
/// bounce_samples one-bounce paths light -> s -> x -> camera through surfels
/// s drawn uniformly by area, each weighted by
/// rho_s rho_x G(l, s) G(s, x) / pi * area / bounce_samples.
/// Per-pixel random streams derive from (scene.seed, pixel index).
RenderResult render_transients(const Scene& scene, const WeakCalibParams& params,
                               const RenderOptions& options);

/// Snaps delays to the centers of bins of width `bin_width`, merging impulses
/// that share a bin. Each delay moves by at most bin_width / 2, i.e. the path
/// length by c * bin_width / 2 and the depth by c * bin_width / 4.
TransientRaster bin_transients(const TransientRaster& tr, double bin_width);

struct CorrelationPair {
  Image c_sin;
  Image c_cos;
  double omega = 0.0;  // rad/s
};

/// C_sin = sum e sin(omega tau), C_cos = sum e cos(omega tau).
CorrelationPair correlate(const TransientRaster& tr, double omega);

struct PhaseDepth {
  Image radial;     // c * phi / (2 omega), 0 where invalid
  Image amplitude;  // sqrt(C_sin^2 + C_cos^2)
  Mask valid;
};

// Validity threshold relative to the largest amplitude in the frame.
inline constexpr double kDefaultAmplitudeThreshold = 1e-9;

/// phi = atan2(C_sin, C_cos) wrapped to [0, 2 pi). A pixel is valid when its
/// amplitude exceeds threshold * max amplitude.
PhaseDepth phase_to_depth(const CorrelationPair& cp,
                          double relative_threshold = kDefaultAmplitudeThreshold);

/// Adds i.i.d. N(0, sigma^2) to every C_sin and C_cos value. sigma is in
/// the same units as the correlation values. sigma = 0 returns the input.
CorrelationPair add_noise(const CorrelationPair& cp, double sigma, std::mt19937_64& rng);

/// raw * depth^2, divided by its maximum so the result lies in [0, 1]. An
/// all-zero product stays all zero.
Image normalize_amplitude(const Image& raw_amplitude, const Image& depth);

/// Affine map of the values on the mask onto [0, 1] (min -> 0, max -> 1);
/// off-mask pixels become 0. A constant raster maps to 0.
Image normalize_unit_range(const Image& img, const Mask& mask);

struct SynthConfig {
  RenderOptions render;
  double frequency = kDefaultFrequency;  // Hz
  double sigma = 0.0;
  double amplitude_threshold = kDefaultAmplitudeThreshold;
};

/// Full aligned sample at one viewpoint. Depths are perpendicular and in
/// meters; amplitude is normalized to [0, 1]; rgb is in [0, 1]. The mask
/// keeps pixels that were hit, have a valid phase and a positive measured
/// depth, and whose true radial distance lies inside the unambiguous range.
DataSample synthesize_sample(const Scene& scene, const WeakCalibParams& params,
                             const SynthConfig& config);

// Calibration of the simulated rig at this size: default focal lengths,
// zero translation and principal-point offset.
WeakCalibParams default_params(int width);

}  // namespace tofrgbd::sim
