#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tofrgbd/calib.hpp"
#include "tofrgbd/geometry.hpp"
#include "tofrgbd/image.hpp"
#include "tofrgbd/kpn.hpp"
#include "tofrgbd/metrics.hpp"

namespace tofrgbd::io {

namespace fs = std::filesystem;

/// PFM byte stream: "Pf" (1 channel) or "PF" (3 channels), then "W H", then
/// the scale (negative: little-endian), each line ended by '\n', then 32-bit
/// floats with rows stored bottom to top. Two-channel rasters are written as
/// "PF" with a zero third channel. Any other channel count uses the "PN"
/// extension, whose size line is "W H C".
std::string encode_pfm(const Image& img, double scale = -1.0);

/// Accepts both byte orders. `channels_hint` = 2 drops the third channel of
/// a "PF" file. Throws ParseError (with the byte offset) on a malformed
/// header, a truncated payload, or a non-finite value.
Image decode_pfm(const std::string& bytes, int channels_hint = 0);

// Positive scales (big-endian output) are rejected with ContractError.
void write_pfm(const fs::path& path, const Image& img, double scale = -1.0);
Image read_pfm(const fs::path& path, int channels_hint = 0);

void write_flow(const fs::path& path, const FlowField& flow);
FlowField read_flow(const fs::path& path);

void write_mask(const fs::path& path, const Mask& mask);
Mask read_mask(const fs::path& path);

void write_kernels(const fs::path& path, const kpn::KernelField& kf);
kpn::KernelField read_kernels(const fs::path& path);

inline constexpr int kFormatVersion = 1;

/// Contents of a sample directory's meta.json.
struct SampleManifest {
  std::string id;
  fs::path dir;
  fs::path rgb, amplitude, tof_depth, gt_depth, mask;
  std::optional<fs::path> gt_flow;
  std::optional<fs::path> kernels;
  WeakCalibParams calib;
  int width = 0;
  int height = 0;
  std::uint64_t seed = 0;
  bool aligned = true;
};

/// Writes rgb.pfm, amplitude.pfm, tof_depth.pfm, gt_depth.pfm, mask.pfm,
/// gt_flow.pfm (when present) and meta.json into `dir`, creating it.
void write_sample(const fs::path& dir, const DataSample& sample, const std::string& id,
                  const kpn::KernelField* kernels = nullptr);

/// Parses meta.json and checks that every referenced file exists. Throws
/// ManifestError naming the first missing or malformed field.
SampleManifest read_manifest(const fs::path& dir);

/// Loads and validates the sample; size disagreements across files raise
/// ManifestError naming the offending file.
DataSample read_sample(const fs::path& dir);

/// Deterministic seeded shuffle; |test| = round(test_fraction * N).
/// Empty input throws DegenerateError; fraction outside (0, 1) throws DomainError.
std::pair<std::vector<SampleManifest>, std::vector<SampleManifest>> split_dataset(
    std::vector<SampleManifest> manifests, double test_fraction, std::uint64_t seed);

struct EvalReport {
  std::optional<double> aepe;
  std::optional<metrics::QuantileReport> quantiles;
  std::optional<metrics::DepthLoss> depth_loss;
  double lambda = metrics::kDefaultLambda;
};

/// {"aepe", "mae_low", "mae_mid", "mae_high", "mae_all", "data_term",
/// "grad_term", ...}; metrics that were not computed are null.
std::string report_to_json(const EvalReport& report);

std::string estimate_to_json(const calib::CalibEstimate& est);
calib::CalibEstimate estimate_from_json(const std::string& text);

// Whole-file helpers; failures raise ManifestError naming the path.
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace tofrgbd::io
