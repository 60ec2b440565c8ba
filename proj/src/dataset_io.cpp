#include "tofrgbd/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "tofrgbd/error.hpp"

namespace tofrgbd::io {

namespace {

using json = nlohmann::json;

constexpr const char* kMeta = "meta.json";

std::uint32_t byteswap32(std::uint32_t v) noexcept {
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

bool host_little_endian() noexcept { return std::endian::native == std::endian::little; }

// Sequential reader over the PFM header; every failure reports its offset.
class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }

  // A run of non-whitespace characters followed by exactly one whitespace
  // character (the last header token's terminator starts the payload).
  std::string token(const char* what) {
    while (pos_ < bytes_.size() && is_space(bytes_[pos_])) ++pos_;
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !is_space(bytes_[pos_])) ++pos_;
    if (pos_ == start) throw ParseError(std::string("PFM: missing ") + what, start);
    if (pos_ >= bytes_.size()) throw ParseError(std::string("PFM: header ends inside ") + what, pos_);
    std::string tok = bytes_.substr(start, pos_ - start);
    ++pos_;
    return tok;
  }

  long long integer(const char* what) {
    const std::size_t at = skip_spaces();
    const std::string tok = token(what);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || v <= 0) {
      throw ParseError(std::string("PFM: ") + what + " must be a positive integer, got '" + tok + "'", at);
    }
    return v;
  }

  double real(const char* what) {
    const std::size_t at = skip_spaces();
    const std::string tok = token(what);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !std::isfinite(v) || v == 0.0) {
      throw ParseError(std::string("PFM: ") + what + " must be a finite nonzero number, got '" + tok + "'", at);
    }
    return v;
  }

 private:
  static bool is_space(char c) noexcept {
    return c == ' ' || c == '\n' || c == '\r' || c == '\t';
  }
  std::size_t skip_spaces() {
    while (pos_ < bytes_.size() && is_space(bytes_[pos_])) ++pos_;
    return pos_;
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw ManifestError(path.parent_path().string(), "cannot create directory: " + ec.message());
  }
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ManifestError(key, "missing field in meta.json");
  return j.at(key);
}

double number_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw ManifestError(key, "expected a number");
  return v.get<double>();
}

int size_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_integer() || v.get<long long>() <= 0 || v.get<long long>() > (1 << 20)) {
    throw ManifestError(key, "expected a positive integer");
  }
  return v.get<int>();
}

std::string string_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) throw ManifestError(key, "expected a string");
  return v.get<std::string>();
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

template <typename T>
void require_size(const T& raster, const SampleManifest& m, const char* name) {
  if (raster.width() != m.width || raster.height() != m.height) {
    throw ManifestError(name, "is " + std::to_string(raster.width()) + "x" +
                                  std::to_string(raster.height()) + " but meta.json says " +
                                  std::to_string(m.width) + "x" + std::to_string(m.height));
  }
}

}  // namespace

std::string encode_pfm(const Image& img, double scale) {
  if (!(scale < 0.0) || !std::isfinite(scale)) {
    throw ContractError("PFM writer emits little-endian data only: scale must be negative");
  }
  if (img.width() <= 0 || img.height() <= 0) throw ContractError("PFM: empty raster");
  const int c = img.channels();
  const int stored = c == 2 ? 3 : c;
  std::ostringstream header;
  if (c == 1) {
    header << "Pf\n" << img.width() << ' ' << img.height() << '\n';
  } else if (c == 2 || c == 3) {
    header << "PF\n" << img.width() << ' ' << img.height() << '\n';
  } else {
    header << "PN\n" << img.width() << ' ' << img.height() << ' ' << c << '\n';
  }
  header << scale << '\n';
  std::string out = header.str();
  const std::size_t start = out.size();
  out.resize(start + img.pixel_count() * static_cast<std::size_t>(stored) * 4);
  char* dst = out.data() + start;
  for (int row = img.height() - 1; row >= 0; --row) {
    for (int x = 0; x < img.width(); ++x) {
      for (int k = 0; k < stored; ++k) {
        const float f = k < c ? static_cast<float>(img.at(x, row, k)) : 0.0f;
        if (!std::isfinite(f)) {
          throw DomainError("PFM: value at (" + std::to_string(x) + ", " + std::to_string(row) +
                            ") does not fit a finite 32-bit float");
        }
        std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
        if (!host_little_endian()) bits = byteswap32(bits);
        std::memcpy(dst, &bits, 4);
        dst += 4;
      }
    }
  }
  return out;
}

Image decode_pfm(const std::string& bytes, int channels_hint) {
  HeaderReader rd(bytes);
  const std::string magic = rd.token("magic");
  int channels = 0;
  if (magic == "Pf") {
    channels = 1;
  } else if (magic == "PF") {
    channels = 3;
  } else if (magic != "PN") {
    throw ParseError("PFM: unknown magic '" + magic + "'", 0);
  }
  const long long w = rd.integer("width");
  const long long h = rd.integer("height");
  if (magic == "PN") channels = static_cast<int>(rd.integer("channel count"));
  if (w > (1 << 20) || h > (1 << 20) || channels > 4096) {
    throw ParseError("PFM: implausible raster size", rd.offset());
  }
  const double scale = rd.real("scale");
  const bool little = scale < 0.0;

  const std::size_t start = rd.offset();
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                            static_cast<std::size_t>(channels);
  if (bytes.size() - start < count * 4) {
    throw ParseError("PFM: payload truncated, expected " + std::to_string(count * 4) +
                         " bytes but found " + std::to_string(bytes.size() - start),
                     bytes.size());
  }
  const int keep = (channels_hint == 2 && channels == 3) ? 2 : channels;
  Image img(static_cast<int>(w), static_cast<int>(h), keep);
  const bool swap = little != host_little_endian();
  std::size_t pos = start;
  for (long long row = h - 1; row >= 0; --row) {
    for (long long x = 0; x < w; ++x) {
      for (int k = 0; k < channels; ++k) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, bytes.data() + pos, 4);
        if (swap) bits = byteswap32(bits);
        const float f = std::bit_cast<float>(bits);
        if (!std::isfinite(f)) throw ParseError("PFM: non-finite value in payload", pos);
        if (k < keep) img.at(static_cast<int>(x), static_cast<int>(row), k) = f;
        pos += 4;
      }
    }
  }
  return img;
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ManifestError(path.string(), "cannot open for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ManifestError(path.string(), "write failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_pfm(const fs::path& path, const Image& img, double scale) {
  write_text(path, encode_pfm(img, scale));
}

Image read_pfm(const fs::path& path, int channels_hint) {
  const std::string bytes = read_text(path);
  try {
    return decode_pfm(bytes, channels_hint);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

void write_flow(const fs::path& path, const FlowField& flow) { write_pfm(path, flow.image()); }

FlowField read_flow(const fs::path& path) {
  Image img = read_pfm(path, 2);
  if (img.channels() != 2) throw ManifestError(path.string(), "flow file must have 3 stored channels");
  return FlowField(std::move(img));
}

void write_mask(const fs::path& path, const Mask& mask) { write_pfm(path, mask.to_image()); }

Mask read_mask(const fs::path& path) {
  const Image img = read_pfm(path);
  if (img.channels() != 1) throw ManifestError(path.string(), "mask file must have one channel");
  return Mask::from_image(img);
}

void write_kernels(const fs::path& path, const kpn::KernelField& kf) {
  write_pfm(path, kf.to_image());
}

kpn::KernelField read_kernels(const fs::path& path) {
  return kpn::KernelField::from_image(read_pfm(path));
}

void write_sample(const fs::path& dir, const DataSample& sample, const std::string& id,
                  const kpn::KernelField* kernels) {
  sample.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ManifestError(dir.string(), "cannot create sample directory: " + ec.message());
  write_pfm(dir / "rgb.pfm", sample.rgb);
  write_pfm(dir / "amplitude.pfm", sample.amplitude);
  write_pfm(dir / "tof_depth.pfm", sample.tof_depth);
  write_pfm(dir / "gt_depth.pfm", sample.gt_depth);
  write_mask(dir / "mask.pfm", sample.mask);
  json files = {{"rgb", "rgb.pfm"},
                {"amplitude", "amplitude.pfm"},
                {"tof_depth", "tof_depth.pfm"},
                {"gt_depth", "gt_depth.pfm"},
                {"mask", "mask.pfm"}};
  if (sample.gt_flow) {
    write_flow(dir / "gt_flow.pfm", *sample.gt_flow);
    files["gt_flow"] = "gt_flow.pfm";
  }
  if (kernels) {
    write_kernels(dir / "kernels.pfm", *kernels);
    files["kernels"] = "kernels.pfm";
  }
  const WeakCalibParams& c = sample.calib;
  const json meta = {{"format", kFormatVersion},
                     {"id", id},
                     {"f_x", c.fx},
                     {"f_y", c.fy},
                     {"t_x", c.tx},
                     {"t_y", c.ty},
                     {"c_x", c.cx},
                     {"c_y", c.cy},
                     {"width", sample.width()},
                     {"height", sample.height()},
                     {"seed", sample.seed},
                     {"aligned", sample.aligned},
                     {"files", files}};
  write_text(dir / kMeta, meta.dump(2) + "\n");
}

SampleManifest read_manifest(const fs::path& dir) {
  const fs::path meta_path = dir / kMeta;
  if (!fs::exists(meta_path)) throw ManifestError("meta.json", "missing in " + dir.string());
  json j;
  try {
    j = json::parse(read_text(meta_path));
  } catch (const json::parse_error& e) {
    throw ParseError(meta_path.string() + ": " + e.what(), e.byte);
  }
  const json& format = field(j, "format");
  if (!format.is_number_integer() || format.get<int>() != kFormatVersion) {
    throw ManifestError("format", "unsupported version (expected 1)");
  }
  SampleManifest m;
  m.dir = dir;
  m.id = string_field(j, "id");
  m.calib.fx = number_field(j, "f_x");
  m.calib.fy = number_field(j, "f_y");
  m.calib.tx = number_field(j, "t_x");
  m.calib.ty = number_field(j, "t_y");
  m.calib.cx = number_field(j, "c_x");
  m.calib.cy = number_field(j, "c_y");
  m.width = size_field(j, "width");
  m.height = size_field(j, "height");
  const json& seed = field(j, "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
    throw ManifestError("seed", "expected a non-negative integer");
  }
  m.seed = seed.get<std::uint64_t>();
  const json& aligned = field(j, "aligned");
  if (!aligned.is_boolean()) throw ManifestError("aligned", "expected a boolean");
  m.aligned = aligned.get<bool>();

  const json& files = field(j, "files");
  const auto required = [&](const char* key) {
    if (!files.is_object() || !files.contains(key) || !files.at(key).is_string()) {
      throw ManifestError(key, "missing from meta.json files");
    }
    fs::path p = dir / files.at(key).get<std::string>();
    if (!fs::exists(p)) throw ManifestError(key, "file " + p.string() + " does not exist");
    return p;
  };
  const auto optional = [&](const char* key) -> std::optional<fs::path> {
    if (!files.is_object() || !files.contains(key)) return std::nullopt;
    return required(key);
  };
  m.rgb = required("rgb");
  m.amplitude = required("amplitude");
  m.tof_depth = required("tof_depth");
  m.gt_depth = required("gt_depth");
  m.mask = required("mask");
  m.gt_flow = optional("gt_flow");
  m.kernels = optional("kernels");
  try {
    m.calib.validate();
  } catch (const Error& e) {
    throw ManifestError("f_x", e.what());
  }
  return m;
}

DataSample read_sample(const fs::path& dir) {
  const SampleManifest m = read_manifest(dir);
  DataSample s;
  s.calib = m.calib;
  s.seed = m.seed;
  s.aligned = m.aligned;
  s.rgb = read_pfm(m.rgb);
  require_size(s.rgb, m, "rgb");
  if (s.rgb.channels() != 3) throw ManifestError("rgb", "expected 3 channels");
  s.amplitude = read_pfm(m.amplitude);
  require_size(s.amplitude, m, "amplitude");
  s.tof_depth = read_pfm(m.tof_depth);
  require_size(s.tof_depth, m, "tof_depth");
  s.gt_depth = read_pfm(m.gt_depth);
  require_size(s.gt_depth, m, "gt_depth");
  s.mask = read_mask(m.mask);
  require_size(s.mask, m, "mask");
  if (m.gt_flow) {
    s.gt_flow = read_flow(*m.gt_flow);
    require_size(*s.gt_flow, m, "gt_flow");
  }
  const std::pair<const char*, const Image*> singles[] = {
      {"amplitude", &s.amplitude}, {"tof_depth", &s.tof_depth}, {"gt_depth", &s.gt_depth}};
  for (const auto& [name, img] : singles) {
    if (img->channels() != 1) throw ManifestError(name, "expected one channel");
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw ManifestError("sample", e.what());
  }
  return s;
}

std::pair<std::vector<SampleManifest>, std::vector<SampleManifest>> split_dataset(
    std::vector<SampleManifest> manifests, double test_fraction, std::uint64_t seed) {
  if (manifests.empty()) throw DegenerateError("split_dataset: no samples");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DomainError("split_dataset: test fraction must lie in (0, 1)");
  }
  // Fisher-Yates driven directly by the engine's output, which the standard
  // fixes bit for bit (distributions are implementation-defined).
  std::mt19937_64 rng(seed);
  for (std::size_t i = manifests.size() - 1; i > 0; --i) {
    const std::uint64_t bound = i + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r = rng();
    while (r >= limit) r = rng();
    std::swap(manifests[i], manifests[static_cast<std::size_t>(r % bound)]);
  }
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(manifests.size())));
  std::vector<SampleManifest> test(manifests.begin(),
                                   manifests.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<SampleManifest> train(manifests.begin() + static_cast<std::ptrdiff_t>(n_test),
                                    manifests.end());
  return {std::move(train), std::move(test)};
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["aepe"] = nullable(report.aepe);
  const auto q = report.quantiles;
  j["mae_low"] = q ? json(q->mae_low) : json(nullptr);
  j["mae_mid"] = q ? json(q->mae_mid) : json(nullptr);
  j["mae_high"] = q ? json(q->mae_high) : json(nullptr);
  j["mae_outlier"] = q ? json(q->mae_outlier) : json(nullptr);
  j["mae_all"] = q ? json(q->mae_all) : json(nullptr);
  j["pixel_count"] = q ? json(q->pixel_count) : json(nullptr);
  j["range_limit"] = q ? json(q->range_limit) : json(nullptr);
  const auto& d = report.depth_loss;
  j["data_term"] = d ? json(d->data) : json(nullptr);
  j["grad_term"] = d ? json(d->gradient) : json(nullptr);
  j["depth_loss"] = d ? json(d->total) : json(nullptr);
  j["lambda"] = report.lambda;
  return j.dump(2);
}

std::string estimate_to_json(const calib::CalibEstimate& est) {
  const json j = {{"t_x", est.tx},
                  {"t_y", est.ty},
                  {"c_x", est.cx},
                  {"c_y", est.cy},
                  {"residual_rms", est.residual_rms},
                  {"pixel_count", est.pixel_count},
                  {"condition", est.condition}};
  return j.dump(2);
}

calib::CalibEstimate estimate_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("estimate JSON: ") + e.what(), e.byte);
  }
  calib::CalibEstimate est;
  est.tx = number_field(j, "t_x");
  est.ty = number_field(j, "t_y");
  est.cx = number_field(j, "c_x");
  est.cy = number_field(j, "c_y");
  est.residual_rms = number_field(j, "residual_rms");
  est.pixel_count = static_cast<std::size_t>(number_field(j, "pixel_count"));
  est.condition = number_field(j, "condition");
  return est;
}

}  // namespace tofrgbd::io
