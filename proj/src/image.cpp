#include "tofrgbd/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tofrgbd/error.hpp"

namespace tofrgbd {

namespace {

void check_dims(int width, int height, int channels) {
  if (width < 0 || height < 0) {
    throw DimensionError("negative raster size " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
  if (channels < 1) {
    throw DimensionError("raster needs at least one channel, got " + std::to_string(channels));
  }
}

std::string size_string(int w, int h) { return std::to_string(w) + "x" + std::to_string(h); }

}  // namespace

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  check_dims(width, height, channels);
  if (!std::isfinite(fill)) throw DomainError("non-finite fill value");
  data_.assign(pixel_count() * static_cast<std::size_t>(channels), fill);
}

Image::Image(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_dims(width, height, channels);
  if (data_.size() != pixel_count() * static_cast<std::size_t>(channels)) {
    throw DimensionError("raster data length " + std::to_string(data_.size()) +
                         " does not match " + size_string(width, height) + "x" +
                         std::to_string(channels));
  }
  if (!all_finite()) throw DomainError("raster contains NaN or Inf");
}

Image Image::channel(int c) const {
  if (c < 0 || c >= channels_) throw ContractError("channel index out of range");
  Image out(width_, height_, 1);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    out.data_[i] = data_[i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)];
  }
  return out;
}

bool Image::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

FlowField::FlowField(int width, int height, double u, double v) : uv_(width, height, 2) {
  for (std::size_t i = 0; i < uv_.pixel_count(); ++i) {
    uv_.data()[2 * i] = u;
    uv_.data()[2 * i + 1] = v;
  }
}

FlowField::FlowField(Image uv) : uv_(std::move(uv)) {
  if (uv_.channels() != 2) {
    throw ContractError("flow field needs 2 channels, got " + std::to_string(uv_.channels()));
  }
}

Mask::Mask(int width, int height, bool value) : width_(width), height_(height) {
  check_dims(width, height, 1);
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
               value ? 1 : 0);
}

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Image Mask::to_image() const {
  Image out(width_, height_, 1);
  std::transform(bits_.begin(), bits_.end(), out.data().begin(),
                 [](std::uint8_t b) { return b ? 1.0 : 0.0; });
  return out;
}

Mask Mask::from_image(const Image& img) {
  if (img.channels() != 1) throw ContractError("mask raster must have one channel");
  Mask out(img.width(), img.height(), false);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double v = img.data()[i];
    if (v != 0.0 && v != 1.0) {
      throw DomainError("mask raster holds non-binary value " + std::to_string(v));
    }
    out.bits_[i] = v == 1.0 ? 1 : 0;
  }
  return out;
}

void require_same_size(const Image& a, const Image& b, const char* what) {
  if (!a.same_size(b)) {
    throw DimensionError(std::string(what) + ": size " + size_string(a.width(), a.height()) +
                         " vs " + size_string(b.width(), b.height()));
  }
}

void require_same_size(const Image& a, const Mask& m, const char* what) {
  if (a.width() != m.width() || a.height() != m.height()) {
    throw DimensionError(std::string(what) + ": size " + size_string(a.width(), a.height()) +
                         " vs mask " + size_string(m.width(), m.height()));
  }
}

void require_same_size(const Image& a, const FlowField& f, const char* what) {
  require_same_size(a, f.image(), what);
}

}  // namespace tofrgbd
