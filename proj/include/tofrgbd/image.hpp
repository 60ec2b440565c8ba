#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tofrgbd {

/// Dense row-major raster of doubles, channel-interleaved.
///
/// Carries RGB, amplitude, depth, flow and patch volumes alike. Values are
/// finite: the constructors that take external data reject NaN and Inf.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 1, double fill = 0.0);
  Image(int width, int height, int channels, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const noexcept { return data_.empty(); }

  bool same_size(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  double& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

  std::span<double> pixel(int x, int y) noexcept {
    return {data_.data() + index(x, y, 0), static_cast<std::size_t>(channels_)};
  }
  std::span<const double> pixel(int x, int y) const noexcept {
    return {data_.data() + index(x, y, 0), static_cast<std::size_t>(channels_)};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  // Single-channel copy of channel c.
  Image channel(int c) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> data_;
};

/// Per-pixel displacement (u, v) in pixels; a two-channel Image underneath.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int width, int height, double u = 0.0, double v = 0.0);
  explicit FlowField(Image uv);

  int width() const noexcept { return uv_.width(); }
  int height() const noexcept { return uv_.height(); }

  double& u(int x, int y) noexcept { return uv_.at(x, y, 0); }
  double u(int x, int y) const noexcept { return uv_.at(x, y, 0); }
  double& v(int x, int y) noexcept { return uv_.at(x, y, 1); }
  double v(int x, int y) const noexcept { return uv_.at(x, y, 1); }

  const Image& image() const noexcept { return uv_; }
  Image& image() noexcept { return uv_; }

  friend bool operator==(const FlowField&, const FlowField&) = default;

 private:
  Image uv_{0, 0, 2};
};

/// Binary validity raster; 1 marks a valid / confident pixel.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool value = true);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  bool operator()(int x, int y) const noexcept {
    return bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(x)] != 0;
  }
  void set(int x, int y, bool value) noexcept {
    bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
          static_cast<std::size_t>(x)] = value ? 1 : 0;
  }

  std::size_t count() const noexcept;
  std::span<const std::uint8_t> data() const noexcept { return bits_; }

  // Exact 0/1 single-channel raster; from_image rejects any other value.
  Image to_image() const;
  static Mask from_image(const Image& img);

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

void require_same_size(const Image& a, const Image& b, const char* what);
void require_same_size(const Image& a, const Mask& m, const char* what);
void require_same_size(const Image& a, const FlowField& f, const char* what);

}  // namespace tofrgbd
