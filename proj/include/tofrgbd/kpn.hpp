#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "tofrgbd/image.hpp"
#include "tofrgbd/imaging.hpp"
#include "tofrgbd/metrics.hpp"

namespace tofrgbd::kpn {

inline constexpr int kDefaultKernelSize = 3;
// Added to the L1 denominator of kernel normalization.
inline constexpr double kNormEpsilon = 1e-12;

/// Per-pixel k x k filter weights plus a per-pixel bias: the output volume of
/// a kernel-predicting network (h x w x (k^2 + 1)).
class KernelField {
 public:
  KernelField() = default;
  KernelField(int width, int height, int k = kDefaultKernelSize);

  // Delta kernels (1 at the window center) and zero bias: the identity filter.
  static KernelField identity(int width, int height, int k = kDefaultKernelSize);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int k() const noexcept { return k_; }
  int taps() const noexcept { return k_ * k_; }
  int center_tap() const noexcept { return taps() / 2; }

  std::span<double> weights(int x, int y) noexcept {
    return {weights_.data() + offset(x, y), static_cast<std::size_t>(taps())};
  }
  std::span<const double> weights(int x, int y) const noexcept {
    return {weights_.data() + offset(x, y), static_cast<std::size_t>(taps())};
  }
  double& bias(int x, int y) noexcept { return bias_[pixel(x, y)]; }
  double bias(int x, int y) const noexcept { return bias_[pixel(x, y)]; }

  std::span<double> all_weights() noexcept { return weights_; }
  std::span<const double> all_weights() const noexcept { return weights_; }
  std::span<double> all_bias() noexcept { return bias_; }
  std::span<const double> all_bias() const noexcept { return bias_; }

  /// (k^2 + 1)-channel raster: the taps in row-major window order, then bias.
  Image to_image() const;
  static KernelField from_image(const Image& img);

  friend bool operator==(const KernelField&, const KernelField&) = default;

 private:
  std::size_t pixel(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  std::size_t offset(int x, int y) const noexcept {
    return pixel(x, y) * static_cast<std::size_t>(taps());
  }

  int width_ = 0;
  int height_ = 0;
  int k_ = kDefaultKernelSize;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// Filtering variants from the ablation: whether kernels are L1-normalized,
/// and whether the bias is added before filtering, after it, or not at all.
enum class Variant {
  kTofKpn,         // normalize, bias first
  kNoNormAftBias,  // vanilla KPN: raw kernel, bias after
  kAftBias,        // normalize, bias after
  kNoNorm,         // raw kernel, bias first
  kNoNormNoBias,   // raw kernel, no bias
  kNoBias,         // normalize, no bias
};
inline constexpr Variant kVanilla = Variant::kNoNormAftBias;

inline constexpr std::array<Variant, 6> kAllVariants{
    Variant::kTofKpn, Variant::kNoNormAftBias, Variant::kAftBias,
    Variant::kNoNorm, Variant::kNoNormNoBias,  Variant::kNoBias};

enum class BiasPlacement { kBefore, kAfter, kNone };

struct VariantTraits {
  bool normalize;
  BiasPlacement bias;
};

constexpr VariantTraits traits(Variant v) noexcept {
  switch (v) {
    case Variant::kTofKpn: return {true, BiasPlacement::kBefore};
    case Variant::kNoNormAftBias: return {false, BiasPlacement::kAfter};
    case Variant::kAftBias: return {true, BiasPlacement::kAfter};
    case Variant::kNoNorm: return {false, BiasPlacement::kBefore};
    case Variant::kNoNormNoBias: return {false, BiasPlacement::kNone};
    case Variant::kNoBias: return {true, BiasPlacement::kNone};
  }
  return {true, BiasPlacement::kBefore};
}

std::string_view name(Variant v) noexcept;
// Accepts the names returned by name() case-insensitively, plus "vanilla".
Variant parse_variant(std::string_view text);

/// "Im2col": a k^2-channel raster whose channel i at p is the i-th element
/// (row-major over the window) of the k x k patch centered at p.
Image extract_patches(const Image& img, int k, Boundary boundary = Boundary::kClamp);

/// w / (sum |w| + kNormEpsilon) per pixel; bias is copied unchanged.
KernelField normalize_kernels(const KernelField& kf);

/// Filters `depth` with per-pixel kernels. Borders replicate.
///   TofKpn:  out(p) = w_hat_p . patch(D + b, p)
///   Vanilla: out(p) = w_p . patch(D, p) + b(p)
Image apply(const Image& depth, const KernelField& kf, Variant variant);

/// Local Jacobian of apply(), in window-slot form: channel i at p holds the
/// derivative w.r.t. the input sitting in slot i of p's (replicate-padded)
/// window. d_weights is w.r.t. p's own raw kernel entries.
struct KpnJacobian {
  Image d_weights;
  Image d_bias;
  Image d_depth;
};

KpnJacobian apply_gradient(const Image& depth, const KernelField& kf, Variant variant);

/// Vector-Jacobian product: gradients of sum_p grad_out(p) * apply(...)(p).
struct KpnBackward {
  KernelField d_kernels;  // weights and bias cotangents
  Image d_depth;
};

KpnBackward apply_backward(const Image& depth, const KernelField& kf, Variant variant,
                           const Image& grad_out);

struct FitOptions {
  double step = 0.05;          // initial step along the summed-loss gradient
  int max_iterations = 500;
  double lambda = metrics::kDefaultLambda;
  double tolerance = 1e-10;    // stop once the loss drops to this
  bool halve_on_increase = true;  // backtrack within an iteration; false = fixed step
  double min_step = 1e-14;     // backtracking gives up below this
  int k = kDefaultKernelSize;
};

struct FitResult {
  KernelField kernels;
  std::vector<double> loss_trace;  // initial loss, then the loss after each iteration
  int iterations = 0;
  bool converged = false;
};

/// Minimizes depth_loss(apply(depth, kf, variant), target) over the kernel
/// field by gradient descent from the identity filter. An iteration takes one
/// step on the bias, then one on the weights; each step starts at
/// options.step and is halved until the loss decreases (or skipped), so the
/// trace never increases. Throws DivergenceError on a non-finite loss.
FitResult direct_fit(const Image& depth, const Image& target, const Mask& mask, Variant variant,
                     const FitOptions& options = {});

}  // namespace tofrgbd::kpn
