#include "tofrgbd/kpn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "tofrgbd/error.hpp"

namespace tofrgbd::kpn {

namespace {

void check_k(int k, const char* what) {
  if (k < 1 || k % 2 == 0) {
    throw ContractError(std::string(what) + ": kernel size must be odd and positive, got " +
                        std::to_string(k));
  }
}

void check_operands(const Image& depth, const KernelField& kf, const char* what) {
  if (depth.channels() != 1) throw ContractError(std::string(what) + " expects a one-channel depth");
  if (depth.width() != kf.width() || depth.height() != kf.height()) {
    throw DimensionError(std::string(what) + ": depth is " + std::to_string(depth.width()) + "x" +
                         std::to_string(depth.height()) + " but kernels are " +
                         std::to_string(kf.width()) + "x" + std::to_string(kf.height()));
  }
}

double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Replicate-padded window position of slot i around (x, y).
struct Tap {
  int x;
  int y;
};

Tap tap(int x, int y, int i, int k, int w, int h) noexcept {
  const int r = k / 2;
  return {std::clamp(x + i % k - r, 0, w - 1), std::clamp(y + i / k - r, 0, h - 1)};
}

// Everything about one output pixel that the forward pass and its
// derivatives share.
struct PixelState {
  std::vector<double> inputs;     // x_i: D (+ b) at slot i
  std::vector<double> effective;  // weights actually dotted with inputs
  double denom = 1.0;             // S + eps for normalized variants
  double filtered = 0.0;          // effective . inputs
  double out = 0.0;
};

void evaluate(const Image& depth, const KernelField& kf, VariantTraits t, int x, int y,
              PixelState& st) {
  const int k = kf.k();
  const int n = kf.taps();
  const auto w = kf.weights(x, y);
  st.inputs.resize(static_cast<std::size_t>(n));
  st.effective.resize(static_cast<std::size_t>(n));
  double l1 = 0.0;
  for (int i = 0; i < n; ++i) l1 += std::abs(w[static_cast<std::size_t>(i)]);
  st.denom = t.normalize ? l1 + kNormEpsilon : 1.0;
  st.filtered = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(i);
    const Tap q = tap(x, y, i, k, depth.width(), depth.height());
    st.inputs[s] = depth.at(q.x, q.y);
    if (t.bias == BiasPlacement::kBefore) st.inputs[s] += kf.bias(q.x, q.y);
    st.effective[s] = t.normalize ? w[s] / st.denom : w[s];
    st.filtered += st.effective[s] * st.inputs[s];
  }
  st.out = st.filtered;
  if (t.bias == BiasPlacement::kAfter) st.out += kf.bias(x, y);
}

// d filtered / d w_i.
double weight_partial(const PixelState& st, std::span<const double> w, std::size_t i,
                      bool normalize) noexcept {
  if (!normalize) return st.inputs[i];
  return (st.inputs[i] - sign(w[i]) * st.filtered) / st.denom;
}

// Cotangent-weighted weight partial for the VJP. A raw weight sitting exactly
// at zero is a kink of |w|; there the minimum-norm subgradient is used, which
// is zero unless moving the weight off zero in one direction lowers g * out.
double weight_cotangent(const PixelState& st, std::span<const double> w, std::size_t i,
                        bool normalize, double g) noexcept {
  if (!normalize || w[i] != 0.0) return g * weight_partial(st, w, i, normalize);
  const double right = g * (st.inputs[i] - st.filtered) / st.denom;
  const double left = g * (st.inputs[i] + st.filtered) / st.denom;
  if (right < 0.0) return right;
  if (left > 0.0) return left;
  return 0.0;
}

}  // namespace

KernelField::KernelField(int width, int height, int k) : width_(width), height_(height), k_(k) {
  check_k(k, "KernelField");
  if (width < 0 || height < 0) throw ContractError("KernelField: negative size");
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  weights_.assign(n * static_cast<std::size_t>(k * k), 0.0);
  bias_.assign(n, 0.0);
}

KernelField KernelField::identity(int width, int height, int k) {
  KernelField kf(width, height, k);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) kf.weights(x, y)[static_cast<std::size_t>(kf.center_tap())] = 1.0;
  }
  return kf;
}

Image KernelField::to_image() const {
  Image img(width_, height_, taps() + 1);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const auto w = weights(x, y);
      auto px = img.pixel(x, y);
      std::copy(w.begin(), w.end(), px.begin());
      px[static_cast<std::size_t>(taps())] = bias(x, y);
    }
  }
  return img;
}

KernelField KernelField::from_image(const Image& img) {
  const int taps = img.channels() - 1;
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(std::max(taps, 0)))));
  if (taps < 1 || k * k != taps || k % 2 == 0) {
    throw ContractError("KernelField::from_image: " + std::to_string(img.channels()) +
                        " channels is not k*k + 1 for an odd k");
  }
  KernelField kf(img.width(), img.height(), k);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto px = img.pixel(x, y);
      auto w = kf.weights(x, y);
      std::copy(px.begin(), px.begin() + taps, w.begin());
      kf.bias(x, y) = px[static_cast<std::size_t>(taps)];
    }
  }
  return kf;
}

std::string_view name(Variant v) noexcept {
  switch (v) {
    case Variant::kTofKpn: return "TofKpn";
    case Variant::kNoNormAftBias: return "NoNormAftBias";
    case Variant::kAftBias: return "AftBias";
    case Variant::kNoNorm: return "NoNorm";
    case Variant::kNoNormNoBias: return "NoNormNoBias";
    case Variant::kNoBias: return "NoBias";
  }
  return "TofKpn";
}

Variant parse_variant(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "vanilla") return kVanilla;
  for (const Variant v : kAllVariants) {
    std::string n(name(v));
    std::transform(n.begin(), n.end(), n.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (n == lower) return v;
  }
  throw ContractError("unknown KPN variant '" + std::string(text) + "'");
}

Image extract_patches(const Image& img, int k, Boundary boundary) {
  check_k(k, "extract_patches");
  if (img.channels() != 1) throw ContractError("extract_patches expects a one-channel image");
  const int w = img.width();
  const int h = img.height();
  const int r = k / 2;
  Image out(w, h, k * k);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int i = 0; i < k * k; ++i) {
        const int qx = x + i % k - r;
        const int qy = y + i / k - r;
        if (boundary == Boundary::kZero && !img.contains(qx, qy)) continue;
        out.at(x, y, i) = img.at(std::clamp(qx, 0, w - 1), std::clamp(qy, 0, h - 1));
      }
    }
  }
  return out;
}

KernelField normalize_kernels(const KernelField& kf) {
  KernelField out = kf;
  for (int y = 0; y < kf.height(); ++y) {
    for (int x = 0; x < kf.width(); ++x) {
      auto w = out.weights(x, y);
      double l1 = 0.0;
      for (const double v : w) l1 += std::abs(v);
      const double denom = l1 + kNormEpsilon;
      for (double& v : w) v /= denom;
    }
  }
  return out;
}

Image apply(const Image& depth, const KernelField& kf, Variant variant) {
  check_operands(depth, kf, "kpn::apply");
  const VariantTraits t = traits(variant);
  Image out(depth.width(), depth.height());
  PixelState st;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      evaluate(depth, kf, t, x, y, st);
      out.at(x, y) = st.out;
    }
  }
  return out;
}

KpnJacobian apply_gradient(const Image& depth, const KernelField& kf, Variant variant) {
  check_operands(depth, kf, "kpn::apply_gradient");
  const VariantTraits t = traits(variant);
  const int w = depth.width();
  const int h = depth.height();
  const int n = kf.taps();
  KpnJacobian jac{Image(w, h, n), Image(w, h, n), Image(w, h, n)};
  PixelState st;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      evaluate(depth, kf, t, x, y, st);
      const auto weights = kf.weights(x, y);
      for (int i = 0; i < n; ++i) {
        const auto s = static_cast<std::size_t>(i);
        jac.d_weights.at(x, y, i) = weight_partial(st, weights, s, t.normalize);
        jac.d_depth.at(x, y, i) = st.effective[s];
        if (t.bias == BiasPlacement::kBefore) jac.d_bias.at(x, y, i) = st.effective[s];
      }
      if (t.bias == BiasPlacement::kAfter) jac.d_bias.at(x, y, kf.center_tap()) = 1.0;
    }
  }
  return jac;
}

KpnBackward apply_backward(const Image& depth, const KernelField& kf, Variant variant,
                           const Image& grad_out) {
  check_operands(depth, kf, "kpn::apply_backward");
  if (grad_out.channels() != 1) throw ContractError("kpn::apply_backward expects a one-channel cotangent");
  require_same_size(depth, grad_out, "kpn::apply_backward");
  const VariantTraits t = traits(variant);
  const int w = depth.width();
  const int h = depth.height();
  const int k = kf.k();
  const int n = kf.taps();
  KpnBackward back{KernelField(w, h, k), Image(w, h)};
  PixelState st;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = grad_out.at(x, y);
      if (g == 0.0) continue;
      evaluate(depth, kf, t, x, y, st);
      const auto weights = kf.weights(x, y);
      auto dw = back.d_kernels.weights(x, y);
      for (int i = 0; i < n; ++i) {
        const auto s = static_cast<std::size_t>(i);
        dw[s] += weight_cotangent(st, weights, s, t.normalize, g);
        const Tap q = tap(x, y, i, k, w, h);
        const double through = g * st.effective[s];
        back.d_depth.at(q.x, q.y) += through;
        if (t.bias == BiasPlacement::kBefore) back.d_kernels.bias(q.x, q.y) += through;
      }
      if (t.bias == BiasPlacement::kAfter) back.d_kernels.bias(x, y) += g;
    }
  }
  return back;
}

FitResult direct_fit(const Image& depth, const Image& target, const Mask& mask, Variant variant,
                     const FitOptions& options) {
  if (depth.channels() != 1 || target.channels() != 1) {
    throw ContractError("direct_fit expects one-channel depth and target");
  }
  require_same_size(depth, target, "direct_fit");
  require_same_size(depth, mask, "direct_fit");
  const std::size_t valid = mask.count();
  if (valid == 0) throw DegenerateError("direct_fit: empty mask");
  if (!(options.step > 0.0) || options.max_iterations < 0) {
    throw ContractError("direct_fit: step must be positive and max_iterations non-negative");
  }

  FitResult result;
  result.kernels = KernelField::identity(depth.width(), depth.height(), options.k);
  const auto loss_of = [&](const KernelField& kf) {
    return metrics::depth_loss(apply(depth, kf, variant), target, mask, options.lambda).total;
  };

  double loss = loss_of(result.kernels);
  result.loss_trace.push_back(loss);
  if (!std::isfinite(loss)) {
    throw DivergenceError("direct_fit: non-finite initial loss", result.loss_trace);
  }

  // Steps follow the gradient of the summed (not averaged) loss so the step
  // size does not depend on the number of valid pixels. Each iteration
  // updates the bias block and then the weight block, each with its own
  // backtracking: a joint step is usually not a descent direction at the
  // Sobel kinks, because weight updates break the flatness of the error.
  const double base = options.step * static_cast<double>(valid);
  const double smallest = options.min_step * static_cast<double>(valid);
  enum class Block { kBias, kWeights };
  KernelField trial;

  const auto descend = [&](Block block) {
    const Image pred = apply(depth, result.kernels, variant);
    const Image cot = metrics::depth_loss_gradient(pred, target, mask, options.lambda);
    const KpnBackward grad = apply_backward(depth, result.kernels, variant, cot);
    const auto g = block == Block::kBias ? grad.d_kernels.all_bias()
                                         : grad.d_kernels.all_weights();
    if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) return false;

    for (double scale = base; scale >= smallest; scale *= 0.5) {
      trial = result.kernels;
      auto p = block == Block::kBias ? trial.all_bias() : trial.all_weights();
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= scale * g[i];
      const double next = loss_of(trial);
      if (!std::isfinite(next)) {
        result.loss_trace.push_back(next);
        throw DivergenceError("direct_fit: loss became non-finite at iteration " +
                                  std::to_string(result.iterations),
                              result.loss_trace);
      }
      if (next < loss || !options.halve_on_increase) {
        result.kernels = std::move(trial);
        loss = next;
        return true;
      }
    }
    return false;
  };

  while (result.iterations < options.max_iterations && loss > options.tolerance) {
    ++result.iterations;
    const bool moved_bias = traits(variant).bias != BiasPlacement::kNone && descend(Block::kBias);
    const bool moved_weights = loss > options.tolerance && descend(Block::kWeights);
    result.loss_trace.push_back(loss);
    if (!moved_bias && !moved_weights) break;  // stationary down to min_step
  }
  if (loss <= options.tolerance) result.converged = true;
  return result;
}

}  // namespace tofrgbd::kpn
