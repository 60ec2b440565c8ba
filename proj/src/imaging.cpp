#include "tofrgbd/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tofrgbd/error.hpp"

namespace tofrgbd {

namespace {

constexpr std::array<std::array<double, 3>, 3> kSobelX{{{-1.0, 0.0, 1.0},
                                                        {-2.0, 0.0, 2.0},
                                                        {-1.0, 0.0, 1.0}}};
constexpr std::array<std::array<double, 3>, 3> kSobelY{{{-1.0, -2.0, -1.0},
                                                        {0.0, 0.0, 0.0},
                                                        {1.0, 2.0, 1.0}}};

// Four taps of the bilinear cell containing (x, y), resolved for a boundary
// policy. A tap with valid == false reads as zero.
struct Cell {
  int x0, x1, y0, y1;
  bool v00, v10, v01, v11;
  double fx, fy;
};

Cell make_cell(const Image& img, double x, double y, Boundary boundary) noexcept {
  const double fl_x = std::floor(x);
  const double fl_y = std::floor(y);
  Cell cell{};
  cell.fx = x - fl_x;
  cell.fy = y - fl_y;
  // Far outside the raster every tap collapses onto the edge anyway.
  const double lim_x = static_cast<double>(img.width()) + 1.0;
  const double lim_y = static_cast<double>(img.height()) + 1.0;
  int x0 = static_cast<int>(std::clamp(fl_x, -2.0, lim_x));
  int y0 = static_cast<int>(std::clamp(fl_y, -2.0, lim_y));
  int x1 = x0 + 1;
  int y1 = y0 + 1;
  if (boundary == Boundary::kClamp) {
    const int mx = img.width() - 1;
    const int my = img.height() - 1;
    cell.x0 = std::clamp(x0, 0, mx);
    cell.x1 = std::clamp(x1, 0, mx);
    cell.y0 = std::clamp(y0, 0, my);
    cell.y1 = std::clamp(y1, 0, my);
    cell.v00 = cell.v10 = cell.v01 = cell.v11 = true;
  } else {
    cell.x0 = x0;
    cell.x1 = x1;
    cell.y0 = y0;
    cell.y1 = y1;
    cell.v00 = img.contains(x0, y0);
    cell.v10 = img.contains(x1, y0);
    cell.v01 = img.contains(x0, y1);
    cell.v11 = img.contains(x1, y1);
  }
  return cell;
}

double tap(const Image& img, int x, int y, int c, bool valid) noexcept {
  return valid ? img.at(x, y, c) : 0.0;
}

bool inside(const Image& img, double x, double y) noexcept {
  return x >= 0.0 && y >= 0.0 && x <= static_cast<double>(img.width() - 1) &&
         y <= static_cast<double>(img.height() - 1);
}

void require_flow_size(const Image& img, const FlowField& flow) {
  require_same_size(img, flow, "warp");
  if (img.empty()) throw DimensionError("warp: empty raster");
}

}  // namespace

bool sample_bilinear_into(const Image& img, double x, double y, Boundary boundary,
                          std::span<double> out) noexcept {
  const Cell cell = make_cell(img, x, y, boundary);
  const double w00 = (1.0 - cell.fx) * (1.0 - cell.fy);
  const double w10 = cell.fx * (1.0 - cell.fy);
  const double w01 = (1.0 - cell.fx) * cell.fy;
  const double w11 = cell.fx * cell.fy;
  for (int c = 0; c < img.channels(); ++c) {
    out[static_cast<std::size_t>(c)] = w00 * tap(img, cell.x0, cell.y0, c, cell.v00) +
                                       w10 * tap(img, cell.x1, cell.y0, c, cell.v10) +
                                       w01 * tap(img, cell.x0, cell.y1, c, cell.v01) +
                                       w11 * tap(img, cell.x1, cell.y1, c, cell.v11);
  }
  return inside(img, x, y);
}

BilinearSample sample_bilinear(const Image& img, double x, double y, Boundary boundary) {
  if (img.empty()) throw DimensionError("sample_bilinear: empty raster");
  BilinearSample s;
  s.values.resize(static_cast<std::size_t>(img.channels()));
  s.in_bounds = sample_bilinear_into(img, x, y, boundary, s.values);
  return s;
}

WarpResult warp_image(const Image& img, const FlowField& flow, Boundary boundary) {
  require_flow_size(img, flow);
  WarpResult out{Image(img.width(), img.height(), img.channels()),
                 Mask(img.width(), img.height(), false)};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const bool ok = sample_bilinear_into(img, x + flow.u(x, y), y + flow.v(x, y), boundary,
                                           out.image.pixel(x, y));
      out.valid.set(x, y, ok);
    }
  }
  return out;
}

WarpGradient warp_gradient(const Image& img, const FlowField& flow, Boundary boundary) {
  require_flow_size(img, flow);
  WarpGradient g{Image(img.width(), img.height(), img.channels()),
                 Image(img.width(), img.height(), img.channels())};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Cell cell = make_cell(img, x + flow.u(x, y), y + flow.v(x, y), boundary);
      for (int c = 0; c < img.channels(); ++c) {
        const double i00 = tap(img, cell.x0, cell.y0, c, cell.v00);
        const double i10 = tap(img, cell.x1, cell.y0, c, cell.v10);
        const double i01 = tap(img, cell.x0, cell.y1, c, cell.v01);
        const double i11 = tap(img, cell.x1, cell.y1, c, cell.v11);
        g.d_u.at(x, y, c) = (1.0 - cell.fy) * (i10 - i00) + cell.fy * (i11 - i01);
        g.d_v.at(x, y, c) = (1.0 - cell.fx) * (i01 - i00) + cell.fx * (i11 - i10);
      }
    }
  }
  return g;
}

SobelResult sobel(const Image& img) {
  if (img.channels() != 1) throw ContractError("sobel expects a single-channel raster");
  SobelResult r{Image(img.width(), img.height()), Image(img.width(), img.height())};
  const int mx = img.width() - 1;
  const int my = img.height() - 1;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double gx = 0.0;
      double gy = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const double v = img.at(std::clamp(x + dx, 0, mx), std::clamp(y + dy, 0, my));
          gx += kSobelX[dy + 1][dx + 1] * v;
          gy += kSobelY[dy + 1][dx + 1] * v;
        }
      }
      r.gx.at(x, y) = gx;
      r.gy.at(x, y) = gy;
    }
  }
  return r;
}

Image sobel_adjoint(const Image& grad_gx, const Image& grad_gy) {
  if (grad_gx.channels() != 1 || grad_gy.channels() != 1) {
    throw ContractError("sobel_adjoint expects single-channel cotangents");
  }
  require_same_size(grad_gx, grad_gy, "sobel_adjoint");
  Image out(grad_gx.width(), grad_gx.height());
  const int mx = grad_gx.width() - 1;
  const int my = grad_gx.height() - 1;
  for (int y = 0; y < grad_gx.height(); ++y) {
    for (int x = 0; x < grad_gx.width(); ++x) {
      const double a = grad_gx.at(x, y);
      const double b = grad_gy.at(x, y);
      if (a == 0.0 && b == 0.0) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          out.at(std::clamp(x + dx, 0, mx), std::clamp(y + dy, 0, my)) +=
              kSobelX[dy + 1][dx + 1] * a + kSobelY[dy + 1][dx + 1] * b;
        }
      }
    }
  }
  return out;
}

}  // namespace tofrgbd
