#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tofrgbd/error.hpp"
#include "tofrgbd/imaging.hpp"

using namespace tofrgbd;

TEST_CASE("image construction rejects bad sizes and non-finite data") {
  CHECK_THROWS_AS(Image(-1, 2), DimensionError);
  CHECK_THROWS_AS(Image(2, 2, 0), DimensionError);
  CHECK_THROWS_AS(Image(2, 2, 1, std::vector<double>(3)), DimensionError);
  CHECK_THROWS_AS(Image(1, 1, 1, std::vector<double>{NAN}), DomainError);
  CHECK_THROWS_AS(Image(2, 2, 1, INFINITY), DomainError);
  const Image img(3, 2, 4);
  CHECK(img.data().size() == 3 * 2 * 4);
}

TEST_CASE("mask round-trips through an image") {
  Mask m(4, 3, false);
  m.set(1, 2, true);
  m.set(3, 0, true);
  CHECK(m.count() == 2);
  CHECK(Mask::from_image(m.to_image()) == m);
}

TEST_CASE("bilinear sampling") {
  SUBCASE("constant image") {
    const Image img(5, 4, 1, 2.75);
    for (double x : {0.0, 0.3, 2.9, 4.0}) {
      for (double y : {0.0, 1.5, 3.0}) CHECK(sample_bilinear(img, x, y).values[0] == 2.75);
    }
  }
  SUBCASE("integer coordinates hit the pixel") {
    std::mt19937_64 rng(1);
    const Image img = oracle::uniform_image(rng, 6, 7, -1, 1);
    const auto s = sample_bilinear(img, 3, 5);
    CHECK(s.in_bounds);
    CHECK(s.values[0] == img.at(3, 5));
  }
  SUBCASE("ramp at x = 2.5") {
    const Image img = oracle::ramp_x(6, 3);
    CHECK(sample_bilinear(img, 2.5, 1.0).values[0] == doctest::Approx(2.5).epsilon(1e-15));
  }
  SUBCASE("matches the four-corner oracle on random points") {
    std::mt19937_64 rng(2);
    const Image img = oracle::uniform_image(rng, 7, 5, 0, 1, 3);
    for (int i = 0; i < 200; ++i) {
      const double x = oracle::uniform(rng, 0, 6);
      const double y = oracle::uniform(rng, 0, 4);
      const auto s = sample_bilinear(img, x, y);
      for (int c = 0; c < 3; ++c) CHECK(std::abs(s.values[c] - oracle::bilinear(img, x, y, c)) < 1e-14);
    }
  }
  SUBCASE("out of bounds") {
    const Image img(3, 3, 1, 1.0);
    CHECK_FALSE(sample_bilinear(img, -0.5, 1).in_bounds);
    CHECK(sample_bilinear(img, -0.5, 1, Boundary::kClamp).values[0] == 1.0);
    CHECK(sample_bilinear(img, -0.5, 1, Boundary::kZero).values[0] == doctest::Approx(0.5));
  }
}

TEST_CASE("warp_image") {
  std::mt19937_64 rng(3);
  SUBCASE("zero flow is the identity with an all-valid mask") {
    for (int trial = 0; trial < 5; ++trial) {
      const Image img = oracle::uniform_image(rng, 8, 6, -3, 3, 1 + trial % 3);
      const WarpResult r = warp_image(img, FlowField(8, 6));
      CHECK(r.image == img);
      CHECK(r.valid.count() == 48);
    }
  }
  SUBCASE("unit shift of a ramp") {
    const Image img = oracle::ramp_x(6, 4);
    const WarpResult r = warp_image(img, FlowField(6, 4, 1.0, 0.0));
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 5; ++x) {
        CHECK(r.valid(x, y));
        CHECK(r.image.at(x, y) == x + 1.0);
      }
      CHECK_FALSE(r.valid(5, y));
    }
  }
  SUBCASE("half-pixel shift of a ramp") {
    const Image img = oracle::ramp_x(6, 4);
    const WarpResult r = warp_image(img, FlowField(6, 4, 0.5, 0.0));
    for (int x = 0; x < 5; ++x) CHECK(r.image.at(x, 2) == doctest::Approx(x + 0.5).epsilon(1e-15));
  }
  SUBCASE("linear in the image on valid pixels") {
    const Image a = oracle::uniform_image(rng, 7, 7, 0, 1);
    const Image b = oracle::uniform_image(rng, 7, 7, 0, 1);
    FlowField f(7, 7);
    for (double& v : f.image().data()) v = oracle::uniform(rng, -2, 2);
    Image mix(7, 7);
    for (std::size_t i = 0; i < mix.data().size(); ++i) mix.data()[i] = 2 * a.data()[i] - 3 * b.data()[i];
    const auto wa = warp_image(a, f);
    const auto wb = warp_image(b, f);
    const auto wm = warp_image(mix, f);
    for (int y = 0; y < 7; ++y) {
      for (int x = 0; x < 7; ++x) {
        if (!wm.valid(x, y)) continue;
        CHECK(std::abs(wm.image.at(x, y) - (2 * wa.image.at(x, y) - 3 * wb.image.at(x, y))) < 1e-13);
      }
    }
  }
  SUBCASE("size mismatch") {
    CHECK_THROWS_AS(warp_image(Image(3, 3), FlowField(3, 4)), DimensionError);
  }
}

TEST_CASE("warp_gradient") {
  SUBCASE("constant image has zero gradient") {
    FlowField f(5, 5, 0.3, -0.6);
    const WarpGradient g = warp_gradient(Image(5, 5, 2, 4.0), f);
    for (double v : g.d_u.data()) CHECK(v == 0.0);
    for (double v : g.d_v.data()) CHECK(v == 0.0);
  }
  SUBCASE("ramp has unit x-derivative") {
    const WarpGradient g = warp_gradient(oracle::ramp_x(8, 4), FlowField(8, 4, 1.37, 0.21));
    for (int x = 0; x < 6; ++x) {
      CHECK(g.d_u.at(x, 1) == doctest::Approx(1.0));
      CHECK(g.d_v.at(x, 1) == doctest::Approx(0.0));
    }
  }
  SUBCASE("central differences on a random 8x8 instance") {
    std::mt19937_64 rng(4);
    const Image img = oracle::uniform_image(rng, 8, 8, 0, 1);
    FlowField flow(8, 8);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        // Keep the sample point inside the raster, fractional parts in (0.1, 0.9).
        flow.u(x, y) = std::floor(oracle::uniform(rng, 0, 7)) + oracle::uniform(rng, 0.1, 0.9) - x;
        flow.v(x, y) = std::floor(oracle::uniform(rng, 0, 7)) + oracle::uniform(rng, 0.1, 0.9) - y;
      }
    }
    const WarpGradient g = warp_gradient(img, flow);
    const double eps = 1e-6;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        const double du = oracle::central_difference(
            [&](double u) { return oracle::bilinear(img, x + u, y + flow.v(x, y)); }, flow.u(x, y), eps);
        const double dv = oracle::central_difference(
            [&](double v) { return oracle::bilinear(img, x + flow.u(x, y), y + v); }, flow.v(x, y), eps);
        const double na = std::hypot(g.d_u.at(x, y), g.d_v.at(x, y));
        const double err = std::hypot(g.d_u.at(x, y) - du, g.d_v.at(x, y) - dv) /
                           std::max({na, std::hypot(du, dv), 1e-8});
        CHECK(err < 1e-6);
      }
    }
  }
}

TEST_CASE("sobel") {
  SUBCASE("constant image") {
    const SobelResult s = sobel(Image(6, 5, 1, -7.25));
    for (double v : s.gx.data()) CHECK(v == 0.0);
    for (double v : s.gy.data()) CHECK(v == 0.0);
  }
  SUBCASE("unit ramp gives 8 in the interior") {
    const SobelResult s = sobel(oracle::ramp_x(6, 5));
    for (int y = 1; y < 4; ++y) {
      for (int x = 1; x < 5; ++x) {
        CHECK(s.gx.at(x, y) == 8.0);
        CHECK(s.gy.at(x, y) == 0.0);
      }
    }
  }
  SUBCASE("vertical step responds only on the step columns") {
    Image img(8, 5);
    for (int y = 0; y < 5; ++y) {
      for (int x = 4; x < 8; ++x) img.at(x, y) = 1.0;
    }
    const SobelResult s = sobel(img);
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 8; ++x) {
        const bool on_step = x == 3 || x == 4;
        CHECK(s.gx.at(x, y) == (on_step ? 4.0 : 0.0));  // dark-to-bright left to right is positive
        CHECK(s.gy.at(x, y) == 0.0);
      }
    }
  }
  SUBCASE("adjoint identity <S x, y> = <x, S^T y>") {
    std::mt19937_64 rng(5);
    const Image x = oracle::uniform_image(rng, 7, 6, -1, 1);
    const Image a = oracle::uniform_image(rng, 7, 6, -1, 1);
    const Image b = oracle::uniform_image(rng, 7, 6, -1, 1);
    const SobelResult s = sobel(x);
    const Image t = sobel_adjoint(a, b);
    double lhs = 0.0;
    double rhs = 0.0;
    for (std::size_t i = 0; i < x.data().size(); ++i) {
      lhs += s.gx.data()[i] * a.data()[i] + s.gy.data()[i] * b.data()[i];
      rhs += x.data()[i] * t.data()[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
  SUBCASE("rejects multi-channel input") {
    CHECK_THROWS_AS(sobel(Image(3, 3, 2)), ContractError);
  }
}
