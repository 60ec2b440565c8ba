#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tofrgbd/calib.hpp"
#include "tofrgbd/error.hpp"
#include "tofrgbd/gradcheck.hpp"

using namespace tofrgbd;
using calib::CalibEstimate;

namespace {

FlowField synth_flow(const Image& depth, double tx, double ty, double cx, double cy) {
  FlowField f(depth.width(), depth.height());
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      f.u(x, y) = tx / depth.at(x, y) + cx;
      f.v(x, y) = ty / depth.at(x, y) + cy;
    }
  }
  return f;
}

double objective(const FlowField& f, const Image& d, const Mask& m, const CalibEstimate& e) {
  double s = 0.0;
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (!m(x, y)) continue;
      const double ru = f.u(x, y) - (e.tx / d.at(x, y) + e.cx);
      const double rv = f.v(x, y) - (e.ty / d.at(x, y) + e.cy);
      s += ru * ru + rv * rv;
    }
  }
  return s;
}

}  // namespace

TEST_CASE("estimate_params closed cases") {
  std::mt19937_64 rng(1);
  const Image depth = oracle::uniform_image(rng, 8, 8, 0.5, 4);
  const Mask all(8, 8, true);
  SUBCASE("zero flow") {
    const CalibEstimate e = calib::estimate_params(FlowField(8, 8), depth, all);
    CHECK(e.tx == 0.0);
    CHECK(e.cx == 0.0);
    CHECK(e.residual_rms == 0.0);
  }
  SUBCASE("constant flow goes to the intercept") {
    const CalibEstimate e = calib::estimate_params(FlowField(8, 8, 5, -2), depth, all);
    CHECK(std::abs(e.tx) < 1e-12);
    CHECK(std::abs(e.ty) < 1e-12);
    CHECK(e.cx == doctest::Approx(5.0).epsilon(1e-13));
    CHECK(e.cy == doctest::Approx(-2.0).epsilon(1e-13));
  }
  SUBCASE("recovery against the pseudo-inverse oracle") {
    const FlowField f = synth_flow(depth, 30, 0, 2, 0);
    const CalibEstimate e = calib::estimate_params(f, depth, all);
    const oracle::LineFit ox = oracle::inverse_depth_fit(depth, f.image().channel(0), all);
    CHECK(std::abs(e.tx - 30) / 30 < 1e-9);
    CHECK(std::abs(e.cx - 2) / 2 < 1e-9);
    CHECK(e.tx == doctest::Approx(ox.slope).epsilon(1e-12));
    CHECK(e.cx == doctest::Approx(ox.intercept).epsilon(1e-12));
    CHECK(e.pixel_count == 64);
  }
}

TEST_CASE("estimate_params matches the oracle on noisy masked data") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const gradcheck::CalibInstance inst = gradcheck::random_calib_instance(rng, 9, 7);
    const CalibEstimate e = calib::estimate_params(inst.flow, inst.depth, inst.mask);
    const auto ox = oracle::inverse_depth_fit(inst.depth, inst.flow.image().channel(0), inst.mask);
    const auto oy = oracle::inverse_depth_fit(inst.depth, inst.flow.image().channel(1), inst.mask);
    CHECK(e.tx == doctest::Approx(ox.slope).epsilon(1e-10));
    CHECK(e.cx == doctest::Approx(ox.intercept).epsilon(1e-10));
    CHECK(e.ty == doctest::Approx(oy.slope).epsilon(1e-10));
    CHECK(e.cy == doctest::Approx(oy.intercept).epsilon(1e-10));
  }
}

TEST_CASE("estimate_params properties") {
  std::mt19937_64 rng(3);
  const gradcheck::CalibInstance inst = gradcheck::random_calib_instance(rng, 10, 8);
  const CalibEstimate base = calib::estimate_params(inst.flow, inst.depth, inst.mask);

  SUBCASE("x and y decouple") {
    FlowField f = inst.flow;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 10; ++x) f.v(x, y) = oracle::uniform(rng, -50, 50);
    }
    const CalibEstimate e = calib::estimate_params(f, inst.depth, inst.mask);
    CHECK(e.tx == base.tx);
    CHECK(e.cx == base.cx);
  }
  SUBCASE("constant flow shift moves only the intercept") {
    FlowField f = inst.flow;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 10; ++x) {
        f.u(x, y) += 1.25;
        f.v(x, y) -= 0.75;
      }
    }
    const CalibEstimate e = calib::estimate_params(f, inst.depth, inst.mask);
    CHECK(e.cx - base.cx == doctest::Approx(1.25).epsilon(1e-10));
    CHECK(e.cy - base.cy == doctest::Approx(-0.75).epsilon(1e-10));
    CHECK(e.tx == doctest::Approx(base.tx).epsilon(1e-10));
    CHECK(e.ty == doctest::Approx(base.ty).epsilon(1e-10));
  }
  SUBCASE("least-squares optimality") {
    const double best = objective(inst.flow, inst.depth, inst.mask, base);
    for (int p = 0; p < 4; ++p) {
      for (double delta : {-1e-3, 1e-3}) {
        CalibEstimate e = base;
        (p == 0 ? e.tx : p == 1 ? e.ty : p == 2 ? e.cx : e.cy) += delta;
        CHECK(objective(inst.flow, inst.depth, inst.mask, e) >= best);
      }
    }
  }
  SUBCASE("values under the mask do not matter") {
    FlowField f = inst.flow;
    Image d = inst.depth;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 10; ++x) {
        if (inst.mask(x, y)) continue;
        f.u(x, y) = 1e6;
        d.at(x, y) = -3;
      }
    }
    const CalibEstimate e = calib::estimate_params(f, d, inst.mask);
    CHECK(e.tx == base.tx);
    CHECK(e.cy == base.cy);
  }
}

TEST_CASE("estimate_params degeneracies") {
  const Mask all(4, 4, true);
  CHECK_THROWS_AS(calib::estimate_params(FlowField(4, 4), Image(4, 4, 1, 2.0), all), DegenerateError);
  Mask one(4, 4, false);
  one.set(1, 1, true);
  std::mt19937_64 rng(4);
  const Image d = oracle::uniform_image(rng, 4, 4, 1, 2);
  CHECK_THROWS_AS(calib::estimate_params(FlowField(4, 4), d, one), DegenerateError);
  CHECK_THROWS_AS(calib::estimate_params(FlowField(4, 4), d, Mask(4, 4, false)), DegenerateError);
  CHECK_THROWS_AS(calib::estimate_params(FlowField(4, 5), d, all), DimensionError);
}

TEST_CASE("convt_flow") {
  std::mt19937_64 rng(5);
  const Image depth = oracle::uniform_image(rng, 7, 6, 0.5, 5);
  SUBCASE("zero estimate") {
    const FlowField f = calib::convt_flow(depth, CalibEstimate{});
    for (double v : f.image().data()) CHECK(v == 0.0);
  }
  SUBCASE("unit depth") {
    const FlowField f = calib::convt_flow(Image(3, 3, 1, 1.0), CalibEstimate{2, 0, 3, 0});
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) CHECK(f.u(x, y) == 5.0);
    }
  }
  SUBCASE("round trip through the estimate") {
    const FlowField f = synth_flow(depth, -17.5, 42.0, 3.25, -8.0);
    const FlowField back = calib::convt_flow(depth, calib::estimate_params(f, depth, Mask(7, 6, true)));
    for (std::size_t i = 0; i < f.image().data().size(); ++i) {
      CHECK(std::abs(back.image().data()[i] - f.image().data()[i]) < 1e-12);
    }
  }
}

TEST_CASE("estimate_params_jacobian") {
  std::mt19937_64 rng(6);
  SUBCASE("intercept responds one-to-one to a uniform shift") {
    const gradcheck::CalibInstance inst = gradcheck::random_calib_instance(rng, 6, 6);
    const calib::CalibJacobian j = calib::estimate_params_jacobian(inst.flow, inst.depth, inst.mask);
    double sum_cx = 0.0;
    double sum_tx = 0.0;
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 6; ++x) {
        sum_cx += j.wrt_flow_u.at(x, y, calib::kCx);
        sum_tx += j.wrt_flow_u.at(x, y, calib::kTx);
        if (!inst.mask(x, y)) {
          for (int p = 0; p < 4; ++p) {
            CHECK(j.wrt_flow_u.at(x, y, p) == 0.0);
            CHECK(j.wrt_flow_v.at(x, y, p) == 0.0);
            CHECK(j.wrt_depth.at(x, y, p) == 0.0);
          }
        }
      }
    }
    CHECK(sum_cx == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(sum_tx) < 1e-10);
  }
  SUBCASE("central differences on a random 6x6 instance") {
    const gradcheck::CalibInstance inst = gradcheck::random_calib_instance(rng, 6, 6);
    const calib::CalibJacobian j = calib::estimate_params_jacobian(inst.flow, inst.depth, inst.mask);
    const double eps = 1e-6;
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 6; ++x) {
        if (!inst.mask(x, y)) continue;
        // Depth column, parameter t_x, through the independent oracle.
        const auto tx_of = [&](double z) {
          Image d = inst.depth;
          d.at(x, y) = z;
          return oracle::inverse_depth_fit(d, inst.flow.image().channel(0), inst.mask).slope;
        };
        const double fd = oracle::central_difference(tx_of, inst.depth.at(x, y), eps);
        const double an = j.wrt_depth.at(x, y, calib::kTx);
        CHECK(std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8}) < 1e-6);
      }
    }
  }
}

TEST_CASE("to_physical divides by the focal lengths") {
  const WeakCalibParams p = calib::to_physical(CalibEstimate{50, -25, 1, 2}, 500, 250);
  CHECK(p.tx == doctest::Approx(0.1));
  CHECK(p.ty == doctest::Approx(-0.1));
  CHECK(p.cx == 1.0);
  CHECK(p.fx == 500.0);
}
