#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "tofrgbd/error.hpp"
#include "tofrgbd/metrics.hpp"
#include "tofrgbd/scene.hpp"
#include "tofrgbd/tof_sim.hpp"

using namespace tofrgbd;
using namespace tofrgbd::sim;

namespace {

RenderOptions small(int w, int h, bool mpi) {
  RenderOptions o;
  o.width = w;
  o.height = h;
  o.mpi = mpi;
  o.bounce_samples = 16;
  return o;
}

}  // namespace

TEST_CASE("ray casting") {
  const Scene wall = wall_scene(2.0, 0.5);
  const auto hit = intersect(wall, Vec3::Zero(), Vec3(0, 0, 1));
  REQUIRE(hit.has_value());
  CHECK(hit->t == doctest::Approx(2.0));
  CHECK(hit->normal.z() == doctest::Approx(-1.0));

  Scene s;
  s.objects.push_back(Object{Object::Kind::kSphere, Vec3(0, 0, 2), Vec3(0.5, 0, 0), {}});
  const auto h2 = intersect(s, Vec3::Zero(), Vec3(0, 0, 1));
  REQUIRE(h2.has_value());
  CHECK(h2->t == doctest::Approx(1.5));
  CHECK_FALSE(visible(s, Vec3(0, 0, 0.1), Vec3(0, 0, 3.9)));
  CHECK(visible(s, Vec3(1.5, 0, 0.1), Vec3(1.5, 0, 3.9)));
}

TEST_CASE("scene validation and serialization") {
  Scene s = random_scene(17);
  CHECK_NOTHROW(s.validate());
  const Scene back = scene_from_json(scene_to_json(s));
  CHECK(scene_to_json(back) == scene_to_json(s));
  CHECK(back.objects.size() == s.objects.size());

  Scene bad = s;
  bad.room.min.x() = 0.5;  // camera outside
  CHECK_THROWS_AS(bad.validate(), DomainError);
  CHECK_THROWS_AS(scene_from_json("{\"format\": 1}"), ManifestError);
  CHECK_THROWS_AS(scene_from_json("not json"), ParseError);
}

TEST_CASE("random scenes are deterministic") {
  CHECK(scene_to_json(random_scene(5)) == scene_to_json(random_scene(5)));
  CHECK(scene_to_json(random_scene(5)) != scene_to_json(random_scene(6)));
}

TEST_CASE("surface sampler covers the walls by area") {
  const Scene wall = wall_scene(3.0, 0.5);
  const SurfaceSampler sampler(wall);
  CHECK(sampler.total_area() == doctest::Approx(600.0 * 600.0));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sampler.draw(rng).point.z() == doctest::Approx(3.0));
}

TEST_CASE("render_transients") {
  SUBCASE("on-axis wall without MPI gives a single impulse at 2r/c") {
    const RenderResult r = render_transients(wall_scene(2.0, 0.5), default_params(9), small(9, 7, false));
    for (int y = 0; y < 7; ++y) {
      for (int x = 0; x < 9; ++x) CHECK(r.transients.at(x, y).size() == 1);
    }
    CHECK(r.transients.at(4, 3)[0].delay == doctest::Approx(4.0 / kSpeedOfLight).epsilon(1e-14));
    CHECK(r.transients.at(4, 3)[0].energy == doctest::Approx(0.5 / 4.0).epsilon(1e-14));
  }
  SUBCASE("a concave room adds later, positive indirect light") {
    Scene room;
    room.seed = 3;
    const RenderResult r = render_transients(room, default_params(16), small(16, 12, true));
    int lit = 0;
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 16; ++x) {
        const auto& imp = r.transients.at(x, y);
        REQUIRE(!imp.empty());
        double indirect = 0.0;
        for (std::size_t i = 1; i < imp.size(); ++i) {
          CHECK(imp[i].delay > imp[0].delay);
          indirect += imp[i].energy;
        }
        if (indirect > 0.0) ++lit;
      }
    }
    CHECK(lit == 16 * 12);
  }
  SUBCASE("results do not depend on the thread count") {
    RenderOptions one = small(12, 9, true);
    one.threads = 1;
    RenderOptions many = one;
    many.threads = 4;
    const Scene s = random_scene(8);
    const RenderResult a = render_transients(s, default_params(12), one);
    const RenderResult b = render_transients(s, default_params(12), many);
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 12; ++x) {
        REQUIRE(a.transients.at(x, y).size() == b.transients.at(x, y).size());
        for (std::size_t i = 0; i < a.transients.at(x, y).size(); ++i) {
          CHECK(a.transients.at(x, y)[i].delay == b.transients.at(x, y)[i].delay);
          CHECK(a.transients.at(x, y)[i].energy == b.transients.at(x, y)[i].energy);
        }
      }
    }
  }
}

TEST_CASE("correlate and phase_to_depth") {
  const double omega = angular(kDefaultFrequency);
  TransientRaster tr(3, 1);
  tr.at(0, 0) = {{1e-8, 0.7}};
  tr.at(1, 0) = {{0.0, 1.0}, {std::numbers::pi / 2 / omega, 1.0}};
  const CorrelationPair cp = correlate(tr, omega);
  CHECK(cp.c_sin.at(0, 0) == doctest::Approx(0.7 * std::sin(omega * 1e-8)));
  CHECK(cp.c_cos.at(0, 0) == doctest::Approx(0.7 * std::cos(omega * 1e-8)));
  CHECK(std::atan2(cp.c_sin.at(1, 0), cp.c_cos.at(1, 0)) == doctest::Approx(std::numbers::pi / 4));
  CHECK(cp.c_sin.at(2, 0) == 0.0);
  CHECK(cp.c_cos.at(2, 0) == 0.0);

  const PhaseDepth pd = phase_to_depth(cp);
  CHECK(pd.valid(0, 0));
  CHECK_FALSE(pd.valid(2, 0));
  CHECK(pd.radial.at(2, 0) == 0.0);

  SUBCASE("direct impulses invert exactly inside the unambiguous range") {
    std::mt19937_64 rng(2);
    TransientRaster t(200, 1);
    std::vector<double> truth(200);
    for (int i = 0; i < 200; ++i) {
      truth[static_cast<std::size_t>(i)] = oracle::uniform(rng, 0.05, unambiguous_range(kDefaultFrequency) - 0.05);
      t.at(i, 0) = {{2 * truth[static_cast<std::size_t>(i)] / kSpeedOfLight, oracle::uniform(rng, 0.01, 1)}};
    }
    const PhaseDepth d = phase_to_depth(correlate(t, omega));
    for (int i = 0; i < 200; ++i) {
      CHECK(d.radial.at(i, 0) == doctest::Approx(truth[static_cast<std::size_t>(i)]).epsilon(1e-9));
    }
  }
}

TEST_CASE("add_noise") {
  std::mt19937_64 rng(3);
  CorrelationPair cp{oracle::uniform_image(rng, 6, 5, -1, 1), oracle::uniform_image(rng, 6, 5, -1, 1), 1.0};
  std::mt19937_64 a(9);
  const CorrelationPair same = add_noise(cp, 0.0, a);
  CHECK(same.c_sin == cp.c_sin);
  CHECK(same.c_cos == cp.c_cos);
  std::mt19937_64 b(9);
  std::mt19937_64 c(9);
  CHECK(add_noise(cp, 0.1, b).c_sin == add_noise(cp, 0.1, c).c_sin);
  CHECK_THROWS_AS(add_noise(cp, -1.0, a), DomainError);
}

TEST_CASE("noise hurts dark pixels more") {
  // Fronto-parallel wall, 1728 pixels per albedo.
  const auto depth_spread = [](double albedo) {
    const Scene wall = wall_scene(2.0, albedo, 4);
    const RenderResult r = render_transients(wall, default_params(48), small(48, 36, false));
    const double omega = angular(kDefaultFrequency);
    std::mt19937_64 rng(5);
    const PhaseDepth pd = phase_to_depth(add_noise(correlate(r.transients, omega), 0.002, rng));
    double sum = 0.0;
    double sq = 0.0;
    int n = 0;
    for (int y = 0; y < 36; ++y) {
      for (int x = 0; x < 48; ++x) {
        const double e = pd.radial.at(x, y) - r.radial.at(x, y);
        sum += e;
        sq += e * e;
        ++n;
      }
    }
    return std::sqrt(sq / n - (sum / n) * (sum / n));
  };
  CHECK(depth_spread(0.8) < depth_spread(0.2));
}

TEST_CASE("normalize_amplitude") {
  std::mt19937_64 rng(6);
  const Image depth = oracle::uniform_image(rng, 5, 4, 0.5, 4);
  Image raw(5, 4);
  for (std::size_t i = 0; i < raw.data().size(); ++i) raw.data()[i] = 0.3 / (depth.data()[i] * depth.data()[i]);
  const Image n = normalize_amplitude(raw, depth);
  for (double v : n.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
  const Image zero = normalize_amplitude(Image(5, 4), depth);
  for (double v : zero.data()) CHECK(v == 0.0);
}

TEST_CASE("normalize_unit_range") {
  Image img(3, 1);
  img.at(0, 0) = 2;
  img.at(1, 0) = 4;
  img.at(2, 0) = 100;
  Mask m(3, 1, true);
  m.set(2, 0, false);
  const Image n = normalize_unit_range(img, m);
  CHECK(n.at(0, 0) == 0.0);
  CHECK(n.at(1, 0) == 1.0);
  CHECK(n.at(2, 0) == 0.0);
}

TEST_CASE("bin_transients moves delays by at most half a bin") {
  TransientRaster tr(1, 1);
  tr.at(0, 0) = {{1.03e-9, 1.0}, {1.04e-9, 2.0}, {5.5e-9, 0.5}};
  const TransientRaster b = bin_transients(tr, 1e-10);
  const auto& imp = b.at(0, 0);
  REQUIRE(imp.size() == 2);
  CHECK(imp[0].energy == doctest::Approx(3.0));
  CHECK(std::abs(imp[0].delay - 1.03e-9) <= 0.5e-10);
}

TEST_CASE("synthesize_sample") {
  SynthConfig cfg;
  cfg.render = small(40, 30, false);
  const Scene s = random_scene(21);
  const WeakCalibParams p = default_params(40);
  const DataSample a = synthesize_sample(s, p, cfg);
  CHECK(a.aligned);
  REQUIRE(a.mask.count() > 1000);
  double lo = 1e9;
  double hi = 0;
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) {
      if (!a.mask(x, y)) continue;
      lo = std::min(lo, a.gt_depth.at(x, y));
      hi = std::max(hi, a.gt_depth.at(x, y));
    }
  }
  CHECK(metrics::masked_mae(a.tof_depth, a.gt_depth, a.mask) < 1e-6 * (hi - lo));

  const DataSample b = synthesize_sample(s, p, cfg);
  CHECK(a.tof_depth == b.tof_depth);
  CHECK(a.amplitude == b.amplitude);
  CHECK(a.rgb == b.rgb);

  cfg.render.mpi = true;
  const DataSample m = synthesize_sample(s, p, cfg);
  CHECK(metrics::masked_mean_error(m.tof_depth, m.gt_depth, m.mask) > 0.0);
}
