#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <set>

#include <json.hpp>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "tofrgbd/dataset_io.hpp"
#include "tofrgbd/error.hpp"
#include "tofrgbd/metrics.hpp"
#include "tofrgbd/tof_sim.hpp"

using namespace tofrgbd;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = TOFRGBD_FIXTURE_DIR;

DataSample small_sample(std::uint64_t seed) {
  sim::SynthConfig cfg;
  cfg.render.width = 24;
  cfg.render.height = 18;
  cfg.render.mpi = false;
  return sim::synthesize_sample(sim::random_scene(seed), sim::default_params(24), cfg);
}

}  // namespace

TEST_CASE("PFM golden files") {
  SUBCASE("writer output is byte-identical to the independent writer") {
    CHECK(io::encode_pfm(Image(2, 2, 1, 1.5)) == io::read_text(kFixtures / "const_2x2_le.pfm"));
  }
  SUBCASE("little-endian gray with a non-unit scale") {
    const Image img = io::read_pfm(kFixtures / "gray_3x2_le.pfm");
    REQUIRE(img.channels() == 1);
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 3; ++x) CHECK(img.at(x, y) == x + 10 * y);
    }
  }
  SUBCASE("big-endian color is read and byte-swapped") {
    const Image img = io::read_pfm(kFixtures / "rgb_3x2_be.pfm");
    REQUIRE(img.channels() == 3);
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 3; ++x) {
        for (int c = 0; c < 3; ++c) CHECK(img.at(x, y, c) == x + 10 * y + 100 * c);
      }
    }
  }
  SUBCASE("flow drops the padding channel") {
    const FlowField f = io::read_flow(kFixtures / "flow_2x2_le.pfm");
    CHECK(f.u(1, 0) == 1.25);
    CHECK(f.v(0, 1) == -1.0);
  }
}

TEST_CASE("PFM round trips") {
  std::mt19937_64 rng(1);
  for (int c : {1, 2, 3, 5}) {
    const Image img = oracle::uniform_image(rng, 5, 4, -100, 100, c);
    const Image back = io::decode_pfm(io::encode_pfm(img), c == 2 ? 2 : 0);
    REQUIRE(back.channels() == c);
    for (std::size_t i = 0; i < img.data().size(); ++i) {
      CHECK(back.data()[i] == static_cast<double>(static_cast<float>(img.data()[i])));
    }
  }
  const Image exact(2, 2, 1, 0.25);
  CHECK(io::decode_pfm(io::encode_pfm(exact)) == exact);
  const std::string flow_bytes = io::encode_pfm(FlowField(2, 2, 1, 2).image());
  CHECK(flow_bytes.rfind("PF\n", 0) == 0);
}

TEST_CASE("PFM errors") {
  CHECK_THROWS_AS(io::encode_pfm(Image(2, 2), 1.0), ContractError);
  CHECK_THROWS_AS(io::decode_pfm("P6\n2 2\n-1\n"), ParseError);
  CHECK_THROWS_AS(io::decode_pfm("Pf\n2 x\n-1\n"), ParseError);
  std::string truncated = io::encode_pfm(Image(2, 2, 1, 1.0));
  truncated.pop_back();
  try {
    io::decode_pfm(truncated);
    FAIL("truncated payload accepted");
  } catch (const ParseError& e) {
    CHECK(e.offset() > 0);
  }
  std::string nan_payload = io::encode_pfm(Image(1, 1, 1, 1.0));
  const float nan = NAN;
  std::memcpy(nan_payload.data() + nan_payload.size() - 4, &nan, 4);
  CHECK_THROWS_AS(io::decode_pfm(nan_payload), ParseError);
}

TEST_CASE("masks and kernels round-trip exactly") {
  const test::TempDir dir;
  std::mt19937_64 rng(2);
  const Mask m = oracle::random_mask(rng, 7, 5, 0.5);
  io::write_mask(dir.path() / "m.pfm", m);
  CHECK(io::read_mask(dir.path() / "m.pfm") == m);

  kpn::KernelField kf = kpn::KernelField::identity(3, 2);
  kf.bias(1, 1) = 0.5;
  io::write_kernels(dir.path() / "k.pfm", kf);
  CHECK(io::read_kernels(dir.path() / "k.pfm") == kf);
}

TEST_CASE("sample directories") {
  const test::TempDir dir;
  const DataSample s = small_sample(3);
  io::write_sample(dir.path() / "s", s, "s0");

  SUBCASE("round trip within float precision") {
    const DataSample back = io::read_sample(dir.path() / "s");
    CHECK(back.mask == s.mask);
    CHECK(back.aligned == s.aligned);
    CHECK(back.seed == s.seed);
    CHECK(back.calib == s.calib);
    CHECK(metrics::masked_mae(back.gt_depth, s.gt_depth, s.mask) < 1e-6);
    CHECK(metrics::masked_mae(back.tof_depth, s.tof_depth, s.mask) < 1e-6);
  }
  SUBCASE("misaligned flag and flow survive") {
    DataSample m = s;
    m.aligned = false;
    m.gt_flow = FlowField(24, 18, 0.5, -0.25);
    io::write_sample(dir.path() / "m", m, "m0");
    const DataSample back = io::read_sample(dir.path() / "m");
    CHECK_FALSE(back.aligned);
    REQUIRE(back.gt_flow.has_value());
    CHECK(*back.gt_flow == *m.gt_flow);
  }
  SUBCASE("missing file names the field") {
    fs::remove(dir.path() / "s" / "gt_depth.pfm");
    try {
      io::read_manifest(dir.path() / "s");
      FAIL("missing file accepted");
    } catch (const ManifestError& e) {
      CHECK(e.field() == "gt_depth");
    }
  }
  SUBCASE("size mismatch names the file") {
    io::write_pfm(dir.path() / "s" / "amplitude.pfm", Image(5, 5));
    try {
      io::read_sample(dir.path() / "s");
      FAIL("size mismatch accepted");
    } catch (const ManifestError& e) {
      CHECK(std::string(e.what()).find("amplitude") != std::string::npos);
    }
  }
  SUBCASE("malformed manifest") {
    io::write_text(dir.path() / "s" / "meta.json", "{\"format\": 1}");
    CHECK_THROWS_AS(io::read_manifest(dir.path() / "s"), ManifestError);
  }
}

TEST_CASE("split_dataset") {
  std::vector<io::SampleManifest> all(10);
  for (int i = 0; i < 10; ++i) all[static_cast<std::size_t>(i)].id = "s" + std::to_string(i);
  const auto [train, test] = io::split_dataset(all, 0.2, 42);
  CHECK(train.size() == 8);
  CHECK(test.size() == 2);
  std::set<std::string> seen;
  for (const auto& m : train) seen.insert(m.id);
  for (const auto& m : test) CHECK(seen.insert(m.id).second);
  CHECK(seen.size() == 10);

  const auto again = io::split_dataset(all, 0.2, 42);
  for (std::size_t i = 0; i < 2; ++i) CHECK(again.second[i].id == test[i].id);
  CHECK_THROWS_AS(io::split_dataset({}, 0.2, 1), DegenerateError);
  CHECK_THROWS_AS(io::split_dataset(all, 1.0, 1), DomainError);
}

TEST_CASE("report JSON") {
  io::EvalReport r;
  r.aepe = 1.25;
  const auto j = nlohmann::json::parse(io::report_to_json(r));
  CHECK(j.at("aepe").get<double>() == 1.25);
  CHECK(j.at("mae_low").is_null());
  CHECK(j.at("lambda").get<double>() == 10.0);

  calib::CalibEstimate e{1.5, -2.5, 0.125, 3.0, 1e-3, 77, 12.5};
  const calib::CalibEstimate back = io::estimate_from_json(io::estimate_to_json(e));
  CHECK(back.tx == e.tx);
  CHECK(back.cy == e.cy);
  CHECK(back.pixel_count == 77);
  CHECK_THROWS_AS(io::estimate_from_json("{}"), ManifestError);
}
