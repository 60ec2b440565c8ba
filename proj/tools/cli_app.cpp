#include "cli_app.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tofrgbd/calib.hpp"
#include "tofrgbd/dataset_io.hpp"
#include "tofrgbd/error.hpp"
#include "tofrgbd/geometry.hpp"
#include "tofrgbd/gradcheck.hpp"
#include "tofrgbd/kpn.hpp"
#include "tofrgbd/metrics.hpp"
#include "tofrgbd/scene.hpp"
#include "tofrgbd/tof_sim.hpp"

namespace tofrgbd::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Exit code for a gradient check above tolerance.
constexpr int kCheckFailed = 3;

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
  throw ContractError(std::string("no output directory: pass --out or set ") + kOutDirEnv);
}

void emit(const std::string& text, const std::string& report_path, std::ostream& out) {
  if (report_path.empty()) {
    out << text << '\n';
  } else {
    io::write_text(report_path, text + "\n");
  }
}

std::string sample_name(int index) {
  std::ostringstream ss;
  ss << "sample_" << std::setw(4) << std::setfill('0') << index;
  return ss.str();
}

Image read_depth(const std::string& path) {
  Image img = io::read_pfm(path);
  if (img.channels() != 1) throw ContractError(path + ": expected a one-channel depth");
  return img;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  int scenes = 1;
  std::optional<std::uint64_t> seed;
  int width = 640;
  int height = 480;
  bool mpi = true;
  double sigma = 0.0;
  int bounce_samples = 64;
  double frequency = sim::kDefaultFrequency;
  double amplitude_threshold = sim::kDefaultAmplitudeThreshold;
  int threads = 0;
  std::string scene_file;
  double test_fraction = 0.2;
};

int run_synth(const SynthArgs& a, std::ostream& out) {
  const fs::path root = output_dir(a.out);
  if (a.scenes <= 0) throw ContractError("--scenes must be positive");
  sim::SynthConfig cfg;
  cfg.render.width = a.width;
  cfg.render.height = a.height;
  cfg.render.mpi = a.mpi;
  cfg.render.bounce_samples = a.bounce_samples;
  cfg.render.threads = a.threads;
  cfg.frequency = a.frequency;
  cfg.sigma = a.sigma;
  cfg.amplitude_threshold = a.amplitude_threshold;
  const WeakCalibParams params = sim::default_params(a.width);

  std::vector<io::SampleManifest> manifests;
  json samples = json::array();
  for (int i = 0; i < a.scenes; ++i) {
    sim::Scene scene = a.scene_file.empty() ? sim::random_scene(sim::derive_seed(*a.seed, i))
                                            : sim::read_scene(a.scene_file);
    if (!a.scene_file.empty()) scene.seed = sim::derive_seed(*a.seed, i);
    const DataSample s = sim::synthesize_sample(scene, params, cfg);
    const std::string id = sample_name(i);
    const fs::path dir = root / id;
    io::write_sample(dir, s, id);
    sim::write_scene(dir / "scene.json", scene);
    manifests.push_back(io::read_manifest(dir));
    samples.push_back({{"id", id}, {"dir", dir.string()}, {"valid_pixels", s.mask.count()}});
  }
  json summary = {{"samples", samples}};
  if (a.scenes > 1) {
    const auto [train, test] = io::split_dataset(manifests, a.test_fraction, *a.seed);
    json split = {{"train", json::array()}, {"test", json::array()}};
    for (const auto& m : train) split["train"].push_back(m.id);
    for (const auto& m : test) split["test"].push_back(m.id);
    io::write_text(root / "split.json", split.dump(2) + "\n");
    summary["split"] = split;
  }
  out << summary.dump(2) << '\n';
  return 0;
}

// -------------------------------------------------------------- augment

struct AugmentArgs {
  std::string in;
  std::string out;
  std::optional<std::uint64_t> seed;
  double principal_frac = 0.025;
  double translation_frac = 0.30;
  double t_ref_x = 0.05;
  double t_ref_y = 0.05;
};

int run_augment(const AugmentArgs& a, std::ostream& out) {
  const fs::path dir = output_dir(a.out);
  const DataSample src = io::read_sample(a.in);
  PerturbationConfig cfg;
  cfg.principal_frac = a.principal_frac;
  cfg.translation_frac = a.translation_frac;
  cfg.t_ref_x = a.t_ref_x;
  cfg.t_ref_y = a.t_ref_y;
  cfg.seed = *a.seed;
  const CalibPerturbation p = sample_perturbation(cfg, src.width(), src.height());
  DataSample aug = augment_sample(src, p);
  aug.seed = *a.seed;
  io::write_sample(dir, aug, io::read_manifest(a.in).id + "_aug");
  const json pert = {{"t_x", p.tx},
                     {"t_y", p.ty},
                     {"c_x", p.cx},
                     {"c_y", p.cy},
                     {"valid_pixels", aug.mask.count()},
                     {"seed", *a.seed}};
  io::write_text(dir / "perturbation.json", pert.dump(2) + "\n");
  out << pert.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- calib

struct CalibArgs {
  std::string sample;
  std::string flow;
  std::string depth;
  std::string mask;
  std::string report;
};

int run_calib(const CalibArgs& a, std::ostream& out) {
  FlowField flow;
  Image depth;
  Mask mask;
  std::optional<WeakCalibParams> meta;
  if (!a.sample.empty()) {
    const DataSample s = io::read_sample(a.sample);
    if (!s.gt_flow) throw ManifestError("gt_flow", "sample has no gt_flow to calibrate from");
    flow = *s.gt_flow;
    depth = s.gt_depth;
    mask = s.mask;
    meta = s.calib;
  } else {
    if (a.flow.empty() || a.depth.empty()) {
      throw ContractError("calib needs --sample or both --flow and --depth");
    }
    flow = io::read_flow(a.flow);
    depth = read_depth(a.depth);
    mask = a.mask.empty() ? Mask(depth.width(), depth.height(), true) : io::read_mask(a.mask);
  }
  const calib::CalibEstimate est = calib::estimate_params(flow, depth, mask);
  json j = json::parse(io::estimate_to_json(est));
  if (meta) {
    // gt_flow runs from the virtual view back to the ToF view, so it encodes
    // the negated drift.
    j["perturbation"] = {{"t_x", -est.tx / meta->fx},
                         {"t_y", -est.ty / meta->fy},
                         {"c_x", -est.cx},
                         {"c_y", -est.cy}};
  }
  emit(j.dump(2), a.report, out);
  return 0;
}

// ---------------------------------------------------------------- convt

struct ConvtArgs {
  std::string estimate;
  std::string sample;
  std::string depth;
  std::string mask;
  std::string out;
};

int run_convt(const ConvtArgs& a, std::ostream& out) {
  const calib::CalibEstimate est = io::estimate_from_json(io::read_text(a.estimate));
  Image depth;
  Mask mask;
  if (!a.sample.empty()) {
    const DataSample s = io::read_sample(a.sample);
    depth = s.tof_depth;
    mask = Mask(depth.width(), depth.height(), false);
    for (int y = 0; y < depth.height(); ++y) {
      for (int x = 0; x < depth.width(); ++x) mask.set(x, y, depth.at(x, y) > 0.0);
    }
  } else {
    if (a.depth.empty()) throw ContractError("convt needs --sample or --depth");
    depth = read_depth(a.depth);
    mask = a.mask.empty() ? Mask(depth.width(), depth.height(), true) : io::read_mask(a.mask);
  }
  const FlowField flow = calib::convt_flow(depth, est, mask);
  io::write_flow(a.out, flow);
  out << json({{"flow", a.out}, {"pixels", mask.count()}}).dump(2) << '\n';
  return 0;
}

// --------------------------------------------------------------- refine

struct RefineArgs {
  std::string sample;
  std::string depth;
  std::string target;
  std::string mask;
  std::string kernels;
  std::string variant = "TofKpn";
  bool fit = false;
  int k = kpn::kDefaultKernelSize;
  double lambda = metrics::kDefaultLambda;
  double step = kpn::FitOptions{}.step;
  int iterations = kpn::FitOptions{}.max_iterations;
  std::string out;
  std::string kernels_out;
  std::string report;
};

int run_refine(const RefineArgs& a, std::ostream& out) {
  const kpn::Variant variant = kpn::parse_variant(a.variant);
  Image depth;
  std::optional<Image> target;
  std::optional<Mask> mask;
  if (!a.sample.empty()) {
    const DataSample s = io::read_sample(a.sample);
    depth = s.tof_depth;
    target = s.gt_depth;
    mask = s.mask;
  } else {
    if (a.depth.empty()) throw ContractError("refine needs --sample or --depth");
    depth = read_depth(a.depth);
    if (!a.target.empty()) target = read_depth(a.target);
  }
  if (!a.mask.empty()) mask = io::read_mask(a.mask);

  json report;
  kpn::KernelField kernels;
  if (a.fit) {
    if (!target) throw ContractError("refine --fit needs a target (--target or --sample)");
    if (!mask) mask = Mask(depth.width(), depth.height(), true);
    kpn::FitOptions opt;
    opt.k = a.k;
    opt.lambda = a.lambda;
    opt.step = a.step;
    opt.max_iterations = a.iterations;
    const kpn::FitResult fit = kpn::direct_fit(depth, *target, *mask, variant, opt);
    kernels = fit.kernels;
    report["iterations"] = fit.iterations;
    report["converged"] = fit.converged;
    report["loss_trace"] = fit.loss_trace;
  } else if (!a.kernels.empty()) {
    kernels = io::read_kernels(a.kernels);
  } else {
    kernels = kpn::KernelField::identity(depth.width(), depth.height(), a.k);
  }
  const Image refined = kpn::apply(depth, kernels, variant);
  io::write_pfm(a.out, refined);
  if (!a.kernels_out.empty()) io::write_kernels(a.kernels_out, kernels);
  report["variant"] = std::string(kpn::name(variant));
  report["output"] = a.out;
  if (target && mask) {
    report["input_mae"] = metrics::masked_mae(depth, *target, *mask);
    report["output_mae"] = metrics::masked_mae(refined, *target, *mask);
  }
  emit(report.dump(2), a.report, out);
  return 0;
}

// ----------------------------------------------------------------- eval

struct EvalArgs {
  std::string sample;
  std::string pred;
  std::string gt;
  std::string input;
  std::string mask;
  std::string flow;
  std::string gt_flow;
  double lambda = metrics::kDefaultLambda;
  double range_limit = metrics::kDefaultRangeLimit;
  std::string report;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  std::optional<Image> pred, gt, input;
  std::optional<Mask> mask;
  std::optional<FlowField> gt_flow;
  if (!a.sample.empty()) {
    const DataSample s = io::read_sample(a.sample);
    input = s.tof_depth;
    pred = s.tof_depth;
    gt = s.gt_depth;
    mask = s.mask;
    gt_flow = s.gt_flow;
  }
  if (!a.pred.empty()) pred = read_depth(a.pred);
  if (!a.gt.empty()) gt = read_depth(a.gt);
  if (!a.input.empty()) input = read_depth(a.input);
  if (!a.mask.empty()) mask = io::read_mask(a.mask);
  if (!a.gt_flow.empty()) gt_flow = io::read_flow(a.gt_flow);

  io::EvalReport report;
  report.lambda = a.lambda;
  if (pred && gt) {
    if (!input) input = pred;
    if (!mask) mask = Mask(gt->width(), gt->height(), true);
    report.quantiles = metrics::quantile_mae(*input, *pred, *gt, *mask, a.range_limit);
    report.depth_loss = metrics::depth_loss(*pred, *gt, *mask, a.lambda);
  }
  if (!a.flow.empty()) {
    if (!gt_flow) throw ContractError("eval --flow needs a ground-truth flow (--gt-flow or --sample)");
    const FlowField flow = io::read_flow(a.flow);
    const Mask m = mask ? *mask : Mask(flow.width(), flow.height(), true);
    report.aepe = metrics::aepe(flow, *gt_flow, m);
  }
  if (!report.quantiles && !report.aepe) {
    throw ContractError("eval needs depth rasters (--sample or --pred and --gt) or --flow");
  }
  emit(io::report_to_json(report), a.report, out);
  return 0;
}

// ------------------------------------------------------------ gradcheck

struct GradcheckArgs {
  std::string op = "all";
  double eps = 1e-6;
  std::uint64_t seed = 0;
  int instances = 3;
  double tolerance = 1e-5;
  std::string report;
};

int run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto reports = gradcheck::run_suite(a.op, a.seed, a.instances, a.eps);
  json list = json::array();
  double worst = 0.0;
  for (const auto& r : reports) {
    worst = std::max(worst, r.max_rel_error);
    list.push_back({{"op", r.op},
                    {"detail", r.detail},
                    {"eps", r.eps},
                    {"max_rel_error", r.max_rel_error},
                    {"blocks", r.blocks},
                    {"skipped", r.skipped},
                    {"passed", r.max_rel_error < a.tolerance}});
  }
  const bool passed = worst < a.tolerance;
  const json j = {{"checks", list},
                  {"max_rel_error", worst},
                  {"tolerance", a.tolerance},
                  {"passed", passed}};
  emit(j.dump(2), a.report, out);
  return passed ? 0 : kCheckFailed;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weakly-calibrated ToF/RGB alignment and depth refinement toolkit"};
  app.name("tofrgbd");
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Render aligned ToF/RGB samples from procedural scenes");
  s->add_option("--out", synth.out, "Output directory (default: $" + std::string(kOutDirEnv) + ")");
  s->add_option("--scenes", synth.scenes, "Number of scenes")->capture_default_str();
  s->add_option("--seed", synth.seed, "Master seed; scene i uses a seed derived from it")->required();
  s->add_option("--width", synth.width, "Image width")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--height", synth.height, "Image height")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_flag("--mpi,!--no-mpi", synth.mpi, "Simulate one-bounce multi-path interference");
  s->add_option("--sigma", synth.sigma, "Gaussian noise on the correlation images")->capture_default_str()->check(CLI::NonNegativeNumber);
  s->add_option("--bounce-samples", synth.bounce_samples, "Surfel samples per pixel for MPI")->capture_default_str();
  s->add_option("--frequency", synth.frequency, "Modulation frequency in Hz")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--amplitude-threshold", synth.amplitude_threshold, "Validity threshold relative to max amplitude")->capture_default_str();
  s->add_option("--threads", synth.threads, "Render threads (0: all cores)")->capture_default_str();
  s->add_option("--scene", synth.scene_file, "Render this scene JSON instead of random scenes")->check(CLI::ExistingFile);
  s->add_option("--test-fraction", synth.test_fraction, "Held-out fraction for split.json")->capture_default_str();

  AugmentArgs aug;
  auto* g = app.add_subcommand("augment", "Misalign a sample by a random weak-calibration drift");
  g->add_option("--in", aug.in, "Aligned sample directory")->required()->check(CLI::ExistingDirectory);
  g->add_option("--out", aug.out, "Output sample directory (default: $" + std::string(kOutDirEnv) + ")");
  g->add_option("--seed", aug.seed, "Seed of the perturbation draw")->required();
  g->add_option("--principal-frac", aug.principal_frac, "Principal-point range as a fraction of image size")->capture_default_str();
  g->add_option("--translation-frac", aug.translation_frac, "Translation range as a fraction of the reference")->capture_default_str();
  g->add_option("--t-ref-x", aug.t_ref_x, "Reference |t_x| in meters")->capture_default_str();
  g->add_option("--t-ref-y", aug.t_ref_y, "Reference |t_y| in meters")->capture_default_str();

  CalibArgs cal;
  auto* c = app.add_subcommand("calib", "Fit (t_x, t_y, c_x, c_y) to a flow field and depth");
  c->add_option("--sample", cal.sample, "Sample directory with gt_flow")->check(CLI::ExistingDirectory);
  c->add_option("--flow", cal.flow, "Flow PFM")->check(CLI::ExistingFile);
  c->add_option("--depth", cal.depth, "Depth PFM")->check(CLI::ExistingFile);
  c->add_option("--mask", cal.mask, "Mask PFM")->check(CLI::ExistingFile);
  c->add_option("--report", cal.report, "Write the JSON here instead of stdout");

  ConvtArgs cv;
  auto* v = app.add_subcommand("convt", "Convert depth to flow with a calibration estimate");
  v->add_option("--estimate", cv.estimate, "Estimate JSON from calib")->required()->check(CLI::ExistingFile);
  v->add_option("--sample", cv.sample, "Use this sample's ToF depth")->check(CLI::ExistingDirectory);
  v->add_option("--depth", cv.depth, "Depth PFM")->check(CLI::ExistingFile);
  v->add_option("--mask", cv.mask, "Mask PFM")->check(CLI::ExistingFile);
  v->add_option("--out", cv.out, "Output flow PFM")->required();

  RefineArgs ref;
  auto* r = app.add_subcommand("refine", "Filter depth with per-pixel kernels, or fit them");
  r->add_option("--sample", ref.sample, "Sample directory: ToF depth in, ground truth as target")->check(CLI::ExistingDirectory);
  r->add_option("--depth", ref.depth, "Input depth PFM")->check(CLI::ExistingFile);
  r->add_option("--target", ref.target, "Target depth PFM for --fit")->check(CLI::ExistingFile);
  r->add_option("--mask", ref.mask, "Mask PFM")->check(CLI::ExistingFile);
  r->add_option("--kernels", ref.kernels, "Kernel PFM to apply")->check(CLI::ExistingFile);
  r->add_option("--variant", ref.variant, "TofKpn, Vanilla/NoNormAftBias, AftBias, NoNorm, NoNormNoBias, NoBias")->capture_default_str();
  r->add_flag("--fit", ref.fit, "Fit kernels by gradient descent on the depth loss");
  r->add_option("--k", ref.k, "Kernel size (odd)")->capture_default_str();
  r->add_option("--lambda", ref.lambda, "Gradient-term weight")->capture_default_str();
  r->add_option("--step", ref.step, "Initial step size")->capture_default_str();
  r->add_option("--iterations", ref.iterations, "Maximum iterations")->capture_default_str();
  r->add_option("--out", ref.out, "Refined depth PFM")->required();
  r->add_option("--kernels-out", ref.kernels_out, "Write the kernels used here");
  r->add_option("--report", ref.report, "Write the JSON here instead of stdout");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "AEPE, depth loss and quantile MAE report");
  e->add_option("--sample", ev.sample, "Sample directory: ToF depth vs ground truth")->check(CLI::ExistingDirectory);
  e->add_option("--pred", ev.pred, "Predicted depth PFM")->check(CLI::ExistingFile);
  e->add_option("--gt", ev.gt, "Ground-truth depth PFM")->check(CLI::ExistingFile);
  e->add_option("--input", ev.input, "Input depth that ranks pixels into quartiles")->check(CLI::ExistingFile);
  e->add_option("--mask", ev.mask, "Mask PFM")->check(CLI::ExistingFile);
  e->add_option("--flow", ev.flow, "Predicted flow PFM")->check(CLI::ExistingFile);
  e->add_option("--gt-flow", ev.gt_flow, "Ground-truth flow PFM")->check(CLI::ExistingFile);
  e->add_option("--lambda", ev.lambda, "Gradient-term weight")->capture_default_str();
  e->add_option("--range-limit", ev.range_limit, "Quantile MAE depth limit in meters")->capture_default_str();
  e->add_option("--report", ev.report, "Write the JSON here instead of stdout");

  GradcheckArgs gc;
  auto* k = app.add_subcommand("gradcheck", "Compare analytic derivatives with central differences");
  k->add_option("--op", gc.op, "warp, calib, kpn or all")->capture_default_str()->check(CLI::IsMember({"warp", "calib", "kpn", "all"}));
  k->add_option("--eps", gc.eps, "Difference step")->capture_default_str()->check(CLI::PositiveNumber);
  k->add_option("--seed", gc.seed, "Seed of the random instances")->capture_default_str();
  k->add_option("--instances", gc.instances, "Instances per op")->capture_default_str()->check(CLI::PositiveNumber);
  k->add_option("--tol", gc.tolerance, "Maximum accepted relative error")->capture_default_str();
  k->add_option("--report", gc.report, "Write the JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err);
  }

  try {
    if (*s) return run_synth(synth, out);
    if (*g) return run_augment(aug, out);
    if (*c) return run_calib(cal, out);
    if (*v) return run_convt(cv, out);
    if (*r) return run_refine(ref, out);
    if (*e) return run_eval(ev, out);
    if (*k) return run_gradcheck(gc, out);
  } catch (const std::exception& ex) {
    err << "tofrgbd: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace tofrgbd::cli
