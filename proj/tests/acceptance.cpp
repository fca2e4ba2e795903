/**
 * Copyright 2026 The xpose Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: xpose_acceptance [--cli PATH] [--work DIR] [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support/gradcheck.hpp"
#include "support/stats.hpp"
#include "xpose/config.hpp"
#include "xpose/estimator.hpp"
#include "xpose/metrics.hpp"
#include "xpose/pipeline.hpp"
#include "xpose/rectangle.hpp"
#include "xpose/renderer.hpp"
#include "xpose/sampler.hpp"

using namespace xpose;
using namespace xpose::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return percentile_sorted(v, 0.5);
}

PredictorFactory oracle_factory(const OracleConfig& oc) {
  return [oc](const DatasetRecord& r, std::uint64_t seed) -> std::unique_ptr<Predictor> {
    return std::make_unique<OraclePredictor>(r.pose, KeypointLayout::standard(layout_mirrored(r.instrument)),
                                             r.setup.geom, oc, seed);
  };
}

void append(ExperimentResult& all, const ExperimentResult& part) {
  all.rows.insert(all.rows.end(), part.rows.begin(), part.rows.end());
  all.records_used += part.records_used;
  all.records_excluded += part.records_excluded;
  all.trials_aborted += part.trials_aborted;
}

// ---------------------------------------------------------------------------

Outcome geometry_round_trip() {
  const ProjectionGeometry g;
  Rng rng(20240611);
  std::vector<Pose> poses;
  for (int i = 0; i < 10000; ++i)
    poses.push_back(make_pose(uniform(rng, 0, 1023), uniform(rng, 0, 1023), uniform(rng, 0, 360), uniform(rng, -80, 80),
                              uniform(rng, 362.8, 725.61)));
  const auto t0 = Clock::now();
  double worst = 0.0, worst_tau = 0.0;
  int failures = 0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Pose& p = poses[i];
    const KeypointLayout layout = KeypointLayout::standard(i % 2);
    const Pose q = pose_from_keypoints(keypoints_from_pose(p, layout, g), layout, g).pose;
    const double e = std::max({std::abs(q.x - p.x), std::abs(q.y - p.y), std::abs(angle_error(q.alpha, p.alpha)),
                               std::abs(q.tau - std::abs(p.tau)), std::abs(q.depth - p.depth)});
    if (e > 1e-9) {
      ++failures;
      if (e > worst) worst_tau = p.tau;
    }
    worst = std::max(worst, e);
  }
  const double t = seconds_since(t0);
  return {failures == 0 && t < 1.0,
          format("%d/10000 poses beyond 1e-9 (worst %.3g at tau %.4g deg), %.3f s", failures, worst, worst_tau, t)};
}

Outcome exact_oracle_end_to_end() {
  const auto t0 = Clock::now();
  GenerationConfig gen;
  gen.seed = 11;
  const Volume anatomy = build_phantom(gen.phantom_seed, gen.phantom_preset, gen.phantom_shape);
  const InstrumentMesh mesh = make_instrument(gen.instrument, gen.instrument_params);
  const auto nominal = nominal_placements(gen.phantom_preset, gen.phantom_seed, gen.phantom_shape);
  const ValidityPolygons polys = phantom_validity_polygons(anatomy);
  ExperimentConfig cfg;
  cfg.estimator.k_max = 1;
  ExperimentResult all;
  // Chunks keep memory bounded; records beyond the validity limit are replaced.
  constexpr int kTotal = 200;
  for (int offset = 0; all.records_used < kTotal; offset += gen.count) {
    gen.count = std::min(20, kTotal - all.records_used);
    gen.index_offset = offset;
    const auto recs = generate_dataset(anatomy, mesh, nominal, polys, gen);
    append(all, run_experiment(recs, cfg, oracle_factory({})));
  }
  const double t = seconds_since(t0);
  const auto errs = errors_at_iteration(all, 1);
  double pos = 0.0, ang = 0.0, dep = 0.0;
  int bad = 0;
  for (const auto& e : errs) {
    pos = std::max(pos, e.position_mm);
    ang = std::max(ang, e.forward_angle_deg);
    dep = std::max(dep, e.depth_mm);
    bad += !(e.position_mm < 0.01 && e.forward_angle_deg < 0.01 && e.depth_mm < 0.1);
  }
  const bool pass = bad == 0 && all.trials_aborted == 0 && !errs.empty() && t < 300.0;
  return {pass, format("%zu estimates (%d records beyond the validity limit replaced), max %.3g mm / %.3g deg / %.3g mm depth, %d aborted, %.1f s",
                       errs.size(), all.records_excluded, pos, ang, dep, all.trials_aborted, t)};
}

// Chord length of the ray o + t d through the box [-a, a]^3.
double box_chord(const Vec3& o, const Vec3& d, double a) {
  double t0 = -1e300, t1 = 1e300;
  for (int k = 0; k < 3; ++k) {
    const double ta = (-a - o[k]) / d[k], tb = (a - o[k]) / d[k];
    t0 = std::max(t0, std::min(ta, tb));
    t1 = std::min(t1, std::max(ta, tb));
  }
  return std::max(0.0, t1 - t0);
}

Outcome renderer_oracle() {
  constexpr int n = 100;
  constexpr double mu = 0.02;
  Volume cube = Volume::zeros({n, n, n}, Vec3::Constant(1.0), Vec3::Constant(-0.5 * (n - 1)));
  std::fill(cube.data.begin(), cube.data.end(), static_cast<float>(mu));
  double worst_cube = 0.0;
  for (const auto& rot : {std::array<double, 3>{0, 0, 0}, {25, 35, -60}, {-40, 70, 15}}) {
    ProjectionSetup s;
    s.rotations = rot;
    const PixelWindow w{495, 495, 34, 34};
    const Image2D im = project_volume_window(cube, s, 0.5, w);
    for (int y = w.y0; y < w.y0 + w.height; ++y)
      for (int x = w.x0; x < w.x0 + w.width; ++x) {
        const double exact = mu * box_chord(s.source_world(), s.ray_direction(x, y), 0.5 * n);
        worst_cube = std::max(worst_cube, std::abs(im.at(x, y) - exact) / exact);
      }
  }

  const Volume v = build_phantom(6, "perlin-bone", {48, 2.0});
  Volume left = v, right = v;
  for (int k = 0; k < v.dims[2]; ++k)
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i) ((i + j + k) % 3 == 0 ? right : left).at(i, j, k) = 0.0f;
  ProjectionSetup s;
  s.rotations = {25, 35, -60};
  s.offset_r = 20.0;
  const PixelWindow win{448, 448, 128, 128};
  const Image2D all = project_volume_window(v, s, 0.5, win);
  const Image2D a = project_volume_window(left, s, 0.5, win);
  const Image2D b = project_volume_window(right, s, 0.5, win);
  double worst_sup = 0.0;
  for (std::size_t i = 0; i < all.pixels.size(); ++i)
    if (all.pixels[i] > 0.0) worst_sup = std::max(worst_sup, std::abs(a.pixels[i] + b.pixels[i] - all.pixels[i]) / all.pixels[i]);
  return {worst_cube < 0.01 && worst_sup < 1e-6,
          format("cube max relative error %.3g (< 0.01), superposition %.3g (< 1e-6)", worst_cube, worst_sup)};
}

nn::Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  nn::Tensor t = nn::Tensor::zeros(n, c, h, w);
  Rng rng(seed);
  randomize(t, rng);
  return t;
}

Outcome layer_gradients() {
  struct Case {
    std::string name;
    std::function<std::vector<std::unique_ptr<nn::Layer>>()> make;
    nn::Tensor x;
    bool training;
  };
  auto one = [](std::unique_ptr<nn::Layer> l) {
    std::vector<std::unique_ptr<nn::Layer>> v;
    v.push_back(std::move(l));
    return v;
  };
  nn::Tensor relu_x = random_tensor(2, 2, 4, 5, 3);
  for (double& v : relu_x.data) v += v >= 0 ? 0.1 : -0.1;
  std::vector<Case> cases;
  cases.push_back({"conv3x3", [&] { return one(nn::make_conv3x3(2, 3, 1)); }, random_tensor(2, 2, 7, 6, 1), true});
  cases.push_back({"conv3x3/2", [&] { return one(nn::make_conv3x3(2, 3, 2)); }, random_tensor(2, 2, 7, 6, 2), true});
  cases.push_back({"relu", [&] { return one(nn::make_relu()); }, relu_x, true});
  cases.push_back({"maxpool2", [&] { return one(nn::make_max_pool2()); }, random_tensor(2, 2, 6, 8, 4), true});
  cases.push_back({"avgpool2", [&] { return one(nn::make_avg_pool2()); }, random_tensor(2, 2, 6, 7, 5), true});
  cases.push_back({"batchnorm-train", [&] { return one(nn::make_batch_norm(2)); }, random_tensor(3, 2, 4, 3, 6), true});
  cases.push_back({"batchnorm-infer", [&] { return one(nn::make_batch_norm(2)); }, random_tensor(3, 2, 4, 3, 7), false});
  cases.push_back({"dropout", [&] { return one(nn::make_dropout(0.3)); }, random_tensor(4, 6, 1, 1, 8), true});
  cases.push_back({"flatten", [&] { return one(nn::make_flatten()); }, random_tensor(2, 3, 2, 2, 9), true});
  cases.push_back({"dense", [&] { return one(nn::make_dense(6, 4)); }, random_tensor(3, 6, 1, 1, 10), true});

  std::size_t checked = 0, skipped = 0, failures = 0;
  double worst = 0.0;
  std::string failed;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    nn::Network net(cases[i].make());
    Rng rng(100 + i);
    randomize_params(net, rng);
    const GradCheckReport r = gradient_check(net, cases[i].x, cases[i].training, 1e-4, 1e-4, 200 + i);
    checked += r.checked;
    skipped += r.skipped;
    failures += r.failures;
    worst = std::max(worst, r.worst_relative);
    if (r.failures || r.skipped || !r.checked) failed += " " + cases[i].name;
  }
  return {failed.empty(), format("%zu layer cases, %zu gradients checked, %zu skipped, %zu failures, worst relative %.3g%s",
                                 cases.size(), checked, skipped, failures, worst,
                                 failed.empty() ? "" : (" in" + failed).c_str())};
}

Outcome rectangle_scenario() {
  const auto t0 = Clock::now();
  const AppConfig app;
  const RectangleTaskConfig& rc = app.rectangle;
  const auto train_set = make_rectangle_dataset(rc.train_count, derive_seed(app.seed, {1}));
  const auto test_set = make_rectangle_dataset(rc.test_count, derive_seed(app.seed, {2}));
  std::map<nn::Head, std::vector<double>> errors;
  std::map<nn::Head, int> wrap_errors;
  for (nn::Head head : {nn::Head::Direct, nn::Head::Indirect}) {
    const nn::ConvNetConfig net_cfg = rectangle_network(head, rc.base_channels, rc.fc_nodes);
    for (int k = 0; k < rc.seeds; ++k) {
      nn::TrainConfig tc = app.training;
      tc.seed = derive_seed(app.seed, {100, static_cast<std::uint64_t>(k)});
      const RectangleRun run = run_rectangle(net_cfg, tc, train_set, test_set);
      for (std::size_t i = 0; i < run.abs_errors_deg.size(); ++i) {
        errors[head].push_back(run.abs_errors_deg[i]);
        // Near the wrap: true angle within 45 deg of 0/360.
        const double to_wrap = std::min(run.true_angles[i], 360.0 - run.true_angles[i]);
        if (run.abs_errors_deg[i] > 90.0 && to_wrap < 45.0) ++wrap_errors[head];
      }
    }
  }
  int indirect_large = 0;
  for (double e : errors[nn::Head::Indirect]) indirect_large += e > 90.0;
  const double md = median_of(errors[nn::Head::Direct]), mi = median_of(errors[nn::Head::Indirect]);
  const bool pass = mi < md && wrap_errors[nn::Head::Direct] >= 10 && indirect_large == 0;
  return {pass, format("median indirect %.3g deg < direct %.3g deg; direct wrap errors >90 deg: %d (>= 10); "
                       "indirect errors >90 deg: %d (0); %d/%d images, %d seeds x 2 heads, %.0f s",
                       mi, md, wrap_errors[nn::Head::Direct], indirect_large, rc.train_count, rc.test_count, rc.seeds,
                       seconds_since(t0))};
}

Outcome noisy_oracle_iterations() {
  const Image2D blank = Image2D::zeros(1024, 1024);
  GenerationConfig gen;
  gen.seed = 12;
  gen.render = false;
  gen.phantom_shape = {32, 2.0};
  ExperimentConfig cfg;
  cfg.trials_per_record = 2;
  OracleConfig oc;
  oc.noise_px = 0.5;
  ExperimentResult all;
  constexpr int kChunk = 50;
  for (int offset = 0; static_cast<int>(errors_at_iteration(all, 3).size()) < 1000; offset += kChunk) {
    gen.count = kChunk;
    gen.index_offset = offset;
    auto recs = generate_dataset(gen);
    for (auto& r : recs) r.image = Radiograph{blank, r.setup};
    append(all, run_experiment(recs, cfg, oracle_factory(oc)));
  }
  // The first 1000 completed trials in record order.
  std::set<std::pair<int, int>> keep;
  for (const auto& row : all.rows)
    if (row.iteration == 3 && !row.aborted && keep.size() < 1000) keep.insert({row.record, row.trial});
  double m[4];
  for (int k = 0; k <= 3; ++k) {
    std::vector<double> v;
    for (const auto& row : all.rows)
      if (row.iteration == k && keep.count({row.record, row.trial})) v.push_back(row.error.position_mm);
    m[k] = median_of(v);
  }
  const bool pass = m[3] <= m[1] && (m[2] - m[3]) < (m[1] - m[2]);
  return {pass, format("%zu trials, median position mm k0 %.4g k1 %.4g k2 %.4g k3 %.4g; gain k1->k2 %.3g, k2->k3 %.3g",
                       keep.size(), m[0], m[1], m[2], m[3], m[1] - m[2], m[2] - m[3])};
}

Outcome registration_harness() {
  const auto t0 = Clock::now();
  AppConfig app;
  app.generation.count = 30;
  app.seed = 13;
  app.trials_per_record = 2;
  app.registration_records = 25;
  app.registration.max_renders = 400;
  app.propagate();
  const auto recs = generate_dataset(app.generation);
  std::string detail;
  bool pass = false;
  for (SimilarityMetric metric : {SimilarityMetric::GradientCorrelation, SimilarityMetric::MutualInformation}) {
    app.registration.metric = metric;
    const auto trials = run_registration_trials(recs, app);
    int improved = 0;
    std::vector<double> before, after;
    for (const auto& t : trials) {
      improved += t.final.position_mm < t.initial.position_mm;
      before.push_back(t.initial.position_mm);
      after.push_back(t.final.position_mm);
    }
    const double frac = trials.empty() ? 0.0 : static_cast<double>(improved) / trials.size();
    if (metric == SimilarityMetric::GradientCorrelation) pass = trials.size() == 50 && frac >= 0.9;
    detail += format("%s %d/%zu improved (median %.3g -> %.3g mm)%s; ", to_string(metric).c_str(), improved,
                     trials.size(), median_of(before), median_of(after),
                     metric == SimilarityMetric::GradientCorrelation ? " (>= 90%)" : " (reported)");
  }
  return {pass, detail + format("budget 400 renders, %.0f s", seconds_since(t0))};
}

Outcome distribution_fidelity() {
  std::string detail;
  bool pass = true;
  for (const char* split : {"train", "eval"}) {
    GenerationConfig gen;
    gen.count = 10000;
    gen.render = false;
    gen.phantom_shape = {32, 2.0};
    gen.split = split;
    gen.seed = gen.split == "train" ? 14 : 16;
    const double sigma = gen.split == "train" ? 5.0 : 1.0;
    gen.specs = gen.split == "train" ? GenerationSpecs::training() : GenerationSpecs::evaluation();
    const auto recs = generate_dataset(gen);
    std::vector<double> sod;
    std::array<std::vector<double>, 3> dev;
    for (const auto& r : recs) {
      sod.push_back(r.setup.source_object_distance);
      for (int a = 0; a < 3; ++a) dev[a].push_back(r.deviation_mm[a]);
    }
    const double p_sod = ks_p_value(ks_statistic(sod, [](double x) { return uniform_cdf(x, 362.8, 725.61); }), sod.size());
    double p[3];
    for (int a = 0; a < 3; ++a)
      p[a] = ks_p_value(ks_statistic(dev[a], [&](double x) { return normal_cdf(x, 0, sigma); }), dev[a].size());
    pass = pass && std::min({p_sod, p[0], p[1], p[2]}) > 0.01;
    detail += format("%s: d_SOD p=%.3g, position sigma %g p=%.3g/%.3g/%.3g; ", split, p_sod, sigma, p[0], p[1], p[2]);
  }
  return {pass, detail + "alpha 0.01, 10000 samples each"};
}

int run(const std::string& cmd) {
  return std::system((cmd + " > /dev/null 2>&1").c_str());
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli_determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty() || !fs::exists(cli)) return {false, "command-line tool not found"};
  fs::remove_all(work);
  fs::create_directories(work);
  AppConfig app;
  app.seed = 15;
  app.generation.count = 4;
  app.generation.upsample = 1;
  app.rectangle.train_count = 64;
  app.rectangle.test_count = 16;
  app.rectangle.seeds = 1;
  app.training.epochs = 2;
  app.trials_per_record = 2;
  app.oracle.noise_px = 0.5;
  const fs::path config = work / "config.json";
  std::ofstream(config) << config_to_json(app).dump(2) << '\n';

  std::vector<std::string> csvs;
  std::map<std::string, std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path root = work / ("run" + std::to_string(pass));
    const std::string base = cli + " --config " + config.string() + " --threads " + (pass ? "2" : "1");
    const std::string data = (root / "data").string();
    if (run(base + " --out " + data + " generate") != 0 ||
        run(base + " --out " + (root / "train").string() + " train --task rectangle --head indirect") != 0 ||
        run(base + " --out " + (root / "eval").string() + " evaluate --data " + data) != 0)
      return {false, "a pipeline stage failed in run " + std::to_string(pass)};
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.path().extension() != ".csv") continue;
      const std::string rel = fs::relative(e.path(), root).string();
      if (pass == 0) {
        first[rel] = read_file(e.path());
        csvs.push_back(rel);
      } else if (!first.count(rel) || first[rel] != read_file(e.path())) {
        return {false, rel + " differs between runs"};
      } else {
        first.erase(rel);
      }
    }
  }
  if (!first.empty()) return {false, first.begin()->first + " missing from the second run"};
  std::sort(csvs.begin(), csvs.end());
  std::string names;
  for (const auto& c : csvs) names += (names.empty() ? "" : ", ") + c;
  return {!csvs.empty(), format("%zu CSV files byte-identical across runs (1 vs 2 threads): ", csvs.size()) + names};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path work = fs::temp_directory_path() / "xpose_acceptance";
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) cli = argv[++i];
    else if (a == "--work" && i + 1 < argc) work = argv[++i];
    else only.insert(a);
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"geometry-round-trip", geometry_round_trip},
      {"exact-oracle", exact_oracle_end_to_end},
      {"renderer-oracle", renderer_oracle},
      {"gradient-check", layer_gradients},
      {"rectangle", rectangle_scenario},
      {"noisy-oracle", noisy_oracle_iterations},
      {"registration", registration_harness},
      {"distribution-fidelity", distribution_fidelity},
      {"determinism", [&] { return cli_determinism(cli, work); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
