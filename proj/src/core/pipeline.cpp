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

#include "xpose/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "xpose/errors.hpp"
#include "xpose/parallel.hpp"
#include "xpose/plots.hpp"
#include "xpose/rectangle.hpp"

namespace xpose {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorCode::Io, "cannot write " + path.string());
  out << text;
  require(bool(out), ErrorCode::Io, "short write to " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string loss_csv(const std::string& prefix_header, const std::vector<std::pair<std::string, nn::TrainResult>>& runs) {
  std::ostringstream o;
  o << prefix_header << "epoch,loss\n";
  for (const auto& [prefix, r] : runs) {
    o << prefix << "0," << fmt_double(r.initial_loss) << '\n';
    for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) o << prefix << e + 1 << ',' << fmt_double(r.epoch_loss[e]) << '\n';
  }
  return o.str();
}

void train_rectangle(const AppConfig& cfg, nn::Head head, const fs::path& out) {
  const RectangleTaskConfig& rc = cfg.rectangle;
  const int n_train = rc.full_scale ? 20000 : rc.train_count;
  const int n_test = rc.full_scale ? 1000 : rc.test_count;
  const auto train_set = make_rectangle_dataset(n_train, derive_seed(cfg.seed, {1}));
  const auto test_set = make_rectangle_dataset(n_test, derive_seed(cfg.seed, {2}));
  const nn::ConvNetConfig net_cfg = rectangle_network(head, rc.base_channels, rc.fc_nodes);

  std::ostringstream errors;
  errors << "head,seed,sample,true_angle_deg,abs_error_deg\n";
  std::vector<std::pair<std::string, nn::TrainResult>> losses;
  std::vector<double> all_errors;
  int wrapped = 0;
  for (int k = 0; k < rc.seeds; ++k) {
    nn::TrainConfig tc = cfg.training;
    tc.seed = derive_seed(cfg.seed, {100, static_cast<std::uint64_t>(k)});
    const RectangleRun run = run_rectangle(net_cfg, tc, train_set, test_set);
    for (std::size_t i = 0; i < run.abs_errors_deg.size(); ++i) {
      errors << nn::to_string(head) << ',' << k << ',' << i << ',' << fmt_double(run.true_angles[i]) << ','
             << fmt_double(run.abs_errors_deg[i]) << '\n';
      all_errors.push_back(run.abs_errors_deg[i]);
      if (run.abs_errors_deg[i] > 90.0) ++wrapped;
    }
    losses.emplace_back(nn::to_string(head) + "," + std::to_string(k) + ",", run.training);
  }
  write_text(out / "rectangle_errors.csv", errors.str());
  write_text(out / "rectangle_loss.csv", loss_csv("head,seed,", losses));
  std::string summary = summary_csv({summarize("rectangle-" + nn::to_string(head), "abs_angle_error_deg", "deg", all_errors)});
  write_text(out / "rectangle_summary.csv", summary);
  write_text(out / "rectangle_wrap.json",
             nlohmann::json{{"head", nn::to_string(head)}, {"errors_above_90_deg", wrapped}}.dump(2) + "\n");
}

void train_patches(const AppConfig& cfg, nn::Head head, const fs::path& data_dir, const fs::path& out) {
  const auto records = load_dataset(data_dir, true);
  const auto samples = make_patch_samples(records, cfg, head);
  require(samples.size() >= 2, ErrorCode::InvalidArgument, "patch training needs at least two patches");
  save_patch_archive(samples, out / "patches");

  nn::ConvNetConfig net_cfg = cfg.network;
  net_cfg.head = head;
  net_cfg.outputs = head == nn::Head::Indirect ? 12 : 1;
  net_cfg.input_channels = 1;
  net_cfg.input_height = kPatchHeight;
  net_cfg.input_width = kPatchWidth;
  nn::Dataset data;
  data.inputs = nn::Tensor::zeros(static_cast<int>(samples.size()), 1, kPatchHeight, kPatchWidth);
  const std::size_t per = static_cast<std::size_t>(kPatchHeight) * kPatchWidth;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t p = 0; p < per; ++p) data.inputs.data[i * per + p] = samples[i].pixels[p];
    data.targets.push_back(samples[i].target);
  }
  const std::uint64_t net_seed = derive_seed(cfg.seed, {0x7a});
  nn::Network net(net_cfg, net_seed);
  const nn::TrainResult tr = nn::train(net, cfg.training, data);
  write_text(out / "loss.csv", loss_csv("", {{"", tr}}));
  nn::save_weights(net, net_seed, tr.epochs_run, out / "weights");
}

std::unique_ptr<nn::Network> load_network_if_needed(const AppConfig& cfg, const fs::path& weights_dir) {
  if (cfg.predictor != PredictorKind::ConvNet) return nullptr;
  require(!weights_dir.empty(), ErrorCode::InvalidArgument, "the convnet predictor needs a weights directory");
  return std::make_unique<nn::Network>(nn::load_weights(weights_dir));
}

ExperimentResult run_configured_experiment(const AppConfig& cfg, const std::vector<DatasetRecord>& records,
                                           nn::Network* net) {
  ExperimentConfig ec;
  ec.estimator = cfg.estimator;
  ec.augmentation = cfg.augmentation;
  ec.trials_per_record = cfg.trials_per_record;
  ec.seed = cfg.seed;
  ec.method = to_string(cfg.predictor);
  ec.threads = net ? 1u : cfg.threads;
  PredictorFactory factory;
  if (net) {
    factory = [net](const DatasetRecord&, std::uint64_t) { return std::make_unique<NetworkPredictor>(*net); };
  } else {
    const OracleConfig oc = cfg.oracle;
    factory = [oc](const DatasetRecord& rec, std::uint64_t seed) {
      return std::make_unique<OraclePredictor>(rec.pose, KeypointLayout::standard(layout_mirrored(rec.instrument)),
                                               rec.setup.geom, oc, seed);
    };
  }
  return run_experiment(records, ec, factory);
}

std::string anatomy_key(const DatasetRecord& r) {
  return r.phantom_preset + "/" + std::to_string(r.phantom_seed) + "/" + std::to_string(r.phantom_shape.dims) + "/" +
         fmt_double(r.phantom_shape.spacing_mm);
}

}  // namespace

void pipeline_generate(const AppConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto records = generate_dataset(cfg.generation);
  save_dataset(records, out);
}

std::vector<PatchSample> make_patch_samples(const std::vector<DatasetRecord>& records, const AppConfig& cfg,
                                            nn::Head head) {
  std::vector<const DatasetRecord*> valid;
  for (const auto& r : records)
    if (std::abs(r.pose.tau) < cfg.estimator.tau_validity_limit_deg) valid.push_back(&r);
  const int per = cfg.patches.patches_per_record;
  std::vector<PatchSample> out(valid.size() * per);
  std::vector<char> ok(out.size(), 0);
  const std::uint64_t aug_seed = derive_seed(cfg.seed, {0x9a7c});
  parallel_for(0, out.size(), cfg.threads, [&](std::size_t i) {
    const DatasetRecord& rec = *valid[i / per];
    require(rec.image.has_value(), ErrorCode::InvalidArgument, "record " + std::to_string(rec.index) + " has no image");
    const Pose start = initial_estimate(rec, cfg.augmentation, aug_seed, static_cast<int>(i % per));
    Patch patch;
    try {
      patch = extract_patch(rec.image->image, start, patch_anchor(layout_mirrored(rec.instrument)), rec.index);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OutOfRange) throw;
      return;
    }
    PatchSample s;
    s.pixels.assign(patch.pixels.begin(), patch.pixels.end());
    s.record = rec.index;
    s.estimate = start;
    if (head == nn::Head::Indirect) {
      const KeypointLayout layout = KeypointLayout::standard(layout_mirrored(rec.instrument));
      const auto t = normalize_keypoints(to_patch_coords(keypoints_from_pose(rec.pose, layout, rec.setup.geom), patch.crop));
      s.target.assign(t.begin(), t.end());
    } else {
      s.target = {wrap_degrees_360(rec.pose.alpha - start.alpha) / 180.0 - 1.0};
    }
    out[i] = std::move(s);
    ok[i] = 1;
  });
  std::vector<PatchSample> kept;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (ok[i]) kept.push_back(std::move(out[i]));
  return kept;
}

void pipeline_train(const AppConfig& cfg, const std::string& task, nn::Head head, const fs::path& data_dir,
                    const fs::path& out) {
  cfg.validate();
  if (task == "rectangle") return train_rectangle(cfg, head, out);
  if (task == "patches") {
    require(!data_dir.empty(), ErrorCode::InvalidArgument, "patch training needs a dataset directory");
    return train_patches(cfg, head, data_dir, out);
  }
  fail(ErrorCode::InvalidArgument, "unknown training task '" + task + "' (rectangle | patches)");
}

void pipeline_estimate(const AppConfig& cfg, const fs::path& data_dir, const fs::path& weights_dir,
                       const fs::path& out) {
  cfg.validate();
  const auto records = load_dataset(data_dir, true);
  auto net = load_network_if_needed(cfg, weights_dir);
  const ExperimentResult res = run_configured_experiment(cfg, records, net.get());
  std::ostringstream o;
  o << "method,record,trial,iterations,aborted,x_px,y_px,alpha_deg,tau_deg,depth_mm\n";
  const std::string method = to_string(cfg.predictor);
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const TrialRow& r = res.rows[i];
    const bool last = i + 1 == res.rows.size() || res.rows[i + 1].record != r.record || res.rows[i + 1].trial != r.trial;
    if (!last) continue;
    o << method << ',' << r.record << ',' << r.trial << ',' << r.iteration << ',' << (r.aborted ? 1 : 0);
    for (double v : {r.estimate.x, r.estimate.y, r.estimate.alpha, r.estimate.tau, r.estimate.depth})
      o << ',' << fmt_double(v);
    o << '\n';
  }
  write_text(out / "estimates.csv", o.str());
  write_text(out / "timing.json", nlohmann::json{{"seconds_per_estimate", res.seconds_per_estimate},
                                                 {"k_max", cfg.estimator.k_max}}
                                          .dump(2) + "\n");
}

void pipeline_evaluate(const AppConfig& cfg, const fs::path& data_dir, const fs::path& weights_dir,
                       const fs::path& out) {
  cfg.validate();
  const auto records = load_dataset(data_dir, true);
  auto net = load_network_if_needed(cfg, weights_dir);
  const ExperimentResult res = run_configured_experiment(cfg, records, net.get());
  const std::string method = to_string(cfg.predictor);
  write_text(out / "trials.csv", trial_csv(res, method));
  std::vector<Summary> summaries;
  for (int k = 1; k <= cfg.estimator.k_max; ++k) {
    auto s = experiment_summaries(res, method, k);
    summaries.insert(summaries.end(), s.begin(), s.end());
  }
  summaries.push_back(published_position_reference());
  write_text(out / "summary.csv", summary_csv(summaries));
  write_text(out / "evaluation.json",
             nlohmann::json{{"method", method},
                            {"records_used", res.records_used},
                            {"records_excluded_tau", res.records_excluded},
                            {"tau_validity_limit_deg", cfg.estimator.tau_validity_limit_deg},
                            {"trials_aborted", res.trials_aborted},
                            {"rpd_depth", "truth"},
                            {"seconds_per_estimate", res.seconds_per_estimate}}
                     .dump(2) + "\n");
}

std::vector<RegistrationTrial> run_registration_trials(const std::vector<DatasetRecord>& records,
                                                       const AppConfig& cfg) {
  cfg.validate();
  std::vector<const DatasetRecord*> valid;
  for (const auto& r : records) {
    if (std::abs(r.pose.tau) >= cfg.estimator.tau_validity_limit_deg) continue;
    require(r.image.has_value(), ErrorCode::InvalidArgument, "record " + std::to_string(r.index) + " has no image");
    valid.push_back(&r);
    if (cfg.registration_records > 0 && static_cast<int>(valid.size()) == cfg.registration_records) break;
  }
  std::map<std::string, Volume> anatomies;
  for (const DatasetRecord* r : valid) {
    const std::string key = anatomy_key(*r);
    if (!anatomies.count(key)) anatomies.emplace(key, build_phantom(r->phantom_seed, r->phantom_preset, r->phantom_shape));
  }
  const int trials = cfg.trials_per_record;
  std::vector<RegistrationTrial> out(valid.size() * trials);
  parallel_for(0, out.size(), cfg.threads, [&](std::size_t i) {
    const DatasetRecord& rec = *valid[i / trials];
    const int trial = static_cast<int>(i % trials);
    const Pose start = initial_estimate(rec, cfg.augmentation, cfg.seed, trial);
    RegistrationScene scene;
    scene.anatomy = &anatomies.at(anatomy_key(rec));
    scene.record = rec;
    scene.record.image.reset();
    RegistrationConfig rc = cfg.registration;
    rc.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(rec.index), static_cast<std::uint64_t>(trial), 0xc3a});
    const RegistrationResult rr = register_pose(*rec.image, start, scene, rc);
    RegistrationTrial t;
    t.record = rec.index;
    t.trial = trial;
    t.initial = compute_errors(start, rec.pose, rec.setup.geom, cfg.estimator.tau_validity_limit_deg);
    t.final = compute_errors(rr.pose, rec.pose, rec.setup.geom, cfg.estimator.tau_validity_limit_deg);
    t.renders = rr.renders;
    t.initial_score = rr.initial_score;
    t.best_score = rr.best_score;
    out[i] = t;
  });
  return out;
}

std::string registration_csv(const std::vector<RegistrationTrial>& trials, SimilarityMetric metric) {
  std::ostringstream o;
  o << "metric,record,trial,initial_position_mm,initial_forward_angle_deg,final_position_mm,"
       "final_forward_angle_deg,renders,initial_score,best_score,improved\n";
  for (const auto& t : trials) {
    o << to_string(metric) << ',' << t.record << ',' << t.trial << ',' << fmt_double(t.initial.position_mm) << ','
      << fmt_double(t.initial.forward_angle_deg) << ',' << fmt_double(t.final.position_mm) << ','
      << fmt_double(t.final.forward_angle_deg) << ',' << t.renders << ',' << fmt_double(t.initial_score) << ','
      << fmt_double(t.best_score) << ',' << (t.final.position_mm < t.initial.position_mm ? 1 : 0) << '\n';
  }
  return o.str();
}

void pipeline_register(const AppConfig& cfg, const fs::path& data_dir, const fs::path& out) {
  cfg.validate();
  const auto records = load_dataset(data_dir, true);
  const auto trials = run_registration_trials(records, cfg);
  require(!trials.empty(), ErrorCode::InvalidArgument, "no valid records to register");
  const std::string m = to_string(cfg.registration.metric);
  write_text(out / ("registration_" + m + ".csv"), registration_csv(trials, cfg.registration.metric));
  std::vector<double> init_pos, final_pos, final_ang;
  int improved = 0;
  for (const auto& t : trials) {
    init_pos.push_back(t.initial.position_mm);
    final_pos.push_back(t.final.position_mm);
    final_ang.push_back(t.final.forward_angle_deg);
    if (t.final.position_mm < t.initial.position_mm) ++improved;
  }
  const std::string method = "registration-" + m;
  write_text(out / ("registration_" + m + "_summary.csv"),
             summary_csv({summarize(method + "@initial", "position_mm", "mm", init_pos),
                          summarize(method, "position_mm", "mm", final_pos),
                          summarize(method, "forward_angle_deg", "deg", final_ang), published_position_reference()}));
  write_text(out / ("registration_" + m + ".json"),
             nlohmann::json{{"metric", m},
                            {"trials", trials.size()},
                            {"improved", improved},
                            {"improved_fraction", static_cast<double>(improved) / static_cast<double>(trials.size())},
                            {"budget", cfg.registration.max_renders}}
                     .dump(2) + "\n");
}

void pipeline_plot(const std::vector<fs::path>& summary_csvs, const fs::path& out) {
  require(!summary_csvs.empty(), ErrorCode::InvalidArgument, "plot needs at least one summary CSV");
  std::map<std::string, std::vector<BoxPlotSeries>> by_metric;
  std::map<std::string, std::string> units;
  for (const auto& p : summary_csvs) {
    for (const Summary& s : parse_summary_csv(read_text(p))) {
      if (s.reference) continue;
      by_metric[s.metric].push_back({s.method, s});
      units[s.metric] = s.unit;
    }
  }
  require(!by_metric.empty(), ErrorCode::InvalidArgument, "summary CSVs contain no measured rows");
  for (const auto& [metric, series] : by_metric)
    write_text(out / ("box_" + metric + ".svg"), box_plot_svg(metric, units[metric], series));
}

}  // namespace xpose
