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

#include "xpose/estimator.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "xpose/errors.hpp"
#include "xpose/parallel.hpp"
#include "xpose/rng.hpp"

namespace xpose {

void OracleConfig::validate() const {
  require(noise_px >= 0.0 && std::isfinite(noise_px), ErrorCode::InvalidArgument, "oracle noise must be >= 0");
  require(deviation_gain >= 0.0, ErrorCode::InvalidArgument, "oracle deviation gain must be >= 0");
  require(position_scale_mm > 0.0 && angle_scale_deg > 0.0, ErrorCode::InvalidArgument,
          "oracle deviation scales must be positive");
}

OraclePredictor::OraclePredictor(const Pose& truth, const KeypointLayout& layout, const ProjectionGeometry& geom,
                                 const OracleConfig& cfg, std::uint64_t seed)
    : truth_(truth), layout_(layout), geom_(geom), cfg_(cfg), seed_(seed) {
  cfg_.validate();
}

std::array<double, 12> OraclePredictor::predict(const Patch& patch, int iteration) {
  const KeypointSet local = to_patch_coords(keypoints_from_pose(truth_, layout_, geom_), patch.crop);
  KeypointSet noisy = local;
  if (cfg_.noise_px > 0.0) {
    const double mm_per_px = geom_.d2p() * truth_.depth;
    const double dpos_mm = std::hypot(patch.crop.center.x() - truth_.x, patch.crop.center.y() - truth_.y) * mm_per_px;
    const double dalpha = std::abs(angle_error(patch.crop.alpha_deg, truth_.alpha));
    const double deviation = dpos_mm / cfg_.position_scale_mm + dalpha / cfg_.angle_scale_deg;
    const double sigma = cfg_.noise_px * (1.0 + cfg_.deviation_gain * deviation);
    Rng rng(derive_seed(seed_, {static_cast<std::uint64_t>(iteration)}));
    for (auto& p : noisy.points) {
      p.x() += normal(rng, 0.0, sigma);
      p.y() += normal(rng, 0.0, sigma);
    }
  }
  return normalize_keypoints(noisy);
}

NetworkPredictor::NetworkPredictor(nn::Network& net) : net_(&net) {
  const auto& cfg = net.config();
  require(cfg.head == nn::Head::Indirect && cfg.outputs == 12, ErrorCode::InvalidArgument,
          "pose estimation needs an indirect network with 12 outputs");
  require(cfg.input_height == kPatchHeight && cfg.input_width == kPatchWidth && cfg.input_channels == 1,
          ErrorCode::InvalidArgument, "network input must match the patch raster");
}

std::array<double, 12> NetworkPredictor::predict(const Patch& patch, int) {
  nn::Tensor x = nn::Tensor::zeros(1, 1, patch.height, patch.width);
  for (std::size_t i = 0; i < patch.pixels.size(); ++i) x.data[i] = static_cast<float>(patch.pixels[i]);
  const nn::Tensor y = net_->predict(x);
  std::array<double, 12> out{};
  for (int i = 0; i < 12; ++i) out[i] = y.data[i];
  return out;
}

void EstimatorConfig::validate() const {
  require(k_max >= 1, ErrorCode::InvalidArgument, "k_max must be >= 1");
  require(tau_validity_limit_deg > 0.0 && tau_validity_limit_deg <= 90.0, ErrorCode::InvalidArgument,
          "tau validity limit must lie in (0, 90]");
}

EstimateResult estimate_iterative(const Image2D& image, const Pose& initial, Predictor& predictor,
                                  const EstimatorConfig& cfg, const KeypointLayout& layout,
                                  const ProjectionGeometry& geom) {
  cfg.validate();
  EstimateResult res;
  res.pose = initial;
  const Vec2 anchor = patch_anchor(layout.points[0].x() > 0.0);
  Pose current = initial;
  for (int k = 1; k <= cfg.k_max; ++k) {
    Patch patch;
    try {
      patch = extract_patch(image, current, anchor);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OutOfRange) throw;
      res.aborted = true;
      res.abort_reason = "iteration " + std::to_string(k) + ": " + e.what();
      return res;
    }
    const std::array<double, 12> values = predictor.predict(patch, k);
    const KeypointSet kps = unnormalize_keypoints(values, patch.crop);
    PoseRecovery rec;
    try {
      rec = pose_from_keypoints(kps, layout, geom);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Degenerate) throw;
      res.aborted = true;
      res.abort_reason = "iteration " + std::to_string(k) + ": " + e.what();
      return res;
    }
    res.trace.push_back({current, rec});
    current = rec.pose;
    res.pose = current;
  }
  return res;
}

Pose initial_estimate(const DatasetRecord& rec, const AugmentationSpec& aug, std::uint64_t seed, int trial) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(rec.index), static_cast<std::uint64_t>(trial), 0x1a1}));
  const InitialOffset off = draw_initial_offset(aug, rng);
  return apply_offset(rec.pose, off, rec.setup.geom, rec.pose.depth);
}

void ExperimentConfig::validate() const {
  estimator.validate();
  augmentation.validate();
  require(trials_per_record >= 1, ErrorCode::InvalidArgument, "trials per record must be >= 1");
  require(!method.empty() && method.find(',') == std::string::npos, ErrorCode::InvalidArgument,
          "method name must be non-empty and free of commas");
}

ExperimentResult run_experiment(const std::vector<DatasetRecord>& records, const ExperimentConfig& cfg,
                                const PredictorFactory& factory) {
  cfg.validate();
  require(static_cast<bool>(factory), ErrorCode::InvalidArgument, "experiment needs a predictor factory");
  std::vector<const DatasetRecord*> valid;
  ExperimentResult out;
  for (const auto& r : records) {
    if (std::abs(r.pose.tau) >= cfg.estimator.tau_validity_limit_deg) {
      ++out.records_excluded;
      continue;
    }
    require(r.image.has_value(), ErrorCode::InvalidArgument,
            "record " + std::to_string(r.index) + " has no image");
    valid.push_back(&r);
  }
  out.records_used = static_cast<int>(valid.size());
  const std::size_t trials = valid.size() * static_cast<std::size_t>(cfg.trials_per_record);
  std::vector<std::vector<TrialRow>> per_trial(trials);
  std::vector<char> aborted(trials, 0);

  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(0, trials, cfg.threads, [&](std::size_t i) {
    const DatasetRecord& rec = *valid[i / cfg.trials_per_record];
    const int trial = static_cast<int>(i % cfg.trials_per_record);
    const ProjectionGeometry& geom = rec.setup.geom;
    const KeypointLayout layout = KeypointLayout::standard(layout_mirrored(rec.instrument));
    const Pose start = initial_estimate(rec, cfg.augmentation, cfg.seed, trial);
    auto predictor = factory(
        rec, derive_seed(cfg.seed, {static_cast<std::uint64_t>(rec.index), static_cast<std::uint64_t>(trial), 0x0c1}));
    const EstimateResult est = estimate_iterative(rec.image->image, start, *predictor, cfg.estimator, layout, geom);
    auto& rows = per_trial[i];
    auto push = [&](int k, const Pose& p, const PoseRecovery* recov) {
      TrialRow row;
      row.record = rec.index;
      row.trial = trial;
      row.iteration = k;
      row.truth = rec.pose;
      row.estimate = p;
      row.error = compute_errors(p, rec.pose, geom, cfg.estimator.tau_validity_limit_deg);
      if (recov) {
        row.error.cos_tau_clamped = recov->cos_tau_clamped;
        row.error.cos_tau_out_of_range = recov->cos_tau_out_of_range;
      }
      row.aborted = est.aborted;
      rows.push_back(row);
    };
    push(0, start, nullptr);
    for (std::size_t k = 0; k < est.trace.size(); ++k)
      push(static_cast<int>(k + 1), est.trace[k].output.pose, &est.trace[k].output);
    aborted[i] = est.aborted ? 1 : 0;
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.seconds_per_estimate = trials > 0 ? secs * std::max(1u, cfg.threads) / static_cast<double>(trials) : 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    out.trials_aborted += aborted[i];
    for (auto& r : per_trial[i]) out.rows.push_back(r);
  }
  return out;
}

std::vector<ErrorReport> errors_at_iteration(const ExperimentResult& res, int iteration) {
  std::vector<ErrorReport> out;
  for (const auto& r : res.rows)
    if (!r.aborted && r.iteration == iteration) out.push_back(r.error);
  return out;
}

std::string trial_csv(const ExperimentResult& res, const std::string& method) {
  std::ostringstream o;
  o << "method,record,trial,iteration,aborted,true_x_px,true_y_px,true_alpha_deg,true_tau_deg,true_depth_mm,"
       "est_x_px,est_y_px,est_alpha_deg,est_tau_deg,est_depth_mm,position_mm,position_px,forward_angle_deg,"
       "forward_angle_signed_deg,projection_angle_deg,depth_mm,depth_signed_mm,cos_tau_clamped,"
       "cos_tau_out_of_range\n";
  for (const auto& r : res.rows) {
    o << method << ',' << r.record << ',' << r.trial << ',' << r.iteration << ',' << (r.aborted ? 1 : 0);
    for (double v : {r.truth.x, r.truth.y, r.truth.alpha, r.truth.tau, r.truth.depth, r.estimate.x, r.estimate.y,
                     r.estimate.alpha, r.estimate.tau, r.estimate.depth, r.error.position_mm, r.error.position_px,
                     r.error.forward_angle_deg, r.error.forward_angle_signed_deg, r.error.projection_angle_deg,
                     r.error.depth_mm, r.error.depth_signed_mm})
      o << ',' << fmt_double(v);
    o << ',' << (r.error.cos_tau_clamped ? 1 : 0) << ',' << (r.error.cos_tau_out_of_range ? 1 : 0) << '\n';
  }
  return o.str();
}

std::vector<Summary> experiment_summaries(const ExperimentResult& res, const std::string& method, int iteration) {
  const auto errs = errors_at_iteration(res, iteration);
  if (errs.empty()) return {};
  std::vector<double> pos, fwd, fwd_signed, proj, depth, depth_signed;
  for (const auto& e : errs) {
    pos.push_back(e.position_mm);
    fwd.push_back(e.forward_angle_deg);
    fwd_signed.push_back(e.forward_angle_signed_deg);
    proj.push_back(e.projection_angle_deg);
    depth.push_back(e.depth_mm);
    depth_signed.push_back(e.depth_signed_mm);
  }
  const std::string m = method + "@k" + std::to_string(iteration);
  return {summarize(m, "position_mm", "mm", pos),
          summarize(m, "forward_angle_deg", "deg", fwd),
          summarize(m, "forward_angle_signed_deg", "deg", fwd_signed),
          summarize(m, "projection_angle_deg", "deg", proj),
          summarize(m, "depth_mm", "mm", depth),
          summarize(m, "depth_signed_mm", "mm", depth_signed)};
}

}  // namespace xpose
