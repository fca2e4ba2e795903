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

#include "xpose/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "xpose/errors.hpp"
#include "xpose/rng.hpp"

namespace xpose {

int cmaes_default_lambda(int dimension) {
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dimension))));
}

CmaesResult cma_es_minimize(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                            const CmaesConfig& cfg) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int n = static_cast<int>(x0.size());
  require(n >= 1, ErrorCode::InvalidArgument, "CMA-ES needs at least one dimension");
  require(cfg.sigma0 > 0.0, ErrorCode::InvalidArgument, "CMA-ES sigma0 must be positive");
  const int lambda = cfg.lambda > 0 ? cfg.lambda : cmaes_default_lambda(n);
  require(lambda >= 2, ErrorCode::InvalidArgument, "CMA-ES population must be >= 2");
  require(cfg.max_evaluations >= lambda + (cfg.evaluate_initial ? 1 : 0), ErrorCode::InvalidArgument,
          "CMA-ES budget is smaller than one generation");

  const int mu = lambda / 2;
  VectorXd w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  w /= w.sum();
  const double mueff = 1.0 / w.squaredNorm();
  const double dn = n;
  const double cs = (mueff + 2.0) / (dn + mueff + 5.0);
  const double ds = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (dn + 1.0)) - 1.0) + cs;
  const double cc = (4.0 + mueff / dn) / (dn + 4.0 + 2.0 * mueff / dn);
  const double c1 = 2.0 / ((dn + 1.3) * (dn + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((dn + 2.0) * (dn + 2.0) + mueff));
  const double chi_n = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));

  auto safe_eval = [&](const VectorXd& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };

  CmaesResult res;
  VectorXd mean = x0;
  double sigma = cfg.sigma0;
  MatrixXd C = MatrixXd::Identity(n, n), B = MatrixXd::Identity(n, n);
  VectorXd D = VectorXd::Ones(n), pc = VectorXd::Zero(n), ps = VectorXd::Zero(n);
  res.best = x0;
  res.best_value = std::numeric_limits<double>::infinity();
  if (cfg.evaluate_initial) {
    res.best_value = safe_eval(x0);
    res.evaluations = 1;
  }

  Rng rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd z(n, lambda), y(n, lambda), x(n, lambda);
  std::vector<double> fit(lambda);
  std::vector<int> order(lambda);

  while (true) {
    if (res.evaluations + lambda > cfg.max_evaluations) {
      res.budget_exhausted = true;
      res.stop_reason = "budget";
      break;
    }
    for (int k = 0; k < lambda; ++k) {
      for (int i = 0; i < n; ++i) z(i, k) = gauss(rng);
      y.col(k) = B * D.asDiagonal() * z.col(k);
      x.col(k) = mean + sigma * y.col(k);
    }
    for (int k = 0; k < lambda; ++k) {
      fit[k] = safe_eval(x.col(k));
      ++res.evaluations;
      if (fit[k] < res.best_value) {
        res.best_value = fit[k];
        res.best = x.col(k);
      }
    }
    ++res.generations;
    res.history.push_back(res.best_value);

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fit[a] < fit[b]; });
    VectorXd yw = VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) yw += w[i] * y.col(order[i]);
    mean += sigma * yw;

    // C^{-1/2} yw = B D^{-1} B^T yw
    const VectorXd cinv_yw = B * D.cwiseInverse().asDiagonal() * B.transpose() * yw;
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * cinv_yw;
    const double ps_norm = ps.norm();
    const double gen = res.generations;
    const bool hsig =
        ps_norm / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * gen)) / chi_n < 1.4 + 2.0 / (dn + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * yw;

    MatrixXd rank_mu = MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) rank_mu += w[i] * y.col(order[i]) * y.col(order[i]).transpose();
    const double dh = hsig ? 0.0 : cc * (2.0 - cc);
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + dh * C) + cmu * rank_mu;
    C = 0.5 * (C + C.transpose());

    sigma *= std::exp((cs / ds) * (ps_norm / chi_n - 1.0));

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C);
    B = eig.eigenvectors();
    D = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt();

    if (!std::isfinite(sigma) || sigma * std::sqrt(C.diagonal().maxCoeff()) < cfg.tol_x) {
      res.stop_reason = "tol_x";
      break;
    }
  }
  return res;
}

}  // namespace xpose
