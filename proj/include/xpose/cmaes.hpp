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

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace xpose {

struct CmaesConfig {
  double sigma0 = 1.0;
  int lambda = 0;               // 0: 4 + floor(3 ln n)
  int max_evaluations = 400;    // hard cap, counts the optional x0 evaluation
  bool evaluate_initial = true; // score x0 first and keep it as best-so-far
  double tol_x = 1e-12;         // stop once sigma * max(sqrt(diag C)) falls below
  std::uint64_t seed = 1;
};

struct CmaesResult {
  Eigen::VectorXd best;
  double best_value = 0.0;
  int evaluations = 0;
  int generations = 0;
  bool budget_exhausted = false;
  std::string stop_reason;
  std::vector<double> history;  // best-so-far after each generation
};

int cmaes_default_lambda(int dimension);

/// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and
/// rank-one + rank-mu covariance updates. Non-finite objective values are
/// replaced by the largest finite double. Throws InvalidArgument when the
/// budget cannot hold one generation.
CmaesResult cma_es_minimize(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                            const CmaesConfig& cfg);

}  // namespace xpose
