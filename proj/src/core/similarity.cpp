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

#include "xpose/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "xpose/errors.hpp"

namespace xpose {

namespace {

/// Returns false when either input has zero variance.
bool ncc(const std::vector<double>& a, const std::vector<double>& b, double& out) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return false;
  out = sab / std::sqrt(saa * sbb);
  return true;
}

}  // namespace

double gradient_correlation(std::span<const double> a, std::span<const double> b, int width, int height) {
  require(a.size() == b.size() && a.size() == static_cast<std::size_t>(width) * height, ErrorCode::InvalidArgument,
          "gradient_correlation: images must share the given dimensions");
  require(width >= 3 && height >= 3, ErrorCode::InvalidArgument, "gradient_correlation needs at least 3x3 pixels");
  auto at = [&](std::span<const double> im, int x, int y) { return im[static_cast<std::size_t>(y) * width + x]; };
  std::vector<double> gxa, gxb, gya, gyb;
  for (int y = 1; y < height - 1; ++y)
    for (int x = 1; x < width - 1; ++x) {
      gxa.push_back(0.5 * (at(a, x + 1, y) - at(a, x - 1, y)));
      gxb.push_back(0.5 * (at(b, x + 1, y) - at(b, x - 1, y)));
      gya.push_back(0.5 * (at(a, x, y + 1) - at(a, x, y - 1)));
      gyb.push_back(0.5 * (at(b, x, y + 1) - at(b, x, y - 1)));
    }
  double sum = 0.0, v = 0.0;
  int terms = 0;
  if (ncc(gxa, gxb, v)) {
    sum += v;
    ++terms;
  }
  if (ncc(gya, gyb, v)) {
    sum += v;
    ++terms;
  }
  return terms ? sum / terms : 0.0;
}

double mutual_information(std::span<const double> a, std::span<const double> b, int bins) {
  require(a.size() == b.size() && !a.empty(), ErrorCode::InvalidArgument,
          "mutual_information: images must be nonempty and equally sized");
  require(bins >= 2, ErrorCode::InvalidArgument, "mutual_information needs bins >= 2");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin), hi = std::max(*amax, *bmax);
  if (!(hi > lo)) return 0.0;
  const double scale = bins / (hi - lo);
  auto bin = [&](double v) { return std::min(bins - 1, static_cast<int>((v - lo) * scale)); };

  const std::size_t nb = static_cast<std::size_t>(bins);
  std::vector<double> joint(nb * nb, 0.0), pa(nb, 0.0), pb(nb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int ia = bin(a[i]), ib = bin(b[i]);
    joint[static_cast<std::size_t>(ia) * nb + ib] += 1.0;
    pa[ia] += 1.0;
    pb[ib] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  auto term = [&](std::size_t i, std::size_t j) {
    const double pij = joint[i * nb + j] / n;
    if (pij <= 0.0) return 0.0;
    return pij * std::log(pij / ((pa[i] / n) * (pb[j] / n)));
  };
  // Pairing (i, j) with (j, i) makes the sum order invariant under swapping a and b.
  double mi = 0.0;
  for (std::size_t i = 0; i < nb; ++i) {
    mi += term(i, i);
    for (std::size_t j = i + 1; j < nb; ++j) mi += term(i, j) + term(j, i);
  }
  return std::max(0.0, mi);
}

}  // namespace xpose
