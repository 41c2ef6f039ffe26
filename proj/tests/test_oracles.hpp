// Copyright 2026  The xmalign authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XMALIGN_TESTS_TEST_ORACLES_HPP_
#define XMALIGN_TESTS_TEST_ORACLES_HPP_

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace xmalign_tests {

// Brute-force EER oracle, independent of the library implementation: evaluate
// FAR/FRR by direct counting at every midpoint between adjacent distinct
// scores plus -inf/+inf, then take the FAR/FRR crossing with linear
// interpolation (exact ties resolve at the first tying operating point).
inline double eer_bruteforce(const std::vector<std::pair<double, bool>>& scores) {
  std::vector<double> distinct;
  std::size_t n_target = 0, n_nontarget = 0;
  for (const auto& [s, t] : scores) {
    distinct.push_back(s);
    (t ? n_target : n_nontarget) += 1;
  }
  if (n_target == 0 || n_nontarget == 0) {
    throw std::invalid_argument("need both classes");
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> thresholds;
  thresholds.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    thresholds.push_back(distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0);
  }
  thresholds.push_back(std::numeric_limits<double>::infinity());

  double prev_far = 0.0, prev_frr = 0.0, prev_diff = 0.0;
  bool have_prev = false;
  for (double th : thresholds) {
    std::size_t missed = 0, accepted = 0;
    for (const auto& [s, t] : scores) {
      if (t && s < th) ++missed;
      if (!t && s >= th) ++accepted;
    }
    double frr = static_cast<double>(missed) / static_cast<double>(n_target);
    double far =
        static_cast<double>(accepted) / static_cast<double>(n_nontarget);
    double diff = far - frr;
    if (diff <= 0.0) {
      if (diff == 0.0) return 100.0 * far;
      if (!have_prev) return 100.0 * far;  // cannot happen: starts at diff=1
      double t = prev_diff / (prev_diff - diff);
      return 100.0 * (prev_frr + t * (frr - prev_frr));
    }
    prev_far = far;
    prev_frr = frr;
    prev_diff = diff;
    have_prev = true;
  }
  throw std::logic_error("no crossing");
}

}  // namespace xmalign_tests

#endif  // XMALIGN_TESTS_TEST_ORACLES_HPP_
