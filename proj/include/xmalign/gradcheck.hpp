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

#ifndef XMALIGN_GRADCHECK_HPP_
#define XMALIGN_GRADCHECK_HPP_

#include <cstdint>
#include <string>

namespace xmalign {

struct GradCheckOptions {
  std::uint64_t seed = 7;
  std::uint32_t trials = 120;
  double step = 1e-5;      // central-difference step
  double tolerance = 1e-4; // max relative error allowed
  // Test hook: added to one analytic gradient component of every trial so the
  // check's sensitivity is itself testable.
  double inject_error = 0.0;
};

struct GradCheckResult {
  std::uint32_t trials = 0;
  double max_rel_error = 0.0;
  std::string worst_param;
  bool passed = false;
};

// Draws random (architecture, batch, lambda, metric, head mode) configurations
// and compares every analytic parameter gradient of the full objective against
// central finite differences. Relative error uses a denominator floor of 1e-3
// so finite-difference roundoff on near-zero gradients does not register as
// disagreement.
GradCheckResult run_gradient_checks(const GradCheckOptions& opts);

}  // namespace xmalign

#endif  // XMALIGN_GRADCHECK_HPP_
