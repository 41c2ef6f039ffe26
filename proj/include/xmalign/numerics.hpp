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

#ifndef XMALIGN_NUMERICS_HPP_
#define XMALIGN_NUMERICS_HPP_

#include <functional>
#include <span>
#include <vector>

namespace xmalign {

// max(x) + log(sum(exp(x - max))); never overflows for finite input.
double logsumexp(std::span<const double> v);

// out[j] = v[j] - logsumexp(v). Throws ShapeError on empty input.
std::vector<double> log_softmax(std::span<const double> v);

// exp of log_softmax; rows sum to 1.
std::vector<double> softmax(std::span<const double> v);

// Central differences (f(x + h e_i) - f(x - h e_i)) / (2h) per coordinate.
// Used as the independent oracle for every analytic gradient in the repo.
// Throws NumericError if f evaluates to a non-finite value.
std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double h);

// |a - b| / max(|a|, |b|, floor). The floor keeps finite-difference roundoff
// in the numerator from dominating when the true gradient is near zero.
double relative_error(double a, double b, double floor = 1e-3);

}  // namespace xmalign

#endif  // XMALIGN_NUMERICS_HPP_
