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

#include "xmalign/gradcheck.hpp"

#include <vector>

#include "xmalign/errors.hpp"
#include "xmalign/model.hpp"
#include "xmalign/numerics.hpp"
#include "xmalign/objective.hpp"
#include "xmalign/rng.hpp"

namespace xmalign {

GradCheckResult run_gradient_checks(const GradCheckOptions& opts) {
  if (opts.trials == 0) throw ValidationError("gradcheck needs trials >= 1");
  RandomSource root(opts.seed);
  GradCheckResult result;
  result.trials = opts.trials;

  for (std::uint32_t trial = 0; trial < opts.trials; ++trial) {
    RandomSource rng = root.split("trial." + std::to_string(trial));

    ModelSpec spec;
    spec.face_input_dim = 2 + rng.next_below(5);
    spec.voice_input_dim = 2 + rng.next_below(5);
    spec.hidden_widths.assign(1 + rng.next_below(2), 0);
    for (auto& w : spec.hidden_widths) w = 3 + rng.next_below(6);
    spec.embedding_dim = 2 + rng.next_below(5);
    spec.num_classes = 2 + rng.next_below(6);
    spec.head_mode =
        rng.next_below(2) == 0 ? HeadMode::kShared : HeadMode::kSeparate;

    const double lambdas[] = {0.0, 0.1, 1.0};
    double lambda = lambdas[rng.next_below(3)];
    const AlignMetric metrics[] = {AlignMetric::kMse, AlignMetric::kCosine,
                                   AlignMetric::kNone};
    AlignMetric metric = metrics[rng.next_below(3)];

    ModelState model = init_model(spec, rng.split("init"));
    InputBatch batch;
    std::size_t n = 1 + rng.next_below(5);
    batch.face = Matrix(n, spec.face_input_dim);
    batch.voice = Matrix(n, spec.voice_input_dim);
    for (double& x : batch.face.data) x = rng.next_gaussian();
    for (double& x : batch.voice.data) x = rng.next_gaussian();
    batch.labels.resize(n);
    for (auto& y : batch.labels) {
      y = static_cast<std::uint32_t>(rng.next_below(spec.num_classes));
    }

    std::vector<double> analytic =
        total_loss(model, batch, lambda, metric).grad;
    if (opts.inject_error != 0.0 && !analytic.empty()) {
      analytic[0] += opts.inject_error;
    }

    ModelState probe = model;
    auto objective = [&](const std::vector<double>& params) {
      set_params(probe, params);
      return total_loss(probe, batch, lambda, metric).breakdown.total;
    };
    std::vector<double> numeric =
        finite_diff_grad(objective, flatten_params(model), opts.step);

    ParamLayout layout = layout_of(model);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      double err = relative_error(analytic[i], numeric[i]);
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = layout.name_at(i);
      }
    }
  }
  result.passed = result.max_rel_error < opts.tolerance;
  return result;
}

}  // namespace xmalign
