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

#ifndef XMALIGN_TRAINING_HPP_
#define XMALIGN_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xmalign/data.hpp"
#include "xmalign/model.hpp"
#include "xmalign/objective.hpp"

namespace xmalign {

struct TrainingConfig {
  double lambda = 1.0;
  AlignMetric align_metric = AlignMetric::kMse;
  HeadMode head_mode = HeadMode::kShared;
  std::uint32_t epochs = 500;
  double lr0 = 0.001;
  double decay = 0.97;
  std::uint32_t batch_size = 64;
  std::uint32_t avg_window = 5;
  std::uint64_t seed = 1;
  double augment_noise_sigma = 0.1;

  void validate() const;
};

// Flat key-value config file ("key = value" per line, '#' comments). Unknown
// keys are an error naming the key.
TrainingConfig parse_training_config(const std::string& text);
TrainingConfig read_training_config(const std::filesystem::path& path);
std::string render_training_config(const TrainingConfig& cfg);

// FNV-1a of the canonical rendering; stamped into checkpoints.
std::uint64_t config_hash(const TrainingConfig& cfg);

// lr0 * decay^epoch.
double lr_for_epoch(const TrainingConfig& cfg, std::uint32_t epoch);

struct AdamState {
  std::vector<double> m;  // first moment
  std::vector<double> v;  // second moment
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam update, in place. Throws NumericError naming the
// offending parameter tensor if a gradient entry is non-finite.
void adam_step(std::vector<double>& params, std::span<const double> grads,
               AdamState& state, double lr, const ParamLayout& layout);

// One epoch's batches: pairs are re-drawn within each identity (independent
// face/voice permutations over the identity's sample pool), globally
// shuffled, chopped to batch_size, and augmented with additive Gaussian
// feature noise. Consumes `rng` in that order.
std::vector<InputBatch> make_epoch_batches(
    const std::vector<PairedSample>& train, const TrainingConfig& cfg,
    RandomSource& rng);

// Mean loss over the epoch's batches (losses measured on the batch each step
// consumed, before its update).
LossBreakdown train_epoch(ModelState& model, const std::vector<PairedSample>& train,
                          const TrainingConfig& cfg, AdamState& adam,
                          RandomSource& epoch_rng, double lr);

struct EpochLogRow {
  std::uint32_t epoch = 0;
  double lr = 0.0;
  LossBreakdown losses;
};

// One delimited text row: epoch lr l_face l_voice l_align total, each real
// printed with 9 significant digits.
std::string format_log_row(const EpochLogRow& row);
EpochLogRow parse_log_row(const std::string& line);

struct TrainingRun {
  ModelState model;  // average of the last avg_window checkpoints
  std::vector<EpochLogRow> log;
  std::uint64_t config_hash = 0;
};

// Default encoder architecture used when building a model for a dataset.
inline constexpr std::size_t kDefaultEmbeddingDim = 128;
inline const std::vector<std::size_t> kDefaultHiddenWidths = {64, 64};

ModelSpec model_spec_for(const Dataset& dataset, const TrainingConfig& cfg);

// Full recipe: epochs of Adam with the per-epoch decayed LR, epoch-end
// checkpoints, and the parameter-wise average of the last avg_window of them
// as the final model. `on_epoch`, when set, observes each log row as it is
// produced (the CLI uses it to keep the log file flushed).
TrainingRun run_training(const TrainingConfig& cfg, const Dataset& dataset,
                         const std::function<void(const EpochLogRow&)>& on_epoch = {});

// Parameter-wise arithmetic mean. All checkpoints must share architecture and
// config hash. The mean is anchored at the first checkpoint (x0 + mean of
// diffs) so identical inputs average exactly.
ModelState average_checkpoints(const std::vector<Checkpoint>& checkpoints);
ModelState average_states(const std::vector<ModelState>& states);

}  // namespace xmalign

#endif  // XMALIGN_TRAINING_HPP_
