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

#include "xmalign/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <numeric>

#include "kv_config.hpp"
#include "xmalign/errors.hpp"
#include "xmalign/serialize.hpp"

namespace xmalign {

void TrainingConfig::validate() const {
  if (lambda < 0.0) throw ValidationError("lambda must be >= 0");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (lr0 <= 0.0) throw ValidationError("lr0 must be > 0");
  if (decay <= 0.0 || decay > 1.0) {
    throw ValidationError("decay must be in (0, 1]");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (avg_window < 1 || avg_window > epochs) {
    throw ValidationError("avg_window must be in [1, epochs]");
  }
  if (augment_noise_sigma < 0.0) {
    throw ValidationError("augment_noise_sigma must be >= 0");
  }
}

namespace {

AlignMetric parse_align_metric(const std::string& v) {
  if (v == "mse") return AlignMetric::kMse;
  if (v == "cosine") return AlignMetric::kCosine;
  if (v == "none") return AlignMetric::kNone;
  throw ValidationError("align_metric must be mse, cosine or none: " + v);
}

HeadMode parse_head_mode(const std::string& v) {
  if (v == "shared") return HeadMode::kShared;
  if (v == "separate") return HeadMode::kSeparate;
  throw ValidationError("head_mode must be shared or separate: " + v);
}

const char* align_metric_name(AlignMetric m) {
  switch (m) {
    case AlignMetric::kMse: return "mse";
    case AlignMetric::kCosine: return "cosine";
    case AlignMetric::kNone: return "none";
  }
  return "none";
}

const char* head_mode_name(HeadMode m) {
  return m == HeadMode::kShared ? "shared" : "separate";
}

std::string g9(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

}  // namespace

TrainingConfig parse_training_config(const std::string& text) {
  auto kv = internal::parse_kv(text);
  TrainingConfig cfg;
  auto take = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::string();
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  if (auto v = take("lambda"); !v.empty())
    cfg.lambda = internal::to_double("lambda", v);
  if (auto v = take("align_metric"); !v.empty())
    cfg.align_metric = parse_align_metric(v);
  if (auto v = take("head_mode"); !v.empty()) cfg.head_mode = parse_head_mode(v);
  if (auto v = take("epochs"); !v.empty())
    cfg.epochs = internal::to_u32("epochs", v);
  if (auto v = take("lr0"); !v.empty()) cfg.lr0 = internal::to_double("lr0", v);
  if (auto v = take("decay"); !v.empty())
    cfg.decay = internal::to_double("decay", v);
  if (auto v = take("batch_size"); !v.empty())
    cfg.batch_size = internal::to_u32("batch_size", v);
  if (auto v = take("avg_window"); !v.empty())
    cfg.avg_window = internal::to_u32("avg_window", v);
  if (auto v = take("seed"); !v.empty()) cfg.seed = internal::to_u64("seed", v);
  if (auto v = take("augment_noise_sigma"); !v.empty())
    cfg.augment_noise_sigma = internal::to_double("augment_noise_sigma", v);
  internal::reject_unknown(kv);
  cfg.validate();
  return cfg;
}

TrainingConfig read_training_config(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  return parse_training_config(std::string(bytes.begin(), bytes.end()));
}

std::string render_training_config(const TrainingConfig& cfg) {
  std::string out;
  auto add = [&](const std::string& k, const std::string& v) {
    out += k + " = " + v + "\n";
  };
  add("lambda", g9(cfg.lambda));
  add("align_metric", align_metric_name(cfg.align_metric));
  add("head_mode", head_mode_name(cfg.head_mode));
  add("epochs", std::to_string(cfg.epochs));
  add("lr0", g9(cfg.lr0));
  add("decay", g9(cfg.decay));
  add("batch_size", std::to_string(cfg.batch_size));
  add("avg_window", std::to_string(cfg.avg_window));
  add("seed", std::to_string(cfg.seed));
  add("augment_noise_sigma", g9(cfg.augment_noise_sigma));
  return out;
}

std::uint64_t config_hash(const TrainingConfig& cfg) {
  return fnv1a64(render_training_config(cfg));
}

double lr_for_epoch(const TrainingConfig& cfg, std::uint32_t epoch) {
  return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(epoch));
}

void adam_step(std::vector<double>& params, std::span<const double> grads,
               AdamState& state, double lr, const ParamLayout& layout) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: parameter/gradient/state size mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("non-finite gradient in parameter " +
                         layout.name_at(i));
    }
  }
  state.t += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
    double m_hat = state.m[i] / bc1;
    double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

std::vector<InputBatch> make_epoch_batches(
    const std::vector<PairedSample>& train, const TrainingConfig& cfg,
    RandomSource& rng) {
  if (train.empty()) throw ValidationError("training set is empty");

  // Group sample indices by identity, in first-appearance order.
  std::vector<std::uint32_t> identity_order;
  std::map<std::uint32_t, std::vector<std::size_t>> by_identity;
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto [it, inserted] = by_identity.try_emplace(train[i].identity);
    if (inserted) identity_order.push_back(train[i].identity);
    it->second.push_back(i);
  }

  // Re-draw the pairing: independent face and voice permutations per identity.
  struct Pair {
    std::size_t face_idx, voice_idx;
    std::uint32_t label;
  };
  std::vector<Pair> pairs;
  pairs.reserve(train.size());
  for (std::uint32_t identity : identity_order) {
    std::vector<std::size_t> face_order = by_identity[identity];
    std::vector<std::size_t> voice_order = face_order;
    rng.shuffle(face_order);
    rng.shuffle(voice_order);
    for (std::size_t k = 0; k < face_order.size(); ++k) {
      pairs.push_back({face_order[k], voice_order[k], identity});
    }
  }
  rng.shuffle(pairs);

  const std::size_t face_dim = train.front().face_features.size();
  const std::size_t voice_dim = train.front().voice_features.size();
  std::vector<InputBatch> batches;
  for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
    std::size_t n = std::min<std::size_t>(cfg.batch_size, pairs.size() - start);
    InputBatch batch;
    batch.face = Matrix(n, face_dim);
    batch.voice = Matrix(n, voice_dim);
    batch.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Pair& p = pairs[start + i];
      const auto& ff = train[p.face_idx].face_features;
      const auto& vf = train[p.voice_idx].voice_features;
      std::copy(ff.begin(), ff.end(), batch.face.row(i).begin());
      std::copy(vf.begin(), vf.end(), batch.voice.row(i).begin());
      batch.labels[i] = p.label;
    }
    // Feature-space augmentation, training only.
    if (cfg.augment_noise_sigma > 0.0) {
      for (double& x : batch.face.data) {
        x += cfg.augment_noise_sigma * rng.next_gaussian();
      }
      for (double& x : batch.voice.data) {
        x += cfg.augment_noise_sigma * rng.next_gaussian();
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

LossBreakdown train_epoch(ModelState& model,
                          const std::vector<PairedSample>& train,
                          const TrainingConfig& cfg, AdamState& adam,
                          RandomSource& epoch_rng, double lr) {
  std::vector<InputBatch> batches = make_epoch_batches(train, cfg, epoch_rng);
  std::vector<double> params = flatten_params(model);
  ParamLayout layout = layout_of(model);
  double sum_face = 0.0, sum_voice = 0.0, sum_align = 0.0;
  for (const InputBatch& batch : batches) {
    TotalLossResult r = total_loss(model, batch, cfg.lambda, cfg.align_metric);
    sum_face += r.breakdown.face;
    sum_voice += r.breakdown.voice;
    sum_align += r.breakdown.align;
    adam_step(params, r.grad, adam, lr, layout);
    set_params(model, params);
  }
  const double inv_b = 1.0 / static_cast<double>(batches.size());
  LossBreakdown mean;
  mean.face = sum_face * inv_b;
  mean.voice = sum_voice * inv_b;
  mean.align = sum_align * inv_b;
  mean.lambda = cfg.lambda;
  mean.total = mean.face + mean.voice + cfg.lambda * mean.align;
  return mean;
}

std::string format_log_row(const EpochLogRow& row) {
  std::string out = std::to_string(row.epoch);
  out += ' ';
  out += g9(row.lr);
  out += ' ';
  out += g9(row.losses.face);
  out += ' ';
  out += g9(row.losses.voice);
  out += ' ';
  out += g9(row.losses.align);
  out += ' ';
  out += g9(row.losses.total);
  return out;
}

EpochLogRow parse_log_row(const std::string& line) {
  EpochLogRow row;
  unsigned epoch = 0;
  int n = std::sscanf(line.c_str(), "%u %lf %lf %lf %lf %lf", &epoch, &row.lr,
                      &row.losses.face, &row.losses.voice, &row.losses.align,
                      &row.losses.total);
  if (n != 6) throw ValidationError("malformed training log row: " + line);
  row.epoch = epoch;
  return row;
}

ModelSpec model_spec_for(const Dataset& dataset, const TrainingConfig& cfg) {
  if (dataset.train.empty()) throw ValidationError("dataset has no training split");
  // Labels must be contiguous [0, C).
  std::uint32_t max_label = 0;
  for (const PairedSample& s : dataset.train) {
    max_label = std::max(max_label, s.identity);
  }
  std::vector<bool> seen(max_label + 1, false);
  for (const PairedSample& s : dataset.train) seen[s.identity] = true;
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw ValidationError("training identities are not contiguous from 0");
  }
  ModelSpec spec;
  spec.face_input_dim = dataset.config.face_dim;
  spec.voice_input_dim = dataset.config.voice_dim;
  spec.hidden_widths = kDefaultHiddenWidths;
  spec.embedding_dim = kDefaultEmbeddingDim;
  spec.num_classes = max_label + 1;
  spec.head_mode = cfg.head_mode;
  return spec;
}

TrainingRun run_training(const TrainingConfig& cfg, const Dataset& dataset,
                         const std::function<void(const EpochLogRow&)>& on_epoch) {
  cfg.validate();
  ModelSpec spec = model_spec_for(dataset, cfg);
  RandomSource root(cfg.seed);
  ModelState model = init_model(spec, root.split("init"));
  AdamState adam(layout_of(model).total_size);
  const std::uint64_t hash = config_hash(cfg);

  TrainingRun run;
  run.config_hash = hash;
  std::deque<Checkpoint> window;
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = lr_for_epoch(cfg, epoch);
    RandomSource epoch_rng = root.split("epoch." + std::to_string(epoch));
    LossBreakdown losses =
        train_epoch(model, dataset.train, cfg, adam, epoch_rng, lr);
    EpochLogRow row{epoch, lr, losses};
    run.log.push_back(row);
    if (on_epoch) on_epoch(row);
    window.push_back(Checkpoint{epoch, hash, model});
    if (window.size() > cfg.avg_window) window.pop_front();
  }
  run.model = average_checkpoints(
      std::vector<Checkpoint>(window.begin(), window.end()));
  return run;
}

namespace {

ModelState average_impl(const std::vector<const ModelState*>& states) {
  if (states.empty()) throw ValidationError("no checkpoints to average");
  for (const ModelState* s : states) {
    if (!same_architecture(*states.front(), *s)) {
      throw ValidationError("checkpoint architectures differ");
    }
  }
  // Anchored mean: x0 + mean(xi - x0). Identical inputs average exactly.
  std::vector<double> base = flatten_params(*states.front());
  std::vector<double> acc(base.size(), 0.0);
  for (const ModelState* s : states) {
    std::vector<double> flat = flatten_params(*s);
    for (std::size_t i = 0; i < base.size(); ++i) acc[i] += flat[i] - base[i];
  }
  const double inv_k = 1.0 / static_cast<double>(states.size());
  for (std::size_t i = 0; i < base.size(); ++i) base[i] += acc[i] * inv_k;
  ModelState out = *states.front();
  set_params(out, base);
  return out;
}

}  // namespace

ModelState average_checkpoints(const std::vector<Checkpoint>& checkpoints) {
  if (checkpoints.empty()) throw ValidationError("no checkpoints to average");
  for (const Checkpoint& c : checkpoints) {
    if (c.config_hash != checkpoints.front().config_hash) {
      throw ValidationError("checkpoint config hashes differ");
    }
  }
  std::vector<const ModelState*> states;
  states.reserve(checkpoints.size());
  for (const Checkpoint& c : checkpoints) states.push_back(&c.state);
  return average_impl(states);
}

ModelState average_states(const std::vector<ModelState>& states) {
  std::vector<const ModelState*> ptrs;
  ptrs.reserve(states.size());
  for (const ModelState& s : states) ptrs.push_back(&s);
  return average_impl(ptrs);
}

}  // namespace xmalign
