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

#include "xmalign/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "kv_config.hpp"
#include "xmalign/errors.hpp"
#include "xmalign/rng.hpp"
#include "xmalign/serialize.hpp"

namespace xmalign {

void SyntheticConfig::validate() const {
  if (num_train_identities < 1) {
    throw ValidationError("num_train_identities must be >= 1");
  }
  // Nontarget trials need at least two evaluation identities.
  if (num_eval_identities < 2) {
    throw ValidationError("num_eval_identities must be >= 2");
  }
  if (latent_dim < 1 || face_dim < 1 || voice_dim < 1) {
    throw ValidationError("latent_dim, face_dim, voice_dim must be >= 1");
  }
  if (samples_per_identity_per_modality < 1) {
    throw ValidationError("samples_per_identity_per_modality must be >= 1");
  }
  if (obs_noise_sigma < 0.0 || language_shift_sigma < 0.0) {
    throw ValidationError("noise sigmas must be >= 0");
  }
}

SyntheticConfig parse_synthetic_config(const std::string& text) {
  auto kv = internal::parse_kv(text);
  SyntheticConfig cfg;
  auto take = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::string();
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  if (auto v = take("num_train_identities"); !v.empty())
    cfg.num_train_identities = internal::to_u32("num_train_identities", v);
  if (auto v = take("num_eval_identities"); !v.empty())
    cfg.num_eval_identities = internal::to_u32("num_eval_identities", v);
  if (auto v = take("latent_dim"); !v.empty())
    cfg.latent_dim = internal::to_u32("latent_dim", v);
  if (auto v = take("face_dim"); !v.empty())
    cfg.face_dim = internal::to_u32("face_dim", v);
  if (auto v = take("voice_dim"); !v.empty())
    cfg.voice_dim = internal::to_u32("voice_dim", v);
  if (auto v = take("samples_per_identity_per_modality"); !v.empty())
    cfg.samples_per_identity_per_modality =
        internal::to_u32("samples_per_identity_per_modality", v);
  if (auto v = take("obs_noise_sigma"); !v.empty())
    cfg.obs_noise_sigma = internal::to_double("obs_noise_sigma", v);
  if (auto v = take("language_shift_sigma"); !v.empty())
    cfg.language_shift_sigma = internal::to_double("language_shift_sigma", v);
  if (auto v = take("seed"); !v.empty()) cfg.seed = internal::to_u64("seed", v);
  internal::reject_unknown(kv);
  cfg.validate();
  return cfg;
}

SyntheticConfig read_synthetic_config(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  return parse_synthetic_config(std::string(bytes.begin(), bytes.end()));
}

std::string render_synthetic_config(const SyntheticConfig& cfg) {
  std::string out;
  auto add = [&](const std::string& k, const std::string& v) {
    out += k + " = " + v + "\n";
  };
  char buf[64];
  auto g9 = [&](double x) {
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return std::string(buf);
  };
  add("num_train_identities", std::to_string(cfg.num_train_identities));
  add("num_eval_identities", std::to_string(cfg.num_eval_identities));
  add("latent_dim", std::to_string(cfg.latent_dim));
  add("face_dim", std::to_string(cfg.face_dim));
  add("voice_dim", std::to_string(cfg.voice_dim));
  add("samples_per_identity_per_modality",
      std::to_string(cfg.samples_per_identity_per_modality));
  add("obs_noise_sigma", g9(cfg.obs_noise_sigma));
  add("language_shift_sigma", g9(cfg.language_shift_sigma));
  add("seed", std::to_string(cfg.seed));
  return out;
}

const char* condition_name(Condition c) {
  return c == Condition::kHeard ? "heard" : "unheard";
}

namespace {

std::vector<double> gaussian_vector(RandomSource& rng, std::size_t n,
                                    double sigma) {
  std::vector<double> v(n);
  for (double& x : v) x = sigma * rng.next_gaussian();
  return v;
}

Matrix random_map(RandomSource& rng, std::size_t out_dim, std::size_t in_dim) {
  // Entries N(0, 1/in_dim) so outputs stay O(1) per dimension.
  Matrix m(out_dim, in_dim);
  double scale = std::sqrt(0.35 / static_cast<double>(in_dim));
  for (double& x : m.data) x = scale * rng.next_gaussian();
  return m;
}

std::vector<double> apply_map(const Matrix& m, const std::vector<double>& z) {
  std::vector<double> out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = dot(m.row(i), z);
  return out;
}

// All verification trials for one condition. Targets are capped (and further
// limited so 5x nontargets exist), nontargets drawn without replacement.
void build_condition_trials(const std::vector<PairedSample>& eval,
                            Language lang, RandomSource& rng,
                            std::vector<Trial>& out) {
  std::vector<const PairedSample*> pool;
  for (const PairedSample& s : eval) {
    if (s.language == lang) pool.push_back(&s);
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> targets, nontargets;
  for (const PairedSample* a : pool) {
    for (const PairedSample* b : pool) {
      if (a->identity == b->identity) {
        targets.emplace_back(a->id, b->id);
      } else {
        nontargets.emplace_back(a->id, b->id);
      }
    }
  }
  std::size_t n_target =
      std::min({targets.size(), kMaxTargetsPerCondition,
                nontargets.size() / kNontargetsPerTarget});
  if (n_target == 0) {
    throw ValidationError(
        "cannot build both target and nontarget trials for condition " +
        std::string(condition_name(condition_of(lang))));
  }
  std::size_t n_nontarget = n_target * kNontargetsPerTarget;
  rng.shuffle(targets);
  rng.shuffle(nontargets);
  Condition cond = condition_of(lang);
  for (std::size_t i = 0; i < n_target; ++i) {
    out.push_back({targets[i].first, targets[i].second, true, cond});
  }
  for (std::size_t i = 0; i < n_nontarget; ++i) {
    out.push_back({nontargets[i].first, nontargets[i].second, false, cond});
  }
}

}  // namespace

Dataset generate_dataset(const SyntheticConfig& cfg, GroundTruth* truth) {
  cfg.validate();
  RandomSource root(cfg.seed);

  RandomSource maps_rng = root.split("maps");
  Matrix face_map = random_map(maps_rng, cfg.face_dim, cfg.latent_dim);
  Matrix voice_map = random_map(maps_rng, cfg.voice_dim, cfg.latent_dim);

  RandomSource shift_rng = root.split("language_shift");
  std::vector<double> shift =
      gaussian_vector(shift_rng, cfg.voice_dim, cfg.language_shift_sigma);

  const std::size_t total_ids = cfg.num_train_identities + cfg.num_eval_identities;
  std::vector<std::vector<double>> latents(total_ids);
  for (std::size_t i = 0; i < total_ids; ++i) {
    RandomSource id_rng = root.split("latent." + std::to_string(i));
    latents[i] = gaussian_vector(id_rng, cfg.latent_dim, 1.0);
  }

  Dataset ds;
  ds.config = cfg;
  std::uint32_t next_id = 0;

  auto make_sample = [&](std::uint32_t identity, Language lang,
                         RandomSource& rng) {
    PairedSample s;
    s.id = next_id++;
    s.identity = identity;
    s.language = lang;
    s.face_features = apply_map(face_map, latents[identity]);
    for (std::size_t d = 0; d < cfg.face_dim; ++d) {
      s.face_features[d] += cfg.obs_noise_sigma * rng.next_gaussian();
    }
    s.voice_features = apply_map(voice_map, latents[identity]);
    if (lang == Language::kL2) {
      for (std::size_t d = 0; d < cfg.voice_dim; ++d) {
        s.voice_features[d] += shift[d];
      }
    }
    for (std::size_t d = 0; d < cfg.voice_dim; ++d) {
      s.voice_features[d] += cfg.obs_noise_sigma * rng.next_gaussian();
    }
    return s;
  };

  for (std::uint32_t i = 0; i < cfg.num_train_identities; ++i) {
    RandomSource rng = root.split("train." + std::to_string(i));
    for (std::uint32_t s = 0; s < cfg.samples_per_identity_per_modality; ++s) {
      ds.train.push_back(make_sample(i, Language::kL1, rng));
    }
  }
  for (std::uint32_t j = 0; j < cfg.num_eval_identities; ++j) {
    std::uint32_t identity = cfg.num_train_identities + j;
    for (Language lang : {Language::kL1, Language::kL2}) {
      RandomSource rng =
          root.split("eval." + std::to_string(identity) + "." +
                     std::to_string(static_cast<int>(lang)));
      for (std::uint32_t s = 0; s < cfg.samples_per_identity_per_modality; ++s) {
        ds.eval.push_back(make_sample(identity, lang, rng));
      }
    }
  }

  RandomSource trial_rng = root.split("trials");
  build_condition_trials(ds.eval, Language::kL1, trial_rng, ds.trials.trials);
  build_condition_trials(ds.eval, Language::kL2, trial_rng, ds.trials.trials);
  std::sort(ds.trials.trials.begin(), ds.trials.trials.end(),
            [](const Trial& a, const Trial& b) {
              if (a.condition != b.condition) return a.condition < b.condition;
              if (a.face_sample_id != b.face_sample_id) {
                return a.face_sample_id < b.face_sample_id;
              }
              return a.voice_sample_id < b.voice_sample_id;
            });

  if (truth) {
    truth->face_map = std::move(face_map);
    truth->voice_map = std::move(voice_map);
    truth->language_shift = std::move(shift);
    truth->latents = std::move(latents);
  }
  return ds;
}

namespace {

constexpr std::string_view kDatasetMagic = "XMALNDST";
constexpr std::uint32_t kDatasetVersion = 1;

void write_sample(ByteWriter& w, const PairedSample& s) {
  w.u32(s.id);
  w.u32(s.identity);
  w.u8(static_cast<std::uint8_t>(s.language));
  w.f64_array(s.face_features);
  w.f64_array(s.voice_features);
}

PairedSample read_sample(ByteReader& r, const SyntheticConfig& cfg) {
  PairedSample s;
  s.id = r.u32();
  s.identity = r.u32();
  std::uint8_t lang = r.u8();
  if (lang > 1) throw ChecksumError("invalid language tag in dataset");
  s.language = static_cast<Language>(lang);
  s.face_features = r.f64_array(cfg.face_dim);
  s.voice_features = r.f64_array(cfg.voice_dim);
  return s;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  ByteWriter payload;
  payload.str(render_synthetic_config(ds.config));
  payload.u32(static_cast<std::uint32_t>(ds.train.size()));
  payload.u32(static_cast<std::uint32_t>(ds.eval.size()));
  for (const PairedSample& s : ds.train) write_sample(payload, s);
  for (const PairedSample& s : ds.eval) write_sample(payload, s);
  payload.u32(static_cast<std::uint32_t>(ds.trials.trials.size()));
  for (const Trial& t : ds.trials.trials) {
    payload.u32(t.face_sample_id);
    payload.u32(t.voice_sample_id);
    payload.u8(t.is_target ? 1 : 0);
    payload.u8(static_cast<std::uint8_t>(t.condition));
  }
  write_container(path, kDatasetMagic, kDatasetVersion, payload);
}

Dataset read_dataset(const std::filesystem::path& path) {
  auto bytes = read_container(path, kDatasetMagic, kDatasetVersion);
  ByteReader r(bytes);
  Dataset ds;
  ds.config = parse_synthetic_config(r.str());
  std::uint32_t n_train = r.u32();
  std::uint32_t n_eval = r.u32();
  ds.train.reserve(n_train);
  ds.eval.reserve(n_eval);
  for (std::uint32_t i = 0; i < n_train; ++i) {
    ds.train.push_back(read_sample(r, ds.config));
  }
  for (std::uint32_t i = 0; i < n_eval; ++i) {
    ds.eval.push_back(read_sample(r, ds.config));
  }
  std::uint32_t n_trials = r.u32();
  std::unordered_set<std::uint32_t> ids;
  for (const PairedSample& s : ds.train) ids.insert(s.id);
  for (const PairedSample& s : ds.eval) ids.insert(s.id);
  ds.trials.trials.reserve(n_trials);
  for (std::uint32_t i = 0; i < n_trials; ++i) {
    Trial t;
    t.face_sample_id = r.u32();
    t.voice_sample_id = r.u32();
    t.is_target = r.u8() != 0;
    std::uint8_t cond = r.u8();
    if (cond > 1) throw ChecksumError("invalid condition tag in dataset");
    t.condition = static_cast<Condition>(cond);
    if (!ids.count(t.face_sample_id) || !ids.count(t.voice_sample_id)) {
      throw ChecksumError("trial references missing sample id");
    }
    ds.trials.trials.push_back(t);
  }
  if (!r.exhausted()) throw ChecksumError("trailing bytes in dataset file");
  return ds;
}

std::string render_trial_list(const TrialList& trials) {
  std::vector<Trial> sorted = trials.trials;
  std::sort(sorted.begin(), sorted.end(), [](const Trial& a, const Trial& b) {
    if (a.condition != b.condition) return a.condition < b.condition;
    if (a.face_sample_id != b.face_sample_id) {
      return a.face_sample_id < b.face_sample_id;
    }
    return a.voice_sample_id < b.voice_sample_id;
  });
  std::string out;
  for (const Trial& t : sorted) {
    out += std::to_string(t.face_sample_id);
    out += ' ';
    out += std::to_string(t.voice_sample_id);
    out += ' ';
    out += t.is_target ? "target" : "nontarget";
    out += ' ';
    out += condition_name(t.condition);
    out += '\n';
  }
  return out;
}

void write_trial_list(const std::filesystem::path& path, const TrialList& trials) {
  write_file_atomic(path, render_trial_list(trials));
}

const PairedSample& sample_by_id(const Dataset& ds, std::uint32_t id) {
  if (id < ds.train.size() && ds.train[id].id == id) return ds.train[id];
  std::size_t eval_pos = id - ds.train.size();
  if (id >= ds.train.size() && eval_pos < ds.eval.size() &&
      ds.eval[eval_pos].id == id) {
    return ds.eval[eval_pos];
  }
  for (const PairedSample& s : ds.train) {
    if (s.id == id) return s;
  }
  for (const PairedSample& s : ds.eval) {
    if (s.id == id) return s;
  }
  throw ValidationError("sample id " + std::to_string(id) + " not found");
}

}  // namespace xmalign
