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

#ifndef XMALIGN_DATA_HPP_
#define XMALIGN_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xmalign/matrix.hpp"

namespace xmalign {

// Linear-Gaussian identity model: every identity is a latent vector z, each
// modality observes a fixed linear map of z plus noise, and the second
// language adds a fixed bias to the voice channel. Training sees only L1
// voices of the training identities; evaluation sees held-out identities in
// both languages (heard = L1, unheard = L2).
struct SyntheticConfig {
  std::uint32_t num_train_identities = 40;
  std::uint32_t num_eval_identities = 20;
  std::uint32_t latent_dim = 16;
  std::uint32_t face_dim = 32;
  std::uint32_t voice_dim = 32;
  std::uint32_t samples_per_identity_per_modality = 20;
  double obs_noise_sigma = 0.2;
  double language_shift_sigma = 1.0;
  std::uint64_t seed = 42;

  void validate() const;
};

SyntheticConfig parse_synthetic_config(const std::string& text);
SyntheticConfig read_synthetic_config(const std::filesystem::path& path);
std::string render_synthetic_config(const SyntheticConfig& cfg);

enum class Language : std::uint8_t { kL1 = 0, kL2 = 1 };
enum class Condition : std::uint8_t { kHeard = 0, kUnheard = 1 };

inline Condition condition_of(Language lang) {
  return lang == Language::kL1 ? Condition::kHeard : Condition::kUnheard;
}

const char* condition_name(Condition c);

// One identity occurrence: co-drawn face-channel and voice-channel features.
struct PairedSample {
  std::uint32_t id = 0;  // unique across the whole dataset
  std::uint32_t identity = 0;
  Language language = Language::kL1;
  std::vector<double> face_features;
  std::vector<double> voice_features;
};

struct Trial {
  std::uint32_t face_sample_id = 0;
  std::uint32_t voice_sample_id = 0;
  bool is_target = false;
  Condition condition = Condition::kHeard;
};

struct TrialList {
  std::vector<Trial> trials;
};

struct Dataset {
  SyntheticConfig config;
  std::vector<PairedSample> train;  // train identities, L1 only
  std::vector<PairedSample> eval;   // eval identities, L1 and L2
  TrialList trials;
};

// Generation internals, exposed for diagnostics and tests.
struct GroundTruth {
  Matrix face_map;                         // face_dim x latent_dim
  Matrix voice_map;                        // voice_dim x latent_dim
  std::vector<double> language_shift;      // voice_dim, added for L2
  std::vector<std::vector<double>> latents;  // per identity, train then eval
};

// Verification trials per condition are capped at this many targets, with
// nontargets subsampled at 5x that.
inline constexpr std::size_t kMaxTargetsPerCondition = 300;
inline constexpr std::size_t kNontargetsPerTarget = 5;

Dataset generate_dataset(const SyntheticConfig& cfg,
                         GroundTruth* truth = nullptr);

void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);

// One trial per line: "face_id voice_id target|nontarget heard|unheard",
// canonically ordered by (condition, face_id, voice_id).
std::string render_trial_list(const TrialList& trials);
void write_trial_list(const std::filesystem::path& path, const TrialList& trials);

const PairedSample& sample_by_id(const Dataset& ds, std::uint32_t id);

}  // namespace xmalign

#endif  // XMALIGN_DATA_HPP_
