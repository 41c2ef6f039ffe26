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

#ifndef XMALIGN_EVAL_HPP_
#define XMALIGN_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xmalign/data.hpp"
#include "xmalign/model.hpp"

namespace xmalign {

struct ScoreRow {
  std::uint32_t trial_index = 0;
  double score = 0.0;
  bool is_target = false;
  Condition condition = Condition::kHeard;
};

// Per-trial scores of one system, in trial-list order.
struct ScoreFile {
  std::string system_id;
  std::vector<ScoreRow> rows;
};

// Cosine similarity of the raw embeddings per trial; embeddings are not
// normalized anywhere else. Throws NumericError naming the sample if an
// embedding has zero norm.
ScoreFile score_trials(const ModelState& model, const Dataset& dataset,
                       const std::string& system_id);

// Equal error rate in percent. FRR(t) = fraction of targets with score < t,
// FAR(t) = fraction of nontargets with score >= t; the EER is the value at
// the FAR/FRR crossing, linearly interpolated between the two adjacent
// operating points when no threshold ties them exactly (exact ties resolve at
// the lowest tying threshold).
double compute_eer(const std::vector<std::pair<double, bool>>& scores);

// Arithmetic mean of per-condition EERs.
double overall_score(const std::vector<double>& per_condition_eers);

// Z-normalizes each system's scores over the full trial set (population
// standard deviation) and averages them per trial. Trial metadata must match
// across systems, in order.
ScoreFile fuse_scores(const std::vector<ScoreFile>& systems);

struct ConditionStats {
  double eer = 0.0;
  std::size_t trials = 0;
  std::size_t targets = 0;
  std::size_t nontargets = 0;
};

struct EvalReport {
  std::optional<ConditionStats> heard;
  std::optional<ConditionStats> unheard;
  double overall = 0.0;  // mean of the EERs of the populated conditions
};

EvalReport make_report(const ScoreFile& scores);

// Text formats. Scores: header "# system=<id> trials=<n>" then one
// "trial_index score target|nontarget heard|unheard" row per trial, scores at
// 9 significant digits. Report: "key = value" lines.
std::string render_score_file(const ScoreFile& scores);
void write_score_file(const std::filesystem::path& path, const ScoreFile& scores);
ScoreFile read_score_file(const std::filesystem::path& path);

std::string render_report(const EvalReport& report);
void write_report(const std::filesystem::path& path, const EvalReport& report);

}  // namespace xmalign

#endif  // XMALIGN_EVAL_HPP_
