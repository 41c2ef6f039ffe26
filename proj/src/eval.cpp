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

#include "xmalign/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "xmalign/errors.hpp"
#include "xmalign/serialize.hpp"

namespace xmalign {

namespace {

std::string g9(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

}  // namespace

ScoreFile score_trials(const ModelState& model, const Dataset& dataset,
                       const std::string& system_id) {
  // Embed each referenced sample once per modality.
  std::unordered_map<std::uint32_t, std::vector<double>> face_emb, voice_emb;
  auto face_embedding = [&](std::uint32_t id) -> const std::vector<double>& {
    auto it = face_emb.find(id);
    if (it == face_emb.end()) {
      const PairedSample& s = sample_by_id(dataset, id);
      it = face_emb.emplace(id, encoder_forward(model.face_encoder,
                                                s.face_features)).first;
    }
    return it->second;
  };
  auto voice_embedding = [&](std::uint32_t id) -> const std::vector<double>& {
    auto it = voice_emb.find(id);
    if (it == voice_emb.end()) {
      const PairedSample& s = sample_by_id(dataset, id);
      it = voice_emb.emplace(id, encoder_forward(model.voice_encoder,
                                                 s.voice_features)).first;
    }
    return it->second;
  };

  ScoreFile out;
  out.system_id = system_id;
  out.rows.reserve(dataset.trials.trials.size());
  for (std::size_t i = 0; i < dataset.trials.trials.size(); ++i) {
    const Trial& t = dataset.trials.trials[i];
    const std::vector<double>& ef = face_embedding(t.face_sample_id);
    const std::vector<double>& ev = voice_embedding(t.voice_sample_id);
    double nf = std::sqrt(squared_norm(ef));
    double nv = std::sqrt(squared_norm(ev));
    if (nf == 0.0) {
      throw NumericError("zero-norm face embedding for sample " +
                         std::to_string(t.face_sample_id));
    }
    if (nv == 0.0) {
      throw NumericError("zero-norm voice embedding for sample " +
                         std::to_string(t.voice_sample_id));
    }
    double score = dot(ef, ev) / (nf * nv);
    out.rows.push_back(
        {static_cast<std::uint32_t>(i), score, t.is_target, t.condition});
  }
  return out;
}

double compute_eer(const std::vector<std::pair<double, bool>>& scores) {
  std::vector<double> targets, nontargets, all;
  all.reserve(scores.size());
  for (const auto& [score, is_target] : scores) {
    if (!std::isfinite(score)) throw NumericError("non-finite score");
    (is_target ? targets : nontargets).push_back(score);
    all.push_back(score);
  }
  if (targets.empty() || nontargets.empty()) {
    throw ValidationError("EER needs at least one target and one nontarget");
  }
  std::sort(targets.begin(), targets.end());
  std::sort(nontargets.begin(), nontargets.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  const double t_count = static_cast<double>(targets.size());
  const double n_count = static_cast<double>(nontargets.size());
  auto frr_at = [&](double threshold) {
    // targets strictly below the threshold
    return static_cast<double>(std::lower_bound(targets.begin(), targets.end(),
                                                threshold) -
                               targets.begin()) /
           t_count;
  };
  auto far_at = [&](double threshold) {
    // nontargets at or above the threshold
    return static_cast<double>(nontargets.end() -
                               std::lower_bound(nontargets.begin(),
                                                nontargets.end(), threshold)) /
           n_count;
  };

  // Operating points at every distinct score, plus the all-rejecting endpoint.
  // diff = FAR - FRR starts at +1 and ends at -1; the EER sits where it
  // crosses zero.
  double prev_far = 1.0, prev_frr = 0.0;
  double prev_diff = 1.0;
  for (std::size_t k = 0; k <= all.size(); ++k) {
    double far, frr;
    if (k < all.size()) {
      far = far_at(all[k]);
      frr = frr_at(all[k]);
    } else {
      far = 0.0;
      frr = 1.0;
    }
    double diff = far - frr;
    if (diff <= 0.0) {
      if (diff == 0.0) return 100.0 * far;
      double t = prev_diff / (prev_diff - diff);
      return 100.0 * (prev_frr + t * (frr - prev_frr));
    }
    prev_far = far;
    prev_frr = frr;
    prev_diff = diff;
  }
  throw NumericError("EER crossing not found");  // unreachable
}

double overall_score(const std::vector<double>& per_condition_eers) {
  if (per_condition_eers.empty()) {
    throw ValidationError("overall score needs at least one condition EER");
  }
  double sum = 0.0;
  for (double e : per_condition_eers) sum += e;
  return sum / static_cast<double>(per_condition_eers.size());
}

ScoreFile fuse_scores(const std::vector<ScoreFile>& systems) {
  if (systems.size() < 2) {
    throw ValidationError("fusion needs at least 2 systems");
  }
  const ScoreFile& first = systems.front();
  for (const ScoreFile& sys : systems) {
    if (sys.rows.size() != first.rows.size()) {
      throw ValidationError("system " + sys.system_id + " has " +
                            std::to_string(sys.rows.size()) + " trials, " +
                            first.system_id + " has " +
                            std::to_string(first.rows.size()));
    }
    for (std::size_t i = 0; i < sys.rows.size(); ++i) {
      const ScoreRow& a = first.rows[i];
      const ScoreRow& b = sys.rows[i];
      if (a.trial_index != b.trial_index || a.is_target != b.is_target ||
          a.condition != b.condition) {
        throw ValidationError("trial lists differ at trial " +
                              std::to_string(a.trial_index) + " between " +
                              first.system_id + " and " + sys.system_id);
      }
    }
  }

  const std::size_t n = first.rows.size();
  if (n == 0) throw ValidationError("cannot fuse empty score files");
  std::vector<std::vector<double>> znormed;
  for (const ScoreFile& sys : systems) {
    double mean = 0.0;
    for (const ScoreRow& r : sys.rows) mean += r.score;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const ScoreRow& r : sys.rows) {
      var += (r.score - mean) * (r.score - mean);
    }
    var /= static_cast<double>(n);
    double sd = std::sqrt(var);
    if (sd == 0.0) {
      throw NumericError("system " + sys.system_id +
                         " has zero score variance, cannot z-normalize");
    }
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (sys.rows[i].score - mean) / sd;
    znormed.push_back(std::move(z));
  }

  ScoreFile fused;
  std::string ids;
  for (const ScoreFile& sys : systems) {
    if (!ids.empty()) ids += ",";
    ids += sys.system_id;
  }
  fused.system_id = "fuse(" + ids + ")";
  fused.rows = first.rows;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const auto& z : znormed) s += z[i];
    fused.rows[i].score = s / static_cast<double>(systems.size());
  }
  return fused;
}

EvalReport make_report(const ScoreFile& scores) {
  std::vector<std::pair<double, bool>> heard, unheard;
  for (const ScoreRow& r : scores.rows) {
    auto& bucket = r.condition == Condition::kHeard ? heard : unheard;
    bucket.emplace_back(r.score, r.is_target);
  }
  EvalReport report;
  std::vector<double> eers;
  auto fill = [&](const std::vector<std::pair<double, bool>>& rows) {
    ConditionStats stats;
    stats.trials = rows.size();
    for (const auto& [score, is_target] : rows) {
      (is_target ? stats.targets : stats.nontargets) += 1;
    }
    stats.eer = compute_eer(rows);
    eers.push_back(stats.eer);
    return stats;
  };
  if (!heard.empty()) report.heard = fill(heard);
  if (!unheard.empty()) report.unheard = fill(unheard);
  if (eers.empty()) throw ValidationError("score file has no trials");
  report.overall = overall_score(eers);
  return report;
}

std::string render_score_file(const ScoreFile& scores) {
  std::string out = "# system=" + scores.system_id +
                    " trials=" + std::to_string(scores.rows.size()) + "\n";
  for (const ScoreRow& r : scores.rows) {
    out += std::to_string(r.trial_index);
    out += ' ';
    out += g9(r.score);
    out += ' ';
    out += r.is_target ? "target" : "nontarget";
    out += ' ';
    out += condition_name(r.condition);
    out += '\n';
  }
  return out;
}

void write_score_file(const std::filesystem::path& path, const ScoreFile& scores) {
  write_file_atomic(path, render_score_file(scores));
}

ScoreFile read_score_file(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("empty score file: " + path.string());
  }
  ScoreFile out;
  std::size_t declared = 0;
  {
    char id[256];
    unsigned long n = 0;
    if (std::sscanf(line.c_str(), "# system=%255s trials=%lu", id, &n) != 2) {
      throw ValidationError("malformed score file header: " + line);
    }
    out.system_id = id;
    declared = n;
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    unsigned idx = 0;
    double score = 0.0;
    char target[16], cond[16];
    if (std::sscanf(line.c_str(), "%u %lf %15s %15s", &idx, &score, target,
                    cond) != 4) {
      throw ValidationError("malformed score row: " + line);
    }
    ScoreRow row;
    row.trial_index = idx;
    row.score = score;
    std::string t = target;
    if (t == "target") {
      row.is_target = true;
    } else if (t == "nontarget") {
      row.is_target = false;
    } else {
      throw ValidationError("bad target field in score row: " + line);
    }
    std::string c = cond;
    if (c == "heard") {
      row.condition = Condition::kHeard;
    } else if (c == "unheard") {
      row.condition = Condition::kUnheard;
    } else {
      throw ValidationError("bad condition field in score row: " + line);
    }
    out.rows.push_back(row);
  }
  if (out.rows.size() != declared) {
    throw ValidationError("score file declares " + std::to_string(declared) +
                          " trials but has " + std::to_string(out.rows.size()));
  }
  return out;
}

std::string render_report(const EvalReport& report) {
  std::string out;
  auto add_condition = [&](const char* name, const ConditionStats& s) {
    out += "eer_" + std::string(name) + " = " + g9(s.eer) + "\n";
    out += "trials_" + std::string(name) + " = " + std::to_string(s.trials) + "\n";
    out += "targets_" + std::string(name) + " = " + std::to_string(s.targets) + "\n";
    out += "nontargets_" + std::string(name) + " = " +
           std::to_string(s.nontargets) + "\n";
  };
  if (report.heard) add_condition("heard", *report.heard);
  if (report.unheard) add_condition("unheard", *report.unheard);
  out += "overall = " + g9(report.overall) + "\n";
  return out;
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  write_file_atomic(path, render_report(report));
}

}  // namespace xmalign
