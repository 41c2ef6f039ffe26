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

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xmalign/data.hpp"
#include "xmalign/errors.hpp"
#include "xmalign/eval.hpp"
#include "xmalign/gradcheck.hpp"
#include "xmalign/model.hpp"
#include "xmalign/serialize.hpp"
#include "xmalign/training.hpp"

namespace {

using nlohmann::json;
using namespace xmalign;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

json file_entry(const std::filesystem::path& p) {
  return json{{"path", p.string()}, {"fnv64", hex64(file_checksum(p))}};
}

// Parses a canonical "key = value" rendering into a JSON object.
json config_as_json(const std::string& rendered) {
  json obj = json::object();
  std::istringstream in(rendered);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq - 1);
    obj[key] = line.substr(eq + 2);
  }
  return obj;
}

void write_manifest(const std::filesystem::path& out_path, json manifest) {
  manifest["timestamp_utc"] = utc_timestamp();
  std::filesystem::path p = out_path;
  p += ".manifest.json";
  write_file_atomic(p, manifest.dump(2) + "\n");
}

struct GenDataArgs {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int cmd_gen_data(const GenDataArgs& args) {
  SyntheticConfig cfg;
  if (!args.config_path.empty()) cfg = read_synthetic_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  cfg.validate();

  Dataset ds = generate_dataset(cfg);
  std::filesystem::path out = args.out;
  write_dataset(out, ds);
  std::filesystem::path trials_path = out;
  trials_path += ".trials";
  write_trial_list(trials_path, ds.trials);

  std::size_t heard = 0, unheard = 0;
  for (const Trial& t : ds.trials.trials) {
    (t.condition == Condition::kHeard ? heard : unheard) += 1;
  }
  std::cout << "train samples: " << ds.train.size() << "\n"
            << "eval samples: " << ds.eval.size() << "\n"
            << "trials heard: " << heard << "\n"
            << "trials unheard: " << unheard << "\n";

  json manifest{
      {"command", "gen-data"},
      {"seed", cfg.seed},
      {"config", config_as_json(render_synthetic_config(cfg))},
      {"inputs", json::object()},
      {"outputs",
       {{"dataset", file_entry(out)}, {"trials", file_entry(trials_path)}}},
  };
  if (!args.config_path.empty()) {
    manifest["inputs"]["config"] = file_entry(args.config_path);
  }
  write_manifest(out, manifest);
  return kExitOk;
}

struct TrainArgs {
  std::string config_path;
  std::string data_path;
  std::string out;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::string head;
  std::string align;
  std::uint32_t epochs = 0;
  bool seed_set = false, lambda_set = false, epochs_set = false;
};

int cmd_train(const TrainArgs& args) {
  TrainingConfig cfg;
  if (!args.config_path.empty()) cfg = read_training_config(args.config_path);
  std::vector<std::string> overrides;
  if (args.seed_set) {
    cfg.seed = args.seed;
    overrides.push_back("seed");
  }
  if (args.lambda_set) {
    cfg.lambda = args.lambda;
    overrides.push_back("lambda");
  }
  if (!args.head.empty()) {
    cfg.head_mode = args.head == "shared" ? HeadMode::kShared : HeadMode::kSeparate;
    overrides.push_back("head_mode");
  }
  if (!args.align.empty()) {
    cfg.align_metric = args.align == "mse"      ? AlignMetric::kMse
                       : args.align == "cosine" ? AlignMetric::kCosine
                                                : AlignMetric::kNone;
    overrides.push_back("align_metric");
  }
  if (args.epochs_set) {
    cfg.epochs = args.epochs;
    overrides.push_back("epochs");
  }
  cfg.validate();

  Dataset ds = read_dataset(args.data_path);
  std::filesystem::path out = args.out;
  std::filesystem::path log_path = out;
  log_path += ".log";

  // Append-only log, flushed per epoch so a numeric failure leaves the rows
  // written so far on disk.
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot open " + log_path.string() + " for writing");
  std::uint32_t done = 0;
  auto on_epoch = [&](const EpochLogRow& row) {
    log << format_log_row(row) << "\n";
    log.flush();
    ++done;
    if (done % 50 == 0 || done == cfg.epochs) {
      std::cout << "epoch " << row.epoch << " lr " << row.lr << " total "
                << row.losses.total << std::endl;
    }
  };

  TrainingRun run;
  try {
    run = run_training(cfg, ds, on_epoch);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " (after epoch " +
                       std::to_string(done) + ", see " + log_path.string() + ")");
  }

  Checkpoint ckpt;
  ckpt.epoch = cfg.epochs - 1;
  ckpt.config_hash = run.config_hash;
  ckpt.state = run.model;
  save_checkpoint(out, ckpt);
  std::cout << "final total loss: " << run.log.back().losses.total << "\n"
            << "checkpoint: " << out.string() << "\n";

  json manifest{
      {"command", "train"},
      {"seed", cfg.seed},
      {"config", config_as_json(render_training_config(cfg))},
      {"config_hash", hex64(run.config_hash)},
      {"overrides", overrides},
      {"inputs", {{"dataset", file_entry(args.data_path)}}},
      {"outputs",
       {{"checkpoint", file_entry(out)}, {"log", file_entry(log_path)}}},
  };
  if (!args.config_path.empty()) {
    manifest["inputs"]["config"] = file_entry(args.config_path);
  }
  write_manifest(out, manifest);
  return kExitOk;
}

struct EvalArgs {
  std::string ckpt_path;
  std::string data_path;
  std::string out;
};

int cmd_eval(const EvalArgs& args) {
  Checkpoint ckpt = load_checkpoint(args.ckpt_path);
  Dataset ds = read_dataset(args.data_path);
  std::string system_id = std::filesystem::path(args.ckpt_path).stem().string();
  ScoreFile scores = score_trials(ckpt.state, ds, system_id);
  EvalReport report = make_report(scores);

  std::filesystem::path out = args.out;
  write_score_file(out, scores);
  std::filesystem::path report_path = out;
  report_path += ".report";
  write_report(report_path, report);
  std::cout << render_report(report);

  json manifest{
      {"command", "eval"},
      {"seed", nullptr},
      {"inputs",
       {{"checkpoint", file_entry(args.ckpt_path)},
        {"dataset", file_entry(args.data_path)}}},
      {"outputs",
       {{"scores", file_entry(out)}, {"report", file_entry(report_path)}}},
  };
  write_manifest(out, manifest);
  return kExitOk;
}

struct FuseArgs {
  std::vector<std::string> score_paths;
  std::string out;
};

int cmd_fuse(const FuseArgs& args) {
  if (args.score_paths.size() < 2) {
    throw ValidationError("fusion needs at least 2 score files");
  }
  std::vector<ScoreFile> systems;
  for (const std::string& p : args.score_paths) {
    systems.push_back(read_score_file(p));
  }
  ScoreFile fused = fuse_scores(systems);
  EvalReport report = make_report(fused);

  std::filesystem::path out = args.out;
  write_score_file(out, fused);
  std::filesystem::path report_path = out;
  report_path += ".report";
  write_report(report_path, report);
  std::cout << render_report(report);

  json inputs = json::object();
  for (std::size_t i = 0; i < args.score_paths.size(); ++i) {
    inputs["scores" + std::to_string(i)] = file_entry(args.score_paths[i]);
  }
  json manifest{
      {"command", "fuse"},
      {"seed", nullptr},
      {"inputs", inputs},
      {"outputs",
       {{"scores", file_entry(out)}, {"report", file_entry(report_path)}}},
  };
  write_manifest(out, manifest);
  return kExitOk;
}

struct GradcheckArgs {
  std::uint64_t seed = 7;
  std::uint32_t trials = 120;
  double inject = 0.0;
};

int cmd_gradcheck(const GradcheckArgs& args) {
  if (args.trials == 0) throw ValidationError("gradcheck needs trials >= 1");
  GradCheckOptions opts;
  opts.seed = args.seed;
  opts.trials = args.trials;
  opts.inject_error = args.inject;
  GradCheckResult result = run_gradient_checks(opts);
  std::cout << "trials: " << result.trials << "\n"
            << "max relative error: " << result.max_rel_error << " ("
            << result.worst_param << ")\n"
            << (result.passed ? "PASS" : "FAIL") << "\n";
  if (!result.passed) {
    throw NumericError("gradient check failed, max relative error " +
                       std::to_string(result.max_rel_error) + " in " +
                       result.worst_param);
  }
  return kExitOk;
}

int dispatch(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-modal verification: synthetic data, training, EER "
               "evaluation, score fusion"};
  app.require_subcommand(1);
  std::function<int()> action;

  GenDataArgs gen;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-data", "generate a synthetic dataset and trial list");
  gen_cmd->add_option("--config", gen.config_path, "synthetic config file");
  gen_cmd->add_option("--out", gen.out, "output dataset path")->required();
  CLI::Option* gen_seed = gen_cmd->add_option("--seed", gen.seed, "seed override");
  gen_cmd->callback([&] {
    gen.seed_set = gen_seed->count() > 0;
    action = [&] { return cmd_gen_data(gen); };
  });

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  train_cmd->add_option("--config", train.config_path, "training config file");
  train_cmd->add_option("--data", train.data_path, "dataset path")->required();
  train_cmd->add_option("--out", train.out, "output checkpoint path")->required();
  CLI::Option* train_seed =
      train_cmd->add_option("--seed", train.seed, "seed override");
  CLI::Option* train_lambda =
      train_cmd->add_option("--lambda", train.lambda, "alignment weight override");
  train_cmd->add_option("--head", train.head, "classifier head override")
      ->check(CLI::IsMember({"shared", "separate"}));
  train_cmd->add_option("--align", train.align, "alignment metric override")
      ->check(CLI::IsMember({"mse", "cosine", "none"}));
  CLI::Option* train_epochs =
      train_cmd->add_option("--epochs", train.epochs, "epoch count override");
  train_cmd->callback([&] {
    train.seed_set = train_seed->count() > 0;
    train.lambda_set = train_lambda->count() > 0;
    train.epochs_set = train_epochs->count() > 0;
    action = [&] { return cmd_train(train); };
  });

  EvalArgs eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "score trials and report per-condition EERs");
  eval_cmd->add_option("--ckpt", eval.ckpt_path, "checkpoint path")->required();
  eval_cmd->add_option("--data", eval.data_path, "dataset path")->required();
  eval_cmd->add_option("--out", eval.out, "output score file path")->required();
  eval_cmd->callback([&] { action = [&] { return cmd_eval(eval); }; });

  FuseArgs fuse;
  CLI::App* fuse_cmd =
      app.add_subcommand("fuse", "z-norm mean fusion of score files");
  fuse_cmd->add_option("scores", fuse.score_paths, "input score files");
  fuse_cmd->add_option("--out", fuse.out, "output score file path")->required();
  fuse_cmd->callback([&] { action = [&] { return cmd_fuse(fuse); }; });

  GradcheckArgs gc;
  CLI::App* gc_cmd = app.add_subcommand(
      "gradcheck", "compare analytic gradients against finite differences");
  gc_cmd->add_option("--seed", gc.seed, "random seed");
  gc_cmd->add_option("--trials", gc.trials, "number of random configurations");
  gc_cmd->add_option("--inject-grad-error", gc.inject,
                     "perturb analytic gradients (sensitivity testing)")
      ->group("");  // hidden
  gc_cmd->callback([&] { action = [&] { return cmd_gradcheck(gc); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  return dispatch(action);
}
