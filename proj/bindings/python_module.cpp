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

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "xmalign/data.hpp"
#include "xmalign/errors.hpp"
#include "xmalign/eval.hpp"
#include "xmalign/gradcheck.hpp"
#include "xmalign/model.hpp"
#include "xmalign/numerics.hpp"
#include "xmalign/training.hpp"

namespace py = pybind11;
using namespace xmalign;

namespace {

py::dict report_to_dict(const EvalReport& report) {
  py::dict d;
  auto add = [&](const char* name, const ConditionStats& s) {
    std::string prefix(name);
    d[("eer_" + prefix).c_str()] = s.eer;
    d[("trials_" + prefix).c_str()] = s.trials;
    d[("targets_" + prefix).c_str()] = s.targets;
    d[("nontargets_" + prefix).c_str()] = s.nontargets;
  };
  if (report.heard) add("heard", *report.heard);
  if (report.unheard) add("unheard", *report.unheard);
  d["overall"] = report.overall;
  return d;
}

}  // namespace

PYBIND11_MODULE(_xmalign, m) {
  m.doc() = "Cross-modal verification core: synthetic datasets, alignment "
            "training, EER scoring and score fusion.";

  py::register_exception<ValidationError>(m, "ValidationError",
                                          PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericalError",
                                       PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::enum_<AlignMetric>(m, "AlignMetric")
      .value("mse", AlignMetric::kMse)
      .value("cosine", AlignMetric::kCosine)
      .value("none", AlignMetric::kNone);

  py::enum_<HeadMode>(m, "HeadMode")
      .value("shared", HeadMode::kShared)
      .value("separate", HeadMode::kSeparate);

  py::class_<SyntheticConfig>(m, "SyntheticConfig")
      .def(py::init<>())
      .def_readwrite("num_train_identities", &SyntheticConfig::num_train_identities)
      .def_readwrite("num_eval_identities", &SyntheticConfig::num_eval_identities)
      .def_readwrite("latent_dim", &SyntheticConfig::latent_dim)
      .def_readwrite("face_dim", &SyntheticConfig::face_dim)
      .def_readwrite("voice_dim", &SyntheticConfig::voice_dim)
      .def_readwrite("samples_per_identity_per_modality",
                     &SyntheticConfig::samples_per_identity_per_modality)
      .def_readwrite("obs_noise_sigma", &SyntheticConfig::obs_noise_sigma)
      .def_readwrite("language_shift_sigma", &SyntheticConfig::language_shift_sigma)
      .def_readwrite("seed", &SyntheticConfig::seed);

  py::class_<TrainingConfig>(m, "TrainingConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &TrainingConfig::lambda)
      .def_readwrite("align_metric", &TrainingConfig::align_metric)
      .def_readwrite("head_mode", &TrainingConfig::head_mode)
      .def_readwrite("epochs", &TrainingConfig::epochs)
      .def_readwrite("lr0", &TrainingConfig::lr0)
      .def_readwrite("decay", &TrainingConfig::decay)
      .def_readwrite("batch_size", &TrainingConfig::batch_size)
      .def_readwrite("avg_window", &TrainingConfig::avg_window)
      .def_readwrite("seed", &TrainingConfig::seed)
      .def_readwrite("augment_noise_sigma", &TrainingConfig::augment_noise_sigma);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly(
          "num_train", [](const Dataset& d) { return d.train.size(); })
      .def_property_readonly("num_eval",
                             [](const Dataset& d) { return d.eval.size(); })
      .def_property_readonly(
          "num_trials", [](const Dataset& d) { return d.trials.trials.size(); });

  py::class_<ModelState>(m, "Model")
      .def_property_readonly(
          "embedding_dim", [](const ModelState& s) { return s.embedding_dim; });

  py::class_<TrainingRun>(m, "TrainingRun")
      .def_readonly("model", &TrainingRun::model)
      .def_readonly("config_hash", &TrainingRun::config_hash)
      .def_property_readonly("log", [](const TrainingRun& run) {
        py::list rows;
        for (const EpochLogRow& r : run.log) {
          rows.append(py::make_tuple(r.epoch, r.lr, r.losses.face,
                                     r.losses.voice, r.losses.align,
                                     r.losses.total));
        }
        return rows;
      });

  m.def("generate_dataset",
        [](const SyntheticConfig& cfg) { return generate_dataset(cfg); },
        py::arg("config"));
  m.def("write_dataset", &write_dataset, py::arg("path"), py::arg("dataset"));
  m.def("read_dataset", &read_dataset, py::arg("path"));

  m.def("train",
        [](const TrainingConfig& cfg, const Dataset& ds) {
          return run_training(cfg, ds);
        },
        py::arg("config"), py::arg("dataset"));

  m.def("save_checkpoint",
        [](const std::filesystem::path& path, const ModelState& model,
           std::uint32_t epoch, std::uint64_t config_hash) {
          save_checkpoint(path, Checkpoint{epoch, config_hash, model});
        },
        py::arg("path"), py::arg("model"), py::arg("epoch") = 0,
        py::arg("config_hash") = 0);
  m.def("load_checkpoint", [](const std::filesystem::path& path) {
    return load_checkpoint(path).state;
  });

  m.def("evaluate",
        [](const ModelState& model, const Dataset& ds,
           const std::string& system_id) {
          ScoreFile scores = score_trials(model, ds, system_id);
          py::dict d = report_to_dict(make_report(scores));
          d["system_id"] = scores.system_id;
          return d;
        },
        py::arg("model"), py::arg("dataset"), py::arg("system_id") = "system");

  m.def("score_trials",
        [](const ModelState& model, const Dataset& ds,
           const std::string& system_id) {
          ScoreFile scores = score_trials(model, ds, system_id);
          std::vector<double> out;
          out.reserve(scores.rows.size());
          for (const ScoreRow& r : scores.rows) out.push_back(r.score);
          return out;
        },
        py::arg("model"), py::arg("dataset"), py::arg("system_id") = "system");

  m.def("compute_eer", &compute_eer, py::arg("scores"),
        "EER in percent from a list of (score, is_target) pairs.");
  m.def("overall_score", &overall_score, py::arg("per_condition_eers"));
  m.def("log_softmax",
        [](const std::vector<double>& v) {
          return log_softmax(std::span<const double>(v));
        },
        py::arg("logits"));

  m.def("fuse_score_files",
        [](const std::vector<std::filesystem::path>& paths,
           const std::filesystem::path& out) {
          std::vector<ScoreFile> systems;
          for (const auto& p : paths) systems.push_back(read_score_file(p));
          ScoreFile fused = fuse_scores(systems);
          write_score_file(out, fused);
          return report_to_dict(make_report(fused));
        },
        py::arg("paths"), py::arg("out"));

  m.def("write_score_file",
        [](const std::filesystem::path& path, const ModelState& model,
           const Dataset& ds, const std::string& system_id) {
          write_score_file(path, score_trials(model, ds, system_id));
        },
        py::arg("path"), py::arg("model"), py::arg("dataset"),
        py::arg("system_id") = "system");

  m.def("gradcheck",
        [](std::uint64_t seed, std::uint32_t trials) {
          GradCheckOptions opts;
          opts.seed = seed;
          opts.trials = trials;
          GradCheckResult r = run_gradient_checks(opts);
          py::dict d;
          d["trials"] = r.trials;
          d["max_rel_error"] = r.max_rel_error;
          d["worst_param"] = r.worst_param;
          d["passed"] = r.passed;
          return d;
        },
        py::arg("seed") = 7, py::arg("trials") = 120);
}
