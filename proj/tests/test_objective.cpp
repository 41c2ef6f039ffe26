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

#include <cmath>
#include <doctest.h>

#include "xmalign/errors.hpp"
#include "xmalign/numerics.hpp"
#include "xmalign/objective.hpp"
#include "xmalign/rng.hpp"

using namespace xmalign;

namespace {

BatchEmbeddings random_batch(RandomSource& rng, std::size_t n, std::size_t d) {
  BatchEmbeddings b;
  b.face = Matrix(n, d);
  b.voice = Matrix(n, d);
  for (double& x : b.face.data) x = rng.next_gaussian();
  for (double& x : b.voice.data) x = rng.next_gaussian();
  b.labels.assign(n, 0);
  return b;
}

// Finite-difference check of an alignment loss through its embedding inputs.
template <typename LossFn>
void check_align_grads(LossFn loss_fn, const BatchEmbeddings& batch) {
  AlignResult analytic = loss_fn(batch);
  const std::size_t n_face = batch.face.data.size();

  std::vector<double> flat;
  flat.insert(flat.end(), batch.face.data.begin(), batch.face.data.end());
  flat.insert(flat.end(), batch.voice.data.begin(), batch.voice.data.end());
  auto objective = [&](const std::vector<double>& x) {
    BatchEmbeddings probe = batch;
    std::copy(x.begin(), x.begin() + n_face, probe.face.data.begin());
    std::copy(x.begin() + n_face, x.end(), probe.voice.data.begin());
    return loss_fn(probe).loss;
  };
  std::vector<double> numeric = finite_diff_grad(objective, flat, 1e-5);
  for (std::size_t i = 0; i < n_face; ++i) {
    CHECK(relative_error(analytic.grad_face.data[i], numeric[i]) < 1e-4);
    CHECK(relative_error(analytic.grad_voice.data[i], numeric[n_face + i]) <
          1e-4);
  }
}

ModelState small_model(HeadMode mode, std::uint64_t seed) {
  ModelSpec spec;
  spec.face_input_dim = 3;
  spec.voice_input_dim = 4;
  spec.hidden_widths = {5, 4};
  spec.embedding_dim = 3;
  spec.num_classes = 4;
  spec.head_mode = mode;
  return init_model(spec, RandomSource(seed));
}

InputBatch small_batch(const ModelState& model, RandomSource& rng,
                       std::size_t n) {
  InputBatch batch;
  batch.face = Matrix(n, model.face_encoder.input_dim());
  batch.voice = Matrix(n, model.voice_encoder.input_dim());
  for (double& x : batch.face.data) x = rng.next_gaussian();
  for (double& x : batch.voice.data) x = rng.next_gaussian();
  batch.labels.resize(n);
  for (auto& y : batch.labels) {
    y = static_cast<std::uint32_t>(rng.next_below(model.head.num_classes()));
  }
  return batch;
}

}  // namespace

TEST_CASE("mse alignment of identical embeddings is zero") {
  RandomSource rng(1);
  BatchEmbeddings b = random_batch(rng, 3, 4);
  b.voice = b.face;
  AlignResult r = align_loss_mse(b);
  CHECK(r.loss == 0.0);
  for (double g : r.grad_face.data) CHECK(g == 0.0);
  for (double g : r.grad_voice.data) CHECK(g == 0.0);
}

TEST_CASE("mse alignment expands as written") {
  BatchEmbeddings b;
  b.face = Matrix::from_rows({{1.0, 0.0}});
  b.voice = Matrix::from_rows({{0.0, 1.0}});
  b.labels = {0};
  AlignResult r = align_loss_mse(b);
  CHECK(r.loss == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.grad_face(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.grad_face(0, 1) == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(r.grad_voice(0, 0) == doctest::Approx(-2.0).epsilon(1e-14));
}

TEST_CASE("mse alignment gradients match finite differences") {
  RandomSource rng(42);
  BatchEmbeddings b = random_batch(rng, 4, 3);
  check_align_grads([](const BatchEmbeddings& x) { return align_loss_mse(x); },
                    b);
}

TEST_CASE("mse alignment is nonnegative, zero only for equal rows") {
  RandomSource rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    BatchEmbeddings b = random_batch(rng, 1 + rng.next_below(5), 3);
    AlignResult r = align_loss_mse(b);
    CHECK(r.loss >= 0.0);
    if (r.loss == 0.0) {
      CHECK(b.face.data == b.voice.data);
    }
  }
}

TEST_CASE("cosine alignment of parallel embeddings is zero") {
  BatchEmbeddings b;
  b.face = Matrix::from_rows({{2.0, 4.0}, {0.5, 1.0}});
  b.voice = Matrix::from_rows({{1.0, 2.0}, {2.0, 4.0}});
  b.labels = {0, 0};
  AlignResult r = align_loss_cosine(b);
  CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("cosine alignment of orthogonal embeddings is one") {
  BatchEmbeddings b;
  b.face = Matrix::from_rows({{1.0, 0.0}});
  b.voice = Matrix::from_rows({{0.0, 1.0}});
  b.labels = {0};
  AlignResult r = align_loss_cosine(b);
  CHECK(r.loss == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("cosine alignment rejects zero-norm rows") {
  BatchEmbeddings b;
  b.face = Matrix::from_rows({{0.0, 0.0}});
  b.voice = Matrix::from_rows({{1.0, 0.0}});
  b.labels = {0};
  CHECK_THROWS_AS(align_loss_cosine(b), NumericError);
}

TEST_CASE("cosine alignment gradients match finite differences") {
  RandomSource rng(43);
  BatchEmbeddings b = random_batch(rng, 4, 3);
  check_align_grads(
      [](const BatchEmbeddings& x) { return align_loss_cosine(x); }, b);
}

TEST_CASE("cosine alignment value is scale invariant") {
  RandomSource rng(44);
  BatchEmbeddings b = random_batch(rng, 5, 4);
  double base = align_loss_cosine(b).loss;
  for (double c : {0.25, 3.0, 117.0}) {
    BatchEmbeddings scaled = b;
    for (double& x : scaled.face.data) x *= c;
    CHECK(std::abs(align_loss_cosine(scaled).loss - base) < 1e-12);
  }
}

TEST_CASE("cross entropy of uniform logits is log C") {
  for (std::size_t c : {2, 5, 40}) {
    Matrix logits(3, c);
    CeResult r = ce_loss(logits, {0, static_cast<std::uint32_t>(c - 1), 1});
    CHECK(r.loss ==
          doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-12));
  }
}

TEST_CASE("cross entropy frozen two-class value") {
  Matrix logits = Matrix::from_rows({{1.0, 0.0}});
  CeResult r = ce_loss(logits, {0});
  CHECK(r.loss == doctest::Approx(0.31326168751822286).epsilon(1e-12));
}

TEST_CASE("cross entropy is stable under huge logits") {
  Matrix logits = Matrix::from_rows({{1000.0, 0.0, -5.0}});
  CeResult r = ce_loss(logits, {0});
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cross entropy gradient rows sum to zero") {
  RandomSource rng(45);
  Matrix logits(6, 5);
  for (double& x : logits.data) x = rng.next_uniform(-4.0, 4.0);
  std::vector<std::uint32_t> labels(6);
  for (auto& y : labels) y = static_cast<std::uint32_t>(rng.next_below(5));
  CeResult r = ce_loss(logits, labels);
  for (std::size_t i = 0; i < 6; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) s += r.grad_logits(i, j);
    CHECK(std::abs(s) < 1e-12);
  }
}

TEST_CASE("cross entropy rejects bad labels and empty batches") {
  Matrix logits = Matrix::from_rows({{0.0, 0.0}});
  CHECK_THROWS_AS(ce_loss(logits, {2}), ValidationError);
  Matrix empty(0, 2);
  CHECK_THROWS_AS(ce_loss(empty, {}), ValidationError);
}

TEST_CASE("total loss at lambda zero drops the alignment path") {
  RandomSource rng(50);
  ModelState model = small_model(HeadMode::kShared, 7);
  InputBatch batch = small_batch(model, rng, 4);

  TotalLossResult with_metric =
      total_loss(model, batch, 0.0, AlignMetric::kMse);
  TotalLossResult without_metric =
      total_loss(model, batch, 0.0, AlignMetric::kNone);
  CHECK(with_metric.breakdown.total ==
        doctest::Approx(with_metric.breakdown.face +
                        with_metric.breakdown.voice)
            .epsilon(1e-15));
  CHECK(with_metric.grad == without_metric.grad);
}

TEST_CASE("total loss equals the sum of its parts") {
  RandomSource rng(51);
  for (AlignMetric metric : {AlignMetric::kMse, AlignMetric::kCosine}) {
    ModelState model = small_model(HeadMode::kSeparate, 8);
    InputBatch batch = small_batch(model, rng, 3);
    double lambda = 0.7;
    TotalLossResult r = total_loss(model, batch, lambda, metric);

    // Recompute the three terms independently.
    BatchEmbeddings emb;
    emb.face = Matrix(3, model.embedding_dim);
    emb.voice = Matrix(3, model.embedding_dim);
    emb.labels = batch.labels;
    Matrix logits_f(3, model.head.num_classes());
    Matrix logits_v(3, model.head.num_classes());
    for (std::size_t i = 0; i < 3; ++i) {
      auto ef = encoder_forward(model.face_encoder, batch.face.row(i));
      auto ev = encoder_forward(model.voice_encoder, batch.voice.row(i));
      std::copy(ef.begin(), ef.end(), emb.face.row(i).begin());
      std::copy(ev.begin(), ev.end(), emb.voice.row(i).begin());
      auto lf = head_logits(model.head, ef, Modality::kFace);
      auto lv = head_logits(model.head, ev, Modality::kVoice);
      std::copy(lf.begin(), lf.end(), logits_f.row(i).begin());
      std::copy(lv.begin(), lv.end(), logits_v.row(i).begin());
    }
    double l_face = ce_loss(logits_f, batch.labels).loss;
    double l_voice = ce_loss(logits_v, batch.labels).loss;
    double l_align = metric == AlignMetric::kMse ? align_loss_mse(emb).loss
                                                 : align_loss_cosine(emb).loss;
    CHECK(std::abs(r.breakdown.face - l_face) < 1e-15);
    CHECK(std::abs(r.breakdown.voice - l_voice) < 1e-15);
    CHECK(std::abs(r.breakdown.align - l_align) < 1e-15);
    CHECK(std::abs(r.breakdown.total - (l_face + l_voice + lambda * l_align)) <
          1e-12);
  }
}

TEST_CASE("total loss gradients match finite differences") {
  RandomSource rng(52);
  for (HeadMode mode : {HeadMode::kShared, HeadMode::kSeparate}) {
    for (AlignMetric metric :
         {AlignMetric::kMse, AlignMetric::kCosine, AlignMetric::kNone}) {
      ModelState model = small_model(mode, 9);
      InputBatch batch = small_batch(model, rng, 4);
      double lambda = 1.0;
      TotalLossResult analytic = total_loss(model, batch, lambda, metric);

      ModelState probe = model;
      auto objective = [&](const std::vector<double>& flat) {
        set_params(probe, flat);
        return total_loss(probe, batch, lambda, metric).breakdown.total;
      };
      std::vector<double> numeric =
          finite_diff_grad(objective, flatten_params(model), 1e-5);
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        CHECK(relative_error(analytic.grad[i], numeric[i]) < 1e-4);
      }
    }
  }
}

TEST_CASE("shared gradient equals the sum of separate gradients") {
  RandomSource rng(53);
  ModelState shared = small_model(HeadMode::kShared, 10);
  InputBatch batch = small_batch(shared, rng, 5);

  ModelState separate = shared;
  separate.head.mode = HeadMode::kSeparate;
  separate.head.face = shared.head.shared;
  separate.head.voice = shared.head.shared;
  separate.head.shared = Matrix();

  for (AlignMetric metric : {AlignMetric::kMse, AlignMetric::kNone}) {
    TotalLossResult rs = total_loss(shared, batch, 1.0, metric);
    TotalLossResult rp = total_loss(separate, batch, 1.0, metric);

    ParamLayout ls = layout_of(shared);
    ParamLayout lp = layout_of(separate);
    const ParamEntry* shared_w = &ls.entries.back();
    REQUIRE(shared_w->name == "head.shared.W");
    const ParamEntry* wf = &lp.entries[lp.entries.size() - 2];
    const ParamEntry* wv = &lp.entries.back();
    REQUIRE(wf->name == "head.separate.W_f");
    REQUIRE(wv->name == "head.separate.W_v");
    for (std::size_t k = 0; k < shared_w->size; ++k) {
      double lhs = rs.grad[shared_w->offset + k];
      double rhs = rp.grad[wf->offset + k] + rp.grad[wv->offset + k];
      CHECK(std::abs(lhs - rhs) < 1e-12);
    }
  }
}

TEST_CASE("a small gradient step does not increase the objective") {
  RandomSource root(54);
  for (int rep = 0; rep < 50; ++rep) {
    RandomSource rng = root.split("rep." + std::to_string(rep));
    HeadMode mode = rng.next_below(2) ? HeadMode::kShared : HeadMode::kSeparate;
    const AlignMetric metrics[] = {AlignMetric::kMse, AlignMetric::kCosine,
                                   AlignMetric::kNone};
    AlignMetric metric = metrics[rng.next_below(3)];
    ModelState model = small_model(mode, 100 + rep);
    InputBatch batch = small_batch(model, rng, 1 + rng.next_below(4));
    double lambda = rng.next_uniform(0.0, 1.5);

    TotalLossResult r = total_loss(model, batch, lambda, metric);
    std::vector<double> params = flatten_params(model);
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] -= 1e-4 * r.grad[i];
    }
    ModelState stepped = model;
    set_params(stepped, params);
    double after = total_loss(stepped, batch, lambda, metric).breakdown.total;
    CHECK(after <= r.breakdown.total + 1e-12);
  }
}

TEST_CASE("empty batches are rejected") {
  ModelState model = small_model(HeadMode::kShared, 11);
  InputBatch batch;
  batch.face = Matrix(0, 3);
  batch.voice = Matrix(0, 4);
  CHECK_THROWS_AS(total_loss(model, batch, 1.0, AlignMetric::kMse),
                  ValidationError);
}
