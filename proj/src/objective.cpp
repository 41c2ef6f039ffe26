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

#include "xmalign/objective.hpp"

#include <cmath>
#include <string>

#include "xmalign/errors.hpp"
#include "xmalign/numerics.hpp"

namespace xmalign {

namespace {

void check_batch_shapes(const Matrix& face, const Matrix& voice) {
  if (face.rows != voice.rows) {
    throw ShapeError("face/voice batch row counts differ");
  }
  if (face.rows == 0) throw ValidationError("empty batch rejected");
}

}  // namespace

AlignResult align_loss_mse(const BatchEmbeddings& batch) {
  check_batch_shapes(batch.face, batch.voice);
  if (batch.face.cols != batch.voice.cols) {
    throw ShapeError("face/voice embedding dims differ");
  }
  const std::size_t n = batch.face.rows;
  AlignResult out;
  out.grad_face = Matrix(batch.face.rows, batch.face.cols);
  out.grad_voice = Matrix(batch.face.rows, batch.face.cols);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < batch.face.data.size(); ++i) {
    double d = batch.face.data[i] - batch.voice.data[i];
    loss += d * d;
    out.grad_face.data[i] = 2.0 * inv_n * d;
    out.grad_voice.data[i] = -out.grad_face.data[i];
  }
  out.loss = loss * inv_n;
  return out;
}

AlignResult align_loss_cosine(const BatchEmbeddings& batch) {
  check_batch_shapes(batch.face, batch.voice);
  if (batch.face.cols != batch.voice.cols) {
    throw ShapeError("face/voice embedding dims differ");
  }
  const std::size_t n = batch.face.rows;
  AlignResult out;
  out.grad_face = Matrix(batch.face.rows, batch.face.cols);
  out.grad_voice = Matrix(batch.face.rows, batch.face.cols);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto f = batch.face.row(i);
    auto v = batch.voice.row(i);
    double nf = std::sqrt(squared_norm(f));
    double nv = std::sqrt(squared_norm(v));
    if (nf == 0.0 || nv == 0.0) {
      throw NumericError("zero-norm embedding in cosine alignment, row " +
                         std::to_string(i));
    }
    double c = dot(f, v) / (nf * nv);
    loss += 1.0 - c;
    // d(1 - cos)/df = -(v / (|f||v|) - cos * f / |f|^2), likewise for v.
    for (std::size_t j = 0; j < f.size(); ++j) {
      out.grad_face(i, j) = -inv_n * (v[j] / (nf * nv) - c * f[j] / (nf * nf));
      out.grad_voice(i, j) = -inv_n * (f[j] / (nf * nv) - c * v[j] / (nv * nv));
    }
  }
  out.loss = loss * inv_n;
  return out;
}

CeResult ce_loss(const Matrix& logits, const std::vector<std::uint32_t>& labels) {
  if (logits.rows == 0) throw ValidationError("empty batch rejected");
  if (labels.size() != logits.rows) {
    throw ShapeError("label count != logit rows");
  }
  const std::size_t n = logits.rows;
  const std::size_t c = logits.cols;
  CeResult out;
  out.grad_logits = Matrix(n, c);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) {
      throw ValidationError("label " + std::to_string(labels[i]) +
                            " out of range for " + std::to_string(c) +
                            " classes");
    }
    std::vector<double> ls = log_softmax(logits.row(i));
    loss -= ls[labels[i]];
    for (std::size_t j = 0; j < c; ++j) {
      out.grad_logits(i, j) = std::exp(ls[j]) * inv_n;
    }
    out.grad_logits(i, labels[i]) -= inv_n;
  }
  out.loss = loss * inv_n;
  return out;
}

namespace {

// Gradient of the CE terms w.r.t. the active head matrix and the embeddings:
//   dL/dW += grad_logits^T * emb,  dL/demb = grad_logits * W.
void head_backward(const Matrix& w, const Matrix& emb, const Matrix& grad_logits,
                   Matrix& grad_w, Matrix& grad_emb) {
  for (std::size_t i = 0; i < emb.rows; ++i) {
    for (std::size_t j = 0; j < w.rows; ++j) {
      double g = grad_logits(i, j);
      if (g == 0.0) continue;
      const double* wrow = w.data.data() + j * w.cols;
      double* gwrow = grad_w.data.data() + j * grad_w.cols;
      const double* erow = emb.data.data() + i * emb.cols;
      double* gerow = grad_emb.data.data() + i * grad_emb.cols;
      for (std::size_t k = 0; k < w.cols; ++k) {
        gwrow[k] += g * erow[k];
        gerow[k] += g * wrow[k];
      }
    }
  }
}

}  // namespace

TotalLossResult total_loss(const ModelState& model, const InputBatch& batch,
                           double lambda, AlignMetric metric) {
  if (lambda < 0.0) throw ValidationError("lambda must be >= 0");
  check_batch_shapes(batch.face, batch.voice);
  if (batch.labels.size() != batch.face.rows) {
    throw ShapeError("label count != batch rows");
  }
  const std::size_t n = batch.face.rows;
  const std::size_t d = model.embedding_dim;

  // Forward through both encoders, keeping per-row caches.
  BatchEmbeddings emb;
  emb.face = Matrix(n, d);
  emb.voice = Matrix(n, d);
  emb.labels = batch.labels;
  std::vector<EncoderCache> face_caches(n), voice_caches(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> ef =
        encoder_forward(model.face_encoder, batch.face.row(i), &face_caches[i]);
    std::vector<double> ev = encoder_forward(model.voice_encoder,
                                             batch.voice.row(i), &voice_caches[i]);
    std::copy(ef.begin(), ef.end(), emb.face.row(i).begin());
    std::copy(ev.begin(), ev.end(), emb.voice.row(i).begin());
  }

  // Head logits per modality.
  const Matrix& wf = model.head.active(Modality::kFace);
  const Matrix& wv = model.head.active(Modality::kVoice);
  const std::size_t c = wf.rows;
  Matrix logits_face(n, c), logits_voice(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> lf = head_logits(model.head, emb.face.row(i), Modality::kFace);
    std::vector<double> lv =
        head_logits(model.head, emb.voice.row(i), Modality::kVoice);
    std::copy(lf.begin(), lf.end(), logits_face.row(i).begin());
    std::copy(lv.begin(), lv.end(), logits_voice.row(i).begin());
  }

  CeResult ce_face = ce_loss(logits_face, batch.labels);
  CeResult ce_voice = ce_loss(logits_voice, batch.labels);

  AlignResult align;
  switch (metric) {
    case AlignMetric::kMse:
      align = align_loss_mse(emb);
      break;
    case AlignMetric::kCosine:
      align = align_loss_cosine(emb);
      break;
    case AlignMetric::kNone:
      align.loss = 0.0;
      align.grad_face = Matrix(n, d);
      align.grad_voice = Matrix(n, d);
      break;
  }

  TotalLossResult out;
  out.breakdown.face = ce_face.loss;
  out.breakdown.voice = ce_voice.loss;
  out.breakdown.align = align.loss;
  out.breakdown.lambda = lambda;
  out.breakdown.total = ce_face.loss + ce_voice.loss + lambda * align.loss;

  // Backward. Gradients accumulate into a zeroed model-shaped container.
  ModelState grads = zeros_like(model);
  Matrix grad_emb_face(n, d), grad_emb_voice(n, d);
  head_backward(wf, emb.face, ce_face.grad_logits,
                grads.head.active(Modality::kFace), grad_emb_face);
  head_backward(wv, emb.voice, ce_voice.grad_logits,
                grads.head.active(Modality::kVoice), grad_emb_voice);
  if (lambda != 0.0 && metric != AlignMetric::kNone) {
    axpy(lambda, align.grad_face, grad_emb_face);
    axpy(lambda, align.grad_voice, grad_emb_voice);
  }
  for (std::size_t i = 0; i < n; ++i) {
    encoder_backward(model.face_encoder, face_caches[i], grad_emb_face.row(i),
                     grads.face_encoder);
    encoder_backward(model.voice_encoder, voice_caches[i],
                     grad_emb_voice.row(i), grads.voice_encoder);
  }
  out.grad = flatten_params(grads);
  return out;
}

}  // namespace xmalign
