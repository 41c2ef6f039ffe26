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

#ifndef XMALIGN_OBJECTIVE_HPP_
#define XMALIGN_OBJECTIVE_HPP_

#include <cstdint>
#include <vector>

#include "xmalign/matrix.hpp"
#include "xmalign/model.hpp"

namespace xmalign {

enum class AlignMetric : std::uint8_t { kMse = 0, kCosine = 1, kNone = 2 };

// Paired per-row embeddings for one batch; row i of face and voice belong to
// the identity labels[i].
struct BatchEmbeddings {
  Matrix face;   // N x D
  Matrix voice;  // N x D
  std::vector<std::uint32_t> labels;
};

struct LossBreakdown {
  double face = 0.0;
  double voice = 0.0;
  double align = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

struct AlignResult {
  double loss = 0.0;
  Matrix grad_face;   // N x D
  Matrix grad_voice;  // N x D
};

// Mean squared distance between paired embeddings:
//   (1/N) sum_i ||face_i - voice_i||^2.
AlignResult align_loss_mse(const BatchEmbeddings& batch);

// Mean cosine distance (1/N) sum_i (1 - cos(face_i, voice_i)). Rows must be
// nonzero; a zero-norm row throws NumericError.
AlignResult align_loss_cosine(const BatchEmbeddings& batch);

struct CeResult {
  double loss = 0.0;
  Matrix grad_logits;  // N x C, (softmax - onehot) / N
};

// Mean cross entropy through log_softmax (never softmax-then-log).
CeResult ce_loss(const Matrix& logits, const std::vector<std::uint32_t>& labels);

// Input features for one batch of identity-paired samples.
struct InputBatch {
  Matrix face;   // N x face_input_dim
  Matrix voice;  // N x voice_input_dim
  std::vector<std::uint32_t> labels;
};

struct TotalLossResult {
  LossBreakdown breakdown;
  std::vector<double> grad;  // flat, in layout_of(model) order
};

// Full objective: CE on face logits + CE on voice logits + lambda times the
// alignment term, with gradients accumulated through both encoders and the
// classifier head. In Shared mode the single weight matrix receives
// contributions from both modality CE terms.
TotalLossResult total_loss(const ModelState& model, const InputBatch& batch,
                           double lambda, AlignMetric metric);

}  // namespace xmalign

#endif  // XMALIGN_OBJECTIVE_HPP_
