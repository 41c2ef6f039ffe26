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

#ifndef XMALIGN_MODEL_HPP_
#define XMALIGN_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xmalign/matrix.hpp"
#include "xmalign/rng.hpp"

namespace xmalign {

struct EncoderLayer {
  Matrix weight;             // out_dim x in_dim
  std::vector<double> bias;  // out_dim
};

// Small feed-forward encoder: tanh on every hidden layer, identity on the
// output layer. Doubles as the gradient container in backprop (an encoder's
// grads have exactly its own shapes).
struct MlpEncoder {
  std::vector<EncoderLayer> layers;

  std::size_t input_dim() const { return layers.front().weight.cols; }
  std::size_t output_dim() const { return layers.back().weight.rows; }
};

// Per-layer activations captured during a forward pass, enough to run the
// exact backward pass.
struct EncoderCache {
  std::vector<std::vector<double>> inputs;  // input to each layer
  std::vector<std::vector<double>> post;    // post-activation of each layer
};

// Returns the embedding; fills `cache` when non-null. Throws ShapeError on an
// input length mismatch and NumericError if any activation is non-finite.
std::vector<double> encoder_forward(const MlpEncoder& enc,
                                    std::span<const double> x,
                                    EncoderCache* cache = nullptr);

// Accumulates dLoss/dparams into `grads` (same architecture as `enc`, caller
// zero-initializes) and returns dLoss/dinput.
std::vector<double> encoder_backward(const MlpEncoder& enc,
                                     const EncoderCache& cache,
                                     std::span<const double> grad_embedding,
                                     MlpEncoder& grads);

enum class HeadMode : std::uint8_t { kShared = 0, kSeparate = 1 };
enum class Modality : std::uint8_t { kFace = 0, kVoice = 1 };

// Identity classifier over embeddings, no bias terms. Shared mode keeps one
// C x D matrix applied to both modalities; Separate keeps one per modality.
struct ClassifierHead {
  HeadMode mode = HeadMode::kShared;
  Matrix shared;            // C x D when mode == kShared
  Matrix face;              // C x D when mode == kSeparate
  Matrix voice;             // C x D when mode == kSeparate

  const Matrix& active(Modality m) const {
    if (mode == HeadMode::kShared) return shared;
    return m == Modality::kFace ? face : voice;
  }
  Matrix& active(Modality m) {
    if (mode == HeadMode::kShared) return shared;
    return m == Modality::kFace ? face : voice;
  }
  std::size_t num_classes() const { return active(Modality::kFace).rows; }
};

// logits[j] = <row j of the active matrix, e>.
std::vector<double> head_logits(const ClassifierHead& head,
                                std::span<const double> e, Modality m);

struct ModelState {
  MlpEncoder face_encoder;
  MlpEncoder voice_encoder;
  ClassifierHead head;
  std::size_t embedding_dim = 0;
};

// Architecture description used to build fresh models.
struct ModelSpec {
  std::size_t face_input_dim = 0;
  std::size_t voice_input_dim = 0;
  std::vector<std::size_t> hidden_widths = {64, 64};
  std::size_t embedding_dim = 64;
  std::size_t num_classes = 0;
  HeadMode head_mode = HeadMode::kShared;
};

// Weights uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)), biases
// zero. Each tensor draws from the substream labeled with its parameter name,
// so initialization is independent of enumeration order.
ModelState init_model(const ModelSpec& spec, const RandomSource& root);

// Flat parameter plumbing. Enumeration order is fixed: face encoder layers
// (weight then bias per layer), voice encoder layers, then the head
// (head.shared.W, or head.separate.W_f then head.separate.W_v).
struct ParamEntry {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  std::size_t rows = 0;  // cols == 0 marks a bias vector
  std::size_t cols = 0;
};

struct ParamLayout {
  std::vector<ParamEntry> entries;
  std::size_t total_size = 0;

  // Name of the parameter tensor owning flat index i.
  const std::string& name_at(std::size_t i) const;
};

ParamLayout layout_of(const ModelState& m);
std::vector<double> flatten_params(const ModelState& m);
void set_params(ModelState& m, std::span<const double> flat);
bool same_architecture(const ModelState& a, const ModelState& b);

// Zero-valued clone with identical architecture; the gradient container.
ModelState zeros_like(const ModelState& m);

// Checkpoint container: a model snapshot plus the epoch it came from and the
// hash of the training config that produced it.
struct Checkpoint {
  std::uint32_t epoch = 0;
  std::uint64_t config_hash = 0;
  ModelState state;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace xmalign

#endif  // XMALIGN_MODEL_HPP_
