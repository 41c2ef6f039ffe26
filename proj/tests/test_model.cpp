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
#include <filesystem>
#include <fstream>
#include <doctest.h>

#include "xmalign/errors.hpp"
#include "xmalign/model.hpp"
#include "xmalign/numerics.hpp"
#include "xmalign/serialize.hpp"

using namespace xmalign;

namespace {

MlpEncoder linear_encoder(Matrix w) {
  MlpEncoder enc;
  EncoderLayer layer;
  layer.bias.assign(w.rows, 0.0);
  layer.weight = std::move(w);
  enc.layers.push_back(std::move(layer));
  return enc;
}

MlpEncoder two_layer_fixture() {
  MlpEncoder enc;
  EncoderLayer l0;
  l0.weight = Matrix::from_rows({{0.5, -0.25}, {0.1, 0.3}});
  l0.bias = {0.1, -0.2};
  EncoderLayer l1;
  l1.weight = Matrix::from_rows({{1.0, 0.5}, {-0.5, 0.25}});
  l1.bias = {0.01, 0.02};
  enc.layers.push_back(std::move(l0));
  enc.layers.push_back(std::move(l1));
  return enc;
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "xmalign_model_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("zero encoder maps everything to zero") {
  MlpEncoder enc = linear_encoder(Matrix(3, 2));
  auto e = encoder_forward(enc, std::vector<double>{1.5, -2.5});
  for (double x : e) CHECK(x == 0.0);
}

TEST_CASE("identity linear layer passes input through") {
  MlpEncoder enc = linear_encoder(Matrix::identity(2));
  auto e = encoder_forward(enc, std::vector<double>{1.0, 2.0});
  CHECK(e[0] == 1.0);
  CHECK(e[1] == 2.0);
}

TEST_CASE("two-layer forward matches hand evaluation") {
  // tanh hidden layer then linear output, stepped by hand.
  MlpEncoder enc = two_layer_fixture();
  EncoderCache cache;
  auto e = encoder_forward(enc, std::vector<double>{0.3, -0.7}, &cache);
  CHECK(e[0] == doctest::Approx(0.2297805511589203).epsilon(1e-12));
  CHECK(e[1] == doctest::Approx(-0.2712440093684857).epsilon(1e-12));
  REQUIRE(cache.post.size() == 2);
  CHECK(cache.post[0][0] == doctest::Approx(std::tanh(0.425)).epsilon(1e-12));
  CHECK(cache.post[0][1] == doctest::Approx(std::tanh(-0.38)).epsilon(1e-12));
}

TEST_CASE("forward rejects wrong input length and non-finite activations") {
  MlpEncoder enc = two_layer_fixture();
  CHECK_THROWS_AS(encoder_forward(enc, std::vector<double>{1.0}), ShapeError);
  double nan = std::nan("");
  CHECK_THROWS_AS(encoder_forward(enc, std::vector<double>{nan, 0.0}),
                  NumericError);
}

TEST_CASE("forward is deterministic") {
  MlpEncoder enc = two_layer_fixture();
  auto a = encoder_forward(enc, std::vector<double>{0.1, 0.2});
  auto b = encoder_forward(enc, std::vector<double>{0.1, 0.2});
  CHECK(a == b);
}

TEST_CASE("zero output gradient produces zero parameter gradients") {
  MlpEncoder enc = two_layer_fixture();
  EncoderCache cache;
  encoder_forward(enc, std::vector<double>{0.3, -0.7}, &cache);
  MlpEncoder grads = enc;
  for (auto& layer : grads.layers) {
    std::fill(layer.weight.data.begin(), layer.weight.data.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  auto gin = encoder_backward(enc, cache, std::vector<double>{0.0, 0.0}, grads);
  for (double x : gin) CHECK(x == 0.0);
  for (const auto& layer : grads.layers) {
    for (double x : layer.weight.data) CHECK(x == 0.0);
    for (double x : layer.bias) CHECK(x == 0.0);
  }
}

TEST_CASE("linear encoder input gradient is W^T g") {
  Matrix w = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}});
  MlpEncoder enc = linear_encoder(w);
  EncoderCache cache;
  encoder_forward(enc, std::vector<double>{0.5, -0.5}, &cache);
  MlpEncoder grads = enc;
  for (auto& layer : grads.layers) {
    std::fill(layer.weight.data.begin(), layer.weight.data.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  std::vector<double> g{1.0, -1.0, 2.0};
  auto gin = encoder_backward(enc, cache, g, grads);
  // W^T g = [1-3+10, 2-4+12]
  CHECK(gin[0] == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(gin[1] == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("encoder gradients match finite differences over random nets") {
  RandomSource root(2024);
  for (int rep = 0; rep < 100; ++rep) {
    RandomSource rng = root.split("rep." + std::to_string(rep));
    ModelSpec spec;
    spec.face_input_dim = 2 + rng.next_below(4);
    spec.voice_input_dim = 2;
    spec.hidden_widths = {2 + rng.next_below(4), 2 + rng.next_below(4)};
    spec.embedding_dim = 2 + rng.next_below(3);
    spec.num_classes = 2;
    ModelState model = init_model(spec, rng.split("init"));
    const MlpEncoder& enc = model.face_encoder;

    std::vector<double> x(spec.face_input_dim);
    for (double& v : x) v = rng.next_gaussian();
    std::vector<double> gout(spec.embedding_dim);
    for (double& v : gout) v = rng.next_gaussian();

    EncoderCache cache;
    encoder_forward(enc, x, &cache);
    MlpEncoder grads = enc;
    for (auto& layer : grads.layers) {
      std::fill(layer.weight.data.begin(), layer.weight.data.end(), 0.0);
      std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    encoder_backward(enc, cache, gout, grads);

    // Flatten encoder params via a scratch model that only varies the face
    // encoder; the scalar objective is <gout, embedding>.
    ModelState probe = model;
    auto objective = [&](const std::vector<double>& flat) {
      set_params(probe, flat);
      auto e = encoder_forward(probe.face_encoder, x);
      double s = 0.0;
      for (std::size_t i = 0; i < e.size(); ++i) s += gout[i] * e[i];
      return s;
    };
    std::vector<double> numeric =
        finite_diff_grad(objective, flatten_params(model), 1e-5);

    ModelState analytic_container = zeros_like(model);
    analytic_container.face_encoder = grads;
    std::vector<double> analytic = flatten_params(analytic_container);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      CHECK(relative_error(analytic[i], numeric[i]) < 1e-4);
    }
  }
}

TEST_CASE("head logits inner products") {
  ClassifierHead head;
  head.mode = HeadMode::kShared;
  head.shared = Matrix(3, 2);
  auto z = head_logits(head, std::vector<double>{1.0, -1.0}, Modality::kFace);
  for (double x : z) CHECK(x == 0.0);

  head.shared = Matrix::identity(2);
  auto basis = head_logits(head, std::vector<double>{0.0, 1.0}, Modality::kVoice);
  CHECK(basis[0] == 0.0);
  CHECK(basis[1] == 1.0);

  head.shared = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  auto ex = head_logits(head, std::vector<double>{1.0, 0.0}, Modality::kFace);
  CHECK(ex[0] == 1.0);
  CHECK(ex[1] == 0.0);

  CHECK_THROWS_AS(head_logits(head, std::vector<double>{1.0}, Modality::kFace),
                  ShapeError);
}

TEST_CASE("shared head ignores the modality argument") {
  RandomSource rng(8);
  ClassifierHead head;
  head.mode = HeadMode::kShared;
  head.shared = Matrix(5, 4);
  for (double& x : head.shared.data) x = rng.next_gaussian();
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> e(4);
    for (double& x : e) x = rng.next_gaussian();
    auto f = head_logits(head, e, Modality::kFace);
    auto v = head_logits(head, e, Modality::kVoice);
    CHECK(f == v);
  }
}

TEST_CASE("initialization is reproducible and scaled") {
  ModelSpec spec;
  spec.face_input_dim = 6;
  spec.voice_input_dim = 5;
  spec.hidden_widths = {8, 8};
  spec.embedding_dim = 4;
  spec.num_classes = 7;
  ModelState a = init_model(spec, RandomSource(99));
  ModelState b = init_model(spec, RandomSource(99));
  CHECK(flatten_params(a) == flatten_params(b));

  // First layer spread stays inside the fan-scaled bound, biases are zero.
  double bound = std::sqrt(6.0 / (6 + 8));
  for (double w : a.face_encoder.layers[0].weight.data) {
    CHECK(std::abs(w) <= bound);
  }
  for (double bias : a.face_encoder.layers[0].bias) CHECK(bias == 0.0);
}

TEST_CASE("flat parameter round trip") {
  ModelSpec spec;
  spec.face_input_dim = 3;
  spec.voice_input_dim = 4;
  spec.hidden_widths = {5};
  spec.embedding_dim = 2;
  spec.num_classes = 3;
  spec.head_mode = HeadMode::kSeparate;
  ModelState m = init_model(spec, RandomSource(1));
  ParamLayout layout = layout_of(m);
  std::vector<double> flat = flatten_params(m);
  CHECK(flat.size() == layout.total_size);
  CHECK(layout.entries.front().name == "face_encoder.layer0.weight");
  CHECK(layout.entries.back().name == "head.separate.W_v");

  ModelState other = zeros_like(m);
  set_params(other, flat);
  CHECK(flatten_params(other) == flat);
  CHECK(same_architecture(m, other));
}

TEST_CASE("checkpoint round trip is byte identical") {
  ModelSpec spec;
  spec.face_input_dim = 4;
  spec.voice_input_dim = 4;
  spec.hidden_widths = {6, 5};
  spec.embedding_dim = 3;
  spec.num_classes = 4;
  Checkpoint ckpt;
  ckpt.epoch = 17;
  ckpt.config_hash = 0xabcdef0123456789ULL;
  ckpt.state = init_model(spec, RandomSource(5));

  auto p1 = temp_path("ckpt_a.bin");
  auto p2 = temp_path("ckpt_b.bin");
  save_checkpoint(p1, ckpt);
  Checkpoint loaded = load_checkpoint(p1);
  CHECK(loaded.epoch == 17);
  CHECK(loaded.config_hash == ckpt.config_hash);
  CHECK(flatten_params(loaded.state) == flatten_params(ckpt.state));
  CHECK(loaded.state.embedding_dim == 3);

  save_checkpoint(p2, loaded);
  CHECK(read_file_bytes(p1) == read_file_bytes(p2));
}

TEST_CASE("checkpoint loader rejects damage") {
  ModelSpec spec;
  spec.face_input_dim = 3;
  spec.voice_input_dim = 3;
  spec.hidden_widths = {4};
  spec.embedding_dim = 2;
  spec.num_classes = 2;
  Checkpoint ckpt;
  ckpt.state = init_model(spec, RandomSource(6));
  auto path = temp_path("ckpt_damage.bin");
  save_checkpoint(path, ckpt);
  auto bytes = read_file_bytes(path);

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(temp_path("nope.bin")), IoError);
  }
  SUBCASE("bad magic") {
    auto bad = bytes;
    bad[0] ^= 0xff;
    write_file_bytes(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), VersionError);
  }
  SUBCASE("unsupported version") {
    auto bad = bytes;
    bad[8] = 99;
    write_file_bytes(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), VersionError);
  }
  SUBCASE("truncated payload") {
    auto bad = bytes;
    bad.resize(bad.size() - 7);
    write_file_bytes(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), ChecksumError);
  }
  SUBCASE("flipped payload byte") {
    auto bad = bytes;
    bad[bad.size() - 1] ^= 0x1;
    write_file_bytes(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), ChecksumError);
  }
}
