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

#include "xmalign/model.hpp"

#include <cmath>
#include <cstring>

#include "xmalign/errors.hpp"
#include "xmalign/serialize.hpp"

namespace xmalign {

std::vector<double> encoder_forward(const MlpEncoder& enc,
                                    std::span<const double> x,
                                    EncoderCache* cache) {
  if (enc.layers.empty()) throw ShapeError("encoder has no layers");
  if (x.size() != enc.input_dim()) {
    throw ShapeError("encoder input length " + std::to_string(x.size()) +
                     " != expected " + std::to_string(enc.input_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->post.clear();
  }
  std::vector<double> a(x.begin(), x.end());
  for (std::size_t l = 0; l < enc.layers.size(); ++l) {
    const EncoderLayer& layer = enc.layers[l];
    if (layer.weight.cols != a.size() ||
        layer.bias.size() != layer.weight.rows) {
      throw ShapeError("encoder layer " + std::to_string(l) +
                       " dimensions do not chain");
    }
    if (cache) cache->inputs.push_back(a);
    std::vector<double> z(layer.weight.rows);
    for (std::size_t i = 0; i < layer.weight.rows; ++i) {
      z[i] = layer.bias[i] + dot(layer.weight.row(i), a);
    }
    const bool hidden = l + 1 < enc.layers.size();
    if (hidden) {
      for (double& v : z) v = std::tanh(v);
    }
    for (double v : z) {
      if (!std::isfinite(v)) {
        throw NumericError("non-finite activation in encoder layer " +
                           std::to_string(l));
      }
    }
    if (cache) cache->post.push_back(z);
    a = std::move(z);
  }
  return a;
}

std::vector<double> encoder_backward(const MlpEncoder& enc,
                                     const EncoderCache& cache,
                                     std::span<const double> grad_embedding,
                                     MlpEncoder& grads) {
  const std::size_t num_layers = enc.layers.size();
  if (cache.inputs.size() != num_layers || cache.post.size() != num_layers) {
    throw ShapeError("encoder cache does not match architecture");
  }
  if (grads.layers.size() != num_layers) {
    throw ShapeError("gradient container does not match architecture");
  }
  if (grad_embedding.size() != enc.output_dim()) {
    throw ShapeError("grad_embedding length mismatch");
  }
  std::vector<double> dz(grad_embedding.begin(), grad_embedding.end());
  for (std::size_t l = num_layers; l-- > 0;) {
    const EncoderLayer& layer = enc.layers[l];
    const std::vector<double>& input = cache.inputs[l];
    if (input.size() != layer.weight.cols || dz.size() != layer.weight.rows) {
      throw ShapeError("encoder cache layer " + std::to_string(l) +
                       " shape mismatch");
    }
    // Hidden layers are tanh; convert d(post) to d(pre) via 1 - tanh^2.
    if (l + 1 < num_layers) {
      const std::vector<double>& h = cache.post[l];
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= 1.0 - h[i] * h[i];
    }
    EncoderLayer& g = grads.layers[l];
    for (std::size_t i = 0; i < layer.weight.rows; ++i) {
      g.bias[i] += dz[i];
      double* grow = g.weight.data.data() + i * g.weight.cols;
      for (std::size_t j = 0; j < layer.weight.cols; ++j) {
        grow[j] += dz[i] * input[j];
      }
    }
    std::vector<double> dinput(layer.weight.cols, 0.0);
    for (std::size_t i = 0; i < layer.weight.rows; ++i) {
      const double* wrow = layer.weight.data.data() + i * layer.weight.cols;
      for (std::size_t j = 0; j < layer.weight.cols; ++j) {
        dinput[j] += wrow[j] * dz[i];
      }
    }
    dz = std::move(dinput);
  }
  return dz;
}

std::vector<double> head_logits(const ClassifierHead& head,
                                std::span<const double> e, Modality m) {
  const Matrix& w = head.active(m);
  if (e.size() != w.cols) {
    throw ShapeError("embedding length " + std::to_string(e.size()) +
                     " != head dimension " + std::to_string(w.cols));
  }
  std::vector<double> logits(w.rows);
  for (std::size_t j = 0; j < w.rows; ++j) logits[j] = dot(w.row(j), e);
  return logits;
}

namespace {

Matrix init_weight(std::size_t out_dim, std::size_t in_dim,
                   const RandomSource& root, const std::string& name) {
  RandomSource rng = root.split(name);
  double a = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  Matrix w(out_dim, in_dim);
  for (double& v : w.data) v = rng.next_uniform(-a, a);
  return w;
}

MlpEncoder init_encoder(std::size_t input_dim,
                        const std::vector<std::size_t>& hidden,
                        std::size_t output_dim, const RandomSource& root,
                        const std::string& prefix) {
  MlpEncoder enc;
  std::size_t in = input_dim;
  std::vector<std::size_t> outs = hidden;
  outs.push_back(output_dim);
  for (std::size_t l = 0; l < outs.size(); ++l) {
    std::string name = prefix + ".layer" + std::to_string(l) + ".weight";
    EncoderLayer layer;
    layer.weight = init_weight(outs[l], in, root, name);
    layer.bias.assign(outs[l], 0.0);
    enc.layers.push_back(std::move(layer));
    in = outs[l];
  }
  return enc;
}

}  // namespace

ModelState init_model(const ModelSpec& spec, const RandomSource& root) {
  if (spec.num_classes < 2) {
    throw ValidationError("model needs at least 2 classes");
  }
  if (spec.face_input_dim == 0 || spec.voice_input_dim == 0 ||
      spec.embedding_dim == 0) {
    throw ValidationError("model dimensions must be positive");
  }
  ModelState m;
  m.embedding_dim = spec.embedding_dim;
  m.face_encoder = init_encoder(spec.face_input_dim, spec.hidden_widths,
                                spec.embedding_dim, root, "face_encoder");
  m.voice_encoder = init_encoder(spec.voice_input_dim, spec.hidden_widths,
                                 spec.embedding_dim, root, "voice_encoder");
  m.head.mode = spec.head_mode;
  if (spec.head_mode == HeadMode::kShared) {
    m.head.shared = init_weight(spec.num_classes, spec.embedding_dim, root,
                                "head.shared.W");
  } else {
    m.head.face = init_weight(spec.num_classes, spec.embedding_dim, root,
                              "head.separate.W_f");
    m.head.voice = init_weight(spec.num_classes, spec.embedding_dim, root,
                               "head.separate.W_v");
  }
  return m;
}

const std::string& ParamLayout::name_at(std::size_t i) const {
  for (const ParamEntry& e : entries) {
    if (i >= e.offset && i < e.offset + e.size) return e.name;
  }
  throw ValidationError("flat index out of range");
}

namespace {

template <typename Fn>
void visit_params(const ModelState& m, Fn&& fn) {
  auto visit_encoder = [&](const MlpEncoder& enc, const std::string& prefix) {
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
      const EncoderLayer& layer = enc.layers[l];
      std::string base = prefix + ".layer" + std::to_string(l);
      fn(base + ".weight", std::span<const double>(layer.weight.data),
         layer.weight.rows, layer.weight.cols);
      fn(base + ".bias", std::span<const double>(layer.bias), layer.bias.size(),
         std::size_t{0});
    }
  };
  visit_encoder(m.face_encoder, "face_encoder");
  visit_encoder(m.voice_encoder, "voice_encoder");
  if (m.head.mode == HeadMode::kShared) {
    fn("head.shared.W", std::span<const double>(m.head.shared.data),
       m.head.shared.rows, m.head.shared.cols);
  } else {
    fn("head.separate.W_f", std::span<const double>(m.head.face.data),
       m.head.face.rows, m.head.face.cols);
    fn("head.separate.W_v", std::span<const double>(m.head.voice.data),
       m.head.voice.rows, m.head.voice.cols);
  }
}

template <typename Fn>
void visit_params_mut(ModelState& m, Fn&& fn) {
  auto visit_encoder = [&](MlpEncoder& enc) {
    for (EncoderLayer& layer : enc.layers) {
      fn(std::span<double>(layer.weight.data));
      fn(std::span<double>(layer.bias));
    }
  };
  visit_encoder(m.face_encoder);
  visit_encoder(m.voice_encoder);
  if (m.head.mode == HeadMode::kShared) {
    fn(std::span<double>(m.head.shared.data));
  } else {
    fn(std::span<double>(m.head.face.data));
    fn(std::span<double>(m.head.voice.data));
  }
}

}  // namespace

ParamLayout layout_of(const ModelState& m) {
  ParamLayout layout;
  visit_params(m, [&](const std::string& name, std::span<const double> vals,
                      std::size_t rows, std::size_t cols) {
    layout.entries.push_back(
        {name, layout.total_size, vals.size(), rows, cols});
    layout.total_size += vals.size();
  });
  return layout;
}

std::vector<double> flatten_params(const ModelState& m) {
  std::vector<double> flat;
  visit_params(m, [&](const std::string&, std::span<const double> vals,
                      std::size_t, std::size_t) {
    flat.insert(flat.end(), vals.begin(), vals.end());
  });
  return flat;
}

void set_params(ModelState& m, std::span<const double> flat) {
  std::size_t pos = 0;
  visit_params_mut(m, [&](std::span<double> vals) {
    if (pos + vals.size() > flat.size()) {
      throw ShapeError("flat parameter vector too short");
    }
    std::memcpy(vals.data(), flat.data() + pos, vals.size() * sizeof(double));
    pos += vals.size();
  });
  if (pos != flat.size()) throw ShapeError("flat parameter vector too long");
}

bool same_architecture(const ModelState& a, const ModelState& b) {
  ParamLayout la = layout_of(a);
  ParamLayout lb = layout_of(b);
  if (la.entries.size() != lb.entries.size()) return false;
  for (std::size_t i = 0; i < la.entries.size(); ++i) {
    const ParamEntry& ea = la.entries[i];
    const ParamEntry& eb = lb.entries[i];
    if (ea.name != eb.name || ea.rows != eb.rows || ea.cols != eb.cols) {
      return false;
    }
  }
  return a.embedding_dim == b.embedding_dim;
}

ModelState zeros_like(const ModelState& m) {
  ModelState z = m;
  visit_params_mut(z, [](std::span<double> vals) {
    std::fill(vals.begin(), vals.end(), 0.0);
  });
  return z;
}

namespace {
constexpr std::string_view kCheckpointMagic = "XMALNCKP";
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ByteWriter payload;
  payload.u32(ckpt.epoch);
  payload.u64(ckpt.config_hash);
  payload.u64(ckpt.state.embedding_dim);
  payload.u8(static_cast<std::uint8_t>(ckpt.state.head.mode));
  ParamLayout layout = layout_of(ckpt.state);
  std::vector<double> flat = flatten_params(ckpt.state);
  payload.u32(static_cast<std::uint32_t>(layout.entries.size()));
  for (const ParamEntry& e : layout.entries) {
    payload.str(e.name);
    payload.u64(e.rows);
    payload.u64(e.cols);
    payload.f64_array(
        std::span<const double>(flat.data() + e.offset, e.size));
  }
  write_container(path, kCheckpointMagic, kCheckpointVersion, payload);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto payload = read_container(path, kCheckpointMagic, kCheckpointVersion);
  ByteReader r(payload);
  Checkpoint ckpt;
  ckpt.epoch = r.u32();
  ckpt.config_hash = r.u64();
  ckpt.state.embedding_dim = r.u64();
  std::uint8_t mode = r.u8();
  if (mode > 1) throw ChecksumError("invalid head mode in " + path.string());
  ckpt.state.head.mode = static_cast<HeadMode>(mode);

  std::uint32_t num_tensors = r.u32();
  struct Tensor {
    std::string name;
    std::size_t rows, cols;
    std::vector<double> values;
  };
  std::vector<Tensor> tensors;
  tensors.reserve(num_tensors);
  for (std::uint32_t i = 0; i < num_tensors; ++i) {
    Tensor t;
    t.name = r.str();
    t.rows = r.u64();
    t.cols = r.u64();
    std::size_t n = t.cols == 0 ? t.rows : t.rows * t.cols;
    t.values = r.f64_array(n);
    tensors.push_back(std::move(t));
  }
  if (!r.exhausted()) throw ChecksumError("trailing bytes in " + path.string());

  // Rebuild encoders from the named tensors; names follow the fixed layout.
  auto rebuild_encoder = [&](const std::string& prefix) {
    MlpEncoder enc;
    for (std::size_t l = 0;; ++l) {
      std::string wname = prefix + ".layer" + std::to_string(l) + ".weight";
      std::string bname = prefix + ".layer" + std::to_string(l) + ".bias";
      const Tensor* w = nullptr;
      const Tensor* b = nullptr;
      for (const Tensor& t : tensors) {
        if (t.name == wname) w = &t;
        if (t.name == bname) b = &t;
      }
      if (!w) break;
      if (!b) throw ChecksumError("missing bias tensor " + bname);
      EncoderLayer layer;
      layer.weight = Matrix(w->rows, w->cols);
      layer.weight.data = w->values;
      layer.bias = b->values;
      enc.layers.push_back(std::move(layer));
    }
    if (enc.layers.empty()) {
      throw ChecksumError("missing encoder tensors for " + prefix);
    }
    return enc;
  };
  ckpt.state.face_encoder = rebuild_encoder("face_encoder");
  ckpt.state.voice_encoder = rebuild_encoder("voice_encoder");

  auto find_matrix = [&](const std::string& name) {
    for (const Tensor& t : tensors) {
      if (t.name == name) {
        Matrix m(t.rows, t.cols);
        m.data = t.values;
        return m;
      }
    }
    throw ChecksumError("missing tensor " + name);
  };
  if (ckpt.state.head.mode == HeadMode::kShared) {
    ckpt.state.head.shared = find_matrix("head.shared.W");
  } else {
    ckpt.state.head.face = find_matrix("head.separate.W_f");
    ckpt.state.head.voice = find_matrix("head.separate.W_v");
  }
  return ckpt;
}

}  // namespace xmalign
