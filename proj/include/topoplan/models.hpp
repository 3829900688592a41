/* Copyright 2026 The Topoplan Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef TOPOPLAN_MODELS_HPP_
#define TOPOPLAN_MODELS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "topoplan/graph.hpp"
#include "topoplan/validation.hpp"

namespace topoplan {

enum class ModelFamily { kMlpChain, kTransformerLayer, kAlexnetLike };

inline const char* to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::kMlpChain: return "mlp-chain";
    case ModelFamily::kTransformerLayer: return "transformer-layer";
    case ModelFamily::kAlexnetLike: return "alexnet-like";
  }
  return "?";
}

struct ModelConfig {
  ModelFamily family = ModelFamily::kMlpChain;
  std::int64_t hidden = 1024;
  std::int64_t layers = 2;
  std::int64_t batch = 64;
  std::int64_t seq = 512;
};

namespace detail {

inline OperatorAxis axis(std::string name, std::vector<AxisSlice> slices) {
  OperatorAxis a;
  a.name = std::move(name);
  a.slices = std::move(slices);
  return a;
}

inline TensorSpec tensor(std::string name, std::vector<std::int64_t> shape) {
  TensorSpec t;
  t.name = std::move(name);
  t.shape = std::move(shape);
  return t;
}

// A matmul-style node: activation (rows, in) times weight (in, out). Conv
// layers reuse this shape with the kernel window folded into the channel
// dimension.
inline OperatorNode dense_op(const std::string& id, OpKind kind,
                             const std::string& in_name, std::int64_t rows,
                             std::int64_t in, std::int64_t out,
                             const std::string& out_name,
                             std::int64_t out_rows = -1,
                             std::int64_t out_cols = -1) {
  if (out_rows < 0) out_rows = rows;
  if (out_cols < 0) out_cols = out;
  OperatorNode op;
  op.id = id;
  op.kind = kind;
  op.inputs = {tensor(in_name, {rows, in}), tensor(id + ".w", {in, out})};
  op.outputs = {tensor(out_name, {out_rows, out_cols})};
  op.axes = {
      axis("b", {{in_name, 0}, {out_name, 0}}),
      axis("in", {{in_name, 1}, {id + ".w", 0}}),
      axis("out", {{id + ".w", 1}, {out_name, 1}}),
  };
  return op;
}

// Elementwise node over a 2-D activation; one axis per dimension.
inline OperatorNode pointwise_op(const std::string& id,
                                 const std::string& in_name,
                                 const std::string& out_name, std::int64_t rows,
                                 std::int64_t cols) {
  OperatorNode op;
  op.id = id;
  op.kind = OpKind::kElementwise;
  op.inputs = {tensor(in_name, {rows, cols})};
  op.outputs = {tensor(out_name, {rows, cols})};
  op.axes = {
      axis("d0", {{in_name, 0}, {out_name, 0}}),
      axis("d1", {{in_name, 1}, {out_name, 1}}),
  };
  return op;
}

}  // namespace detail

inline ComputationGraph build_mlp_chain(const ModelConfig& cfg) {
  ComputationGraph graph;
  for (std::int64_t l = 0; l < cfg.layers; ++l) {
    const std::string in_name = "act" + std::to_string(l);
    const std::string out_name = "act" + std::to_string(l + 1);
    graph.operators.push_back(detail::dense_op("fc" + std::to_string(l + 1),
                                               OpKind::kMatMul, in_name,
                                               cfg.batch, cfg.hidden,
                                               cfg.hidden, out_name));
    if (l > 0) {
      graph.edges.push_back({"fc" + std::to_string(l),
                             "fc" + std::to_string(l + 1), in_name});
    }
  }
  return graph;
}

// One pre-norm transformer layer with separate Q/K/V projections, the
// head-parallel attention core, residual adds, and the two MLP projections.
inline ComputationGraph build_transformer_layer(const ModelConfig& cfg) {
  const std::int64_t h = cfg.hidden;
  const std::int64_t rows = cfg.batch * cfg.seq;
  ComputationGraph graph;
  auto& ops = graph.operators;

  ops.push_back(detail::pointwise_op("ln1", "x", "ln1_out", rows, h));
  ops.push_back(detail::dense_op("q_proj", OpKind::kMatMul, "ln1_out", rows, h,
                                 h, "q_out"));
  ops.push_back(detail::dense_op("k_proj", OpKind::kMatMul, "ln1_out", rows, h,
                                 h, "k_out"));
  ops.push_back(detail::dense_op("v_proj", OpKind::kMatMul, "ln1_out", rows, h,
                                 h, "v_out"));

  OperatorNode attn;
  attn.id = "attn";
  attn.kind = OpKind::kOther;
  attn.inputs = {detail::tensor("q_out", {rows, h}),
                 detail::tensor("k_out", {rows, h}),
                 detail::tensor("v_out", {rows, h})};
  attn.outputs = {detail::tensor("attn_out", {rows, h})};
  attn.axes = {
      detail::axis("b", {{"q_out", 0}, {"k_out", 0}, {"v_out", 0}, {"attn_out", 0}}),
      detail::axis("heads", {{"q_out", 1}, {"k_out", 1}, {"v_out", 1}, {"attn_out", 1}}),
  };
  ops.push_back(std::move(attn));

  ops.push_back(detail::dense_op("out_proj", OpKind::kMatMul, "attn_out", rows,
                                 h, h, "proj_out"));

  OperatorNode add1;
  add1.id = "add1";
  add1.kind = OpKind::kElementwise;
  add1.inputs = {detail::tensor("proj_out", {rows, h}),
                 detail::tensor("ln1_out", {rows, h})};
  add1.outputs = {detail::tensor("add1_out", {rows, h})};
  add1.axes = {
      detail::axis("d0", {{"proj_out", 0}, {"ln1_out", 0}, {"add1_out", 0}}),
      detail::axis("d1", {{"proj_out", 1}, {"ln1_out", 1}, {"add1_out", 1}}),
  };
  ops.push_back(std::move(add1));

  ops.push_back(detail::pointwise_op("ln2", "add1_out", "ln2_out", rows, h));
  ops.push_back(detail::dense_op("mlp_fc", OpKind::kMatMul, "ln2_out", rows, h,
                                 4 * h, "fc_out"));
  ops.push_back(detail::pointwise_op("gelu", "fc_out", "gelu_out", rows, 4 * h));
  ops.push_back(detail::dense_op("mlp_proj", OpKind::kMatMul, "gelu_out", rows,
                                 4 * h, h, "mlp_out"));

  OperatorNode add2;
  add2.id = "add2";
  add2.kind = OpKind::kElementwise;
  add2.inputs = {detail::tensor("mlp_out", {rows, h}),
                 detail::tensor("add1_out", {rows, h})};
  add2.outputs = {detail::tensor("add2_out", {rows, h})};
  add2.axes = {
      detail::axis("d0", {{"mlp_out", 0}, {"add1_out", 0}, {"add2_out", 0}}),
      detail::axis("d1", {{"mlp_out", 1}, {"add1_out", 1}, {"add2_out", 1}}),
  };
  ops.push_back(std::move(add2));

  graph.edges = {
      {"ln1", "q_proj", "ln1_out"},   {"ln1", "k_proj", "ln1_out"},
      {"ln1", "v_proj", "ln1_out"},   {"q_proj", "attn", "q_out"},
      {"k_proj", "attn", "k_out"},    {"v_proj", "attn", "v_out"},
      {"attn", "out_proj", "attn_out"}, {"out_proj", "add1", "proj_out"},
      {"ln1", "add1", "ln1_out"},     {"add1", "ln2", "add1_out"},
      {"ln2", "mlp_fc", "ln2_out"},   {"mlp_fc", "gelu", "fc_out"},
      {"gelu", "mlp_proj", "gelu_out"}, {"mlp_proj", "add2", "mlp_out"},
      {"add1", "add2", "add1_out"},
  };
  return graph;
}

// Five convolutions plus three fully connected layers. Convolutions fold the
// kernel window into the channel-in dimension (im2col view) and fuse the
// pool/im2col reshape of the following layer into their output spec, so the
// graph stays a pure dense chain. Channel-in of conv1 and the classifier
// width are padded to the next multiple of 64 to keep every extent divisible
// at up to 64 devices.
inline ComputationGraph build_alexnet_like(const ModelConfig& cfg) {
  const std::int64_t b = cfg.batch;
  struct Layer {
    const char* id;
    OpKind kind;
    std::int64_t rows;  // im2col rows: batch * output spatial positions
    std::int64_t in;    // channel-in * kernel window
    std::int64_t out;
  };
  // 227x227 input: conv spatial maps 55->27->13->13->13, pooled to 6x6.
  const std::vector<Layer> layers = {
      {"conv1", OpKind::kConv, b * 55 * 55, 384, 64},     // 3*11*11 -> 384
      {"conv2", OpKind::kConv, b * 27 * 27, 64 * 25, 192},
      {"conv3", OpKind::kConv, b * 13 * 13, 192 * 9, 384},
      {"conv4", OpKind::kConv, b * 13 * 13, 384 * 9, 256},
      {"conv5", OpKind::kConv, b * 13 * 13, 256 * 9, 256},
      {"fc6", OpKind::kMatMul, b, 256 * 36, 4096},
      {"fc7", OpKind::kMatMul, b, 4096, 4096},
      {"fc8", OpKind::kMatMul, b, 4096, 1024},             // 1000 -> 1024
  };
  ComputationGraph graph;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    const std::string in_name = "act" + std::to_string(i);
    const std::string out_name = "act" + std::to_string(i + 1);
    std::int64_t out_rows = -1;
    std::int64_t out_cols = -1;
    if (i + 1 < layers.size()) {
      out_rows = layers[i + 1].rows;
      out_cols = layers[i + 1].in;
    }
    graph.operators.push_back(detail::dense_op(layer.id, layer.kind, in_name,
                                               layer.rows, layer.in, layer.out,
                                               out_name, out_rows, out_cols));
    if (i > 0) {
      graph.edges.push_back({layers[i - 1].id, layer.id, in_name});
    }
  }
  return graph;
}

inline ComputationGraph build_graph(const ModelConfig& cfg) {
  if (cfg.hidden < 1 || cfg.layers < 1 || cfg.batch < 1 || cfg.seq < 1) {
    throw Error("model config sizes must be positive");
  }
  switch (cfg.family) {
    case ModelFamily::kMlpChain: return build_mlp_chain(cfg);
    case ModelFamily::kTransformerLayer: return build_transformer_layer(cfg);
    case ModelFamily::kAlexnetLike: return build_alexnet_like(cfg);
  }
  throw Error("unknown model family");
}

// Parses "family:key=value,key=value" specs, e.g.
// "mlp-chain:layers=2,hidden=8,batch=4" or "alexnet-like:batch=64".
inline ModelConfig parse_model_spec(const std::string& spec) {
  ModelConfig cfg;
  std::string family = spec;
  std::string params;
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    family = spec.substr(0, colon);
    params = spec.substr(colon + 1);
  }
  if (family == "mlp-chain") {
    cfg.family = ModelFamily::kMlpChain;
    cfg.hidden = 1024;
    cfg.layers = 2;
    cfg.batch = 256;
  } else if (family == "transformer-layer") {
    cfg.family = ModelFamily::kTransformerLayer;
    cfg.hidden = 2304;
    cfg.batch = 8;
    cfg.seq = 512;
  } else if (family == "alexnet-like") {
    cfg.family = ModelFamily::kAlexnetLike;
    cfg.batch = 64;
  } else {
    throw Error("unknown model family '" + family + "'");
  }
  std::size_t pos = 0;
  while (pos < params.size()) {
    auto comma = params.find(',', pos);
    if (comma == std::string::npos) comma = params.size();
    const std::string kv = params.substr(pos, comma - pos);
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw Error("bad model parameter '" + kv + "' (expected key=value)");
    }
    const std::string key = kv.substr(0, eq);
    const std::int64_t value = std::stoll(kv.substr(eq + 1));
    if (key == "hidden") cfg.hidden = value;
    else if (key == "layers") cfg.layers = value;
    else if (key == "batch") cfg.batch = value;
    else if (key == "seq") cfg.seq = value;
    else throw Error("unknown model parameter '" + key + "'");
    pos = comma + 1;
  }
  return cfg;
}

}  // namespace topoplan

#endif  // TOPOPLAN_MODELS_HPP_
