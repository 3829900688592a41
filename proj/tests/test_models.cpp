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

#include "topoplan/models.hpp"

#include <set>

#include <gtest/gtest.h>

#include "topoplan/io.hpp"
#include "topoplan/layout.hpp"

namespace topoplan {
namespace {

// Weight parameters of a graph: elements of inputs no edge feeds, excluding
// the first operator's activation input.
std::int64_t weight_elements(const ComputationGraph& graph) {
  std::int64_t total = 0;
  for (const auto& op : graph.operators) {
    for (const auto& t : op.inputs) {
      if (t.name.find(".w") == std::string::npos) continue;
      total += t.elements();
    }
  }
  return total;
}

TEST(MlpChain, TwoLayerStructure) {
  ModelConfig cfg;
  cfg.family = ModelFamily::kMlpChain;
  cfg.layers = 2;
  cfg.hidden = 8;
  cfg.batch = 8;
  const ComputationGraph graph = build_graph(cfg);
  ASSERT_EQ(graph.operators.size(), 2u);
  EXPECT_EQ(graph.operators[0].kind, OpKind::kMatMul);
  EXPECT_EQ(graph.operators[1].kind, OpKind::kMatMul);
  ASSERT_EQ(graph.edges.size(), 1u);
  EXPECT_EQ(graph.edges[0].from, "fc1");
  EXPECT_EQ(graph.edges[0].to, "fc2");
  EXPECT_TRUE(validate_graph(graph).empty());
}

TEST(TransformerLayer, MegatronWeightShapes) {
  ModelConfig cfg;
  cfg.family = ModelFamily::kTransformerLayer;
  cfg.hidden = 2304;  // the 1.7B configuration
  cfg.batch = 8;
  cfg.seq = 512;
  const ComputationGraph graph = build_graph(cfg);
  EXPECT_TRUE(validate_graph(graph).empty());

  std::set<std::vector<std::int64_t>> weight_shapes;
  for (const auto& op : graph.operators) {
    for (const auto& t : op.inputs) {
      if (t.name.find(".w") != std::string::npos) {
        weight_shapes.insert(t.shape);
      }
    }
  }
  const std::int64_t h = cfg.hidden;
  EXPECT_TRUE(weight_shapes.count({h, h}));       // q/k/v and out projections
  EXPECT_TRUE(weight_shapes.count({h, 4 * h}));   // mlp up
  EXPECT_TRUE(weight_shapes.count({4 * h, h}));   // mlp down

  // Parameter count: within 5% of 12 h^2 (exactly equal here).
  const double params = static_cast<double>(weight_elements(graph));
  const double reference = 12.0 * h * h;
  EXPECT_NEAR(params / reference, 1.0, 0.05);
}

TEST(TransformerLayer, HasAttentionAndMlpMatMuls) {
  ModelConfig cfg;
  cfg.family = ModelFamily::kTransformerLayer;
  cfg.hidden = 64;
  cfg.batch = 4;
  cfg.seq = 16;
  const ComputationGraph graph = build_graph(cfg);
  int matmuls = 0;
  for (const auto& op : graph.operators) matmuls += (op.kind == OpKind::kMatMul);
  EXPECT_EQ(matmuls, 6);  // q, k, v, out, mlp up, mlp down
  EXPECT_GE(graph.operators.size(), 10u);
}

TEST(AlexnetLike, FiveConvThreeFc) {
  ModelConfig cfg;
  cfg.family = ModelFamily::kAlexnetLike;
  cfg.batch = 64;
  const ComputationGraph graph = build_graph(cfg);
  EXPECT_TRUE(validate_graph(graph).empty());
  int convs = 0, fcs = 0;
  for (const auto& op : graph.operators) {
    convs += (op.kind == OpKind::kConv);
    fcs += (op.kind == OpKind::kMatMul);
  }
  EXPECT_EQ(convs, 5);
  EXPECT_EQ(fcs, 3);

  // Roughly the classic 61M parameters (padded channels land within 10%).
  const double params = static_cast<double>(weight_elements(graph));
  EXPECT_NEAR(params / 61.0e6, 1.0, 0.10);
}

// Every extent an axis slices must stay divisible at up to 64 devices.
TEST(Builders, ShapesDivisibleAtSixtyFourDevices) {
  for (ModelFamily family : {ModelFamily::kMlpChain,
                             ModelFamily::kTransformerLayer,
                             ModelFamily::kAlexnetLike}) {
    ModelConfig cfg = parse_model_spec(to_string(family));
    const ComputationGraph graph = build_graph(cfg);
    for (const auto& op : graph.operators) {
      for (const auto& strategy : enumerate_strategies(op, 64)) {
        EXPECT_NO_THROW(derive_tensor_layouts(op, strategy))
            << to_string(family) << " op " << op.id << " strategy "
            << strategy.to_string();
      }
    }
  }
}

TEST(Builders, DeterministicDocuments) {
  for (const char* spec : {"mlp-chain", "transformer-layer:hidden=128,seq=64",
                           "alexnet-like:batch=64"}) {
    const ModelConfig cfg = parse_model_spec(spec);
    const std::string a = graph_to_json(build_graph(cfg)).dump(2);
    const std::string b = graph_to_json(build_graph(cfg)).dump(2);
    EXPECT_EQ(a, b) << spec;
  }
}

TEST(ParseModelSpec, FamiliesAndParameters) {
  const ModelConfig mlp = parse_model_spec("mlp-chain:layers=3,hidden=64,batch=32");
  EXPECT_EQ(mlp.family, ModelFamily::kMlpChain);
  EXPECT_EQ(mlp.layers, 3);
  EXPECT_EQ(mlp.hidden, 64);
  EXPECT_EQ(mlp.batch, 32);

  const ModelConfig tl = parse_model_spec("transformer-layer");
  EXPECT_EQ(tl.family, ModelFamily::kTransformerLayer);
  EXPECT_EQ(tl.hidden, 2304);

  EXPECT_THROW(parse_model_spec("resnet"), Error);
  EXPECT_THROW(parse_model_spec("mlp-chain:depth=3"), Error);
  EXPECT_THROW(parse_model_spec("mlp-chain:layers"), Error);
}

}  // namespace
}  // namespace topoplan
