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

#include "topoplan/io.hpp"

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "topoplan/models.hpp"

namespace topoplan {
namespace {

TEST(GraphJson, RoundTripPreservesEverything) {
  const ComputationGraph original =
      build_graph(parse_model_spec("transformer-layer:hidden=128,seq=64"));
  const Json doc = graph_to_json(original);
  const ComputationGraph parsed = graph_from_json(doc);
  EXPECT_EQ(graph_to_json(parsed).dump(), doc.dump());
  EXPECT_EQ(parsed.operators.size(), original.operators.size());
  EXPECT_EQ(parsed.edges.size(), original.edges.size());
}

TEST(GraphJson, MatMulAxesMayBeOmitted) {
  const Json doc = {
      {"schema", kGraphSchema},
      {"operators",
       Json::array({Json{
           {"id", "fc"},
           {"kind", "matmul"},
           {"inputs", Json::array({Json{{"name", "x"}, {"shape", {8, 16}}},
                                   Json{{"name", "w"}, {"shape", {16, 32}}}})},
           {"outputs", Json::array({Json{{"name", "y"}, {"shape", {8, 32}}}})},
       }})},
      {"edges", Json::array()},
  };
  const ComputationGraph graph = graph_from_json(doc);
  ASSERT_EQ(graph.operators[0].axes.size(), 3u);
  EXPECT_EQ(graph.operators[0].axes[0].name, "b");
  EXPECT_EQ(graph.operators[0].axes[1].name, "in");
  EXPECT_EQ(graph.operators[0].axes[2].name, "out");
  EXPECT_TRUE(validate_graph(graph).empty());
}

TEST(GraphJson, NonMatMulMustDeclareAxes) {
  const Json doc = {
      {"schema", kGraphSchema},
      {"operators",
       Json::array({Json{
           {"id", "act"},
           {"kind", "elementwise"},
           {"inputs", Json::array({Json{{"name", "x"}, {"shape", {8, 16}}}})},
           {"outputs", Json::array({Json{{"name", "y"}, {"shape", {8, 16}}}})},
       }})},
      {"edges", Json::array()},
  };
  EXPECT_THROW(graph_from_json(doc), Error);
}

TEST(GraphJson, WrongSchemaRejected) {
  EXPECT_THROW(graph_from_json(Json{{"schema", "something/v9"}}), Error);
  EXPECT_THROW(graph_from_json(Json::array()), Error);
}

TEST(TopologyJson, RoundTripAndUnits) {
  const Json doc = {{"schema", kTopologySchema},
                    {"node_count", 2},
                    {"local_device_num", 8},
                    {"intra_bandwidth_gbps", 60},
                    {"inter_bandwidth_gbps", 6},
                    {"device_memory_gb", 32}};
  const ClusterTopology topo = topology_from_json(doc);
  EXPECT_EQ(topo.node_count, 2);
  EXPECT_EQ(topo.local_device_num, 8);
  EXPECT_DOUBLE_EQ(topo.intra_bandwidth, 60e9);  // 1 GB = 1e9 bytes
  EXPECT_DOUBLE_EQ(topo.inter_bandwidth, 6e9);
  EXPECT_DOUBLE_EQ(topo.device_memory, 32e9);
  EXPECT_EQ(topology_to_json(topo)["intra_bandwidth_gbps"], 60);
}

TEST(TopologyJson, MissingFieldRejected) {
  Json doc = {{"schema", kTopologySchema}, {"node_count", 2}};
  EXPECT_THROW(topology_from_json(doc), Json::exception);
}

TEST(AuxDump, ContainsNodesAndEdges) {
  ComputationGraph graph;
  graph.operators.push_back(testing::matmul_op("fc1", 16, 16, 16, "x0", "x1"));
  graph.operators.push_back(testing::matmul_op("fc2", 16, 16, 16, "x1", "x2"));
  graph.edges.push_back({"fc1", "fc2", "x1"});
  const ClusterTopology topo{2, 2, 60e9, 6e9, 32e9};
  const Json dump = aux_graph_to_json(build_auxiliary_graph(graph, topo));
  EXPECT_EQ(dump["schema"], "topoplan-auxgraph/v1");
  EXPECT_EQ(dump["nodes"].size(), 18u);
  EXPECT_EQ(dump["edges"].size(), 81u);
  EXPECT_EQ(dump["virtual_edges"].size(), 9u);
  EXPECT_TRUE(dump["edges"][0].contains("cost_seconds"));
  EXPECT_TRUE(dump["edges"][0].contains("volume_bytes"));
  EXPECT_TRUE(dump["edges"][0].contains("memory_bytes"));
}

TEST(Files, SampleDocumentsParse) {
  const ComputationGraph graph =
      graph_from_json(load_json_file("data/sample_graph.json"));
  EXPECT_TRUE(validate_graph(graph).empty());
  const ClusterTopology topo =
      topology_from_json(load_json_file("data/sample_topology.json"));
  EXPECT_TRUE(validate_topology(topo).ok());
}

TEST(Files, MissingFileThrows) {
  EXPECT_THROW(load_json_file("data/no_such_file.json"), Error);
}

}  // namespace
}  // namespace topoplan
