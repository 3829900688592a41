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

#ifndef TOPOPLAN_IO_HPP_
#define TOPOPLAN_IO_HPP_

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "topoplan/aux_graph.hpp"
#include "topoplan/graph.hpp"
#include "topoplan/layout.hpp"
#include "topoplan/validation.hpp"

namespace topoplan {

using Json = nlohmann::json;

inline constexpr const char* kGraphSchema = "topoplan-graph/v1";
inline constexpr const char* kTopologySchema = "topoplan-topology/v1";
inline constexpr double kGigabyte = 1e9;  // 1 GB = 10^9 bytes throughout

namespace detail {

inline void require_schema(const Json& doc, const std::string& expected) {
  if (!doc.is_object() || !doc.contains("schema") ||
      doc["schema"].get<std::string>() != expected) {
    throw Error("document schema is not '" + expected + "'");
  }
}

inline TensorSpec tensor_from_json(const Json& j) {
  TensorSpec t;
  t.name = j.at("name").get<std::string>();
  t.shape = j.at("shape").get<std::vector<std::int64_t>>();
  t.element_size = j.value("element_size", 4);
  return t;
}

inline Json tensor_to_json(const TensorSpec& t) {
  return Json{{"name", t.name}, {"shape", t.shape},
              {"element_size", t.element_size}};
}

// Standard MatMul axes for operators that omit the axes list: inputs are
// (b, in) and (in, out), the output is (b, out).
inline std::vector<OperatorAxis> default_matmul_axes(const OperatorNode& op) {
  if (op.inputs.size() != 2 || op.outputs.size() != 1 ||
      op.inputs[0].rank() != 2 || op.inputs[1].rank() != 2 ||
      op.outputs[0].rank() != 2) {
    throw Error("operator '" + op.id +
                "' omits axes but is not a standard 2-input matmul");
  }
  const std::string& x = op.inputs[0].name;
  const std::string& w = op.inputs[1].name;
  const std::string& y = op.outputs[0].name;
  return {
      {"b", {{x, 0}, {y, 0}}},
      {"in", {{x, 1}, {w, 0}}},
      {"out", {{w, 1}, {y, 1}}},
  };
}

}  // namespace detail

inline ComputationGraph graph_from_json(const Json& doc) {
  detail::require_schema(doc, kGraphSchema);
  ComputationGraph graph;
  for (const Json& j : doc.at("operators")) {
    OperatorNode op;
    op.id = j.at("id").get<std::string>();
    op.kind = op_kind_from_string(j.value("kind", std::string("other")));
    for (const Json& t : j.at("inputs")) {
      op.inputs.push_back(detail::tensor_from_json(t));
    }
    for (const Json& t : j.at("outputs")) {
      op.outputs.push_back(detail::tensor_from_json(t));
    }
    if (j.contains("axes")) {
      for (const Json& a : j["axes"]) {
        OperatorAxis axis;
        axis.name = a.at("name").get<std::string>();
        for (const Json& s : a.at("slices")) {
          axis.slices.push_back(
              {s.at("tensor").get<std::string>(), s.at("dim").get<int>()});
        }
        op.axes.push_back(std::move(axis));
      }
    } else if (op.kind == OpKind::kMatMul) {
      op.axes = detail::default_matmul_axes(op);
    } else {
      throw Error("operator '" + op.id +
                  "' must declare partitionable axes explicitly");
    }
    graph.operators.push_back(std::move(op));
  }
  for (const Json& j : doc.at("edges")) {
    graph.edges.push_back({j.at("from").get<std::string>(),
                           j.at("to").get<std::string>(),
                           j.at("tensor").get<std::string>()});
  }
  return graph;
}

inline Json graph_to_json(const ComputationGraph& graph) {
  Json ops = Json::array();
  for (const OperatorNode& op : graph.operators) {
    Json j;
    j["id"] = op.id;
    j["kind"] = to_string(op.kind);
    Json inputs = Json::array();
    for (const auto& t : op.inputs) inputs.push_back(detail::tensor_to_json(t));
    Json outputs = Json::array();
    for (const auto& t : op.outputs) outputs.push_back(detail::tensor_to_json(t));
    j["inputs"] = std::move(inputs);
    j["outputs"] = std::move(outputs);
    Json axes = Json::array();
    for (const auto& axis : op.axes) {
      Json a;
      a["name"] = axis.name;
      Json slices = Json::array();
      for (const auto& s : axis.slices) {
        slices.push_back(Json{{"tensor", s.tensor}, {"dim", s.dim}});
      }
      a["slices"] = std::move(slices);
      axes.push_back(std::move(a));
    }
    j["axes"] = std::move(axes);
    ops.push_back(std::move(j));
  }
  Json edges = Json::array();
  for (const GraphEdge& e : graph.edges) {
    edges.push_back(Json{{"from", e.from}, {"to", e.to}, {"tensor", e.tensor}});
  }
  return Json{{"schema", kGraphSchema},
              {"operators", std::move(ops)},
              {"edges", std::move(edges)}};
}

inline ClusterTopology topology_from_json(const Json& doc) {
  detail::require_schema(doc, kTopologySchema);
  ClusterTopology topo;
  topo.node_count = doc.at("node_count").get<int>();
  topo.local_device_num = doc.at("local_device_num").get<int>();
  topo.intra_bandwidth =
      doc.at("intra_bandwidth_gbps").get<double>() * kGigabyte;
  topo.inter_bandwidth =
      doc.at("inter_bandwidth_gbps").get<double>() * kGigabyte;
  topo.device_memory = doc.at("device_memory_gb").get<double>() * kGigabyte;
  return topo;
}

inline Json topology_to_json(const ClusterTopology& topo) {
  return Json{{"schema", kTopologySchema},
              {"node_count", topo.node_count},
              {"local_device_num", topo.local_device_num},
              {"intra_bandwidth_gbps", topo.intra_bandwidth / kGigabyte},
              {"inter_bandwidth_gbps", topo.inter_bandwidth / kGigabyte},
              {"device_memory_gb", topo.device_memory / kGigabyte}};
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  Json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw Error("cannot parse '" + path + "': " + e.what());
  }
  return doc;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

inline Json strategy_to_json(const OperatorNode& op,
                             const OperatorStrategy& strategy) {
  Json axes = Json::array();
  for (const auto& a : op.axes) axes.push_back(a.name);
  return Json{{"op", op.id},
              {"axes", axes},
              {"degrees", strategy.degrees},
              {"device_map", strategy.device_map},
              {"device_matrix", strategy.device_matrix.dims},
              {"display_matrix", strategy.display_matrix()}};
}

// Debug dump of the full priced auxiliary graph, consumed by the brute-force
// oracle and by inspection tooling.
inline Json aux_graph_to_json(const AuxiliaryGraph& aux) {
  Json nodes = Json::array();
  for (const AuxNode& node : aux.nodes) {
    const OperatorNode& op = aux.graph.operators[node.op_index];
    Json j = strategy_to_json(op, node.strategy);
    j["intra_cost_seconds"] = node.intra_cost_s;
    j["intra_volume_bytes"] = node.intra_volume_bytes;
    j["memory_bytes"] = node.memory_bytes;
    nodes.push_back(std::move(j));
  }
  Json edges = Json::array();
  for (const AuxEdge& e : aux.edges) {
    edges.push_back(Json{{"edge", e.original_edge},
                         {"from_node", e.from_node},
                         {"to_node", e.to_node},
                         {"cost_seconds", e.cost_s},
                         {"volume_bytes", e.volume_bytes},
                         {"memory_bytes", e.memory_bytes}});
  }
  Json virtuals = Json::array();
  for (const VirtualEdge& e : aux.virtual_edges) {
    virtuals.push_back(Json{{"op", aux.graph.operators[e.op_index].id},
                            {"to_node", e.to_node},
                            {"cost_seconds", e.cost_s},
                            {"volume_bytes", e.volume_bytes},
                            {"memory_bytes", e.memory_bytes}});
  }
  return Json{{"schema", "topoplan-auxgraph/v1"},
              {"nodes", std::move(nodes)},
              {"edges", std::move(edges)},
              {"virtual_edges", std::move(virtuals)}};
}

}  // namespace topoplan

#endif  // TOPOPLAN_IO_HPP_
