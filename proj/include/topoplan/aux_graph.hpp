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

#ifndef TOPOPLAN_AUX_GRAPH_HPP_
#define TOPOPLAN_AUX_GRAPH_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "topoplan/cost_model.hpp"
#include "topoplan/graph.hpp"
#include "topoplan/layout.hpp"
#include "topoplan/redistribution.hpp"

namespace topoplan {

// Volume-based pricing uses raw communication bytes as the edge weight; the
// topology-aware mode divides volumes by the effective bandwidth of each
// collective.
enum class CostMode { kVolume, kTopology };

inline const char* to_string(CostMode mode) {
  return mode == CostMode::kVolume ? "volume" : "topology";
}

// One (operator, strategy) vertex of the auxiliary graph.
struct AuxNode {
  int op_index = -1;
  int strategy_index = -1;
  OperatorStrategy strategy;
  std::map<std::string, TensorLayout> layouts;
  double intra_cost_s = 0;        // topology-aware seconds
  double intra_volume_bytes = 0;  // raw bytes
  double memory_bytes = 0;        // per-device weight + output shards
};

struct AuxEdge {
  int original_edge = -1;
  int from_node = -1;
  int to_node = -1;
  double cost_s = 0;        // intra(w_a) + topology-priced redistribution
  double volume_bytes = 0;  // intra volume(w_a) + redistribution volume
  double memory_bytes = 0;  // node memory of w_a / in_degree(w)
};

// Source operators have no in-edges, so their intra cost rides on a virtual
// input edge with zero redistribution cost; the solver folds these onto the
// strategy selection variables.
struct VirtualEdge {
  int op_index = -1;
  int to_node = -1;
  double cost_s = 0;
  double volume_bytes = 0;
  double memory_bytes = 0;
};

struct AuxiliaryGraph {
  ComputationGraph graph;
  ClusterTopology topo;
  CostMode default_mode = CostMode::kTopology;

  std::vector<AuxNode> nodes;
  std::vector<std::vector<int>> nodes_of_op;  // op index -> aux node ids
  std::vector<AuxEdge> edges;
  std::vector<VirtualEdge> virtual_edges;
  std::vector<int> virtual_edge_of_node;  // aux node id -> virtual edge or -1

  std::vector<int> topo_order;     // operator indices
  std::vector<int> edge_base;      // original edge -> first aux edge id
  std::vector<int> in_degree_of;   // per op
  std::vector<int> out_degree_of;  // per op

  int strategies_of(int op_index) const {
    return static_cast<int>(nodes_of_op[op_index].size());
  }

  // Aux edge id for original edge `e` with the given strategy choices.
  int edge_id(int e, int u_strategy, int w_strategy) const {
    const int u = graph.find_op(graph.edges[e].from);
    (void)u;
    const int w = graph.find_op(graph.edges[e].to);
    return edge_base[e] + u_strategy * strategies_of(w) + w_strategy;
  }

  double edge_weight_by_mode(const AuxEdge& edge, CostMode mode) const {
    return mode == CostMode::kVolume ? edge.volume_bytes : edge.cost_s;
  }

  double virtual_weight_by_mode(const VirtualEdge& edge, CostMode mode) const {
    return mode == CostMode::kVolume ? edge.volume_bytes : edge.cost_s;
  }
};

namespace detail {

// Partial sums of a tensor are reduced over every axis that slices some
// tensor of the operator but not this one; for a MatMul that yields the
// delta-W/Y/E_X AllReduce triple. Fully sliced tensors (elementwise ops)
// need no reduction.
struct IntraCost {
  double seconds = 0;
  double volume_bytes = 0;
};

inline IntraCost intra_operator_cost(const OperatorNode& op,
                                     const OperatorStrategy& strategy,
                                     const std::map<std::string, TensorLayout>& layouts,
                                     const BandwidthEnv& env) {
  IntraCost result;
  auto visit_tensor = [&](const TensorSpec& spec) {
    std::int64_t group = 1;
    for (int a = 0; a < op.axis_count(); ++a) {
      bool slices_this = false;
      for (const auto& s : op.axes[a].slices) {
        if (s.tensor == spec.name) {
          slices_this = true;
          break;
        }
      }
      if (!slices_this) group *= strategy.degrees[a];
    }
    if (group <= 1) return;
    const TensorLayout& layout = layouts.at(spec.name);
    CollectiveCall call{CollectiveKind::kAllReduce, group, layout.shard_bytes(),
                        layout.matrix, layout.map, -1};
    result.volume_bytes += allreduce_volume(group, layout.shard_bytes());
    result.seconds += collective_cost(call, env);
  };
  for (const auto& t : op.inputs) visit_tensor(t);
  for (const auto& t : op.outputs) visit_tensor(t);
  return result;
}

// Inputs that no graph edge feeds are resident parameters; they and the
// outputs make up the per-device footprint attributed to a strategy.
inline double node_memory_bytes(const ComputationGraph& graph,
                                const OperatorNode& op,
                                const std::map<std::string, TensorLayout>& layouts) {
  double bytes = 0;
  for (const auto& t : op.inputs) {
    bool fed = false;
    for (const auto& e : graph.edges) {
      if (e.to == op.id && e.tensor == t.name) {
        fed = true;
        break;
      }
    }
    if (!fed) bytes += layouts.at(t.name).shard_bytes();
  }
  for (const auto& t : op.outputs) bytes += layouts.at(t.name).shard_bytes();
  return bytes;
}

struct RedistWeight {
  double seconds = 0;
  double volume_bytes = 0;
};

}  // namespace detail

struct EdgeWeight {
  double cost_s = 0;
  double volume_bytes = 0;
  double memory_bytes = 0;
};

// Weight of one auxiliary edge: intra-operator cost of the consumer strategy
// plus the redistribution cost of moving the edge tensor between layouts.
inline EdgeWeight edge_weight(const ComputationGraph& graph, int original_edge,
                              const AuxNode& u_a, const AuxNode& w_a,
                              const ClusterTopology& topo) {
  const GraphEdge& e = graph.edges[original_edge];
  const int w = graph.find_op(e.to);
  const BandwidthEnv env = bandwidth_env(topo);

  const TensorLayout& from = u_a.layouts.at(e.tensor);
  const TensorLayout& to = w_a.layouts.at(e.tensor);
  const double tensor_bytes = from.spec.bytes();

  EdgeWeight weight;
  weight.cost_s = w_a.intra_cost_s;
  weight.volume_bytes = w_a.intra_volume_bytes;
  if (!(from == to)) {
    RedistPlan plan = redistribute(from, to);
    weight.cost_s += redistribution_cost(plan, tensor_bytes, env);
    weight.volume_bytes += plan_volume(plan, tensor_bytes);
  }
  int in_deg = 0;
  for (const auto& ge : graph.edges) in_deg += (ge.to == graph.operators[w].id);
  weight.memory_bytes = w_a.memory_bytes / in_deg;
  return weight;
}

// Expands every operator into its full strategy set and prices the complete
// bipartite edge set over each original edge, in both cost modes at once.
inline AuxiliaryGraph build_auxiliary_graph(const ComputationGraph& graph,
                                            const ClusterTopology& topo,
                                            CostMode mode = CostMode::kTopology) {
  AuxiliaryGraph aux;
  aux.graph = graph;
  aux.topo = topo;
  aux.default_mode = mode;

  const std::int64_t devices = topo.total_devices();
  const BandwidthEnv env = bandwidth_env(topo);
  const int op_count = static_cast<int>(graph.operators.size());

  aux.topo_order = graph.topological_order();
  if (aux.topo_order.empty() && op_count > 0) {
    throw Error("build_auxiliary_graph: graph has a cycle");
  }

  aux.nodes_of_op.resize(op_count);
  aux.in_degree_of.resize(op_count);
  aux.out_degree_of.resize(op_count);
  for (int i = 0; i < op_count; ++i) {
    aux.in_degree_of[i] = graph.in_degree(i);
    aux.out_degree_of[i] = graph.out_degree(i);
  }

  for (int i = 0; i < op_count; ++i) {
    const OperatorNode& op = graph.operators[i];
    std::vector<OperatorStrategy> strategies = enumerate_strategies(op, devices);
    for (std::size_t s = 0; s < strategies.size(); ++s) {
      AuxNode node;
      node.op_index = i;
      node.strategy_index = static_cast<int>(s);
      node.strategy = strategies[s];
      node.layouts = derive_tensor_layouts(op, strategies[s]);
      detail::IntraCost intra =
          detail::intra_operator_cost(op, strategies[s], node.layouts, env);
      node.intra_cost_s = intra.seconds;
      node.intra_volume_bytes = intra.volume_bytes;
      node.memory_bytes = detail::node_memory_bytes(graph, op, node.layouts);
      aux.nodes_of_op[i].push_back(static_cast<int>(aux.nodes.size()));
      aux.nodes.push_back(std::move(node));
    }
  }

  // Redistribution results repeat across strategy pairs that induce the same
  // layouts, so cache them per (from-layout, to-layout).
  std::map<std::pair<TensorLayout, TensorLayout>, detail::RedistWeight> memo;
  auto redist_weight = [&](const TensorLayout& from,
                           const TensorLayout& to) -> detail::RedistWeight {
    if (from == to) return {};
    auto key = std::make_pair(from, to);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    RedistPlan plan = redistribute(from, to);
    detail::RedistWeight weight;
    const double tensor_bytes = from.spec.bytes();
    weight.volume_bytes = plan_volume(plan, tensor_bytes);
    weight.seconds = redistribution_cost(plan, tensor_bytes, env);
    memo.emplace(std::move(key), weight);
    return weight;
  };

  aux.edge_base.resize(graph.edges.size());
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const GraphEdge& edge = graph.edges[e];
    const int u = graph.find_op(edge.from);
    const int w = graph.find_op(edge.to);
    if (u < 0 || w < 0) throw Error("auxiliary graph: dangling edge");
    aux.edge_base[e] = static_cast<int>(aux.edges.size());
    for (int u_node : aux.nodes_of_op[u]) {
      const TensorLayout& from = aux.nodes[u_node].layouts.at(edge.tensor);
      for (int w_node : aux.nodes_of_op[w]) {
        const AuxNode& wn = aux.nodes[w_node];
        const TensorLayout& to = wn.layouts.at(edge.tensor);
        detail::RedistWeight rw = redist_weight(from, to);
        AuxEdge aux_edge;
        aux_edge.original_edge = static_cast<int>(e);
        aux_edge.from_node = u_node;
        aux_edge.to_node = w_node;
        aux_edge.cost_s = wn.intra_cost_s + rw.seconds;
        aux_edge.volume_bytes = wn.intra_volume_bytes + rw.volume_bytes;
        aux_edge.memory_bytes = wn.memory_bytes / aux.in_degree_of[w];
        aux.edges.push_back(aux_edge);
      }
    }
  }

  aux.virtual_edge_of_node.assign(aux.nodes.size(), -1);
  for (int i = 0; i < op_count; ++i) {
    if (aux.in_degree_of[i] != 0) continue;
    for (int node_id : aux.nodes_of_op[i]) {
      const AuxNode& node = aux.nodes[node_id];
      VirtualEdge ve;
      ve.op_index = i;
      ve.to_node = node_id;
      ve.cost_s = node.intra_cost_s;
      ve.volume_bytes = node.intra_volume_bytes;
      ve.memory_bytes = node.memory_bytes;
      aux.virtual_edge_of_node[node_id] = static_cast<int>(aux.virtual_edges.size());
      aux.virtual_edges.push_back(ve);
    }
  }

  return aux;
}

struct AssignmentPrice {
  double cost = 0;
  double memory_bytes = 0;
};

// Prices a full strategy assignment (one strategy index per operator).
// Accumulation order is pinned — operators in topological order, a source's
// virtual edge first, then its in-edges ascending — so that independent
// evaluation paths produce bit-identical sums.
inline AssignmentPrice price_assignment(const AuxiliaryGraph& aux,
                                        const std::vector<int>& assignment,
                                        CostMode mode) {
  AssignmentPrice price;
  for (int op : aux.topo_order) {
    const int node_id = aux.nodes_of_op[op][assignment[op]];
    if (aux.in_degree_of[op] == 0) {
      const VirtualEdge& ve =
          aux.virtual_edges[aux.virtual_edge_of_node[node_id]];
      price.cost += aux.virtual_weight_by_mode(ve, mode);
      price.memory_bytes += ve.memory_bytes;
    }
    for (std::size_t e = 0; e < aux.graph.edges.size(); ++e) {
      if (aux.graph.edges[e].to != aux.graph.operators[op].id) continue;
      const int u = aux.graph.find_op(aux.graph.edges[e].from);
      const AuxEdge& edge = aux.edges[aux.edge_id(
          static_cast<int>(e), assignment[u], assignment[op])];
      price.cost += aux.edge_weight_by_mode(edge, mode);
      price.memory_bytes += edge.memory_bytes;
    }
  }
  return price;
}

}  // namespace topoplan

#endif  // TOPOPLAN_AUX_GRAPH_HPP_
