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

#ifndef TOPOPLAN_GRAPH_HPP_
#define TOPOPLAN_GRAPH_HPP_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "topoplan/validation.hpp"

namespace topoplan {

inline bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline int log2_exact(std::int64_t n) {
  int e = 0;
  while ((std::int64_t{1} << e) < n) ++e;
  return e;
}

// A tensor as seen by the planner: a name, full (unpartitioned) shape, and
// the element width in bytes. Shapes only; no data is ever materialized.
struct TensorSpec {
  std::string name;
  std::vector<std::int64_t> shape;
  int element_size = 4;

  int rank() const { return static_cast<int>(shape.size()); }

  std::int64_t elements() const {
    std::int64_t n = 1;
    for (std::int64_t s : shape) n *= s;
    return n;
  }

  double bytes() const {
    return static_cast<double>(elements()) * element_size;
  }

  bool operator==(const TensorSpec& other) const {
    return name == other.name && shape == other.shape &&
           element_size == other.element_size;
  }
};

enum class OpKind { kMatMul, kConv, kElementwise, kOther };

inline const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kMatMul: return "matmul";
    case OpKind::kConv: return "conv";
    case OpKind::kElementwise: return "elementwise";
    case OpKind::kOther: return "other";
  }
  return "other";
}

inline OpKind op_kind_from_string(const std::string& s) {
  if (s == "matmul") return OpKind::kMatMul;
  if (s == "conv") return OpKind::kConv;
  if (s == "elementwise") return OpKind::kElementwise;
  if (s == "other") return OpKind::kOther;
  throw Error("unknown operator kind: " + s);
}

// One (tensor, dimension) sliced by a partitionable axis.
struct AxisSlice {
  std::string tensor;
  int dim = 0;
  bool operator==(const AxisSlice& other) const {
    return tensor == other.tensor && dim == other.dim;
  }
};

struct OperatorAxis {
  std::string name;
  std::vector<AxisSlice> slices;
};

struct OperatorNode {
  std::string id;
  OpKind kind = OpKind::kOther;
  std::vector<TensorSpec> inputs;
  std::vector<TensorSpec> outputs;
  std::vector<OperatorAxis> axes;

  int axis_count() const { return static_cast<int>(axes.size()); }

  const TensorSpec* find_input(const std::string& name) const {
    for (const auto& t : inputs) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }

  const TensorSpec* find_output(const std::string& name) const {
    for (const auto& t : outputs) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }

  const TensorSpec* find_tensor(const std::string& name) const {
    if (const TensorSpec* t = find_input(name)) return t;
    return find_output(name);
  }
};

struct GraphEdge {
  std::string from;
  std::string to;
  std::string tensor;
};

struct ComputationGraph {
  std::vector<OperatorNode> operators;
  std::vector<GraphEdge> edges;

  int find_op(const std::string& id) const {
    for (std::size_t i = 0; i < operators.size(); ++i) {
      if (operators[i].id == id) return static_cast<int>(i);
    }
    return -1;
  }

  int in_degree(int op_index) const {
    int d = 0;
    const std::string& id = operators[op_index].id;
    for (const auto& e : edges) d += (e.to == id);
    return d;
  }

  int out_degree(int op_index) const {
    int d = 0;
    const std::string& id = operators[op_index].id;
    for (const auto& e : edges) d += (e.from == id);
    return d;
  }

  // Kahn's algorithm. Returns operator indices in topological order, or an
  // empty vector when the edge set contains a cycle.
  std::vector<int> topological_order() const {
    const int n = static_cast<int>(operators.size());
    std::vector<int> indegree(n, 0);
    std::vector<std::vector<int>> succ(n);
    for (const auto& e : edges) {
      int u = find_op(e.from);
      int w = find_op(e.to);
      if (u < 0 || w < 0) continue;
      succ[u].push_back(w);
      ++indegree[w];
    }
    std::vector<int> ready;
    for (int i = 0; i < n; ++i) {
      if (indegree[i] == 0) ready.push_back(i);
    }
    std::vector<int> order;
    for (std::size_t head = 0; head < ready.size(); ++head) {
      int u = ready[head];
      order.push_back(u);
      for (int w : succ[u]) {
        if (--indegree[w] == 0) ready.push_back(w);
      }
    }
    if (order.size() != operators.size()) return {};
    return order;
  }
};

// Two-level homogeneous cluster: node_count nodes of local_device_num
// devices each. Device ranks linearize the device matrix with dimension 0
// innermost; a node owns local_device_num consecutive ranks.
struct ClusterTopology {
  int node_count = 1;
  int local_device_num = 1;
  double intra_bandwidth = 0;  // bytes/sec
  double inter_bandwidth = 0;  // bytes/sec
  double device_memory = 0;    // bytes

  std::int64_t total_devices() const {
    return static_cast<std::int64_t>(node_count) * local_device_num;
  }
};

inline ValidationReport validate_topology(const ClusterTopology& topo) {
  ValidationReport report;
  if (topo.node_count < 1) {
    report.add_error("node-count", "node_count must be >= 1");
  }
  if (topo.local_device_num < 1) {
    report.add_error("local-device-num", "local_device_num must be >= 1");
  }
  if (topo.node_count >= 1 && topo.local_device_num >= 1) {
    if (!is_power_of_two(topo.local_device_num)) {
      report.add_error("power-of-two",
                       "local_device_num " +
                           std::to_string(topo.local_device_num) +
                           " is not a power of two");
    }
    if (!is_power_of_two(topo.total_devices())) {
      report.add_error("power-of-two",
                       "total device count " +
                           std::to_string(topo.total_devices()) +
                           " is not a power of two");
    }
  }
  if (topo.intra_bandwidth <= 0 || topo.inter_bandwidth <= 0) {
    report.add_error("bandwidth", "bandwidths must be positive");
  } else if (topo.inter_bandwidth > topo.intra_bandwidth) {
    report.add_warning("bandwidth-order",
                       "inter-node bandwidth exceeds intra-node bandwidth");
  }
  if (topo.device_memory <= 0) {
    report.add_error("device-memory", "device_memory must be positive");
  }
  return report;
}

inline ValidationReport validate_graph(const ComputationGraph& graph) {
  ValidationReport report;

  std::set<std::string> ids;
  for (const auto& op : graph.operators) {
    if (!ids.insert(op.id).second) {
      report.add_error("duplicate-id", "duplicate operator id '" + op.id + "'");
    }
  }

  auto check_tensor = [&](const OperatorNode& op, const TensorSpec& t) {
    for (std::int64_t s : t.shape) {
      if (s < 1) {
        report.add_error("bad-extent", "tensor '" + t.name + "' of operator '" +
                                           op.id + "' has extent < 1");
      }
    }
    if (t.element_size != 1 && t.element_size != 2 && t.element_size != 4 &&
        t.element_size != 8) {
      report.add_error("element-size",
                       "tensor '" + t.name + "' of operator '" + op.id +
                           "' has element_size outside {1,2,4,8}");
    }
  };

  for (const auto& op : graph.operators) {
    for (const auto& t : op.inputs) check_tensor(op, t);
    for (const auto& t : op.outputs) check_tensor(op, t);

    if (op.axes.empty()) {
      report.add_error("no-axes",
                       "operator '" + op.id + "' declares no partitionable axes");
    }
    std::set<std::string> axis_names;
    for (const auto& axis : op.axes) {
      if (!axis_names.insert(axis.name).second) {
        report.add_error("duplicate-axis", "operator '" + op.id +
                                               "' repeats axis '" + axis.name +
                                               "'");
      }
      if (axis.slices.empty()) {
        report.add_error("axis-no-slice",
                         "axis '" + axis.name + "' of operator '" + op.id +
                             "' maps to no tensor dimension");
      }
      for (const auto& slice : axis.slices) {
        const TensorSpec* t = op.find_tensor(slice.tensor);
        if (t == nullptr) {
          report.add_error("dangling-reference",
                           "axis '" + axis.name + "' of operator '" + op.id +
                               "' references unknown tensor '" + slice.tensor +
                               "'");
        } else if (slice.dim < 0 || slice.dim >= t->rank()) {
          report.add_error("axis-bad-dim",
                           "axis '" + axis.name + "' of operator '" + op.id +
                               "' references dimension " +
                               std::to_string(slice.dim) + " of tensor '" +
                               slice.tensor + "'");
        }
      }
    }
    // A tensor dimension sliced by two axes of the same operator would make
    // the derived layouts ambiguous.
    std::set<std::pair<std::string, int>> sliced;
    for (const auto& axis : op.axes) {
      for (const auto& slice : axis.slices) {
        if (!sliced.insert({slice.tensor, slice.dim}).second) {
          report.add_error("dim-double-sliced",
                           "operator '" + op.id + "' slices tensor '" +
                               slice.tensor + "' dimension " +
                               std::to_string(slice.dim) +
                               " with more than one axis");
        }
      }
    }
  }

  for (const auto& e : graph.edges) {
    int u = graph.find_op(e.from);
    int w = graph.find_op(e.to);
    if (u < 0) {
      report.add_error("dangling-reference",
                       "edge references missing operator '" + e.from + "'");
    }
    if (w < 0) {
      report.add_error("dangling-reference",
                       "edge references missing operator '" + e.to + "'");
    }
    if (u < 0 || w < 0) continue;
    const TensorSpec* produced = graph.operators[u].find_output(e.tensor);
    const TensorSpec* consumed = graph.operators[w].find_input(e.tensor);
    if (produced == nullptr) {
      report.add_error("dangling-reference",
                       "operator '" + e.from + "' has no output tensor '" +
                           e.tensor + "'");
    }
    if (consumed == nullptr) {
      report.add_error("dangling-reference",
                       "operator '" + e.to + "' has no input tensor '" +
                           e.tensor + "'");
    }
    if (produced && consumed &&
        (produced->shape != consumed->shape ||
         produced->element_size != consumed->element_size)) {
      report.add_error("shape-mismatch",
                       "tensor '" + e.tensor + "' differs between '" + e.from +
                           "' and '" + e.to + "'");
    }
  }

  if (!report.has("dangling-reference") && graph.topological_order().empty() &&
      !graph.operators.empty()) {
    report.add_error("cycle", "computation graph contains a cycle");
  }

  return report;
}

}  // namespace topoplan

#endif  // TOPOPLAN_GRAPH_HPP_
