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

// Test-only oracles, kept independent of the library code paths they check:
// a brute-force strategy enumerator, an element-placement simulator for
// redistribution plans, and small graph builders.

#ifndef TOPOPLAN_TESTS_TEST_SUPPORT_HPP_
#define TOPOPLAN_TESTS_TEST_SUPPORT_HPP_

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "topoplan/graph.hpp"
#include "topoplan/layout.hpp"
#include "topoplan/redistribution.hpp"

namespace topoplan::testing {

inline OperatorNode matmul_op(const std::string& id, std::int64_t b,
                              std::int64_t in, std::int64_t out,
                              const std::string& x = "x",
                              const std::string& y = "y") {
  OperatorNode op;
  op.id = id;
  op.kind = OpKind::kMatMul;
  op.inputs = {{x, {b, in}, 4}, {id + ".w", {in, out}, 4}};
  op.outputs = {{y, {b, out}, 4}};
  op.axes = {
      {"b", {{x, 0}, {y, 0}}},
      {"in", {{x, 1}, {id + ".w", 0}}},
      {"out", {{id + ".w", 1}, {y, 1}}},
  };
  return op;
}

// Independent count of strategies: choose per-axis power-of-two exponents
// summing to n, then assign the sharded axes to distinct matrix positions.
inline std::int64_t brute_force_strategy_count(int p, std::int64_t devices) {
  const int n = log2_exact(devices);
  std::int64_t count = 0;
  std::vector<int> exps(p, 0);
  auto recurse = [&](auto&& self, int axis, int remaining) -> void {
    if (axis == p - 1) {
      exps[axis] = remaining;
      int sharded = 0;
      for (int e : exps) sharded += (e > 0);
      std::int64_t perms = 1;
      for (int i = 2; i <= sharded; ++i) perms *= i;
      count += perms;
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      exps[axis] = e;
      self(self, axis + 1, remaining - e);
    }
  };
  recurse(recurse, 0, n);
  return count;
}

// Element-placement simulator. A device's holding is the set of flattened
// element indices of the tensor; redistribution ops move whole blocks.
class PlacementSim {
 public:
  PlacementSim(const DeviceMatrix& matrix, std::vector<std::int64_t> shape)
      : matrix_(matrix), shape_(std::move(shape)) {
    strides_.assign(shape_.size(), 1);
    for (int i = static_cast<int>(shape_.size()) - 2; i >= 0; --i) {
      strides_[i] = strides_[i + 1] * shape_[i + 1];
    }
  }

  // Elements a device holds under `map`, as a sorted flat-index vector.
  std::vector<std::int64_t> holding(const TensorMap& map,
                                    std::int64_t rank) const {
    std::vector<std::pair<std::int64_t, std::int64_t>> ranges;  // per dim
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      const int m = map[static_cast<int>(i)];
      if (m < 0) {
        ranges.push_back({0, shape_[i]});
      } else {
        const std::int64_t block = shape_[i] / matrix_.extent(m);
        const std::int64_t coord = coordinate(rank, m);
        ranges.push_back({coord * block, (coord + 1) * block});
      }
    }
    std::vector<std::int64_t> out;
    std::vector<std::int64_t> idx(shape_.size());
    for (std::size_t i = 0; i < shape_.size(); ++i) idx[i] = ranges[i].first;
    for (;;) {
      std::int64_t flat = 0;
      for (std::size_t i = 0; i < shape_.size(); ++i) flat += idx[i] * strides_[i];
      out.push_back(flat);
      int d = static_cast<int>(shape_.size()) - 1;
      for (; d >= 0; --d) {
        if (++idx[d] < ranges[d].second) break;
        idx[d] = ranges[d].first;
      }
      if (d < 0) break;
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::vector<std::int64_t>> placement(const TensorMap& map) const {
    std::vector<std::vector<std::int64_t>> out;
    for (std::int64_t r = 0; r < matrix_.total(); ++r) {
      out.push_back(holding(map, r));
    }
    return out;
  }

  // Applies a plan as physical data movement: Slice discards locally,
  // AllGather unions holdings across the group, AllToAll re-blocks inside
  // the group. Every byte a device ends with must have been present in its
  // communication group.
  std::vector<std::vector<std::int64_t>> apply(
      const RedistPlan& plan, std::vector<std::vector<std::int64_t>> state,
      TensorMap working) const {
    for (const RedistOp& op : plan.ops) {
      const int k = op.device_dim;
      switch (op.kind) {
        case RedistOpKind::kSlice: {
          working.entries[op.tensor_axis] = k;
          for (std::int64_t r = 0; r < matrix_.total(); ++r) {
            std::vector<std::int64_t> keep = holding(working, r);
            std::vector<std::int64_t> next;
            std::set_intersection(state[r].begin(), state[r].end(),
                                  keep.begin(), keep.end(),
                                  std::back_inserter(next));
            // A slice is local: the kept block must already be resident.
            if (next.size() != keep.size()) {
              throw Error("simulator: slice needed data not held locally");
            }
            state[r] = std::move(next);
          }
          break;
        }
        case RedistOpKind::kAllGather: {
          working.entries[op.tensor_axis] = -1;
          regroup(state, k);
          break;
        }
        case RedistOpKind::kAllToAll: {
          working.entries[op.tensor_axis] = -1;
          regroup(state, k);  // gather leg
          working.entries[op.dest_axis] = k;
          for (std::int64_t r = 0; r < matrix_.total(); ++r) {
            std::vector<std::int64_t> keep = holding(working, r);
            std::vector<std::int64_t> next;
            std::set_intersection(state[r].begin(), state[r].end(),
                                  keep.begin(), keep.end(),
                                  std::back_inserter(next));
            if (next.size() != keep.size()) {
              throw Error("simulator: all-to-all lost data");
            }
            state[r] = std::move(next);
          }
          break;
        }
      }
    }
    return state;
  }

  std::int64_t coordinate(std::int64_t rank, int device_dim) const {
    return (rank / matrix_.stride(device_dim)) % matrix_.extent(device_dim);
  }

 private:
  void regroup(std::vector<std::vector<std::int64_t>>& state, int k) const {
    const std::int64_t total = matrix_.total();
    std::vector<bool> done(total, false);
    for (std::int64_t r = 0; r < total; ++r) {
      if (done[r]) continue;
      std::vector<std::int64_t> group;
      for (std::int64_t q = 0; q < matrix_.extent(k); ++q) {
        const std::int64_t member =
            r + (q - coordinate(r, k)) * matrix_.stride(k);
        group.push_back(member);
      }
      std::vector<std::int64_t> merged;
      for (std::int64_t member : group) {
        std::vector<std::int64_t> next;
        std::set_union(merged.begin(), merged.end(), state[member].begin(),
                       state[member].end(), std::back_inserter(next));
        merged = std::move(next);
      }
      for (std::int64_t member : group) {
        state[member] = merged;
        done[member] = true;
      }
    }
  }

  DeviceMatrix matrix_;
  std::vector<std::int64_t> shape_;
  std::vector<std::int64_t> strides_;
};

// Checks plan correctness by simulation: starting from the from-map
// placement, applying the ops must land exactly on the to-map placement.
inline bool plan_moves_data_correctly(const RedistPlan& plan) {
  PlacementSim sim(plan.matrix, plan.shape);
  auto state = sim.placement(plan.from_map);
  state = sim.apply(plan, std::move(state), plan.from_map);
  return state == sim.placement(plan.to_map);
}

// Random valid (matrix, shape, map pair) instances for property tests.
struct RandomRedistCase {
  DeviceMatrix matrix;
  std::vector<std::int64_t> shape;
  TensorMap from;
  TensorMap to;
};

// Random factorization of `total` into dims of 2 or 4.
inline DeviceMatrix random_matrix_with_total(std::mt19937& rng,
                                             std::int64_t total) {
  DeviceMatrix matrix;
  std::int64_t remaining = total;
  while (remaining > 1) {
    const std::int64_t dim = (remaining % 4 == 0 && rng() % 2) ? 4 : 2;
    matrix.dims.push_back(dim);
    remaining /= dim;
  }
  std::shuffle(matrix.dims.begin(), matrix.dims.end(), rng);
  return matrix;
}

// Random valid map of `shape` over `matrix`.
inline TensorMap random_map_for(std::mt19937& rng,
                                const std::vector<std::int64_t>& shape,
                                const DeviceMatrix& matrix) {
  const int rank = static_cast<int>(shape.size());
  TensorMap map;
  map.entries.assign(rank, -1);
  std::vector<int> dims(matrix.depth());
  std::iota(dims.begin(), dims.end(), 0);
  std::shuffle(dims.begin(), dims.end(), rng);
  for (int k : dims) {
    if (rng() % 4 == 0) continue;
    std::vector<int> axes(rank);
    std::iota(axes.begin(), axes.end(), 0);
    std::shuffle(axes.begin(), axes.end(), rng);
    for (int axis : axes) {
      if (map[axis] == -1 && shape[axis] % matrix.extent(k) == 0 &&
          shape[axis] >= matrix.extent(k)) {
        map.entries[axis] = k;
        break;
      }
    }
  }
  return map;
}

inline RandomRedistCase random_redist_case(std::mt19937& rng,
                                           std::int64_t max_elements = 4096) {
  std::uniform_int_distribution<int> depth_dist(1, 3);
  std::uniform_int_distribution<int> rank_dist(2, 4);
  std::uniform_int_distribution<int> dim_dist(0, 1);
  RandomRedistCase c;
  const int depth = depth_dist(rng);
  for (int i = 0; i < depth; ++i) {
    c.matrix.dims.push_back(dim_dist(rng) ? 4 : 2);
  }
  const int rank = rank_dist(rng);
  for (;;) {
    c.shape.clear();
    std::int64_t elements = 1;
    for (int i = 0; i < rank; ++i) {
      const std::int64_t extent = std::int64_t{1} << (rng() % 5);  // 1..16
      c.shape.push_back(extent);
      elements *= extent;
    }
    if (elements <= max_elements) break;
  }
  auto random_map = [&](TensorMap& map) {
    map.entries.assign(rank, -1);
    std::vector<int> dims(depth);
    std::iota(dims.begin(), dims.end(), 0);
    std::shuffle(dims.begin(), dims.end(), rng);
    for (int k : dims) {
      // Try to place device dim k on a random divisible axis.
      std::vector<int> axes(rank);
      std::iota(axes.begin(), axes.end(), 0);
      std::shuffle(axes.begin(), axes.end(), rng);
      if (rng() % 4 == 0) continue;  // leave some dims unused
      for (int axis : axes) {
        if (map[axis] == -1 && c.shape[axis] % c.matrix.extent(k) == 0 &&
            c.shape[axis] >= c.matrix.extent(k)) {
          map.entries[axis] = k;
          break;
        }
      }
    }
  };
  random_map(c.from);
  random_map(c.to);
  return c;
}

inline OperatorNode elementwise_op(const std::string& id,
                                   std::vector<std::string> in_names,
                                   const std::string& out_name, std::int64_t b,
                                   std::int64_t h) {
  OperatorNode op;
  op.id = id;
  op.kind = OpKind::kElementwise;
  for (const auto& name : in_names) op.inputs.push_back({name, {b, h}, 4});
  op.outputs = {{out_name, {b, h}, 4}};
  OperatorAxis d0{"d0", {}};
  OperatorAxis d1{"d1", {}};
  for (const auto& name : in_names) {
    d0.slices.push_back({name, 0});
    d1.slices.push_back({name, 1});
  }
  d0.slices.push_back({out_name, 0});
  d1.slices.push_back({out_name, 1});
  op.axes = {d0, d1};
  return op;
}

struct PlanningInstance {
  ComputationGraph graph;
  ClusterTopology topo;
};

// Random well-formed planning instances: short chains of matmul and
// elementwise operators with occasional residual joins, on one- or two-level
// topologies of at most 16 devices.
inline PlanningInstance random_planning_instance(std::mt19937& rng,
                                                 int max_ops = 5,
                                                 double search_cap = 2e5) {
  PlanningInstance instance;
  for (;;) {
    instance.graph = ComputationGraph{};
    const int ops = 2 + static_cast<int>(rng() % (max_ops - 1));
    std::int64_t b = 16 << (rng() % 2);
    std::int64_t h = 16 << (rng() % 3);
    std::vector<std::int64_t> widths{h};
    for (int i = 0; i < ops; ++i) {
      const std::string in_name = "t" + std::to_string(i);
      const std::string out_name = "t" + std::to_string(i + 1);
      const std::string id = "op" + std::to_string(i);
      const bool is_matmul = rng() % 2 == 0;
      if (is_matmul) {
        const std::int64_t next = 16 << (rng() % 3);
        instance.graph.operators.push_back(
            matmul_op(id, b, widths.back(), next, in_name, out_name));
        widths.push_back(next);
      } else {
        std::vector<std::string> inputs{in_name};
        // Residual edge from an earlier activation of the same shape.
        for (int j = static_cast<int>(widths.size()) - 2; j >= 1; --j) {
          if (widths[j] == widths.back() && rng() % 3 == 0) {
            inputs.push_back("t" + std::to_string(j));
            instance.graph.edges.push_back(
                {"op" + std::to_string(j - 1), id, "t" + std::to_string(j)});
            break;
          }
        }
        instance.graph.operators.push_back(
            elementwise_op(id, inputs, out_name, b, widths.back()));
        widths.push_back(widths.back());
      }
      if (i > 0) {
        instance.graph.edges.push_back(
            {"op" + std::to_string(i - 1), id, in_name});
      }
    }

    const int node_count = 1 << (rng() % 3);
    const int local = 2 << (rng() % 2);
    if (node_count * local > 16) continue;
    instance.topo.node_count = node_count;
    instance.topo.local_device_num = local;
    instance.topo.intra_bandwidth = 60e9;
    instance.topo.inter_bandwidth = (rng() % 4 == 0) ? 60e9 : 6e9;
    instance.topo.device_memory = 32e9;

    double space = 1;
    for (const auto& op : instance.graph.operators) {
      space *= static_cast<double>(
          strategy_count(op.axis_count(), instance.topo.total_devices()));
    }
    if (space > search_cap) continue;
    if (!validate_graph(instance.graph).ok()) continue;
    return instance;
  }
}

}  // namespace topoplan::testing

#endif  // TOPOPLAN_TESTS_TEST_SUPPORT_HPP_
