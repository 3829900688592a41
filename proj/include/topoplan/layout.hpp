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

#ifndef TOPOPLAN_LAYOUT_HPP_
#define TOPOPLAN_LAYOUT_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "topoplan/graph.hpp"
#include "topoplan/validation.hpp"

namespace topoplan {

// Hierarchical logical arrangement of devices. dims lists extents outermost
// first; device-dim index k counts from the innermost side, so extent(0) is
// the last entry. Ranks linearize coordinates with dim 0 fastest-varying.
struct DeviceMatrix {
  std::vector<std::int64_t> dims;  // [d_{h-1}, ..., d_0]

  DeviceMatrix() = default;
  explicit DeviceMatrix(std::vector<std::int64_t> d) : dims(std::move(d)) {}

  int depth() const { return static_cast<int>(dims.size()); }

  std::int64_t extent(int k) const { return dims[dims.size() - 1 - k]; }

  std::int64_t total() const {
    std::int64_t n = 1;
    for (std::int64_t d : dims) n *= d;
    return n;
  }

  // Stride of device-dim k in the rank linearization.
  std::int64_t stride(int k) const {
    std::int64_t s = 1;
    for (int i = 0; i < k; ++i) s *= extent(i);
    return s;
  }

  bool operator==(const DeviceMatrix& other) const { return dims == other.dims; }

  std::string to_string() const {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (i) out << ",";
      out << dims[i];
    }
    out << "]";
    return out.str();
  }
};

// One entry per tensor dimension: -1 replicates the dimension, k shards it
// over device-dim k. No device dim may appear twice.
struct TensorMap {
  std::vector<int> entries;

  TensorMap() = default;
  explicit TensorMap(std::vector<int> e) : entries(std::move(e)) {}

  int rank() const { return static_cast<int>(entries.size()); }
  int operator[](int i) const { return entries[i]; }

  bool contains(int device_dim) const {
    return std::find(entries.begin(), entries.end(), device_dim) !=
           entries.end();
  }

  int axis_of(int device_dim) const {
    for (int i = 0; i < rank(); ++i) {
      if (entries[i] == device_dim) return i;
    }
    return -1;
  }

  bool operator==(const TensorMap& other) const {
    return entries == other.entries;
  }

  std::string to_string() const {
    std::ostringstream out;
    out << "[";
    for (int i = 0; i < rank(); ++i) {
      if (i) out << ",";
      out << entries[i];
    }
    out << "]";
    return out.str();
  }
};

struct TensorLayout {
  TensorSpec spec;
  DeviceMatrix matrix;
  TensorMap map;

  // Product of the device dims the tensor is sharded over.
  std::int64_t shard_divisor() const {
    std::int64_t d = 1;
    for (int m : map.entries) {
      if (m >= 0) d *= matrix.extent(m);
    }
    return d;
  }

  std::int64_t shard_elements() const { return spec.elements() / shard_divisor(); }

  double shard_bytes() const {
    return static_cast<double>(shard_elements()) * spec.element_size;
  }

  std::vector<std::int64_t> shard_shape() const {
    std::vector<std::int64_t> shape = spec.shape;
    for (int i = 0; i < map.rank(); ++i) {
      if (map[i] >= 0) shape[i] /= matrix.extent(map[i]);
    }
    return shape;
  }

  ValidationReport validate() const {
    ValidationReport report;
    if (map.rank() != spec.rank()) {
      report.add_error("layout-rank", "tensor map rank does not match shape");
      return report;
    }
    std::vector<bool> used(matrix.depth(), false);
    for (int i = 0; i < map.rank(); ++i) {
      int m = map[i];
      if (m == -1) continue;
      if (m < 0 || m >= matrix.depth()) {
        report.add_error("layout-index", "tensor map entry out of range");
        continue;
      }
      if (used[m]) {
        report.add_error("layout-repeat",
                         "device dim " + std::to_string(m) + " mapped twice");
      }
      used[m] = true;
      if (spec.shape[i] % matrix.extent(m) != 0) {
        report.add_error("indivisible",
                         "extent " + std::to_string(spec.shape[i]) +
                             " of tensor '" + spec.name +
                             "' not divisible by device dim " +
                             std::to_string(matrix.extent(m)));
      }
    }
    return report;
  }

  bool operator==(const TensorLayout& other) const {
    return spec == other.spec && matrix == other.matrix && map == other.map;
  }

  bool operator<(const TensorLayout& other) const {
    if (!(spec.shape == other.spec.shape))
      return spec.shape < other.spec.shape;
    if (!(matrix.dims == other.matrix.dims))
      return matrix.dims < other.matrix.dims;
    return map.entries < other.map.entries;
  }
};

// One parallelism strategy of an operator: a power-of-two degree per axis
// whose product is the device count, plus a device map placing each sharded
// axis at a distinct position of the canonical device matrix. The canonical
// matrix keeps one dim per sharded axis (position 0 innermost); size-1 dims
// for unsharded axes appear only in the display form, as in the usual
// degrees-per-axis notation.
struct OperatorStrategy {
  std::string op_id;
  std::vector<std::int64_t> degrees;  // per axis, in declaration order
  std::vector<int> device_map;        // per axis: canonical dim index or -1
  DeviceMatrix device_matrix;         // canonical, no size-1 dims

  int axis_count() const { return static_cast<int>(degrees.size()); }

  std::vector<std::int64_t> display_matrix() const { return degrees; }

  std::string to_string() const {
    std::ostringstream out;
    out << "(";
    for (std::size_t i = 0; i < degrees.size(); ++i) {
      if (i) out << ",";
      out << degrees[i];
    }
    out << ") map (";
    for (std::size_t i = 0; i < device_map.size(); ++i) {
      if (i) out << ",";
      out << device_map[i];
    }
    out << ")";
    return out.str();
  }

  bool operator==(const OperatorStrategy& other) const {
    return degrees == other.degrees && device_map == other.device_map;
  }
};

// Number of distinct strategies for p partitionable axes on N = 2^n devices:
// choose i axes to shard, compose n into i positive power exponents, and
// assign the i axes to distinct device-matrix positions.
inline std::int64_t strategy_count(int p, std::int64_t total_devices) {
  if (p < 1) throw Error("strategy_count: axis count must be >= 1");
  if (!is_power_of_two(total_devices)) {
    throw Error("strategy_count: device count " +
                std::to_string(total_devices) + " is not a power of two");
  }
  const int n = log2_exact(total_devices);
  if (n == 0) return 1;  // single device: the trivial strategy

  auto binomial = [](int a, int b) -> std::int64_t {
    if (b < 0 || b > a) return 0;
    std::int64_t r = 1;
    for (int i = 0; i < b; ++i) r = r * (a - i) / (i + 1);
    return r;
  };
  std::int64_t count = 0;
  std::int64_t factorial = 1;
  for (int i = 1; i <= std::min(p, n); ++i) {
    factorial *= i;
    count += factorial * binomial(p, i) * binomial(n - 1, i - 1);
  }
  return count;
}

namespace detail {

// All vectors of `parts` non-negative exponents summing to `total`.
inline void exponent_compositions(int parts, int total,
                                  std::vector<int>& current,
                                  std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    current.push_back(total);
    out.push_back(current);
    current.pop_back();
    return;
  }
  for (int e = 0; e <= total; ++e) {
    current.push_back(e);
    exponent_compositions(parts - 1, total - e, current, out);
    current.pop_back();
  }
}

}  // namespace detail

// Enumerates every strategy of `op` on `total_devices` devices in a fixed
// order: degree tuples ascending lexicographically, then device maps
// descending lexicographically (earlier axes take outer positions first).
inline std::vector<OperatorStrategy> enumerate_strategies(
    const OperatorNode& op, std::int64_t total_devices) {
  if (!is_power_of_two(total_devices)) {
    throw Error("enumerate_strategies: device count must be a power of two");
  }
  const int p = op.axis_count();
  if (p < 1) throw Error("enumerate_strategies: operator has no axes");
  const int n = log2_exact(total_devices);

  std::vector<std::vector<int>> exponents;
  std::vector<int> scratch;
  detail::exponent_compositions(p, n, scratch, exponents);

  std::vector<OperatorStrategy> strategies;
  for (const auto& exps : exponents) {
    std::vector<int> sharded;  // axis indices with degree > 1
    for (int a = 0; a < p; ++a) {
      if (exps[a] > 0) sharded.push_back(a);
    }
    const int i = static_cast<int>(sharded.size());

    std::vector<std::int64_t> degrees(p, 1);
    for (int a = 0; a < p; ++a) degrees[a] = std::int64_t{1} << exps[a];

    if (i == 0) {
      OperatorStrategy s;
      s.op_id = op.id;
      s.degrees = degrees;
      s.device_map.assign(p, -1);
      strategies.push_back(std::move(s));
      continue;
    }

    // Positions i-1..0 assigned to the sharded axes in every order.
    std::vector<int> positions(i);
    std::iota(positions.begin(), positions.end(), 0);
    std::sort(positions.begin(), positions.end(), std::greater<int>());
    do {
      OperatorStrategy s;
      s.op_id = op.id;
      s.degrees = degrees;
      s.device_map.assign(p, -1);
      for (int j = 0; j < i; ++j) s.device_map[sharded[j]] = positions[j];
      s.device_matrix.dims.assign(i, 1);
      for (int j = 0; j < i; ++j) {
        // position k is stored at matrix slot (depth-1-k)
        s.device_matrix.dims[i - 1 - positions[j]] = degrees[sharded[j]];
      }
      strategies.push_back(std::move(s));
    } while (std::prev_permutation(positions.begin(), positions.end()));
  }

  std::sort(strategies.begin(), strategies.end(),
            [](const OperatorStrategy& a, const OperatorStrategy& b) {
              if (a.degrees != b.degrees) return a.degrees < b.degrees;
              return a.device_map > b.device_map;
            });
  return strategies;
}

// Layout of every tensor of `op` under `strategy`: each tensor dimension
// inherits the device-map entry of the axis slicing it, and its extent must
// divide evenly by that axis' degree.
inline std::map<std::string, TensorLayout> derive_tensor_layouts(
    const OperatorNode& op, const OperatorStrategy& strategy) {
  if (strategy.axis_count() != op.axis_count()) {
    throw Error("strategy/operator axis count mismatch for '" + op.id + "'");
  }
  std::map<std::string, TensorLayout> layouts;
  auto add_tensor = [&](const TensorSpec& t) {
    TensorLayout layout;
    layout.spec = t;
    layout.matrix = strategy.device_matrix;
    layout.map.entries.assign(t.rank(), -1);
    layouts[t.name] = std::move(layout);
  };
  for (const auto& t : op.inputs) add_tensor(t);
  for (const auto& t : op.outputs) add_tensor(t);

  for (int a = 0; a < op.axis_count(); ++a) {
    const OperatorAxis& axis = op.axes[a];
    for (const auto& slice : axis.slices) {
      auto it = layouts.find(slice.tensor);
      if (it == layouts.end()) {
        throw Error("axis '" + axis.name + "' of '" + op.id +
                    "' references unknown tensor '" + slice.tensor + "'");
      }
      TensorLayout& layout = it->second;
      const std::int64_t extent = layout.spec.shape[slice.dim];
      if (extent % strategy.degrees[a] != 0) {
        throw Error("extent " + std::to_string(extent) + " of tensor '" +
                    slice.tensor + "' in '" + op.id +
                    "' is not divisible by degree " +
                    std::to_string(strategy.degrees[a]) + " of axis '" +
                    axis.name + "'");
      }
      layout.map.entries[slice.dim] = strategy.device_map[a];
    }
  }
  return layouts;
}

}  // namespace topoplan

#endif  // TOPOPLAN_LAYOUT_HPP_
