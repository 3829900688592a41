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

#ifndef TOPOPLAN_COST_MODEL_HPP_
#define TOPOPLAN_COST_MODEL_HPP_

#include <cstdint>
#include <string>

#include "topoplan/layout.hpp"
#include "topoplan/redistribution.hpp"
#include "topoplan/validation.hpp"

namespace topoplan {

struct BandwidthEnv {
  double intra_bandwidth = 0;  // bytes/sec
  double inter_bandwidth = 0;  // bytes/sec
  int local_device_num = 1;
};

inline BandwidthEnv bandwidth_env(const ClusterTopology& topo) {
  return {topo.intra_bandwidth, topo.inter_bandwidth, topo.local_device_num};
}

// Ring AllReduce volume: 2(n-1)/n * data_size.
inline double allreduce_volume(std::int64_t group_size, double data_size) {
  if (group_size <= 1) return 0;
  const double n = static_cast<double>(group_size);
  return 2.0 * (n - 1) / n * data_size;
}

// Ring AllGather volume: (n-1) * shard_size.
inline double allgather_volume(std::int64_t group_size, double shard_size) {
  if (group_size <= 1) return 0;
  return static_cast<double>(group_size - 1) * shard_size;
}

// AllToAll volume: each device keeps 1/n of its shard, sends the rest.
inline double alltoall_volume(std::int64_t group_size, double shard_size) {
  if (group_size <= 1) return 0;
  const double n = static_cast<double>(group_size);
  return (n - 1) / n * shard_size;
}

// Total AllReduce element volume of one MatMul under degrees (d, r, c):
// delta-W reduced over d, Y over r, E_X over c.
inline double matmul_intra_volume(std::int64_t d, std::int64_t r, std::int64_t c,
                                  std::int64_t b, std::int64_t in,
                                  std::int64_t out) {
  const double total = static_cast<double>(d) * r * c;
  return 2.0 *
         (static_cast<double>(d - 1) * in * out +
          static_cast<double>(r - 1) * b * out +
          static_cast<double>(c - 1) * b * in) /
         total;
}

// Number of communication groups per node that must cross the node boundary
// for an AllReduce whose reduction group spans the device dims absent from
// `map`. Walks device dims inner to outer, accumulating how many of one
// group's devices fit inside a node.
inline std::int64_t infer_ct_allreduce(const DeviceMatrix& matrix,
                                       const TensorMap& map,
                                       std::int64_t local_device_num) {
  std::int64_t parallel_degree = matrix.total();
  for (int m : map.entries) {
    if (m >= 0) parallel_degree /= matrix.extent(m);
  }
  std::int64_t remain_devices = local_device_num;
  std::int64_t device_in = 1;
  for (int k = 0; k < matrix.depth(); ++k) {
    if (!map.contains(k) && remain_devices > 1) {
      if (remain_devices > matrix.extent(k)) {
        device_in *= matrix.extent(k);
      } else {
        device_in *= remain_devices;
      }
    }
    remain_devices /= matrix.extent(k);
  }
  if (device_in >= parallel_degree) return 0;
  if (device_in > 1) return local_device_num / device_in;
  return local_device_num;
}

struct AllGatherCt {
  std::int64_t ct = 0;
  std::int64_t repeat_num = 1;     // replicas of one shard inside a node
  std::int64_t group_in_node = 1;  // devices of one group inside a node
};

// Gather-group bookkeeping for the device dim `gather_dim`: accumulate the
// dims inner to it to find the in-node repetition and how the group packs
// into nodes, then derive ct.
inline AllGatherCt infer_ct_allgather_dim(const DeviceMatrix& matrix,
                                          const TensorMap& map, int gather_dim,
                                          std::int64_t local_device_num) {
  AllGatherCt result;
  const std::int64_t parallel_degree = matrix.extent(gather_dim);
  std::int64_t temp_device_num = 1;
  std::int64_t repeat_num = 1;
  for (int k = 0; k < gather_dim; ++k) {
    temp_device_num *= matrix.extent(k);
    if (!map.contains(k)) repeat_num *= matrix.extent(k);
  }
  if (repeat_num > local_device_num) repeat_num = local_device_num;
  result.repeat_num = repeat_num;

  if (temp_device_num >= local_device_num) {
    result.group_in_node = 1;
    result.ct = local_device_num / repeat_num;
  } else {
    const std::int64_t remain_devices = local_device_num / temp_device_num;
    result.group_in_node = std::min(parallel_degree, remain_devices);
    if (remain_devices >= parallel_degree) {
      result.ct = 0;
    } else {
      result.ct = temp_device_num / repeat_num;
    }
  }
  return result;
}

// Same, keyed by the gathered tensor axis g (gather_dim = map[g]).
inline AllGatherCt infer_ct_allgather(const DeviceMatrix& matrix,
                                      const TensorMap& map, int gather_axis,
                                      std::int64_t local_device_num) {
  const int dim = map[gather_axis];
  if (dim < 0) throw Error("infer_ct_allgather: axis is not sharded");
  return infer_ct_allgather_dim(matrix, map, dim, local_device_num);
}

// B_intra when no group crosses nodes, otherwise the inter-node link shared
// by ct simultaneous groups.
inline double effective_bandwidth(std::int64_t ct, const BandwidthEnv& env) {
  if (ct <= 0) return env.intra_bandwidth;
  return env.inter_bandwidth / static_cast<double>(ct);
}

enum class CollectiveKind { kAllReduce, kAllGather, kAllToAll };

// One collective over a group of the device matrix. data_size is the
// reduced-tensor size for AllReduce and the per-device shard size for
// AllGather/AllToAll. `map` is the tensor map at the time the collective
// runs; `device_dim` names the gathered/exchanged dim (unused by AllReduce,
// whose group is everything absent from the map).
struct CollectiveCall {
  CollectiveKind kind;
  std::int64_t group_size = 1;
  double data_size = 0;  // bytes
  DeviceMatrix matrix;
  TensorMap map;
  int device_dim = -1;
};

struct CollectiveCost {
  double volume = 0;  // bytes
  std::int64_t ct = 0;
  double effective_bw = 0;
  double seconds = 0;
};

inline CollectiveCost collective_cost_detail(const CollectiveCall& call,
                                             const BandwidthEnv& env) {
  CollectiveCost result;
  switch (call.kind) {
    case CollectiveKind::kAllReduce: {
      result.volume = allreduce_volume(call.group_size, call.data_size);
      result.ct = infer_ct_allreduce(call.matrix, call.map, env.local_device_num);
      result.effective_bw = effective_bandwidth(result.ct, env);
      result.seconds = result.volume / result.effective_bw;
      break;
    }
    case CollectiveKind::kAllGather: {
      result.volume = allgather_volume(call.group_size, call.data_size);
      AllGatherCt ag = infer_ct_allgather_dim(call.matrix, call.map,
                                              call.device_dim,
                                              env.local_device_num);
      result.ct = ag.ct;
      result.effective_bw = effective_bandwidth(result.ct, env);
      result.seconds = result.volume / result.effective_bw;
      break;
    }
    case CollectiveKind::kAllToAll: {
      result.volume = alltoall_volume(call.group_size, call.data_size);
      AllGatherCt ag = infer_ct_allgather_dim(call.matrix, call.map,
                                              call.device_dim,
                                              env.local_device_num);
      const std::int64_t p = call.group_size;
      const std::int64_t k = ag.group_in_node;
      if (p <= 1) {
        result.ct = 0;
        result.effective_bw = env.intra_bandwidth;
        result.seconds = 0;
      } else if (k >= p) {
        // Whole group inside one node.
        result.ct = 0;
        result.effective_bw = env.intra_bandwidth;
        result.seconds = result.volume / result.effective_bw;
      } else {
        std::int64_t ct = env.local_device_num / (k * ag.repeat_num);
        if (ct < 1) ct = 1;
        result.ct = ct;
        result.effective_bw = effective_bandwidth(ct, env);
        const double scale = static_cast<double>(k) * (p - k) / (p - 1);
        result.seconds = scale * result.volume / result.effective_bw;
      }
      break;
    }
  }
  return result;
}

inline double collective_cost(const CollectiveCall& call,
                              const BandwidthEnv& env) {
  return collective_cost_detail(call, env).seconds;
}

// Prices every step of a redistribution plan with the topology-aware model.
inline double redistribution_cost(const RedistPlan& plan, double tensor_bytes,
                                  const BandwidthEnv& env) {
  double seconds = 0;
  TensorMap working = plan.from_map;
  for (const RedistOp& op : plan.ops) {
    const double shard = shard_bytes_under(plan.matrix, working, tensor_bytes);
    switch (op.kind) {
      case RedistOpKind::kSlice:
        working.entries[op.tensor_axis] = op.device_dim;
        break;
      case RedistOpKind::kAllGather: {
        CollectiveCall call{CollectiveKind::kAllGather,
                            plan.matrix.extent(op.device_dim), shard,
                            plan.matrix, working, op.device_dim};
        seconds += collective_cost(call, env);
        working.entries[op.tensor_axis] = -1;
        break;
      }
      case RedistOpKind::kAllToAll: {
        CollectiveCall call{CollectiveKind::kAllToAll,
                            plan.matrix.extent(op.device_dim), shard,
                            plan.matrix, working, op.device_dim};
        seconds += collective_cost(call, env);
        working.entries[op.tensor_axis] = -1;
        working.entries[op.dest_axis] = op.device_dim;
        break;
      }
    }
  }
  return seconds;
}

}  // namespace topoplan

#endif  // TOPOPLAN_COST_MODEL_HPP_
