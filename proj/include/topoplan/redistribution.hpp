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

#ifndef TOPOPLAN_REDISTRIBUTION_HPP_
#define TOPOPLAN_REDISTRIBUTION_HPP_

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "topoplan/layout.hpp"
#include "topoplan/validation.hpp"

namespace topoplan {

enum class RedistOpKind { kSlice, kAllGather, kAllToAll };

inline const char* to_string(RedistOpKind kind) {
  switch (kind) {
    case RedistOpKind::kSlice: return "Slice";
    case RedistOpKind::kAllGather: return "AllGather";
    case RedistOpKind::kAllToAll: return "AllToAll";
  }
  return "?";
}

// One redistribution step over the unified device matrix.
//   Slice(d_k, i)        sets m_i from -1 to k; no communication.
//   AllGather(d_k, i)    sets m_i from k to -1.
//   AllToAll(d_k, i->j)  moves k from m_i to m_j.
struct RedistOp {
  RedistOpKind kind;
  int device_dim = -1;
  int tensor_axis = -1;
  int dest_axis = -1;    // AllToAll only
  bool fallback = false; // AllGather emitted by the deadlock fallback

  std::string to_string(const DeviceMatrix&) const {
    std::ostringstream out;
    out << topoplan::to_string(kind) << "(d_" << device_dim << ", "
        << tensor_axis;
    if (kind == RedistOpKind::kAllToAll) out << "->" << dest_axis;
    out << ")";
    return out.str();
  }
};

struct RedistPlan {
  DeviceMatrix matrix;
  std::vector<std::int64_t> shape;  // unified tensor shape
  TensorMap from_map;
  TensorMap to_map;
  std::vector<RedistOp> ops;
  std::vector<TensorMap> map_after;  // working map following each op
};

// Both layouts of one tensor re-expressed over a single device matrix and a
// single (refined) tensor shape, preserving the physical placement of every
// element.
struct UnifiedLayouts {
  DeviceMatrix matrix;
  std::vector<std::int64_t> shape;
  TensorMap from_map;
  TensorMap to_map;
};

namespace detail {

struct LayoutPart {
  std::int64_t extent = 1;
  int map = -1;
};

// Factorization of one tensor dimension into nested parts, outer first.
using DimParts = std::vector<LayoutPart>;

// Splits `extent` over a run of device dims (indices outer to inner of the
// working matrix `exts`, which is indexed by device-dim id, 0 = innermost).
inline DimParts expand_over_run(std::int64_t extent, const std::vector<int>& run,
                                const std::vector<std::int64_t>& exts) {
  DimParts parts;
  if (run.empty()) {
    parts.push_back({extent, -1});
    return parts;
  }
  std::int64_t remaining = extent;
  for (std::size_t j = 0; j + 1 < run.size(); ++j) {
    const std::int64_t d = exts[run[j]];
    if (remaining % d != 0) {
      throw Error("extent " + std::to_string(extent) +
                  " not divisible during device-matrix factorization");
    }
    parts.push_back({d, run[j]});
    remaining /= d;
  }
  if (remaining % exts[run.back()] != 0) {
    throw Error("extent " + std::to_string(extent) +
                " not divisible during device-matrix factorization");
  }
  parts.push_back({remaining, run.back()});
  return parts;
}

// Re-expresses a layout over the unified matrix produced in step 1.
// `boundaries` holds the inner-side cumulative products of the unified
// matrix; each original device dim covers a contiguous run of unified dims.
inline std::vector<DimParts> reexpress_layout(
    const TensorLayout& layout, const std::vector<std::int64_t>& unified_exts) {
  // Cumulative products of the original matrix, from the inner side.
  const int h = layout.matrix.depth();
  std::vector<std::int64_t> orig_cum(h + 1, 1);
  for (int k = 0; k < h; ++k) orig_cum[k + 1] = orig_cum[k] * layout.matrix.extent(k);
  std::vector<std::int64_t> uni_cum(unified_exts.size() + 1, 1);
  for (std::size_t k = 0; k < unified_exts.size(); ++k) {
    uni_cum[k + 1] = uni_cum[k] * unified_exts[k];
  }

  // run_of[k]: unified dims covering original dim k, ordered outer to inner.
  std::vector<std::vector<int>> run_of(h);
  for (int k = 0; k < h; ++k) {
    for (int u = static_cast<int>(unified_exts.size()) - 1; u >= 0; --u) {
      if (uni_cum[u] >= orig_cum[k] && uni_cum[u + 1] <= orig_cum[k + 1] &&
          unified_exts[u] > 1) {
        run_of[k].push_back(u);
      }
    }
    if (run_of[k].empty() && layout.matrix.extent(k) > 1) {
      throw Error("device matrices are not unifiable");
    }
  }

  std::vector<DimParts> dims(layout.spec.rank());
  for (int i = 0; i < layout.spec.rank(); ++i) {
    const std::int64_t extent = layout.spec.shape[i];
    const int m = layout.map[i];
    if (m < 0 || layout.matrix.extent(m) == 1) {
      dims[i].push_back({extent, -1});
    } else {
      dims[i] = expand_over_run(extent, run_of[m], unified_exts);
    }
  }
  return dims;
}

struct ShapeRefinement {
  bool needs_device_split = false;
  int split_dim = -1;          // device dim to split
  std::int64_t split_outer = 1;  // extent of the new outer sub-dim
};

// Refines the parts of one tensor dimension on one side against the union
// boundary set. Returns a device-split request instead when a cut lands
// strictly inside a sharded block.
inline ShapeRefinement refine_side(DimParts& parts,
                                   const std::vector<std::int64_t>& boundaries,
                                   const std::vector<std::int64_t>& exts) {
  DimParts refined;
  std::int64_t pos = 1;  // cumulative product consumed so far
  for (const LayoutPart& part : parts) {
    const std::int64_t lo = pos;
    const std::int64_t hi = pos * part.extent;
    std::vector<std::int64_t> cuts;  // interior boundaries, as factors of lo
    for (std::int64_t b : boundaries) {
      if (b > lo && b < hi) {
        if (b % lo != 0 || part.extent % (b / lo) != 0) {
          throw Error("tensor extent not divisible during shape unification");
        }
        cuts.push_back(b / lo);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    if (cuts.empty()) {
      refined.push_back(part);
    } else if (part.map < 0) {
      std::int64_t prev = 1;
      for (std::int64_t c : cuts) {
        refined.push_back({c / prev, -1});
        prev = c;
      }
      refined.push_back({part.extent / prev, -1});
    } else {
      const std::int64_t d = exts[part.map];
      const std::int64_t f1 = cuts.front();
      if (f1 % d == 0) {
        // The outer sub-part keeps the map; the rest is replicated.
        std::int64_t prev = 1;
        bool first = true;
        for (std::int64_t c : cuts) {
          refined.push_back({c / prev, first ? part.map : -1});
          prev = c;
          first = false;
        }
        refined.push_back({part.extent / prev, -1});
      } else if (d % f1 == 0 && f1 > 1) {
        ShapeRefinement split;
        split.needs_device_split = true;
        split.split_dim = part.map;
        split.split_outer = f1;
        return split;
      } else {
        throw Error("tensor extent not divisible during shape unification");
      }
    }
    pos = hi;
  }
  parts = std::move(refined);
  return {};
}

// Splits device dim `k` (extent d) into outer `f` and inner `d/f`, rewriting
// all parts and the working matrix. New inner sub-dim keeps index k, new
// outer sub-dim becomes k+1; dims above shift up by one.
inline void split_device_dim(std::vector<std::int64_t>& exts, int k,
                             std::int64_t f,
                             std::vector<std::vector<DimParts>*> sides) {
  const std::int64_t inner = exts[k] / f;
  exts[k] = inner;
  exts.insert(exts.begin() + k + 1, f);
  for (auto* side : sides) {
    for (DimParts& dim : *side) {
      DimParts rewritten;
      for (LayoutPart& part : dim) {
        if (part.map > k) {
          part.map += 1;
          rewritten.push_back(part);
        } else if (part.map == k) {
          if (part.extent % f != 0 || (part.extent / f) % inner != 0) {
            throw Error("tensor extent not divisible during device split");
          }
          rewritten.push_back({f, k + 1});
          rewritten.push_back({part.extent / f, k});
        } else {
          rewritten.push_back(part);
        }
      }
      dim = std::move(rewritten);
    }
  }
}

}  // namespace detail

// Unifies two layouts of one tensor: first the device matrices (by
// factorizing dimensions), then the tensor shape under the unified matrix.
// The physical distribution of the data is unchanged.
inline UnifiedLayouts unify_layouts(const TensorLayout& from,
                                    const TensorLayout& to) {
  if (from.spec.shape != to.spec.shape) {
    throw Error("unify_layouts: layouts describe different tensor shapes");
  }
  if (from.matrix.total() != to.matrix.total()) {
    throw Error("unify_layouts: incompatible total device counts (" +
                std::to_string(from.matrix.total()) + " vs " +
                std::to_string(to.matrix.total()) + ")");
  }

  // Step 1: unified device matrix = union of inner-side cumulative products.
  std::vector<std::int64_t> cums;
  auto add_cums = [&cums](const DeviceMatrix& m) {
    std::int64_t c = 1;
    for (int k = 0; k < m.depth(); ++k) {
      c *= m.extent(k);
      if (c > 1) cums.push_back(c);
    }
  };
  add_cums(from.matrix);
  add_cums(to.matrix);
  std::sort(cums.begin(), cums.end());
  cums.erase(std::unique(cums.begin(), cums.end()), cums.end());
  std::vector<std::int64_t> exts;  // indexed by device dim, 0 = innermost
  std::int64_t prev = 1;
  for (std::int64_t c : cums) {
    if (c % prev != 0) throw Error("device matrices are not unifiable");
    exts.push_back(c / prev);
    prev = c;
  }

  std::vector<detail::DimParts> from_dims = detail::reexpress_layout(from, exts);
  std::vector<detail::DimParts> to_dims = detail::reexpress_layout(to, exts);

  // Step 2: unify the tensor shape, splitting device dims further when a
  // refinement boundary lands inside a sharded block.
  const int rank = from.spec.rank();
  int rounds = 0;
  for (;;) {
    if (++rounds > 64) throw Error("unify_layouts failed to converge");
    bool restarted = false;
    for (int i = 0; i < rank && !restarted; ++i) {
      std::vector<std::int64_t> boundaries;
      auto collect = [&boundaries](const detail::DimParts& parts) {
        std::int64_t c = 1;
        for (const auto& part : parts) {
          c *= part.extent;
          boundaries.push_back(c);
        }
      };
      collect(from_dims[i]);
      collect(to_dims[i]);
      std::sort(boundaries.begin(), boundaries.end());
      boundaries.erase(std::unique(boundaries.begin(), boundaries.end()),
                       boundaries.end());

      for (auto* side : {&from_dims, &to_dims}) {
        detail::ShapeRefinement r =
            detail::refine_side((*side)[i], boundaries, exts);
        if (r.needs_device_split) {
          detail::split_device_dim(exts, r.split_dim, r.split_outer,
                                   {&from_dims, &to_dims});
          restarted = true;
          break;
        }
      }
    }
    if (!restarted) break;
  }

  UnifiedLayouts result;
  result.matrix.dims.assign(exts.rbegin(), exts.rend());
  for (int i = 0; i < rank; ++i) {
    if (from_dims[i].size() != to_dims[i].size()) {
      throw Error("unify_layouts: internal refinement mismatch");
    }
    for (std::size_t j = 0; j < from_dims[i].size(); ++j) {
      if (from_dims[i][j].extent != to_dims[i][j].extent) {
        throw Error("unify_layouts: internal refinement mismatch");
      }
      result.shape.push_back(from_dims[i][j].extent);
      result.from_map.entries.push_back(from_dims[i][j].map);
      result.to_map.entries.push_back(to_dims[i][j].map);
    }
  }
  return result;
}

namespace detail {

inline bool infer_slice(const DeviceMatrix& matrix, TensorMap& working,
                        const TensorMap& to, std::vector<RedistOp>& ops,
                        std::vector<TensorMap>& trace) {
  bool any = false;
  for (int i = 0; i < working.rank(); ++i) {
    const int k = to[i];
    if (working[i] == -1 && k >= 0 && !working.contains(k)) {
      ops.push_back({RedistOpKind::kSlice, k, i, -1, false});
      working.entries[i] = k;
      trace.push_back(working);
      any = true;
    }
  }
  (void)matrix;
  return any;
}

inline bool infer_all2all(const DeviceMatrix& matrix, TensorMap& working,
                          const TensorMap& to, std::vector<RedistOp>& ops,
                          std::vector<TensorMap>& trace) {
  bool any = false;
  for (int i = 0; i < working.rank(); ++i) {
    const int k = working[i];
    if (k < 0 || to[i] == k) continue;
    const int j = to.axis_of(k);
    if (j >= 0 && j != i && working[j] == -1) {
      ops.push_back({RedistOpKind::kAllToAll, k, i, j, false});
      working.entries[i] = -1;
      working.entries[j] = k;
      trace.push_back(working);
      any = true;
    }
  }
  (void)matrix;
  return any;
}

inline bool infer_allgather(const DeviceMatrix& matrix, TensorMap& working,
                            const TensorMap& to, std::vector<RedistOp>& ops,
                            std::vector<TensorMap>& trace) {
  for (int i = 0; i < working.rank(); ++i) {
    const int k = working[i];
    if (k >= 0 && to[i] == -1) {
      ops.push_back({RedistOpKind::kAllGather, k, i, -1, false});
      working.entries[i] = -1;
      trace.push_back(working);
      return true;
    }
  }
  (void)matrix;
  return false;
}

inline void allgather_first_undone_dim(const DeviceMatrix& matrix,
                                       TensorMap& working, const TensorMap& to,
                                       std::vector<RedistOp>& ops,
                                       std::vector<TensorMap>& trace) {
  for (int i = 0; i < working.rank(); ++i) {
    if (working[i] != to[i] && working[i] >= 0) {
      ops.push_back({RedistOpKind::kAllGather, working[i], i, -1, true});
      working.entries[i] = -1;
      trace.push_back(working);
      return;
    }
  }
  (void)matrix;
  throw Error("redistribution deadlock: no gatherable axis");
}

inline RedistPlan run_inference(const DeviceMatrix& matrix,
                                const std::vector<std::int64_t>& shape,
                                const TensorMap& from, const TensorMap& to,
                                bool enable_all2all) {
  RedistPlan plan;
  plan.matrix = matrix;
  plan.shape = shape;
  plan.from_map = from;
  plan.to_map = to;

  TensorMap working = from;
  int guard = (matrix.depth() + 1) * (from.rank() + 1) * 4 + 16;
  while (!(working == to)) {
    if (--guard < 0) throw Error("redistribution failed to terminate");
    // Slices and AllToAlls enable each other; loop until neither advances.
    bool progress = true;
    while (progress) {
      progress = infer_slice(matrix, working, to, plan.ops, plan.map_after);
      if (enable_all2all) {
        bool a2a_flag = true;
        while (a2a_flag) {
          a2a_flag = infer_all2all(matrix, working, to, plan.ops, plan.map_after);
          progress |= a2a_flag;
        }
      }
    }
    if (working == to) break;
    if (!infer_allgather(matrix, working, to, plan.ops, plan.map_after)) {
      allgather_first_undone_dim(matrix, working, to, plan.ops, plan.map_after);
    }
  }
  return plan;
}

}  // namespace detail

// The stages correspond to cumulative optimization levels of the sequence:
// naive gather-everything, gathers restricted to the necessary axes,
// dependent slices hoisted before gathers, and gather+slice pairs on one
// device dim fused into AllToAll.
enum class RedistStage { kNaive, kRemove, kRearrange, kOptimized };

inline RedistPlan infer_redistribution_stage(const DeviceMatrix& matrix,
                                             const std::vector<std::int64_t>& shape,
                                             const TensorMap& from,
                                             const TensorMap& to,
                                             RedistStage stage) {
  if (from.rank() != to.rank()) {
    throw Error("redistribution maps have different ranks");
  }
  if (stage == RedistStage::kRearrange || stage == RedistStage::kOptimized) {
    return detail::run_inference(matrix, shape, from, to,
                                 stage == RedistStage::kOptimized);
  }
  RedistPlan plan;
  plan.matrix = matrix;
  plan.shape = shape;
  plan.from_map = from;
  plan.to_map = to;
  TensorMap working = from;
  for (int i = 0; i < working.rank(); ++i) {
    const bool gather = stage == RedistStage::kNaive
                            ? working[i] >= 0
                            : working[i] >= 0 && working[i] != to[i];
    if (gather) {
      plan.ops.push_back({RedistOpKind::kAllGather, working[i], i, -1, false});
      working.entries[i] = -1;
      plan.map_after.push_back(working);
    }
  }
  for (int i = 0; i < working.rank(); ++i) {
    if (to[i] >= 0 && working[i] != to[i]) {
      plan.ops.push_back({RedistOpKind::kSlice, to[i], i, -1, false});
      working.entries[i] = to[i];
      plan.map_after.push_back(working);
    }
  }
  if (!(working == to)) throw Error("naive redistribution failed");
  return plan;
}

// Optimized redistribution between two tensor maps over a shared matrix.
inline RedistPlan infer_redistribution(const DeviceMatrix& matrix,
                                       const std::vector<std::int64_t>& shape,
                                       const TensorMap& from,
                                       const TensorMap& to) {
  return infer_redistribution_stage(matrix, shape, from, to,
                                    RedistStage::kOptimized);
}

// Per-device shard bytes under `map`, for a tensor of `tensor_bytes` total.
inline double shard_bytes_under(const DeviceMatrix& matrix, const TensorMap& map,
                                double tensor_bytes) {
  double divisor = 1;
  for (int m : map.entries) {
    if (m >= 0) divisor *= static_cast<double>(matrix.extent(m));
  }
  return tensor_bytes / divisor;
}

// Communication volume of one redistribution step, given the per-device
// shard size at that point in the sequence.
inline double redist_op_volume(const RedistOp& op, const DeviceMatrix& matrix,
                               double shard_bytes) {
  const double d = static_cast<double>(matrix.extent(op.device_dim));
  switch (op.kind) {
    case RedistOpKind::kSlice: return 0;
    case RedistOpKind::kAllGather: return (d - 1) * shard_bytes;
    case RedistOpKind::kAllToAll: return (d - 1) / d * shard_bytes;
  }
  return 0;
}

// Total communication volume of a plan for a tensor of `tensor_bytes`.
inline double plan_volume(const RedistPlan& plan, double tensor_bytes) {
  double volume = 0;
  TensorMap working = plan.from_map;
  for (const RedistOp& op : plan.ops) {
    const double shard = shard_bytes_under(plan.matrix, working, tensor_bytes);
    volume += redist_op_volume(op, plan.matrix, shard);
    switch (op.kind) {
      case RedistOpKind::kSlice:
        working.entries[op.tensor_axis] = op.device_dim;
        break;
      case RedistOpKind::kAllGather:
        working.entries[op.tensor_axis] = -1;
        break;
      case RedistOpKind::kAllToAll:
        working.entries[op.tensor_axis] = -1;
        working.entries[op.dest_axis] = op.device_dim;
        break;
    }
  }
  return volume;
}

// Convenience wrapper: unify two layouts of the same tensor, then infer the
// optimized redistribution between them.
inline RedistPlan redistribute(const TensorLayout& from, const TensorLayout& to) {
  UnifiedLayouts unified = unify_layouts(from, to);
  return infer_redistribution(unified.matrix, unified.shape, unified.from_map,
                              unified.to_map);
}

}  // namespace topoplan

#endif  // TOPOPLAN_REDISTRIBUTION_HPP_
