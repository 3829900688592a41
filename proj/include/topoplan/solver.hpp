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

#ifndef TOPOPLAN_SOLVER_HPP_
#define TOPOPLAN_SOLVER_HPP_

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "topoplan/aux_graph.hpp"

namespace topoplan {

// 0-1 ILP over strategy-selection variables X and edge-selection variables B:
//   min  sum B_ij C_ij           (+ folded virtual-edge costs on X)
//   s.t. sum_{a} X_{v_a} = 1                       per operator v
//        sum_in  B = X * in_degree(v)              per aux node
//        sum_out B = X * out_degree(v)             per aux node
//        sum B_ij M_ij < Device_Memory             (emitted as <= bound - 1)
//        X, B binary
// Virtual source edges are substituted out (their B equals the target X), so
// their cost and memory coefficients appear on the X variables.
struct IlpProblem {
  struct Var {
    enum class Kind { kNode, kEdge };
    Kind kind;
    std::string name;
    int op_index = -1;
    int strategy_index = -1;
    int edge_id = -1;  // aux edge id for kEdge
  };
  struct Row {
    std::string name;
    std::vector<std::pair<int, double>> terms;  // (var id, coefficient)
    bool is_equality = true;                    // false: <= rhs
    double rhs = 0;
  };

  const AuxiliaryGraph* aux = nullptr;
  CostMode mode = CostMode::kTopology;
  double memory_bound = 0;  // strict: feasible assignments satisfy sum < bound

  std::vector<Var> vars;
  std::vector<double> objective;  // per var
  std::vector<Row> rows;
  std::vector<int> x_var_of_node;  // aux node id -> X var id
  std::vector<int> b_var_of_edge;  // aux edge id -> B var id
};

inline IlpProblem formulate(const AuxiliaryGraph& aux, CostMode mode,
                            double device_memory) {
  IlpProblem problem;
  problem.aux = &aux;
  problem.mode = mode;
  problem.memory_bound = device_memory;

  problem.x_var_of_node.assign(aux.nodes.size(), -1);
  for (std::size_t op = 0; op < aux.nodes_of_op.size(); ++op) {
    for (int node_id : aux.nodes_of_op[op]) {
      IlpProblem::Var var;
      var.kind = IlpProblem::Var::Kind::kNode;
      var.op_index = static_cast<int>(op);
      var.strategy_index = aux.nodes[node_id].strategy_index;
      var.name = "x" + std::to_string(op) + "_" +
                 std::to_string(var.strategy_index);
      problem.x_var_of_node[node_id] = static_cast<int>(problem.vars.size());
      problem.vars.push_back(std::move(var));
    }
  }
  problem.b_var_of_edge.assign(aux.edges.size(), -1);
  for (std::size_t e = 0; e < aux.edges.size(); ++e) {
    const AuxEdge& edge = aux.edges[e];
    IlpProblem::Var var;
    var.kind = IlpProblem::Var::Kind::kEdge;
    var.edge_id = static_cast<int>(e);
    var.name = "b" + std::to_string(edge.original_edge) + "_" +
               std::to_string(aux.nodes[edge.from_node].strategy_index) + "_" +
               std::to_string(aux.nodes[edge.to_node].strategy_index);
    problem.b_var_of_edge[e] = static_cast<int>(problem.vars.size());
    problem.vars.push_back(std::move(var));
  }

  problem.objective.assign(problem.vars.size(), 0.0);
  for (std::size_t e = 0; e < aux.edges.size(); ++e) {
    problem.objective[problem.b_var_of_edge[e]] =
        aux.edge_weight_by_mode(aux.edges[e], mode);
  }
  for (const VirtualEdge& ve : aux.virtual_edges) {
    problem.objective[problem.x_var_of_node[ve.to_node]] =
        aux.virtual_weight_by_mode(ve, mode);
  }

  for (std::size_t op = 0; op < aux.nodes_of_op.size(); ++op) {
    IlpProblem::Row row;
    row.name = "onestrat" + std::to_string(op);
    for (int node_id : aux.nodes_of_op[op]) {
      row.terms.push_back({problem.x_var_of_node[node_id], 1.0});
    }
    row.is_equality = true;
    row.rhs = 1.0;
    problem.rows.push_back(std::move(row));
  }

  std::vector<std::vector<int>> in_edges_of_node(aux.nodes.size());
  std::vector<std::vector<int>> out_edges_of_node(aux.nodes.size());
  for (std::size_t e = 0; e < aux.edges.size(); ++e) {
    in_edges_of_node[aux.edges[e].to_node].push_back(static_cast<int>(e));
    out_edges_of_node[aux.edges[e].from_node].push_back(static_cast<int>(e));
  }
  for (std::size_t node_id = 0; node_id < aux.nodes.size(); ++node_id) {
    const int op = aux.nodes[node_id].op_index;
    if (aux.in_degree_of[op] > 0) {
      IlpProblem::Row row;
      row.name = "indeg" + std::to_string(node_id);
      for (int e : in_edges_of_node[node_id]) {
        row.terms.push_back({problem.b_var_of_edge[e], 1.0});
      }
      row.terms.push_back({problem.x_var_of_node[node_id],
                           -static_cast<double>(aux.in_degree_of[op])});
      row.is_equality = true;
      row.rhs = 0.0;
      problem.rows.push_back(std::move(row));
    }
    if (aux.out_degree_of[op] > 0) {
      IlpProblem::Row row;
      row.name = "outdeg" + std::to_string(node_id);
      for (int e : out_edges_of_node[node_id]) {
        row.terms.push_back({problem.b_var_of_edge[e], 1.0});
      }
      row.terms.push_back({problem.x_var_of_node[node_id],
                           -static_cast<double>(aux.out_degree_of[op])});
      row.is_equality = true;
      row.rhs = 0.0;
      problem.rows.push_back(std::move(row));
    }
  }

  IlpProblem::Row mem_row;
  mem_row.name = "mem";
  for (std::size_t e = 0; e < aux.edges.size(); ++e) {
    if (aux.edges[e].memory_bytes != 0) {
      mem_row.terms.push_back(
          {problem.b_var_of_edge[e], aux.edges[e].memory_bytes});
    }
  }
  for (const VirtualEdge& ve : aux.virtual_edges) {
    if (ve.memory_bytes != 0) {
      mem_row.terms.push_back(
          {problem.x_var_of_node[ve.to_node], ve.memory_bytes});
    }
  }
  mem_row.is_equality = false;
  mem_row.rhs = device_memory - 1.0;
  problem.rows.push_back(std::move(mem_row));

  return problem;
}

struct PlanSolution {
  bool feasible = false;
  bool optimal = false;
  std::vector<int> strategy_per_op;  // per operator index
  double objective = 0;
  double memory_bytes = 0;
  double root_lower_bound = 0;
  std::int64_t nodes_explored = 0;
  double gap = 0;  // objective - best known lower bound, when not optimal
};

struct SolveOptions {
  int threads = 1;
  std::int64_t max_nodes = 200'000'000;
};

namespace detail {

// Shared precomputation for the branch-and-bound: per-edge minima, minima
// conditioned on the producer's strategy, per-source node minima, and the
// suffix memory floor, all keyed to the topological assignment order.
struct SearchContext {
  const AuxiliaryGraph* aux;
  CostMode mode;
  double memory_bound;
  std::vector<int> order;              // operator indices, topo order
  std::vector<int> pos_of_op;          // inverse of order
  std::vector<std::vector<int>> in_edges_of;  // per op, ascending edge index
  std::vector<std::vector<double>> cond_min;  // per edge, per u-strategy
  std::vector<double> pair_min;               // per edge
  std::vector<double> source_min;             // per op (sources only)
  std::vector<double> suffix_mem_min;         // per position
  std::vector<double> virtual_min_mem;        // per op
  double root_bound = 0;

  double edge_w(int e, int su, int sw) const {
    return aux->edge_weight_by_mode(aux->edges[aux->edge_id(e, su, sw)], mode);
  }
};

inline SearchContext make_context(const AuxiliaryGraph& aux, CostMode mode,
                                  double memory_bound) {
  SearchContext ctx;
  ctx.aux = &aux;
  ctx.mode = mode;
  ctx.memory_bound = memory_bound;
  ctx.order = aux.topo_order;
  const int op_count = static_cast<int>(aux.graph.operators.size());
  ctx.pos_of_op.assign(op_count, -1);
  for (std::size_t t = 0; t < ctx.order.size(); ++t) {
    ctx.pos_of_op[ctx.order[t]] = static_cast<int>(t);
  }
  ctx.in_edges_of.resize(op_count);
  for (std::size_t e = 0; e < aux.graph.edges.size(); ++e) {
    ctx.in_edges_of[aux.graph.find_op(aux.graph.edges[e].to)].push_back(
        static_cast<int>(e));
  }

  const std::size_t edge_count = aux.graph.edges.size();
  ctx.cond_min.resize(edge_count);
  ctx.pair_min.assign(edge_count, 0.0);
  for (std::size_t e = 0; e < edge_count; ++e) {
    const int u = aux.graph.find_op(aux.graph.edges[e].from);
    const int w = aux.graph.find_op(aux.graph.edges[e].to);
    const int su_count = aux.strategies_of(u);
    const int sw_count = aux.strategies_of(w);
    ctx.cond_min[e].assign(su_count, std::numeric_limits<double>::infinity());
    for (int su = 0; su < su_count; ++su) {
      for (int sw = 0; sw < sw_count; ++sw) {
        ctx.cond_min[e][su] = std::min(ctx.cond_min[e][su], ctx.edge_w(
            static_cast<int>(e), su, sw));
      }
    }
    ctx.pair_min[e] = *std::min_element(ctx.cond_min[e].begin(),
                                        ctx.cond_min[e].end());
  }

  ctx.source_min.assign(op_count, 0.0);
  ctx.virtual_min_mem.assign(op_count, 0.0);
  for (int op = 0; op < op_count; ++op) {
    if (aux.in_degree_of[op] != 0) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int node_id : aux.nodes_of_op[op]) {
      best = std::min(best, aux.virtual_weight_by_mode(
                                aux.virtual_edges[aux.virtual_edge_of_node[node_id]],
                                ctx.mode));
    }
    ctx.source_min[op] = best;
  }
  for (int op = 0; op < op_count; ++op) {
    double best = std::numeric_limits<double>::infinity();
    for (int node_id : aux.nodes_of_op[op]) {
      best = std::min(best, aux.nodes[node_id].memory_bytes);
    }
    ctx.virtual_min_mem[op] = best;
  }
  ctx.suffix_mem_min.assign(ctx.order.size() + 1, 0.0);
  for (int t = static_cast<int>(ctx.order.size()) - 1; t >= 0; --t) {
    ctx.suffix_mem_min[t] =
        ctx.suffix_mem_min[t + 1] + ctx.virtual_min_mem[ctx.order[t]];
  }

  double root = 0;
  for (std::size_t e = 0; e < edge_count; ++e) root += ctx.pair_min[e];
  for (int op = 0; op < op_count; ++op) {
    if (aux.in_degree_of[op] == 0) root += ctx.source_min[op];
  }
  ctx.root_bound = root;
  return ctx;
}

// Completion bound for the prefix order[0..t]: exact cost so far, plus every
// unresolved edge at its minimum (conditioned on an assigned producer where
// possible), plus unassigned sources at their minima. Admissible.
inline double future_bound(const SearchContext& ctx,
                           const std::vector<int>& assignment, int next_pos) {
  const AuxiliaryGraph& aux = *ctx.aux;
  double bound = 0;
  for (std::size_t e = 0; e < aux.graph.edges.size(); ++e) {
    const int u = aux.graph.find_op(aux.graph.edges[e].from);
    const int w = aux.graph.find_op(aux.graph.edges[e].to);
    if (ctx.pos_of_op[w] < next_pos) continue;  // already exact
    if (ctx.pos_of_op[u] < next_pos) {
      bound += ctx.cond_min[e][assignment[u]];
    } else {
      bound += ctx.pair_min[e];
    }
  }
  for (std::size_t t = next_pos; t < ctx.order.size(); ++t) {
    const int op = ctx.order[t];
    if (aux.in_degree_of[op] == 0) bound += ctx.source_min[op];
  }
  return bound;
}

struct Incumbent {
  bool found = false;
  double cost = std::numeric_limits<double>::infinity();
  double memory = 0;
  std::vector<int> assignment;
};

struct WorkerState {
  Incumbent incumbent;
  std::int64_t nodes = 0;
};

// Depth-first search in strategy-index order. Assignments are compared
// lexicographically along the topological order; only strict improvements
// replace the incumbent, so the first optimum found in DFS order (the
// lexicographically smallest) is kept.
inline void dfs(const SearchContext& ctx, std::vector<int>& assignment, int pos,
                double partial_cost, double partial_mem, WorkerState& state,
                std::atomic<double>* shared_best, std::atomic<bool>* stop,
                std::int64_t max_nodes, std::atomic<std::int64_t>* total_nodes,
                int fixed_first_strategy) {
  const AuxiliaryGraph& aux = *ctx.aux;
  if (pos == static_cast<int>(ctx.order.size())) {
    if (partial_mem < ctx.memory_bound || ctx.order.empty()) {
      if (partial_cost < state.incumbent.cost) {
        state.incumbent.found = true;
        state.incumbent.cost = partial_cost;
        state.incumbent.memory = partial_mem;
        state.incumbent.assignment = assignment;
        if (shared_best) {
          double current = shared_best->load();
          while (partial_cost < current &&
                 !shared_best->compare_exchange_weak(current, partial_cost)) {
          }
        }
      }
    }
    return;
  }
  const int op = ctx.order[pos];
  const int strategies = aux.strategies_of(op);
  const int s_begin = (pos == 0 && fixed_first_strategy >= 0)
                          ? fixed_first_strategy
                          : 0;
  const int s_end = (pos == 0 && fixed_first_strategy >= 0)
                        ? fixed_first_strategy + 1
                        : strategies;
  for (int s = s_begin; s < s_end; ++s) {
    if (stop && stop->load(std::memory_order_relaxed)) return;
    ++state.nodes;
    if (total_nodes) {
      if (total_nodes->fetch_add(1, std::memory_order_relaxed) >= max_nodes) {
        if (stop) stop->store(true, std::memory_order_relaxed);
        return;
      }
    }

    assignment[op] = s;
    const int node_id = aux.nodes_of_op[op][s];
    double cost = partial_cost;
    double mem = partial_mem;
    if (aux.in_degree_of[op] == 0) {
      const VirtualEdge& ve = aux.virtual_edges[aux.virtual_edge_of_node[node_id]];
      cost += aux.virtual_weight_by_mode(ve, ctx.mode);
      mem += ve.memory_bytes;
    }
    for (int e : ctx.in_edges_of[op]) {
      const int u = aux.graph.find_op(aux.graph.edges[e].from);
      const AuxEdge& edge = aux.edges[aux.edge_id(e, assignment[u], s)];
      cost += aux.edge_weight_by_mode(edge, ctx.mode);
      mem += edge.memory_bytes;
    }

    // Slack keeps float reordering from cutting a feasible completion; the
    // exact strict check happens at the leaf.
    const double mem_slack = ctx.memory_bound * 1e-12 + 1e-6;
    if (mem + ctx.suffix_mem_min[pos + 1] > ctx.memory_bound + mem_slack) {
      assignment[op] = -1;
      continue;
    }

    const double lb = cost + future_bound(ctx, assignment, pos + 1);
    double best_known = state.incumbent.cost;
    if (shared_best) best_known = std::min(best_known, shared_best->load());
    const double cost_slack = 1e-12 * (std::abs(best_known) + 1.0);
    if (state.incumbent.found || shared_best) {
      if (lb > best_known + cost_slack) {
        assignment[op] = -1;
        continue;
      }
    }

    dfs(ctx, assignment, pos + 1, cost, mem, state, shared_best, stop,
        max_nodes, total_nodes, fixed_first_strategy);
    assignment[op] = -1;
  }
}

}  // namespace detail

// Exact branch-and-bound over the per-operator strategy choices. Returns the
// provably optimal selection, deterministically: among equal-cost optima the
// lexicographically smallest along the topological assignment order wins,
// independent of the thread count.
inline PlanSolution solve(const IlpProblem& problem,
                          const SolveOptions& options = {}) {
  const AuxiliaryGraph& aux = *problem.aux;
  const int op_count = static_cast<int>(aux.graph.operators.size());
  PlanSolution solution;

  detail::SearchContext ctx =
      detail::make_context(aux, problem.mode, problem.memory_bound);
  solution.root_lower_bound = ctx.root_bound;

  if (op_count == 0) {
    solution.feasible = true;
    solution.optimal = true;
    return solution;
  }

  std::atomic<bool> stop{false};
  std::atomic<std::int64_t> total_nodes{0};

  const int first_op = ctx.order[0];
  const int first_strategies = aux.strategies_of(first_op);
  int threads = std::max(1, options.threads);
  threads = std::min(threads, first_strategies);

  std::vector<detail::WorkerState> states(threads);
  if (threads == 1) {
    std::vector<int> assignment(op_count, -1);
    detail::dfs(ctx, assignment, 0, 0.0, 0.0, states[0], nullptr, &stop,
                options.max_nodes, &total_nodes, -1);
  } else {
    std::atomic<double> shared_best{std::numeric_limits<double>::infinity()};
    std::vector<std::thread> workers;
    for (int t = 0; t < threads; ++t) {
      workers.emplace_back([&, t]() {
        std::vector<int> assignment(op_count, -1);
        for (int s = t; s < first_strategies; s += threads) {
          detail::dfs(ctx, assignment, 0, 0.0, 0.0, states[t], &shared_best,
                      &stop, options.max_nodes, &total_nodes, s);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  // Deterministic merge: smallest cost, then lexicographically smallest
  // assignment along the topological order.
  detail::Incumbent best;
  for (const auto& state : states) {
    solution.nodes_explored += state.nodes;
    if (!state.incumbent.found) continue;
    bool better = false;
    if (!best.found || state.incumbent.cost < best.cost) {
      better = true;
    } else if (state.incumbent.cost == best.cost) {
      for (int t = 0; t < op_count; ++t) {
        const int op = ctx.order[t];
        if (state.incumbent.assignment[op] != best.assignment[op]) {
          better = state.incumbent.assignment[op] < best.assignment[op];
          break;
        }
      }
    }
    if (better) best = state.incumbent;
  }

  solution.feasible = best.found;
  solution.optimal = best.found && !stop.load();
  if (best.found) {
    solution.strategy_per_op = best.assignment;
    solution.objective = best.cost;
    solution.memory_bytes = best.memory;
    if (!solution.optimal) {
      solution.gap = best.cost - ctx.root_bound;
    }
  }
  return solution;
}

// Exhaustive oracle. Enumerates assignments in the same lexicographic order
// as the branch-and-bound and applies the same strict-improvement rule, so
// outputs are comparable bit for bit.
inline PlanSolution brute_force_solve(const AuxiliaryGraph& aux, CostMode mode,
                                      double device_memory,
                                      std::int64_t max_assignments = 10'000'000) {
  const int op_count = static_cast<int>(aux.graph.operators.size());
  PlanSolution solution;
  double total = 1;
  for (int op = 0; op < op_count; ++op) total *= aux.strategies_of(op);
  if (total > static_cast<double>(max_assignments)) {
    throw Error("brute_force_solve: instance too large (" +
                std::to_string(total) + " assignments)");
  }
  std::vector<int> order = aux.topo_order;
  std::vector<int> assignment(op_count, 0);
  solution.root_lower_bound = 0;

  detail::Incumbent best;
  std::int64_t count = 0;
  for (;;) {
    ++count;
    AssignmentPrice price = price_assignment(aux, assignment, mode);
    if (price.memory_bytes < device_memory || op_count == 0) {
      if (price.cost < best.cost) {
        best.found = true;
        best.cost = price.cost;
        best.memory = price.memory_bytes;
        best.assignment = assignment;
      }
    }
    // Advance odometer along the topological order, last position fastest.
    int t = op_count - 1;
    for (; t >= 0; --t) {
      const int op = order[t];
      if (++assignment[op] < aux.strategies_of(op)) break;
      assignment[op] = 0;
    }
    if (t < 0) break;
  }
  solution.nodes_explored = count;
  solution.feasible = best.found;
  solution.optimal = best.found;
  if (best.found) {
    solution.strategy_per_op = best.assignment;
    solution.objective = best.cost;
    solution.memory_bytes = best.memory;
  }
  return solution;
}

namespace detail {

inline std::string format_coeff(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

inline void append_terms(std::ostringstream& out,
                         const std::vector<std::pair<int, double>>& terms,
                         const std::vector<IlpProblem::Var>& vars) {
  bool first = true;
  for (const auto& [var, coeff] : terms) {
    if (coeff == 0) continue;
    if (first) {
      if (coeff < 0) out << "- ";
      first = false;
    } else {
      out << (coeff < 0 ? " - " : " + ");
    }
    const double mag = std::abs(coeff);
    if (mag != 1.0) out << format_coeff(mag) << " ";
    out << vars[var].name;
  }
  if (first) out << "0 " << (vars.empty() ? "x" : vars[0].name);
}

}  // namespace detail

// Serializes the problem in CPLEX LP text format, bit-stable for identical
// inputs. Feasibility is the consumer's concern; infeasible problems export
// unchanged.
inline std::string export_lp(const IlpProblem& problem) {
  std::ostringstream out;
  out << "\\ topoplan ILP export (mode: " << to_string(problem.mode) << ")\n";
  out << "Minimize\n obj: ";
  std::vector<std::pair<int, double>> obj_terms;
  for (std::size_t v = 0; v < problem.vars.size(); ++v) {
    if (problem.objective[v] != 0) {
      obj_terms.push_back({static_cast<int>(v), problem.objective[v]});
    }
  }
  detail::append_terms(out, obj_terms, problem.vars);
  out << "\nSubject To\n";
  for (const auto& row : problem.rows) {
    out << " " << row.name << ": ";
    detail::append_terms(out, row.terms, problem.vars);
    out << (row.is_equality ? " = " : " <= ") << detail::format_coeff(row.rhs)
        << "\n";
  }
  out << "Binaries\n";
  for (const auto& var : problem.vars) out << " " << var.name << "\n";
  out << "End\n";
  return out.str();
}

}  // namespace topoplan

#endif  // TOPOPLAN_SOLVER_HPP_
