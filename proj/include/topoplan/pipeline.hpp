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

#ifndef TOPOPLAN_PIPELINE_HPP_
#define TOPOPLAN_PIPELINE_HPP_

#include <sstream>
#include <string>
#include <vector>

#include "topoplan/aux_graph.hpp"
#include "topoplan/graph.hpp"
#include "topoplan/io.hpp"
#include "topoplan/solver.hpp"
#include "topoplan/validation.hpp"

namespace topoplan {

// Raised when graph or topology validation fails; carries the full report.
class ValidationFailure : public Error {
 public:
  explicit ValidationFailure(ValidationReport report)
      : Error("validation failed:\n" + report.to_string()),
        report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

struct PlanRequest {
  ComputationGraph graph;
  ClusterTopology topo;
  CostMode mode = CostMode::kTopology;
  double memory_override = 0;  // bytes; <= 0 uses topo.device_memory
  SolveOptions solver;
};

struct OpChoice {
  std::string op_id;
  int strategy_index = -1;
  OperatorStrategy strategy;
};

struct PlanReport {
  CostMode mode = CostMode::kTopology;
  bool feasible = false;
  bool optimal = false;
  std::vector<OpChoice> choices;          // operator order of the graph
  double objective = 0;                   // seconds or bytes, per mode
  double topology_cost_seconds = 0;       // chosen plan, topology pricing
  double communication_volume_bytes = 0;  // chosen plan, volume pricing
  double memory_bytes = 0;
  double memory_bound = 0;
  std::int64_t aux_nodes = 0;
  std::int64_t aux_edges = 0;
  double root_lower_bound = 0;
  std::int64_t nodes_explored = 0;
};

struct CompareReport {
  PlanReport volume_plan;
  PlanReport topology_plan;
  double ratio = 1.0;  // topo cost of topology plan / topo cost of volume plan
};

inline void validate_or_throw(const ComputationGraph& graph,
                              const ClusterTopology& topo) {
  ValidationReport report = validate_graph(graph);
  const ValidationReport topo_report = validate_topology(topo);
  for (const auto& issue : topo_report.issues()) {
    if (issue.severity == Issue::Severity::kError) {
      report.add_error(issue.code, issue.message);
    } else {
      report.add_warning(issue.code, issue.message);
    }
  }
  if (!report.ok()) throw ValidationFailure(std::move(report));
}

namespace detail {

inline PlanReport report_from_solution(const AuxiliaryGraph& aux, CostMode mode,
                                       double memory_bound,
                                       const PlanSolution& solution) {
  PlanReport report;
  report.mode = mode;
  report.feasible = solution.feasible;
  report.optimal = solution.optimal;
  report.memory_bound = memory_bound;
  report.aux_nodes = static_cast<std::int64_t>(aux.nodes.size());
  report.aux_edges = static_cast<std::int64_t>(aux.edges.size());
  report.root_lower_bound = solution.root_lower_bound;
  report.nodes_explored = solution.nodes_explored;
  if (!solution.feasible) return report;

  report.objective = solution.objective;
  report.memory_bytes = solution.memory_bytes;
  for (std::size_t op = 0; op < aux.graph.operators.size(); ++op) {
    OpChoice choice;
    choice.op_id = aux.graph.operators[op].id;
    choice.strategy_index = solution.strategy_per_op[op];
    choice.strategy =
        aux.nodes[aux.nodes_of_op[op][choice.strategy_index]].strategy;
    report.choices.push_back(std::move(choice));
  }
  report.topology_cost_seconds =
      price_assignment(aux, solution.strategy_per_op, CostMode::kTopology).cost;
  report.communication_volume_bytes =
      price_assignment(aux, solution.strategy_per_op, CostMode::kVolume).cost;
  return report;
}

}  // namespace detail

inline double effective_memory_bound(const PlanRequest& request) {
  return request.memory_override > 0 ? request.memory_override
                                     : request.topo.device_memory;
}

inline PlanReport run_plan_on_aux(const AuxiliaryGraph& aux, CostMode mode,
                                  double memory_bound,
                                  const SolveOptions& options) {
  IlpProblem problem = formulate(aux, mode, memory_bound);
  PlanSolution solution = solve(problem, options);
  return detail::report_from_solution(aux, mode, memory_bound, solution);
}

inline PlanReport run_plan(const PlanRequest& request) {
  validate_or_throw(request.graph, request.topo);
  AuxiliaryGraph aux =
      build_auxiliary_graph(request.graph, request.topo, request.mode);
  return run_plan_on_aux(aux, request.mode, effective_memory_bound(request),
                         request.solver);
}

// Solves both modes over one auxiliary graph and prices both winning plans
// with the topology-aware model. The volume-mode objective is reported on
// its own and never enters the ratio.
inline CompareReport run_compare(const PlanRequest& request) {
  validate_or_throw(request.graph, request.topo);
  AuxiliaryGraph aux =
      build_auxiliary_graph(request.graph, request.topo, request.mode);
  const double memory_bound = effective_memory_bound(request);

  CompareReport report;
  report.volume_plan =
      run_plan_on_aux(aux, CostMode::kVolume, memory_bound, request.solver);
  report.topology_plan =
      run_plan_on_aux(aux, CostMode::kTopology, memory_bound, request.solver);

  const double denom = report.volume_plan.topology_cost_seconds;
  const double numer = report.topology_plan.topology_cost_seconds;
  report.ratio = denom == 0 ? 1.0 : numer / denom;
  return report;
}

inline Json plan_report_to_json(const ComputationGraph& graph,
                                const PlanReport& report) {
  Json strategies = Json::array();
  for (const OpChoice& choice : report.choices) {
    const int op = graph.find_op(choice.op_id);
    strategies.push_back(strategy_to_json(graph.operators[op], choice.strategy));
  }
  return Json{{"schema", "topoplan-plan/v1"},
              {"mode", to_string(report.mode)},
              {"feasible", report.feasible},
              {"optimal", report.optimal},
              {"objective", report.objective},
              {"topology_cost_seconds", report.topology_cost_seconds},
              {"communication_volume_bytes", report.communication_volume_bytes},
              {"memory_bytes", report.memory_bytes},
              {"memory_bound_bytes", report.memory_bound},
              {"strategies", std::move(strategies)},
              {"stats", Json{{"aux_nodes", report.aux_nodes},
                             {"aux_edges", report.aux_edges},
                             {"root_lower_bound", report.root_lower_bound}}}};
}

inline Json compare_report_to_json(const ComputationGraph& graph,
                                   const CompareReport& report) {
  return Json{{"schema", "topoplan-compare/v1"},
              {"volume_plan", plan_report_to_json(graph, report.volume_plan)},
              {"topology_plan",
               plan_report_to_json(graph, report.topology_plan)},
              {"ratio", report.ratio}};
}

inline std::string plan_report_to_text(const ComputationGraph& graph,
                                       const PlanReport& report) {
  std::ostringstream out;
  out << "mode: " << to_string(report.mode) << "\n";
  if (!report.feasible) {
    out << "infeasible: no strategy assignment satisfies the memory bound\n";
    return out.str();
  }
  out << "objective: " << report.objective
      << (report.mode == CostMode::kVolume ? " bytes" : " s") << "\n";
  out << "topology cost: " << report.topology_cost_seconds << " s\n";
  out << "communication volume: " << report.communication_volume_bytes
      << " bytes\n";
  out << "memory per device: " << report.memory_bytes << " bytes (bound "
      << report.memory_bound << ")\n";
  out << "auxiliary graph: " << report.aux_nodes << " nodes, "
      << report.aux_edges << " edges\n";
  if (!report.optimal) {
    out << "warning: solver budget exceeded; best found plan reported\n";
  }
  out << "strategies:\n";
  for (const OpChoice& choice : report.choices) {
    const int op = graph.find_op(choice.op_id);
    out << "  " << choice.op_id << ": ";
    const OperatorNode& node = graph.operators[op];
    for (int a = 0; a < node.axis_count(); ++a) {
      if (a) out << ", ";
      out << node.axes[a].name << "=" << choice.strategy.degrees[a];
    }
    out << "  map (";
    for (std::size_t a = 0; a < choice.strategy.device_map.size(); ++a) {
      if (a) out << ",";
      out << choice.strategy.device_map[a];
    }
    out << ")\n";
  }
  return out.str();
}

inline std::string compare_report_to_text(const ComputationGraph& graph,
                                          const CompareReport& report) {
  std::ostringstream out;
  out << "=== volume-based plan ===\n"
      << plan_report_to_text(graph, report.volume_plan)
      << "=== topology-aware plan ===\n"
      << plan_report_to_text(graph, report.topology_plan)
      << "=== comparison (topology-aware pricing) ===\n"
      << "volume-based plan cost:   " << report.volume_plan.topology_cost_seconds
      << " s\n"
      << "topology-aware plan cost: "
      << report.topology_plan.topology_cost_seconds << " s\n"
      << "ratio: " << report.ratio << "\n";
  return out.str();
}

inline std::string plan_report_to_csv(const ComputationGraph& graph,
                                      const PlanReport& report) {
  std::ostringstream out;
  out << "op,axis,degree,device_map\n";
  for (const OpChoice& choice : report.choices) {
    const int op = graph.find_op(choice.op_id);
    const OperatorNode& node = graph.operators[op];
    for (int a = 0; a < node.axis_count(); ++a) {
      out << choice.op_id << "," << node.axes[a].name << ","
          << choice.strategy.degrees[a] << "," << choice.strategy.device_map[a]
          << "\n";
    }
  }
  return out.str();
}

inline std::string compare_report_to_csv(const ComputationGraph&,
                                         const CompareReport& report) {
  std::ostringstream out;
  out << "metric,volume_plan,topology_plan\n";
  out << "objective," << report.volume_plan.objective << ","
      << report.topology_plan.objective << "\n";
  out << "topology_cost_seconds," << report.volume_plan.topology_cost_seconds
      << "," << report.topology_plan.topology_cost_seconds << "\n";
  out << "communication_volume_bytes,"
      << report.volume_plan.communication_volume_bytes << ","
      << report.topology_plan.communication_volume_bytes << "\n";
  out << "ratio," << report.ratio << "," << report.ratio << "\n";
  return out.str();
}

}  // namespace topoplan

#endif  // TOPOPLAN_PIPELINE_HPP_
