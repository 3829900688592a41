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

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "topoplan/cost_model.hpp"
#include "topoplan/io.hpp"
#include "topoplan/models.hpp"
#include "topoplan/pipeline.hpp"
#include "topoplan/redistribution.hpp"

namespace {

using namespace topoplan;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitBudget = 4;

struct GraphInput {
  std::string graph_path;
  std::string model_spec;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--graph", graph_path, "computation graph document");
    cmd->add_option("--model", model_spec,
                    "built-in model, e.g. mlp-chain:layers=2,hidden=1024");
  }

  bool provided() const { return !graph_path.empty() || !model_spec.empty(); }

  ComputationGraph load() const {
    if (!model_spec.empty() && !graph_path.empty()) {
      throw Error("--graph and --model are mutually exclusive");
    }
    if (!model_spec.empty()) return build_graph(parse_model_spec(model_spec));
    if (!graph_path.empty()) {
      return graph_from_json(load_json_file(graph_path));
    }
    throw Error("one of --graph or --model is required");
  }
};

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
  } else {
    write_text_file(out_path, content);
  }
}

std::vector<std::int64_t> parse_int_list(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) out.push_back(std::stoll(item));
  return out;
}

std::vector<int> parse_map_list(const std::string& text) {
  std::vector<int> out;
  for (std::int64_t v : parse_int_list(text)) out.push_back(static_cast<int>(v));
  return out;
}

std::string shape_string(const std::vector<std::int64_t>& shape) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ",";
    out << shape[i];
  }
  out << ")";
  return out.str();
}

std::string enumerate_table(const OperatorNode& op,
                            const std::vector<OperatorStrategy>& strategies,
                            bool csv) {
  std::vector<std::string> tensor_names;
  for (const auto& t : op.inputs) tensor_names.push_back(t.name);
  for (const auto& t : op.outputs) tensor_names.push_back(t.name);

  std::ostringstream out;
  const char sep = csv ? ',' : '\t';
  out << "node";
  for (const auto& axis : op.axes) out << sep << axis.name;
  for (const auto& name : tensor_names) out << sep << name;
  out << sep << "device_map" << sep << "device_matrix\n";
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    const OperatorStrategy& s = strategies[i];
    out << "u_" << i + 1;
    for (std::int64_t d : s.degrees) out << sep << d;
    const auto layouts = derive_tensor_layouts(op, s);
    for (const auto& name : tensor_names) {
      out << sep << shape_string(layouts.at(name).shard_shape());
    }
    out << sep << "(";
    for (std::size_t a = 0; a < s.device_map.size(); ++a) {
      if (a) out << ",";
      out << s.device_map[a];
    }
    out << ")" << sep << shape_string(s.display_matrix()) << "\n";
  }
  return out.str();
}

int cmd_enumerate(const std::string& kind, const GraphInput& input,
                  const std::string& op_id, std::int64_t devices,
                  std::int64_t b, std::int64_t in, std::int64_t out_dim,
                  const std::string& format, const std::string& out_path) {
  OperatorNode op;
  if (input.provided()) {
    const ComputationGraph graph = input.load();
    const int index = graph.find_op(op_id);
    if (index < 0) throw Error("operator '" + op_id + "' not found");
    op = graph.operators[index];
  } else if (kind == "matmul" || kind.empty()) {
    op.id = "matmul";
    op.kind = OpKind::kMatMul;
    op.inputs = {{"x", {b, in}, 4}, {"w", {in, out_dim}, 4}};
    op.outputs = {{"y", {b, out_dim}, 4}};
    op.axes = {{"b", {{"x", 0}, {"y", 0}}},
               {"in", {{"x", 1}, {"w", 0}}},
               {"out", {{"w", 1}, {"y", 1}}}};
  } else {
    throw Error("unknown operator kind '" + kind +
                "'; use --graph/--model with --op for other operators");
  }
  const auto strategies = enumerate_strategies(op, devices);
  emit(out_path, enumerate_table(op, strategies, format == "csv"));
  return kExitOk;
}

int cmd_redistribute(const std::string& matrix_text, const std::string& from_text,
                     const std::string& to_text, const std::string& shape_text,
                     int element_size, const std::string& topology_path,
                     const std::string& out_path) {
  const DeviceMatrix matrix(parse_int_list(matrix_text));
  const TensorMap from(parse_map_list(from_text));
  const TensorMap to(parse_map_list(to_text));
  if (from.rank() != to.rank()) throw Error("maps must have equal rank");

  std::vector<std::int64_t> shape;
  if (!shape_text.empty()) {
    shape = parse_int_list(shape_text);
  } else {
    for (int i = 0; i < from.rank(); ++i) {
      std::int64_t extent = 1;
      if (from[i] >= 0) extent = std::max(extent, matrix.extent(from[i]));
      if (to[i] >= 0) extent = std::max(extent, matrix.extent(to[i]));
      shape.push_back(extent);
    }
  }
  double tensor_bytes = element_size;
  for (std::int64_t s : shape) tensor_bytes *= static_cast<double>(s);

  bool have_env = false;
  BandwidthEnv env;
  if (!topology_path.empty()) {
    env = bandwidth_env(topology_from_json(load_json_file(topology_path)));
    have_env = true;
  }

  std::ostringstream text;
  text << "matrix " << matrix.to_string() << "  shape " << shape_string(shape)
       << "  Size(T) = " << tensor_bytes << " bytes\n";
  text << "from " << from.to_string() << "  to " << to.to_string() << "\n\n";
  const struct {
    RedistStage stage;
    const char* name;
  } stages[] = {
      {RedistStage::kNaive, "0: initial (gather everything, then slice)"},
      {RedistStage::kRemove, "1: remove unnecessary gathers"},
      {RedistStage::kRearrange, "2: rearrange dependent slices first"},
      {RedistStage::kOptimized, "3: replace gather+slice pairs with all-to-all"},
  };
  for (const auto& [stage, name] : stages) {
    const RedistPlan plan =
        infer_redistribution_stage(matrix, shape, from, to, stage);
    const double volume = plan_volume(plan, tensor_bytes);
    text << "stage " << name << "\n";
    for (std::size_t i = 0; i < plan.ops.size(); ++i) {
      text << "  " << plan.ops[i].to_string(matrix) << "  -> "
           << plan.map_after[i].to_string() << "\n";
    }
    text << "  volume: " << volume << " bytes (" << volume / tensor_bytes
         << " of Size(T))";
    if (have_env) {
      text << ", topology cost: "
           << redistribution_cost(plan, tensor_bytes, env) << " s";
    }
    text << "\n\n";
  }
  emit(out_path, text.str());
  return kExitOk;
}

int cmd_costs(const std::string& collective, const std::string& matrix_text,
              const std::string& map_text, int device_dim, double bytes,
              const std::string& topology_path, const std::string& out_path) {
  const ClusterTopology topo = topology_from_json(load_json_file(topology_path));
  const BandwidthEnv env = bandwidth_env(topo);
  const DeviceMatrix matrix(parse_int_list(matrix_text));
  const TensorMap map(parse_map_list(map_text));

  CollectiveCall call;
  call.matrix = matrix;
  call.map = map;
  call.data_size = bytes;
  if (collective == "allreduce") {
    call.kind = CollectiveKind::kAllReduce;
    std::int64_t group = matrix.total();
    for (int m : map.entries) {
      if (m >= 0) group /= matrix.extent(m);
    }
    call.group_size = group;
  } else if (collective == "allgather" || collective == "alltoall") {
    if (device_dim < 0 || device_dim >= matrix.depth()) {
      throw Error("--device-dim is required for allgather/alltoall");
    }
    call.kind = collective == "allgather" ? CollectiveKind::kAllGather
                                          : CollectiveKind::kAllToAll;
    call.device_dim = device_dim;
    call.group_size = matrix.extent(device_dim);
  } else {
    throw Error("unknown collective '" + collective + "'");
  }

  const CollectiveCost cost = collective_cost_detail(call, env);
  std::ostringstream text;
  text << "collective: " << collective << "\n"
       << "matrix: " << matrix.to_string() << "  map: " << map.to_string()
       << "\n"
       << "group size: " << call.group_size << "\n"
       << "volume: " << cost.volume << " bytes\n"
       << "ct: " << cost.ct << "\n"
       << "effective bandwidth: " << cost.effective_bw / kGigabyte << " GB/s\n"
       << "cost: " << cost.seconds << " s\n";
  emit(out_path, text.str());
  return kExitOk;
}

std::string format_report(const ComputationGraph& graph, const PlanReport& report,
                          const std::string& format) {
  if (format == "json") return plan_report_to_json(graph, report).dump(2) + "\n";
  if (format == "csv") return plan_report_to_csv(graph, report);
  return plan_report_to_text(graph, report);
}

std::string format_report(const ComputationGraph& graph,
                          const CompareReport& report,
                          const std::string& format) {
  if (format == "json") {
    return compare_report_to_json(graph, report).dump(2) + "\n";
  }
  if (format == "csv") return compare_report_to_csv(graph, report);
  return compare_report_to_text(graph, report);
}

int report_exit(const PlanReport& report) {
  if (!report.feasible) return kExitInfeasible;
  if (!report.optimal) return kExitBudget;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "topoplan: topology-aware intra-operator parallelism planning over "
      "two-level device clusters"};
  app.require_subcommand(1);

  auto* plan = app.add_subcommand(
      "plan", "search the minimum-communication strategy assignment");
  GraphInput plan_input;
  plan_input.add_flags(plan);
  std::string plan_topology, plan_mode = "topology", plan_out, plan_format = "text";
  std::string plan_export_graph, plan_dump_aux;
  double plan_memory_gb = 0;
  int plan_threads = 1;
  std::int64_t plan_max_nodes = 200'000'000;
  plan->add_option("--topology", plan_topology, "topology document")->required();
  plan->add_option("--mode", plan_mode, "volume or topology")
      ->check(CLI::IsMember({"volume", "topology"}));
  plan->add_option("--memory-gb", plan_memory_gb,
                   "per-device memory bound override, in GB");
  plan->add_option("--out", plan_out, "write the report to a file");
  plan->add_option("--format", plan_format, "text, json, or csv")
      ->check(CLI::IsMember({"text", "json", "csv"}));
  plan->add_option("--threads", plan_threads, "solver worker threads");
  plan->add_option("--max-nodes", plan_max_nodes, "solver node budget");
  plan->add_option("--export-graph", plan_export_graph,
                   "also write the computation graph document");
  plan->add_option("--dump-aux", plan_dump_aux,
                   "also write the priced auxiliary graph document");

  auto* compare = app.add_subcommand(
      "compare",
      "plan with both cost models; price both results topology-aware");
  GraphInput compare_input;
  compare_input.add_flags(compare);
  std::string compare_topology, compare_out, compare_format = "text";
  double compare_memory_gb = 0;
  int compare_threads = 1;
  compare->add_option("--topology", compare_topology, "topology document")
      ->required();
  compare->add_option("--memory-gb", compare_memory_gb,
                      "per-device memory bound override, in GB");
  compare->add_option("--out", compare_out, "write the report to a file");
  compare->add_option("--format", compare_format, "text, json, or csv")
      ->check(CLI::IsMember({"text", "json", "csv"}));
  compare->add_option("--threads", compare_threads, "solver worker threads");

  auto* enumerate = app.add_subcommand(
      "enumerate", "print the full strategy table of one operator");
  GraphInput enum_input;
  enum_input.add_flags(enumerate);
  std::string enum_kind, enum_op, enum_format = "text", enum_out;
  std::int64_t enum_devices = 4, enum_b = 64, enum_in = 64, enum_out_dim = 64;
  enumerate->add_option("kind", enum_kind, "operator kind (matmul)");
  enumerate->add_option("--op", enum_op, "operator id within --graph/--model");
  enumerate->add_option("--devices", enum_devices, "device count (power of two)");
  enumerate->add_option("--b", enum_b, "matmul rows");
  enumerate->add_option("--in", enum_in, "matmul inner dimension");
  enumerate->add_option("--out-dim", enum_out_dim, "matmul columns");
  enumerate->add_option("--format", enum_format, "text or csv")
      ->check(CLI::IsMember({"text", "csv"}));
  enumerate->add_option("--out", enum_out, "write the table to a file");

  auto* redistribute = app.add_subcommand(
      "redistribute", "staged redistribution plan between two tensor maps");
  std::string red_matrix, red_from, red_to, red_shape, red_topology, red_out;
  int red_element_size = 4;
  redistribute->add_option("--matrix", red_matrix,
                           "device matrix, outermost first, e.g. 2,2,2,2")
      ->required();
  redistribute->add_option("--from", red_from, "source tensor map")->required();
  redistribute->add_option("--to", red_to, "target tensor map")->required();
  redistribute->add_option("--shape", red_shape, "tensor shape (optional)");
  redistribute->add_option("--element-size", red_element_size,
                           "bytes per element");
  redistribute->add_option("--topology", red_topology,
                           "topology document (adds topology costs)");
  redistribute->add_option("--out", red_out, "write the plan to a file");

  auto* costs = app.add_subcommand(
      "costs", "volume, ct, effective bandwidth, and cost of one collective");
  std::string costs_collective, costs_matrix, costs_map, costs_topology, costs_out;
  int costs_device_dim = -1;
  double costs_bytes = 0;
  costs->add_option("--collective", costs_collective,
                    "allreduce, allgather, or alltoall")
      ->required();
  costs->add_option("--matrix", costs_matrix, "device matrix")->required();
  costs->add_option("--map", costs_map, "tensor map")->required();
  costs->add_option("--device-dim", costs_device_dim,
                    "gathered/exchanged device dim (allgather/alltoall)");
  costs->add_option("--bytes", costs_bytes, "data size in bytes")->required();
  costs->add_option("--topology", costs_topology, "topology document")
      ->required();
  costs->add_option("--out", costs_out, "write to a file");

  auto* export_ilp = app.add_subcommand(
      "export-ilp", "write the 0-1 ILP in LP text format");
  GraphInput ilp_input;
  ilp_input.add_flags(export_ilp);
  std::string ilp_topology, ilp_mode = "topology", ilp_out;
  double ilp_memory_gb = 0;
  export_ilp->add_option("--topology", ilp_topology, "topology document")
      ->required();
  export_ilp->add_option("--mode", ilp_mode, "volume or topology")
      ->check(CLI::IsMember({"volume", "topology"}));
  export_ilp->add_option("--memory-gb", ilp_memory_gb,
                         "per-device memory bound override, in GB");
  export_ilp->add_option("--out", ilp_out, "write the LP file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) {
      PlanRequest request;
      request.graph = plan_input.load();
      request.topo = topology_from_json(load_json_file(plan_topology));
      request.mode =
          plan_mode == "volume" ? CostMode::kVolume : CostMode::kTopology;
      request.memory_override = plan_memory_gb * kGigabyte;
      request.solver.threads = plan_threads;
      request.solver.max_nodes = plan_max_nodes;
      if (!plan_export_graph.empty()) {
        write_text_file(plan_export_graph,
                        graph_to_json(request.graph).dump(2) + "\n");
      }
      validate_or_throw(request.graph, request.topo);
      const AuxiliaryGraph aux =
          build_auxiliary_graph(request.graph, request.topo, request.mode);
      if (!plan_dump_aux.empty()) {
        write_text_file(plan_dump_aux, aux_graph_to_json(aux).dump(2) + "\n");
      }
      const PlanReport report = run_plan_on_aux(
          aux, request.mode, effective_memory_bound(request), request.solver);
      emit(plan_out, format_report(request.graph, report, plan_format));
      return report_exit(report);
    }
    if (compare->parsed()) {
      PlanRequest request;
      request.graph = compare_input.load();
      request.topo = topology_from_json(load_json_file(compare_topology));
      request.memory_override = compare_memory_gb * kGigabyte;
      request.solver.threads = compare_threads;
      const CompareReport report = run_compare(request);
      emit(compare_out, format_report(request.graph, report, compare_format));
      if (!report.volume_plan.feasible || !report.topology_plan.feasible) {
        return kExitInfeasible;
      }
      if (!report.volume_plan.optimal || !report.topology_plan.optimal) {
        return kExitBudget;
      }
      return kExitOk;
    }
    if (enumerate->parsed()) {
      return cmd_enumerate(enum_kind, enum_input, enum_op, enum_devices, enum_b,
                           enum_in, enum_out_dim, enum_format, enum_out);
    }
    if (redistribute->parsed()) {
      return cmd_redistribute(red_matrix, red_from, red_to, red_shape,
                              red_element_size, red_topology, red_out);
    }
    if (costs->parsed()) {
      return cmd_costs(costs_collective, costs_matrix, costs_map,
                       costs_device_dim, costs_bytes, costs_topology, costs_out);
    }
    if (export_ilp->parsed()) {
      const ComputationGraph graph = ilp_input.load();
      const ClusterTopology topo =
          topology_from_json(load_json_file(ilp_topology));
      validate_or_throw(graph, topo);
      const AuxiliaryGraph aux = build_auxiliary_graph(graph, topo);
      const double bound =
          ilp_memory_gb > 0 ? ilp_memory_gb * kGigabyte : topo.device_memory;
      const IlpProblem problem = formulate(
          aux, ilp_mode == "volume" ? CostMode::kVolume : CostMode::kTopology,
          bound);
      emit(ilp_out, export_lp(problem));
      return kExitOk;
    }
  } catch (const ValidationFailure& failure) {
    std::cerr << failure.what();
    return kExitValidation;
  } catch (const Error& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
