/* Copyright 2026 The Shardplan Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "shardplan/domain.hpp"

#include <numeric>
#include <sstream>

namespace shardplan {

std::string to_string(const DeviceMesh& m) {
  return std::to_string(m.per_node) + "x" + std::to_string(m.nodes);
}

std::string to_string(const ShardingPlan& plan) {
  std::ostringstream os;
  os << "p=" << to_string(plan.p) << ",g=" << to_string(plan.g)
     << ",os=" << to_string(plan.os);
  if (plan.secondary_params) {
    os << ",p2=" << to_string(*plan.secondary_params);
  }
  return os.str();
}

void ClusterSpec::check() const {
  if (gpus_per_node < 1 || node_count < 1) {
    throw Error("cluster: gpus_per_node and node_count must be >= 1");
  }
  if (gpu_memory_capacity == 0) {
    throw Error("cluster: gpu_memory_capacity must be > 0");
  }
  if (dp_mesh.per_node < 1 || dp_mesh.nodes < 1) {
    throw Error("cluster: dp_mesh axes must be >= 1");
  }
  if (dp_mesh.per_node > gpus_per_node || dp_mesh.nodes > node_count) {
    throw Error("cluster: dp_mesh " + to_string(dp_mesh) +
                " exceeds cluster " + std::to_string(gpus_per_node) + "x" +
                std::to_string(node_count));
  }
  if (topology.leaf_count < 1 || topology.nodes_per_leaf < 1) {
    throw Error("cluster: topology leaf_count and nodes_per_leaf must be >= 1");
  }
  if (static_cast<long long>(topology.leaf_count) * topology.nodes_per_leaf <
      node_count) {
    throw Error("cluster: topology holds fewer nodes than node_count");
  }
  if (topology.inter_leaf_penalty < 1.0) {
    throw Error("cluster: inter_leaf_penalty must be >= 1");
  }
}

std::uint64_t ModelSpec::layer_template_params() const {
  return std::accumulate(module_params.begin(), module_params.end(),
                         std::uint64_t{0});
}

void ModelSpec::check() const {
  if (total_params == 0) throw Error("model: total_params must be > 0");
  if (layer_count < 1 || modules_per_layer < 1 || hidden < 1 || seq_len < 1 ||
      micro_batch < 1 || micro_batch_count < 1 || vocab < 1) {
    throw Error("model: all counts must be >= 1");
  }
  if (module_params.size() != static_cast<size_t>(modules_per_layer)) {
    throw Error("model: module_params length must equal modules_per_layer");
  }
  for (auto phi : module_params) {
    if (phi == 0) throw Error("model: module_params entries must be > 0");
  }
  if (static_cast<std::uint64_t>(layer_count) * layer_template_params() >
      total_params) {
    throw Error("model: layer_count * sum(module_params) exceeds total_params");
  }
  if (bytes_per_param < 1 || bytes_per_grad < 1 || bytes_per_os_per_param < 1) {
    throw Error("model: dtype byte sizes must be >= 1");
  }
}

namespace {

void check_axis(std::vector<Violation>& out, const char* axis, int cap,
                int dp, int os, int g, int p) {
  auto add = [&](std::string what, std::string detail) {
    out.push_back({std::move(what), std::move(detail)});
  };
  std::string a(axis);
  if (p < 1) add("s_p" + a + ">=1", "s_p" + a + "=" + std::to_string(p));
  if (!(dp <= cap)) {
    add("s_dp" + a + "<=" + (a == "0" ? "R" : "N"),
        "s_dp" + a + "=" + std::to_string(dp) + " cap=" + std::to_string(cap));
  }
  if (!(os <= dp)) {
    add("s_os" + a + "<=s_dp" + a,
        std::to_string(os) + ">" + std::to_string(dp));
  }
  if (!(g <= os)) {
    add("s_g" + a + "<=s_os" + a, std::to_string(g) + ">" + std::to_string(os));
  }
  if (!(p <= g)) {
    add("s_p" + a + "<=s_g" + a, std::to_string(p) + ">" + std::to_string(g));
  }
  const struct {
    const char* name;
    int v;
  } comps[] = {{"p", p}, {"g", g}, {"os", os}};
  for (const auto& c : comps) {
    if (c.v >= 1 && dp % c.v != 0) {
      add(std::string("s_") + c.name + a + " divides s_dp" + a,
          std::to_string(c.v) + " does not divide " + std::to_string(dp));
    }
  }
  // Subgroup nesting: the cost formulas build collectives on the ratio
  // meshes (s_g/s_p, s_os/s_g chains), so each factor must divide the next.
  if (p >= 1 && g >= 1 && g % p != 0) {
    add("s_p" + a + " divides s_g" + a,
        std::to_string(p) + " does not divide " + std::to_string(g));
  }
  if (g >= 1 && os >= 1 && os % g != 0) {
    add("s_g" + a + " divides s_os" + a,
        std::to_string(g) + " does not divide " + std::to_string(os));
  }
}

}  // namespace

ValidationResult validate_plan(const ShardingPlan& plan,
                               const ClusterSpec& cluster) {
  ValidationResult res;
  const auto& dp = cluster.dp_mesh;
  check_axis(res.violations, "0", cluster.gpus_per_node, dp.per_node,
             plan.os.per_node, plan.g.per_node, plan.p.per_node);
  check_axis(res.violations, "1", cluster.node_count, dp.nodes, plan.os.nodes,
             plan.g.nodes, plan.p.nodes);

  const struct {
    const char* name;
    const DeviceMesh& m;
  } comps[] = {{"p", plan.p}, {"g", plan.g}, {"os", plan.os}};
  for (const auto& c : comps) {
    if (c.m.nodes > 1 && c.m.per_node != dp.per_node) {
      res.violations.push_back(
          {std::string("s_") + c.name + "0=s_dp0 when s_" + c.name + "1>1",
           std::string("s_") + c.name + "=" + to_string(c.m) + " with s_dp0=" +
               std::to_string(dp.per_node)});
    }
  }
  if (plan.sg() != plan.sp() && plan.sg() != plan.sos()) {
    res.violations.push_back(
        {"s_g in {s_p, s_os}",
         "s_g=" + std::to_string(plan.sg()) + " s_p=" +
             std::to_string(plan.sp()) + " s_os=" +
             std::to_string(plan.sos())});
  }
  return res;
}

namespace {

// Table rows that reference fixed subgroup meshes (the published strategy
// definitions use 8-GPU subgroups).
constexpr DeviceMesh kEightIntra{8, 1};

ShardingPlan make_checked(const std::string& name, ShardingPlan plan,
                          const ClusterSpec& cluster) {
  auto fits = [&](const DeviceMesh& m) {
    return m.per_node <= cluster.dp_mesh.per_node &&
           m.nodes <= cluster.dp_mesh.nodes;
  };
  if (!fits(plan.p) || !fits(plan.g) || !fits(plan.os) ||
      (plan.secondary_params && !fits(*plan.secondary_params))) {
    throw InfeasibleError("preset " + name + " (" + to_string(plan) +
                          ") does not fit dp mesh " +
                          to_string(cluster.dp_mesh));
  }
  auto v = validate_plan(plan, cluster);
  if (!v.ok()) {
    throw InfeasibleError("preset " + name + " (" + to_string(plan) +
                          ") violates " + v.violations.front().constraint +
                          " on this cluster");
  }
  return plan;
}

}  // namespace

ShardingPlan preset(const std::string& name, const ClusterSpec& cluster) {
  cluster.check();
  const DeviceMesh full = cluster.dp_mesh;
  const DeviceMesh one{1, 1};
  if (name == "ZeRO-1") {
    return make_checked(name, {one, one, full, std::nullopt}, cluster);
  }
  if (name == "ZeRO-3") {
    return make_checked(name, {full, full, full, std::nullopt}, cluster);
  }
  if (name == "MiCS") {
    return make_checked(name, {kEightIntra, kEightIntra, kEightIntra,
                               std::nullopt}, cluster);
  }
  if (name == "ZeRO++") {
    return make_checked(name, {full, full, full, kEightIntra}, cluster);
  }
  if (name == "AMSP-7B") {
    return make_checked(name, {one, one, kEightIntra, std::nullopt}, cluster);
  }
  if (name == "AMSP-13B") {
    return make_checked(name, {DeviceMesh{4, 1}, DeviceMesh{4, 1}, kEightIntra,
                               std::nullopt}, cluster);
  }
  if (name == "AMSP-30B") {
    return make_checked(name, {kEightIntra, kEightIntra, DeviceMesh{8, 4},
                               std::nullopt}, cluster);
  }
  throw Error("unknown preset: " + name);
}

}  // namespace shardplan
