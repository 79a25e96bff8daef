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

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace shardplan {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A preset (or the preset's mesh) does not fit on the given cluster.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what) : Error(what) {}
};

/// Participant layout of a collective or sharding group:
/// per_node GPUs on each of nodes nodes.
struct DeviceMesh {
  int per_node = 1;
  int nodes = 1;

  constexpr int size() const { return per_node * nodes; }
  constexpr bool operator==(const DeviceMesh&) const = default;
  constexpr auto operator<=>(const DeviceMesh&) const = default;
};

std::string to_string(const DeviceMesh& m);

/// Two-tier leaf-spine fabric. inter_leaf_penalty multiplies collective time
/// for node groups that straddle a leaf switch (1.0 disables the model).
struct Topology {
  int leaf_count = 1;
  int nodes_per_leaf = 1;
  double inter_leaf_penalty = 1.0;
};

struct ClusterSpec {
  int gpus_per_node = 8;                   // R
  int node_count = 1;                      // N
  std::uint64_t gpu_memory_capacity = 0;   // bytes
  DeviceMesh dp_mesh;                      // s_dp^0 x s_dp^1
  Topology topology;

  int gpu_count() const { return gpus_per_node * node_count; }
  void check() const;  // throws Error on malformed fields
};

/// Transformer-style model description. module_params is the per-layer
/// template Phi_i (uniform across layers); any remainder Phi - L*sum(Phi_i)
/// is attributed to embeddings/head and carries no per-module collectives.
struct ModelSpec {
  std::uint64_t total_params = 0;          // Phi
  int layer_count = 1;                     // L
  int modules_per_layer = 1;               // K
  std::vector<std::uint64_t> module_params;  // Phi_i, size K
  int hidden = 1;                          // H
  int seq_len = 1;                         // S
  int micro_batch = 1;                     // B, sequences
  int micro_batch_count = 1;               // M
  int vocab = 1;                           // V
  int bytes_per_param = 2;
  int bytes_per_grad = 2;
  int bytes_per_os_per_param = 12;

  std::uint64_t layer_template_params() const;  // sum of Phi_i
  void check() const;
};

/// The six sharding factors as device meshes. secondary_params carries the
/// ZeRO++-style auxiliary AllGather source mesh; the six factors cannot
/// express it, so it rides along as metadata consumed by the cost model.
struct ShardingPlan {
  DeviceMesh p;
  DeviceMesh g;
  DeviceMesh os;
  std::optional<DeviceMesh> secondary_params;

  int sp() const { return p.size(); }
  int sg() const { return g.size(); }
  int sos() const { return os.size(); }

  bool operator==(const ShardingPlan& o) const {
    return p == o.p && g == o.g && os == o.os &&
           secondary_params == o.secondary_params;
  }
  /// Lexicographic key (s_p^0, s_p^1, s_g^0, s_g^1, s_os^0, s_os^1); the
  /// planner's deterministic candidate order and tie-break.
  auto lex_key() const {
    return std::tuple(p.per_node, p.nodes, g.per_node, g.nodes, os.per_node,
                      os.nodes);
  }
};

std::string to_string(const ShardingPlan& plan);

struct Violation {
  std::string constraint;  // short identifier of the failed rule
  std::string detail;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks the dependency chain and search filters:
///   R >= s_dp0 >= s_os0 >= s_g0 >= s_p0 >= 1   (node axis likewise with N)
///   s_i0 | s_dp0 and s_i1 | s_dp1 for i in {p,g,os}
///   s_i1 > 1 implies s_i0 = s_dp0
///   s_g in {s_p, s_os}
/// All violations are reported, not just the first.
ValidationResult validate_plan(const ShardingPlan& plan,
                               const ClusterSpec& cluster);

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "ZeRO-1", "ZeRO-3", "MiCS", "ZeRO++", "AMSP-7B", "AMSP-13B", "AMSP-30B"};
  return names;
}

/// Instantiates a named preset against the cluster's DP mesh.
/// Throws Error for unknown names and InfeasibleError when the preset's
/// meshes do not fit the cluster (no clamping).
ShardingPlan preset(const std::string& name, const ClusterSpec& cluster);

}  // namespace shardplan
