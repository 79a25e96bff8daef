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

#include "shardplan/placement.hpp"

#include <algorithm>

namespace shardplan {

GroupAssignment assign_nodes(const Topology& topology,
                             const ClusterSpec& cluster,
                             const ShardingPlan& plan) {
  const int n = cluster.node_count;
  const int s1 = std::max({plan.p.nodes, plan.g.nodes, plan.os.nodes});
  if (s1 > n) {
    throw Error("placement: group size " + std::to_string(s1) +
                " exceeds node count " + std::to_string(n));
  }
  if (n % s1 != 0) {
    throw Error("placement: group size " + std::to_string(s1) +
                " does not divide node count " + std::to_string(n));
  }
  GroupAssignment a;
  a.group_size = s1;
  a.group_of.resize(n);
  a.leaf_of.resize(n);
  for (int node = 0; node < n; ++node) {
    a.group_of[node] = node / s1;
    a.leaf_of[node] = node / topology.nodes_per_leaf;
  }
  a.cross_leaf_groups = count_cross_leaf_groups(a.group_of, n / s1, a.leaf_of);
  return a;
}

int count_cross_leaf_groups(const std::vector<int>& group_of, int group_count,
                            const std::vector<int>& leaf_of) {
  std::vector<int> first_leaf(group_count, -1);
  std::vector<bool> spans(group_count, false);
  for (size_t node = 0; node < group_of.size(); ++node) {
    const int g = group_of[node];
    if (first_leaf[g] < 0) {
      first_leaf[g] = leaf_of[node];
    } else if (leaf_of[node] != first_leaf[g]) {
      spans[g] = true;
    }
  }
  return static_cast<int>(std::count(spans.begin(), spans.end(), true));
}

double placed_collective_time(const Topology& topology,
                              const GroupAssignment& assignment,
                              const BandwidthProfile& profile,
                              CollectiveKind kind, std::uint64_t size_bytes,
                              DeviceMesh mesh) {
  const double base = profile.collective_time(kind, size_bytes, mesh);
  if (mesh.nodes > 1 && assignment.cross_leaf_groups > 0) {
    return base * topology.inter_leaf_penalty;
  }
  return base;
}

}  // namespace shardplan
