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

#include <vector>

#include "shardplan/comm_model.hpp"
#include "shardplan/domain.hpp"

namespace shardplan {

/// Node-to-group and node-to-leaf maps for the plan's node-axis sharding
/// groups. Groups have equal size (the largest s^1 > 1 among the plan's
/// meshes); cross_leaf_groups counts groups straddling a leaf switch.
struct GroupAssignment {
  std::vector<int> group_of;  // node index -> group index
  std::vector<int> leaf_of;   // node index -> leaf index
  int group_size = 1;
  int cross_leaf_groups = 0;
};

/// Contiguous packing: nodes in leaf order, groups of size s^1 filled
/// leaf by leaf. cross_leaf_groups = 0 whenever s^1 divides nodes_per_leaf.
GroupAssignment assign_nodes(const Topology& topology,
                             const ClusterSpec& cluster,
                             const ShardingPlan& plan);

/// Counts groups whose nodes span more than one leaf (for arbitrary
/// assignments, e.g. permutation baselines in tests).
int count_cross_leaf_groups(const std::vector<int>& group_of, int group_count,
                            const std::vector<int>& leaf_of);

/// collective_time with the topology's inter-leaf penalty applied when the
/// mesh spans nodes and the assignment contains a leaf-spanning group.
double placed_collective_time(const Topology& topology,
                              const GroupAssignment& assignment,
                              const BandwidthProfile& profile,
                              CollectiveKind kind, std::uint64_t size_bytes,
                              DeviceMesh mesh);

}  // namespace shardplan
