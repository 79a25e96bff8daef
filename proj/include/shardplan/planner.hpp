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

#include <optional>
#include <string>
#include <vector>

#include "shardplan/cost_model.hpp"
#include "shardplan/domain.hpp"

namespace shardplan {

struct PlanResult {
  ShardingPlan plan;
  TimeBreakdown time;
  MemoryBreakdown memory;
  bool feasible = false;  // memory.d_total <= cluster.gpu_memory_capacity
  int rank = -1;          // position in the (time, lex)-sorted candidate list
};

struct SearchReport {
  PlanResult best;
  std::uint64_t candidates_evaluated = 0;
  std::uint64_t candidates_filtered = 0;  // raw grid tuples rejected
  std::optional<std::vector<PlanResult>> all_results;
};

/// No candidate fits in GPU memory. Carries the minimal-memory candidate so
/// callers can still report how far off the closest plan was.
class NoFeasiblePlanError : public Error {
 public:
  NoFeasiblePlanError(const std::string& what, PlanResult closest)
      : Error(what), closest_(std::move(closest)) {}
  const PlanResult& closest() const { return closest_; }

 private:
  PlanResult closest_;
};

enum class ExecPolicy { Serial, Parallel };

struct SolveOptions {
  bool keep_all_results = false;
  ExecPolicy policy = ExecPolicy::Parallel;
};

/// Exactly the plans accepted by validate_plan, generated from per-axis
/// divisor chains of the DP mesh (never materializing the raw grid), sorted
/// lexicographically by (s_p^0, s_p^1, s_g^0, s_g^1, s_os^0, s_os^1).
std::vector<ShardingPlan> enumerate_candidates(const ClusterSpec& cluster);

/// Cost and memory for one (already validated) plan.
PlanResult evaluate_plan(const ModelSpec& model, const ClusterSpec& cluster,
                         const ShardingPlan& plan,
                         const BandwidthProfile& profile,
                         const CostConfig& cfg);

/// Minimizes T_comm over the candidate set subject to the memory capacity.
/// Ties on time.total break by lexicographic plan order, which makes the
/// result identical to a first-found strict-minimum scan of the ordered
/// candidate list. Throws NoFeasiblePlanError when nothing fits.
SearchReport solve(const ModelSpec& model, const ClusterSpec& cluster,
                   const BandwidthProfile& profile, const CostConfig& cfg,
                   const SolveOptions& options = {});

/// Reference search over the full raw grid ([1..R] x [1..N] per component),
/// filtered through validate_plan and minimized with the same comparator as
/// solve. Guarded against grids larger than max_raw_tuples.
SearchReport brute_force_oracle(const ModelSpec& model,
                                const ClusterSpec& cluster,
                                const BandwidthProfile& profile,
                                const CostConfig& cfg,
                                std::uint64_t max_raw_tuples = 1000000);

struct PresetResult {
  std::string name;
  std::optional<PlanResult> result;  // empty when the preset cannot even be
                                     // instantiated on the cluster
  std::string error;                 // why, when result is empty
};

/// Every named preset plus the solver's best ("solver" row), sorted by
/// time.total ascending; presets that do not fit (mesh or memory) are kept
/// with feasible=false rather than dropped.
std::vector<PresetResult> compare_presets(const ModelSpec& model,
                                          const ClusterSpec& cluster,
                                          const BandwidthProfile& profile,
                                          const CostConfig& cfg);

}  // namespace shardplan
