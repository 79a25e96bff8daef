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

#include "shardplan/planner.hpp"

#include <algorithm>

namespace shardplan {

namespace {

std::vector<int> divisors_of(int n) {
  std::vector<int> out;
  for (int d = 1; d <= n; ++d) {
    if (n % d == 0) out.push_back(d);
  }
  return out;
}

// Meshes (a, b) with a | dp0, b | dp1 and the fewer-nodes rule b>1 => a=dp0.
std::vector<DeviceMesh> component_meshes(const DeviceMesh& dp) {
  std::vector<DeviceMesh> out;
  for (int a : divisors_of(dp.per_node)) {
    for (int b : divisors_of(dp.nodes)) {
      if (b > 1 && a != dp.per_node) continue;
      out.push_back(DeviceMesh{a, b});
    }
  }
  return out;
}

bool nests(const DeviceMesh& inner, const DeviceMesh& outer) {
  return inner.per_node <= outer.per_node && inner.nodes <= outer.nodes &&
         outer.per_node % inner.per_node == 0 &&
         outer.nodes % inner.nodes == 0;
}

// Strict-weak order used by solve, the oracle and the rank assignment:
// smaller total time first, lexicographic plan order on ties.
bool better(const PlanResult& a, const PlanResult& b) {
  if (a.time.total != b.time.total) return a.time.total < b.time.total;
  return a.plan.lex_key() < b.plan.lex_key();
}

void assign_ranks(std::vector<PlanResult>& results) {
  std::vector<int> order(results.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return better(results[x], results[y]); });
  for (size_t r = 0; r < order.size(); ++r) {
    results[order[r]].rank = static_cast<int>(r);
  }
}

SearchReport finish_report(std::vector<PlanResult> results,
                           std::uint64_t raw_grid_size, bool keep_all) {
  assign_ranks(results);
  const PlanResult* best = nullptr;
  const PlanResult* closest = nullptr;  // minimal d_total among all
  for (const auto& r : results) {
    if (r.feasible && (best == nullptr || better(r, *best))) best = &r;
    if (closest == nullptr || r.memory.d_total < closest->memory.d_total) {
      closest = &r;
    }
  }
  SearchReport report;
  report.candidates_evaluated = results.size();
  report.candidates_filtered = raw_grid_size - results.size();
  if (best == nullptr) {
    PlanResult c = closest ? *closest : PlanResult{};
    throw NoFeasiblePlanError(
        "no feasible plan: minimal-memory candidate " +
            (closest ? to_string(closest->plan) : std::string("<none>")) +
            " needs " +
            std::to_string(closest ? closest->memory.d_total : 0.0) +
            " bytes",
        std::move(c));
  }
  report.best = *best;
  if (keep_all) {
    std::sort(results.begin(), results.end(),
              [](const PlanResult& a, const PlanResult& b) {
                return a.rank < b.rank;
              });
    report.all_results = std::move(results);
  }
  return report;
}

std::uint64_t raw_grid_size(const ClusterSpec& cluster) {
  const std::uint64_t per_component =
      static_cast<std::uint64_t>(cluster.gpus_per_node) * cluster.node_count;
  return per_component * per_component * per_component;
}

}  // namespace

std::vector<ShardingPlan> enumerate_candidates(const ClusterSpec& cluster) {
  cluster.check();
  const auto meshes = component_meshes(cluster.dp_mesh);
  std::vector<ShardingPlan> out;
  for (const auto& mp : meshes) {
    for (const auto& mos : meshes) {
      if (!nests(mp, mos)) continue;
      for (const auto& mg : meshes) {
        if (!nests(mp, mg) || !nests(mg, mos)) continue;
        if (mg.size() != mp.size() && mg.size() != mos.size()) continue;
        out.push_back(ShardingPlan{mp, mg, mos, std::nullopt});
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const ShardingPlan& a, const ShardingPlan& b) {
              return a.lex_key() < b.lex_key();
            });
  return out;
}

PlanResult evaluate_plan(const ModelSpec& model, const ClusterSpec& cluster,
                         const ShardingPlan& plan,
                         const BandwidthProfile& profile,
                         const CostConfig& cfg) {
  PlanResult r;
  r.plan = plan;
  r.time = total_comm_time(model, cluster, plan, profile, cfg);
  r.memory = memory_breakdown(model, plan, cfg);
  r.feasible =
      r.memory.d_total <= static_cast<double>(cluster.gpu_memory_capacity);
  return r;
}

SearchReport solve(const ModelSpec& model, const ClusterSpec& cluster,
                   const BandwidthProfile& profile, const CostConfig& cfg,
                   const SolveOptions& options) {
  model.check();
  cluster.check();
  const auto candidates = enumerate_candidates(cluster);
  std::vector<PlanResult> results(candidates.size());
  if (options.policy == ExecPolicy::Parallel) {
    // Results land in their candidate slot, so the reduction below is
    // independent of thread timing.
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0;
         i < static_cast<std::int64_t>(candidates.size()); ++i) {
      results[i] = evaluate_plan(model, cluster, candidates[i], profile, cfg);
    }
  } else {
    for (size_t i = 0; i < candidates.size(); ++i) {
      results[i] = evaluate_plan(model, cluster, candidates[i], profile, cfg);
    }
  }
  return finish_report(std::move(results), raw_grid_size(cluster),
                       options.keep_all_results);
}

SearchReport brute_force_oracle(const ModelSpec& model,
                                const ClusterSpec& cluster,
                                const BandwidthProfile& profile,
                                const CostConfig& cfg,
                                std::uint64_t max_raw_tuples) {
  model.check();
  cluster.check();
  const std::uint64_t grid = raw_grid_size(cluster);
  if (grid > max_raw_tuples) {
    throw Error("oracle: raw grid of " + std::to_string(grid) +
                " tuples exceeds guard of " + std::to_string(max_raw_tuples));
  }
  const int r = cluster.gpus_per_node;
  const int n = cluster.node_count;
  std::vector<PlanResult> results;
  ShardingPlan plan;
  for (int p0 = 1; p0 <= r; ++p0)
    for (int p1 = 1; p1 <= n; ++p1)
      for (int g0 = 1; g0 <= r; ++g0)
        for (int g1 = 1; g1 <= n; ++g1)
          for (int os0 = 1; os0 <= r; ++os0)
            for (int os1 = 1; os1 <= n; ++os1) {
              plan.p = {p0, p1};
              plan.g = {g0, g1};
              plan.os = {os0, os1};
              if (!validate_plan(plan, cluster).ok()) continue;
              results.push_back(
                  evaluate_plan(model, cluster, plan, profile, cfg));
            }
  return finish_report(std::move(results), grid, false);
}

std::vector<PresetResult> compare_presets(const ModelSpec& model,
                                          const ClusterSpec& cluster,
                                          const BandwidthProfile& profile,
                                          const CostConfig& cfg) {
  std::vector<PresetResult> rows;
  for (const auto& name : preset_names()) {
    PresetResult row;
    row.name = name;
    try {
      const ShardingPlan plan = preset(name, cluster);
      row.result = evaluate_plan(model, cluster, plan, profile, cfg);
    } catch (const InfeasibleError& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  {
    PresetResult row;
    row.name = "solver";
    try {
      row.result = solve(model, cluster, profile, cfg).best;
    } catch (const NoFeasiblePlanError& e) {
      row.result = e.closest();
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const PresetResult& a, const PresetResult& b) {
                     const bool ha = a.result.has_value();
                     const bool hb = b.result.has_value();
                     if (ha != hb) return ha;
                     if (!ha) return a.name < b.name;
                     if (a.result->time.total != b.result->time.total) {
                       return a.result->time.total < b.result->time.total;
                     }
                     return a.name < b.name;
                   });
  return rows;
}

}  // namespace shardplan
