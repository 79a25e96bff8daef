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

#include "shardplan/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace shardplan {

namespace {

DeviceMesh ratio_mesh(const DeviceMesh& outer, const DeviceMesh& inner) {
  if (outer.per_node % inner.per_node != 0 || outer.nodes % inner.nodes != 0) {
    throw Error("mesh " + to_string(inner) + " does not nest in " +
                to_string(outer));
  }
  return DeviceMesh{outer.per_node / inner.per_node,
                    outer.nodes / inner.nodes};
}

}  // namespace

double time_params_sharding(const ModelSpec& model, const ShardingPlan& plan,
                            const BandwidthProfile& profile) {
  if (plan.sp() == 1) return 0.0;
  const DeviceMesh fwd_mesh = plan.p;
  const DeviceMesh bwd_mesh = plan.secondary_params.value_or(plan.p);
  double per_layer = 0.0;
  for (auto phi : model.module_params) {
    const std::uint64_t bytes =
        static_cast<std::uint64_t>(model.bytes_per_param) * phi;
    per_layer += profile.collective_time(CollectiveKind::AllGather, bytes,
                                         fwd_mesh) +
                 profile.collective_time(CollectiveKind::AllGather, bytes,
                                         bwd_mesh) +
                 profile.collective_time(CollectiveKind::ReduceScatter, bytes,
                                         fwd_mesh);
  }
  return static_cast<double>(model.micro_batch_count) * model.layer_count *
         per_layer;
}

std::uint64_t grad_bucket_count(const ModelSpec& model,
                                const ShardingPlan& plan,
                                const CostConfig& cfg) {
  const std::uint64_t bytes =
      static_cast<std::uint64_t>(model.bytes_per_grad) * model.total_params;
  const std::uint64_t per_bucket =
      cfg.bucket_size * static_cast<std::uint64_t>(plan.sp());
  return (bytes + per_bucket - 1) / per_bucket;
}

namespace {

// Bucketed AllReduce cost for one pass over the per-GPU gradient shard.
double bucketed_allreduce(const ModelSpec& model, const ShardingPlan& plan,
                          const BandwidthProfile& profile,
                          const CostConfig& cfg, DeviceMesh mesh) {
  const std::uint64_t count = grad_bucket_count(model, plan, cfg);
  const double t_full = profile.collective_time(CollectiveKind::AllReduce,
                                                cfg.bucket_size, mesh);
  if (!cfg.exact_residual_buckets) {
    return static_cast<double>(count) * t_full;
  }
  const double per_gpu_bytes =
      static_cast<double>(model.bytes_per_grad) * model.total_params /
      plan.sp();
  const std::uint64_t full = static_cast<std::uint64_t>(
      per_gpu_bytes / static_cast<double>(cfg.bucket_size));
  const double residual = per_gpu_bytes - static_cast<double>(full) *
                                              cfg.bucket_size;
  double t = static_cast<double>(full) * t_full;
  if (residual > 0.5) {
    t += profile.collective_time(CollectiveKind::AllReduce,
                                 static_cast<std::uint64_t>(
                                     std::llround(residual)),
                                 mesh);
  }
  return t;
}

}  // namespace

double time_os_allreduce(const ModelSpec& model, const ClusterSpec& cluster,
                         const ShardingPlan& plan,
                         const BandwidthProfile& profile,
                         const CostConfig& cfg) {
  const DeviceMesh mesh = ratio_mesh(cluster.dp_mesh, plan.p);
  if (mesh.size() == 1) return 0.0;
  return bucketed_allreduce(model, plan, profile, cfg, mesh);
}

double time_os_broadcast(const ModelSpec& model, const ShardingPlan& plan,
                         const BandwidthProfile& profile) {
  if (plan.sos() == plan.sp()) return 0.0;
  const DeviceMesh mesh = ratio_mesh(plan.os, plan.p);
  const int shards = plan.sos() / plan.sp();
  const std::uint64_t shard_bytes = static_cast<std::uint64_t>(std::llround(
      static_cast<double>(model.bytes_per_param) * model.total_params /
      plan.sos()));
  return static_cast<double>(shards) *
         profile.collective_time(CollectiveKind::Broadcast, shard_bytes, mesh);
}

double time_grads_sharding(const ModelSpec& model, const ShardingPlan& plan,
                           const BandwidthProfile& profile,
                           const CostConfig& cfg) {
  if (model.micro_batch_count == 1 || plan.sg() == plan.sp()) return 0.0;
  const DeviceMesh mesh = ratio_mesh(plan.g, plan.p);
  return static_cast<double>(model.micro_batch_count - 1) *
         bucketed_allreduce(model, plan, profile, cfg, mesh);
}

TimeBreakdown total_comm_time(const ModelSpec& model,
                              const ClusterSpec& cluster,
                              const ShardingPlan& plan,
                              const BandwidthProfile& profile,
                              const CostConfig& cfg) {
  TimeBreakdown t;
  t.t_p = time_params_sharding(model, plan, profile);
  t.t_g = time_grads_sharding(model, plan, profile, cfg);
  t.t_os_allreduce = time_os_allreduce(model, cluster, plan, profile, cfg);
  t.t_os_broadcast = time_os_broadcast(model, plan, profile);
  t.total = t.t_p + t.t_g + t.t_os_allreduce + t.t_os_broadcast;
  return t;
}

MemoryBreakdown memory_breakdown(const ModelSpec& model,
                                 const ShardingPlan& plan,
                                 const CostConfig& cfg) {
  MemoryBreakdown m;
  const double phi = static_cast<double>(model.total_params);
  m.d_params = model.bytes_per_param * phi / plan.sp();
  if (plan.secondary_params) {
    m.d_params += model.bytes_per_param * phi / plan.secondary_params->size();
  }
  m.d_grads = model.bytes_per_grad * phi / plan.sg();
  m.d_os = model.bytes_per_os_per_param * phi / plan.sos();
  m.d_modelstate = m.d_params + m.d_grads + m.d_os;

  const double lbsh = static_cast<double>(model.layer_count) *
                      model.micro_batch * model.seq_len * model.hidden;
  m.d_activation = (cfg.activation_mode == ActivationMode::FullRecompute
                        ? cfg.activation_coeff_recompute
                        : cfg.activation_coeff_full) *
                   lbsh;

  m.d_tmp = static_cast<double>(cfg.tmp_in_flight_buckets) * cfg.bucket_size;
  if (cfg.tmp_include_gather_buffer && !model.module_params.empty()) {
    const std::uint64_t largest =
        *std::max_element(model.module_params.begin(),
                          model.module_params.end());
    m.d_tmp += static_cast<double>(model.bytes_per_param) * largest;
  }
  m.d_total = m.d_modelstate + m.d_activation + m.d_tmp;
  return m;
}

double flops_per_step(const ModelSpec& model, const CostConfig& cfg) {
  const double phi = static_cast<double>(model.total_params);
  const double lhs = static_cast<double>(model.layer_count) * model.hidden *
                     model.seq_len;
  return static_cast<double>(model.micro_batch_count) * model.micro_batch *
         model.seq_len *
         (cfg.flops_coeff_param * phi + cfg.flops_coeff_attn * lhs);
}

double mfu(const ModelSpec& model, double step_time_s,
           double peak_flops_per_gpu, int gpu_count, const CostConfig& cfg) {
  if (step_time_s <= 0.0) throw Error("mfu: step_time must be > 0");
  return flops_per_step(model, cfg) /
         (step_time_s * peak_flops_per_gpu * gpu_count);
}

TensorPartition partition_tensors_greedy(
    const std::vector<std::uint64_t>& tensor_sizes, int shard_count) {
  if (shard_count < 1) throw Error("partition: shard_count must be >= 1");
  for (auto s : tensor_sizes) {
    if (s == 0) throw Error("partition: tensor sizes must be positive");
  }
  std::vector<int> order(tensor_sizes.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (tensor_sizes[a] != tensor_sizes[b]) {
      return tensor_sizes[a] > tensor_sizes[b];
    }
    return a < b;
  });

  using Load = std::pair<std::uint64_t, int>;  // (bytes, shard index)
  std::priority_queue<Load, std::vector<Load>, std::greater<>> heap;
  for (int k = 0; k < shard_count; ++k) heap.emplace(0, k);

  TensorPartition part;
  part.assignment.assign(tensor_sizes.size(), -1);
  part.shard_sizes.assign(shard_count, 0);
  for (int idx : order) {
    auto [load, shard] = heap.top();
    heap.pop();
    part.assignment[idx] = shard;
    part.shard_sizes[shard] += tensor_sizes[idx];
    heap.emplace(part.shard_sizes[shard], shard);
  }
  return part;
}

}  // namespace shardplan
