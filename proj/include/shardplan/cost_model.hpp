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
#include <vector>

#include "shardplan/comm_model.hpp"
#include "shardplan/domain.hpp"

namespace shardplan {

enum class ActivationMode { None, FullRecompute };

struct CostConfig {
  std::uint64_t bucket_size = std::uint64_t{1} << 27;  // U, 128 MiB

  ActivationMode activation_mode = ActivationMode::None;
  // d_activation = coeff * L * B * S * H bytes. The full coefficient covers
  // attention scores, MLP intermediates and dtype copies; the recompute
  // coefficient keeps only the retained FP16 layer inputs.
  double activation_coeff_full = 34.0;
  double activation_coeff_recompute = 2.0;

  // d_tmp = in_flight_buckets * U + (optionally) the largest gathered module.
  int tmp_in_flight_buckets = 2;
  bool tmp_include_gather_buffer = true;

  // Cost all gradient buckets at size U (ceil count, last bucket padded).
  // When false, the last bucket is costed at its true residual size.
  bool exact_residual_buckets = false;

  // Step FLOPs = M * B * S * (param_coeff * Phi + attn_coeff * L * H * S),
  // attention FLOPs not halved for the causal mask.
  double flops_coeff_param = 6.0;
  double flops_coeff_attn = 12.0;
};

struct TimeBreakdown {
  double t_p = 0.0;
  double t_g = 0.0;
  double t_os_allreduce = 0.0;  // T_os^0
  double t_os_broadcast = 0.0;  // T_os^1
  double total = 0.0;
};

struct MemoryBreakdown {
  double d_params = 0.0;
  double d_grads = 0.0;
  double d_os = 0.0;
  double d_modelstate = 0.0;
  double d_activation = 0.0;
  double d_tmp = 0.0;
  double d_total = 0.0;
};

/// Whole-tensor assignment of tensors to k shards (inter-tensor scheme).
struct TensorPartition {
  std::vector<int> assignment;             // tensor index -> shard index
  std::vector<std::uint64_t> shard_sizes;  // k byte totals
};

/// Per-step time for parameter sharding:
///   T_p = M * L * sum_i (2 t(AG, b*Phi_i, p) + t(RS, b*Phi_i, p))
/// With a ZeRO++-style secondary mesh, the backward AllGather runs on the
/// secondary mesh instead of the primary one.
double time_params_sharding(const ModelSpec& model, const ShardingPlan& plan,
                            const BandwidthProfile& profile);

/// Number of gradient AllReduce buckets: ceil(bytes_per_grad*Phi / (s_p*U)).
std::uint64_t grad_bucket_count(const ModelSpec& model,
                                const ShardingPlan& plan,
                                const CostConfig& cfg);

/// T_os^0: bucketed AllReduce over the (s_dp^0/s_p^0) x (s_dp^1/s_p^1) mesh.
double time_os_allreduce(const ModelSpec& model, const ClusterSpec& cluster,
                         const ShardingPlan& plan,
                         const BandwidthProfile& profile,
                         const CostConfig& cfg);

/// T_os^1: s_os/s_p broadcasts of b*Phi/s_os bytes over the
/// (s_os^0/s_p^0) x (s_os^1/s_p^1) mesh.
double time_os_broadcast(const ModelSpec& model, const ShardingPlan& plan,
                         const BandwidthProfile& profile);

/// T_g: per-micro-batch AllReduce (all but the last) when s_g > s_p, over
/// the (s_g^0/s_p^0) x (s_g^1/s_p^1) mesh.
double time_grads_sharding(const ModelSpec& model, const ShardingPlan& plan,
                           const BandwidthProfile& profile,
                           const CostConfig& cfg);

/// T_comm = T_p + T_g + T_os^0 + T_os^1; total is the exact sum of the
/// components as returned.
TimeBreakdown total_comm_time(const ModelSpec& model,
                              const ClusterSpec& cluster,
                              const ShardingPlan& plan,
                              const BandwidthProfile& profile,
                              const CostConfig& cfg);

/// D_modelstate = b_p*Phi/s_p + b_g*Phi/s_g + b_os*Phi/s_os (plus the
/// secondary parameter shard when present); D_total adds activations and
/// temporary buffers per the config.
MemoryBreakdown memory_breakdown(const ModelSpec& model,
                                 const ShardingPlan& plan,
                                 const CostConfig& cfg);

double flops_per_step(const ModelSpec& model, const CostConfig& cfg);

double mfu(const ModelSpec& model, double step_time_s,
           double peak_flops_per_gpu, int gpu_count, const CostConfig& cfg);

/// Longest-processing-time greedy: sizes sorted descending, each assigned to
/// the currently smallest shard (ties to the lower shard index). The max
/// shard is within (4/3 - 1/(3k)) of optimal.
TensorPartition partition_tensors_greedy(
    const std::vector<std::uint64_t>& tensor_sizes, int shard_count);

}  // namespace shardplan
