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

#include <string>
#include <vector>

#include "shardplan/cost_model.hpp"
#include "shardplan/domain.hpp"

namespace shardplan {

/// Cumulative overlap capability, mirroring the ablation tiers:
///   None       — every communication event serializes with compute
///   AgRs       — AllGather/ReduceScatter overlap (parameter sharding)
///   AgRsAr     — gradient AllReduce buckets overlap too
///   AgRsArBc   — updated-parameter broadcasts overlap the next forward
enum class OverlapTier { None, AgRs, AgRsAr, AgRsArBc };

const char* to_string(OverlapTier tier);
OverlapTier tier_from_string(const std::string& name);

enum class EventKind {
  FwdCompute,
  BwdGradInput,
  BwdGradWeight,
  RecomputeFwd,
  AllGather,
  ReduceScatter,
  AllReduceBucket,
  BroadcastShard,
};

const char* to_string(EventKind kind);

struct Event {
  int id = -1;
  EventKind kind = EventKind::FwdCompute;
  int layer = -1;   // -1 for events without a layer (buckets, shards, head)
  int module = -1;  // module index, bucket index, or shard index by kind
  double duration = 0.0;
  std::vector<int> depends_on;
  int stream = 0;
};

struct EventGraph {
  std::vector<Event> events;
  int stream_count = 1;
};

enum class ComputeTimeSource { Flops, Table };

struct SimConfig {
  OverlapTier overlap_tier = OverlapTier::AgRsArBc;
  bool recompute = false;
  int comm_streams = 2;  // 1: all comm shares a stream; 2: AG/RS vs AR/BC
  ComputeTimeSource compute_time_source = ComputeTimeSource::Flops;
  double peak_flops_per_gpu = 312e12;
  double compute_efficiency = 0.6;
  // Measured per-module times (seconds, one entry per module of a layer);
  // used when compute_time_source == Table.
  std::vector<double> fwd_times;
  std::vector<double> bwd_grad_weight_times;
  std::vector<double> bwd_grad_input_times;
  double head_fwd_time = 0.0;
  double head_bwd_time = 0.0;  // split evenly into grad-weight/grad-input
};

struct ScheduledEvent {
  int event_id = -1;
  double start = 0.0;
  double end = 0.0;
};

struct Timeline {
  std::vector<Event> events;                         // by event id
  std::vector<std::vector<ScheduledEvent>> streams;  // per stream, by start
  double step_time = 0.0;
  std::vector<double> busy;  // per stream
  std::vector<double> idle;  // per stream: step_time - busy
};

struct IdleInterval {
  double start = 0.0;
  double end = 0.0;
};

struct BubbleReport {
  double compute_idle_total = 0.0;
  std::vector<IdleInterval> compute_intervals;
  std::vector<double> stream_idle;  // all streams, indexed by stream id
};

/// One training step of one representative rank as a dependency graph.
/// Stream 0 is compute; AG/RS ride stream 1 and AR/BC stream 2 (or 1 when
/// comm_streams is 1). Event durations come from the profile (collectives)
/// and the sim config (compute), so at tier None the step time telescopes
/// to total compute + total_comm_time exactly.
///
/// At tier AgRsArBc the broadcasts placed at the start of the timeline are
/// the previous step's (steady-state view): forward of layer l and its
/// AllGathers wait on the broadcast shard covering l, everything else is
/// unchanged, and the step's own broadcasts are charged to the next step.
EventGraph build_schedule(const ModelSpec& model, const ClusterSpec& cluster,
                          const ShardingPlan& plan,
                          const BandwidthProfile& profile,
                          const CostConfig& cfg, const SimConfig& sim);

/// Deterministic earliest-start list scheduling; ready ties break FIFO by
/// event id. Throws on dependency cycles.
Timeline simulate_step(const EventGraph& graph);

BubbleReport bubble_report(const Timeline& timeline);

/// Trace Event Format: one complete ("ph":"X") event per scheduled event,
/// microsecond timestamps, tid = stream. Byte-deterministic.
std::string render_trace(const Timeline& timeline);
void export_trace(const Timeline& timeline, const std::string& path);

}  // namespace shardplan
