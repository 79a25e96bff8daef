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

#include "shardplan/overlap_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

namespace shardplan {

const char* to_string(OverlapTier tier) {
  switch (tier) {
    case OverlapTier::None: return "none";
    case OverlapTier::AgRs: return "ag_rs";
    case OverlapTier::AgRsAr: return "ag_rs_ar";
    case OverlapTier::AgRsArBc: return "ag_rs_ar_bc";
  }
  return "?";
}

OverlapTier tier_from_string(const std::string& name) {
  if (name == "none") return OverlapTier::None;
  if (name == "ag_rs") return OverlapTier::AgRs;
  if (name == "ag_rs_ar") return OverlapTier::AgRsAr;
  if (name == "ag_rs_ar_bc") return OverlapTier::AgRsArBc;
  throw Error("unknown overlap tier: " + name);
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::FwdCompute: return "fwd";
    case EventKind::BwdGradInput: return "gi";
    case EventKind::BwdGradWeight: return "gw";
    case EventKind::RecomputeFwd: return "recompute";
    case EventKind::AllGather: return "allgather";
    case EventKind::ReduceScatter: return "reducescatter";
    case EventKind::AllReduceBucket: return "allreduce";
    case EventKind::BroadcastShard: return "broadcast";
  }
  return "?";
}

namespace {

bool is_compute(EventKind kind) {
  return kind == EventKind::FwdCompute || kind == EventKind::BwdGradInput ||
         kind == EventKind::BwdGradWeight || kind == EventKind::RecomputeFwd;
}

struct ComputeTimes {
  std::vector<double> fwd, gw, gi;  // per module of a layer
  double head_fwd = 0.0, head_gw = 0.0, head_gi = 0.0;
};

ComputeTimes resolve_compute_times(const ModelSpec& model,
                                   const CostConfig& cfg,
                                   const SimConfig& sim) {
  const int k = model.modules_per_layer;
  ComputeTimes t;
  if (sim.compute_time_source == ComputeTimeSource::Table) {
    if (static_cast<int>(sim.fwd_times.size()) != k ||
        static_cast<int>(sim.bwd_grad_weight_times.size()) != k ||
        static_cast<int>(sim.bwd_grad_input_times.size()) != k) {
      throw Error("sim: measured time tables must have one entry per module");
    }
    for (const auto* v :
         {&sim.fwd_times, &sim.bwd_grad_weight_times,
          &sim.bwd_grad_input_times}) {
      for (double x : *v) {
        if (x <= 0.0) throw Error("sim: measured times must be > 0");
      }
    }
    t.fwd = sim.fwd_times;
    t.gw = sim.bwd_grad_weight_times;
    t.gi = sim.bwd_grad_input_times;
    t.head_fwd = sim.head_fwd_time;
    t.head_gw = t.head_gi = sim.head_bwd_time / 2.0;
    return t;
  }
  const double denom = sim.peak_flops_per_gpu * sim.compute_efficiency;
  if (denom <= 0.0) throw Error("sim: peak flops and efficiency must be > 0");
  const double bs = static_cast<double>(model.micro_batch) * model.seq_len;
  const double layer_params =
      static_cast<double>(model.layer_template_params());
  // One third of the step coefficients each for forward, grad-weight and
  // grad-input; per-layer attention FLOPs spread over modules by size.
  const double attn_layer = cfg.flops_coeff_attn / 3.0 * bs * model.hidden *
                            model.seq_len;
  t.fwd.resize(k);
  for (int i = 0; i < k; ++i) {
    const double phi = static_cast<double>(model.module_params[i]);
    const double flops = cfg.flops_coeff_param / 3.0 * bs * phi +
                         attn_layer * (phi / layer_params);
    t.fwd[i] = flops / denom;
  }
  t.gw = t.fwd;
  t.gi = t.fwd;
  const double head_params = static_cast<double>(
      model.total_params -
      static_cast<std::uint64_t>(model.layer_count) *
          model.layer_template_params());
  t.head_fwd = cfg.flops_coeff_param / 3.0 * bs * head_params / denom;
  t.head_gw = t.head_gi = t.head_fwd;
  return t;
}

class ScheduleBuilder {
 public:
  ScheduleBuilder(const ModelSpec& model, const ClusterSpec& cluster,
                  const ShardingPlan& plan, const BandwidthProfile& profile,
                  const CostConfig& cfg, const SimConfig& sim)
      : model_(model), cluster_(cluster), plan_(plan), profile_(profile),
        cfg_(cfg), sim_(sim), times_(resolve_compute_times(model, cfg, sim)) {
    agrs_stream_ = 1;
    arbc_stream_ = (sim.comm_streams >= 2) ? 2 : 1;
    graph_.stream_count = 1 + (sim.comm_streams >= 2 ? 2 : 1);
    stream_tail_.assign(graph_.stream_count, -1);
    head_params_ = model.total_params -
                   static_cast<std::uint64_t>(model.layer_count) *
                       model.layer_template_params();
  }

  EventGraph build() {
    const bool sharded = plan_.sp() > 1;
    const int n_bc = (plan_.sos() > plan_.sp()) ? plan_.sos() / plan_.sp() : 0;
    const bool mirror_bc = n_bc > 0 &&
                           sim_.overlap_tier == OverlapTier::AgRsArBc;
    if (n_bc > 0) {
      bc_dur_ = profile_.collective_time(
          CollectiveKind::Broadcast,
          static_cast<std::uint64_t>(
              std::llround(static_cast<double>(model_.bytes_per_param) *
                           model_.total_params / plan_.sos())),
          DeviceMesh{plan_.os.per_node / plan_.p.per_node,
                     plan_.os.nodes / plan_.p.nodes});
    }
    if (mirror_bc) {
      // Steady state: the previous step's updated-parameter broadcasts run
      // at the head of this step's timeline and gate the first forward.
      for (int s = 0; s < n_bc; ++s) {
        bc_events_.push_back(
            add(EventKind::BroadcastShard, -1, s, bc_dur_, arbc_stream_, {}));
      }
    }

    for (int m = 0; m < model_.micro_batch_count; ++m) {
      forward_pass(sharded, mirror_bc && m == 0);
      backward_pass(sharded, m);
    }

    if (n_bc > 0 && !mirror_bc) {
      // Barrier semantics: broadcasts of updated shards wait for every
      // gradient to be fully synchronized (the AccumulateGrad post-hook).
      std::vector<int> barrier = rs_events_;
      barrier.insert(barrier.end(), ar_events_.begin(), ar_events_.end());
      for (int s = 0; s < n_bc; ++s) {
        add(EventKind::BroadcastShard, -1, s, bc_dur_, arbc_stream_, barrier);
      }
    }
    return std::move(graph_);
  }

 private:
  bool serialized(EventKind kind) const {
    switch (sim_.overlap_tier) {
      case OverlapTier::None:
        return true;
      case OverlapTier::AgRs:
        return is_compute(kind) || kind == EventKind::AllReduceBucket ||
               kind == EventKind::BroadcastShard;
      case OverlapTier::AgRsAr:
        return is_compute(kind) || kind == EventKind::BroadcastShard;
      case OverlapTier::AgRsArBc:
        return is_compute(kind);
    }
    return true;
  }

  int add(EventKind kind, int layer, int module, double duration, int stream,
          std::vector<int> deps) {
    Event e;
    e.id = static_cast<int>(graph_.events.size());
    e.kind = kind;
    e.layer = layer;
    e.module = module;
    e.duration = duration;
    e.stream = stream;
    if (stream_tail_[stream] >= 0) deps.push_back(stream_tail_[stream]);
    if (serialized(kind) && chain_tail_ >= 0) deps.push_back(chain_tail_);
    std::sort(deps.begin(), deps.end());
    deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
    e.depends_on = std::move(deps);
    stream_tail_[stream] = e.id;
    if (serialized(kind)) chain_tail_ = e.id;
    graph_.events.push_back(std::move(e));
    return graph_.events.back().id;
  }

  // Broadcast shard covering layer l (broadcast order follows layer order).
  int bc_for_layer(int layer) const {
    const int n_bc = static_cast<int>(bc_events_.size());
    const int idx =
        ((layer + 1) * n_bc + model_.layer_count - 1) / model_.layer_count - 1;
    return bc_events_[std::max(0, idx)];
  }

  double ag_time(int module, bool backward) const {
    DeviceMesh mesh = plan_.p;
    if (backward && plan_.secondary_params) mesh = *plan_.secondary_params;
    return profile_.collective_time(
        CollectiveKind::AllGather,
        static_cast<std::uint64_t>(model_.bytes_per_param) *
            model_.module_params[module],
        mesh);
  }

  double rs_time(int module) const {
    return profile_.collective_time(
        CollectiveKind::ReduceScatter,
        static_cast<std::uint64_t>(model_.bytes_per_grad) *
            model_.module_params[module],
        plan_.p);
  }

  void forward_pass(bool sharded, bool gated_by_bc) {
    const int L = model_.layer_count;
    const int K = model_.modules_per_layer;
    // fwd_ag[l][i]: this pass's gather for layer l module i.
    std::vector<std::vector<int>> fwd_ag(L);
    auto issue_layer_ags = [&](int layer, int anchor) {
      fwd_ag[layer].resize(K);
      for (int i = 0; i < K; ++i) {
        std::vector<int> deps;
        if (anchor >= 0) deps.push_back(anchor);
        if (gated_by_bc) deps.push_back(bc_for_layer(layer));
        fwd_ag[layer][i] = add(EventKind::AllGather, layer, i,
                               ag_time(i, false), agrs_stream_, deps);
      }
    };
    if (sharded) {
      issue_layer_ags(0, chain_tail_);
      if (L > 1) issue_layer_ags(1, chain_tail_);
    }
    for (int l = 0; l < L; ++l) {
      if (sharded && l >= 1 && l + 1 < L) issue_layer_ags(l + 1, chain_tail_);
      for (int i = 0; i < K; ++i) {
        std::vector<int> deps;
        if (sharded) deps.push_back(fwd_ag[l][i]);
        if (gated_by_bc) deps.push_back(bc_for_layer(l));
        add(EventKind::FwdCompute, l, i, times_.fwd[i], 0, deps);
      }
    }
    if (head_params_ > 0) {
      std::vector<int> deps;
      if (gated_by_bc) deps.push_back(bc_for_layer(L - 1));
      add(EventKind::FwdCompute, -1, -1, times_.head_fwd, 0, deps);
    }
  }

  struct BucketState {
    bool active = false;
    DeviceMesh mesh;
    double full_dur = 0.0;
    std::uint64_t acc = 0;        // grad bytes, scaled by s_p
    std::uint64_t threshold = 0;  // s_p * U
    std::vector<int> pending;     // grad-ready events since last flush
    int next_index = 0;
  };

  void grad_ready(BucketState& b, int event, std::uint64_t full_bytes) {
    if (!b.active) return;
    b.acc += full_bytes;
    b.pending.push_back(event);
    while (b.acc >= b.threshold) {
      add(EventKind::AllReduceBucket, -1, b.next_index++, b.full_dur,
          arbc_stream_, b.pending);
      ar_events_.push_back(graph_.events.back().id);
      b.acc -= b.threshold;
      b.pending.assign(1, event);
    }
  }

  void flush_tail(BucketState& b) {
    if (!b.active || b.acc == 0) return;
    double dur = b.full_dur;
    if (cfg_.exact_residual_buckets) {
      const std::uint64_t residual_bytes = b.acc / plan_.sp();
      dur = profile_.collective_time(CollectiveKind::AllReduce,
                                     std::max<std::uint64_t>(residual_bytes, 1),
                                     b.mesh);
    }
    add(EventKind::AllReduceBucket, -1, b.next_index++, dur, arbc_stream_,
        b.pending);
    ar_events_.push_back(graph_.events.back().id);
    b.acc = 0;
    b.pending.clear();
  }

  void backward_pass(bool sharded, int micro_batch) {
    const int L = model_.layer_count;
    const int K = model_.modules_per_layer;
    const bool last = micro_batch == model_.micro_batch_count - 1;

    BucketState bucket;
    if (last) {
      const DeviceMesh mesh{cluster_.dp_mesh.per_node / plan_.p.per_node,
                            cluster_.dp_mesh.nodes / plan_.p.nodes};
      bucket.active = mesh.size() > 1;
      bucket.mesh = mesh;
    } else if (plan_.sg() > plan_.sp()) {
      bucket.mesh = DeviceMesh{plan_.g.per_node / plan_.p.per_node,
                               plan_.g.nodes / plan_.p.nodes};
      bucket.active = true;
    }
    if (bucket.active) {
      bucket.threshold =
          cfg_.bucket_size * static_cast<std::uint64_t>(plan_.sp());
      bucket.full_dur = profile_.collective_time(CollectiveKind::AllReduce,
                                                 cfg_.bucket_size, bucket.mesh);
    }

    auto module_backward = [&](int layer, int module, bool needs_ag,
                               int own_ag) {
      std::vector<int> gw_deps;
      if (needs_ag) gw_deps.push_back(own_ag);
      const int gw = add(EventKind::BwdGradWeight, layer, module,
                         times_.gw[module], 0, gw_deps);
      int ready = gw;
      if (sharded) {
        ready = add(EventKind::ReduceScatter, layer, module, rs_time(module),
                    agrs_stream_, {gw});
        rs_events_.push_back(ready);
      }
      add(EventKind::BwdGradInput, layer, module, times_.gi[module], 0, {});
      grad_ready(bucket, ready,
                 static_cast<std::uint64_t>(model_.bytes_per_grad) *
                     model_.module_params[module]);
    };

    if (head_params_ > 0) {
      const int gw = add(EventKind::BwdGradWeight, -1, -1, times_.head_gw, 0,
                         {});
      add(EventKind::BwdGradInput, -1, -1, times_.head_gi, 0, {});
      grad_ready(bucket, gw,
                 static_cast<std::uint64_t>(model_.bytes_per_grad) *
                     head_params_);
    }

    if (!sim_.recompute) {
      // Fig-7(b) shape: fetch only the next module's parameters, triggered
      // at the current grad-weight's start.
      std::vector<int> ag(L * K, -1);
      auto ag_slot = [&](int layer, int module) -> int& {
        return ag[layer * K + module];
      };
      auto issue_ag = [&](int layer, int module) {
        std::vector<int> deps;
        if (chain_tail_ >= 0) deps.push_back(chain_tail_);
        ag_slot(layer, module) = add(EventKind::AllGather, layer, module,
                                     ag_time(module, true), agrs_stream_,
                                     deps);
      };
      if (sharded) issue_ag(L - 1, K - 1);
      for (int l = L - 1; l >= 0; --l) {
        for (int i = K - 1; i >= 0; --i) {
          if (sharded) {
            // Prefetch the next backward module before this one computes.
            const int nl = (i > 0) ? l : l - 1;
            const int ni = (i > 0) ? i - 1 : K - 1;
            if (nl >= 0) issue_ag(nl, ni);
          }
          module_backward(l, i, sharded, sharded ? ag_slot(l, i) : -1);
        }
      }
    } else {
      // Fig-7(c) shape: a secondary forward per layer prefetches the next
      // layer's parameters and retains its own gathered set for the
      // gradient computation.
      std::vector<int> ag(L * K, -1);
      auto issue_layer = [&](int layer) {
        const int anchor = chain_tail_;
        for (int i = 0; i < K; ++i) {
          std::vector<int> deps;
          if (anchor >= 0) deps.push_back(anchor);
          ag[layer * K + i] = add(EventKind::AllGather, layer, i,
                                  ag_time(i, true), agrs_stream_, deps);
        }
      };
      if (sharded) issue_layer(L - 1);
      for (int l = L - 1; l >= 0; --l) {
        if (sharded && l - 1 >= 0) issue_layer(l - 1);
        for (int i = 0; i < K; ++i) {
          std::vector<int> deps;
          if (sharded) deps.push_back(ag[l * K + i]);
          add(EventKind::RecomputeFwd, l, i, times_.fwd[i], 0, deps);
        }
        for (int i = K - 1; i >= 0; --i) {
          module_backward(l, i, false, -1);
        }
      }
    }
    flush_tail(bucket);
  }

  const ModelSpec& model_;
  const ClusterSpec& cluster_;
  const ShardingPlan& plan_;
  const BandwidthProfile& profile_;
  const CostConfig& cfg_;
  const SimConfig& sim_;
  ComputeTimes times_;

  EventGraph graph_;
  int chain_tail_ = -1;
  std::vector<int> stream_tail_;
  int agrs_stream_ = 1;
  int arbc_stream_ = 2;
  std::uint64_t head_params_ = 0;
  double bc_dur_ = 0.0;
  std::vector<int> bc_events_;
  std::vector<int> rs_events_;
  std::vector<int> ar_events_;
};

}  // namespace

EventGraph build_schedule(const ModelSpec& model, const ClusterSpec& cluster,
                          const ShardingPlan& plan,
                          const BandwidthProfile& profile,
                          const CostConfig& cfg, const SimConfig& sim) {
  model.check();
  cluster.check();
  const auto validation = validate_plan(plan, cluster);
  if (!validation.ok()) {
    throw Error("build_schedule: plan " + to_string(plan) + " violates " +
                validation.violations.front().constraint);
  }
  if (sim.comm_streams < 1 || sim.comm_streams > 2) {
    throw Error("sim: comm_streams must be 1 or 2");
  }
  return ScheduleBuilder(model, cluster, plan, profile, cfg, sim).build();
}

Timeline simulate_step(const EventGraph& graph) {
  const auto& events = graph.events;
  const size_t n = events.size();
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> dependents(n);
  for (const auto& e : events) {
    for (int d : e.depends_on) {
      if (d < 0 || d >= static_cast<int>(n)) {
        throw Error("simulate: dangling dependency id");
      }
      dependents[d].push_back(e.id);
      ++indegree[e.id];
    }
  }

  std::vector<double> ready(n, 0.0);
  std::vector<double> start(n, 0.0), end(n, 0.0);
  std::vector<double> stream_free(graph.stream_count, 0.0);
  using QItem = std::pair<double, int>;  // (ready time, id): FIFO by id
  std::priority_queue<QItem, std::vector<QItem>, std::greater<>> queue;
  for (const auto& e : events) {
    if (indegree[e.id] == 0) queue.emplace(0.0, e.id);
  }
  size_t scheduled = 0;
  Timeline tl;
  tl.events = events;
  tl.streams.resize(graph.stream_count);
  while (!queue.empty()) {
    const auto [t_ready, id] = queue.top();
    queue.pop();
    const auto& e = events[id];
    if (e.stream < 0 || e.stream >= graph.stream_count) {
      throw Error("simulate: event stream out of range");
    }
    start[id] = std::max(t_ready, stream_free[e.stream]);
    end[id] = start[id] + e.duration;
    stream_free[e.stream] = end[id];
    tl.streams[e.stream].push_back({id, start[id], end[id]});
    ++scheduled;
    for (int dep : dependents[id]) {
      ready[dep] = std::max(ready[dep], end[id]);
      if (--indegree[dep] == 0) queue.emplace(ready[dep], dep);
    }
  }
  if (scheduled != n) throw Error("simulate: dependency cycle detected");

  tl.busy.assign(graph.stream_count, 0.0);
  for (int s = 0; s < graph.stream_count; ++s) {
    for (const auto& se : tl.streams[s]) {
      tl.busy[s] += se.end - se.start;
      tl.step_time = std::max(tl.step_time, se.end);
    }
  }
  tl.idle.resize(graph.stream_count);
  for (int s = 0; s < graph.stream_count; ++s) {
    tl.idle[s] = tl.step_time - tl.busy[s];
  }
  return tl;
}

BubbleReport bubble_report(const Timeline& timeline) {
  BubbleReport report;
  report.stream_idle = timeline.idle;
  if (timeline.streams.empty()) return report;
  report.compute_idle_total =
      timeline.idle.empty() ? 0.0 : timeline.idle.front();
  double cursor = 0.0;
  for (const auto& se : timeline.streams.front()) {
    if (se.start > cursor) report.compute_intervals.push_back({cursor, se.start});
    cursor = std::max(cursor, se.end);
  }
  if (cursor < timeline.step_time) {
    report.compute_intervals.push_back({cursor, timeline.step_time});
  }
  return report;
}

namespace {

std::string event_name(const Event& e) {
  std::ostringstream os;
  os << to_string(e.kind);
  switch (e.kind) {
    case EventKind::AllReduceBucket:
      os << " B" << e.module;
      break;
    case EventKind::BroadcastShard:
      os << " S" << e.module;
      break;
    default:
      if (e.layer >= 0) {
        os << " L" << e.layer << " M" << e.module;
      } else {
        os << " head";
      }
  }
  return os.str();
}

}  // namespace

std::string render_trace(const Timeline& timeline) {
  std::ostringstream os;
  os << "[\n";
  bool first = true;
  for (size_t s = 0; s < timeline.streams.size(); ++s) {
    for (const auto& se : timeline.streams[s]) {
      const auto& e = timeline.events[se.event_id];
      if (!first) os << ",\n";
      first = false;
      os << "{\"name\":\"" << event_name(e) << "\",\"ph\":\"X\",\"ts\":"
         << std::llround(se.start * 1e6) << ",\"dur\":"
         << std::llround((se.end - se.start) * 1e6) << ",\"pid\":1,\"tid\":"
         << s << "}";
    }
  }
  os << "\n]\n";
  return os.str();
}

void export_trace(const Timeline& timeline, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trace file " + path);
  out << render_trace(timeline);
  if (!out) throw Error("failed writing trace file " + path);
}

}  // namespace shardplan
