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
#include <map>
#include <string>
#include <vector>

#include "shardplan/domain.hpp"

namespace shardplan {

enum class CollectiveKind { AllGather, ReduceScatter, AllReduce, Broadcast };

const char* to_string(CollectiveKind kind);
CollectiveKind collective_from_string(const std::string& name);

/// Ring-model parameters: per-transmission latency alpha and link bandwidth.
struct AlphaBetaParams {
  double alpha = 0.0;        // seconds
  double link_bandwidth = 1; // bytes/second
};

/// Analytic ring cost:
///   AllGather/ReduceScatter/Broadcast: (p-1) * (alpha + v / (w*p))
///   AllReduce:                       2*(p-1) * (alpha + v / (w*p))
/// p = 1 costs nothing.
double ring_time(CollectiveKind kind, double size_bytes, int participants,
                 const AlphaBetaParams& ab);

/// Measured effective bandwidths w(op, size, mesh), queried as t = v / w.
///
/// The size named in each cost formula is the full message size (2*Phi_i for
/// the per-module AllGather/ReduceScatter, the bucket size U for AllReduce,
/// 2*Phi/s_os per broadcast), and the stored bandwidth is the effective rate
/// for that size, nccl-tests style.
///
/// Queries between profiled sizes interpolate bandwidth linearly in
/// log2(size); outside the profiled range they clamp to the nearest
/// endpoint. A (kind, mesh) pair with no series falls back to any profiled
/// mesh of the same kind and participant count; failing that the query
/// throws. Immutable after load; queries are pure.
class BandwidthProfile {
 public:
  struct Point {
    std::uint64_t size = 0;   // bytes
    double bandwidth = 0.0;   // bytes/second
  };
  using Key = std::tuple<CollectiveKind, int, int>;  // kind, per_node, nodes

  /// Points need not arrive sorted; the series is canonicalized on insert.
  /// Throws on duplicate sizes or non-positive bandwidth.
  void add_series(CollectiveKind kind, DeviceMesh mesh,
                  std::vector<Point> points);

  bool has_series(CollectiveKind kind, DeviceMesh mesh) const;
  bool empty() const { return series_.empty(); }

  double effective_bandwidth(CollectiveKind kind, std::uint64_t size_bytes,
                             DeviceMesh mesh) const;
  /// size / effective_bandwidth; 0 when size = 0 or mesh.size() = 1.
  double collective_time(CollectiveKind kind, std::uint64_t size_bytes,
                         DeviceMesh mesh) const;

  const std::map<Key, std::vector<Point>>& series() const { return series_; }

 private:
  const std::vector<Point>& resolve(CollectiveKind kind, DeviceMesh mesh) const;

  std::map<Key, std::vector<Point>> series_;
};

/// Builds a ring-model profile for test fixtures: ab_intra for single-node
/// meshes, ab_inter otherwise; w = size / ring_time. Meshes of size 1 are
/// skipped (collective_time short-circuits them).
BandwidthProfile synthetic_profile(const AlphaBetaParams& ab_intra,
                                   const AlphaBetaParams& ab_inter,
                                   const std::vector<DeviceMesh>& meshes,
                                   const std::vector<std::uint64_t>& sizes);

/// CSV import (header `op,size_bytes,gpus_per_node,nodes,bus_bw_bytes_per_s`).
/// Malformed rows and duplicate (op,size,mesh) keys throw with line numbers.
BandwidthProfile profile_from_csv(const std::string& csv_text);
BandwidthProfile load_profile_csv(const std::string& path);

/// Canonical JSON: object keyed by "op/per_node x nodes", arrays of
/// [size, bandwidth] pairs with sizes ascending. Round-trips byte-exactly.
std::string profile_to_canonical_json(const BandwidthProfile& profile);
BandwidthProfile profile_from_json(const std::string& json_text);
BandwidthProfile load_profile_json(const std::string& path);

/// Loads either format, chosen by file extension (.csv / .json).
BandwidthProfile load_profile(const std::string& path);

}  // namespace shardplan
