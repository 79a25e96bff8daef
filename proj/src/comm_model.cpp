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

#include "shardplan/comm_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace shardplan {

const char* to_string(CollectiveKind kind) {
  switch (kind) {
    case CollectiveKind::AllGather: return "allgather";
    case CollectiveKind::ReduceScatter: return "reducescatter";
    case CollectiveKind::AllReduce: return "allreduce";
    case CollectiveKind::Broadcast: return "broadcast";
  }
  return "?";
}

CollectiveKind collective_from_string(const std::string& name) {
  if (name == "allgather") return CollectiveKind::AllGather;
  if (name == "reducescatter") return CollectiveKind::ReduceScatter;
  if (name == "allreduce") return CollectiveKind::AllReduce;
  if (name == "broadcast") return CollectiveKind::Broadcast;
  throw Error("unknown collective op: " + name);
}

double ring_time(CollectiveKind kind, double size_bytes, int participants,
                 const AlphaBetaParams& ab) {
  if (participants < 1) throw Error("ring_time: participants must be >= 1");
  if (size_bytes < 0) throw Error("ring_time: negative size");
  if (participants == 1) return 0.0;
  const double p = participants;
  const double stage = ab.alpha + size_bytes / (ab.link_bandwidth * p);
  const double rounds = (kind == CollectiveKind::AllReduce) ? 2.0 * (p - 1.0)
                                                            : (p - 1.0);
  return rounds * stage;
}

void BandwidthProfile::add_series(CollectiveKind kind, DeviceMesh mesh,
                                  std::vector<Point> points) {
  if (points.empty()) {
    throw Error("profile: empty series for " + std::string(to_string(kind)) +
                " on " + to_string(mesh));
  }
  std::sort(points.begin(), points.end(),
            [](const Point& a, const Point& b) { return a.size < b.size; });
  for (size_t i = 0; i < points.size(); ++i) {
    if (points[i].bandwidth <= 0.0) {
      throw Error("profile: non-positive bandwidth for " +
                  std::string(to_string(kind)) + " on " + to_string(mesh));
    }
    if (i > 0 && points[i].size == points[i - 1].size) {
      throw Error("profile: duplicate size " + std::to_string(points[i].size) +
                  " for " + std::string(to_string(kind)) + " on " +
                  to_string(mesh));
    }
  }
  auto [it, inserted] = series_.try_emplace(
      Key{kind, mesh.per_node, mesh.nodes}, std::move(points));
  if (!inserted) {
    throw Error("profile: series already present for " +
                std::string(to_string(kind)) + " on " + to_string(mesh));
  }
}

bool BandwidthProfile::has_series(CollectiveKind kind, DeviceMesh mesh) const {
  return series_.count(Key{kind, mesh.per_node, mesh.nodes}) > 0;
}

const std::vector<BandwidthProfile::Point>& BandwidthProfile::resolve(
    CollectiveKind kind, DeviceMesh mesh) const {
  auto it = series_.find(Key{kind, mesh.per_node, mesh.nodes});
  if (it != series_.end()) return it->second;
  // Fall back to any profiled mesh with the same participant count; map
  // order makes the pick deterministic.
  for (const auto& [key, pts] : series_) {
    const auto& [k, per_node, nodes] = key;
    if (k == kind && per_node * nodes == mesh.size()) return pts;
  }
  throw Error("profile: no bandwidth series for " +
              std::string(to_string(kind)) + " on mesh " + to_string(mesh) +
              " (nor any mesh of size " + std::to_string(mesh.size()) + ")");
}

double BandwidthProfile::effective_bandwidth(CollectiveKind kind,
                                             std::uint64_t size_bytes,
                                             DeviceMesh mesh) const {
  const auto& pts = resolve(kind, mesh);
  if (size_bytes <= pts.front().size) return pts.front().bandwidth;
  if (size_bytes >= pts.back().size) return pts.back().bandwidth;
  auto hi = std::lower_bound(
      pts.begin(), pts.end(), size_bytes,
      [](const Point& p, std::uint64_t v) { return p.size < v; });
  if (hi->size == size_bytes) return hi->bandwidth;
  auto lo = std::prev(hi);
  const double x = std::log2(static_cast<double>(size_bytes));
  const double x0 = std::log2(static_cast<double>(lo->size));
  const double x1 = std::log2(static_cast<double>(hi->size));
  return lo->bandwidth +
         (hi->bandwidth - lo->bandwidth) * (x - x0) / (x1 - x0);
}

double BandwidthProfile::collective_time(CollectiveKind kind,
                                         std::uint64_t size_bytes,
                                         DeviceMesh mesh) const {
  if (size_bytes == 0 || mesh.size() == 1) return 0.0;
  return static_cast<double>(size_bytes) /
         effective_bandwidth(kind, size_bytes, mesh);
}

BandwidthProfile synthetic_profile(const AlphaBetaParams& ab_intra,
                                   const AlphaBetaParams& ab_inter,
                                   const std::vector<DeviceMesh>& meshes,
                                   const std::vector<std::uint64_t>& sizes) {
  if (meshes.empty() || sizes.empty()) {
    throw Error("synthetic_profile: meshes and sizes must be non-empty");
  }
  std::vector<std::uint64_t> grid = sizes;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() == 0) throw Error("synthetic_profile: size 0 in grid");

  static constexpr CollectiveKind kKinds[] = {
      CollectiveKind::AllGather, CollectiveKind::ReduceScatter,
      CollectiveKind::AllReduce, CollectiveKind::Broadcast};
  BandwidthProfile profile;
  for (const auto& mesh : meshes) {
    if (mesh.size() == 1) continue;
    const auto& ab = (mesh.nodes == 1) ? ab_intra : ab_inter;
    for (auto kind : kKinds) {
      std::vector<BandwidthProfile::Point> pts;
      pts.reserve(grid.size());
      for (auto v : grid) {
        const double t =
            ring_time(kind, static_cast<double>(v), mesh.size(), ab);
        pts.push_back({v, static_cast<double>(v) / t});
      }
      profile.add_series(kind, mesh, std::move(pts));
    }
  }
  return profile;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

BandwidthProfile profile_from_csv(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw Error("profile csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "op,size_bytes,gpus_per_node,nodes,bus_bw_bytes_per_s") {
    throw Error("profile csv: unexpected header '" + line + "'");
  }
  std::map<BandwidthProfile::Key, std::vector<BandwidthProfile::Point>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != 5) {
      throw Error("profile csv line " + std::to_string(lineno) +
                  ": expected 5 fields, got " + std::to_string(fields.size()));
    }
    try {
      const CollectiveKind kind = collective_from_string(fields[0]);
      const std::uint64_t size = std::stoull(fields[1]);
      const int per_node = std::stoi(fields[2]);
      const int nodes = std::stoi(fields[3]);
      const double bw = std::stod(fields[4]);
      if (per_node < 1 || nodes < 1) throw Error("mesh axes must be >= 1");
      if (bw <= 0) throw Error("bandwidth must be > 0");
      auto& pts = rows[BandwidthProfile::Key{kind, per_node, nodes}];
      for (const auto& p : pts) {
        if (p.size == size) {
          throw Error("duplicate key (" + fields[0] + "," + fields[1] + "," +
                      fields[2] + "x" + fields[3] + ")");
        }
      }
      pts.push_back({size, bw});
    } catch (const std::exception& e) {
      throw Error("profile csv line " + std::to_string(lineno) + ": " +
                  e.what());
    }
  }
  BandwidthProfile profile;
  for (auto& [key, pts] : rows) {
    const auto& [kind, per_node, nodes] = key;
    profile.add_series(kind, DeviceMesh{per_node, nodes}, std::move(pts));
  }
  return profile;
}

BandwidthProfile load_profile_csv(const std::string& path) {
  return profile_from_csv(read_file(path));
}

std::string profile_to_canonical_json(const BandwidthProfile& profile) {
  // std::map-backed json keeps keys sorted; doubles print shortest
  // round-trip, so serialize(parse(serialize(x))) is byte-stable.
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, pts] : profile.series()) {
    const auto& [kind, per_node, nodes] = key;
    const std::string name = std::string(to_string(kind)) + "/" +
                             std::to_string(per_node) + " x " +
                             std::to_string(nodes);
    auto& arr = j[name] = nlohmann::json::array();
    for (const auto& p : pts) {
      arr.push_back(nlohmann::json::array({p.size, p.bandwidth}));
    }
  }
  return j.dump();
}

BandwidthProfile profile_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    throw Error(std::string("profile json: ") + e.what());
  }
  if (!j.is_object()) throw Error("profile json: root must be an object");
  BandwidthProfile profile;
  for (const auto& [name, arr] : j.items()) {
    const auto slash = name.find('/');
    const auto x = name.find(" x ");
    if (slash == std::string::npos || x == std::string::npos || x < slash) {
      throw Error("profile json: bad series key '" + name + "'");
    }
    const CollectiveKind kind =
        collective_from_string(name.substr(0, slash));
    const int per_node = std::stoi(name.substr(slash + 1, x - slash - 1));
    const int nodes = std::stoi(name.substr(x + 3));
    if (!arr.is_array()) {
      throw Error("profile json: series '" + name + "' must be an array");
    }
    std::vector<BandwidthProfile::Point> pts;
    for (const auto& pair : arr) {
      if (!pair.is_array() || pair.size() != 2) {
        throw Error("profile json: points must be [size, bandwidth] pairs");
      }
      pts.push_back({pair[0].get<std::uint64_t>(), pair[1].get<double>()});
    }
    profile.add_series(kind, DeviceMesh{per_node, nodes}, std::move(pts));
  }
  return profile;
}

BandwidthProfile load_profile_json(const std::string& path) {
  return profile_from_json(read_file(path));
}

BandwidthProfile load_profile(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    return load_profile_csv(path);
  }
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    return load_profile_json(path);
  }
  throw Error("profile path must end in .csv or .json: " + path);
}

}  // namespace shardplan
