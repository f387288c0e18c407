#include "dummf/canonical.hpp"

#include <cmath>

#include "dummf/error.hpp"
#include "json.hpp"

namespace dummf {

using nlohmann::json;

MappingTable MappingTable::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("mapping table: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("mapping table must be a JSON object");
  MappingTable m;
  for (const auto& [key, value] : j.items()) {
    if (key == "_version") {
      m.version = value.get<int>();
    } else if (key == "_unit_scale") {
      m.unit_scale = value.get<double>();
      if (!(m.unit_scale > 0)) throw ConfigError("mapping table _unit_scale must be positive");
    } else if (!key.empty() && key.front() == '_') {
      continue;
    } else {
      if (!value.is_array() || value.empty())
        throw ConfigError("mapping for '" + key + "' must be a non-empty array of raw joint names");
      m.joints[key] = value.get<std::vector<std::string>>();
    }
  }
  return m;
}

std::string MappingTable::to_json() const {
  json j = json::object();
  j["_version"] = version;
  j["_unit_scale"] = unit_scale;
  for (const auto& [k, v] : joints) j[k] = v;
  return j.dump(2) + "\n";
}

Track to_canonical(const RawTrack& raw, const MappingTable& mapping) {
  const auto& canon = SkeletonSpec::canonical();
  std::map<std::string, std::size_t> raw_index;
  for (std::size_t i = 0; i < raw.joint_names.size(); ++i) raw_index.emplace(raw.joint_names[i], i);
  if (raw.joint_names.size() != raw.track.joint_count())
    throw ShapeError("raw track joint names do not match its joint count");

  std::vector<std::vector<std::size_t>> sources(canon.joint_count());
  for (std::size_t c = 0; c < canon.joint_count(); ++c) {
    const auto& name = canon.joint_names()[c];
    auto it = mapping.joints.find(name);
    if (it == mapping.joints.end()) throw ConfigError("canonical joint '" + name + "' is not mapped");
    for (const auto& r : it->second) {
      auto ri = raw_index.find(r);
      if (ri == raw_index.end())
        throw ConfigError("mapping for '" + name + "' names unknown raw joint '" + r + "'");
      sources[c].push_back(ri->second);
    }
  }

  std::vector<Pose> frames;
  frames.reserve(raw.track.size());
  for (const auto& p : raw.track.frames()) {
    Joints j(static_cast<Eigen::Index>(canon.joint_count()), 3);
    for (std::size_t c = 0; c < sources.size(); ++c) {
      Eigen::RowVector3d acc = Eigen::RowVector3d::Zero();
      for (auto s : sources[c]) acc += p.joints().row(static_cast<Eigen::Index>(s));
      j.row(static_cast<Eigen::Index>(c)) = acc / static_cast<double>(sources[c].size()) * mapping.unit_scale;
    }
    frames.emplace_back(std::move(j));
  }
  return Track(std::move(frames), raw.track.fps());
}

Track resample(const Track& track, double target_fps) {
  if (!(target_fps > 0)) throw UsageError("resample: target_fps must be positive");
  const double ratio = track.fps() / target_fps;  // source frames per output frame
  const auto count = static_cast<std::size_t>(
      std::ceil(static_cast<double>(track.size()) * target_fps / track.fps() - 1e-9));
  std::vector<Pose> out;
  out.reserve(count);
  const auto last = track.size() - 1;
  for (std::size_t i = 0; i < std::max<std::size_t>(count, 1); ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto k = static_cast<std::size_t>(std::floor(pos));
    const double w = pos - static_cast<double>(k);
    if (k >= last) {
      out.push_back(track[last]);
    } else if (w == 0.0) {
      out.push_back(track[k]);
    } else {
      out.emplace_back(Joints((1.0 - w) * track[k].joints() + w * track[k + 1].joints()));
    }
  }
  return Track(std::move(out), target_fps);
}

}  // namespace dummf
