#include "dummf/scene_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dummf/error.hpp"
#include "json.hpp"
#include "json_util.hpp"

namespace dummf {

using nlohmann::json;

namespace detail {

Track track_from_json(const json& frames, double fps) {
  if (!frames.is_array() || frames.empty()) throw ParseError("frames must be a non-empty array");
  std::vector<Pose> poses;
  poses.reserve(frames.size());
  for (const auto& f : frames) {
    if (!f.is_array() || f.empty()) throw ParseError("frame must be a non-empty array of joints");
    Joints j(static_cast<Eigen::Index>(f.size()), 3);
    for (std::size_t v = 0; v < f.size(); ++v) {
      const auto& p = f[v];
      if (!p.is_array() || p.size() != 3) throw ParseError("joint must be [x, y, z]");
      for (int k = 0; k < 3; ++k) j(static_cast<Eigen::Index>(v), k) = p[static_cast<std::size_t>(k)].get<double>();
    }
    poses.emplace_back(std::move(j));
  }
  return Track(std::move(poses), fps);
}

}  // namespace detail

std::string scene_to_json(const Scene& scene) {
  std::string out = "{\"fps\":";
  detail::append_number(out, scene.fps());
  out += ",\"history_len\":" + std::to_string(scene.history_len());
  out += ",\"future_len\":" + std::to_string(scene.future_len());
  out += ",\"persons\":[";
  for (std::size_t n = 0; n < scene.person_count(); ++n) {
    if (n) out.push_back(',');
    out += "{\"id\":";
    detail::append_string(out, scene.ids()[n]);
    out += ",\"frames\":";
    detail::append_frames(out, scene.persons()[n]);
    out.push_back('}');
  }
  out += "]}\n";
  return out;
}

Scene scene_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scene JSON: ") + e.what());
  }
  try {
    const double fps = j.at("fps").get<double>();
    const auto history = j.at("history_len").get<std::size_t>();
    const auto future = j.at("future_len").get<std::size_t>();
    std::vector<Track> tracks;
    std::vector<std::string> ids;
    for (const auto& p : j.at("persons")) {
      ids.push_back(p.value("id", "p" + std::to_string(ids.size())));
      tracks.push_back(detail::track_from_json(p.at("frames"), fps));
    }
    return Scene(std::move(tracks), history, future, std::move(ids));
  } catch (const json::exception& e) {
    throw ParseError(std::string("scene JSON: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Scene read_scene_file(const std::filesystem::path& path) {
  try {
    return scene_from_json(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_scene_file(const std::filesystem::path& path, const Scene& scene) {
  write_file_atomic(path, scene_to_json(scene));
}

std::vector<Scene> read_scene_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json" &&
        e.path().filename().string().find(".manifest") == std::string::npos)
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Scene> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_scene_file(f));
  return out;
}

}  // namespace dummf
