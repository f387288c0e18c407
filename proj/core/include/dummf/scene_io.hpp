#pragma once

// Scene JSON, the canonical on-disk format:
//
//   {"fps": 15, "history_len": 45, "future_len": 15,
//    "persons": [{"id": "p0", "frames": [[[x, y, z], ...V], ...T]}, ...]}
//
// Numbers are written with 17 significant digits so files round-trip exactly.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dummf/motion.hpp"

namespace dummf {

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(std::string_view text);

Scene read_scene_file(const std::filesystem::path& path);
void write_scene_file(const std::filesystem::path& path, const Scene& scene);

// Every *.json under dir (non-recursive, sorted by filename, skipping
// *.manifest* files) parsed as a Scene.
std::vector<Scene> read_scene_dir(const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace dummf
