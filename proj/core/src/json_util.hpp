#pragma once

// Private helpers shared by the JSON writers.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

#include "dummf/motion.hpp"
#include "json.hpp"

namespace dummf::detail {

inline void append_number(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

inline void append_string(std::string& out, const std::string& s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
}

inline void append_frames(std::string& out, const Track& track) {
  out.push_back('[');
  for (std::size_t t = 0; t < track.size(); ++t) {
    if (t) out.push_back(',');
    out.push_back('[');
    const auto& j = track[t].joints();
    for (Eigen::Index v = 0; v < j.rows(); ++v) {
      if (v) out.push_back(',');
      out.push_back('[');
      append_number(out, j(v, 0));
      out.push_back(',');
      append_number(out, j(v, 1));
      out.push_back(',');
      append_number(out, j(v, 2));
      out.push_back(']');
    }
    out.push_back(']');
  }
  out.push_back(']');
}

// Parses a [[[x, y, z], ...V], ...T] frame array.
Track track_from_json(const nlohmann::json& frames, double fps);

}  // namespace dummf::detail
