#include "dummf/asf.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <functional>
#include <numbers>
#include <unordered_set>

#include "dummf/error.hpp"

namespace dummf {

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string> tokens;
};

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Non-empty, non-comment lines with their 1-based line numbers.
std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  std::size_t number = 0, pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++number;
    auto raw = text.substr(pos, nl - pos);
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    auto toks = split_ws(raw);
    if (!toks.empty()) lines.push_back({number, std::move(toks)});
    pos = nl + 1;
  }
  return lines;
}

double to_double(const std::string& tok, std::size_t line) {
  double v = 0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError("expected a number, got '" + tok + "'", line);
  return v;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

Axis parse_axis_char(char c, std::size_t line) {
  switch (std::tolower(static_cast<unsigned char>(c))) {
    case 'x': return Axis::X;
    case 'y': return Axis::Y;
    case 'z': return Axis::Z;
    default: throw ParseError(std::string("invalid axis '") + c + "'", line);
  }
}

std::vector<Axis> parse_axis_order(const std::string& s, std::size_t line) {
  if (s.size() != 3) throw ParseError("axis order must have 3 letters, got '" + s + "'", line);
  std::vector<Axis> out;
  for (char c : s) out.push_back(parse_axis_char(c, line));
  return out;
}

Channel parse_channel(const std::string& tok, std::size_t line) {
  const auto t = lower(tok);
  if (t.size() != 2 || (t[0] != 'r' && t[0] != 't')) throw ParseError("unsupported channel '" + tok + "'", line);
  return Channel{t[0] == 't', parse_axis_char(t[1], line)};
}

Eigen::Vector3d parse_vec3(const Line& l, std::size_t first) {
  if (l.tokens.size() < first + 3) throw ParseError("expected 3 numbers after '" + l.tokens[0] + "'", l.number);
  return {to_double(l.tokens[first], l.number), to_double(l.tokens[first + 1], l.number),
          to_double(l.tokens[first + 2], l.number)};
}

bool is_section(const Line& l) { return l.tokens[0].front() == ':'; }

}  // namespace

Eigen::Matrix3d euler_rotation(const std::vector<Axis>& axes, const std::vector<double>& angles) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const Eigen::Vector3d unit = axes[i] == Axis::X ? Eigen::Vector3d::UnitX()
                                 : axes[i] == Axis::Y ? Eigen::Vector3d::UnitY()
                                                      : Eigen::Vector3d::UnitZ();
    r = Eigen::AngleAxisd(angles[i], unit).toRotationMatrix() * r;
  }
  return r;
}

const AsfBone& AsfSkeleton::bone(const std::string& name) const { return bones[bone_index(name)]; }

std::size_t AsfSkeleton::bone_index(const std::string& name) const {
  for (std::size_t i = 0; i < bones.size(); ++i)
    if (bones[i].name == name) return i;
  throw SemanticError("unknown bone '" + name + "'");
}

std::vector<std::size_t> AsfSkeleton::traversal() const {
  std::vector<std::size_t> order;
  std::vector<std::string> stack(root.children.rbegin(), root.children.rend());
  while (!stack.empty()) {
    const auto idx = bone_index(stack.back());
    stack.pop_back();
    order.push_back(idx);
    const auto& ch = bones[idx].children;
    stack.insert(stack.end(), ch.rbegin(), ch.rend());
  }
  return order;
}

std::size_t AsfSkeleton::depth() const {
  std::function<std::size_t(const std::vector<std::string>&)> rec = [&](const std::vector<std::string>& kids) {
    std::size_t best = 0;
    for (const auto& k : kids) best = std::max(best, 1 + rec(bone(k).children));
    return best;
  };
  return rec(root.children);
}

AsfSkeleton parse_asf(std::string_view text) {
  const auto lines = tokenize(text);
  if (lines.empty()) throw ParseError("empty ASF document", 1);

  AsfSkeleton skel;
  bool have_root = false, have_bones = false, have_hierarchy = false;
  // Angles are converted once :units has been seen; remember raw values.
  struct RawAxis {
    std::size_t bone;
    Eigen::Vector3d angles;
    std::vector<Axis> order;
  };
  std::vector<RawAxis> raw_axes;
  Eigen::Vector3d root_axis_angles = Eigen::Vector3d::Zero();
  std::vector<Axis> root_axis_order{Axis::X, Axis::Y, Axis::Z};
  std::vector<std::pair<std::size_t, std::vector<std::string>>> hierarchy;

  std::size_t i = 0;
  auto section_end = [&](std::size_t from) {
    while (from < lines.size() && !is_section(lines[from])) ++from;
    return from;
  };

  while (i < lines.size()) {
    const Line& head = lines[i];
    if (!is_section(head)) throw ParseError("expected a ':section' keyword, got '" + head.tokens[0] + "'", head.number);
    const auto name = lower(head.tokens[0]);
    const auto end = section_end(i + 1);
    if (name == ":version" || name == ":name") {
      if (end != i + 1) throw ParseError("unexpected content in " + name, lines[i + 1].number);
    } else if (name == ":documentation") {
      // free text
    } else if (name == ":units") {
      for (std::size_t k = i + 1; k < end; ++k) {
        const auto& l = lines[k];
        if (l.tokens.size() != 2) throw ParseError("malformed :units entry", l.number);
        const auto key = lower(l.tokens[0]);
        if (key == "mass") skel.mass = to_double(l.tokens[1], l.number);
        else if (key == "length") skel.length_unit = to_double(l.tokens[1], l.number);
        else if (key == "angle") {
          const auto unit = lower(l.tokens[1]);
          if (unit == "deg") skel.degrees = true;
          else if (unit == "rad") skel.degrees = false;
          else throw ParseError("angle unit must be deg or rad", l.number);
        } else {
          throw ParseError("unknown :units key '" + l.tokens[0] + "'", l.number);
        }
      }
      if (!(skel.length_unit > 0)) throw ParseError("length unit must be positive", head.number);
    } else if (name == ":root") {
      have_root = true;
      for (std::size_t k = i + 1; k < end; ++k) {
        const auto& l = lines[k];
        const auto key = lower(l.tokens[0]);
        if (key == "order") {
          if (l.tokens.size() < 2) throw ParseError("root order needs channels", l.number);
          for (std::size_t t = 1; t < l.tokens.size(); ++t) skel.root.order.push_back(parse_channel(l.tokens[t], l.number));
        } else if (key == "axis") {
          if (l.tokens.size() != 2) throw ParseError("root axis needs an order string", l.number);
          root_axis_order = parse_axis_order(l.tokens[1], l.number);
        } else if (key == "position") {
          skel.root.position = parse_vec3(l, 1);
        } else if (key == "orientation") {
          root_axis_angles = parse_vec3(l, 1);
        } else {
          throw ParseError("unknown :root key '" + l.tokens[0] + "'", l.number);
        }
      }
      if (skel.root.order.empty()) throw ParseError(":root has no order", head.number);
    } else if (name == ":bonedata") {
      have_bones = true;
      std::size_t k = i + 1;
      while (k < end) {
        if (lower(lines[k].tokens[0]) != "begin") throw ParseError("expected 'begin' in :bonedata", lines[k].number);
        const auto begin_line = lines[k].number;
        ++k;
        AsfBone bone;
        bool have_dir = false, have_len = false;
        Eigen::Vector3d axis_angles = Eigen::Vector3d::Zero();
        std::vector<Axis> axis_order{Axis::X, Axis::Y, Axis::Z};
        bool closed = false;
        while (k < end) {
          const auto& l = lines[k];
          const auto key = lower(l.tokens[0]);
          if (key == "end") {
            closed = true;
            ++k;
            break;
          }
          if (key == "id" || key == "bodymass" || key == "cofmass") {
          } else if (key == "name") {
            if (l.tokens.size() != 2) throw ParseError("bone name must be one token", l.number);
            bone.name = l.tokens[1];
          } else if (key == "direction") {
            bone.direction = parse_vec3(l, 1);
            have_dir = true;
          } else if (key == "length") {
            if (l.tokens.size() != 2) throw ParseError("bone length must be one number", l.number);
            bone.length = to_double(l.tokens[1], l.number);
            have_len = true;
          } else if (key == "axis") {
            axis_angles = parse_vec3(l, 1);
            if (l.tokens.size() != 5) throw ParseError("bone axis needs 3 angles and an order", l.number);
            axis_order = parse_axis_order(l.tokens[4], l.number);
          } else if (key == "dof") {
            for (std::size_t t = 1; t < l.tokens.size(); ++t) {
              const auto ch = parse_channel(l.tokens[t], l.number);
              if (ch.translation) throw ParseError("translational bone dof '" + l.tokens[t] + "' is not supported", l.number);
              bone.dofs.push_back(ch.axis);
            }
          } else if (key == "limits" || key.front() == '(') {
            // Joint limits are not used by kinematics.
          } else {
            throw ParseError("unknown bone key '" + l.tokens[0] + "'", l.number);
          }
          ++k;
        }
        if (!closed) throw ParseError("bone block without 'end'", begin_line);
        if (bone.name.empty()) throw ParseError("bone without a name", begin_line);
        if (!have_dir || !have_len) throw ParseError("bone '" + bone.name + "' lacks direction or length", begin_line);
        if (bone.name == "root") throw ParseError("bone may not be named 'root'", begin_line);
        for (const auto& b : skel.bones)
          if (b.name == bone.name) throw ParseError("duplicate bone '" + bone.name + "'", begin_line);
        if (const double n = bone.direction.norm(); n > 0) bone.direction /= n;
        raw_axes.push_back({skel.bones.size(), axis_angles, axis_order});
        skel.bones.push_back(std::move(bone));
      }
    } else if (name == ":hierarchy") {
      have_hierarchy = true;
      std::size_t k = i + 1;
      if (k >= end || lower(lines[k].tokens[0]) != "begin") throw ParseError(":hierarchy must start with 'begin'", head.number);
      ++k;
      bool closed = false;
      for (; k < end; ++k) {
        const auto& l = lines[k];
        if (lower(l.tokens[0]) == "end") {
          closed = true;
          ++k;
          break;
        }
        if (l.tokens.size() < 2) throw ParseError("hierarchy line needs a parent and children", l.number);
        hierarchy.emplace_back(l.number, l.tokens);
      }
      if (!closed) throw ParseError(":hierarchy without 'end'", head.number);
      if (k != end) throw ParseError("content after hierarchy 'end'", lines[k].number);
    } else {
      throw ParseError("unknown section '" + head.tokens[0] + "'", head.number);
    }
    i = end;
  }
  if (!have_root) throw ParseError("missing :root section");
  if (!have_bones) throw ParseError("missing :bonedata section");
  if (!have_hierarchy) throw ParseError("missing :hierarchy section");

  const double angle_scale = skel.degrees ? std::numbers::pi / 180.0 : 1.0;
  for (const auto& ra : raw_axes)
    skel.bones[ra.bone].axis = euler_rotation(ra.order, {ra.angles[0] * angle_scale, ra.angles[1] * angle_scale, ra.angles[2] * angle_scale});
  skel.root.orientation = root_axis_angles * angle_scale;
  skel.root.axis = euler_rotation(root_axis_order, {skel.root.orientation[0], skel.root.orientation[1], skel.root.orientation[2]});

  auto find_bone = [&](const std::string& n, std::size_t line) -> AsfBone& {
    for (auto& b : skel.bones)
      if (b.name == n) return b;
    throw SemanticError("line " + std::to_string(line) + ": hierarchy references undefined bone '" + n + "'");
  };
  std::unordered_set<std::string> attached;
  for (const auto& [line, toks] : hierarchy) {
    const auto& parent = toks[0];
    std::vector<std::string>* kids = parent == "root" ? &skel.root.children : &find_bone(parent, line).children;
    for (std::size_t t = 1; t < toks.size(); ++t) {
      auto& child = find_bone(toks[t], line);
      if (!attached.insert(child.name).second)
        throw SemanticError("line " + std::to_string(line) + ": bone '" + child.name + "' has two parents");
      child.parent = parent;
      kids->push_back(child.name);
    }
  }
  // Every attached bone must trace back to root, otherwise there is a cycle.
  for (const auto& b : skel.bones) {
    std::string cur = b.name;
    std::size_t hops = 0;
    while (!cur.empty() && cur != "root") {
      cur = skel.bone(cur).parent;
      if (++hops > skel.bones.size()) throw SemanticError("hierarchy contains a cycle through '" + b.name + "'");
    }
  }
  return skel;
}

AmcClip parse_amc(std::string_view text, const AsfSkeleton& skel, double fps) {
  if (!(fps > 0)) throw UsageError("parse_amc: fps must be positive");
  const auto lines = tokenize(text);
  AmcClip clip;
  clip.fps = fps;
  bool degrees = skel.degrees;

  std::unordered_map<std::string, std::size_t> bone_of;
  for (std::size_t b = 0; b < skel.bones.size(); ++b) bone_of.emplace(skel.bones[b].name, b);

  auto check_complete = [&](const std::unordered_map<std::string, std::vector<double>>& frame, std::size_t frame_no,
                            std::size_t line) {
    if (!frame.count("root"))
      throw ParseError("frame " + std::to_string(frame_no) + ": missing channel for bone 'root'", line);
    for (const auto& b : skel.bones)
      if (!b.dofs.empty() && !frame.count(b.name))
        throw ParseError("frame " + std::to_string(frame_no) + ": missing channel for bone '" + b.name + "'", line);
  };

  std::unordered_map<std::string, std::vector<double>> current;
  std::size_t current_no = 0, current_line = 0;
  bool in_frame = false;
  for (const auto& l : lines) {
    const auto& first = l.tokens[0];
    if (first.front() == ':') {
      const auto key = lower(first);
      if (key == ":degrees") degrees = true;
      else if (key == ":radians") degrees = false;
      continue;
    }
    if (l.tokens.size() == 1 && std::all_of(first.begin(), first.end(), [](unsigned char c) { return std::isdigit(c); })) {
      if (in_frame) {
        check_complete(current, current_no, current_line);
        clip.frames.push_back(std::move(current));
        current.clear();
      }
      in_frame = true;
      current_no = std::stoul(first);
      current_line = l.number;
      continue;
    }
    if (!in_frame) throw ParseError("channel data before the first frame number", l.number);
    std::size_t expected;
    std::vector<bool> is_angle;
    if (first == "root") {
      expected = skel.root.order.size();
      for (const auto& ch : skel.root.order) is_angle.push_back(!ch.translation);
    } else {
      auto it = bone_of.find(first);
      if (it == bone_of.end()) throw ParseError("frame " + std::to_string(current_no) + ": unknown bone '" + first + "'", l.number);
      expected = skel.bones[it->second].dofs.size();
      is_angle.assign(expected, true);
    }
    if (l.tokens.size() - 1 != expected)
      throw ParseError("frame " + std::to_string(current_no) + ": bone '" + first + "' has " +
                           std::to_string(l.tokens.size() - 1) + " values, expected " + std::to_string(expected),
                       l.number);
    std::vector<double> values;
    values.reserve(expected);
    for (std::size_t t = 1; t < l.tokens.size(); ++t) {
      double v = to_double(l.tokens[t], l.number);
      if (is_angle[t - 1] && degrees) v *= std::numbers::pi / 180.0;
      values.push_back(v);
    }
    if (!current.emplace(first, std::move(values)).second)
      throw ParseError("frame " + std::to_string(current_no) + ": bone '" + first + "' given twice", l.number);
  }
  if (in_frame) {
    check_complete(current, current_no, current_line);
    clip.frames.push_back(std::move(current));
  }
  if (clip.frames.empty()) throw ParseError("AMC document has no frames");
  return clip;
}

RawTrack forward_kinematics(const AsfSkeleton& skel, const AmcClip& clip) {
  const auto order = skel.traversal();
  RawTrack out{{"root"}, Track({Pose::zeros(1)}, clip.fps)};
  for (auto b : order) out.joint_names.push_back(skel.bones[b].name);

  std::vector<Axis> root_rot_axes;
  std::vector<std::size_t> root_rot_slots;
  std::array<int, 3> root_trans_slot{-1, -1, -1};
  for (std::size_t c = 0; c < skel.root.order.size(); ++c) {
    const auto& ch = skel.root.order[c];
    if (ch.translation) {
      root_trans_slot[static_cast<std::size_t>(ch.axis)] = static_cast<int>(c);
    } else {
      root_rot_axes.push_back(ch.axis);
      root_rot_slots.push_back(c);
    }
  }

  const double len_scale = 1.0 / skel.length_unit;
  std::vector<Eigen::Matrix3d> rot(skel.bones.size());
  std::vector<Eigen::Vector3d> end(skel.bones.size());
  std::vector<Pose> frames;
  frames.reserve(clip.frames.size());
  for (const auto& f : clip.frames) {
    const auto& rv = f.at("root");
    Eigen::Vector3d root_pos = Eigen::Vector3d::Zero();
    for (int a = 0; a < 3; ++a)
      if (root_trans_slot[static_cast<std::size_t>(a)] >= 0) root_pos[a] = rv[static_cast<std::size_t>(root_trans_slot[static_cast<std::size_t>(a)])] * len_scale;
    std::vector<double> root_angles;
    for (auto s : root_rot_slots) root_angles.push_back(rv[s]);
    const Eigen::Matrix3d root_rot =
        skel.root.axis * euler_rotation(root_rot_axes, root_angles) * skel.root.axis.transpose();

    Joints j(static_cast<Eigen::Index>(order.size() + 1), 3);
    j.row(0) = root_pos.transpose();
    Eigen::Index row = 1;
    for (auto b : order) {
      const auto& bone = skel.bones[b];
      const bool top = bone.parent == "root";
      const std::size_t parent = top ? 0 : skel.bone_index(bone.parent);
      const Eigen::Matrix3d& parent_rot = top ? root_rot : rot[parent];
      const Eigen::Vector3d start = top ? root_pos : end[parent];
      Eigen::Matrix3d local = Eigen::Matrix3d::Identity();
      if (!bone.dofs.empty()) local = euler_rotation(bone.dofs, f.at(bone.name));
      rot[b] = parent_rot * bone.axis * local * bone.axis.transpose();
      end[b] = start + bone.length * len_scale * (rot[b] * bone.direction);
      j.row(row++) = end[b].transpose();
    }
    frames.emplace_back(std::move(j));
  }
  out.track = Track(std::move(frames), clip.fps);
  return out;
}

}  // namespace dummf
