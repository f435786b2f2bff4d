#include "moddn/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace moddn {

using nlohmann::json;

CellIndex SceneMap::cell_of(double x, double y) const {
  return {static_cast<int>(std::floor(x / cell_size)), static_cast<int>(std::floor(y / cell_size))};
}

Point2 SceneMap::center_of(CellIndex c) const {
  return {(c.x + 0.5) * cell_size, (c.y + 0.5) * cell_size};
}

const ObjectInstance* SceneMap::find_object(const std::string& id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

std::set<std::string> SceneMap::vocabulary() const {
  std::set<std::string> v;
  for (const auto& o : objects) v.insert(o.category);
  return v;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags)
    if (d.severity == Severity::Error) return true;
  return false;
}

std::string to_string(const Diagnostic& d) {
  std::string s = d.severity == Severity::Error ? "error" : "warning";
  s += " [" + d.task_id + "]: " + d.message;
  return s;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

namespace {

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(ctx + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(ctx + ": field '" + key + "' has wrong type (" + e.what() + ")");
  }
}

bool angle_ok(int v) { return v % kAngleStep == 0; }

}  // namespace

SceneMap parse_scene(const json& j) {
  SceneMap s;
  s.cell_size = j.contains("cell_size") ? field<double>(j, "cell_size", "scene") : 0.25;
  s.width = field<int>(j, "width", "scene");
  s.height = field<int>(j, "height", "scene");
  if (s.width < 1 || s.height < 1) throw ParseError("scene: width and height must be >= 1");
  if (!(s.cell_size > 0.0)) throw ParseError("scene: cell_size must be > 0");
  auto occ = field<std::string>(j, "occupancy", "scene");
  // Rows may optionally be separated by newlines.
  std::string flat;
  for (char c : occ)
    if (c != '\n' && c != '\r') flat.push_back(c);
  if (flat.size() != static_cast<std::size_t>(s.width) * s.height)
    throw ParseError("scene: occupancy has " + std::to_string(flat.size()) + " cells, expected " +
                     std::to_string(s.width * s.height));
  s.occupancy.reserve(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (flat[i] == '.')
      s.occupancy.push_back(Cell::Free);
    else if (flat[i] == '#')
      s.occupancy.push_back(Cell::Occupied);
    else
      throw ParseError("scene: occupancy cell " + std::to_string(i) + " (row " +
                       std::to_string(i / s.width) + ") has invalid character '" +
                       std::string(1, flat[i]) + "'");
  }
  if (j.contains("objects")) {
    const auto& arr = j.at("objects");
    if (!arr.is_array()) throw ParseError("scene: 'objects' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto ctx = "scene.objects[" + std::to_string(i) + "]";
      ObjectInstance o;
      o.id = field<std::string>(arr[i], "id", ctx);
      o.category = field<std::string>(arr[i], "category", ctx);
      o.x = field<double>(arr[i], "x", ctx);
      o.y = field<double>(arr[i], "y", ctx);
      o.height = field<double>(arr[i], "height", ctx);
      s.objects.push_back(std::move(o));
    }
  }
  if (j.contains("start_poses")) {
    const auto& arr = j.at("start_poses");
    if (!arr.is_array()) throw ParseError("scene: 'start_poses' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto ctx = "scene.start_poses[" + std::to_string(i) + "]";
      Pose p;
      p.x = field<double>(arr[i], "x", ctx);
      p.y = field<double>(arr[i], "y", ctx);
      p.heading = arr[i].contains("heading") ? field<int>(arr[i], "heading", ctx) : 0;
      p.pitch = arr[i].contains("pitch") ? field<int>(arr[i], "pitch", ctx) : 0;
      s.start_poses.push_back(p);
    }
  }
  return s;
}

SceneMap parse_scene_text(const std::string& text) {
  auto s = parse_scene(parse_json_text(text, "scene"));
  validate_scene(s);
  return s;
}

SceneMap load_scene(const std::filesystem::path& path) {
  try {
    return parse_scene_text(read_text_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what(), e.issues());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json scene_to_json(const SceneMap& s) {
  std::string occ;
  occ.reserve(s.occupancy.size());
  for (auto c : s.occupancy) occ.push_back(c == Cell::Free ? '.' : '#');
  json objs = json::array();
  for (const auto& o : s.objects)
    objs.push_back({{"id", o.id}, {"category", o.category}, {"x", o.x}, {"y", o.y}, {"height", o.height}});
  json poses = json::array();
  for (const auto& p : s.start_poses)
    poses.push_back({{"x", p.x}, {"y", p.y}, {"heading", p.heading}, {"pitch", p.pitch}});
  json j;
  j["cell_size"] = s.cell_size;
  j["width"] = s.width;
  j["height"] = s.height;
  j["occupancy"] = occ;
  j["objects"] = objs;
  j["start_poses"] = poses;
  return j;
}

void save_scene(const SceneMap& scene, const std::filesystem::path& path) {
  write_text_file(path, scene_to_json(scene).dump(1) + "\n");
}

std::vector<std::string> scene_issues(const SceneMap& s) {
  std::vector<std::string> issues;
  if (s.width < 1 || s.height < 1) issues.push_back("width and height must be >= 1");
  if (s.occupancy.size() != static_cast<std::size_t>(std::max(0, s.width) * std::max(0, s.height)))
    issues.push_back("occupancy size does not match width*height");
  if (!issues.empty()) return issues;
  std::unordered_set<std::string> ids;
  for (const auto& o : s.objects) {
    if (o.id.empty()) issues.push_back("object with empty id");
    if (!ids.insert(o.id).second) issues.push_back("duplicate object id '" + o.id + "'");
    if (o.category.empty()) issues.push_back("object '" + o.id + "' has empty category");
    const auto c = s.cell_of(o.x, o.y);
    if (!s.is_free(c))
      issues.push_back("object '" + o.id + "' lies on non-free cell (" + std::to_string(c.x) + ", " +
                       std::to_string(c.y) + ")");
  }
  bool any_free_start = false;
  for (std::size_t i = 0; i < s.start_poses.size(); ++i) {
    const auto& p = s.start_poses[i];
    const auto c = s.cell_of(p);
    const bool free = s.is_free(c);
    any_free_start = any_free_start || free;
    if (!free)
      issues.push_back("start pose " + std::to_string(i) + " lies on non-free cell (" + std::to_string(c.x) +
                       ", " + std::to_string(c.y) + ")");
    if (!angle_ok(p.heading) || p.heading < 0 || p.heading >= 360)
      issues.push_back("start pose " + std::to_string(i) + " heading " + std::to_string(p.heading) +
                       " is not in {0,30,...,330}");
    if (!angle_ok(p.pitch) || p.pitch < kMinPitch || p.pitch > kMaxPitch)
      issues.push_back("start pose " + std::to_string(i) + " pitch " + std::to_string(p.pitch) +
                       " is not in {-60,...,60}");
  }
  if (!any_free_start) issues.push_back("scene needs at least one start pose on a free cell");
  return issues;
}

void validate_scene(const SceneMap& scene) {
  auto issues = scene_issues(scene);
  if (issues.empty()) return;
  std::string msg = "invalid scene:";
  for (const auto& i : issues) msg += "\n  " + i;
  throw ValidationError(msg, std::move(issues));
}

void validate_spec(const EpisodeSpec& spec) {
  if (!(spec.d_find > 0 && spec.detection_range > 0 && spec.fov_h > 0 && spec.fov_v > 0))
    throw ValidationError("episode thresholds must be > 0", {});
  if (spec.n_find < 0 || spec.n_step < 0) throw ValidationError("episode limits must be non-negative", {});
}

namespace {

std::vector<Solution> parse_solutions(const json& j, const std::string& key, const std::string& ctx) {
  auto raw = field<std::vector<std::vector<std::string>>>(j, key, ctx);
  return raw;
}

Task parse_task(const json& j, std::size_t index) {
  const auto ctx = "task[" + std::to_string(index) + "]";
  if (!j.is_object()) throw ParseError(ctx + ": expected an object");
  Task t;
  t.id = j.contains("id") ? field<std::string>(j, "id", ctx) : "task_" + std::to_string(index);
  t.instruction = field<std::string>(j, "task_instruction", ctx);
  t.basic_instruction = field<std::string>(j, "basic_demand_instruction", ctx);
  t.preferred_instruction = field<std::string>(j, "preferred_demand_instruction", ctx);
  t.basic_solutions = parse_solutions(j, "basic_solution", ctx);
  t.preferred_solutions = parse_solutions(j, "preferred_solution", ctx);
  return t;
}

}  // namespace

std::vector<Task> parse_tasks(const json& j) {
  std::vector<Task> tasks;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) tasks.push_back(parse_task(j[i], i));
  } else {
    tasks.push_back(parse_task(j, 0));
  }
  return tasks;
}

std::vector<Task> load_tasks(const std::filesystem::path& path) {
  try {
    return parse_tasks(parse_json_text(read_text_file(path), "tasks"));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json tasks_to_json(const std::vector<Task>& tasks) {
  json arr = json::array();
  for (const auto& t : tasks) {
    json j;
    j["id"] = t.id;
    j["task_instruction"] = t.instruction;
    j["basic_demand_instruction"] = t.basic_instruction;
    j["preferred_demand_instruction"] = t.preferred_instruction;
    j["basic_solution"] = t.basic_solutions;
    j["preferred_solution"] = t.preferred_solutions;
    arr.push_back(std::move(j));
  }
  return arr;
}

void save_tasks(const std::vector<Task>& tasks, const std::filesystem::path& path) {
  write_text_file(path, tasks_to_json(tasks).dump(1) + "\n");
}

namespace {

void check_family(const Task& t, const std::vector<Solution>& family, const char* name,
                  const std::set<std::string>& vocab, std::vector<Diagnostic>& out) {
  if (family.empty()) out.push_back({Severity::Error, t.id, std::string(name) + " list is empty"});
  for (std::size_t i = 0; i < family.size(); ++i) {
    const auto where = std::string(name) + "[" + std::to_string(i) + "]";
    if (family[i].empty()) out.push_back({Severity::Error, t.id, where + " is an empty solution"});
    std::set<std::string> seen;
    for (const auto& c : family[i]) {
      if (c.empty()) out.push_back({Severity::Error, t.id, where + " contains an empty category"});
      else if (!vocab.contains(c))
        out.push_back({Severity::Error, t.id, where + " references unknown category \"" + c + "\""});
      if (!seen.insert(c).second)
        out.push_back({Severity::Error, t.id, where + " repeats category \"" + c + "\""});
    }
  }
}

std::set<std::string> as_set(const Solution& s) { return {s.begin(), s.end()}; }

}  // namespace

std::vector<Diagnostic> validate_tasks(const std::vector<Task>& tasks, const std::set<std::string>& vocab) {
  std::vector<Diagnostic> out;
  std::set<std::string> ids;
  for (const auto& t : tasks) {
    if (t.id.empty()) out.push_back({Severity::Error, t.id, "task id is empty"});
    else if (!ids.insert(t.id).second) out.push_back({Severity::Error, t.id, "duplicate task id"});
    if (t.instruction.empty()) out.push_back({Severity::Error, t.id, "task_instruction is empty"});
    check_family(t, t.basic_solutions, "basic_solution", vocab, out);
    check_family(t, t.preferred_solutions, "preferred_solution", vocab, out);
    std::vector<std::set<std::string>> basic;
    for (const auto& s : t.basic_solutions) basic.push_back(as_set(s));
    for (std::size_t i = 0; i < t.preferred_solutions.size(); ++i) {
      const auto p = as_set(t.preferred_solutions[i]);
      if (p.empty()) continue;
      if (std::find(basic.begin(), basic.end(), p) == basic.end()) {
        std::string names;
        for (const auto& c : t.preferred_solutions[i]) names += (names.empty() ? "" : ", ") + c;
        out.push_back({Severity::Warning, t.id,
                       "preferred_solution[" + std::to_string(i) + "] {" + names +
                           "} is not listed in basic_solution"});
      }
    }
  }
  return out;
}

}  // namespace moddn
