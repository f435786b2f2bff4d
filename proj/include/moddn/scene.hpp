#pragma once
// Scene, object and task data model plus file I/O for the demand-driven
// navigation stack.
//
// Coordinates: x grows with the column index, y with the row index. Cell
// (cx, cy) covers [cx*cell_size, (cx+1)*cell_size) x [cy*cell_size, ...).
// Headings are degrees counter-clockwise from +x.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace moddn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string what, std::vector<std::string> issues)
      : Error(std::move(what)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

// Violated caller contract (e.g. stepping a finished episode).
class ContractError : public Error {
 public:
  using Error::Error;
};

enum class Cell : std::uint8_t { Free, Occupied };

struct CellIndex {
  int x = 0;
  int y = 0;
  auto operator<=>(const CellIndex&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr int kAngleStep = 30;
inline constexpr int kMinPitch = -60;
inline constexpr int kMaxPitch = 60;

struct Pose {
  double x = 0.0;
  double y = 0.0;
  int heading = 0;  // one of 0, 30, ..., 330
  int pitch = 0;    // one of -60, -30, 0, 30, 60
  bool operator==(const Pose&) const = default;
};

struct ObjectInstance {
  std::string id;
  std::string category;
  double x = 0.0;
  double y = 0.0;
  double height = 0.0;
  bool operator==(const ObjectInstance&) const = default;
};

struct SceneMap {
  int width = 0;
  int height = 0;
  double cell_size = 0.25;
  std::vector<Cell> occupancy;  // row-major, width * height
  std::vector<ObjectInstance> objects;
  std::vector<Pose> start_poses;

  bool operator==(const SceneMap&) const = default;

  bool in_bounds(CellIndex c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  bool is_free(CellIndex c) const {
    return in_bounds(c) && occupancy[static_cast<std::size_t>(c.y) * width + c.x] == Cell::Free;
  }
  Cell at(CellIndex c) const { return occupancy[static_cast<std::size_t>(c.y) * width + c.x]; }
  void set(CellIndex c, Cell v) { occupancy[static_cast<std::size_t>(c.y) * width + c.x] = v; }
  CellIndex cell_of(double x, double y) const;
  CellIndex cell_of(const Pose& p) const { return cell_of(p.x, p.y); }
  Point2 center_of(CellIndex c) const;
  const ObjectInstance* find_object(const std::string& id) const;
  std::set<std::string> vocabulary() const;
};

using Solution = std::vector<std::string>;

struct Task {
  std::string id;
  std::string instruction;
  std::string basic_instruction;
  std::string preferred_instruction;
  std::vector<Solution> basic_solutions;
  std::vector<Solution> preferred_solutions;
  bool operator==(const Task&) const = default;
};

struct EpisodeSpec {
  double d_find = 1.0;
  int n_find = 5;
  int n_step = 300;
  double detection_range = 5.0;
  double fov_h = 90.0;
  double fov_v = 60.0;
  double camera_height = 1.25;
  std::uint64_t seed = 0;
};

enum class Severity { Warning, Error };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string task_id;
  std::string message;
  bool operator==(const Diagnostic&) const = default;
};

bool has_errors(const std::vector<Diagnostic>& diags);
std::string to_string(const Diagnostic& d);

// Scene file I/O. Parsing reports the offending field; structural checks
// (object on an occupied cell, etc.) raise ValidationError.
SceneMap parse_scene(const nlohmann::json& j);
SceneMap parse_scene_text(const std::string& text);
SceneMap load_scene(const std::filesystem::path& path);
nlohmann::json scene_to_json(const SceneMap& scene);
void save_scene(const SceneMap& scene, const std::filesystem::path& path);

// Returns human-readable invariant violations; empty when valid.
std::vector<std::string> scene_issues(const SceneMap& scene);
void validate_scene(const SceneMap& scene);
void validate_spec(const EpisodeSpec& spec);

// Task files hold either one task object or a list of them, using the
// task_instruction / basic_demand_instruction / ... template keys.
std::vector<Task> parse_tasks(const nlohmann::json& j);
std::vector<Task> load_tasks(const std::filesystem::path& path);
nlohmann::json tasks_to_json(const std::vector<Task>& tasks);
void save_tasks(const std::vector<Task>& tasks, const std::filesystem::path& path);

// Errors: empty solution, unknown category, duplicate category in one
// solution, empty id/instruction. Warnings: a preferred solution that is
// not also listed among the basic solutions.
std::vector<Diagnostic> validate_tasks(const std::vector<Task>& tasks,
                                       const std::set<std::string>& vocab);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace moddn
