#pragma once
// Deterministic episode execution on a SceneMap.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "moddn/scene.hpp"

namespace moddn {

enum class Action { MoveAhead, RotateRight, RotateLeft, LookUp, LookDown, Find, Done };

inline constexpr std::array<Action, 7> kAllActions = {Action::MoveAhead, Action::RotateRight, Action::RotateLeft,
                                                      Action::LookUp,    Action::LookDown,    Action::Find,
                                                      Action::Done};
inline constexpr double kMoveStep = 0.25;  // meters per MoveAhead

std::string_view action_name(Action a);
std::optional<Action> parse_action(std::string_view name);

struct Detection {
  std::string id;
  std::string label;   // possibly corrupted by DetectorNoise
  double range = 0.0;  // planar meters
  double bearing = 0.0;    // world degrees in [0, 360)
  double elevation = 0.0;  // degrees above the camera's horizontal
  bool operator==(const Detection&) const = default;
};

struct DepthRay {
  double angle = 0.0;  // world degrees
  double range = 0.0;  // distance to the first occupied cell, or the sensor range
  bool hit = false;
  bool operator==(const DepthRay&) const = default;
};

struct Observation {
  std::vector<Detection> detections;
  std::vector<DepthRay> depth;
  bool operator==(const Observation&) const = default;
};

struct FindEvent {
  int step = 0;
  std::vector<std::string> object_ids;
};

struct FoundList {
  std::set<std::string> categories;
  std::vector<FindEvent> events;
};

struct DetectorNoise {
  double miss_rate = 0.0;
  double mislabel_rate = 0.0;
  std::uint64_t seed = 0;
};

struct AgentState {
  Pose pose;
  int steps_taken = 0;
  int finds_used = 0;
  double path_length = 0.0;
  int moves = 0;  // successful MoveAhead count
  bool collided_last = false;
};

std::uint64_t splitmix(std::uint64_t x);

// Geometry helpers shared with agents and metrics.
double wrap_degrees(double deg);                 // -> [0, 360)
double angle_difference(double a, double b);     // signed, in (-180, 180]
Point2 heading_vector(int heading);              // exact for multiples of 90
// Integer supercover line between two cells (both endpoints included);
// corner crossings include both side cells.
std::vector<CellIndex> supercover(CellIndex a, CellIndex b);
bool line_of_sight(const SceneMap& scene, CellIndex from, CellIndex to);

struct RayCell {
  CellIndex cell;
  double entry = 0.0;  // distance along the ray where the cell is entered
};
// Cells crossed by a ray from `origin` along `angle_deg` up to `length`,
// in order, starting with the origin cell (entry 0).
std::vector<RayCell> ray_cells(const SceneMap& scene, Point2 origin, double angle_deg, double length);
std::vector<RayCell> ray_cells(int width, int height, double cell_size, Point2 origin, double angle_deg,
                               double length);

struct ViewGeometry {
  double range = 0.0;
  double bearing = 0.0;
  double elevation = 0.0;
  bool in_fov = false;  // horizontal and vertical window only
};
ViewGeometry view_geometry(const Pose& pose, double x, double y, double height, const EpisodeSpec& spec);

// Objects that Find would record at `pose` (within d_find, in view, with LOS).
std::vector<const ObjectInstance*> findable_objects(const SceneMap& scene, const Pose& pose, const EpisodeSpec& spec);

// Simulated detector. `salt` decorrelates noise draws across steps.
Observation detect_fov(const SceneMap& scene, const Pose& pose, const EpisodeSpec& spec, const DetectorNoise& noise,
                       std::uint64_t salt = 0);
std::vector<DepthRay> depth_profile(const SceneMap& scene, const Pose& pose, const EpisodeSpec& spec);

struct StepRecord {
  int t = 0;
  Action action = Action::Done;
  Pose pose;
  bool collided = false;
  std::vector<Detection> detections;
  std::optional<FindEvent> find_event;
};
nlohmann::ordered_json to_json(const StepRecord& r);

struct StepResult {
  Observation observation;
  bool terminated = false;
};

class Episode {
 public:
  Episode(const SceneMap& scene, const Task& task, EpisodeSpec spec, DetectorNoise noise = {});

  // Draws the start pose uniformly from the scene's start poses.
  StepResult reset(std::uint64_t seed);
  StepResult step(Action action);

  const AgentState& state() const { return state_; }
  const FoundList& found() const { return found_; }
  bool terminated() const { return terminated_; }
  const std::vector<StepRecord>& log() const { return log_; }
  const SceneMap& scene() const { return *scene_; }
  const Task& task() const { return *task_; }
  const EpisodeSpec& spec() const { return spec_; }
  const DetectorNoise& noise() const { return noise_; }
  Observation observe() const;

 private:
  void update_termination(Action last);

  const SceneMap* scene_;
  const Task* task_;
  EpisodeSpec spec_;
  DetectorNoise noise_;
  AgentState state_;
  FoundList found_;
  bool terminated_ = true;
  bool started_ = false;
  std::vector<StepRecord> log_;
};

std::string log_to_jsonl(const std::vector<StepRecord>& log);

}  // namespace moddn
