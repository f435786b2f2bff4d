#pragma once
// Small scene builders shared by the tests.

#include <string>
#include <vector>

#include "moddn/scene.hpp"

namespace fixture {

using namespace moddn;

// rows[y][x]: '#' occupied, anything else free.
inline SceneMap grid(const std::vector<std::string>& rows, double cell_size = 0.25) {
  SceneMap s;
  s.height = static_cast<int>(rows.size());
  s.width = static_cast<int>(rows.at(0).size());
  s.cell_size = cell_size;
  for (const auto& r : rows)
    for (char c : r) s.occupancy.push_back(c == '#' ? Cell::Occupied : Cell::Free);
  return s;
}

inline SceneMap open_room(int w, int h, double cell_size = 0.25) {
  std::vector<std::string> rows(static_cast<std::size_t>(h), std::string(static_cast<std::size_t>(w), '.'));
  return grid(rows, cell_size);
}

inline Point2 centre(const SceneMap& s, int x, int y) { return {(x + 0.5) * s.cell_size, (y + 0.5) * s.cell_size}; }

inline void object_at(SceneMap& s, const std::string& id, const std::string& cat, int x, int y, double h = 1.0) {
  const auto p = centre(s, x, y);
  s.objects.push_back({id, cat, p.x, p.y, h});
}

inline Pose pose_at(const SceneMap& s, int x, int y, int heading = 0, int pitch = 0) {
  const auto p = centre(s, x, y);
  return {p.x, p.y, heading, pitch};
}

inline void start_at(SceneMap& s, int x, int y, int heading = 0) { s.start_poses.push_back(pose_at(s, x, y, heading)); }

inline Task task(const std::string& id, std::vector<Solution> basic, std::vector<Solution> pref = {}) {
  Task t;
  t.id = id;
  t.instruction = "instruction " + id;
  t.basic_instruction = "basic " + id;
  t.preferred_instruction = "preferred " + id;
  t.basic_solutions = std::move(basic);
  t.preferred_solutions = std::move(pref);
  return t;
}

}  // namespace fixture
