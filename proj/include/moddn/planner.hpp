#pragma once
// Grid planning restricted to explored free space.

#include <functional>
#include <optional>
#include <vector>

#include "moddn/mapping.hpp"
#include "moddn/simulator.hpp"

namespace moddn {

// A* over Known-Free cells (4-connected, unit cost, Manhattan heuristic).
// Returns the cell sequence including start and goal, or nullopt when no
// path exists or either endpoint is not Known-Free.
std::optional<std::vector<CellIndex>> astar(const ExploredMap& map, CellIndex start, CellIndex goal);

// Breadth-first search over Known-Free cells to the nearest cell satisfying
// `goal`; ties resolved by neighbour order (+x, -x, +y, -y).
std::optional<std::vector<CellIndex>> bfs_to_nearest(const ExploredMap& map, CellIndex start,
                                                     const std::function<bool(CellIndex)>& goal);

// Known-Free cells reachable from `start`, with their BFS distance.
std::vector<int> known_free_distances(const ExploredMap& map, CellIndex start);

// Rotations (shortest direction, left on a tie) from one heading to another.
std::vector<Action> rotations_to(int from_heading, int to_heading);
// Heading needed to step between 4-adjacent cells.
int heading_between(CellIndex from, CellIndex to);
// MoveAhead/Rotate sequence that walks the cell path from `heading`.
std::vector<Action> compile_path(const std::vector<CellIndex>& cells, int heading);

// A* + compile. nullopt is the no-path signal.
std::optional<std::vector<Action>> plan_path(const ExploredMap& map, const Pose& start, CellIndex goal);

}  // namespace moddn
