#include "moddn/planner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <tuple>

namespace moddn {

namespace {

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

std::vector<CellIndex> unwind(const ExploredMap& map, const std::vector<int>& parent, int goal) {
  std::vector<CellIndex> path;
  for (int id = goal; id >= 0; id = parent[static_cast<std::size_t>(id)])
    path.push_back({id % map.width(), id / map.width()});
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

std::optional<std::vector<CellIndex>> astar(const ExploredMap& map, CellIndex start, CellIndex goal) {
  if (!map.known_free(start) || !map.known_free(goal)) return std::nullopt;
  const auto n = static_cast<std::size_t>(map.width()) * map.height();
  auto id = [&](CellIndex c) { return c.y * map.width() + c.x; };
  auto h = [&](CellIndex c) { return std::abs(c.x - goal.x) + std::abs(c.y - goal.y); };
  std::vector<int> g(n, std::numeric_limits<int>::max());
  std::vector<int> parent(n, -1);
  std::vector<char> closed(n, 0);
  // (f, h, id): lower h first on equal f, then lower id.
  using Item = std::tuple<int, int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  g[static_cast<std::size_t>(id(start))] = 0;
  open.push({h(start), h(start), id(start)});
  while (!open.empty()) {
    const auto [f, hh, cur] = open.top();
    open.pop();
    if (closed[static_cast<std::size_t>(cur)]) continue;
    closed[static_cast<std::size_t>(cur)] = 1;
    if (cur == id(goal)) return unwind(map, parent, cur);
    const CellIndex c{cur % map.width(), cur / map.width()};
    for (int k = 0; k < 4; ++k) {
      const CellIndex nb{c.x + kDx[k], c.y + kDy[k]};
      if (!map.known_free(nb)) continue;
      const auto ni = static_cast<std::size_t>(id(nb));
      const int ng = g[static_cast<std::size_t>(cur)] + 1;
      if (closed[ni] || ng >= g[ni]) continue;
      g[ni] = ng;
      parent[ni] = cur;
      open.push({ng + h(nb), h(nb), id(nb)});
    }
  }
  return std::nullopt;
}

std::optional<std::vector<CellIndex>> bfs_to_nearest(const ExploredMap& map, CellIndex start,
                                                     const std::function<bool(CellIndex)>& goal) {
  if (!map.known_free(start)) return std::nullopt;
  const auto n = static_cast<std::size_t>(map.width()) * map.height();
  std::vector<int> parent(n, -1);
  std::vector<char> seen(n, 0);
  const int s = start.y * map.width() + start.x;
  seen[static_cast<std::size_t>(s)] = 1;
  std::deque<int> q{s};
  while (!q.empty()) {
    const int cur = q.front();
    q.pop_front();
    const CellIndex c{cur % map.width(), cur / map.width()};
    if (goal(c)) return unwind(map, parent, cur);
    for (int k = 0; k < 4; ++k) {
      const CellIndex nb{c.x + kDx[k], c.y + kDy[k]};
      if (!map.known_free(nb)) continue;
      const int ni = nb.y * map.width() + nb.x;
      if (seen[static_cast<std::size_t>(ni)]) continue;
      seen[static_cast<std::size_t>(ni)] = 1;
      parent[static_cast<std::size_t>(ni)] = cur;
      q.push_back(ni);
    }
  }
  return std::nullopt;
}

std::vector<int> known_free_distances(const ExploredMap& map, CellIndex start) {
  std::vector<int> dist(static_cast<std::size_t>(map.width()) * map.height(), -1);
  if (!map.known_free(start)) return dist;
  std::deque<CellIndex> q{start};
  dist[static_cast<std::size_t>(start.y * map.width() + start.x)] = 0;
  while (!q.empty()) {
    const auto c = q.front();
    q.pop_front();
    const int dc = dist[static_cast<std::size_t>(c.y * map.width() + c.x)];
    for (int k = 0; k < 4; ++k) {
      const CellIndex nb{c.x + kDx[k], c.y + kDy[k]};
      if (!map.known_free(nb)) continue;
      auto& d = dist[static_cast<std::size_t>(nb.y * map.width() + nb.x)];
      if (d >= 0) continue;
      d = dc + 1;
      q.push_back(nb);
    }
  }
  return dist;
}

std::vector<Action> rotations_to(int from_heading, int to_heading) {
  const double diff = angle_difference(to_heading, from_heading);
  const int steps = static_cast<int>(std::lround(std::abs(diff) / kAngleStep));
  return std::vector<Action>(static_cast<std::size_t>(steps), diff > 0 ? Action::RotateLeft : Action::RotateRight);
}

int heading_between(CellIndex from, CellIndex to) {
  if (to.x > from.x) return 0;
  if (to.y > from.y) return 90;
  if (to.x < from.x) return 180;
  return 270;
}

std::vector<Action> compile_path(const std::vector<CellIndex>& cells, int heading) {
  std::vector<Action> out;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const int want = heading_between(cells[i - 1], cells[i]);
    for (auto a : rotations_to(heading, want)) out.push_back(a);
    heading = want;
    out.push_back(Action::MoveAhead);
  }
  return out;
}

std::optional<std::vector<Action>> plan_path(const ExploredMap& map, const Pose& start, CellIndex goal) {
  auto cells = astar(map, map.cell_of(start.x, start.y), goal);
  if (!cells) return std::nullopt;
  return compile_path(*cells, start.heading);
}

}  // namespace moddn
