#include <doctest.h>

#include <random>

#include "moddn/planner.hpp"
#include "oracles.hpp"

using namespace moddn;

namespace {

ExploredMap random_explored(std::mt19937_64& rng, int n) {
  ExploredMap m(n, n, 0.25);
  std::discrete_distribution<int> state({2, 6, 2});  // unknown, free, occupied
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) m.mark({x, y}, static_cast<Known>(state(rng)));
  return m;
}

}  // namespace

TEST_CASE("A* length equals BFS length on random explored maps") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> c(0, 31);
  int found = 0;
  for (int i = 0; i < 100; ++i) {
    auto m = random_explored(rng, 32);
    const CellIndex a{c(rng), c(rng)}, b{c(rng), c(rng)};
    m.mark(a, Known::Free);
    m.mark(b, Known::Free);
    const int expected = oracle::bfs_length(m, a, b);
    const auto path = astar(m, a, b);
    INFO("map " << i);
    if (expected < 0) {
      CHECK_FALSE(path.has_value());
      continue;
    }
    REQUIRE(path.has_value());
    ++found;
    CHECK(static_cast<int>(path->size()) - 1 == expected);
    CHECK(path->front() == a);
    CHECK(path->back() == b);
    for (std::size_t k = 0; k < path->size(); ++k) {
      CHECK(m.at((*path)[k]) == Known::Free);
      if (k > 0)
        CHECK(std::abs((*path)[k].x - (*path)[k - 1].x) + std::abs((*path)[k].y - (*path)[k - 1].y) == 1);
    }
  }
  CHECK(found > 20);
}

TEST_CASE("A* edge cases") {
  ExploredMap m(5, 5, 0.25);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) m.mark({x, y}, Known::Free);
  const auto same = astar(m, {2, 2}, {2, 2});
  REQUIRE(same.has_value());
  CHECK(same->size() == 1);
  CHECK(plan_path(m, {0.625, 0.625, 0, 0}, {2, 2})->empty());

  // Seal the goal in occupied cells.
  for (auto c : {CellIndex{3, 4}, CellIndex{4, 3}}) m.mark(c, Known::Occupied);
  CHECK_FALSE(astar(m, {0, 0}, {4, 4}).has_value());
  CHECK_FALSE(plan_path(m, {0.125, 0.125, 0, 0}, {4, 4}).has_value());

  ExploredMap unknown_goal(3, 1, 0.25);
  unknown_goal.mark({0, 0}, Known::Free);
  unknown_goal.mark({1, 0}, Known::Free);
  CHECK_FALSE(astar(unknown_goal, {0, 0}, {2, 0}).has_value());
}

TEST_CASE("headings and path compilation") {
  CHECK(heading_between({0, 0}, {1, 0}) == 0);
  CHECK(heading_between({0, 0}, {0, 1}) == 90);
  CHECK(heading_between({1, 0}, {0, 0}) == 180);
  CHECK(heading_between({0, 1}, {0, 0}) == 270);
  CHECK(rotations_to(0, 90) == std::vector<Action>(3, Action::RotateLeft));
  CHECK(rotations_to(0, 270) == std::vector<Action>(3, Action::RotateRight));
  CHECK(rotations_to(0, 180) == std::vector<Action>(6, Action::RotateLeft));
  CHECK(rotations_to(30, 30).empty());

  const std::vector<CellIndex> path{{0, 0}, {1, 0}, {1, 1}};
  const auto acts = compile_path(path, 0);
  std::vector<Action> expected{Action::MoveAhead, Action::RotateLeft, Action::RotateLeft, Action::RotateLeft,
                               Action::MoveAhead};
  CHECK(acts == expected);
}

TEST_CASE("compiled paths drive the simulator to the goal") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> c(0, 15);
  for (int i = 0; i < 30; ++i) {
    SceneMap s;
    s.width = s.height = 16;
    s.occupancy.assign(256, Cell::Free);
    for (int k = 0; k < 40; ++k) s.set({c(rng), c(rng)}, Cell::Occupied);
    const CellIndex a{c(rng), c(rng)}, b{c(rng), c(rng)};
    if (!s.is_free(a) || !s.is_free(b)) continue;
    ExploredMap m = ExploredMap::like(s);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) m.mark({x, y}, s.is_free({x, y}) ? Known::Free : Known::Occupied);
    s.start_poses.push_back({(a.x + 0.5) * 0.25, (a.y + 0.5) * 0.25, 30 * (i % 12), 0});
    const auto plan = plan_path(m, s.start_poses[0], b);
    if (!plan) continue;
    EpisodeSpec spec;
    spec.n_step = 10000;
    Episode ep(s, Task{}, spec);
    ep.reset(0);
    for (auto act : *plan) {
      ep.step(act);
      CHECK_FALSE(ep.state().collided_last);
    }
    CHECK(s.cell_of(ep.state().pose) == b);
  }
}

TEST_CASE("nearest-goal BFS and distances") {
  ExploredMap m(6, 1, 0.25);
  for (int x = 0; x < 6; ++x) m.mark({x, 0}, Known::Free);
  m.mark({3, 0}, Known::Occupied);
  const auto p = bfs_to_nearest(m, {1, 0}, [](CellIndex q) { return q.x == 0 || q.x == 5; });
  REQUIRE(p.has_value());
  CHECK(p->back() == CellIndex{0, 0});
  CHECK_FALSE(bfs_to_nearest(m, {1, 0}, [](CellIndex q) { return q.x == 5; }).has_value());
  const auto d = known_free_distances(m, {0, 0});
  CHECK(d[2] == 2);
  CHECK(d[4] == -1);
}
