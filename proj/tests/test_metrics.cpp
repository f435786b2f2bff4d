#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "moddn/metrics.hpp"
#include "oracles.hpp"

using namespace moddn;

namespace {

CategorySet random_subset(std::mt19937_64& rng, const std::vector<std::string>& pool, double p) {
  CategorySet out;
  std::bernoulli_distribution keep(p);
  for (const auto& c : pool)
    if (keep(rng)) out.insert(c);
  return out;
}

EpisodeResult result(std::uint64_t seed, double sr_b, double sr_p, double spl_b, double spl_p) {
  EpisodeResult r;
  r.seed = seed;
  r.sr_basic = sr_b;
  r.sr_pref = sr_p;
  r.spl_basic = spl_b;
  r.spl_pref = spl_p;
  return r;
}

}  // namespace

TEST_CASE("success rate worked example") {
  const CategorySet fl{"a", "b", "c", "d", "e", "f"};
  const std::vector<Solution> sols{{"a", "b", "c", "x", "y"}, {"d", "e", "m", "n"}};
  CHECK(success_rate(fl, sols) == 0.6);
  CHECK(success_rate({}, sols) == 0.0);
  CHECK(success_rate({"d", "e", "m", "n", "z"}, sols) == 1.0);
  CHECK_THROWS_AS(success_rate(fl, {}), Error);
  CHECK_THROWS_AS(success_rate(fl, {{}}), Error);
}

TEST_CASE("success rate matches brute force and is monotone in the found list") {
  std::mt19937_64 rng(21);
  const std::vector<std::string> pool{"a", "b", "c", "d", "e", "f", "g", "h"};
  std::uniform_int_distribution<int> nsol(1, 4);
  for (int i = 0; i < 50; ++i) {
    std::vector<Solution> sols;
    const int n = nsol(rng);
    while (static_cast<int>(sols.size()) < n) {
      auto s = random_subset(rng, pool, 0.4);
      if (!s.empty()) sols.emplace_back(s.begin(), s.end());
    }
    const auto fl = random_subset(rng, pool, 0.5);
    CHECK(success_rate(fl, sols) == doctest::Approx(oracle::success_rate(fl, sols)).epsilon(1e-15));
    auto more = fl;
    more.insert(pool[static_cast<std::size_t>(i) % pool.size()]);
    CHECK(success_rate(fl, sols) <= success_rate(more, sols));
  }
}

TEST_CASE("SPL formula") {
  CHECK(spl(1.0, 10.0, 10.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spl(0.0, 3.0, 7.0) == 0.0);
  CHECK(spl(0.5, 10.0, 20.0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(spl(0.7, 0.0, 5.0) == 0.7);
  CHECK(spl(0.8, 10.0, 4.0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK_THROWS_AS(spl(1.0, -1.0, 1.0), Error);
  CHECK_THROWS_AS(spl(1.0, 1.0, -1.0), Error);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0), len(0.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const double sr = u(rng), l = len(rng), p = len(rng);
    const double v = spl(sr, l, p);
    CHECK(v <= sr + 1e-12);
    CHECK(v >= 0.0);
    if (p <= l) CHECK(v == doctest::Approx(sr).epsilon(1e-12));
  }
}

TEST_CASE("score_episode fills both families") {
  const Task t = fixture::task("t", {{"a", "b"}}, {{"a", "b", "c", "d"}});
  const auto r = score_episode(t, {"a", "c"}, 8.0, 4.0, 16.0);
  CHECK(r.sr_basic == 0.5);
  CHECK(r.sr_pref == 0.5);
  CHECK(r.spl_basic == doctest::Approx(0.25));
  CHECK(r.spl_pref == doctest::Approx(0.5));
  CHECK(r.task_id == "t");
  CHECK(r.path_length == 8.0);
}

TEST_CASE("tour on a straight corridor") {
  auto s = fixture::open_room(20, 1);
  fixture::object_at(s, "cup_0", "cup", 16, 0);
  const Task t = fixture::task("t", {{"cup"}});
  const auto r = shortest_solution_tour(s, t, fixture::pose_at(s, 0, 0), EpisodeSpec{}, SolutionFamily::Basic);
  CHECK(r.length == doctest::Approx(3.0));
  CHECK_FALSE(r.unreachable_demand);
  CHECK(r.achievable_sr == 1.0);

  const auto near = shortest_solution_tour(s, t, fixture::pose_at(s, 13, 0), EpisodeSpec{}, SolutionFamily::Basic);
  CHECK(near.length == 0.0);
}

TEST_CASE("tour order beats nearest-first") {
  // Corridor positions (cells): start 20, a 22, b 16, c 27.
  auto s = fixture::open_room(32, 1);
  fixture::object_at(s, "a0", "a", 22, 0);
  fixture::object_at(s, "b0", "b", 16, 0);
  fixture::object_at(s, "c0", "c", 27, 0);
  EpisodeSpec spec;
  spec.d_find = 0.1;
  const Task t = fixture::task("t", {{"a", "b", "c"}});
  const Pose start = fixture::pose_at(s, 20, 0);
  const auto r = shortest_solution_tour(s, t, start, spec, SolutionFamily::Basic);

  // Greedy: nearest unvisited object each time.
  int at = 20, greedy = 0;
  std::vector<int> left{22, 16, 27};
  while (!left.empty()) {
    auto it = std::min_element(left.begin(), left.end(),
                               [&](int u, int v) { return std::abs(u - at) < std::abs(v - at); });
    greedy += std::abs(*it - at);
    at = *it;
    left.erase(it);
  }
  CHECK(greedy == 18);
  CHECK(r.length == doctest::Approx(15 * 0.25));
  CHECK(r.length < greedy * 0.25);
}

TEST_CASE("tour uses the best achievable solution family member") {
  auto s = fixture::open_room(12, 12);
  fixture::object_at(s, "a0", "a", 10, 10);
  fixture::object_at(s, "b0", "b", 2, 2);
  const Pose start = fixture::pose_at(s, 1, 1);
  SUBCASE("missing categories lower the achievable rate") {
    const Task t = fixture::task("t", {{"a", "zz"}, {"b", "yy", "xx"}});
    const auto r = shortest_solution_tour(s, t, start, EpisodeSpec{}, SolutionFamily::Basic);
    CHECK(r.achievable_sr == 0.5);
    CHECK(r.length > 2.0);  // must go to the far a
  }
  SUBCASE("nothing present") {
    const Task t = fixture::task("t", {{"zz"}});
    const auto r = shortest_solution_tour(s, t, start, EpisodeSpec{}, SolutionFamily::Basic);
    CHECK(r.unreachable_demand);
    CHECK(r.length == 0.0);
  }
  SUBCASE("preferred family is separate") {
    const Task t = fixture::task("t", {{"b"}}, {{"a"}});
    const auto b = shortest_solution_tour(s, t, start, EpisodeSpec{}, SolutionFamily::Basic);
    const auto p = shortest_solution_tour(s, t, start, EpisodeSpec{}, SolutionFamily::Preferred);
    CHECK(b.length == 0.0);
    CHECK(p.length > b.length);
  }
}

TEST_CASE("tour matches the product-state oracle on random scenes") {
  std::mt19937_64 rng(77);
  const std::vector<std::string> cats{"a", "b", "c", "d", "e"};
  std::uniform_int_distribution<int> cell(0, 15), n_inst(0, 2), n_sol(1, 3), sol_size(1, 3), pick(0, 4);
  std::bernoulli_distribution wall(0.15);
  int done = 0;
  while (done < 50) {
    auto s = fixture::open_room(16, 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (wall(rng)) s.set({x, y}, Cell::Occupied);
    int id = 0;
    for (const auto& c : cats)
      for (int k = n_inst(rng); k > 0; --k) {
        const CellIndex q{cell(rng), cell(rng)};
        if (s.is_free(q)) fixture::object_at(s, "o" + std::to_string(id++), c, q.x, q.y);
      }
    const CellIndex st{cell(rng), cell(rng)};
    if (!s.is_free(st)) continue;
    std::vector<Solution> sols;
    for (int k = n_sol(rng); k > 0; --k) {
      std::set<std::string> chosen;
      for (int m = sol_size(rng); m > 0; --m) chosen.insert(cats[static_cast<std::size_t>(pick(rng))]);
      sols.emplace_back(chosen.begin(), chosen.end());
    }
    const Task t = fixture::task("t", sols);
    const Pose start = fixture::pose_at(s, st.x, st.y);
    const EpisodeSpec spec;
    bool unreachable = false;
    const double expected = oracle::product_state_tour(s, sols, start, spec.d_find, &unreachable);
    const auto got = shortest_solution_tour(s, t, start, spec, SolutionFamily::Basic);
    INFO("instance " << done);
    CHECK(got.unreachable_demand == unreachable);
    CHECK(got.length == doctest::Approx(expected).epsilon(1e-12));
    ++done;
  }
}

TEST_CASE("category discs and distances") {
  auto s = fixture::grid({"....", ".##.", "...."});
  fixture::object_at(s, "a0", "a", 0, 0);
  const auto d = bfs_distances(s, {0, 0});
  CHECK(d[static_cast<std::size_t>(2 * 4 + 3)] == 5);
  CHECK(d[static_cast<std::size_t>(1 * 4 + 1)] == -1);
  const auto disc = category_disc(s, "a", 0.25);
  // Centre distance 0 and the two orthogonal neighbours at 0.25; the occupied diagonal is excluded.
  CHECK(disc.size() == 3);
}

TEST_CASE("aggregation") {
  SUBCASE("single episode") {
    const auto rep = aggregate({result(1, 0.5, 0.25, 0.4, 0.2)});
    CHECK(rep.pooled.n == 1);
    CHECK(rep.pooled.sr_b.mean == 0.5);
    CHECK(rep.pooled.sr_b.std == 0.0);
  }
  SUBCASE("two episodes") {
    const auto rep = aggregate({result(1, 0.2, 0, 0, 0), result(1, 0.6, 0, 0, 0)});
    CHECK(rep.pooled.sr_b.mean == doctest::Approx(0.4));
  }
  SUBCASE("empty input") { CHECK_THROWS_AS(aggregate({}), Error); }
  SUBCASE("twelve results across three seeds") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<EpisodeResult> rs;
    const std::uint64_t seeds[3] = {30, 10, 20};
    for (int i = 0; i < 12; ++i) {
      const double a = u(rng), b = u(rng);
      rs.push_back(result(seeds[i % 3], a, b, a * u(rng), b * u(rng)));
    }
    const auto rep = aggregate(rs);
    REQUIRE(rep.per_seed.size() == 3);
    CHECK(rep.per_seed[0].seed == 10);
    CHECK(rep.per_seed[2].seed == 30);
    CHECK(rep.pooled.n == 12);

    // Spreadsheet-style recomputation of sr_b and spl_p.
    auto column = [&](auto get) {
      double total = 0;
      std::vector<double> seed_means;
      for (std::uint64_t sd : {10u, 20u, 30u}) {
        double sum = 0, sq = 0;
        int n = 0;
        for (const auto& r : rs)
          if (r.seed == sd) {
            sum += get(r);
            ++n;
          }
        const double mean = sum / n;
        for (const auto& r : rs)
          if (r.seed == sd) sq += (get(r) - mean) * (get(r) - mean);
        seed_means.push_back(mean);
        seed_means.push_back(std::sqrt(sq / n));
        total += sum;
      }
      const double pooled = total / 12;
      const double mm = (seed_means[0] + seed_means[2] + seed_means[4]) / 3;
      double v = 0;
      for (int k = 0; k < 3; ++k) v += (seed_means[2 * k] - mm) * (seed_means[2 * k] - mm);
      seed_means.push_back(pooled);
      seed_means.push_back(std::sqrt(v / 3));
      return seed_means;
    };
    const auto srb = column([](const EpisodeResult& r) { return r.sr_basic; });
    const auto splp = column([](const EpisodeResult& r) { return r.spl_pref; });
    for (int k = 0; k < 3; ++k) {
      CHECK(rep.per_seed[static_cast<std::size_t>(k)].metrics.sr_b.mean == doctest::Approx(srb[2 * k]));
      CHECK(rep.per_seed[static_cast<std::size_t>(k)].metrics.sr_b.std == doctest::Approx(srb[2 * k + 1]));
      CHECK(rep.per_seed[static_cast<std::size_t>(k)].metrics.spl_p.mean == doctest::Approx(splp[2 * k]));
      CHECK(rep.per_seed[static_cast<std::size_t>(k)].metrics.n == 4);
    }
    CHECK(rep.pooled.sr_b.mean == doctest::Approx(srb[6]));
    CHECK(rep.pooled.sr_b.std == doctest::Approx(srb[7]));
    CHECK(rep.pooled.spl_p.mean == doctest::Approx(splp[6]));
    CHECK(rep.pooled.spl_p.std == doctest::Approx(splp[7]));
    CHECK(report_to_json(aggregate(rs)).dump() == report_to_json(rep).dump());
  }
}

TEST_CASE("report JSON") {
  auto r = result(3, 0.123456, 1.0, 0.1, 0.5);
  r.task_id = "t";
  const auto j = report_to_json(aggregate({r}));
  CHECK(j["N"] == 1);
  CHECK(j["pooled"]["sr_b"]["mean"].get<double>() == doctest::Approx(12.35));
  CHECK(j["per_seed"].size() == 1);
  CHECK(j["episodes"].size() == 1);
  CHECK(to_percent(0.5) == 50.0);
}
