#pragma once
// Success rate, SPL, oracle tour lengths and benchmark aggregation.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "moddn/scene.hpp"

namespace moddn {

using CategorySet = std::set<std::string>;

// max over solutions of |found ∩ s| / |s|. Throws on an empty solution list
// or an empty solution.
double success_rate(const CategorySet& found, const std::vector<Solution>& solutions);

// sr * l / max(p, l); sr when l == 0. Throws on negative lengths.
double spl(double sr, double l, double p);

enum class SolutionFamily { Basic, Preferred };

struct TourResult {
  double length = 0.0;            // meters
  bool unreachable_demand = false;
  double achievable_sr = 0.0;     // best success rate reachable in the scene
};

// Geodesic BFS distances (in cells) over Free cells from `start`; -1 where
// unreachable.
std::vector<int> bfs_distances(const SceneMap& scene, CellIndex start);

// Cells whose centre lies within d_find of an instance of `category`.
std::vector<CellIndex> category_disc(const SceneMap& scene, const std::string& category, double d_find);

// Shortest tour from `start` that enters the d_find disc of some instance of
// every reachable category of a solution attaining the best achievable
// success rate; minimised over such solutions.
TourResult shortest_solution_tour(const SceneMap& scene, const Task& task, const Pose& start, const EpisodeSpec& spec,
                                  SolutionFamily which);

struct EpisodeResult {
  std::string task_id;
  std::string scene;
  std::uint64_t seed = 0;
  int index = 0;
  CategorySet found;
  double path_length = 0.0;
  double l_basic = 0.0;
  double l_pref = 0.0;
  double sr_basic = 0.0;
  double sr_pref = 0.0;
  double spl_basic = 0.0;
  double spl_pref = 0.0;
  int steps = 0;
  int finds = 0;
};

EpisodeResult score_episode(const Task& task, const CategorySet& found, double path_length, double l_basic,
                            double l_pref);

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

struct MetricBlock {
  std::size_t n = 0;
  MetricStats sr_b, sr_p, spl_b, spl_p;
};

struct SeedBlock {
  std::uint64_t seed = 0;
  MetricBlock metrics;
};

struct BenchmarkReport {
  std::vector<SeedBlock> per_seed;
  // mean: over all episodes; std: across the per-seed means.
  MetricBlock pooled;
  std::vector<EpisodeResult> episodes;
};

// Groups by EpisodeResult::seed (ascending). Throws on empty input.
BenchmarkReport aggregate(const std::vector<EpisodeResult>& results);

double to_percent(double v);  // 100 * v rounded to 2 decimals
nlohmann::ordered_json report_to_json(const BenchmarkReport& report);

}  // namespace moddn
