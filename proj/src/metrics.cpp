#include "moddn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <queue>

namespace moddn {

double success_rate(const CategorySet& found, const std::vector<Solution>& solutions) {
  if (solutions.empty()) throw Error("success_rate: empty solution list");
  double best = 0.0;
  for (const auto& s : solutions) {
    if (s.empty()) throw Error("success_rate: empty solution");
    const CategorySet unique(s.begin(), s.end());
    std::size_t hit = 0;
    for (const auto& c : unique) hit += found.contains(c) ? 1 : 0;
    best = std::max(best, static_cast<double>(hit) / static_cast<double>(unique.size()));
  }
  return best;
}

double spl(double sr, double l, double p) {
  if (l < 0.0 || p < 0.0) throw Error("spl: negative path length");
  if (l == 0.0) return sr;
  return sr * l / std::max(p, l);
}

std::vector<int> bfs_distances(const SceneMap& scene, CellIndex start) {
  std::vector<int> dist(static_cast<std::size_t>(scene.width) * scene.height, -1);
  if (!scene.is_free(start)) return dist;
  auto idx = [&](CellIndex c) { return static_cast<std::size_t>(c.y) * scene.width + c.x; };
  std::deque<CellIndex> q{start};
  dist[idx(start)] = 0;
  while (!q.empty()) {
    const auto c = q.front();
    q.pop_front();
    const CellIndex nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
    for (auto n : nb) {
      if (!scene.is_free(n) || dist[idx(n)] >= 0) continue;
      dist[idx(n)] = dist[idx(c)] + 1;
      q.push_back(n);
    }
  }
  return dist;
}

std::vector<CellIndex> category_disc(const SceneMap& scene, const std::string& category, double d_find) {
  std::vector<CellIndex> out;
  for (int y = 0; y < scene.height; ++y)
    for (int x = 0; x < scene.width; ++x) {
      if (!scene.is_free({x, y})) continue;
      const auto c = scene.center_of({x, y});
      for (const auto& o : scene.objects) {
        if (o.category != category) continue;
        if (std::hypot(c.x - o.x, c.y - o.y) <= d_find + 1e-9) {
          out.push_back({x, y});
          break;
        }
      }
    }
  return out;
}

namespace {

constexpr int kInf = std::numeric_limits<int>::max() / 4;

// Multi-source Dijkstra on the unit-cost 4-grid with per-source offsets.
std::vector<int> propagate(const SceneMap& scene, const std::vector<CellIndex>& sources,
                           const std::vector<int>& offsets) {
  const auto n = static_cast<std::size_t>(scene.width) * scene.height;
  std::vector<int> dist(n, kInf);
  using Item = std::pair<int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto id = static_cast<std::size_t>(sources[i].y) * scene.width + sources[i].x;
    if (offsets[i] < dist[id]) {
      dist[id] = offsets[i];
      pq.push({offsets[i], static_cast<int>(id)});
    }
  }
  while (!pq.empty()) {
    const auto [d, id] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(id)]) continue;
    const CellIndex c{id % scene.width, id / scene.width};
    const CellIndex nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
    for (auto q : nb) {
      if (!scene.is_free(q)) continue;
      const auto qi = static_cast<std::size_t>(q.y) * scene.width + q.x;
      if (d + 1 < dist[qi]) {
        dist[qi] = d + 1;
        pq.push({d + 1, static_cast<int>(qi)});
      }
    }
  }
  return dist;
}

// Minimum cell count to visit the discs in the given order.
int ordered_tour(const SceneMap& scene, const std::vector<int>& from_start,
                 const std::vector<const std::vector<CellIndex>*>& discs) {
  std::vector<int> prev(from_start.size());
  for (std::size_t i = 0; i < prev.size(); ++i) prev[i] = from_start[i] < 0 ? kInf : from_start[i];
  for (std::size_t layer = 0; layer < discs.size(); ++layer) {
    const auto& disc = *discs[layer];
    std::vector<CellIndex> srcs;
    std::vector<int> offs;
    for (auto c : disc) {
      const int v = prev[static_cast<std::size_t>(c.y) * scene.width + c.x];
      if (v < kInf) {
        srcs.push_back(c);
        offs.push_back(v);
      }
    }
    if (srcs.empty()) return kInf;
    if (layer + 1 == discs.size()) return *std::min_element(offs.begin(), offs.end());
    prev = propagate(scene, srcs, offs);
  }
  return 0;
}

}  // namespace

TourResult shortest_solution_tour(const SceneMap& scene, const Task& task, const Pose& start, const EpisodeSpec& spec,
                                  SolutionFamily which) {
  const auto& family = which == SolutionFamily::Basic ? task.basic_solutions : task.preferred_solutions;
  const auto start_cell = scene.cell_of(start);
  if (!scene.is_free(start_cell)) throw Error("shortest_solution_tour: start is not on a free cell");
  const auto from_start = bfs_distances(scene, start_cell);

  std::map<std::string, std::vector<CellIndex>> discs;
  auto reachable_disc = [&](const std::string& cat) -> const std::vector<CellIndex>& {
    auto it = discs.find(cat);
    if (it != discs.end()) return it->second;
    std::vector<CellIndex> keep;
    for (auto c : category_disc(scene, cat, spec.d_find))
      if (from_start[static_cast<std::size_t>(c.y) * scene.width + c.x] >= 0) keep.push_back(c);
    return discs.emplace(cat, std::move(keep)).first->second;
  };

  TourResult result;
  std::vector<std::vector<std::string>> candidates;
  for (const auto& s : family) {
    const CategorySet unique(s.begin(), s.end());
    if (unique.empty()) continue;
    std::vector<std::string> present;
    for (const auto& c : unique)
      if (!reachable_disc(c).empty()) present.push_back(c);
    const double sr = static_cast<double>(present.size()) / static_cast<double>(unique.size());
    if (sr > result.achievable_sr + 1e-12) {
      result.achievable_sr = sr;
      candidates.clear();
    }
    if (sr > 0.0 && std::abs(sr - result.achievable_sr) <= 1e-12) candidates.push_back(std::move(present));
  }
  if (candidates.empty()) {
    result.unreachable_demand = true;
    result.length = 0.0;
    return result;
  }

  int best = kInf;
  for (auto cats : candidates) {
    std::sort(cats.begin(), cats.end());
    do {
      std::vector<const std::vector<CellIndex>*> order;
      for (const auto& c : cats) order.push_back(&discs.at(c));
      best = std::min(best, ordered_tour(scene, from_start, order));
    } while (std::next_permutation(cats.begin(), cats.end()));
  }
  result.length = best * scene.cell_size;
  return result;
}

EpisodeResult score_episode(const Task& task, const CategorySet& found, double path_length, double l_basic,
                            double l_pref) {
  EpisodeResult r;
  r.task_id = task.id;
  r.found = found;
  r.path_length = path_length;
  r.l_basic = l_basic;
  r.l_pref = l_pref;
  r.sr_basic = success_rate(found, task.basic_solutions);
  r.sr_pref = success_rate(found, task.preferred_solutions);
  r.spl_basic = spl(r.sr_basic, l_basic, path_length);
  r.spl_pref = spl(r.sr_pref, l_pref, path_length);
  return r;
}

namespace {

MetricStats stats(const std::vector<double>& v) {
  MetricStats s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(v.size()));
  return s;
}

MetricBlock block_of(const std::vector<const EpisodeResult*>& eps) {
  MetricBlock b;
  b.n = eps.size();
  std::vector<double> a, p, c, d;
  for (const auto* e : eps) {
    a.push_back(e->sr_basic);
    p.push_back(e->sr_pref);
    c.push_back(e->spl_basic);
    d.push_back(e->spl_pref);
  }
  b.sr_b = stats(a);
  b.sr_p = stats(p);
  b.spl_b = stats(c);
  b.spl_p = stats(d);
  return b;
}

}  // namespace

BenchmarkReport aggregate(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw Error("aggregate: no episode results");
  BenchmarkReport rep;
  rep.episodes = results;
  std::map<std::uint64_t, std::vector<const EpisodeResult*>> groups;
  std::vector<const EpisodeResult*> all;
  for (const auto& r : results) {
    groups[r.seed].push_back(&r);
    all.push_back(&r);
  }
  std::vector<double> ma, mp, mc, md;
  for (const auto& [seed, eps] : groups) {
    auto b = block_of(eps);
    ma.push_back(b.sr_b.mean);
    mp.push_back(b.sr_p.mean);
    mc.push_back(b.spl_b.mean);
    md.push_back(b.spl_p.mean);
    rep.per_seed.push_back({seed, b});
  }
  rep.pooled = block_of(all);
  rep.pooled.sr_b.std = stats(ma).std;
  rep.pooled.sr_p.std = stats(mp).std;
  rep.pooled.spl_b.std = stats(mc).std;
  rep.pooled.spl_p.std = stats(md).std;
  return rep;
}

double to_percent(double v) { return std::round(v * 10000.0) / 100.0; }

namespace {

nlohmann::ordered_json block_json(const MetricBlock& b) {
  auto stat = [](const MetricStats& s) {
    return nlohmann::ordered_json{{"mean", to_percent(s.mean)}, {"std", to_percent(s.std)}};
  };
  nlohmann::ordered_json j;
  j["n"] = b.n;
  j["sr_b"] = stat(b.sr_b);
  j["sr_p"] = stat(b.sr_p);
  j["spl_b"] = stat(b.spl_b);
  j["spl_p"] = stat(b.spl_p);
  return j;
}

}  // namespace

nlohmann::ordered_json report_to_json(const BenchmarkReport& rep) {
  nlohmann::ordered_json j;
  j["N"] = rep.pooled.n;
  j["pooled"] = block_json(rep.pooled);
  auto seeds = nlohmann::ordered_json::array();
  for (const auto& s : rep.per_seed) {
    auto b = block_json(s.metrics);
    b["seed"] = s.seed;
    seeds.push_back(b);
  }
  j["per_seed"] = seeds;
  auto eps = nlohmann::ordered_json::array();
  for (const auto& e : rep.episodes) {
    nlohmann::ordered_json r;
    r["seed"] = e.seed;
    r["index"] = e.index;
    r["scene"] = e.scene;
    r["task"] = e.task_id;
    r["found"] = std::vector<std::string>(e.found.begin(), e.found.end());
    r["steps"] = e.steps;
    r["finds"] = e.finds;
    r["p"] = e.path_length;
    r["l_b"] = e.l_basic;
    r["l_p"] = e.l_pref;
    r["sr_b"] = e.sr_basic;
    r["sr_p"] = e.sr_pref;
    r["spl_b"] = e.spl_basic;
    r["spl_p"] = e.spl_pref;
    eps.push_back(r);
  }
  j["episodes"] = eps;
  return j;
}

}  // namespace moddn
