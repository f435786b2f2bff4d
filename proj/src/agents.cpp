#include <algorithm>
#include <cmath>

#include "moddn/explorers.hpp"

namespace moddn {

std::string_view agent_name(AgentKind k) {
  switch (k) {
    case AgentKind::C2F: return "c2f";
    case AgentKind::Random: return "random";
    case AgentKind::FBE: return "fbe";
    case AgentKind::MOPA: return "mopa";
  }
  return "?";
}

std::optional<AgentKind> parse_agent(std::string_view s) {
  for (auto k : {AgentKind::C2F, AgentKind::Random, AgentKind::FBE, AgentKind::MOPA})
    if (agent_name(k) == s) return k;
  return std::nullopt;
}

bool fills_open_slot(const Task& task, const std::set<std::string>& found, const std::string& category) {
  if (found.count(category)) return false;
  auto in = [&](const std::vector<Solution>& family) {
    for (const auto& s : family)
      if (std::find(s.begin(), s.end(), category) != s.end()) return true;
    return false;
  };
  return in(task.basic_solutions) || in(task.preferred_solutions);
}

namespace {

bool oracle_wants_find(const Episode& ep) {
  for (const auto* o : findable_objects(ep.scene(), ep.state().pose, ep.spec()))
    if (fills_open_slot(ep.task(), ep.found().categories, o->category)) return true;
  return false;
}

bool is_frontier(const ExploredMap& map, CellIndex c) {
  const CellIndex nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
  for (auto n : nb)
    if (map.in_bounds(n) && map.at(n) == Known::Unknown) return true;
  return false;
}

void run_c2f(AgentContext& ctx, const AgentConfig& config, const AgentResources& res, std::mt19937_64& rng,
             EpisodeOutcome& out) {
  if (!res.table || !res.objects) throw Error("c2f agent needs an embedding table and object attributes");
  if (config.fine.mode == FineMode::BehaviorCloned && !res.fine_policy)
    throw Error("behavior-cloned fine mode needs a trained fine policy");
  const auto& task = ctx.episode().task();
  const auto attrs = instruction_attributes(task.id, config.coarse.branch, *res.table, res.model);
  const FineScoring scoring{&attrs, res.objects, config.coarse.r_b, config.coarse.r_p};
  BlockGrid grid(config.coarse.block_size);
  std::set<std::string> claimed;

  ctx.scan();
  while (!ctx.terminated()) {
    std::vector<BlockScore> scores;
    for (const auto& bm : blocks_with_objects(ctx.map(), grid)) {
      if (grid.visited(bm.key)) continue;
      auto s = block_score(bm, attrs, *res.objects, config.coarse.r_b, config.coarse.r_p);
      grid.block(bm.key).last_score = s.s;
      scores.push_back(s);
    }
    CoarseRecord rec;
    rec.step = ctx.episode().state().steps_taken;
    rec.scores = scores;
    rec.choice = select_waypoint(scores, grid, ctx.map(), ctx.cell(), rng);
    out.coarse.push_back(rec);
    if (!rec.choice) {
      out.exhausted = true;
      ctx.act(Action::Done);
      break;
    }
    const auto choice = *rec.choice;
    if (!choice.fallback) grid.mark_visited(choice.key);
    auto plan = plan_path(ctx.map(), ctx.pose(), choice.target);
    if (!plan) throw Error("planner failed on a reachable waypoint");
    if (!ctx.walk(*plan)) break;
    if (choice.fallback) {
      ctx.scan();
      continue;
    }
    const Point2 wp = ctx.map().center_of(choice.target);
    if (config.fine.mode == FineMode::BehaviorCloned)
      fine_cloned(ctx, choice.key, wp, scoring, config.fine, *res.fine_policy, claimed);
    else
      fine_scripted(ctx, choice.key, scoring, config.fine, claimed);
  }
}

void run_random(AgentContext& ctx, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, kPolicyActions - 1);
  while (!ctx.terminated()) ctx.act(action_at(pick(rng)));
}

void run_fbe(AgentContext& ctx, EpisodeOutcome& out) {
  auto& ep = ctx.episode();
  auto find_if_useful = [&] {
    if (!ctx.terminated() && oracle_wants_find(ep)) ctx.act(Action::Find);
  };
  ctx.scan();
  while (!ctx.terminated()) {
    find_if_useful();
    if (ctx.terminated()) break;
    auto path = bfs_to_nearest(ctx.map(), ctx.cell(), [&](CellIndex c) { return is_frontier(ctx.map(), c); });
    if (!path) {
      out.exhausted = true;
      ctx.act(Action::Done);
      break;
    }
    if (path->size() < 2) {
      // Standing on a frontier: look around to resolve it.
      for (int i = 0; i < 360 / kAngleStep && !ctx.terminated(); ++i) {
        ctx.act(Action::RotateLeft);
        find_if_useful();
      }
      if (is_frontier(ctx.map(), ctx.cell())) {
        // Unresolvable from here (e.g. beyond sensor reach behind us); step anywhere.
        ctx.act(Action::MoveAhead);
      }
      continue;
    }
    for (auto a : compile_path(*path, ctx.pose().heading)) {
      if (ctx.terminated()) break;
      ctx.act(a);
      find_if_useful();
    }
  }
}

void run_mopa(AgentContext& ctx, std::mt19937_64& rng, EpisodeOutcome& out) {
  auto& ep = ctx.episode();
  const double d_find = ep.spec().d_find;
  std::set<std::string> rejected;
  ctx.scan();
  int idle = 0;
  while (!ctx.terminated()) {
    // Oracle reasoner: nearest registered object whose true category fills an open slot.
    const auto dist = known_free_distances(ctx.map(), ctx.cell());
    const RegisteredObject* target = nullptr;
    int best = -1;
    for (const auto& [id, o] : ctx.map().registry()) {
      if (rejected.count(id)) continue;
      const auto* inst = ep.scene().find_object(id);
      if (!inst || !fills_open_slot(ep.task(), ep.found().categories, inst->category)) continue;
      const auto oc = ctx.map().cell_of(o.x, o.y);
      int d = -1;
      if (ctx.map().in_bounds(oc)) d = dist[static_cast<std::size_t>(oc.y * ctx.map().width() + oc.x)];
      if (d < 0) d = 1 << 20;
      if (!target || d < best) {
        target = &o;
        best = d;
      }
    }
    if (target) {
      const RegisteredObject t = *target;
      auto path = bfs_to_nearest(ctx.map(), ctx.cell(), [&](CellIndex c) {
        const auto q = ctx.map().center_of(c);
        return std::hypot(q.x - t.x, q.y - t.y) <= d_find - 0.05;
      });
      rejected.insert(t.id);
      if (path) {
        if (!ctx.walk(compile_path(*path, ctx.pose().heading))) break;
        if (!ctx.walk(ctx.orient_towards(t.x, t.y, t.height))) break;
        if (oracle_wants_find(ep)) ctx.act(Action::Find);
        idle = 0;
        continue;
      }
    }
    // Nothing useful known: random explored point, then look around.
    std::vector<CellIndex> cells;
    for (int y = 0; y < ctx.map().height(); ++y)
      for (int x = 0; x < ctx.map().width(); ++x)
        if (dist[static_cast<std::size_t>(y * ctx.map().width() + x)] > 0) cells.push_back({x, y});
    if (cells.empty() || ++idle > 50) {
      out.exhausted = true;
      ctx.act(Action::Done);
      break;
    }
    const auto goal = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)];
    auto plan = plan_path(ctx.map(), ctx.pose(), goal);
    if (plan && !ctx.walk(*plan)) break;
    ctx.scan();
  }
}

}  // namespace

EpisodeOutcome run_episode(const AgentConfig& config, const SceneMap& scene, const Task& task,
                           const EpisodeSpec& spec, const AgentResources& resources, std::uint64_t seed) {
  EpisodeOutcome out;
  out.map = ExploredMap::like(scene);
  Episode ep(scene, task, spec, config.noise);
  auto first = ep.reset(seed);
  const Pose start = ep.state().pose;
  AgentContext ctx(ep, out.map, config.coarse.block_size);
  ctx.observe_initial(first.observation);
  std::mt19937_64 rng(splitmix(seed ^ 0xA5A5A5A5ull));

  switch (config.kind) {
    case AgentKind::C2F: run_c2f(ctx, config, resources, rng, out); break;
    case AgentKind::Random: run_random(ctx, rng); break;
    case AgentKind::FBE: run_fbe(ctx, out); break;
    case AgentKind::MOPA: run_mopa(ctx, rng, out); break;
  }

  const auto lb = shortest_solution_tour(scene, task, start, spec, SolutionFamily::Basic);
  const auto lp = shortest_solution_tour(scene, task, start, spec, SolutionFamily::Preferred);
  out.result = score_episode(task, ep.found().categories, ep.state().path_length, lb.length, lp.length);
  out.result.seed = seed;
  out.result.steps = ep.state().steps_taken;
  out.result.finds = ep.state().finds_used;
  out.log = ep.log();
  return out;
}

nlohmann::ordered_json coarse_to_json(const CoarseRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  auto scores = nlohmann::ordered_json::array();
  for (const auto& s : r.scores)
    scores.push_back({{"block", {s.key.bx, s.key.by}}, {"s", s.s}, {"basic", s.basic_part}, {"pref", s.pref_part}});
  j["scores"] = scores;
  if (r.choice)
    j["choice"] = {{"block", {r.choice->key.bx, r.choice->key.by}},
                   {"target", {r.choice->target.x, r.choice->target.y}},
                   {"fallback", r.choice->fallback}};
  else
    j["choice"] = nullptr;
  return j;
}

std::string coarse_to_jsonl(const std::vector<CoarseRecord>& records) {
  std::string out;
  for (const auto& r : records) out += coarse_to_json(r).dump() + "\n";
  return out;
}

}  // namespace moddn
