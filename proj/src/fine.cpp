#include <algorithm>
#include <cmath>

#include "moddn/explorers.hpp"

namespace moddn {

double FineScoring::score(const std::string& label) const {
  if (!attrs || !objects) return 0.0;
  const Matrix* f = objects->find(label);
  if (!f) return 0.0;
  return object_score(*f, *attrs).combined(r_b, r_p);
}

namespace {

constexpr double kReachMargin = 0.05;

int steps_taken(const AgentContext& ctx) { return ctx.episode().state().steps_taken; }

void level_pitch(AgentContext& ctx) {
  while (!ctx.terminated() && ctx.pose().pitch > 0) ctx.act(Action::LookDown);
  while (!ctx.terminated() && ctx.pose().pitch < 0) ctx.act(Action::LookUp);
}

// Map-only line of sight: every cell between the two (exclusive of the
// target cell) must be Known-Free.
bool map_line_of_sight(const ExploredMap& map, CellIndex from, CellIndex to) {
  for (auto c : supercover(from, to)) {
    if (c == to) continue;
    if (!map.known_free(c)) return false;
  }
  return true;
}

struct Candidate {
  const RegisteredObject* obj;
  double score;
};

std::vector<Candidate> rank_candidates(const AgentContext& ctx, BlockKey arrived, const FineScoring& scoring,
                                       const FinePolicyConfig& config, const std::set<std::string>& claimed) {
  const auto& p = ctx.pose();
  std::vector<Candidate> out;
  const auto& map = ctx.map();
  for (const auto& [id, o] : map.registry()) {
    if (claimed.count(id) || claimed.count("label:" + o.label)) continue;
    const bool in_block = block_of(o.x, o.y, ctx.block_size()) == arrived;
    const bool near = std::hypot(o.x - p.x, o.y - p.y) <= ctx.block_size();
    if (!in_block && !near) continue;
    const double s = scoring.score(o.label);
    if (config.approach_threshold > 0.0) {
      const double norm = scoring.r_b + scoring.r_p;
      if (norm <= 0.0 || s / norm < config.approach_threshold) continue;
    }
    out.push_back({&o, s});
  }
  std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.obj->id < b.obj->id;
  });
  return out;
}

void claim(std::set<std::string>& claimed, const RegisteredObject& o) {
  claimed.insert(o.id);
  claimed.insert("label:" + o.label);
}

}  // namespace

FineOutcome fine_scripted(AgentContext& ctx, BlockKey arrived, const FineScoring& scoring,
                          const FinePolicyConfig& config, std::set<std::string>& claimed) {
  FineOutcome out;
  const int start = steps_taken(ctx);
  auto remaining = [&] { return config.step_budget - (steps_taken(ctx) - start); };
  auto finish = [&](const RegisteredObject* target) {
    if (target) {
      if (static_cast<int>(ctx.orient_towards(target->x, target->y, target->height).size()) < remaining())
        ctx.walk(ctx.orient_towards(target->x, target->y, target->height));
      out.target_id = target->id;
      claim(claimed, *target);
    }
    if (ctx.act(Action::Find)) out.found_issued = true;
    out.actions = steps_taken(ctx) - start;
    return out;
  };

  level_pitch(ctx);
  ctx.scan();
  const double d_find = ctx.episode().spec().d_find;
  const RegisteredObject* fallback = nullptr;
  bool ranked_once = false;

  while (!ctx.terminated()) {
    const auto ranked = rank_candidates(ctx, arrived, scoring, config, claimed);
    if (!ranked_once) {
      for (const auto& c : ranked) out.ranking.push_back(c.obj->id);
      ranked_once = true;
    }
    if (!fallback && !ranked.empty()) fallback = ranked.front().obj;

    auto& map = ctx.map();
    for (const auto& cand : ranked) {
      const auto* o = cand.obj;
      const CellIndex oc = map.cell_of(o->x, o->y);
      auto path = bfs_to_nearest(map, ctx.cell(), [&](CellIndex c) {
        const auto q = map.center_of(c);
        return std::hypot(q.x - o->x, q.y - o->y) <= d_find - kReachMargin && map_line_of_sight(map, c, oc);
      });
      if (!path) continue;
      const auto actions = compile_path(*path, ctx.pose().heading);
      if (static_cast<int>(actions.size()) + 1 > remaining()) continue;
      // Copy: walking may update the registry entry.
      const RegisteredObject target = *o;
      if (!ctx.walk(actions)) {
        out.actions = steps_taken(ctx) - start;
        return out;
      }
      return finish(&target);
    }

    if (remaining() <= 1) break;
    auto to_frontier = bfs_to_nearest(map, ctx.cell(), [&](CellIndex c) {
      const CellIndex nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
      for (auto n : nb)
        if (map.in_bounds(n) && map.at(n) == Known::Unknown) return true;
      return false;
    });
    if (!to_frontier || to_frontier->size() < 2) break;
    auto actions = compile_path(*to_frontier, ctx.pose().heading);
    actions.resize(std::min<std::size_t>(actions.size(), static_cast<std::size_t>(remaining() - 1)));
    const auto before = map.known_count();
    if (!ctx.walk(actions)) break;
    if (map.known_count() == before && actions.empty()) break;
  }
  if (ctx.terminated()) {
    out.actions = steps_taken(ctx) - start;
    return out;
  }
  if (fallback) {
    const RegisteredObject copy = *fallback;
    return finish(&copy);
  }
  return finish(nullptr);
}

FineOutcome fine_cloned(AgentContext& ctx, BlockKey arrived, Point2 waypoint, const FineScoring& scoring,
                        const FinePolicyConfig& config, const FinePolicy& policy, std::set<std::string>& claimed) {
  (void)arrived;
  FineOutcome out;
  const int start = steps_taken(ctx);
  const auto& spec = ctx.episode().spec();
  FineMemory memory;
  level_pitch(ctx);
  memory.update(ctx.pose(), ctx.last_observation().detections, scoring);
  for (int i = 0; i < 360 / kAngleStep && !ctx.terminated(); ++i) {
    ctx.act(Action::RotateLeft);
    memory.update(ctx.pose(), ctx.last_observation().detections, scoring);
  }
  while (!ctx.terminated()) {
    const auto& obs = ctx.last_observation();
    const double clearance = obs.depth.empty() ? 0.0 : obs.depth[obs.depth.size() / 2].range;
    std::optional<Action> prev;
    if (ctx.has_previous_action()) prev = ctx.previous_action();
    const auto x = memory.features(ctx.pose(), prev, waypoint, clearance, obs.detections, scoring, spec,
                                   ctx.block_size());
    Action a = policy.act(x);
    if (steps_taken(ctx) - start + 1 >= config.step_budget) a = Action::Find;
    if (a == Action::Find) {
      if (auto top = memory.top(claimed)) {
        out.target_id = *top;
        claimed.insert(*top);
      }
      if (ctx.act(Action::Find)) out.found_issued = true;
      break;
    }
    ctx.act(a);
    memory.update(ctx.pose(), ctx.last_observation().detections, scoring);
  }
  out.actions = steps_taken(ctx) - start;
  return out;
}

}  // namespace moddn
