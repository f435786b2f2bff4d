#include <algorithm>
#include <cmath>
#include <numbers>

#include "moddn/explorers.hpp"

namespace moddn {

ObjectAttributeSource::ObjectAttributeSource(const EmbeddingTable& table, const AttributeModel& model) {
  const std::string prefix = "obj:";
  for (const auto& key : table.keys())
    if (key.rfind(prefix, 0) == 0) features_.emplace(key.substr(prefix.size()), encode(model.object, table.vector(key)));
}

ObjectScore object_score(const Matrix& object_features, const InstructionAttributes& attrs) {
  return {max_pair_cosine(attrs.basic, object_features), max_pair_cosine(attrs.preferred, object_features)};
}

BlockScore block_score(BlockKey key, const std::vector<const Matrix*>& member_features,
                       const InstructionAttributes& attrs, double r_b, double r_p) {
  BlockScore out;
  out.key = key;
  for (const auto* f : member_features) {
    if (!f) continue;
    const auto s = object_score(*f, attrs);
    out.basic_part += s.basic;
    out.pref_part += s.pref;
  }
  out.s = r_b * out.basic_part + r_p * out.pref_part;
  return out;
}

BlockScore block_score(const BlockMembers& block, const InstructionAttributes& attrs,
                       const ObjectAttributeSource& source, double r_b, double r_p) {
  std::vector<const Matrix*> feats;
  feats.reserve(block.objects.size());
  for (const auto& o : block.objects) feats.push_back(source.find(o.label));
  return block_score(block.key, feats, attrs, r_b, r_p);
}

std::optional<WaypointChoice> select_waypoint(const std::vector<BlockScore>& scores, const BlockGrid& grid,
                                              const ExploredMap& map, CellIndex agent, std::mt19937_64& rng) {
  const auto dist = known_free_distances(map, agent);
  auto reachable = [&](CellIndex c) {
    return map.in_bounds(c) && dist[static_cast<std::size_t>(c.y * map.width() + c.x)] >= 0;
  };

  std::vector<const BlockScore*> order;
  for (const auto& s : scores)
    if (!grid.visited(s.key)) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](const BlockScore* a, const BlockScore* b) {
    if (a->s != b->s) return a->s > b->s;
    return a->key < b->key;
  });

  for (const auto* s : order) {
    std::vector<CellIndex> cells;
    for (auto c : cells_in_block(map, s->key, grid.block_size()))
      if (reachable(c)) cells.push_back(c);
    if (cells.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
    return WaypointChoice{s->key, cells[pick(rng)], false};
  }

  const auto fr = frontiers(map);
  std::optional<CellIndex> best;
  int best_d = 0;
  for (auto c : fr) {
    const int d = dist[static_cast<std::size_t>(c.y * map.width() + c.x)];
    if (d < 0) continue;
    if (!best || d < best_d) {
      best = c;
      best_d = d;
    }
  }
  if (!best) return std::nullopt;
  return WaypointChoice{block_of_cell(map, *best, grid.block_size()), *best, true};
}

AgentContext::AgentContext(Episode& episode, ExploredMap& map, double block_size)
    : episode_(episode), map_(map), block_size_(block_size) {}

void AgentContext::observe_initial(const Observation& obs) {
  last_obs_ = obs;
  integrate(map_, obs, pose(), episode_.spec(), episode_.state().steps_taken);
}

bool AgentContext::act(Action a) {
  if (episode_.terminated()) return false;
  auto r = episode_.step(a);
  prev_ = a;
  has_prev_ = true;
  last_obs_ = std::move(r.observation);
  integrate(map_, last_obs_, pose(), episode_.spec(), episode_.state().steps_taken);
  return true;
}

bool AgentContext::walk(const std::vector<Action>& actions) {
  for (auto a : actions)
    if (!act(a)) return false;
  return !terminated();
}

void AgentContext::scan() {
  for (int i = 0; i < 360 / kAngleStep && !terminated(); ++i) act(Action::RotateLeft);
}

std::vector<Action> AgentContext::orient_towards(double x, double y, double height) const {
  const auto& p = pose();
  const auto g = view_geometry(p, x, y, height, episode_.spec());
  std::vector<Action> out;
  if (g.range > 1e-9) {
    const int want = static_cast<int>(std::lround(g.bearing / kAngleStep)) * kAngleStep % 360;
    out = rotations_to(p.heading, want);
  }
  int target_pitch = static_cast<int>(std::lround(g.elevation / kAngleStep)) * kAngleStep;
  target_pitch = std::clamp(target_pitch, kMinPitch, kMaxPitch);
  for (int pitch = p.pitch; pitch < target_pitch; pitch += kAngleStep) out.push_back(Action::LookUp);
  for (int pitch = p.pitch; pitch > target_pitch; pitch -= kAngleStep) out.push_back(Action::LookDown);
  return out;
}

}  // namespace moddn
