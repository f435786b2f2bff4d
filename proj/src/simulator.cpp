#include "moddn/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace moddn {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

namespace {

constexpr double kEps = 1e-9;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

Point2 direction(double deg) {
  const double w = wrap_degrees(deg);
  if (w == 0.0) return {1.0, 0.0};
  if (w == 90.0) return {0.0, 1.0};
  if (w == 180.0) return {-1.0, 0.0};
  if (w == 270.0) return {0.0, -1.0};
  return {std::cos(deg2rad(w)), std::sin(deg2rad(w))};
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

double unit_draw(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  const auto h = splitmix(splitmix(splitmix(splitmix(a) ^ b) ^ c) ^ d);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace

std::string_view action_name(Action a) {
  switch (a) {
    case Action::MoveAhead: return "MoveAhead";
    case Action::RotateRight: return "RotateRight";
    case Action::RotateLeft: return "RotateLeft";
    case Action::LookUp: return "LookUp";
    case Action::LookDown: return "LookDown";
    case Action::Find: return "Find";
    case Action::Done: return "Done";
  }
  return "?";
}

std::optional<Action> parse_action(std::string_view name) {
  for (auto a : kAllActions)
    if (action_name(a) == name) return a;
  return std::nullopt;
}

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0) w += 360.0;
  if (w >= 360.0) w -= 360.0;
  return w;
}

double angle_difference(double a, double b) {
  double d = wrap_degrees(a - b);
  if (d > 180.0) d -= 360.0;
  return d;
}

Point2 heading_vector(int heading) { return direction(heading); }

std::vector<CellIndex> supercover(CellIndex a, CellIndex b) {
  std::vector<CellIndex> out;
  int x = a.x, y = a.y;
  int dx = b.x - a.x, dy = b.y - a.y;
  const int xstep = dx < 0 ? -1 : 1;
  const int ystep = dy < 0 ? -1 : 1;
  dx = std::abs(dx);
  dy = std::abs(dy);
  const int ddx = 2 * dx, ddy = 2 * dy;
  out.push_back({x, y});
  if (ddx >= ddy) {
    int error = dx, prev = dx;
    for (int i = 0; i < dx; ++i) {
      x += xstep;
      error += ddy;
      if (error > ddx) {
        y += ystep;
        error -= ddx;
        if (error + prev < ddx) {
          out.push_back({x, y - ystep});
        } else if (error + prev > ddx) {
          out.push_back({x - xstep, y});
        } else {
          out.push_back({x, y - ystep});
          out.push_back({x - xstep, y});
        }
      }
      out.push_back({x, y});
      prev = error;
    }
  } else {
    int error = dy, prev = dy;
    for (int i = 0; i < dy; ++i) {
      y += ystep;
      error += ddx;
      if (error > ddy) {
        x += xstep;
        error -= ddy;
        if (error + prev < ddy) {
          out.push_back({x - xstep, y});
        } else if (error + prev > ddy) {
          out.push_back({x, y - ystep});
        } else {
          out.push_back({x - xstep, y});
          out.push_back({x, y - ystep});
        }
      }
      out.push_back({x, y});
      prev = error;
    }
  }
  return out;
}

bool line_of_sight(const SceneMap& scene, CellIndex from, CellIndex to) {
  for (auto c : supercover(from, to))
    if (!scene.is_free(c)) return false;
  return true;
}

std::vector<RayCell> ray_cells(int width, int height, double cs, Point2 origin, double angle_deg, double length) {
  std::vector<RayCell> out;
  const auto dir = direction(angle_deg);
  CellIndex c{static_cast<int>(std::floor(origin.x / cs)), static_cast<int>(std::floor(origin.y / cs))};
  auto inside = [&](CellIndex q) { return q.x >= 0 && q.y >= 0 && q.x < width && q.y < height; };
  const double inf = std::numeric_limits<double>::infinity();
  int sx = 0, sy = 0;
  double tmx = inf, tmy = inf, tdx = inf, tdy = inf;
  if (dir.x > 0) {
    sx = 1;
    tmx = ((c.x + 1) * cs - origin.x) / dir.x;
    tdx = cs / dir.x;
  } else if (dir.x < 0) {
    sx = -1;
    tmx = (c.x * cs - origin.x) / dir.x;
    tdx = -cs / dir.x;
  }
  if (dir.y > 0) {
    sy = 1;
    tmy = ((c.y + 1) * cs - origin.y) / dir.y;
    tdy = cs / dir.y;
  } else if (dir.y < 0) {
    sy = -1;
    tmy = (c.y * cs - origin.y) / dir.y;
    tdy = -cs / dir.y;
  }
  double entry = 0.0;
  while (inside(c)) {
    out.push_back({c, entry});
    if (tmx <= tmy) {
      entry = tmx;
      c.x += sx;
      tmx += tdx;
    } else {
      entry = tmy;
      c.y += sy;
      tmy += tdy;
    }
    if (entry > length) break;
  }
  return out;
}

std::vector<RayCell> ray_cells(const SceneMap& scene, Point2 origin, double angle_deg, double length) {
  return ray_cells(scene.width, scene.height, scene.cell_size, origin, angle_deg, length);
}

ViewGeometry view_geometry(const Pose& pose, double x, double y, double height, const EpisodeSpec& spec) {
  ViewGeometry g;
  const double dx = x - pose.x, dy = y - pose.y;
  g.range = std::hypot(dx, dy);
  g.bearing = g.range > kEps ? wrap_degrees(rad2deg(std::atan2(dy, dx))) : wrap_degrees(pose.heading);
  g.elevation = rad2deg(std::atan2(height - spec.camera_height, g.range));
  const bool horizontal = g.range <= kEps || std::abs(angle_difference(g.bearing, pose.heading)) <= spec.fov_h / 2 + kEps;
  const bool vertical = std::abs(g.elevation - pose.pitch) <= spec.fov_v / 2 + kEps;
  g.in_fov = horizontal && vertical;
  return g;
}

std::vector<const ObjectInstance*> findable_objects(const SceneMap& scene, const Pose& pose, const EpisodeSpec& spec) {
  std::vector<const ObjectInstance*> out;
  const auto here = scene.cell_of(pose);
  for (const auto& o : scene.objects) {
    const auto g = view_geometry(pose, o.x, o.y, o.height, spec);
    if (g.range <= spec.d_find + kEps && g.in_fov && line_of_sight(scene, here, scene.cell_of(o.x, o.y)))
      out.push_back(&o);
  }
  return out;
}

std::vector<DepthRay> depth_profile(const SceneMap& scene, const Pose& pose, const EpisodeSpec& spec) {
  std::vector<DepthRay> rays;
  const int n = static_cast<int>(std::floor(spec.fov_h)) + 1;
  const double start = pose.heading - spec.fov_h / 2.0;
  const double step = n > 1 ? spec.fov_h / (n - 1) : 0.0;
  for (int i = 0; i < n; ++i) {
    DepthRay r;
    r.angle = wrap_degrees(start + i * step);
    r.range = spec.detection_range;
    for (const auto& rc : ray_cells(scene, {pose.x, pose.y}, r.angle, spec.detection_range)) {
      if (scene.at(rc.cell) == Cell::Occupied) {
        r.range = rc.entry;
        r.hit = true;
        break;
      }
    }
    rays.push_back(r);
  }
  return rays;
}

Observation detect_fov(const SceneMap& scene, const Pose& pose, const EpisodeSpec& spec, const DetectorNoise& noise,
                       std::uint64_t salt) {
  Observation obs;
  obs.depth = depth_profile(scene, pose, spec);
  const auto here = scene.cell_of(pose);
  std::vector<std::string> vocab;
  if (noise.mislabel_rate > 0.0) {
    const auto v = scene.vocabulary();
    vocab.assign(v.begin(), v.end());
  }
  for (const auto& o : scene.objects) {
    const auto g = view_geometry(pose, o.x, o.y, o.height, spec);
    if (g.range > spec.detection_range + kEps || !g.in_fov) continue;
    if (!line_of_sight(scene, here, scene.cell_of(o.x, o.y))) continue;
    const auto id_hash = fnv1a(o.id);
    if (noise.miss_rate > 0.0 && unit_draw(noise.seed, salt, id_hash, 1) < noise.miss_rate) continue;
    std::string label = o.category;
    if (noise.mislabel_rate > 0.0 && vocab.size() > 1 && unit_draw(noise.seed, salt, id_hash, 2) < noise.mislabel_rate) {
      std::vector<const std::string*> others;
      for (const auto& c : vocab)
        if (c != o.category) others.push_back(&c);
      const auto pick = static_cast<std::size_t>(unit_draw(noise.seed, salt, id_hash, 3) * others.size());
      label = *others[std::min(pick, others.size() - 1)];
    }
    obs.detections.push_back({o.id, label, g.range, g.bearing, g.elevation});
  }
  return obs;
}

nlohmann::ordered_json to_json(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["t"] = r.t;
  j["action"] = action_name(r.action);
  j["pose"] = {{"x", r.pose.x}, {"y", r.pose.y}, {"heading", r.pose.heading}, {"pitch", r.pose.pitch}};
  j["collided"] = r.collided;
  auto dets = nlohmann::ordered_json::array();
  for (const auto& d : r.detections)
    dets.push_back({{"id", d.id}, {"label", d.label}, {"range", d.range}, {"bearing", d.bearing}});
  j["detections"] = dets;
  if (r.find_event) j["find_event"] = {{"step", r.find_event->step}, {"ids", r.find_event->object_ids}};
  return j;
}

std::string log_to_jsonl(const std::vector<StepRecord>& log) {
  std::string out;
  for (const auto& r : log) out += to_json(r).dump() + "\n";
  return out;
}

Episode::Episode(const SceneMap& scene, const Task& task, EpisodeSpec spec, DetectorNoise noise)
    : scene_(&scene), task_(&task), spec_(spec), noise_(noise) {
  validate_spec(spec_);
  if (noise_.miss_rate < 0 || noise_.miss_rate > 1 || noise_.mislabel_rate < 0 || noise_.mislabel_rate > 1)
    throw ValidationError("detector noise rates must lie in [0, 1]", {});
}

StepResult Episode::reset(std::uint64_t seed) {
  if (scene_->start_poses.empty()) throw Error("scene has no start poses");
  std::mt19937_64 rng(splitmix(seed));
  std::uniform_int_distribution<std::size_t> pick(0, scene_->start_poses.size() - 1);
  state_ = AgentState{};
  state_.pose = scene_->start_poses[pick(rng)];
  found_ = FoundList{};
  log_.clear();
  started_ = true;
  terminated_ = spec_.n_step == 0 || spec_.n_find == 0;
  return {observe(), terminated_};
}

Observation Episode::observe() const {
  return detect_fov(*scene_, state_.pose, spec_, noise_, static_cast<std::uint64_t>(state_.steps_taken));
}

StepResult Episode::step(Action action) {
  if (!started_) throw ContractError("step() before reset()");
  if (terminated_) throw ContractError("step() after episode termination");
  auto& s = state_;
  StepRecord rec;
  rec.t = s.steps_taken;
  rec.action = action;
  s.collided_last = false;
  switch (action) {
    case Action::MoveAhead: {
      const auto d = heading_vector(s.pose.heading);
      const double nx = s.pose.x + kMoveStep * d.x;
      const double ny = s.pose.y + kMoveStep * d.y;
      if (scene_->is_free(scene_->cell_of(nx, ny))) {
        s.pose.x = nx;
        s.pose.y = ny;
        ++s.moves;
        s.path_length = kMoveStep * s.moves;
      } else {
        s.collided_last = true;
      }
      break;
    }
    case Action::RotateRight: s.pose.heading = (s.pose.heading + 360 - kAngleStep) % 360; break;
    case Action::RotateLeft: s.pose.heading = (s.pose.heading + kAngleStep) % 360; break;
    case Action::LookUp: s.pose.pitch = std::min(kMaxPitch, s.pose.pitch + kAngleStep); break;
    case Action::LookDown: s.pose.pitch = std::max(kMinPitch, s.pose.pitch - kAngleStep); break;
    case Action::Find: {
      FindEvent ev;
      ev.step = s.steps_taken;
      for (const auto* o : findable_objects(*scene_, s.pose, spec_)) {
        ev.object_ids.push_back(o->id);
        found_.categories.insert(o->category);
      }
      found_.events.push_back(ev);
      rec.find_event = ev;
      ++s.finds_used;
      break;
    }
    case Action::Done: break;
  }
  ++s.steps_taken;
  update_termination(action);
  StepResult r{observe(), terminated_};
  rec.pose = s.pose;
  rec.collided = s.collided_last;
  rec.detections = r.observation.detections;
  log_.push_back(std::move(rec));
  return r;
}

void Episode::update_termination(Action last) {
  terminated_ = last == Action::Done || state_.finds_used >= spec_.n_find || state_.steps_taken >= spec_.n_step;
}

}  // namespace moddn
