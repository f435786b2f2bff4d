#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "moddn/explorers.hpp"

namespace moddn {

namespace {

constexpr double kAtTarget = 0.2;
constexpr int kMaxExpertSteps = 60;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

// Cell path over true free space to the nearest goal cell.
std::optional<std::vector<CellIndex>> scene_path(const SceneMap& scene, CellIndex start,
                                                 const std::vector<CellIndex>& goals) {
  const auto n = static_cast<std::size_t>(scene.width) * scene.height;
  std::vector<int> parent(n, -1);
  std::vector<char> seen(n, 0);
  std::vector<char> is_goal(n, 0);
  for (auto g : goals) is_goal[static_cast<std::size_t>(g.y * scene.width + g.x)] = 1;
  const int s = start.y * scene.width + start.x;
  if (!scene.is_free(start)) return std::nullopt;
  seen[static_cast<std::size_t>(s)] = 1;
  std::deque<int> q{s};
  constexpr int dx[4] = {1, -1, 0, 0};
  constexpr int dy[4] = {0, 0, 1, -1};
  while (!q.empty()) {
    const int cur = q.front();
    q.pop_front();
    if (is_goal[static_cast<std::size_t>(cur)]) {
      std::vector<CellIndex> path;
      for (int id = cur; id >= 0; id = parent[static_cast<std::size_t>(id)])
        path.push_back({id % scene.width, id / scene.width});
      std::reverse(path.begin(), path.end());
      return path;
    }
    const CellIndex c{cur % scene.width, cur / scene.width};
    for (int k = 0; k < 4; ++k) {
      const CellIndex nb{c.x + dx[k], c.y + dy[k]};
      if (!scene.is_free(nb)) continue;
      const int ni = nb.y * scene.width + nb.x;
      if (seen[static_cast<std::size_t>(ni)]) continue;
      seen[static_cast<std::size_t>(ni)] = 1;
      parent[static_cast<std::size_t>(ni)] = cur;
      q.push_back(ni);
    }
  }
  return std::nullopt;
}

std::vector<Action> orient_actions(const Pose& p, const ObjectInstance& o, const EpisodeSpec& spec) {
  const auto g = view_geometry(p, o.x, o.y, o.height, spec);
  std::vector<Action> out;
  if (g.range > 1e-9) {
    const int want = static_cast<int>(std::lround(g.bearing / kAngleStep)) * kAngleStep % 360;
    out = rotations_to(p.heading, want);
  }
  const int pitch = std::clamp(static_cast<int>(std::lround(g.elevation / kAngleStep)) * kAngleStep, kMinPitch,
                               kMaxPitch);
  for (int v = p.pitch; v < pitch; v += kAngleStep) out.push_back(Action::LookUp);
  for (int v = p.pitch; v > pitch; v -= kAngleStep) out.push_back(Action::LookDown);
  return out;
}

Action expert_action(const SceneMap& scene, const Pose& pose, const ObjectInstance& target,
                     const std::vector<CellIndex>& goals, const EpisodeSpec& spec) {
  for (const auto* o : findable_objects(scene, pose, spec))
    if (o->id == target.id) return Action::Find;
  const CellIndex here = scene.cell_of(pose.x, pose.y);
  const bool at_goal = std::find(goals.begin(), goals.end(), here) != goals.end();
  if (!at_goal) {
    auto path = scene_path(scene, here, goals);
    if (path && path->size() >= 2) {
      const auto actions = compile_path(*path, pose.heading);
      if (!actions.empty()) return actions.front();
    }
  }
  const auto o = orient_actions(pose, target, spec);
  return o.empty() ? Action::Find : o.front();
}

Matrix json_matrix(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols) throw ParseError("ragged matrix in policy file");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

nlohmann::json matrix_json(const Matrix& m) {
  auto j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

}  // namespace

int action_index(Action a) {
  if (a == Action::Done) throw ContractError("Done has no policy index");
  return static_cast<int>(a);
}

Action action_at(int index) {
  if (index < 0 || index >= kPolicyActions) throw ContractError("policy action index out of range");
  return static_cast<Action>(index);
}

std::vector<BcTrajectory> bc_collect(const std::vector<const SceneMap*>& scenes, const std::vector<Task>& tasks,
                                     const EpisodeSpec& spec, int count, std::uint64_t seed, double block_size) {
  if (scenes.empty() || tasks.empty()) throw Error("behavior cloning needs at least one scene and one task");
  std::mt19937_64 rng(splitmix(seed));
  std::vector<BcTrajectory> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > count * 50 + 100) throw Error("could not generate expert trajectories for these scenes");
    const std::size_t si = std::uniform_int_distribution<std::size_t>(0, scenes.size() - 1)(rng);
    const auto& scene = *scenes[si];
    const auto& task = tasks[std::uniform_int_distribution<std::size_t>(0, tasks.size() - 1)(rng)];

    std::set<std::string> wanted;
    for (const auto& s : task.basic_solutions) wanted.insert(s.begin(), s.end());
    for (const auto& s : task.preferred_solutions) wanted.insert(s.begin(), s.end());
    std::vector<const ObjectInstance*> targets;
    for (const auto& o : scene.objects)
      if (wanted.count(o.category)) targets.push_back(&o);
    if (targets.empty()) continue;
    const auto& target = *targets[std::uniform_int_distribution<std::size_t>(0, targets.size() - 1)(rng)];

    std::vector<CellIndex> goals;
    for (double radius : {kAtTarget, 0.5}) {
      for (int y = 0; y < scene.height; ++y)
        for (int x = 0; x < scene.width; ++x) {
          const Point2 c = scene.center_of({x, y});
          if (scene.is_free({x, y}) && std::hypot(c.x - target.x, c.y - target.y) <= radius) goals.push_back({x, y});
        }
      if (!goals.empty()) break;
    }
    if (goals.empty()) continue;

    std::vector<CellIndex> spawns;
    for (int y = 0; y < scene.height; ++y)
      for (int x = 0; x < scene.width; ++x) {
        const Point2 c = scene.center_of({x, y});
        if (scene.is_free({x, y}) && std::hypot(c.x - target.x, c.y - target.y) <= block_size &&
            scene_path(scene, {x, y}, goals))
          spawns.push_back({x, y});
      }
    if (spawns.empty()) continue;
    const auto spawn = spawns[std::uniform_int_distribution<std::size_t>(0, spawns.size() - 1)(rng)];
    const Point2 sp = scene.center_of(spawn);

    SceneMap local = scene;
    local.start_poses = {Pose{sp.x, sp.y, std::uniform_int_distribution<int>(0, 11)(rng) * kAngleStep, 0}};
    EpisodeSpec ls = spec;
    ls.n_step = kMaxExpertSteps;
    ls.n_find = 1;
    Episode ep(local, task, ls);
    auto r = ep.reset(0);

    BcTrajectory traj;
    traj.scene_index = si;
    traj.task_id = task.id;
    traj.target_id = target.id;
    traj.waypoint = sp;
    std::optional<Action> prev;
    bool ended_with_find = false;
    while (!ep.terminated()) {
      BcStep st;
      st.pose = ep.state().pose;
      st.detections = r.observation.detections;
      st.clearance = r.observation.depth.empty() ? 0.0 : r.observation.depth[r.observation.depth.size() / 2].range;
      st.previous = prev;
      st.action = expert_action(local, st.pose, target, goals, ls);
      if (ep.state().steps_taken + 1 >= ls.n_step) st.action = Action::Find;
      traj.steps.push_back(st);
      r = ep.step(st.action);
      prev = st.action;
      if (st.action == Action::Find) ended_with_find = true;
    }
    if (!ended_with_find) continue;
    out.push_back(std::move(traj));
  }
  return out;
}

void FineMemory::update(const Pose& pose, const std::vector<Detection>& detections, const FineScoring& scoring) {
  for (const auto& d : detections) {
    Seen s;
    s.x = pose.x + d.range * std::cos(deg2rad(d.bearing));
    s.y = pose.y + d.range * std::sin(deg2rad(d.bearing));
    s.height = d.range < 1e-9 ? (d.elevation < 0 ? -1.0 : 1.0) : d.range * std::tan(deg2rad(d.elevation));
    s.score = scoring.score(d.label);
    seen_[d.id] = s;
  }
}

std::optional<std::string> FineMemory::top(const std::set<std::string>& exclude) const {
  std::optional<std::string> best;
  double best_score = 0.0;
  for (const auto& [id, s] : seen_) {
    if (exclude.count(id)) continue;
    if (!best || s.score > best_score) {
      best = id;
      best_score = s.score;
    }
  }
  return best;
}

Vector FineMemory::features(const Pose& pose, std::optional<Action> previous, Point2 waypoint, double clearance,
                            const std::vector<Detection>& current, const FineScoring& scoring,
                            const EpisodeSpec& spec, double block_size) const {
  Vector f = Vector::Zero(kFeatureCount);
  const double norm = std::max(1e-9, std::abs(scoring.r_b) + std::abs(scoring.r_p));
  f(0) = 1.0;
  const auto best = top();
  const double h = deg2rad(pose.heading);
  if (best) {
    const auto& s = seen_.at(*best);
    // Height is stored relative to the camera.
    const auto g = view_geometry(pose, s.x, s.y, spec.camera_height + s.height, spec);
    const double rel = g.range > 1e-9 ? deg2rad(angle_difference(g.bearing, pose.heading)) : 0.0;
    f(1) = 1.0;
    f(2) = s.score / norm;
    f(3) = std::cos(rel);
    f(4) = std::sin(rel);
    f(5) = g.range / block_size;
    f(6) = (g.elevation - pose.pitch) / 60.0;
    f(7) = g.in_fov ? 1.0 : 0.0;
    f(8) = g.in_fov && g.range <= spec.d_find ? 1.0 : 0.0;
    f(9) = g.range < kAtTarget ? 1.0 : 0.0;
    const double dx = s.x - pose.x, dy = s.y - pose.y;
    f(22) = (std::cos(h) * dx + std::sin(h) * dy) / block_size;
    f(23) = (-std::sin(h) * dx + std::cos(h) * dy) / block_size;
  }
  double best_now = 0.0;
  for (const auto& d : current) best_now = std::max(best_now, scoring.score(d.label) / norm);
  f(10) = best_now;
  f(11) = static_cast<double>(current.size()) / 10.0;
  f(12 + (previous ? action_index(*previous) : kPolicyActions)) = 1.0;
  const double wx = waypoint.x - pose.x, wy = waypoint.y - pose.y;
  f(19) = (std::cos(h) * wx + std::sin(h) * wy) / block_size;
  f(20) = (-std::sin(h) * wx + std::cos(h) * wy) / block_size;
  f(21) = clearance < 0.3 ? 1.0 : 0.0;
  return f;
}

FeatureExtractor::FeatureExtractor(const EmbeddingTable& table, const AttributeModel* model, Branch branch,
                                   const ObjectAttributeSource& objects, EpisodeSpec spec, double block_size)
    : table_(table), model_(model), branch_(branch), objects_(objects), spec_(spec), block_size_(block_size) {}

Matrix FeatureExtractor::extract(const BcTrajectory& trajectory) const {
  const auto attrs = instruction_attributes(trajectory.task_id, branch_, table_, model_);
  const FineScoring scoring{&attrs, &objects_, 1.0, 1.0};
  FineMemory memory;
  Matrix out(static_cast<Eigen::Index>(trajectory.steps.size()), kFeatureCount);
  for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
    const auto& st = trajectory.steps[i];
    memory.update(st.pose, st.detections, scoring);
    out.row(static_cast<Eigen::Index>(i)) =
        memory.features(st.pose, st.previous, trajectory.waypoint, st.clearance, st.detections, scoring, spec_,
                        block_size_)
            .transpose();
  }
  return out;
}

Vector FinePolicy::logits(const Vector& features) const {
  const Vector h = (w1 * features + b1).array().tanh().matrix();
  return w2 * h + b2;
}

Action FinePolicy::act(const Vector& features) const {
  const Vector z = logits(features);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < z.size(); ++i)
    if (z(i) > z(best)) best = i;
  return action_at(static_cast<int>(best));
}

FinePolicy make_policy(int features, int hidden, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix(seed));
  auto init = [&](int rows, int cols) {
    std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(cols)));
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = n(rng);
    return m;
  };
  FinePolicy p;
  p.w1 = init(hidden, features);
  p.b1 = Vector::Zero(hidden);
  p.w2 = init(kPolicyActions, hidden);
  p.b2 = Vector::Zero(kPolicyActions);
  return p;
}

double cross_entropy(const FinePolicy& policy, const Matrix& x, const std::vector<int>& labels, FinePolicy* grad) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw ContractError("feature/label count mismatch");
  if (x.rows() == 0) throw ContractError("empty behavior-cloning batch");
  if (grad) {
    grad->w1 = Matrix::Zero(policy.w1.rows(), policy.w1.cols());
    grad->b1 = Vector::Zero(policy.b1.size());
    grad->w2 = Matrix::Zero(policy.w2.rows(), policy.w2.cols());
    grad->b2 = Vector::Zero(policy.b2.size());
  }
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Vector in = x.row(r).transpose();
    const Vector h = (policy.w1 * in + policy.b1).array().tanh().matrix();
    const Vector z = policy.w2 * h + policy.b2;
    const double m = z.maxCoeff();
    const Vector e = (z.array() - m).exp().matrix();
    const double sum = e.sum();
    const int y = labels[static_cast<std::size_t>(r)];
    loss += -(z(y) - m - std::log(sum));
    if (!grad) continue;
    Vector dz = e / sum;
    dz(y) -= 1.0;
    dz *= inv_n;
    grad->w2 += dz * h.transpose();
    grad->b2 += dz;
    const Vector dh = policy.w2.transpose() * dz;
    const Vector da = (dh.array() * (1.0 - h.array().square())).matrix();
    grad->w1 += da * in.transpose();
    grad->b1 += da;
  }
  return loss * inv_n;
}

BcDataset bc_features(const std::vector<BcTrajectory>& trajectories, const FeatureExtractor& extractor) {
  std::vector<Matrix> parts;
  std::size_t rows = 0;
  BcDataset out;
  for (const auto& t : trajectories) {
    parts.push_back(extractor.extract(t));
    rows += t.steps.size();
    for (const auto& s : t.steps) out.labels.push_back(action_index(s.action));
  }
  out.features.resize(static_cast<Eigen::Index>(rows), kFeatureCount);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.features.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return out;
}

BcTrainResult bc_train(const BcDataset& data, const BcTrainConfig& config) {
  BcTrainResult out;
  out.policy = make_policy(static_cast<int>(data.features.cols()), config.hidden, config.seed);
  FinePolicy grad;
  for (int e = 0; e <= config.epochs; ++e) {
    const double loss = cross_entropy(out.policy, data.features, data.labels, e < config.epochs ? &grad : nullptr);
    if (!std::isfinite(loss)) throw Error("behavior-cloning loss diverged at epoch " + std::to_string(e));
    out.loss_curve.push_back(loss);
    if (e == config.epochs) break;
    out.policy.w1 -= config.lr * grad.w1;
    out.policy.b1 -= config.lr * grad.b1;
    out.policy.w2 -= config.lr * grad.w2;
    out.policy.b2 -= config.lr * grad.b2;
  }
  return out;
}

BcTrainResult bc_train(const std::vector<BcTrajectory>& dataset, const FeatureExtractor& extractor,
                       const BcTrainConfig& config) {
  return bc_train(bc_features(dataset, extractor), config);
}

double accuracy(const FinePolicy& policy, const BcDataset& data) {
  if (data.labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (Eigen::Index r = 0; r < data.features.rows(); ++r)
    hit += action_index(policy.act(data.features.row(r).transpose())) == data.labels[static_cast<std::size_t>(r)];
  return static_cast<double>(hit) / static_cast<double>(data.labels.size());
}

nlohmann::json policy_to_json(const FinePolicy& p) {
  return {{"w1", matrix_json(p.w1)}, {"b1", matrix_json(p.b1)}, {"w2", matrix_json(p.w2)}, {"b2", matrix_json(p.b2)}};
}

FinePolicy policy_from_json(const nlohmann::json& j) {
  FinePolicy p;
  try {
    p.w1 = json_matrix(j.at("w1"));
    p.b1 = json_matrix(j.at("b1")).col(0);
    p.w2 = json_matrix(j.at("w2"));
    p.b2 = json_matrix(j.at("b2")).col(0);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("policy: ") + e.what());
  }
  if (p.w1.cols() != kFeatureCount || p.b1.size() != p.w1.rows() || p.w2.cols() != p.w1.rows() ||
      p.w2.rows() != kPolicyActions || p.b2.size() != kPolicyActions)
    throw ParseError("policy: inconsistent layer shapes");
  return p;
}

}  // namespace moddn
