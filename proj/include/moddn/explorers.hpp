#pragma once
// Coarse block scoring and waypoint selection, fine-phase policies
// (scripted and behavior-cloned), baseline agents, and the episode loop.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "moddn/attribute.hpp"
#include "moddn/embedding.hpp"
#include "moddn/mapping.hpp"
#include "moddn/metrics.hpp"
#include "moddn/planner.hpp"
#include "moddn/scene.hpp"
#include "moddn/simulator.hpp"

namespace moddn {

// ---------------------------------------------------------------- coarse

struct CoarsePolicyConfig {
  double r_b = 1.0;
  double r_p = 1.0;
  Branch branch = Branch::Mlp;
  double block_size = 2.0;
};

struct BlockScore {
  BlockKey key;
  double s = 0.0;
  double basic_part = 0.0;
  double pref_part = 0.0;
};

// Object attribute features (k2 x d) per category label, computed once with
// the object encoder. Immutable after construction.
class ObjectAttributeSource {
 public:
  ObjectAttributeSource() = default;
  ObjectAttributeSource(const EmbeddingTable& table, const AttributeModel& model);
  explicit ObjectAttributeSource(std::map<std::string, Matrix> features) : features_(std::move(features)) {}

  const Matrix* find(const std::string& label) const {
    auto it = features_.find(label);
    return it == features_.end() ? nullptr : &it->second;
  }

 private:
  std::map<std::string, Matrix> features_;
};

struct ObjectScore {
  double basic = 0.0;  // max pair cosine against basic instruction attributes
  double pref = 0.0;
  double combined(double r_b, double r_p) const { return r_b * basic + r_p * pref; }
};

ObjectScore object_score(const Matrix& object_features, const InstructionAttributes& attrs);

BlockScore block_score(BlockKey key, const std::vector<const Matrix*>& member_features,
                       const InstructionAttributes& attrs, double r_b, double r_p);
BlockScore block_score(const BlockMembers& block, const InstructionAttributes& attrs,
                       const ObjectAttributeSource& source, double r_b, double r_p);

struct WaypointChoice {
  BlockKey key;
  CellIndex target;
  bool fallback = false;  // true when the target is the nearest frontier
};

// Highest-scoring unvisited block with a reachable Known-Free cell (ties ->
// lowest key); target drawn uniformly among those cells. Falls back to the
// nearest reachable frontier; nullopt means exploration is exhausted.
std::optional<WaypointChoice> select_waypoint(const std::vector<BlockScore>& scores, const BlockGrid& grid,
                                              const ExploredMap& map, CellIndex agent, std::mt19937_64& rng);

// ---------------------------------------------------------------- agent context

// Drives one episode: every action is executed in the simulator and its
// observation integrated into the explored map.
class AgentContext {
 public:
  AgentContext(Episode& episode, ExploredMap& map, double block_size = 2.0);

  bool terminated() const { return episode_.terminated(); }
  // Executes `a` unless the episode already ended; returns false if it had.
  bool act(Action a);
  void observe_initial(const Observation& obs);

  Episode& episode() { return episode_; }
  const Episode& episode() const { return episode_; }
  ExploredMap& map() { return map_; }
  const ExploredMap& map() const { return map_; }
  const Pose& pose() const { return episode_.state().pose; }
  CellIndex cell() const { return map_.cell_of(pose().x, pose().y); }
  const Observation& last_observation() const { return last_obs_; }
  Action previous_action() const { return prev_; }
  bool has_previous_action() const { return has_prev_; }
  double block_size() const { return block_size_; }

  // Walks a compiled action list; stops early on termination.
  bool walk(const std::vector<Action>& actions);
  // Rotates in place through a full turn.
  void scan();
  // Rotation and pitch actions that bring a point into view.
  std::vector<Action> orient_towards(double x, double y, double height) const;

 private:
  Episode& episode_;
  ExploredMap& map_;
  double block_size_;
  Observation last_obs_;
  Action prev_ = Action::Done;
  bool has_prev_ = false;
};

// ---------------------------------------------------------------- fine phase

enum class FineMode { Scripted, BehaviorCloned };

struct FinePolicyConfig {
  FineMode mode = FineMode::Scripted;
  int step_budget = 30;
  // Candidates are approached only if combined score / (r_b + r_p) >= tau;
  // tau <= 0 disables the check.
  double approach_threshold = 0.0;
};

struct FineScoring {
  const InstructionAttributes* attrs = nullptr;
  const ObjectAttributeSource* objects = nullptr;
  double r_b = 1.0;
  double r_p = 1.0;
  double score(const std::string& label) const;
};

struct FineOutcome {
  int actions = 0;
  bool found_issued = false;
  std::optional<std::string> target_id;
  std::vector<std::string> ranking;  // candidate ids, best first
};

// Scan, rank candidates, approach the best reachable one and Find; exactly
// one Find unless the episode ends first.
FineOutcome fine_scripted(AgentContext& ctx, BlockKey arrived, const FineScoring& scoring,
                          const FinePolicyConfig& config, std::set<std::string>& claimed);

// ---------------------------------------------------------------- imitation

inline constexpr int kPolicyActions = 6;  // every action except Done

struct BcStep {
  Pose pose;
  std::vector<Detection> detections;
  double clearance = 0.0;  // depth straight ahead
  std::optional<Action> previous;
  Action action = Action::Find;
};

struct BcTrajectory {
  std::size_t scene_index = 0;
  std::string task_id;
  std::string target_id;
  Point2 waypoint;
  std::vector<BcStep> steps;
};

// Expert trajectories: spawn within one block of a solution object, greedy
// planner steps toward it, orient, Find. Every trajectory ends with Find.
std::vector<BcTrajectory> bc_collect(const std::vector<const SceneMap*>& scenes, const std::vector<Task>& tasks,
                                     const EpisodeSpec& spec, int count, std::uint64_t seed,
                                     double block_size = 2.0);

// Per-phase memory of detected objects feeding the policy features.
class FineMemory {
 public:
  void update(const Pose& pose, const std::vector<Detection>& detections, const FineScoring& scoring);
  Vector features(const Pose& pose, std::optional<Action> previous, Point2 waypoint, double clearance,
                  const std::vector<Detection>& current, const FineScoring& scoring, const EpisodeSpec& spec,
                  double block_size) const;
  // Best-scoring remembered object not in `exclude` (ties -> lowest id).
  std::optional<std::string> top(const std::set<std::string>& exclude = {}) const;

 private:
  struct Seen {
    double x = 0.0, y = 0.0, height = 0.0, score = 0.0;
  };
  std::map<std::string, Seen> seen_;
};

inline constexpr int kFeatureCount = 24;

class FeatureExtractor {
 public:
  FeatureExtractor(const EmbeddingTable& table, const AttributeModel* model, Branch branch,
                   const ObjectAttributeSource& objects, EpisodeSpec spec, double block_size = 2.0);
  // One feature row per step.
  Matrix extract(const BcTrajectory& trajectory) const;
  const EpisodeSpec& spec() const { return spec_; }
  double block_size() const { return block_size_; }

 private:
  const EmbeddingTable& table_;
  const AttributeModel* model_;
  Branch branch_;
  const ObjectAttributeSource& objects_;
  EpisodeSpec spec_;
  double block_size_;
};

// Feature -> tanh hidden layer -> 6 action logits.
struct FinePolicy {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
  Vector logits(const Vector& features) const;
  Action act(const Vector& features) const;  // greedy argmax
};

FinePolicy make_policy(int features, int hidden, std::uint64_t seed);
int action_index(Action a);
Action action_at(int index);

// Mean cross-entropy over rows of `x` with integer labels, and its gradient.
double cross_entropy(const FinePolicy& policy, const Matrix& x, const std::vector<int>& labels,
                     FinePolicy* grad = nullptr);

struct BcDataset {
  Matrix features;
  std::vector<int> labels;
};
BcDataset bc_features(const std::vector<BcTrajectory>& trajectories, const FeatureExtractor& extractor);

struct BcTrainConfig {
  int epochs = 300;
  double lr = 0.5;
  int hidden = 32;
  std::uint64_t seed = 0;
};

struct BcTrainResult {
  FinePolicy policy;
  std::vector<double> loss_curve;
};

// Full-batch gradient descent on cross-entropy. Throws on divergence.
BcTrainResult bc_train(const BcDataset& data, const BcTrainConfig& config);
BcTrainResult bc_train(const std::vector<BcTrajectory>& dataset, const FeatureExtractor& extractor,
                       const BcTrainConfig& config);
double accuracy(const FinePolicy& policy, const BcDataset& data);

nlohmann::json policy_to_json(const FinePolicy& p);
FinePolicy policy_from_json(const nlohmann::json& j);

FineOutcome fine_cloned(AgentContext& ctx, BlockKey arrived, Point2 waypoint, const FineScoring& scoring,
                        const FinePolicyConfig& config, const FinePolicy& policy, std::set<std::string>& claimed);

// ---------------------------------------------------------------- episodes

enum class AgentKind { C2F, Random, FBE, MOPA };
std::string_view agent_name(AgentKind k);
std::optional<AgentKind> parse_agent(std::string_view s);

struct AgentResources {
  const EmbeddingTable* table = nullptr;
  const AttributeModel* model = nullptr;
  const ObjectAttributeSource* objects = nullptr;
  const FinePolicy* fine_policy = nullptr;
};

struct AgentConfig {
  AgentKind kind = AgentKind::C2F;
  CoarsePolicyConfig coarse;
  FinePolicyConfig fine;
  DetectorNoise noise;
};

struct CoarseRecord {
  int step = 0;
  std::vector<BlockScore> scores;  // unvisited scored blocks at selection time
  std::optional<WaypointChoice> choice;
};

struct EpisodeOutcome {
  EpisodeResult result;
  std::vector<StepRecord> log;
  std::vector<CoarseRecord> coarse;
  ExploredMap map;
  bool exhausted = false;
};

EpisodeOutcome run_episode(const AgentConfig& config, const SceneMap& scene, const Task& task,
                           const EpisodeSpec& spec, const AgentResources& resources, std::uint64_t seed);

// True when `category` belongs to some basic or preferred solution and is
// not yet in `found` (the oracle reasoner's judgement).
bool fills_open_slot(const Task& task, const std::set<std::string>& found, const std::string& category);

nlohmann::ordered_json coarse_to_json(const CoarseRecord& r);
std::string coarse_to_jsonl(const std::vector<CoarseRecord>& records);

}  // namespace moddn
