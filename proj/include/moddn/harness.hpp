#pragma once
// Benchmark orchestration, attribute/fine-policy training pipelines and
// heatmap rendering behind the command-line tool.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "moddn/attribute.hpp"
#include "moddn/explorers.hpp"
#include "moddn/metrics.hpp"
#include "moddn/scene.hpp"

namespace moddn {

struct RunConfig {
  std::vector<std::filesystem::path> scenes;
  std::vector<std::filesystem::path> tasks;
  std::filesystem::path table;
  std::filesystem::path model;
  std::filesystem::path policy;
  std::filesystem::path out = "eval_out";
  AgentConfig agent;
  std::vector<std::uint64_t> seeds{0};
  int episodes = 1;  // per seed
  int workers = 1;
  EpisodeSpec spec;
  bool write_logs = true;
};

// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::ordered_json run_config_to_json(const RunConfig& c);
// Throws ValidationError listing every problem.
void check_run_config(const RunConfig& c);

std::string_view branch_name(Branch b);
std::optional<Branch> parse_branch(std::string_view s);
std::string_view fine_mode_name(FineMode m);
std::optional<FineMode> parse_fine_mode(std::string_view s);

struct EvalInputs {
  std::vector<SceneMap> scenes;
  std::vector<std::string> scene_names;
  std::vector<Task> tasks;
  std::optional<EmbeddingTable> table;
  std::optional<AttributeModel> model;
  std::optional<ObjectAttributeSource> objects;
  std::optional<FinePolicy> policy;

  AgentResources resources() const;
};

// Loads and validates everything the config references.
EvalInputs load_eval_inputs(const RunConfig& c);

struct EpisodeSlot {
  std::size_t scene = 0;
  std::size_t task = 0;
  std::uint64_t seed = 0;          // benchmark seed
  int index = 0;                   // episode index within the seed
  std::uint64_t episode_seed = 0;  // drives the episode's RNG
};

// Episode i of every seed uses task i mod |tasks| and scene
// (i / |tasks|) mod |scenes|.
std::vector<EpisodeSlot> episode_slots(const RunConfig& c, std::size_t n_scenes, std::size_t n_tasks);

struct EvalRun {
  BenchmarkReport report;
  std::vector<EpisodeSlot> slots;
  std::vector<EpisodeOutcome> outcomes;  // aligned with slots
};

// Runs every slot on `workers` threads; results are ordered by (seed, index)
// regardless of scheduling.
EvalRun run_benchmark(const RunConfig& c, const EvalInputs& inputs);

// Writes report.json and, if enabled, logs/, coarse/ and maps/ under c.out.
void write_eval_outputs(const RunConfig& c, const EvalRun& run);
std::string report_text(const BenchmarkReport& report);

struct AttrTrainParams {
  int codebook_size = 16;
  int k1 = 4;
  int k2 = 4;
  int epochs = 500;
  double lr = 1e-2;
  std::uint64_t seed = 0;
  LossWeights weights;
};

// k-means codebook over all ground-truth attribute vectors, then training.
TrainResult train_attribute_model(const std::vector<TrainSample>& samples, const EmbeddingTable& table,
                                  const AttrTrainParams& params);
std::string loss_curve_csv(const std::vector<LossTerms>& curve);

struct Shade {
  int rank = 0;  // 1 = highest score; equal scores share a rank
  int gray = 0;  // 0 = black
};
std::map<BlockKey, Shade> rank_shades(const std::vector<BlockScore>& scores);
std::string heatmap_svg(const ExploredMap& map, const CoarseRecord& record, double block_size);
std::vector<CoarseRecord> parse_coarse_jsonl(const std::string& text);

}  // namespace moddn
