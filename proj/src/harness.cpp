#include "moddn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace moddn {

std::string_view branch_name(Branch b) { return b == Branch::Mlp ? "mlp" : "llm"; }

std::optional<Branch> parse_branch(std::string_view s) {
  if (s == "mlp") return Branch::Mlp;
  if (s == "llm") return Branch::PrecomputedLlm;
  return std::nullopt;
}

std::string_view fine_mode_name(FineMode m) { return m == FineMode::Scripted ? "scripted" : "bc"; }

std::optional<FineMode> parse_fine_mode(std::string_view s) {
  if (s == "scripted") return FineMode::Scripted;
  if (s == "bc") return FineMode::BehaviorCloned;
  return std::nullopt;
}

namespace {

std::vector<std::filesystem::path> paths_of(const nlohmann::json& j) {
  std::vector<std::filesystem::path> out;
  if (j.is_string()) out.emplace_back(j.get<std::string>());
  else
    for (const auto& e : j) out.emplace_back(e.get<std::string>());
  return out;
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw ParseError("config: top level must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "scenes") c.scenes = paths_of(v);
      else if (key == "tasks") c.tasks = paths_of(v);
      else if (key == "table") c.table = v.get<std::string>();
      else if (key == "model") c.model = v.get<std::string>();
      else if (key == "policy") c.policy = v.get<std::string>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "agent") {
        auto k = parse_agent(v.get<std::string>());
        if (!k) throw ParseError("config: unknown agent '" + v.get<std::string>() + "'");
        c.agent.kind = *k;
      } else if (key == "rb") c.agent.coarse.r_b = v.get<double>();
      else if (key == "rp") c.agent.coarse.r_p = v.get<double>();
      else if (key == "block_size") c.agent.coarse.block_size = v.get<double>();
      else if (key == "branch") {
        auto b = parse_branch(v.get<std::string>());
        if (!b) throw ParseError("config: unknown branch '" + v.get<std::string>() + "'");
        c.agent.coarse.branch = *b;
      } else if (key == "fine_mode") {
        auto m = parse_fine_mode(v.get<std::string>());
        if (!m) throw ParseError("config: unknown fine_mode '" + v.get<std::string>() + "'");
        c.agent.fine.mode = *m;
      } else if (key == "fine_budget") c.agent.fine.step_budget = v.get<int>();
      else if (key == "approach_threshold") c.agent.fine.approach_threshold = v.get<double>();
      else if (key == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "episodes") c.episodes = v.get<int>();
      else if (key == "workers") c.workers = v.get<int>();
      else if (key == "write_logs") c.write_logs = v.get<bool>();
      else if (key == "noise") {
        c.agent.noise.miss_rate = v.value("miss_rate", c.agent.noise.miss_rate);
        c.agent.noise.mislabel_rate = v.value("mislabel_rate", c.agent.noise.mislabel_rate);
        c.agent.noise.seed = v.value("seed", c.agent.noise.seed);
      } else if (key == "spec") {
        auto& s = c.spec;
        s.d_find = v.value("d_find", s.d_find);
        s.n_find = v.value("n_find", s.n_find);
        s.n_step = v.value("n_step", s.n_step);
        s.detection_range = v.value("detection_range", s.detection_range);
        s.fov_h = v.value("fov_h", s.fov_h);
        s.fov_v = v.value("fov_v", s.fov_v);
        s.camera_height = v.value("camera_height", s.camera_height);
      } else {
        throw ParseError("config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

nlohmann::ordered_json run_config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  auto strs = [](const std::vector<std::filesystem::path>& ps) {
    std::vector<std::string> out;
    for (const auto& p : ps) out.push_back(p.string());
    return out;
  };
  j["scenes"] = strs(c.scenes);
  j["tasks"] = strs(c.tasks);
  j["table"] = c.table.string();
  j["model"] = c.model.string();
  j["policy"] = c.policy.string();
  j["agent"] = agent_name(c.agent.kind);
  j["rb"] = c.agent.coarse.r_b;
  j["rp"] = c.agent.coarse.r_p;
  j["block_size"] = c.agent.coarse.block_size;
  j["branch"] = branch_name(c.agent.coarse.branch);
  j["fine_mode"] = fine_mode_name(c.agent.fine.mode);
  j["fine_budget"] = c.agent.fine.step_budget;
  j["approach_threshold"] = c.agent.fine.approach_threshold;
  j["seeds"] = c.seeds;
  j["episodes"] = c.episodes;
  j["spec"] = {{"d_find", c.spec.d_find},     {"n_find", c.spec.n_find}, {"n_step", c.spec.n_step},
               {"detection_range", c.spec.detection_range}, {"fov_h", c.spec.fov_h},
               {"fov_v", c.spec.fov_v},       {"camera_height", c.spec.camera_height}};
  j["noise"] = {{"miss_rate", c.agent.noise.miss_rate},
                {"mislabel_rate", c.agent.noise.mislabel_rate},
                {"seed", c.agent.noise.seed}};
  return j;
}

void check_run_config(const RunConfig& c) {
  std::vector<std::string> issues;
  if (c.scenes.empty()) issues.push_back("no scene files given");
  if (c.tasks.empty()) issues.push_back("no task files given");
  if (c.seeds.empty()) issues.push_back("seed list is empty");
  if (c.episodes < 1) issues.push_back("episodes per seed must be >= 1");
  if (c.workers < 1) issues.push_back("workers must be >= 1");
  if (c.agent.fine.step_budget < 1) issues.push_back("fine budget must be >= 1");
  if (c.agent.coarse.block_size <= 0) issues.push_back("block size must be positive");
  if (c.agent.kind == AgentKind::C2F) {
    if (c.table.empty()) issues.push_back("c2f agent needs an embedding table");
    if (c.agent.coarse.branch == Branch::Mlp && c.model.empty()) issues.push_back("mlp branch needs a model file");
    if (c.model.empty()) issues.push_back("c2f agent needs a model file for object attributes");
    if (c.agent.fine.mode == FineMode::BehaviorCloned && c.policy.empty())
      issues.push_back("bc fine mode needs a policy file");
  }
  if (!issues.empty()) {
    std::string msg = "invalid run configuration:";
    for (const auto& i : issues) msg += "\n  " + i;
    throw ValidationError(msg, issues);
  }
}

AgentResources EvalInputs::resources() const {
  AgentResources r;
  r.table = table ? &*table : nullptr;
  r.model = model ? &*model : nullptr;
  r.objects = objects ? &*objects : nullptr;
  r.fine_policy = policy ? &*policy : nullptr;
  return r;
}

EvalInputs load_eval_inputs(const RunConfig& c) {
  check_run_config(c);
  validate_spec(c.spec);
  EvalInputs in;
  std::set<std::string> vocab;
  for (const auto& p : c.scenes) {
    in.scenes.push_back(load_scene(p));
    in.scene_names.push_back(p.stem().string());
    const auto v = in.scenes.back().vocabulary();
    vocab.insert(v.begin(), v.end());
  }
  for (const auto& p : c.tasks) {
    auto t = load_tasks(p);
    in.tasks.insert(in.tasks.end(), t.begin(), t.end());
  }
  const auto diags = validate_tasks(in.tasks, vocab);
  if (has_errors(diags)) {
    std::vector<std::string> msgs;
    std::string msg = "task validation failed:";
    for (const auto& d : diags)
      if (d.severity == Severity::Error) {
        msgs.push_back(to_string(d));
        msg += "\n  " + msgs.back();
      }
    throw ValidationError(msg, msgs);
  }
  if (!c.table.empty()) in.table = load_embeddings(c.table);
  if (!c.model.empty()) in.model = load_model(c.model);
  if (in.table && in.model) {
    if (in.table->dim() != in.model->object.dim)
      throw ValidationError("embedding dim " + std::to_string(in.table->dim()) + " does not match model dim " +
                                std::to_string(in.model->object.dim),
                            {});
    in.objects = ObjectAttributeSource(*in.table, *in.model);
  }
  if (!c.policy.empty()) in.policy = policy_from_json(nlohmann::json::parse(read_text_file(c.policy)));
  return in;
}

std::vector<EpisodeSlot> episode_slots(const RunConfig& c, std::size_t n_scenes, std::size_t n_tasks) {
  std::vector<std::uint64_t> seeds = c.seeds;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  std::vector<EpisodeSlot> out;
  for (auto s : seeds)
    for (int i = 0; i < c.episodes; ++i) {
      EpisodeSlot slot;
      slot.task = static_cast<std::size_t>(i) % n_tasks;
      slot.scene = (static_cast<std::size_t>(i) / n_tasks) % n_scenes;
      slot.seed = s;
      slot.index = i;
      slot.episode_seed = splitmix(splitmix(s) ^ static_cast<std::uint64_t>(i));
      out.push_back(slot);
    }
  return out;
}

EvalRun run_benchmark(const RunConfig& c, const EvalInputs& inputs) {
  if (inputs.scenes.empty() || inputs.tasks.empty()) throw Error("nothing to evaluate");
  EvalRun run;
  run.slots = episode_slots(c, inputs.scenes.size(), inputs.tasks.size());
  run.outcomes.resize(run.slots.size());
  const auto res = inputs.resources();
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= run.slots.size()) return;
      {
        std::lock_guard lock(failure_mu);
        if (failure) return;
      }
      try {
        const auto& slot = run.slots[i];
        auto o = run_episode(c.agent, inputs.scenes[slot.scene], inputs.tasks[slot.task], c.spec, res,
                             slot.episode_seed);
        o.result.seed = slot.seed;
        o.result.index = slot.index;
        o.result.scene = inputs.scene_names[slot.scene];
        run.outcomes[i] = std::move(o);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(c.workers, static_cast<int>(run.slots.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<EpisodeResult> results;
  for (const auto& o : run.outcomes) results.push_back(o.result);
  run.report = aggregate(results);
  return run;
}

void write_eval_outputs(const RunConfig& c, const EvalRun& run) {
  std::filesystem::create_directories(c.out);
  write_text_file(c.out / "report.json", report_to_json(run.report).dump(2) + "\n");
  if (!c.write_logs) return;
  std::filesystem::create_directories(c.out / "logs");
  std::filesystem::create_directories(c.out / "maps");
  for (std::size_t i = 0; i < run.slots.size(); ++i) {
    const auto& s = run.slots[i];
    const auto stem = "s" + std::to_string(s.seed) + "_e" + std::to_string(s.index);
    write_text_file(c.out / "logs" / (stem + ".jsonl"), log_to_jsonl(run.outcomes[i].log));
    save_pgm(run.outcomes[i].map, c.out / "maps" / (stem + ".pgm"));
    if (!run.outcomes[i].coarse.empty()) {
      std::filesystem::create_directories(c.out / "coarse");
      write_text_file(c.out / "coarse" / (stem + ".jsonl"), coarse_to_jsonl(run.outcomes[i].coarse));
    }
  }
}

std::string report_text(const BenchmarkReport& report) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2);
  auto line = [&](const std::string& name, const MetricBlock& m) {
    ss << name << "  N=" << m.n << "  SR_b " << to_percent(m.sr_b.mean) << "±" << to_percent(m.sr_b.std)
       << "  SR_p " << to_percent(m.sr_p.mean) << "±" << to_percent(m.sr_p.std) << "  SPL_b "
       << to_percent(m.spl_b.mean) << "±" << to_percent(m.spl_b.std) << "  SPL_p " << to_percent(m.spl_p.mean)
       << "±" << to_percent(m.spl_p.std) << "\n";
  };
  for (const auto& s : report.per_seed) line("seed " + std::to_string(s.seed), s.metrics);
  line("pooled", report.pooled);
  return ss.str();
}

TrainResult train_attribute_model(const std::vector<TrainSample>& samples, const EmbeddingTable& table,
                                  const AttrTrainParams& params) {
  check_samples(samples, table, params.k1, params.k2);
  std::set<std::string> keys;
  for (const auto& s : samples) {
    keys.insert(s.instruction_attrs.begin(), s.instruction_attrs.end());
    keys.insert(s.object_attrs.begin(), s.object_attrs.end());
  }
  Matrix points(static_cast<Eigen::Index>(keys.size()), table.dim());
  Eigen::Index r = 0;
  for (const auto& k : keys) points.row(r++) = table.vector(k).transpose();
  auto codebook = kmeans_init(points, params.codebook_size, params.seed);
  auto model = make_model(table.dim(), params.k1, params.k2, std::move(codebook), params.seed);
  TrainConfig tc;
  tc.lr = params.lr;
  tc.epochs = params.epochs;
  tc.seed = params.seed;
  return train(samples, table, std::move(model), params.weights, tc);
}

std::string loss_curve_csv(const std::vector<LossTerms>& curve) {
  std::ostringstream ss;
  ss << std::setprecision(17);
  ss << "epoch,attr,vq,commit,recon,match,total\n";
  for (std::size_t e = 0; e < curve.size(); ++e) {
    const auto& t = curve[e];
    ss << e << ',' << t.attr << ',' << t.vq << ',' << t.commit << ',' << t.recon << ',' << t.match << ','
       << t.total << '\n';
  }
  return ss.str();
}

std::map<BlockKey, Shade> rank_shades(const std::vector<BlockScore>& scores) {
  std::vector<double> distinct;
  for (const auto& s : scores) distinct.push_back(s.s);
  std::sort(distinct.begin(), distinct.end(), std::greater<>());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::map<BlockKey, Shade> out;
  const int levels = static_cast<int>(distinct.size());
  for (const auto& s : scores) {
    const int rank =
        static_cast<int>(std::find(distinct.begin(), distinct.end(), s.s) - distinct.begin()) + 1;
    // Rank 1 -> 40, last rank -> 220.
    const int gray = levels <= 1 ? 40 : 40 + (rank - 1) * 180 / (levels - 1);
    out[s.key] = {rank, gray};
  }
  return out;
}

std::string heatmap_svg(const ExploredMap& map, const CoarseRecord& record, double block_size) {
  const double px = 16.0 / map.cell_size();  // pixels per metre
  const double w = map.width() * map.cell_size() * px;
  const double h = map.height() * map.cell_size() * px;
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2);
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << ' ' << h << "\">\n";
  const double cpx = map.cell_size() * px;
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      const auto k = map.at({x, y});
      const char* fill = k == Known::Unknown ? "#9a9a9a" : k == Known::Free ? "#ffffff" : "#000000";
      // SVG y grows downward; flip so +y points up.
      ss << "<rect x=\"" << x * cpx << "\" y=\"" << h - (y + 1) * cpx << "\" width=\"" << cpx << "\" height=\""
         << cpx << "\" fill=\"" << fill << "\"/>\n";
    }
  const double bpx = block_size * px;
  for (const auto& [key, shade] : rank_shades(record.scores)) {
    char color[8];
    std::snprintf(color, sizeof color, "#%02x%02x%02x", 255, shade.gray, shade.gray);
    ss << "<rect class=\"block\" data-rank=\"" << shade.rank << "\" x=\"" << key.bx * bpx << "\" y=\""
       << h - (key.by + 1) * bpx << "\" width=\"" << bpx << "\" height=\"" << bpx << "\" fill=\"" << color
       << "\" fill-opacity=\"0.6\"/>\n";
  }
  if (record.choice) {
    const auto c = map.center_of(record.choice->target);
    ss << "<circle cx=\"" << c.x * px << "\" cy=\"" << h - c.y * px << "\" r=\"" << cpx / 2
       << "\" fill=\"#1f5fd1\"/>\n";
  }
  ss << "</svg>\n";
  return ss.str();
}

std::vector<CoarseRecord> parse_coarse_jsonl(const std::string& text) {
  std::vector<CoarseRecord> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CoarseRecord r;
      r.step = j.at("step").get<int>();
      for (const auto& s : j.at("scores")) {
        BlockScore b;
        b.key = {s.at("block").at(0).get<int>(), s.at("block").at(1).get<int>()};
        b.s = s.at("s").get<double>();
        b.basic_part = s.at("basic").get<double>();
        b.pref_part = s.at("pref").get<double>();
        r.scores.push_back(b);
      }
      if (!j.at("choice").is_null()) {
        const auto& c = j.at("choice");
        WaypointChoice w;
        w.key = {c.at("block").at(0).get<int>(), c.at("block").at(1).get<int>()};
        w.target = {c.at("target").at(0).get<int>(), c.at("target").at(1).get<int>()};
        w.fallback = c.at("fallback").get<bool>();
        r.choice = w;
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("coarse log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace moddn
