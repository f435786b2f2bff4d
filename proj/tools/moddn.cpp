// moddn command-line tool: eval, train-attr, train-bc, heatmap, validate, synth.

#include <iostream>

#include <CLI11.hpp>

#include "moddn/harness.hpp"
#include "moddn/synth.hpp"

using namespace moddn;

namespace {

struct EvalFlags {
  std::string config;
  std::vector<std::string> scenes, tasks;
  std::string table, model, policy, out, agent, branch, fine_mode;
  std::vector<std::uint64_t> seeds;
  std::uint64_t seed = 0;
  int episodes = 1, workers = 1, fine_budget = 30;
  double rb = 1.0, rp = 1.0;
  bool no_logs = false;
};

int cmd_eval(const EvalFlags& f, CLI::App& app) {
  RunConfig c;
  if (!f.config.empty()) c = run_config_from_json(nlohmann::json::parse(read_text_file(f.config)), c);
  auto given = [&](const char* name) { return app.count(name) > 0; };
  if (given("--scene")) c.scenes.assign(f.scenes.begin(), f.scenes.end());
  if (given("--tasks")) c.tasks.assign(f.tasks.begin(), f.tasks.end());
  if (given("--table")) c.table = f.table;
  if (given("--model")) c.model = f.model;
  if (given("--policy")) c.policy = f.policy;
  if (given("--out")) c.out = f.out;
  if (given("--agent")) c.agent.kind = *parse_agent(f.agent);
  if (given("--branch")) c.agent.coarse.branch = *parse_branch(f.branch);
  if (given("--fine-mode")) c.agent.fine.mode = *parse_fine_mode(f.fine_mode);
  if (given("--fine-budget")) c.agent.fine.step_budget = f.fine_budget;
  if (given("--rb")) c.agent.coarse.r_b = f.rb;
  if (given("--rp")) c.agent.coarse.r_p = f.rp;
  if (given("--seeds")) c.seeds = f.seeds;
  if (given("--seed")) c.seeds = {f.seed};
  if (given("--episodes")) c.episodes = f.episodes;
  if (given("--workers")) c.workers = f.workers;
  if (f.no_logs) c.write_logs = false;

  const auto inputs = load_eval_inputs(c);
  const auto run = run_benchmark(c, inputs);
  write_eval_outputs(c, run);
  std::cout << report_text(run.report);
  std::cout << "wrote " << (c.out / "report.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Demand-driven navigation benchmark tools"};
  app.require_subcommand(1);

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "Run a benchmark and write report.json plus per-episode logs");
  eval->add_option("--config", ef.config, "JSON run configuration");
  eval->add_option("--scene", ef.scenes, "Scene file(s)");
  eval->add_option("--tasks", ef.tasks, "Task file(s)");
  eval->add_option("--table", ef.table, "EMB1 embedding table");
  eval->add_option("--model", ef.model, "Attribute model JSON");
  eval->add_option("--policy", ef.policy, "Behavior-cloned fine policy JSON");
  eval->add_option("--out", ef.out, "Output directory");
  eval->add_option("--agent", ef.agent, "c2f | random | fbe | mopa")
      ->check(CLI::IsMember({"c2f", "random", "fbe", "mopa"}));
  eval->add_option("--branch", ef.branch, "mlp | llm")->check(CLI::IsMember({"mlp", "llm"}));
  eval->add_option("--fine-mode", ef.fine_mode, "scripted | bc")->check(CLI::IsMember({"scripted", "bc"}));
  eval->add_option("--fine-budget", ef.fine_budget, "Step budget per fine phase");
  eval->add_option("--rb", ef.rb, "Basic-demand weight r_b");
  eval->add_option("--rp", ef.rp, "Preferred-demand weight r_p");
  eval->add_option("--seeds", ef.seeds, "Benchmark seeds");
  eval->add_option("--seed", ef.seed, "Single benchmark seed");
  eval->add_option("--episodes", ef.episodes, "Episodes per seed");
  eval->add_option("--workers", ef.workers, "Parallel episode workers");
  eval->add_flag("--no-logs", ef.no_logs, "Write report.json only");

  std::string samples_path, table_path, model_out, curve_out;
  AttrTrainParams tp;
  auto* train_attr = app.add_subcommand("train-attr", "Train the attribute model");
  train_attr->add_option("--samples", samples_path, "Training samples JSON")->required();
  train_attr->add_option("--table", table_path, "EMB1 embedding table")->required();
  train_attr->add_option("--out", model_out, "Model JSON output")->required();
  train_attr->add_option("--curve", curve_out, "Loss-curve CSV output");
  train_attr->add_option("--epochs", tp.epochs);
  train_attr->add_option("--lr", tp.lr);
  train_attr->add_option("--seed", tp.seed);
  train_attr->add_option("--codebook", tp.codebook_size, "Codebook size K");
  train_attr->add_option("--k1", tp.k1, "Instruction attribute count");
  train_attr->add_option("--k2", tp.k2, "Object attribute count");

  std::vector<std::string> bc_scenes, bc_tasks;
  std::string bc_table, bc_model, bc_out;
  int bc_count = 200;
  std::uint64_t bc_seed = 0;
  BcTrainConfig bc_cfg;
  auto* train_bc = app.add_subcommand("train-bc", "Collect expert trajectories and train the fine policy");
  train_bc->add_option("--scene", bc_scenes)->required();
  train_bc->add_option("--tasks", bc_tasks)->required();
  train_bc->add_option("--table", bc_table)->required();
  train_bc->add_option("--model", bc_model)->required();
  train_bc->add_option("--out", bc_out)->required();
  train_bc->add_option("--trajectories", bc_count);
  train_bc->add_option("--epochs", bc_cfg.epochs);
  train_bc->add_option("--lr", bc_cfg.lr);
  train_bc->add_option("--seed", bc_seed);

  std::string hm_coarse, hm_map, hm_out;
  int hm_phase = 0;
  double hm_cell = 0.25, hm_block = 2.0;
  auto* heatmap = app.add_subcommand("heatmap", "Render a block-score rank heatmap as SVG");
  heatmap->add_option("--coarse", hm_coarse, "Coarse-phase JSONL log")->required();
  heatmap->add_option("--map", hm_map, "Explored map PGM")->required();
  heatmap->add_option("--out", hm_out, "SVG output")->required();
  heatmap->add_option("--phase", hm_phase, "Coarse phase index");
  heatmap->add_option("--cell-size", hm_cell);
  heatmap->add_option("--block-size", hm_block);

  std::string v_tasks, v_scene;
  auto* validate = app.add_subcommand("validate", "Check a task file (and optionally a scene)");
  validate->add_option("--tasks", v_tasks)->required();
  validate->add_option("--scene", v_scene);

  std::string s_out;
  std::uint64_t s_seed = 0;
  SynthParams sp;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene, tasks, embeddings and samples");
  synth->add_option("--out", s_out)->required();
  synth->add_option("--seed", s_seed);
  synth->add_option("--categories", sp.n_categories);
  synth->add_option("--instances", sp.instances_per_category);
  synth->add_option("--task-count", sp.n_tasks);
  synth->add_option("--dim", sp.dim);
  synth->add_option("--k", sp.k);
  synth->add_option("--size", sp.width, "Grid side length in cells")->each([&](const std::string&) {
    sp.height = sp.width;
  });
  synth->add_option("--noise", sp.noise);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*eval) return cmd_eval(ef, *eval);

    if (*train_attr) {
      const auto table = load_embeddings(table_path);
      const auto samples = parse_samples(nlohmann::json::parse(read_text_file(samples_path)));
      const auto r = train_attribute_model(samples, table, tp);
      save_model(r.model, model_out);
      if (!curve_out.empty()) write_text_file(curve_out, loss_curve_csv(r.curve));
      std::cout << "total loss " << r.curve.front().total << " -> " << r.curve.back().total << "\n";
      return 0;
    }

    if (*train_bc) {
      std::vector<SceneMap> scenes;
      for (const auto& p : bc_scenes) scenes.push_back(load_scene(p));
      std::vector<const SceneMap*> ptrs;
      for (const auto& s : scenes) ptrs.push_back(&s);
      std::vector<Task> tasks;
      for (const auto& p : bc_tasks) {
        auto t = load_tasks(p);
        tasks.insert(tasks.end(), t.begin(), t.end());
      }
      const auto table = load_embeddings(bc_table);
      const auto model = load_model(bc_model);
      const ObjectAttributeSource objects(table, model);
      const EpisodeSpec spec;
      const auto data = bc_collect(ptrs, tasks, spec, bc_count, bc_seed);
      const FeatureExtractor fx(table, &model, Branch::Mlp, objects, spec);
      bc_cfg.seed = bc_seed;
      const auto r = bc_train(data, fx, bc_cfg);
      write_text_file(bc_out, policy_to_json(r.policy).dump() + "\n");
      std::cout << "cross-entropy " << r.loss_curve.front() << " -> " << r.loss_curve.back() << "\n";
      return 0;
    }

    if (*heatmap) {
      const auto records = parse_coarse_jsonl(read_text_file(hm_coarse));
      if (records.empty()) throw Error("coarse log has no phases");
      if (hm_phase < 0 || hm_phase >= static_cast<int>(records.size()))
        throw Error("phase index out of range (log has " + std::to_string(records.size()) + " phases)");
      const auto map = load_pgm(hm_map, hm_cell);
      write_text_file(hm_out, heatmap_svg(map, records[static_cast<std::size_t>(hm_phase)], hm_block));
      return 0;
    }

    if (*validate) {
      const auto tasks = load_tasks(v_tasks);
      std::set<std::string> vocab;
      if (!v_scene.empty()) {
        const auto scene = load_scene(v_scene);
        vocab = scene.vocabulary();
      } else {
        for (const auto& t : tasks) {
          for (const auto& s : t.basic_solutions) vocab.insert(s.begin(), s.end());
          for (const auto& s : t.preferred_solutions) vocab.insert(s.begin(), s.end());
        }
      }
      const auto diags = validate_tasks(tasks, vocab);
      for (const auto& d : diags) std::cout << to_string(d) << "\n";
      if (diags.empty()) std::cout << "ok: " << tasks.size() << " tasks\n";
      return has_errors(diags) ? 1 : 0;
    }

    if (*synth) {
      const auto g = synth_generate(s_seed, sp);
      const std::filesystem::path dir(s_out);
      std::filesystem::create_directories(dir);
      save_scene(g.scene, dir / "scene.json");
      save_tasks(g.tasks, dir / "tasks.json");
      save_embeddings(g.table, dir / "table.emb1");
      write_text_file(dir / "samples.json", samples_to_json(g.samples).dump() + "\n");
      std::cout << "wrote " << g.tasks.size() << " tasks, " << g.scene.objects.size() << " objects, "
                << g.table.size() << " embeddings, " << g.samples.size() << " samples to " << dir.string() << "\n";
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
