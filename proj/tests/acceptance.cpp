// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "moddn/harness.hpp"
#include "moddn/synth.hpp"
#include "oracles.hpp"

using namespace moddn;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- metrics

Verdict sr_worked_example() {
  const double sr = success_rate({"a", "b", "c", "d", "e", "f"}, {{"a", "b", "c", "x", "y"}, {"d", "e", "m", "n"}});
  return {sr == 0.6, "SR = " + fmt(sr, 17)};
}

Verdict spl_suite() {
  bool ok = std::abs(spl(1.0, 10.0, 10.0) - 1.0) <= 1e-12 && spl(0.0, 4.0, 9.0) == 0.0 &&
            std::abs(spl(0.5, 10.0, 20.0) - 0.25) <= 1e-12;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1), len(0, 100);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const double sr = u(rng);
    if (spl(sr, len(rng), len(rng)) > sr + 1e-12) ++violations;
  }
  ok = ok && violations == 0;
  return {ok, "3 fixed cases, " + std::to_string(violations) + " SPL > SR violations in 1000 triples"};
}

Verdict tour_oracle() {
  std::mt19937_64 rng(515);
  const std::vector<std::string> cats{"a", "b", "c", "d", "e"};
  std::uniform_int_distribution<int> cell(0, 15), n_inst(0, 2), n_sol(1, 3), sol_size(1, 3), pick(0, 4);
  std::bernoulli_distribution wall(0.15);
  int done = 0, mismatches = 0;
  while (done < 50) {
    auto s = fixture::open_room(16, 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (wall(rng)) s.set({x, y}, Cell::Occupied);
    int id = 0;
    for (const auto& c : cats)
      for (int k = n_inst(rng); k > 0; --k) {
        const CellIndex q{cell(rng), cell(rng)};
        if (s.is_free(q)) fixture::object_at(s, "o" + std::to_string(id++), c, q.x, q.y);
      }
    const CellIndex st{cell(rng), cell(rng)};
    if (!s.is_free(st)) continue;
    std::vector<Solution> sols;
    for (int k = n_sol(rng); k > 0; --k) {
      std::set<std::string> chosen;
      for (int m = sol_size(rng); m > 0; --m) chosen.insert(cats[static_cast<std::size_t>(pick(rng))]);
      sols.emplace_back(chosen.begin(), chosen.end());
    }
    const Pose start = fixture::pose_at(s, st.x, st.y);
    bool unreachable = false;
    const double expected = oracle::product_state_tour(s, sols, start, 1.0, &unreachable);
    const auto got = shortest_solution_tour(s, fixture::task("t", sols), start, EpisodeSpec{}, SolutionFamily::Basic);
    if (got.unreachable_demand != unreachable || std::abs(got.length - expected) > 1e-9) ++mismatches;
    ++done;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 50 random 16x16 scenes"};
}

// ---------------------------------------------------------------- attribute engine

struct GradFixture {
  EmbeddingTable table{4};
  TrainSample sample;
  AttributeModel model;
};

GradFixture grad_fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nf;
  auto v = [&] {
    std::vector<float> x(4);
    for (auto& e : x) e = nf(rng);
    return x;
  };
  GradFixture f;
  f.table.add("ins:a", v());
  f.table.add("obj:b", v());
  f.sample = {"ins:a", "obj:b", {}, {}};
  for (int i = 0; i < 2; ++i) {
    f.table.add("gi" + std::to_string(i), v());
    f.table.add("go" + std::to_string(i), v());
    f.sample.instruction_attrs.push_back("gi" + std::to_string(i));
    f.sample.object_attrs.push_back("go" + std::to_string(i));
  }
  Matrix codes(5, 4);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (int i = 0; i < codes.size(); ++i) codes.data()[i] = nd(rng);
  f.model = make_model(4, 2, 2, Codebook{codes}, seed);
  for_each_parameter(f.model, [&](const std::string&, double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) p[i] = nd(rng);
  });
  return f;
}

oracle::ScalarInputs scalar_inputs(const GradFixture& f) {
  oracle::ScalarInputs in;
  in.ins = oracle::vec(f.table.vector("ins:a"));
  in.obj = oracle::vec(f.table.vector("obj:b"));
  for (const auto& k : f.sample.instruction_attrs) in.ins_gt.push_back(oracle::vec(f.table.vector(k)));
  for (const auto& k : f.sample.object_attrs) in.obj_gt.push_back(oracle::vec(f.table.vector(k)));
  return in;
}

Verdict loss_weights() {
  const LossWeights w;
  bool ok = w.attr == 2.0 && w.vq == 1.0 && w.commit == 0.25 && w.recon == 1.0 && w.match == 1.0;
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = grad_fixture(seed);
    const auto l = losses(f.sample, f.table, f.model, w);
    const auto o = oracle::scalar_terms(f.model, scalar_inputs(f), nullptr);
    const double expected = 2.0 * o.attr + 1.0 * o.vq + 0.25 * o.commit + 1.0 * o.recon + 1.0 * o.match;
    worst = std::max(worst, std::abs(l.total - expected));
  }
  ok = ok && worst <= 1e-9;
  return {ok, "max |total - weighted oracle sum| = " + fmt(worst)};
}

Verdict gradient_oracle() {
  const auto t0 = Clock::now();
  double worst = 0;
  int params = 0;
  for (std::uint64_t cfg = 0; cfg < 20; ++cfg) {
    const auto f = grad_fixture(1000 + cfg);
    const LossWeights w;
    ForwardTrace tr;
    losses(f.sample, f.table, f.model, w, &tr);
    oracle::Frozen fr;
    fr.ins_attrs = oracle::rows(tr.instruction.attrs);
    fr.obj_attrs = oracle::rows(tr.object.attrs);
    fr.ins_quant = oracle::rows(tr.instruction.quantized);
    fr.obj_quant = oracle::rows(tr.object.quantized);
    fr.ins_code = tr.instruction.code_index;
    fr.obj_code = tr.object.code_index;
    fr.match_i = tr.match_i;
    fr.match_j = tr.match_j;
    const auto in = scalar_inputs(f);
    auto grad = zero_like(f.model);
    loss_and_gradient(f.sample, f.table, f.model, w, grad);
    std::vector<std::vector<double>> analytic;
    for_each_parameter(grad, [&](const std::string&, double* p, Eigen::Index n) { analytic.emplace_back(p, p + n); });
    AttributeModel probe = f.model;
    std::size_t t = 0;
    for_each_parameter(probe, [&](const std::string&, double* p, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double keep = p[i], h = 1e-6;
        p[i] = keep + h;
        const double up = oracle::weighted(oracle::scalar_terms(probe, in, &fr), w);
        p[i] = keep - h;
        const double down = oracle::weighted(oracle::scalar_terms(probe, in, &fr), w);
        p[i] = keep;
        const double num = (up - down) / (2 * h), a = analytic[t][static_cast<std::size_t>(i)];
        worst = std::max(worst, std::abs(a - num) / std::max(1e-6, std::abs(a) + std::abs(num)));
        ++params;
      }
      ++t;
    });
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 10.0,
          "max rel err " + fmt(worst) + " over " + std::to_string(params) + " parameters, " + fmt(secs, 3) + " s"};
}

Verdict stop_gradient() {
  const auto f = grad_fixture(77);
  TrainConfig c;
  c.epochs = 10;
  c.lr = 0.05;
  const auto vq = train({f.sample}, f.table, f.model, {0, 1, 0, 0, 0}, c).model;
  const auto commit = train({f.sample}, f.table, f.model, {0, 0, 1, 0, 0}, c).model;
  auto same_mlp = [](const Mlp& a, const Mlp& b) { return a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2; };
  const bool encoders_fixed = same_mlp(vq.instruction.encoder, f.model.instruction.encoder) &&
                              same_mlp(vq.object.encoder, f.model.object.encoder);
  const bool codebook_moved = vq.codebook.codes != f.model.codebook.codes;
  const bool codebook_fixed = commit.codebook.codes == f.model.codebook.codes;
  const bool encoders_moved = !same_mlp(commit.instruction.encoder, f.model.instruction.encoder);
  return {encoders_fixed && codebook_fixed && codebook_moved && encoders_moved,
          std::string("vq-only: encoders ") + (encoders_fixed ? "unchanged" : "CHANGED") + "; commit-only: codebook " +
              (codebook_fixed ? "unchanged" : "CHANGED")};
}

Verdict attribute_retrieval() {
  const auto t0 = Clock::now();
  SynthParams p;
  p.n_tasks = 50;
  p.n_categories = 100;
  p.width = p.height = 48;
  p.max_solution_size = 2;
  const auto g = synth_generate(7, p);
  // Hold out a fifth of the (instruction, solution object) pairs; every non-solution pair is a negative.
  std::mt19937_64 rng(7);
  std::bernoulli_distribution hold(0.2);
  std::set<std::pair<std::string, std::string>> solution_pairs, held_out;
  std::vector<TrainSample> train_set;
  for (const auto& s : g.samples) {
    solution_pairs.insert({s.instruction, s.object});
    if (hold(rng))
      held_out.insert({s.instruction, s.object});
    else
      train_set.push_back(s);
  }
  AttrTrainParams tp;
  tp.epochs = 500;
  tp.lr = 5e-2;
  const auto model = train_attribute_model(train_set, g.table, tp).model;
  std::vector<double> pos, neg;
  for (const auto& t : g.tasks) {
    const auto ins = keys::instruction(t.id);
    const Matrix ia = encode(model.instruction, g.table.vector(ins));
    for (const auto& cat : g.scene.vocabulary()) {
      const auto obj = keys::object(cat);
      const bool positive = held_out.count({ins, obj}) > 0;
      if (!positive && solution_pairs.count({ins, obj})) continue;
      const double c = max_pair_cosine(ia, encode(model.object, g.table.vector(obj)));
      (positive ? pos : neg).push_back(c);
    }
  }
  const double a = oracle::auc(pos, neg);
  const double secs = seconds_since(t0);
  return {a > 0.7 && secs < 120.0, "held-out AUC " + fmt(a) + " (" + std::to_string(pos.size()) + " positive, " +
                                        std::to_string(neg.size()) + " negative pairs), " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- planner

Verdict planner_oracle() {
  std::mt19937_64 rng(4242);
  std::discrete_distribution<int> state({2, 6, 2});
  std::uniform_int_distribution<int> c(0, 31);
  int mismatches = 0, illegal = 0, paths = 0;
  for (int i = 0; i < 100; ++i) {
    ExploredMap m(32, 32, 0.25);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) m.mark({x, y}, static_cast<Known>(state(rng)));
    const CellIndex a{c(rng), c(rng)}, b{c(rng), c(rng)};
    m.mark(a, Known::Free);
    m.mark(b, Known::Free);
    const int expected = oracle::bfs_length(m, a, b);
    const auto path = astar(m, a, b);
    if ((expected < 0) != !path.has_value()) {
      ++mismatches;
      continue;
    }
    if (!path) continue;
    ++paths;
    if (static_cast<int>(path->size()) - 1 != expected) ++mismatches;
    for (auto q : *path) illegal += m.at(q) != Known::Free;
  }
  return {mismatches == 0 && illegal == 0, std::to_string(mismatches) + " length mismatches, " +
                                               std::to_string(illegal) + " non-free cells, " + std::to_string(paths) +
                                               " connected pairs of 100"};
}

// ---------------------------------------------------------------- episodes

// One synthetic world per benchmark seed with a freshly trained attribute model.
struct World {
  SynthOutput g;
  EvalInputs inputs;
  explicit World(std::uint64_t seed) : g(synth_generate(seed, SynthParams{})) {
    AttrTrainParams tp;
    tp.seed = seed;
    inputs.scenes = {g.scene};
    inputs.scene_names = {"synth" + std::to_string(seed)};
    inputs.tasks = g.tasks;
    inputs.table = g.table;
    inputs.model = train_attribute_model(g.samples, g.table, tp).model;
    inputs.objects = ObjectAttributeSource(*inputs.table, *inputs.model);
  }
  BenchmarkReport run(AgentConfig agent, std::uint64_t seed, int episodes) const {
    RunConfig c;
    c.agent = agent;
    c.seeds = {seed};
    c.episodes = episodes;
    return run_benchmark(c, inputs).report;
  }
};

const std::vector<World>& worlds() {
  static const std::vector<World> w = [] {
    std::vector<World> out;
    for (std::uint64_t s = 0; s < 3; ++s) out.emplace_back(s);
    return out;
  }();
  return w;
}

Verdict steering() {
  // Constructed two-block fixture: basic-concept object left, preferred-concept object right.
  SceneMap scene = fixture::open_room(24, 8);
  fixture::object_at(scene, "apple_0", "apple", 3, 4);
  fixture::object_at(scene, "lamp_0", "lamp", 20, 4);
  fixture::start_at(scene, 12, 4);
  const Task task = fixture::task("t", {{"apple"}}, {{"apple", "lamp"}});
  EmbeddingTable table(8);
  table.add(keys::llm_basic("t", 0), std::vector<float>{1, 0, 0, 0, 0, 0, 0, 0});
  table.add(keys::llm_preferred("t", 0), std::vector<float>{0, 1, 0, 0, 0, 0, 0, 0});
  Matrix apple = Matrix::Zero(2, 8), lamp = Matrix::Zero(2, 8);
  apple(0, 0) = apple(1, 5) = 1;
  lamp(0, 1) = lamp(1, 6) = 1;
  const ObjectAttributeSource objects({{"apple", apple}, {"lamp", lamp}});
  AgentResources res;
  res.table = &table;
  res.objects = &objects;
  auto first_block = [&](double rb, double rp) {
    AgentConfig c;
    c.coarse.r_b = rb;
    c.coarse.r_p = rp;
    c.coarse.branch = Branch::PrecomputedLlm;
    const auto out = run_episode(c, scene, task, EpisodeSpec{}, res, 3);
    return out.coarse.empty() || !out.coarse[0].choice ? BlockKey{-1, -1} : out.coarse[0].choice->key;
  };
  const bool basic_first = first_block(1, 0) == BlockKey{0, 0};
  const bool pref_first = first_block(0, 1) == BlockKey{2, 0};

  double sr_p0 = 0, sr_p2 = 0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    AgentConfig c;
    c.coarse.r_p = 0.0;
    sr_p0 += worlds()[s].run(c, s, 100).pooled.sr_p.mean / 3;
    c.coarse.r_p = 2.0;
    sr_p2 += worlds()[s].run(c, s, 100).pooled.sr_p.mean / 3;
  }
  return {basic_first && pref_first && sr_p2 >= sr_p0,
          std::string("fixture argmax ") + (basic_first && pref_first ? "ok" : "WRONG") + "; mean SR_p r_p=0 " +
              fmt(to_percent(sr_p0)) + "%, r_p=2 " + fmt(to_percent(sr_p2)) + "%"};
}

Verdict benchmark_ordering() {
  const auto t0 = Clock::now();
  double c2f = 0, rnd = 0, fbe = 0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    AgentConfig c;
    c2f += worlds()[s].run(c, s, 100).pooled.sr_b.mean / 3;
    c.kind = AgentKind::Random;
    rnd += worlds()[s].run(c, s, 100).pooled.sr_b.mean / 3;
    c.kind = AgentKind::FBE;
    fbe += worlds()[s].run(c, s, 100).pooled.sr_b.mean / 3;
  }
  const double secs = seconds_since(t0);
  return {c2f >= 2 * rnd && c2f >= fbe && secs < 300.0,
          "mean SR_b C2F " + fmt(to_percent(c2f)) + "%, Random " + fmt(to_percent(rnd)) + "%, FBE " +
              fmt(to_percent(fbe)) + "%, " + fmt(secs, 3) + " s"};
}

Verdict termination() {
  const auto g = synth_generate(99, SynthParams{});
  AgentConfig c;
  c.kind = AgentKind::Random;
  const EpisodeSpec spec;
  int bad = 0, by_find = 0, by_steps = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& task = g.tasks[static_cast<std::size_t>(i) % g.tasks.size()];
    const auto out = run_episode(c, g.scene, task, spec, AgentResources{}, static_cast<std::uint64_t>(i));
    const auto& log = out.log;
    int finds_before_last = 0;
    for (std::size_t k = 0; k + 1 < log.size(); ++k) finds_before_last += log[k].action == Action::Find;
    const bool last_find = !log.empty() && log.back().action == Action::Find;
    const bool done = !log.empty() && log.back().action == Action::Done;
    const int n = static_cast<int>(log.size());
    const bool at_find_limit = last_find && finds_before_last + 1 == spec.n_find;
    const bool at_step_limit = n == spec.n_step;
    const bool early_ok = finds_before_last < spec.n_find && n <= spec.n_step;
    if (!(early_ok && (done || at_find_limit || at_step_limit))) ++bad;
    by_find += at_find_limit;
    by_steps += at_step_limit && !at_find_limit;
  }
  return {bad == 0, std::to_string(bad) + " violations; " + std::to_string(by_find) + " ended at 5 Finds, " +
                        std::to_string(by_steps) + " at 300 steps"};
}

// ---------------------------------------------------------------- CLI determinism

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + MODDN_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism() {
  const auto dir = fs::temp_directory_path() / "moddn_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto log = dir / "cli.txt";
  auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  if (run_cli("synth --out " + q(dir / "w") + " --seed 5", log) != 0) return {false, "synth failed"};
  if (run_cli("train-attr --samples " + q(dir / "w" / "samples.json") + " --table " + q(dir / "w" / "table.emb1") +
                  " --out " + q(dir / "model.json"),
              log) != 0)
    return {false, "train-attr failed"};
  const std::string eval = "eval --agent c2f --scene " + q(dir / "w" / "scene.json") + " --tasks " +
                           q(dir / "w" / "tasks.json") + " --table " + q(dir / "w" / "table.emb1") + " --model " +
                           q(dir / "model.json") + " --seeds 0 1 2 --episodes 20";
  const std::vector<std::pair<std::string, std::string>> runs{{"a", ""}, {"b", ""}, {"p", " --workers 4"}};
  for (const auto& [name, extra] : runs)
    if (run_cli(eval + extra + " --out " + q(dir / name), log) != 0) return {false, "eval " + name + " failed"};
  const auto a = read_text_file(dir / "a" / "report.json");
  const bool same = a == read_text_file(dir / "b" / "report.json") && a == read_text_file(dir / "p" / "report.json");
  return {same, same ? "3 runs (workers 1, 1, 4) byte-identical, " + std::to_string(a.size()) + " bytes"
                     : "reports differ"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"SR worked example", sr_worked_example},
      {"SPL formula suite", spl_suite},
      {"Loss-weight conformance", loss_weights},
      {"Gradient oracle", gradient_oracle},
      {"Stop-gradient separation", stop_gradient},
      {"Attribute retrieval", attribute_retrieval},
      {"Planner oracle", planner_oracle},
      {"Tour oracle", tour_oracle},
      {"Steering ablation", steering},
      {"Qualitative benchmark ordering", benchmark_ordering},
      {"Termination conformance", termination},
      {"Determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
