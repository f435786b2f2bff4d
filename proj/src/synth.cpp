#include "moddn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>
#include <set>

namespace moddn {

namespace {

using Rng = std::mt19937_64;

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Vector random_unit(Rng& rng, int dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = n(rng);
  } while (v.norm() < 1e-9);
  return v.normalized();
}

std::string pad3(int i) {
  std::string s = std::to_string(i);
  while (s.size() < 3) s.insert(s.begin(), '0');
  return s;
}

void build_layout(SceneMap& s, Rng& rng, int furniture) {
  s.occupancy.assign(static_cast<std::size_t>(s.width) * s.height, Cell::Free);
  for (int x = 0; x < s.width; ++x) {
    s.set({x, 0}, Cell::Occupied);
    s.set({x, s.height - 1}, Cell::Occupied);
  }
  for (int y = 0; y < s.height; ++y) {
    s.set({0, y}, Cell::Occupied);
    s.set({s.width - 1, y}, Cell::Occupied);
  }
  if (s.width < 12 || s.height < 12) return;

  // One vertical and one horizontal interior wall, each with a door in both halves.
  const int wx = s.width / 2 + uniform_int(rng, -s.width / 8, s.width / 8);
  const int wy = s.height / 2 + uniform_int(rng, -s.height / 8, s.height / 8);
  for (int y = 1; y < s.height - 1; ++y) s.set({wx, y}, Cell::Occupied);
  for (int x = 1; x < s.width - 1; ++x) s.set({x, wy}, Cell::Occupied);
  auto door_v = [&](int y0, int y1) {
    if (y1 - y0 < 4) return;
    const int d = uniform_int(rng, y0 + 1, y1 - 4);
    for (int y = d; y < d + 3; ++y) s.set({wx, y}, Cell::Free);
  };
  auto door_h = [&](int x0, int x1) {
    if (x1 - x0 < 4) return;
    const int d = uniform_int(rng, x0 + 1, x1 - 4);
    for (int x = d; x < d + 3; ++x) s.set({x, wy}, Cell::Free);
  };
  door_v(1, wy);
  door_v(wy + 1, s.height - 1);
  door_h(1, wx);
  door_h(wx + 1, s.width - 1);

  for (int f = 0; f < furniture; ++f) {
    const int x = uniform_int(rng, 2, s.width - 4);
    const int y = uniform_int(rng, 2, s.height - 4);
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) s.set({x + dx, y + dy}, Cell::Occupied);
  }

  // Keep only the largest 4-connected free component.
  std::vector<int> comp(s.occupancy.size(), -1);
  std::vector<int> sizes;
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      const auto idx = static_cast<std::size_t>(y) * s.width + x;
      if (s.occupancy[idx] != Cell::Free || comp[idx] >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      int count = 0;
      std::deque<CellIndex> q{{x, y}};
      comp[idx] = id;
      while (!q.empty()) {
        auto c = q.front();
        q.pop_front();
        ++count;
        const CellIndex nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
        for (auto n : nb) {
          if (!s.is_free(n)) continue;
          const auto ni = static_cast<std::size_t>(n.y) * s.width + n.x;
          if (comp[ni] >= 0) continue;
          comp[ni] = id;
          q.push_back(n);
        }
      }
      sizes.push_back(count);
    }
  if (sizes.empty()) return;
  const int keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < comp.size(); ++i)
    if (s.occupancy[i] == Cell::Free && comp[i] != keep) s.occupancy[i] = Cell::Occupied;
}

struct CategorySlots {
  std::vector<int> concepts;       // concept ids already assigned
  std::map<int, int> task_concept; // task index -> concept id
};

}  // namespace

SynthOutput synth_generate(std::uint64_t seed, const SynthParams& p) {
  if (p.width < 1 || p.height < 1 || p.n_categories < 1 || p.instances_per_category < 1 || p.n_tasks < 0 ||
      p.n_start_poses < 1 || p.dim < 1 || p.k < 1 || p.basic_concepts < 1 || p.preferred_concepts < 1 ||
      p.basic_solutions < 1 || p.max_solution_size < 1 || p.preferred_solutions < 0 || p.noise < 0.0 ||
      !(p.cell_size > 0.0))
    throw Error("synth: parameters must be positive");
  Rng rng(seed);
  SynthOutput out{SceneMap{}, {}, EmbeddingTable(p.dim, Provenance::Synthetic), {}};

  // Concepts: first the per-task ones, then category-private ones on demand.
  std::vector<Vector> concepts;
  auto new_concept = [&]() {
    concepts.push_back(random_unit(rng, p.dim));
    return static_cast<int>(concepts.size()) - 1;
  };
  auto noisy = [&](int concept_id) -> Vector { return concepts[concept_id] + p.noise * random_unit(rng, p.dim); };

  std::vector<std::string> categories;
  for (int c = 0; c < p.n_categories; ++c) categories.push_back("cat_" + pad3(c));
  std::vector<CategorySlots> slots(static_cast<std::size_t>(p.n_categories));

  auto take = [&](int task, int category, int concept_id) {
    auto& s = slots[static_cast<std::size_t>(category)];
    if (s.task_concept.contains(task)) return;
    s.task_concept[task] = concept_id;
    s.concepts.push_back(concept_id);
  };
  auto usable = [&](int task, int category) {
    const auto& s = slots[static_cast<std::size_t>(category)];
    return s.task_concept.contains(task) || static_cast<int>(s.concepts.size()) < p.k;
  };
  auto pick_category = [&](int task, const std::set<int>& exclude) {
    std::vector<int> cands;
    for (int c = 0; c < p.n_categories; ++c)
      if (!exclude.contains(c) && usable(task, c)) cands.push_back(c);
    if (cands.empty())
      throw Error("synth: not enough free attribute slots; raise n_categories or lower n_tasks");
    return cands[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(cands.size()) - 1))];
  };

  struct TaskConcepts {
    std::vector<int> basic;
    std::vector<int> preferred;
    std::set<int> basic_members;
    std::set<int> preferred_members;
  };
  std::vector<TaskConcepts> task_concepts(static_cast<std::size_t>(p.n_tasks));

  for (int t = 0; t < p.n_tasks; ++t) {
    auto& tc = task_concepts[static_cast<std::size_t>(t)];
    for (int i = 0; i < p.basic_concepts; ++i) tc.basic.push_back(new_concept());
    for (int i = 0; i < p.preferred_concepts; ++i) tc.preferred.push_back(new_concept());

    Task task;
    task.id = "t" + pad3(t);
    std::vector<std::set<int>> basic_sets;
    for (int b = 0; b < p.basic_solutions; ++b) {
      const int size = uniform_int(rng, 1, std::min(p.max_solution_size, p.n_categories));
      std::set<int> sol;
      for (int m = 0; m < size; ++m) {
        const int c = pick_category(t, sol);
        sol.insert(c);
        take(t, c, tc.basic[static_cast<std::size_t>(m) % tc.basic.size()]);
        tc.basic_members.insert(c);
      }
      if (std::find(basic_sets.begin(), basic_sets.end(), sol) == basic_sets.end()) basic_sets.push_back(sol);
    }
    std::vector<std::set<int>> pref_sets;
    for (int q = 0; q < p.preferred_solutions; ++q) {
      auto sol = basic_sets[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(basic_sets.size()) - 1))];
      if (static_cast<int>(sol.size()) >= p.n_categories) continue;
      const int c = pick_category(t, sol);
      sol.insert(c);
      take(t, c, tc.preferred[static_cast<std::size_t>(q) % tc.preferred.size()]);
      tc.preferred_members.insert(c);
      if (std::find(pref_sets.begin(), pref_sets.end(), sol) == pref_sets.end()) pref_sets.push_back(sol);
    }
    if (pref_sets.empty()) pref_sets.push_back(basic_sets.front());
    // Preferred solutions are also listed as basic ones.
    for (const auto& s : pref_sets)
      if (std::find(basic_sets.begin(), basic_sets.end(), s) == basic_sets.end()) basic_sets.push_back(s);

    auto names = [&](const std::set<int>& s) {
      Solution v;
      for (int c : s) v.push_back(categories[static_cast<std::size_t>(c)]);
      return v;
    };
    for (const auto& s : basic_sets) task.basic_solutions.push_back(names(s));
    for (const auto& s : pref_sets) task.preferred_solutions.push_back(names(s));
    auto concept_list = [](const std::vector<int>& ids) {
      std::string s;
      for (int id : ids) s += (s.empty() ? "c" : ", c") + std::to_string(id);
      return s;
    };
    task.basic_instruction = "I need something with " + concept_list(tc.basic);
    task.preferred_instruction = "preferably with " + concept_list(tc.preferred);
    task.instruction = task.basic_instruction + ", " + task.preferred_instruction + ".";
    out.tasks.push_back(std::move(task));
  }

  // Fill the remaining attribute slots with private concepts.
  for (auto& s : slots)
    while (static_cast<int>(s.concepts.size()) < p.k) s.concepts.push_back(new_concept());

  // Embedding table.
  auto& table = out.table;
  auto mean_of = [&](const std::vector<int>& ids) {
    Vector v = Vector::Zero(p.dim);
    for (int id : ids) v += concepts[static_cast<std::size_t>(id)];
    return Vector(v.normalized());
  };
  auto noisy_vec = [&](const Vector& v) -> Vector { return v + p.noise * random_unit(rng, p.dim); };
  for (int c = 0; c < p.n_categories; ++c) {
    const auto& s = slots[static_cast<std::size_t>(c)];
    const auto& name = categories[static_cast<std::size_t>(c)];
    table.add(keys::object(name), noisy_vec(mean_of(s.concepts)));
    for (int j = 0; j < p.k; ++j) table.add(keys::object_attr(name, j), noisy(s.concepts[static_cast<std::size_t>(j)]));
  }
  for (int t = 0; t < p.n_tasks; ++t) {
    const auto& tc = task_concepts[static_cast<std::size_t>(t)];
    const auto& id = out.tasks[static_cast<std::size_t>(t)].id;
    std::vector<int> all = tc.basic;
    all.insert(all.end(), tc.preferred.begin(), tc.preferred.end());
    table.add(keys::instruction(id), noisy_vec(mean_of(all)));
    table.add(keys::basic_instruction(id), noisy_vec(mean_of(tc.basic)));
    table.add(keys::preferred_instruction(id), noisy_vec(mean_of(tc.preferred)));
    for (int i = 0; i < p.k; ++i) {
      table.add(keys::instruction_attr(id, i), noisy(all[static_cast<std::size_t>(i) % all.size()]));
      table.add(keys::basic_attr(id, i), noisy(tc.basic[static_cast<std::size_t>(i) % tc.basic.size()]));
      table.add(keys::preferred_attr(id, i), noisy(tc.preferred[static_cast<std::size_t>(i) % tc.preferred.size()]));
    }
    for (std::size_t i = 0; i < tc.basic.size(); ++i) table.add(keys::llm_basic(id, static_cast<int>(i)), noisy(tc.basic[i]));
    for (std::size_t i = 0; i < tc.preferred.size(); ++i)
      table.add(keys::llm_preferred(id, static_cast<int>(i)), noisy(tc.preferred[i]));
  }

  // Training samples.
  auto attr_keys = [&](auto fn, const std::string& name) {
    std::vector<std::string> ks;
    for (int i = 0; i < p.k; ++i) ks.push_back(fn(name, i));
    return ks;
  };
  for (int t = 0; t < p.n_tasks; ++t) {
    const auto& tc = task_concepts[static_cast<std::size_t>(t)];
    const auto& id = out.tasks[static_cast<std::size_t>(t)].id;
    std::set<int> members = tc.basic_members;
    members.insert(tc.preferred_members.begin(), tc.preferred_members.end());
    for (int c : members) {
      const auto& name = categories[static_cast<std::size_t>(c)];
      out.samples.push_back({keys::instruction(id), keys::object(name), attr_keys(keys::instruction_attr, id),
                             attr_keys(keys::object_attr, name)});
    }
    for (int c : tc.basic_members) {
      const auto& name = categories[static_cast<std::size_t>(c)];
      out.samples.push_back({keys::basic_instruction(id), keys::object(name), attr_keys(keys::basic_attr, id),
                             attr_keys(keys::object_attr, name)});
    }
    for (int c : tc.preferred_members) {
      const auto& name = categories[static_cast<std::size_t>(c)];
      out.samples.push_back({keys::preferred_instruction(id), keys::object(name), attr_keys(keys::preferred_attr, id),
                             attr_keys(keys::object_attr, name)});
    }
  }

  // Scene.
  SceneMap& scene = out.scene;
  scene.width = p.width;
  scene.height = p.height;
  scene.cell_size = p.cell_size;
  build_layout(scene, rng, p.furniture);
  std::vector<CellIndex> free;
  for (int y = 0; y < scene.height; ++y)
    for (int x = 0; x < scene.width; ++x)
      if (scene.is_free({x, y})) free.push_back({x, y});
  const auto needed = static_cast<std::size_t>(p.n_categories) * p.instances_per_category + p.n_start_poses;
  if (needed > free.size())
    throw Error("synth: " + std::to_string(needed) + " objects and start poses do not fit in " +
                std::to_string(free.size()) + " free cells");
  std::shuffle(free.begin(), free.end(), rng);
  std::size_t next = 0;
  auto round2 = [](double v) { return std::round(v * 100.0) / 100.0; };
  for (int inst = 0; inst < p.instances_per_category; ++inst)
    for (int c = 0; c < p.n_categories; ++c) {
      const auto cell = free[next++];
      const auto centre = scene.center_of(cell);
      scene.objects.push_back({categories[static_cast<std::size_t>(c)] + "_" + std::to_string(inst),
                               categories[static_cast<std::size_t>(c)], centre.x, centre.y,
                               round2(std::uniform_real_distribution<double>(0.3, 1.8)(rng))});
    }
  for (int i = 0; i < p.n_start_poses; ++i) {
    const auto centre = scene.center_of(free[next++]);
    scene.start_poses.push_back({centre.x, centre.y, kAngleStep * uniform_int(rng, 0, 11), 0});
  }
  validate_scene(scene);
  return out;
}

}  // namespace moddn
