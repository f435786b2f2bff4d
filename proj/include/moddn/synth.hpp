#pragma once
// Seeded generator for scenes, demand tasks and an embedding table with a
// planted attribute structure.
//
// Every task owns private "concept" unit vectors (basic and preferred).
// Each category has k attribute slots; a category placed in one of a
// task's solutions spends a slot on one of that task's concepts, and all
// remaining slots get category-private concepts. An object's attribute
// vectors therefore share a concept with an instruction's attribute
// vectors exactly when the object belongs to one of its solutions.
// Stored vectors are concept + noise * (random unit vector).

#include <cstdint>
#include <vector>

#include "moddn/attribute.hpp"
#include "moddn/embedding.hpp"
#include "moddn/scene.hpp"

namespace moddn {

struct SynthParams {
  int width = 32;   // cells
  int height = 32;
  double cell_size = 0.25;
  int n_categories = 20;
  int instances_per_category = 1;
  int n_tasks = 10;
  int n_start_poses = 8;
  int dim = 32;
  int k = 4;                   // attribute features per instruction and per object
  int basic_concepts = 2;
  int preferred_concepts = 2;
  int basic_solutions = 2;     // per task
  int max_solution_size = 3;
  int preferred_solutions = 1; // per task
  int furniture = 6;           // occupied 2x2 clutter blocks
  double noise = 0.1;
};

struct SynthOutput {
  SceneMap scene;
  std::vector<Task> tasks;
  EmbeddingTable table;
  std::vector<TrainSample> samples;  // (instruction, solution object) pairs
};

// Throws Error on infeasible parameters (e.g. more objects than free cells,
// or not enough free attribute slots to realise the requested tasks).
SynthOutput synth_generate(std::uint64_t seed, const SynthParams& params);

}  // namespace moddn
