#pragma once
// Incrementally explored occupancy map, observed-object registry and b x b
// block segmentation.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "moddn/scene.hpp"
#include "moddn/simulator.hpp"

namespace moddn {

enum class Known : std::uint8_t { Unknown, Free, Occupied };

struct RegisteredObject {
  std::string id;
  std::string label;  // as detected, possibly wrong
  double x = 0.0;
  double y = 0.0;
  double height = 0.0;
  int first_seen = 0;
  bool operator==(const RegisteredObject&) const = default;
};

class ExploredMap {
 public:
  ExploredMap() = default;
  ExploredMap(int width, int height, double cell_size);
  static ExploredMap like(const SceneMap& scene) { return {scene.width, scene.height, scene.cell_size}; }

  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size() const { return cell_size_; }
  bool in_bounds(CellIndex c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  Known at(CellIndex c) const { return cells_[index(c)]; }
  bool known_free(CellIndex c) const { return in_bounds(c) && at(c) == Known::Free; }
  // Unknown -> Known only; a known cell never reverts to Unknown.
  void mark(CellIndex c, Known k);
  std::size_t known_count() const;
  CellIndex cell_of(double x, double y) const;
  Point2 center_of(CellIndex c) const { return {(c.x + 0.5) * cell_size_, (c.y + 0.5) * cell_size_}; }

  const std::map<std::string, RegisteredObject>& registry() const { return registry_; }
  void upsert(const RegisteredObject& obj);

  bool operator==(const ExploredMap&) const = default;

 private:
  std::size_t index(CellIndex c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }
  int width_ = 0;
  int height_ = 0;
  double cell_size_ = 0.25;
  std::vector<Known> cells_;
  std::map<std::string, RegisteredObject> registry_;
};

// Marks cells along each depth ray Free up to its hit, the hit cell
// Occupied, and records detections in the registry.
void integrate(ExploredMap& map, const Observation& obs, const Pose& pose, const EpisodeSpec& spec, int step);

// Known-Free cells 4-adjacent to at least one Unknown cell (row-major order).
std::vector<CellIndex> frontiers(const ExploredMap& map);

struct BlockKey {
  int bx = 0;
  int by = 0;
  auto operator<=>(const BlockKey&) const = default;
};

BlockKey block_of(double x, double y, double block_size);
BlockKey block_of_cell(const ExploredMap& map, CellIndex c, double block_size);
std::vector<CellIndex> cells_in_block(const ExploredMap& map, BlockKey key, double block_size);

struct Block {
  std::vector<std::string> members;
  bool visited = false;
  double last_score = 0.0;
};

class BlockGrid {
 public:
  explicit BlockGrid(double block_size = 2.0) : size_(block_size) {}
  double block_size() const { return size_; }
  // Visited flags are monotone.
  void mark_visited(BlockKey key) { blocks_[key].visited = true; }
  bool visited(BlockKey key) const {
    auto it = blocks_.find(key);
    return it != blocks_.end() && it->second.visited;
  }
  Block& block(BlockKey key) { return blocks_[key]; }
  const std::map<BlockKey, Block>& blocks() const { return blocks_; }

 private:
  double size_;
  std::map<BlockKey, Block> blocks_;
};

struct BlockMembers {
  BlockKey key;
  std::vector<RegisteredObject> objects;
};

// Partitions the registry by object centroid, ordered by key. Also refreshes
// the member lists stored in `grid`.
std::vector<BlockMembers> blocks_with_objects(const ExploredMap& map, BlockGrid& grid);
std::vector<BlockMembers> blocks_with_objects(const ExploredMap& map, double block_size);

// Binary PGM: Unknown=128, Free=255, Occupied=0; first image row is y=0.
std::string to_pgm(const ExploredMap& map);
void save_pgm(const ExploredMap& map, const std::filesystem::path& path);
ExploredMap load_pgm(const std::filesystem::path& path, double cell_size);

}  // namespace moddn
