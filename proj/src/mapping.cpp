#include "moddn/mapping.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace moddn {

ExploredMap::ExploredMap(int width, int height, double cell_size)
    : width_(width), height_(height), cell_size_(cell_size),
      cells_(static_cast<std::size_t>(width) * height, Known::Unknown) {}

void ExploredMap::mark(CellIndex c, Known k) {
  if (!in_bounds(c) || k == Known::Unknown) return;
  cells_[index(c)] = k;
}

std::size_t ExploredMap::known_count() const {
  std::size_t n = 0;
  for (auto k : cells_) n += k != Known::Unknown ? 1 : 0;
  return n;
}

CellIndex ExploredMap::cell_of(double x, double y) const {
  return {static_cast<int>(std::floor(x / cell_size_)), static_cast<int>(std::floor(y / cell_size_))};
}

void ExploredMap::upsert(const RegisteredObject& obj) {
  auto it = registry_.find(obj.id);
  if (it == registry_.end()) {
    registry_.emplace(obj.id, obj);
    return;
  }
  const int first = it->second.first_seen;
  it->second = obj;
  it->second.first_seen = std::min(first, obj.first_seen);
}

void integrate(ExploredMap& map, const Observation& obs, const Pose& pose, const EpisodeSpec& spec, int step) {
  const Point2 origin{pose.x, pose.y};
  map.mark(map.cell_of(pose.x, pose.y), Known::Free);
  for (const auto& ray : obs.depth) {
    const auto cells = ray_cells(map.width(), map.height(), map.cell_size(), origin, ray.angle, ray.range);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const bool last = i + 1 == cells.size();
      if (ray.hit && last && cells[i].entry == ray.range)
        map.mark(cells[i].cell, Known::Occupied);
      else if (cells[i].entry < ray.range)
        map.mark(cells[i].cell, Known::Free);
    }
  }
  for (const auto& d : obs.detections) {
    const double rad = d.bearing * std::numbers::pi / 180.0;
    RegisteredObject o;
    o.id = d.id;
    o.label = d.label;
    o.x = pose.x + d.range * std::cos(rad);
    o.y = pose.y + d.range * std::sin(rad);
    o.height = spec.camera_height + d.range * std::tan(d.elevation * std::numbers::pi / 180.0);
    if (d.range < 1e-9) o.height = spec.camera_height + (d.elevation < 0 ? -1.0 : 1.0);
    o.first_seen = step;
    map.upsert(o);
  }
}

std::vector<CellIndex> frontiers(const ExploredMap& map) {
  std::vector<CellIndex> out;
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      const CellIndex c{x, y};
      if (map.at(c) != Known::Free) continue;
      const CellIndex nb[4] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
      for (auto n : nb)
        if (map.in_bounds(n) && map.at(n) == Known::Unknown) {
          out.push_back(c);
          break;
        }
    }
  return out;
}

BlockKey block_of(double x, double y, double b) {
  return {static_cast<int>(std::floor(x / b)), static_cast<int>(std::floor(y / b))};
}

BlockKey block_of_cell(const ExploredMap& map, CellIndex c, double b) {
  const auto p = map.center_of(c);
  return block_of(p.x, p.y, b);
}

std::vector<CellIndex> cells_in_block(const ExploredMap& map, BlockKey key, double b) {
  std::vector<CellIndex> out;
  const double cs = map.cell_size();
  const int x0 = std::max(0, static_cast<int>(std::floor(key.bx * b / cs)) - 1);
  const int x1 = std::min(map.width() - 1, static_cast<int>(std::ceil((key.bx + 1) * b / cs)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(key.by * b / cs)) - 1);
  const int y1 = std::min(map.height() - 1, static_cast<int>(std::ceil((key.by + 1) * b / cs)) + 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (block_of_cell(map, {x, y}, b) == key) out.push_back({x, y});
  return out;
}

std::vector<BlockMembers> blocks_with_objects(const ExploredMap& map, double block_size) {
  std::map<BlockKey, std::vector<RegisteredObject>> groups;
  for (const auto& [id, o] : map.registry()) groups[block_of(o.x, o.y, block_size)].push_back(o);
  std::vector<BlockMembers> out;
  for (auto& [k, v] : groups) out.push_back({k, std::move(v)});
  return out;
}

std::vector<BlockMembers> blocks_with_objects(const ExploredMap& map, BlockGrid& grid) {
  auto out = blocks_with_objects(map, grid.block_size());
  for (const auto& bm : out) {
    auto& b = grid.block(bm.key);
    b.members.clear();
    for (const auto& o : bm.objects) b.members.push_back(o.id);
  }
  return out;
}

std::string to_pgm(const ExploredMap& map) {
  std::ostringstream ss;
  ss << "P5\n" << map.width() << " " << map.height() << "\n255\n";
  std::string out = ss.str();
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      const auto k = map.at({x, y});
      out.push_back(static_cast<char>(k == Known::Unknown ? 128 : k == Known::Free ? 255 : 0));
    }
  return out;
}

void save_pgm(const ExploredMap& map, const std::filesystem::path& path) { write_text_file(path, to_pgm(map)); }

ExploredMap load_pgm(const std::filesystem::path& path, double cell_size) {
  const auto text = read_text_file(path);
  std::istringstream in(text);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  if (magic != "P5" || w < 1 || h < 1 || maxv != 255) throw ParseError(path.string() + ": not an 8-bit P5 map");
  in.get();
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (text.size() < offset + static_cast<std::size_t>(w) * h) throw ParseError(path.string() + ": truncated PGM");
  ExploredMap map(w, h, cell_size);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto v = static_cast<unsigned char>(text[offset + static_cast<std::size_t>(y) * w + x]);
      if (v == 255) map.mark({x, y}, Known::Free);
      else if (v == 0) map.mark({x, y}, Known::Occupied);
    }
  return map;
}

}  // namespace moddn
