#include "moddn/embedding.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "moddn/scene.hpp"

namespace moddn {

void EmbeddingTable::add(const std::string& key, std::span<const float> values) {
  if (static_cast<int>(values.size()) != dim_)
    throw Error("embedding '" + key + "' has length " + std::to_string(values.size()) + ", table dim is " +
                std::to_string(dim_));
  if (index_.contains(key)) throw Error("duplicate embedding key '" + key + "'");
  index_.emplace(key, keys_.size());
  keys_.push_back(key);
  data_.insert(data_.end(), values.begin(), values.end());
}

void EmbeddingTable::add(const std::string& key, const Eigen::VectorXd& values) {
  std::vector<float> f(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) f[i] = static_cast<float>(values[i]);
  add(key, f);
}

std::span<const float> EmbeddingTable::raw(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw Error("missing embedding key '" + key + "'");
  return {data_.data() + it->second * dim_, static_cast<std::size_t>(dim_)};
}

Eigen::VectorXd EmbeddingTable::vector(const std::string& key) const {
  auto r = raw(key);
  Eigen::VectorXd v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = r[i];
  return v;
}

namespace {

static_assert(std::endian::native == std::endian::little, "EMB1 I/O assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n) {
    need(n, "key bytes");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size())
      throw ParseError(std::string("EMB1: truncated while reading ") + what + " at byte " + std::to_string(pos_));
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_emb1(const EmbeddingTable& table) {
  std::vector<std::uint8_t> out{'E', 'M', 'B', '1'};
  put<std::uint32_t>(out, static_cast<std::uint32_t>(table.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(table.dim()));
  for (const auto& key : table.keys()) {
    if (key.size() > 0xFFFF) throw Error("embedding key too long: " + key.substr(0, 32) + "...");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(key.size()));
    out.insert(out.end(), key.begin(), key.end());
    for (float f : table.raw(key)) put<float>(out, f);
  }
  return out;
}

EmbeddingTable decode_emb1(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "EMB1", 4) != 0) throw ParseError("EMB1: bad magic");
  Reader r(bytes.subspan(4));
  const auto count = r.get<std::uint32_t>("count");
  const auto dim = r.get<std::uint32_t>("dim");
  EmbeddingTable table(static_cast<int>(dim), Provenance::Exported);
  std::vector<float> values(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>("key length");
    auto key = r.get_string(len);
    for (auto& v : values) v = r.get<float>("vector payload");
    if (table.contains(key)) throw ParseError("EMB1: duplicate key '" + key + "'");
    table.add(key, values);
  }
  if (!r.done()) throw ParseError("EMB1: trailing bytes after " + std::to_string(count) + " entries");
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  const auto bytes = encode_emb1(table);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_emb1(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace moddn
