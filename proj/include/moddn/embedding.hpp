#pragma once
// Key -> vector table backing every text feature in the stack, plus the
// EMB1 binary container shared with the offline exporter:
//
//   "EMB1" | u32 count | u32 dim | count * (u16 key_len | key bytes | dim * f32)
//
// All integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace moddn {

enum class Provenance { Synthetic, Exported };

class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dim = 0, Provenance p = Provenance::Synthetic) : dim_(dim), provenance_(p) {}

  int dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  Provenance provenance() const { return provenance_; }
  void set_provenance(Provenance p) { provenance_ = p; }

  bool contains(const std::string& key) const { return index_.contains(key); }
  // Throws if the key exists or the vector length differs from dim().
  void add(const std::string& key, std::span<const float> values);
  void add(const std::string& key, const Eigen::VectorXd& values);

  std::span<const float> raw(const std::string& key) const;
  Eigen::VectorXd vector(const std::string& key) const;
  const std::vector<std::string>& keys() const { return keys_; }

  bool operator==(const EmbeddingTable& o) const {
    return dim_ == o.dim_ && keys_ == o.keys_ && data_ == o.data_;
  }

 private:
  int dim_;
  Provenance provenance_;
  std::vector<std::string> keys_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Key naming used by the synthetic generator, trainer and agents.
namespace keys {
inline std::string instruction(const std::string& task) { return "ins:" + task; }
inline std::string basic_instruction(const std::string& task) { return "ins_b:" + task; }
inline std::string preferred_instruction(const std::string& task) { return "ins_p:" + task; }
inline std::string object(const std::string& category) { return "obj:" + category; }
inline std::string instruction_attr(const std::string& task, int i) { return "gt_ins:" + task + ":" + std::to_string(i); }
inline std::string basic_attr(const std::string& task, int i) { return "gt_ins_b:" + task + ":" + std::to_string(i); }
inline std::string preferred_attr(const std::string& task, int i) { return "gt_ins_p:" + task + ":" + std::to_string(i); }
inline std::string object_attr(const std::string& category, int j) { return "gt_obj:" + category + ":" + std::to_string(j); }
// Attribute-text embeddings produced offline for the precomputed branch.
inline std::string llm_basic(const std::string& task, int i) { return "llm_b:" + task + ":" + std::to_string(i); }
inline std::string llm_preferred(const std::string& task, int i) { return "llm_p:" + task + ":" + std::to_string(i); }
}  // namespace keys

std::vector<std::uint8_t> encode_emb1(const EmbeddingTable& table);
EmbeddingTable decode_emb1(std::span<const std::uint8_t> bytes);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

}  // namespace moddn
