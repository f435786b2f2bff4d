#pragma once
// Attribute model: per-role MLP encoders mapping one text feature to k
// attribute features, mirrored decoders, a shared codebook, the five
// training losses, and plain gradient descent with hand-derived gradients.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "moddn/embedding.hpp"

namespace moddn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Codebook {
  Matrix codes;  // K x d
  int size() const { return static_cast<int>(codes.rows()); }
  int dim() const { return static_cast<int>(codes.cols()); }
};

// in -> hidden (ReLU) -> out
struct Mlp {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

// One role (instruction or object): encoder d -> 2d -> k*d and decoder
// k*d -> 2d -> d.
struct AttributeEncoder {
  int dim = 0;
  int k = 0;
  Mlp encoder;
  Mlp decoder;
};

struct AttributeModel {
  AttributeEncoder instruction;
  AttributeEncoder object;
  Codebook codebook;
};

enum class Role { Instruction, Object };

struct LossWeights {
  double attr = 2.0;
  double vq = 1.0;
  double commit = 0.25;
  double recon = 1.0;
  double match = 1.0;
};

struct LossTerms {
  double attr = 0.0;
  double commit = 0.0;
  double vq = 0.0;
  double recon = 0.0;
  double match = 0.0;
  double total = 0.0;
};

struct TrainSample {
  std::string instruction;
  std::string object;
  std::vector<std::string> instruction_attrs;  // k1 ground-truth keys
  std::vector<std::string> object_attrs;       // k2 ground-truth keys
};

// Intermediate values of one role's forward pass.
struct RoleTrace {
  Vector input;
  Vector enc_pre;     // encoder hidden pre-activation
  Matrix attrs;       // k x d
  Matrix target;      // ground-truth attrs, k x d
  Matrix quantized;   // k x d
  std::vector<int> code_index;
  Vector dec_pre;     // decoder hidden pre-activation
  Vector recon;
};

struct ForwardTrace {
  RoleTrace instruction;
  RoleTrace object;
  int match_i = 0;
  int match_j = 0;
};

struct KMeansResult {
  Codebook codebook;
  std::vector<double> distortion;  // after each assignment step
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding over the rows of `points`.
KMeansResult kmeans(const Matrix& points, int clusters, std::uint64_t seed, int max_iters = 100);
Codebook kmeans_init(const Matrix& points, int clusters, std::uint64_t seed, int max_iters = 100);

struct Quantized {
  Matrix rows;
  std::vector<int> index;
};
// Nearest code row per input row (squared Euclidean; ties -> lowest index).
Quantized quantize(const Matrix& vectors, const Codebook& codebook);

AttributeEncoder make_encoder(int dim, int k, std::uint64_t seed);
AttributeModel make_model(int dim, int k1, int k2, Codebook codebook, std::uint64_t seed);

Matrix encode(const AttributeEncoder& enc, const Vector& input);
Vector decode(const AttributeEncoder& enc, const Matrix& attrs);

LossTerms losses(const TrainSample& sample, const EmbeddingTable& table, const AttributeModel& model,
                 const LossWeights& weights, ForwardTrace* trace = nullptr);

// Gradient of `total` w.r.t. every parameter, honouring the stop-gradient
// placement: commit reaches only encoders, vq only the codebook.
AttributeModel zero_like(const AttributeModel& model);
void backward(const AttributeModel& model, const ForwardTrace& trace, const LossWeights& weights,
              AttributeModel& grad);
LossTerms loss_and_gradient(const TrainSample& sample, const EmbeddingTable& table, const AttributeModel& model,
                            const LossWeights& weights, AttributeModel& grad);

// Visits every trainable tensor as a flat span of doubles.
void for_each_parameter(AttributeModel& model,
                        const std::function<void(const std::string& name, double* data, Eigen::Index size)>& fn);

struct TrainConfig {
  double lr = 1e-2;
  int epochs = 500;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct TrainResult {
  AttributeModel model;
  std::vector<LossTerms> curve;  // curve[0]: before training; curve[e]: after epoch e
};

// Per-sample gradient descent. Throws if the loss becomes non-finite.
TrainResult train(const std::vector<TrainSample>& samples, const EmbeddingTable& table, AttributeModel model,
                  const LossWeights& weights, const TrainConfig& config,
                  const std::function<void(int epoch, const LossTerms&)>& on_epoch = {});

// Checks every key referenced by the samples exists with the table dim.
void check_samples(const std::vector<TrainSample>& samples, const EmbeddingTable& table, int k1, int k2);

enum class Branch { Mlp, PrecomputedLlm };

struct InstructionAttributes {
  Matrix basic;      // rows are attribute features
  Matrix preferred;
};

InstructionAttributes instruction_attributes(const std::string& task_id, Branch branch, const EmbeddingTable& table,
                                             const AttributeModel* model);

double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);
// max over row pairs of cosine similarity.
double max_pair_cosine(const Matrix& a, const Matrix& b);

nlohmann::json model_to_json(const AttributeModel& model);
AttributeModel model_from_json(const nlohmann::json& j);
void save_model(const AttributeModel& model, const std::filesystem::path& path);
AttributeModel load_model(const std::filesystem::path& path);

std::vector<TrainSample> parse_samples(const nlohmann::json& j);
nlohmann::json samples_to_json(const std::vector<TrainSample>& samples);

}  // namespace moddn
