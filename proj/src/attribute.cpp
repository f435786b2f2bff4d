#include "moddn/attribute.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "moddn/scene.hpp"

namespace moddn {

namespace {

double squared_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  return (a - b).squaredNorm();
}

double mse(const Matrix& a, const Matrix& b) { return (a - b).squaredNorm() / static_cast<double>(a.size()); }

Vector relu(const Vector& v) { return v.cwiseMax(0.0); }

Vector relu_mask(const Vector& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

Matrix to_rows(const Vector& flat, int k, int d) {
  Matrix m(k, d);
  for (int i = 0; i < k; ++i) m.row(i) = flat.segment(static_cast<Eigen::Index>(i) * d, d).transpose();
  return m;
}

Vector flatten(const Matrix& rows) {
  Vector v(rows.size());
  const auto d = rows.cols();
  for (Eigen::Index i = 0; i < rows.rows(); ++i) v.segment(i * d, d) = rows.row(i).transpose();
  return v;
}

Matrix gather(const EmbeddingTable& table, const std::vector<std::string>& keys) {
  Matrix m(static_cast<Eigen::Index>(keys.size()), table.dim());
  for (std::size_t i = 0; i < keys.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = table.vector(keys[i]).transpose();
  return m;
}

Mlp make_mlp(int in, int hidden, int out, std::mt19937_64& rng) {
  Mlp m;
  std::normal_distribution<double> n1(0.0, std::sqrt(2.0 / in));
  std::normal_distribution<double> n2(0.0, std::sqrt(1.0 / hidden));
  m.w1 = Matrix(hidden, in);
  for (Eigen::Index i = 0; i < m.w1.size(); ++i) m.w1.data()[i] = n1(rng);
  m.b1 = Vector::Zero(hidden);
  m.w2 = Matrix(out, hidden);
  for (Eigen::Index i = 0; i < m.w2.size(); ++i) m.w2.data()[i] = n2(rng);
  m.b2 = Vector::Zero(out);
  return m;
}

void zero(Mlp& m) {
  m.w1.setZero();
  m.b1.setZero();
  m.w2.setZero();
  m.b2.setZero();
}

void check_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw Error(std::string(what) + " contains non-finite values");
}

void forward_role(const AttributeEncoder& enc, const Vector& input, const Matrix& target, const Codebook& book,
                  RoleTrace& t) {
  t.input = input;
  t.enc_pre = enc.encoder.w1 * input + enc.encoder.b1;
  const Vector z = enc.encoder.w2 * relu(t.enc_pre) + enc.encoder.b2;
  t.attrs = to_rows(z, enc.k, enc.dim);
  t.target = target;
  auto q = quantize(t.attrs, book);
  t.quantized = std::move(q.rows);
  t.code_index = std::move(q.index);
  t.dec_pre = enc.decoder.w1 * z + enc.decoder.b1;
  t.recon = enc.decoder.w2 * relu(t.dec_pre) + enc.decoder.b2;
}

// Back-propagates dL/d(attrs) and dL/d(recon) through decoder and encoder.
void backward_role(const AttributeEncoder& enc, const RoleTrace& t, const Matrix& d_attrs, const Vector& d_recon,
                   AttributeEncoder& g) {
  const Vector dec_h = relu(t.dec_pre);
  g.decoder.w2.noalias() += d_recon * dec_h.transpose();
  g.decoder.b2 += d_recon;
  const Vector d_dec_pre = (enc.decoder.w2.transpose() * d_recon).cwiseProduct(relu_mask(t.dec_pre));
  const Vector z = flatten(t.attrs);
  g.decoder.w1.noalias() += d_dec_pre * z.transpose();
  g.decoder.b1 += d_dec_pre;

  const Vector dz = flatten(d_attrs) + enc.decoder.w1.transpose() * d_dec_pre;
  const Vector enc_h = relu(t.enc_pre);
  g.encoder.w2.noalias() += dz * enc_h.transpose();
  g.encoder.b2 += dz;
  const Vector d_enc_pre = (enc.encoder.w2.transpose() * dz).cwiseProduct(relu_mask(t.enc_pre));
  g.encoder.w1.noalias() += d_enc_pre * t.input.transpose();
  g.encoder.b1 += d_enc_pre;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int clusters, std::uint64_t seed, int max_iters) {
  const auto n = points.rows();
  if (clusters < 1) throw Error("kmeans: K must be >= 1");
  // Count distinct rows (exact equality).
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < points.cols(); ++c)
      if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
    return false;
  });
  Eigen::Index distinct = n > 0 ? 1 : 0;
  for (std::size_t i = 1; i < order.size(); ++i)
    if (points.row(order[i]) != points.row(order[i - 1])) ++distinct;
  if (distinct < clusters)
    throw Error("kmeans: need at least " + std::to_string(clusters) + " distinct vectors, got " +
                std::to_string(distinct));

  std::mt19937_64 rng(seed);
  Matrix centers(clusters, points.cols());
  // k-means++ seeding.
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = points.row(pick(rng));
  Vector d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = squared_distance(points.row(i).transpose(), centers.row(0).transpose());
  for (int c = 1; c < clusters; ++c) {
    const double total = d2.sum();
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng);
    Eigen::Index chosen = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      r -= d2[i];
      chosen = i;
      if (r <= 0.0) break;
    }
    centers.row(c) = points.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(points.row(i).transpose(), centers.row(c).transpose()));
  }

  KMeansResult result;
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double distortion = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < clusters; ++c) {
        const double d = squared_distance(points.row(i).transpose(), centers.row(c).transpose());
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      distortion += best_d;
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    result.distortion.push_back(distortion);
    result.iterations = iter + 1;
    if (!changed && iter > 0) break;
    Matrix sums = Matrix::Zero(clusters, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(clusters), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    // Empty clusters keep their previous center.
    for (int c = 0; c < clusters; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
  }
  result.codebook.codes = std::move(centers);
  return result;
}

Codebook kmeans_init(const Matrix& points, int clusters, std::uint64_t seed, int max_iters) {
  return kmeans(points, clusters, seed, max_iters).codebook;
}

Quantized quantize(const Matrix& vectors, const Codebook& codebook) {
  if (vectors.cols() != codebook.codes.cols())
    throw Error("quantize: dim mismatch (" + std::to_string(vectors.cols()) + " vs " +
                std::to_string(codebook.codes.cols()) + ")");
  if (codebook.codes.rows() < 1) throw Error("quantize: empty codebook");
  Quantized q;
  q.rows.resize(vectors.rows(), vectors.cols());
  q.index.resize(static_cast<std::size_t>(vectors.rows()));
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < codebook.codes.rows(); ++c) {
      const double d = squared_distance(vectors.row(i).transpose(), codebook.codes.row(c).transpose());
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    q.index[static_cast<std::size_t>(i)] = best;
    q.rows.row(i) = codebook.codes.row(best);
  }
  return q;
}

AttributeEncoder make_encoder(int dim, int k, std::uint64_t seed) {
  if (dim < 1 || k < 1) throw Error("encoder needs dim >= 1 and k >= 1");
  std::mt19937_64 rng(seed);
  AttributeEncoder e;
  e.dim = dim;
  e.k = k;
  e.encoder = make_mlp(dim, 2 * dim, k * dim, rng);
  e.decoder = make_mlp(k * dim, 2 * dim, dim, rng);
  return e;
}

AttributeModel make_model(int dim, int k1, int k2, Codebook codebook, std::uint64_t seed) {
  if (codebook.dim() != dim) throw Error("codebook dim does not match model dim");
  AttributeModel m;
  m.instruction = make_encoder(dim, k1, seed * 2 + 1);
  m.object = make_encoder(dim, k2, seed * 2 + 2);
  m.codebook = std::move(codebook);
  return m;
}

Matrix encode(const AttributeEncoder& enc, const Vector& input) {
  if (input.size() != enc.dim) throw Error("encode: input dim mismatch");
  check_finite(input, "encoder input");
  const Vector z = enc.encoder.w2 * relu(enc.encoder.w1 * input + enc.encoder.b1) + enc.encoder.b2;
  return to_rows(z, enc.k, enc.dim);
}

Vector decode(const AttributeEncoder& enc, const Matrix& attrs) {
  const Vector z = flatten(attrs);
  return enc.decoder.w2 * relu(enc.decoder.w1 * z + enc.decoder.b1) + enc.decoder.b2;
}

LossTerms losses(const TrainSample& sample, const EmbeddingTable& table, const AttributeModel& model,
                 const LossWeights& w, ForwardTrace* trace) {
  ForwardTrace local;
  ForwardTrace& t = trace ? *trace : local;
  const Vector ins = table.vector(sample.instruction);
  const Vector obj = table.vector(sample.object);
  check_finite(ins, "instruction feature");
  check_finite(obj, "object feature");
  forward_role(model.instruction, ins, gather(table, sample.instruction_attrs), model.codebook, t.instruction);
  forward_role(model.object, obj, gather(table, sample.object_attrs), model.codebook, t.object);
  if (t.instruction.target.rows() != model.instruction.k || t.object.target.rows() != model.object.k)
    throw Error("sample attribute count does not match k1/k2");

  LossTerms l;
  l.attr = mse(t.instruction.target, t.instruction.attrs) + mse(t.object.target, t.object.attrs);
  l.commit = mse(t.instruction.attrs, t.instruction.quantized) + mse(t.object.attrs, t.object.quantized);
  l.vq = l.commit;  // same value; the two differ only in where the gradient flows
  l.recon = mse(t.instruction.recon, ins) + mse(t.object.recon, obj);
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < t.instruction.attrs.rows(); ++i)
    for (Eigen::Index j = 0; j < t.object.attrs.rows(); ++j) {
      const double m = squared_distance(t.instruction.attrs.row(i).transpose(), t.object.attrs.row(j).transpose()) /
                       static_cast<double>(t.instruction.attrs.cols());
      if (m < best) {
        best = m;
        t.match_i = static_cast<int>(i);
        t.match_j = static_cast<int>(j);
      }
    }
  l.match = best;
  l.total = w.attr * l.attr + w.vq * l.vq + w.commit * l.commit + w.recon * l.recon + w.match * l.match;
  return l;
}

AttributeModel zero_like(const AttributeModel& model) {
  AttributeModel g = model;
  zero(g.instruction.encoder);
  zero(g.instruction.decoder);
  zero(g.object.encoder);
  zero(g.object.decoder);
  g.codebook.codes.setZero();
  return g;
}

void backward(const AttributeModel& model, const ForwardTrace& t, const LossWeights& w, AttributeModel& grad) {
  const auto& ti = t.instruction;
  const auto& to = t.object;
  const double ni = static_cast<double>(ti.attrs.size());
  const double no = static_cast<double>(to.attrs.size());
  const double d = static_cast<double>(ti.attrs.cols());

  // Attribute and commitment terms; the quantized rows are constants here.
  Matrix g_ins = (2.0 * w.attr / ni) * (ti.attrs - ti.target) + (2.0 * w.commit / ni) * (ti.attrs - ti.quantized);
  Matrix g_obj = (2.0 * w.attr / no) * (to.attrs - to.target) + (2.0 * w.commit / no) * (to.attrs - to.quantized);

  const Eigen::RowVectorXd diff = ti.attrs.row(t.match_i) - to.attrs.row(t.match_j);
  g_ins.row(t.match_i) += (2.0 * w.match / d) * diff;
  g_obj.row(t.match_j) -= (2.0 * w.match / d) * diff;

  const Vector r_ins = (2.0 * w.recon / static_cast<double>(ti.recon.size())) * (ti.recon - ti.input);
  const Vector r_obj = (2.0 * w.recon / static_cast<double>(to.recon.size())) * (to.recon - to.input);

  backward_role(model.instruction, ti, g_ins, r_ins, grad.instruction);
  backward_role(model.object, to, g_obj, r_obj, grad.object);

  // VQ term; encoder outputs are constants here.
  for (Eigen::Index i = 0; i < ti.attrs.rows(); ++i)
    grad.codebook.codes.row(ti.code_index[static_cast<std::size_t>(i)]) +=
        (2.0 * w.vq / ni) * (ti.quantized.row(i) - ti.attrs.row(i));
  for (Eigen::Index j = 0; j < to.attrs.rows(); ++j)
    grad.codebook.codes.row(to.code_index[static_cast<std::size_t>(j)]) +=
        (2.0 * w.vq / no) * (to.quantized.row(j) - to.attrs.row(j));
}

LossTerms loss_and_gradient(const TrainSample& sample, const EmbeddingTable& table, const AttributeModel& model,
                            const LossWeights& weights, AttributeModel& grad) {
  ForwardTrace trace;
  const auto l = losses(sample, table, model, weights, &trace);
  grad = zero_like(model);
  backward(model, trace, weights, grad);
  return l;
}

void for_each_parameter(AttributeModel& model,
                        const std::function<void(const std::string&, double*, Eigen::Index)>& fn) {
  auto role = [&](const std::string& prefix, AttributeEncoder& e) {
    fn(prefix + ".enc.w1", e.encoder.w1.data(), e.encoder.w1.size());
    fn(prefix + ".enc.b1", e.encoder.b1.data(), e.encoder.b1.size());
    fn(prefix + ".enc.w2", e.encoder.w2.data(), e.encoder.w2.size());
    fn(prefix + ".enc.b2", e.encoder.b2.data(), e.encoder.b2.size());
    fn(prefix + ".dec.w1", e.decoder.w1.data(), e.decoder.w1.size());
    fn(prefix + ".dec.b1", e.decoder.b1.data(), e.decoder.b1.size());
    fn(prefix + ".dec.w2", e.decoder.w2.data(), e.decoder.w2.size());
    fn(prefix + ".dec.b2", e.decoder.b2.data(), e.decoder.b2.size());
  };
  role("instruction", model.instruction);
  role("object", model.object);
  fn("codebook", model.codebook.codes.data(), model.codebook.codes.size());
}

void check_samples(const std::vector<TrainSample>& samples, const EmbeddingTable& table, int k1, int k2) {
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& x = samples[s];
    auto need = [&](const std::string& key) {
      if (!table.contains(key)) throw Error("sample " + std::to_string(s) + ": missing embedding key '" + key + "'");
    };
    need(x.instruction);
    need(x.object);
    for (const auto& k : x.instruction_attrs) need(k);
    for (const auto& k : x.object_attrs) need(k);
    if (static_cast<int>(x.instruction_attrs.size()) != k1 || static_cast<int>(x.object_attrs.size()) != k2)
      throw Error("sample " + std::to_string(s) + ": expected " + std::to_string(k1) + "/" + std::to_string(k2) +
                  " attribute keys");
  }
}

TrainResult train(const std::vector<TrainSample>& samples, const EmbeddingTable& table, AttributeModel model,
                  const LossWeights& weights, const TrainConfig& config,
                  const std::function<void(int, const LossTerms&)>& on_epoch) {
  if (!(config.lr >= 0.0)) throw Error("learning rate must be non-negative");
  if (samples.empty()) throw Error("no training samples");
  check_samples(samples, table, model.instruction.k, model.object.k);

  auto evaluate = [&](const AttributeModel& m) {
    LossTerms mean;
    for (const auto& s : samples) {
      const auto l = losses(s, table, m, weights);
      mean.attr += l.attr;
      mean.commit += l.commit;
      mean.vq += l.vq;
      mean.recon += l.recon;
      mean.match += l.match;
      mean.total += l.total;
    }
    const double n = static_cast<double>(samples.size());
    mean.attr /= n;
    mean.commit /= n;
    mean.vq /= n;
    mean.recon /= n;
    mean.match /= n;
    mean.total /= n;
    return mean;
  };

  TrainResult result;
  result.curve.push_back(evaluate(model));
  if (on_epoch) on_epoch(0, result.curve.back());

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  AttributeModel grad = zero_like(model);
  ForwardTrace trace;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
    for (auto idx : order) {
      const auto l = losses(samples[idx], table, model, weights, &trace);
      if (!std::isfinite(l.total))
        throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                    std::to_string(idx));
      grad = zero_like(model);
      backward(model, trace, weights, grad);
      std::vector<double*> steps;
      for_each_parameter(grad, [&](const std::string&, double* g, Eigen::Index) { steps.push_back(g); });
      std::size_t t = 0;
      for_each_parameter(model, [&](const std::string&, double* p, Eigen::Index n) {
        const double* g = steps[t++];
        for (Eigen::Index i = 0; i < n; ++i) p[i] -= config.lr * g[i];
      });
    }
    result.curve.push_back(evaluate(model));
    if (!std::isfinite(result.curve.back().total))
      throw Error("training diverged: non-finite loss after epoch " + std::to_string(epoch));
    if (on_epoch) on_epoch(epoch, result.curve.back());
  }
  result.model = std::move(model);
  return result;
}

InstructionAttributes instruction_attributes(const std::string& task_id, Branch branch, const EmbeddingTable& table,
                                             const AttributeModel* model) {
  InstructionAttributes out;
  if (branch == Branch::Mlp) {
    if (!model) throw Error("MLP branch requires a trained attribute model");
    out.basic = encode(model->instruction, table.vector(keys::basic_instruction(task_id)));
    out.preferred = encode(model->instruction, table.vector(keys::preferred_instruction(task_id)));
    return out;
  }
  auto collect = [&](auto key_fn, const char* what) {
    std::vector<std::string> ks;
    for (int i = 0; table.contains(key_fn(task_id, i)); ++i) ks.push_back(key_fn(task_id, i));
    if (ks.empty()) throw Error(std::string("missing precomputed ") + what + " attribute keys for task '" + task_id + "'");
    return gather(table, ks);
  };
  out.basic = collect(keys::llm_basic, "basic");
  out.preferred = collect(keys::llm_preferred, "preferred");
  return out;
}

double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

double max_pair_cosine(const Matrix& a, const Matrix& b) {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) best = std::max(best, cosine(a.row(i).transpose(), b.row(j).transpose()));
  return best;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  std::vector<double> flat(static_cast<std::size_t>(m.size()));
  // row-major in the file
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Matrix matrix_from(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw ParseError("model: matrix data size mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  return m;
}

nlohmann::json mlp_json(const Mlp& m) {
  return {{"w1", matrix_json(m.w1)}, {"b1", matrix_json(m.b1)}, {"w2", matrix_json(m.w2)}, {"b2", matrix_json(m.b2)}};
}

Mlp mlp_from(const nlohmann::json& j) {
  Mlp m;
  m.w1 = matrix_from(j.at("w1"));
  m.b1 = matrix_from(j.at("b1"));
  m.w2 = matrix_from(j.at("w2"));
  m.b2 = matrix_from(j.at("b2"));
  return m;
}

nlohmann::json encoder_json(const AttributeEncoder& e) {
  return {{"dim", e.dim}, {"k", e.k}, {"encoder", mlp_json(e.encoder)}, {"decoder", mlp_json(e.decoder)}};
}

AttributeEncoder encoder_from(const nlohmann::json& j) {
  AttributeEncoder e;
  e.dim = j.at("dim").get<int>();
  e.k = j.at("k").get<int>();
  e.encoder = mlp_from(j.at("encoder"));
  e.decoder = mlp_from(j.at("decoder"));
  if (e.encoder.w1.cols() != e.dim || e.encoder.w2.rows() != static_cast<Eigen::Index>(e.k) * e.dim ||
      e.decoder.w2.rows() != e.dim)
    throw ParseError("model: encoder shapes inconsistent with dim/k");
  return e;
}

}  // namespace

nlohmann::json model_to_json(const AttributeModel& m) {
  return {{"format", "moddn-attribute-model-1"},
          {"instruction", encoder_json(m.instruction)},
          {"object", encoder_json(m.object)},
          {"codebook", matrix_json(m.codebook.codes)}};
}

AttributeModel model_from_json(const nlohmann::json& j) {
  try {
    AttributeModel m;
    m.instruction = encoder_from(j.at("instruction"));
    m.object = encoder_from(j.at("object"));
    m.codebook.codes = matrix_from(j.at("codebook"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

void save_model(const AttributeModel& model, const std::filesystem::path& path) {
  write_text_file(path, model_to_json(model).dump() + "\n");
}

AttributeModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<TrainSample> parse_samples(const nlohmann::json& j) {
  std::vector<TrainSample> out;
  if (!j.is_array()) throw ParseError("samples: expected a JSON array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      TrainSample s;
      s.instruction = j[i].at("instruction").get<std::string>();
      s.object = j[i].at("object").get<std::string>();
      s.instruction_attrs = j[i].at("instruction_attrs").get<std::vector<std::string>>();
      s.object_attrs = j[i].at("object_attrs").get<std::vector<std::string>>();
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("samples[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return out;
}

nlohmann::json samples_to_json(const std::vector<TrainSample>& samples) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : samples)
    arr.push_back({{"instruction", s.instruction},
                   {"object", s.object},
                   {"instruction_attrs", s.instruction_attrs},
                   {"object_attrs", s.object_attrs}});
  return arr;
}

}  // namespace moddn
