#pragma once
// Independent reference implementations used by the unit and acceptance
// tests. Written with plain loops and containers, sharing no code paths with
// the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "moddn/attribute.hpp"
#include "moddn/mapping.hpp"
#include "moddn/scene.hpp"

namespace oracle {

using namespace moddn;

inline double success_rate(const std::set<std::string>& found, const std::vector<Solution>& sols) {
  double best = 0.0;
  for (const auto& s : sols) {
    int hit = 0;
    for (const auto& c : s)
      for (const auto& f : found)
        if (f == c) ++hit;
    best = std::max(best, static_cast<double>(hit) / static_cast<double>(s.size()));
  }
  return best;
}

// BFS length (in steps) between two cells over Known-Free map cells; -1 if none.
inline int bfs_length(const ExploredMap& map, CellIndex a, CellIndex b) {
  if (!map.known_free(a) || !map.known_free(b)) return -1;
  std::map<std::pair<int, int>, int> dist;
  std::queue<std::pair<int, int>> q;
  dist[{a.x, a.y}] = 0;
  q.push({a.x, a.y});
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop();
    if (x == b.x && y == b.y) return dist[{x, y}];
    const int nx[4] = {x, x, x + 1, x - 1};
    const int ny[4] = {y + 1, y - 1, y, y};
    for (int k = 0; k < 4; ++k) {
      if (!map.known_free({nx[k], ny[k]}) || dist.count({nx[k], ny[k]})) continue;
      dist[{nx[k], ny[k]}] = dist[{x, y}] + 1;
      q.push({nx[k], ny[k]});
    }
  }
  return -1;
}

// Shortest tour via uniform-cost search over (cell, covered-category mask),
// restricted to solutions attaining the best achievable success rate.
inline double product_state_tour(const SceneMap& scene, const std::vector<Solution>& sols, const Pose& start,
                                 double d_find, bool* unreachable = nullptr) {
  const int w = scene.width, h = scene.height;
  const double cs = scene.cell_size;
  auto covers = [&](int x, int y, const std::string& cat) {
    const double cx = (x + 0.5) * cs, cy = (y + 0.5) * cs;
    for (const auto& o : scene.objects)
      if (o.category == cat && std::hypot(cx - o.x, cy - o.y) <= d_find + 1e-12) return true;
    return false;
  };
  const int sx = static_cast<int>(std::floor(start.x / cs)), sy = static_cast<int>(std::floor(start.y / cs));

  // Reachable cells from start (plain flood fill).
  std::vector<char> reach(static_cast<std::size_t>(w * h), 0);
  std::queue<std::pair<int, int>> q;
  reach[static_cast<std::size_t>(sy * w + sx)] = 1;
  q.push({sx, sy});
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop();
    const int nx[4] = {x + 1, x - 1, x, x};
    const int ny[4] = {y, y, y + 1, y - 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
      if (scene.occupancy[static_cast<std::size_t>(ny[k] * w + nx[k])] != Cell::Free) continue;
      if (reach[static_cast<std::size_t>(ny[k] * w + nx[k])]) continue;
      reach[static_cast<std::size_t>(ny[k] * w + nx[k])] = 1;
      q.push({nx[k], ny[k]});
    }
  }
  auto reachable_cat = [&](const std::string& cat) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (reach[static_cast<std::size_t>(y * w + x)] && covers(x, y, cat)) return true;
    return false;
  };

  double best_sr = 0.0;
  std::vector<std::vector<std::string>> wanted(sols.size());
  for (std::size_t i = 0; i < sols.size(); ++i) {
    for (const auto& c : sols[i])
      if (reachable_cat(c)) wanted[i].push_back(c);
    best_sr = std::max(best_sr, static_cast<double>(wanted[i].size()) / static_cast<double>(sols[i].size()));
  }
  if (unreachable) *unreachable = best_sr == 0.0;
  if (best_sr == 0.0) return 0.0;

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sols.size(); ++i) {
    const double sr = static_cast<double>(wanted[i].size()) / static_cast<double>(sols[i].size());
    if (sr != best_sr) continue;
    const int m = static_cast<int>(wanted[i].size());
    const int full = (1 << m) - 1;
    auto mask_at = [&](int x, int y) {
      int mk = 0;
      for (int c = 0; c < m; ++c)
        if (covers(x, y, wanted[i][static_cast<std::size_t>(c)])) mk |= 1 << c;
      return mk;
    };
    using State = std::tuple<int, int, int, int>;  // dist, x, y, mask
    std::priority_queue<State, std::vector<State>, std::greater<>> pq;
    std::map<std::tuple<int, int, int>, int> dist;
    const int m0 = mask_at(sx, sy);
    pq.push({0, sx, sy, m0});
    dist[{sx, sy, m0}] = 0;
    while (!pq.empty()) {
      auto [d, x, y, mk] = pq.top();
      pq.pop();
      if (dist[{x, y, mk}] < d) continue;
      if (mk == full) {
        best = std::min(best, d * cs);
        break;
      }
      const int nx[4] = {x + 1, x - 1, x, x};
      const int ny[4] = {y, y, y + 1, y - 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
        if (scene.occupancy[static_cast<std::size_t>(ny[k] * w + nx[k])] != Cell::Free) continue;
        const int nm = mk | mask_at(nx[k], ny[k]);
        auto it = dist.find({nx[k], ny[k], nm});
        if (it != dist.end() && it->second <= d + 1) continue;
        dist[{nx[k], ny[k], nm}] = d + 1;
        pq.push({d + 1, nx[k], ny[k], nm});
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------- attribute losses
//
// Scalar-loop forward pass of the attribute losses with every stop-gradient
// operand, code assignment and match pair frozen to the values recorded at a
// base point. Differentiating this function numerically gives the gradient the
// training rule prescribes.

struct Frozen {
  std::vector<std::vector<double>> ins_attrs, obj_attrs;  // sg(IAF), sg(OAF)
  std::vector<std::vector<double>> ins_quant, obj_quant;  // sg(Q-IAF), sg(Q-OAF)
  std::vector<int> ins_code, obj_code;
  int match_i = 0, match_j = 0;
};

inline std::vector<double> mlp(const Mlp& m, const std::vector<double>& x) {
  std::vector<double> h(static_cast<std::size_t>(m.w1.rows()));
  for (Eigen::Index r = 0; r < m.w1.rows(); ++r) {
    double s = m.b1(r);
    for (Eigen::Index c = 0; c < m.w1.cols(); ++c) s += m.w1(r, c) * x[static_cast<std::size_t>(c)];
    h[static_cast<std::size_t>(r)] = s > 0 ? s : 0.0;
  }
  std::vector<double> y(static_cast<std::size_t>(m.w2.rows()));
  for (Eigen::Index r = 0; r < m.w2.rows(); ++r) {
    double s = m.b2(r);
    for (Eigen::Index c = 0; c < m.w2.cols(); ++c) s += m.w2(r, c) * h[static_cast<std::size_t>(c)];
    y[static_cast<std::size_t>(r)] = s;
  }
  return y;
}

inline std::vector<std::vector<double>> rows_of(const std::vector<double>& flat, int k, int d) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(d)));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = flat[static_cast<std::size_t>(i * d + j)];
  return out;
}

inline double mse_rows(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      const double e = a[i][j] - b[i][j];
      s += e * e;
      ++n;
    }
  return s / static_cast<double>(n);
}

inline std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
inline std::vector<std::vector<double>> rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r;
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    out.push_back(r);
  }
  return out;
}

struct ScalarInputs {
  std::vector<double> ins, obj;
  std::vector<std::vector<double>> ins_gt, obj_gt;
};

struct ScalarTerms {
  double attr, commit, vq, recon, match;
};

inline ScalarTerms scalar_terms(const AttributeModel& m, const ScalarInputs& in, const Frozen* frozen) {
  const int d = m.instruction.dim;
  const auto iaf = rows_of(mlp(m.instruction.encoder, in.ins), m.instruction.k, d);
  const auto oaf = rows_of(mlp(m.object.encoder, in.obj), m.object.k, d);
  auto flat = [](const std::vector<std::vector<double>>& r) {
    std::vector<double> f;
    for (const auto& row : r) f.insert(f.end(), row.begin(), row.end());
    return f;
  };
  const auto rec_i = mlp(m.instruction.decoder, flat(iaf));
  const auto rec_o = mlp(m.object.decoder, flat(oaf));

  auto nearest = [&](const std::vector<double>& v) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < m.codebook.codes.rows(); ++r) {
      double s = 0;
      for (int j = 0; j < d; ++j) {
        const double e = v[static_cast<std::size_t>(j)] - m.codebook.codes(r, j);
        s += e * e;
      }
      if (s < bd) {
        bd = s;
        best = static_cast<int>(r);
      }
    }
    return best;
  };
  auto code_rows = [&](const std::vector<int>& idx) {
    std::vector<std::vector<double>> out;
    for (int i : idx) {
      std::vector<double> r;
      for (int j = 0; j < d; ++j) r.push_back(m.codebook.codes(i, j));
      out.push_back(r);
    }
    return out;
  };

  std::vector<int> ci, co;
  for (const auto& r : iaf) ci.push_back(nearest(r));
  for (const auto& r : oaf) co.push_back(nearest(r));
  if (frozen) {
    ci = frozen->ins_code;
    co = frozen->obj_code;
  }
  const auto qi = code_rows(ci), qo = code_rows(co);

  ScalarTerms t{};
  t.attr = mse_rows(in.ins_gt, iaf) + mse_rows(in.obj_gt, oaf);
  if (frozen) {
    t.commit = mse_rows(iaf, frozen->ins_quant) + mse_rows(oaf, frozen->obj_quant);
    t.vq = mse_rows(qi, frozen->ins_attrs) + mse_rows(qo, frozen->obj_attrs);
  } else {
    t.commit = mse_rows(iaf, qi) + mse_rows(oaf, qo);
    t.vq = t.commit;
  }
  t.recon = mse_rows({rec_i}, {in.ins}) + mse_rows({rec_o}, {in.obj});
  auto pair_mse = [&](int i, int j) {
    double s = 0;
    for (int c = 0; c < d; ++c) {
      const double e = iaf[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] -
                       oaf[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
      s += e * e;
    }
    return s / d;
  };
  if (frozen) {
    t.match = pair_mse(frozen->match_i, frozen->match_j);
  } else {
    t.match = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m.instruction.k; ++i)
      for (int j = 0; j < m.object.k; ++j) t.match = std::min(t.match, pair_mse(i, j));
  }
  return t;
}

inline double weighted(const ScalarTerms& t, const LossWeights& w) {
  return w.attr * t.attr + w.vq * t.vq + w.commit * t.commit + w.recon * t.recon + w.match * t.match;
}

// ---------------------------------------------------------------- AUC

// Probability a random positive outscores a random negative (ties count 1/2).
inline double auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double s = 0.0;
  for (double p : pos)
    for (double n : neg) s += p > n ? 1.0 : p == n ? 0.5 : 0.0;
  return s / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace oracle
