#pragma once

// Independent reference implementations used by the tests. They follow the
// textbook definitions directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "hypood/geometry.hpp"
#include "hypood/hierarchy.hpp"
#include "hypood/metrics.hpp"
#include "hypood/protohead.hpp"

namespace oracle {

using Big = boost::multiprecision::cpp_bin_float_quad;
using BigVec = std::vector<Big>;

inline BigVec big(const hypood::Vector& v) { return BigVec(v.data(), v.data() + v.size()); }

inline Big dot(const BigVec& a, const BigVec& b) {
  Big s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Big conformal_factor(const BigVec& x, Big c) {
  const Big l = 2 / (1 - c * dot(x, x));
  return l * l;
}

inline BigVec mobius_add(const BigVec& v, const BigVec& w, Big c) {
  const Big vw = dot(v, w), vv = dot(v, v), ww = dot(w, w);
  const Big a = 1 + 2 * c * vw + c * ww;
  const Big b = 1 - c * vv;
  const Big den = 1 + 2 * c * vw + c * c * vv * ww;
  BigVec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (a * v[i] + b * w[i]) / den;
  return out;
}

// (2 / sqrt c) atanh(sqrt c |(-x) (+) y|)
inline Big distance_atanh(const BigVec& x, const BigVec& y, Big c) {
  BigVec nx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) nx[i] = -x[i];
  const BigVec m = mobius_add(nx, y, c);
  const Big sc = sqrt(c);
  return 2 / sc * atanh(sc * sqrt(dot(m, m)));
}

// arccosh(1 + 2|x - y|^2 / ((1 - |x|^2)(1 - |y|^2))), unit curvature.
inline Big distance_acosh(const BigVec& x, const BigVec& y) {
  Big d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
  return acosh(1 + 2 * d2 / ((1 - dot(x, x)) * (1 - dot(y, y))));
}

inline BigVec exp0(const BigVec& v, Big c) {
  const Big n = sqrt(dot(v, v));
  BigVec out(v.size(), Big(0));
  if (n == 0) return out;
  const Big sc = sqrt(c);
  const Big f = tanh(sc * n) / (sc * n);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = f * v[i];
  return out;
}

inline Big softmax_max(const std::vector<double>& logits) {
  Big den = 0;
  Big best = -std::numeric_limits<double>::infinity();
  for (double l : logits) best = std::max(best, Big(l));
  for (double l : logits) den += exp(Big(l) - best);
  return 1 / den;
}

// Which backbone parameter to nudge and by how much.
struct Nudge {
  std::size_t layer = 0;
  bool bias = false;
  Eigen::Index row = 0, col = 0;
  Big delta = 0;
};

// Mean cross-entropy of -gamma d(exp0(clip(F(x))), p_k), evaluated entirely in
// extended precision from the double parameters plus an optional nudge.
inline Big hyper_ce_loss(const std::vector<hypood::LinearLayer>& layers, const hypood::Matrix& x,
                         const std::vector<int>& y, const hypood::Matrix& protos, double gamma, double clip,
                         const Nudge* nudge = nullptr) {
  auto weight = [&](std::size_t l, bool bias, Eigen::Index i, Eigen::Index j) {
    Big w = bias ? Big(layers[l].b(i)) : Big(layers[l].w(i, j));
    if (nudge && nudge->layer == l && nudge->bias == bias && nudge->row == i && (bias || nudge->col == j)) w += nudge->delta;
    return w;
  };
  Big total = 0;
  for (Eigen::Index n = 0; n < x.rows(); ++n) {
    BigVec a(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) a[static_cast<std::size_t>(j)] = x(n, j);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      BigVec next(static_cast<std::size_t>(layers[l].w.rows()));
      for (Eigen::Index i = 0; i < layers[l].w.rows(); ++i) {
        Big s = weight(l, true, i, 0);
        for (Eigen::Index j = 0; j < layers[l].w.cols(); ++j) s += weight(l, false, i, j) * a[static_cast<std::size_t>(j)];
        next[static_cast<std::size_t>(i)] = (l + 1 < layers.size() && s < 0) ? Big(0) : s;
      }
      a = std::move(next);
    }
    const Big norm = sqrt(dot(a, a));
    if (norm > clip)
      for (auto& v : a) v *= clip / norm;
    const BigVec z = exp0(a, 1);
    std::vector<Big> logits;
    Big best = -1e300;
    for (Eigen::Index k = 0; k < protos.rows(); ++k) {
      BigVec p(static_cast<std::size_t>(protos.cols()));
      for (Eigen::Index j = 0; j < protos.cols(); ++j) p[static_cast<std::size_t>(j)] = protos(k, j);
      logits.push_back(-gamma * distance_atanh(z, p, 1));
      best = std::max(best, logits.back());
    }
    Big sum = 0;
    for (const auto& l : logits) sum += exp(l - best);
    total += best + log(sum) - logits[static_cast<std::size_t>(y[static_cast<std::size_t>(n)])];
  }
  return total / x.rows();
}

// --- random helpers ----------------------------------------------------------

inline hypood::Vector random_in_ball(std::mt19937_64& rng, int dim, double max_norm, hypood::Curvature c = {}) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  hypood::Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = g(rng);
  return v.normalized() * (max_norm * c.radius() * std::pow(u(rng), 1.0 / dim));
}

inline hypood::Vector random_gauss(std::mt19937_64& rng, int dim, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  hypood::Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = g(rng);
  return v;
}

// --- graphs ------------------------------------------------------------------

inline std::vector<std::vector<int>> floyd_warshall(const hypood::Hierarchy& h) {
  const std::size_t n = h.size();
  const int inf = 1 << 28;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& e : h.edges()) {
    const auto a = h.index_of(e.parent), b = h.index_of(e.child);
    d[a][b] = d[b][a] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

// Ancestors of i including i itself, from i up to the root.
inline std::vector<hypood::NodeId> ancestors(const hypood::Hierarchy& h, hypood::NodeId i) {
  std::vector<hypood::NodeId> out{i};
  while (out.back() != h.root()) {
    // search the edge list rather than trusting parent()
    for (const auto& e : h.edges()) {
      if (h.index_of(e.child) == out.back()) {
        out.push_back(h.index_of(e.parent));
        break;
      }
    }
  }
  return out;
}

// Deepest common element of both ancestor chains.
inline hypood::NodeId lca(const hypood::Hierarchy& h, hypood::NodeId a, hypood::NodeId b) {
  const auto aa = ancestors(h, a);
  const auto bb = ancestors(h, b);
  for (auto x : aa) {
    if (std::find(bb.begin(), bb.end(), x) != bb.end()) return x;
  }
  return h.root();
}

inline int depth(const hypood::Hierarchy& h, hypood::NodeId a) { return static_cast<int>(ancestors(h, a).size()) - 1; }

// --- OOD metrics -----------------------------------------------------------

// Pairwise definition: P(score_id > score_ood) + 0.5 P(equal).
inline double auroc(const std::vector<double>& id, const std::vector<double>& ood) {
  double s = 0.0;
  for (double a : id)
    for (double b : ood) s += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return s / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

// Average precision over every distinct threshold, ID as the positive class.
inline double aupr(const std::vector<double>& id, const std::vector<double>& ood) {
  std::vector<double> thresholds(id);
  thresholds.insert(thresholds.end(), ood.begin(), ood.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double area = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (double a : id) tp += a >= t;
    for (double b : ood) fp += b >= t;
    const double recall = tp / static_cast<double>(id.size());
    area += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return area;
}

// Scan every candidate threshold from the top; first with TPR >= 0.95.
inline std::pair<double, double> fpr95(const std::vector<double>& id, const std::vector<double>& ood) {
  std::vector<double> thresholds(id);
  thresholds.insert(thresholds.end(), ood.begin(), ood.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (double a : id) tp += a >= t;
    for (double b : ood) fp += b >= t;
    if (tp * 100 >= 95 * static_cast<double>(id.size())) return {fp / static_cast<double>(ood.size()), t};
  }
  return {1.0, thresholds.back()};
}

}  // namespace oracle
