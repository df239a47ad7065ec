#include "hypood/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

namespace hypood {

namespace {

struct ClassCounts {
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
};

ClassCounts count_classes(std::span<const ScoredSample> samples) {
  ClassCounts c;
  for (const auto& s : samples) {
    if (!std::isfinite(s.score)) throw UsageError("scores must be finite");
    (s.is_id ? c.n_id : c.n_ood) += 1;
  }
  if (c.n_id == 0 || c.n_ood == 0) throw UsageError("need at least one ID and one OOD sample");
  return c;
}

// Samples sorted by descending score.
std::vector<ScoredSample> sorted_desc(std::span<const ScoredSample> samples) {
  std::vector<ScoredSample> v(samples.begin(), samples.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return v;
}

int hops_on_path(const Hierarchy& h, NodeId a, NodeId b) {
  const NodeId l = lca(h, a, b).node;
  return h.level(a) + h.level(b) - 2 * h.level(l);
}

NodeId leaf_index(const Hierarchy& h, const std::string& name) {
  const NodeId i = h.index_of(name);
  if (!h.is_leaf(i)) throw UsageError("'" + name + "' is not a leaf of the hierarchy");
  return i;
}

}  // namespace

std::vector<ScoredSample> make_samples(std::span<const double> id_scores, std::span<const double> ood_scores) {
  std::vector<ScoredSample> out;
  out.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) out.push_back({s, true});
  for (double s : ood_scores) out.push_back({s, false});
  return out;
}

double distortion_metric(const EmbeddingSet& emb, const Hierarchy& h, const GraphDistances& dist) {
  const EmbeddingSet aligned = emb.aligned_to(h);
  const std::size_t n = h.size();
  if (n < 2) return 0.0;
  const Curvature c = aligned.curvature();
  const Matrix& p = aligned.points();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d_b = distance(p.row(static_cast<Eigen::Index>(i)).transpose(),
                                  p.row(static_cast<Eigen::Index>(j)).transpose(), c);
      const double d_g = dist(i, j);
      sum += std::abs(d_b - d_g) / d_g;
    }
  }
  return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double distortion_metric(const EmbeddingSet& emb, const Hierarchy& h) {
  return distortion_metric(emb, h, all_pairs_distances(h));
}

double map_metric(const EmbeddingSet& emb, const Hierarchy& h) {
  const EmbeddingSet aligned = emb.aligned_to(h);
  const std::size_t n = h.size();
  const Curvature c = aligned.curvature();
  const Matrix& p = aligned.points();
  std::vector<double> others;
  std::vector<double> nbr;
  double total = 0.0;
  for (NodeId u = 0; u < n; ++u) {
    const auto neighbours = h.neighbors(u);
    others.clear();
    nbr.clear();
    for (NodeId v = 0; v < n; ++v) {
      if (v == u) continue;
      const double d = distance(p.row(static_cast<Eigen::Index>(u)).transpose(),
                                p.row(static_cast<Eigen::Index>(v)).transpose(), c);
      others.push_back(d);
      if (std::binary_search(neighbours.begin(), neighbours.end(), v)) nbr.push_back(d);
    }
    std::sort(others.begin(), others.end());
    std::sort(nbr.begin(), nbr.end());
    double ap = 0.0;
    for (double d : nbr) {
      const auto rank = std::upper_bound(others.begin(), others.end(), d) - others.begin();
      const auto hits = std::upper_bound(nbr.begin(), nbr.end(), d) - nbr.begin();
      ap += static_cast<double>(hits) / static_cast<double>(rank);
    }
    total += ap / static_cast<double>(nbr.size());
  }
  return total / static_cast<double>(n);
}

std::vector<LevelNormStats> level_norm_stats(const EmbeddingSet& emb, const Hierarchy& h) {
  const EmbeddingSet aligned = emb.aligned_to(h);
  std::vector<LevelNormStats> out;
  int level = 0;
  for (const auto& nodes : h.nodes_by_level()) {
    LevelNormStats s;
    s.level = level++;
    s.count = nodes.size();
    std::vector<double> norms;
    for (NodeId i : nodes) norms.push_back(poincare_norm(aligned.point(i)));
    s.mean = std::accumulate(norms.begin(), norms.end(), 0.0) / static_cast<double>(norms.size());
    for (double v : norms) s.variance += (v - s.mean) * (v - s.mean);
    s.variance /= static_cast<double>(norms.size());
    out.push_back(s);
  }
  return out;
}

double auroc(std::span<const ScoredSample> samples) {
  const auto counts = count_classes(samples);
  auto v = sorted_desc(samples);
  // Twice the Mann-Whitney statistic, kept integral so ties stay exact.
  std::uint64_t twice_u = 0;
  std::size_t ood_below = counts.n_ood;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    std::size_t id_tied = 0;
    std::size_t ood_tied = 0;
    while (j < v.size() && v[j].score == v[i].score) {
      (v[j].is_id ? id_tied : ood_tied) += 1;
      ++j;
    }
    ood_below -= ood_tied;
    twice_u += id_tied * (2 * ood_below + ood_tied);
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(counts.n_id) * static_cast<double>(counts.n_ood));
}

double aupr(std::span<const ScoredSample> samples) {
  const auto counts = count_classes(samples);
  auto v = sorted_desc(samples);
  std::size_t tp = 0;
  std::size_t fp = 0;
  double prev_recall = 0.0;
  double area = 0.0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j].score == v[i].score) {
      (v[j].is_id ? tp : fp) += 1;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(counts.n_id);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

FprAtTpr fpr_at_tpr(std::span<const ScoredSample> samples, double tpr) {
  if (!(tpr > 0.0 && tpr <= 1.0)) throw UsageError("target TPR must lie in (0, 1]");
  const auto counts = count_classes(samples);
  auto v = sorted_desc(samples);
  const double needed = tpr * static_cast<double>(counts.n_id) - 1e-9;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j].score == v[i].score) {
      (v[j].is_id ? tp : fp) += 1;
      ++j;
    }
    if (static_cast<double>(tp) >= needed) {
      return {static_cast<double>(fp) / static_cast<double>(counts.n_ood), v[i].score};
    }
    i = j;
  }
  return {1.0, v.back().score};  // unreachable: the lowest threshold accepts every ID sample
}

EvalReport evaluate_scores(std::span<const double> id_scores, std::span<const double> ood_scores) {
  const auto samples = make_samples(id_scores, ood_scores);
  EvalReport r;
  r.auroc = auroc(samples);
  r.aupr = aupr(samples);
  const auto f = fpr_at_tpr(samples, 0.95);
  r.fpr_at_95 = f.fpr;
  r.sigma = f.sigma;
  r.n_id = id_scores.size();
  r.n_ood = ood_scores.size();
  return r;
}

double h_dist(const Hierarchy& h, std::span<const LeafPrediction> predictions) {
  if (predictions.empty()) throw UsageError("h_dist needs at least one prediction");
  double sum = 0.0;
  for (const auto& p : predictions) {
    sum += lca(h, leaf_index(h, p.ground_truth), leaf_index(h, p.predicted)).height;
  }
  return sum / static_cast<double>(predictions.size());
}

HsiScores hsi(const Hierarchy& h, std::span<const LeafPrediction> predictions) {
  if (predictions.empty()) throw UsageError("hsi needs at least one prediction");
  HsiScores s;
  for (const auto& p : predictions) {
    const NodeId gt = leaf_index(h, p.ground_truth);
    const NodeId pred = leaf_index(h, p.predicted);
    const NodeId common = lca(h, gt, pred).node;
    const int d1 = std::max(1, hops_on_path(h, h.parent(gt), common));
    const int d2 = std::max(1, hops_on_path(h, gt, common));
    s.b1 += 1.0 / d1;
    s.b2 += 1.0 / (std::log(d2 + 1.0) * std::numbers::e);
  }
  const auto m = static_cast<double>(predictions.size());
  s.b1 /= m;
  s.b2 /= m;
  return s;
}

HierReport evaluate_hierarchy(const Hierarchy& h, std::span<const LeafPrediction> predictions) {
  const auto s = hsi(h, predictions);
  return {h_dist(h, predictions), s.b1, s.b2, predictions.size()};
}

std::string to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["auroc"] = r.auroc;
  j["aupr"] = r.aupr;
  j["fpr_at_95"] = r.fpr_at_95;
  j["sigma"] = r.sigma;
  j["n_id"] = r.n_id;
  j["n_ood"] = r.n_ood;
  return j.dump(2);
}

std::string to_json(const HierReport& r) {
  nlohmann::ordered_json j;
  j["h_dist"] = r.h_dist;
  j["hsi_b1"] = r.hsi_b1;
  j["hsi_b2"] = r.hsi_b2;
  j["m"] = r.m;
  return j.dump(2);
}

}  // namespace hypood
