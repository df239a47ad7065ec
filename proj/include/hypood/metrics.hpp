#pragma once

#include <span>
#include <string>
#include <vector>

#include "hypood/embedder.hpp"
#include "hypood/hierarchy.hpp"

namespace hypood {

// Higher score = more in-distribution. A sample is flagged OOD when score < sigma.
struct ScoredSample {
  double score = 0.0;
  bool is_id = false;
};

std::vector<ScoredSample> make_samples(std::span<const double> id_scores, std::span<const double> ood_scores);

struct EvalReport {
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr_at_95 = 0.0;
  double sigma = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
};

struct HierReport {
  double h_dist = 0.0;
  double hsi_b1 = 0.0;
  double hsi_b2 = 0.0;
  std::size_t m = 0;
};

// --- embedding quality -----------------------------------------------------

// Mean over unordered node pairs of |d_B - d_G| / d_G. Points are matched to
// hierarchy nodes by name, so row order of emb does not matter.
double distortion_metric(const EmbeddingSet& emb, const Hierarchy& h, const GraphDistances& dist);
double distortion_metric(const EmbeddingSet& emb, const Hierarchy& h);

// Mean average precision of each node's graph neighbours when all other nodes
// are ranked by hyperbolic distance. Ties count against the neighbour.
double map_metric(const EmbeddingSet& emb, const Hierarchy& h);

struct LevelNormStats {
  int level = 0;
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // population variance
};

std::vector<LevelNormStats> level_norm_stats(const EmbeddingSet& emb, const Hierarchy& h);

// --- OOD detection -----------------------------------------------------------

// All three throw UsageError unless both classes are present.
double auroc(std::span<const ScoredSample> samples);
double aupr(std::span<const ScoredSample> samples);

struct FprAtTpr {
  double fpr = 0.0;
  double sigma = 0.0;
};

// Largest threshold sigma with TPR(score >= sigma) >= tpr on the ID samples,
// and the OOD false-positive rate at that threshold.
FprAtTpr fpr_at_tpr(std::span<const ScoredSample> samples, double tpr = 0.95);

EvalReport evaluate_scores(std::span<const double> id_scores, std::span<const double> ood_scores);

// --- hierarchical metrics ----------------------------------------------------

struct LeafPrediction {
  std::string predicted;
  std::string ground_truth;
};

// Mean LCA height measured along the ground-truth branch.
double h_dist(const Hierarchy& h, std::span<const LeafPrediction> predictions);

struct HsiScores {
  double b1 = 0.0;
  double b2 = 0.0;
};

// b1 = mean 1/max(1, d(parent(gt), lca)); b2 = mean 1/(ln(max(1, d(gt, lca)) + 1) e),
// with d the graph hop count and lca = lca(gt, predicted).
HsiScores hsi(const Hierarchy& h, std::span<const LeafPrediction> predictions);

HierReport evaluate_hierarchy(const Hierarchy& h, std::span<const LeafPrediction> predictions);

std::string to_json(const EvalReport& r);
std::string to_json(const HierReport& r);

}  // namespace hypood
