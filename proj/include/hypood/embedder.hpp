#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hypood/geometry.hpp"
#include "hypood/hierarchy.hpp"

namespace hypood {

struct EmbedConfig {
  int dim = 64;
  double curvature = 1.0;
  int epochs = 10000;
  // Poincare-embedding warm start.
  int init_epochs = 100;
  double init_lr = 0.3;
  int init_burnin_epochs = 10;
  int negatives = 10;
  double init_radius = 1e-3;
  // Balanced phase: constant rate with linear warmup over warmup_fraction * epochs.
  double learning_rate = 0.35;
  double warmup_fraction = 0.01;
  // Norm-loss weight; default_tau(h) when unset.
  std::optional<double> tau;
  std::uint64_t seed = 0;
};

// 0.01 for hierarchies with at most two levels below the root, 0.1 otherwise.
double default_tau(const Hierarchy& h);

class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  // Every row must lie strictly inside the ball.
  EmbeddingSet(std::vector<std::string> names, Matrix points, Curvature c, std::uint64_t seed = 0,
               int epochs_trained = 0);

  std::size_t size() const { return names_.size(); }
  int dim() const { return static_cast<int>(points_.cols()); }
  Curvature curvature() const { return c_; }
  std::uint64_t seed() const { return seed_; }
  int epochs_trained() const { return epochs_trained_; }

  const std::vector<std::string>& names() const { return names_; }
  const Matrix& points() const { return points_; }
  BallPoint point(std::size_t i) const;
  // Throws UsageError for unknown names.
  BallPoint point(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;

  // Same points reordered to h's node order. Throws UsageError if a node is missing.
  EmbeddingSet aligned_to(const Hierarchy& h) const;

  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b);

 private:
  std::vector<std::string> names_;
  Matrix points_;
  Curvature c_;
  std::uint64_t seed_ = 0;
  int epochs_trained_ = 0;
};

struct LossAndGrad {
  double value = 0.0;
  Matrix grad;  // Euclidean gradient, one row per node.
};

// Mean over unordered pairs of ((d_B - d_G) / d_G)^2. Rows of points follow
// the node order of dist.
LossAndGrad distortion_loss(const Matrix& points, Curvature c, const GraphDistances& dist);
LossAndGrad distortion_loss(const EmbeddingSet& emb, const GraphDistances& dist);

// (1/n) sum_l sum_{i in l} (|p_i|_B - m_l)^2 with m_l the mean Poincare norm of level l.
LossAndGrad norm_loss(const Matrix& points, Curvature c, const Hierarchy& h);
LossAndGrad norm_loss(const EmbeddingSet& emb, const Hierarchy& h);

struct TraceRow {
  int epoch = 0;
  double distortion = 0.0;
  double norm = 0.0;
  double total = 0.0;
};

struct EmbedResult {
  EmbeddingSet embedding;
  // Row 0 is the initialisation (ramp weight 0); rows 1..E follow each epoch's
  // loss evaluation, taken before that epoch's update.
  std::vector<TraceRow> trace;
};

// Random points in a ball of radius init_radius followed by init_epochs of the
// Poincare-embedding softmax objective over tree edges, trained with RSGD.
EmbeddingSet init_embeddings(const Hierarchy& h, const EmbedConfig& cfg);

// Balanced phase started from an explicit initialisation.
EmbedResult train_balanced_from(const EmbeddingSet& init, const Hierarchy& h,
                                const GraphDistances& dist, const EmbedConfig& cfg);

// init_embeddings followed by train_balanced_from.
EmbedResult train_balanced(const Hierarchy& h, const GraphDistances& dist, const EmbedConfig& cfg);

// "#dim=d curvature=c seed=s" header then "node<TAB>v1<TAB>...<TAB>vd" rows.
void write_embedding_tsv(std::ostream& out, const EmbeddingSet& emb);
void save_embedding_tsv(const std::string& path, const EmbeddingSet& emb);
EmbeddingSet read_embedding_tsv(std::istream& in);
EmbeddingSet load_embedding_tsv(const std::string& path);

// Header "epoch,L_d,L_n,total".
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

}  // namespace hypood
