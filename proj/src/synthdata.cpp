#include "hypood/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

namespace hypood {

namespace {

// Independent generator per stage so changing one stage does not shift the others.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t stage) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stage)};
  return std::mt19937_64(seq);
}

void check_spec(const SynthSpec& s) {
  if (s.branching.empty()) throw UsageError("synthetic tree needs at least one level");
  for (int b : s.branching) {
    if (b < 1) throw UsageError("branching factors must be >= 1");
  }
  if (!(s.removal_fraction >= 0.0 && s.removal_fraction < 1.0)) throw UsageError("removal fraction must lie in [0, 1)");
  if (s.feature_dim < 1) throw UsageError("feature dimension must be >= 1");
  if (s.train_per_class < 1 || s.test_per_class < 1) throw UsageError("per-class sample counts must be >= 1");
  if (!(s.sigma_w >= 0.0) || !std::isfinite(s.sigma_w)) throw UsageError("sigma_w must be finite and >= 0");
  if (!(s.base_step > 0.0) || !std::isfinite(s.base_step)) throw UsageError("base step must be positive");
  if (!(s.holdout > 0.0 && s.holdout < 1.0)) throw UsageError("holdout fraction must lie in (0, 1)");
}

LabeledFeatures empty_split(int m, std::string tag) {
  LabeledFeatures f;
  for (int j = 0; j < m; ++j) f.columns.push_back("f" + std::to_string(j));
  f.split = std::move(tag);
  return f;
}

void sample_class(LabeledFeatures& out, const std::string& label, const Vector& center, int count, double sigma,
                  std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Index start = out.x.rows();
  out.x.conservativeResize(start + count, center.size());
  for (int i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < center.size(); ++j) out.x(start + i, j) = center[j] + sigma * gauss(rng);
    out.labels.push_back(label);
  }
}

}  // namespace

Hierarchy make_tree(const std::vector<int>& branching, double removal_fraction, std::uint64_t seed) {
  if (branching.empty()) throw UsageError("synthetic tree needs at least one level");
  if (std::any_of(branching.begin(), branching.end(), [](int b) { return b < 1; })) {
    throw UsageError("branching factors must be >= 1");
  }
  if (!(removal_fraction >= 0.0 && removal_fraction < 1.0)) throw UsageError("removal fraction must lie in [0, 1)");
  std::vector<Edge> edges;
  std::vector<std::string> frontier{"root"};
  for (std::size_t depth = 0; depth < branching.size(); ++depth) {
    std::vector<std::string> next;
    for (const auto& p : frontier) {
      for (int k = 0; k < branching[depth]; ++k) {
        next.push_back(depth == 0 ? "n" + std::to_string(k) : p + "." + std::to_string(k));
        edges.push_back({p, next.back()});
      }
    }
    frontier = std::move(next);
  }
  Hierarchy full = Hierarchy::from_edges(edges);
  if (removal_fraction <= 0.0) return full;
  std::vector<NodeId> leaves = full.leaves();
  auto rng = stream(seed, 0);
  std::shuffle(leaves.begin(), leaves.end(), rng);
  const auto drop = static_cast<std::size_t>(removal_fraction * static_cast<double>(leaves.size()));
  std::vector<bool> keep(full.size(), true);
  for (std::size_t k = 0; k < drop; ++k) keep[leaves[k]] = false;
  return full.restricted_to(keep);
}

SynthData generate(const SynthSpec& spec) {
  check_spec(spec);
  SynthData d;
  d.hierarchy = make_tree(spec.branching, spec.removal_fraction, spec.seed);
  const Hierarchy& h = d.hierarchy;
  const int m = spec.feature_dim;

  // Centres: the root sits at the origin, every child is displaced from its
  // parent along a random direction by a step that halves per level.
  auto center_rng = stream(spec.seed, 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  d.node_names = h.names();
  d.centers = Matrix::Zero(static_cast<Eigen::Index>(h.size()), m);
  for (const auto& level_nodes : h.nodes_by_level()) {
    for (NodeId i : level_nodes) {
      if (i == h.root()) continue;
      Vector dir(m);
      for (int j = 0; j < m; ++j) dir[j] = gauss(center_rng);
      dir.normalize();
      const double step = spec.base_step * std::pow(0.5, h.level(i) - 1);
      d.centers.row(static_cast<Eigen::Index>(i)) =
          d.centers.row(static_cast<Eigen::Index>(h.parent(i))) + step * dir.transpose();
    }
  }

  std::vector<NodeId> leaves = h.leaves();
  const std::size_t n_leaves = leaves.size();
  auto n_ood = static_cast<std::size_t>(std::lround(spec.holdout * static_cast<double>(n_leaves)));
  n_ood = std::max<std::size_t>(n_ood, 1);
  if (n_ood >= n_leaves) {
    throw UsageError("holdout " + std::to_string(spec.holdout) + " leaves no in-distribution class among " +
                     std::to_string(n_leaves) + " leaves");
  }
  auto split_rng = stream(spec.seed, 2);
  std::shuffle(leaves.begin(), leaves.end(), split_rng);
  std::vector<NodeId> ood(leaves.begin(), leaves.begin() + static_cast<std::ptrdiff_t>(n_ood));
  std::vector<NodeId> id(leaves.begin() + static_cast<std::ptrdiff_t>(n_ood), leaves.end());
  std::sort(ood.begin(), ood.end());
  std::sort(id.begin(), id.end());
  for (NodeId i : id) d.id_classes.push_back(h.name(i));
  for (NodeId i : ood) d.ood_classes.push_back(h.name(i));
  d.id_hierarchy = h.restricted_to_leaves(d.id_classes);

  d.train = empty_split(m, "train");
  d.test_id = empty_split(m, "test_id");
  d.test_ood = empty_split(m, "test_ood");
  d.train.x.resize(0, m);
  d.test_id.x.resize(0, m);
  d.test_ood.x.resize(0, m);
  auto sample_rng = stream(spec.seed, 3);
  for (NodeId i : h.leaves()) {
    const Vector center = d.centers.row(static_cast<Eigen::Index>(i)).transpose();
    const bool is_ood = std::binary_search(ood.begin(), ood.end(), i);
    if (is_ood) {
      sample_class(d.test_ood, h.name(i), center, spec.test_per_class, spec.sigma_w, sample_rng);
    } else {
      sample_class(d.train, h.name(i), center, spec.train_per_class, spec.sigma_w, sample_rng);
      sample_class(d.test_id, h.name(i), center, spec.test_per_class, spec.sigma_w, sample_rng);
    }
  }
  return d;
}

void write_synth(const std::string& dir, const SynthData& data) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  save_features_csv((base / "train.csv").string(), data.train);
  save_features_csv((base / "test_id.csv").string(), data.test_id);
  save_features_csv((base / "test_ood.csv").string(), data.test_ood);
  save_hierarchy((base / "hierarchy.tsv").string(), data.hierarchy);
  save_hierarchy((base / "id_hierarchy.tsv").string(), data.id_hierarchy);
}

}  // namespace hypood
