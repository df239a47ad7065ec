#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hypood/hierarchy.hpp"
#include "hypood/protohead.hpp"

namespace hypood {

struct SynthSpec {
  // Children per node at each depth; {10, 10} gives 10 superclasses of 10 leaves.
  std::vector<int> branching{10, 10};
  // Fraction of leaves removed from the tree before anything else happens.
  double removal_fraction = 0.0;
  int feature_dim = 64;
  int train_per_class = 200;
  int test_per_class = 50;
  double sigma_w = 0.3;
  // Offset length between a depth-1 node and the root; halves at every level below.
  double base_step = 2.5;
  // Fraction of leaves held out as OOD classes.
  double holdout = 0.2;
  std::uint64_t seed = 0;
};

struct SynthData {
  Hierarchy hierarchy;     // every leaf, ID and OOD
  Hierarchy id_hierarchy;  // OOD leaves pruned
  std::vector<std::string> id_classes;
  std::vector<std::string> ood_classes;
  std::vector<std::string> node_names;  // row order of centers
  Matrix centers;
  LabeledFeatures train;
  LabeledFeatures test_id;
  LabeledFeatures test_ood;
};

// Complete tree named "root", "n3", "n3.7", ... ; removal_fraction of the leaves
// (rounded down) are dropped at random.
Hierarchy make_tree(const std::vector<int>& branching, double removal_fraction, std::uint64_t seed);

// Throws UsageError for invalid specs, including holdouts leaving no ID leaf.
SynthData generate(const SynthSpec& spec);

// Writes train.csv, test_id.csv, test_ood.csv, hierarchy.tsv and id_hierarchy.tsv.
void write_synth(const std::string& dir, const SynthData& data);

}  // namespace hypood
