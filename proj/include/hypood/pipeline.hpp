#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hypood/embedder.hpp"
#include "hypood/metrics.hpp"
#include "hypood/protohead.hpp"
#include "hypood/scoring.hpp"
#include "hypood/synthdata.hpp"

namespace hypood {

// gen-data -> embed -> train (hyperbolic and Euclidean heads) -> score -> eval.
struct PipelineConfig {
  SynthSpec data;
  EmbedConfig embed;
  TrainConfig train{20, 128, 0.1, 0.9, 5e-4, 0};
  std::vector<int> hidden{128, 128};
  double proto_scale = 0.95;
  double gamma = 10.0;
  double clip_norm = kDefaultClipNorm;
  std::vector<Method> methods{Method::msp, Method::tempscale, Method::energy, Method::gen, Method::knn};
  int knn_k = 300;
  bool euclidean_baseline = true;
  // Copied into every stage's seed.
  std::uint64_t seed = 0;
};

struct MethodReport {
  Method method = Method::msp;
  double temperature = 1.0;
  EvalReport eval;
};

struct HeadReport {
  Source source = Source::hyperbolic;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<MethodReport> methods;
  HierReport hier;  // OOD samples against their predicted ID leaf
  // Mean Poincare norm of test embeddings (hyperbolic head only).
  std::optional<double> mean_norm_id;
  std::optional<double> mean_norm_ood;

  const MethodReport& method(Method m) const;
};

struct PipelineResult {
  SynthData data;
  EmbedResult embedding;
  std::vector<Model> models;  // hyperbolic first, then the baseline if enabled
  std::vector<HeadReport> heads;
  double distortion = 0.0;
  double map = 0.0;
};

// Resolved configuration as JSON (the config echo written next to outputs).
std::string config_json(const PipelineConfig& cfg);

// Leaf predictions for every row of out, as class names.
std::vector<LeafPrediction> leaf_predictions(const Model& m, const ModelOutputs& out,
                                             const std::vector<std::string>& ground_truth);

// Runs the whole chain. With out_dir set, every artefact is written there:
// data/, embedding.tsv, embedding_trace.csv, model_<head>.json,
// train_trace_<head>.csv, scores/<head>_<method>_{id,ood}.txt,
// predictions_<head>.tsv, report.json and config.json.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::optional<std::string>& out_dir = std::nullopt);

std::string report_json(const PipelineResult& r);

void write_train_trace_csv(std::ostream& out, const std::vector<TrainEpoch>& trace);
// "# predicted<TAB>ground_truth" header, then one pair per line.
void write_predictions(std::ostream& out, const std::vector<LeafPrediction>& preds);
std::vector<LeafPrediction> read_predictions(std::istream& in);

}  // namespace hypood
