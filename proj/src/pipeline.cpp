#include "hypood/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hypood/format.hpp"

namespace hypood {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const MethodReport& HeadReport::method(Method m) const {
  for (const auto& r : methods) {
    if (r.method == m) return r;
  }
  throw UsageError("method " + to_string(m) + " was not evaluated");
}

namespace {

ojson embed_config_json(const EmbedConfig& e) {
  ojson j;
  j["dim"] = e.dim;
  j["curvature"] = e.curvature;
  j["epochs"] = e.epochs;
  j["init_epochs"] = e.init_epochs;
  j["init_lr"] = e.init_lr;
  j["init_burnin_epochs"] = e.init_burnin_epochs;
  j["negatives"] = e.negatives;
  j["init_radius"] = e.init_radius;
  j["learning_rate"] = e.learning_rate;
  j["warmup_fraction"] = e.warmup_fraction;
  j["tau"] = e.tau ? ojson(*e.tau) : ojson("auto");
  j["seed"] = e.seed;
  return j;
}

ojson synth_json(const SynthSpec& s) {
  ojson j;
  j["branching"] = s.branching;
  j["removal_fraction"] = s.removal_fraction;
  j["feature_dim"] = s.feature_dim;
  j["train_per_class"] = s.train_per_class;
  j["test_per_class"] = s.test_per_class;
  j["sigma_w"] = s.sigma_w;
  j["base_step"] = s.base_step;
  j["holdout"] = s.holdout;
  j["seed"] = s.seed;
  return j;
}

ojson train_json(const TrainConfig& t) {
  ojson j;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["momentum"] = t.momentum;
  j["weight_decay"] = t.weight_decay;
  j["seed"] = t.seed;
  return j;
}

ojson eval_json(const EvalReport& r) {
  ojson j;
  j["auroc"] = r.auroc;
  j["aupr"] = r.aupr;
  j["fpr_at_95"] = r.fpr_at_95;
  j["sigma"] = r.sigma;
  j["n_id"] = r.n_id;
  j["n_ood"] = r.n_ood;
  return j;
}

ojson hier_json(const HierReport& r) {
  ojson j;
  j["h_dist"] = r.h_dist;
  j["hsi_b1"] = r.hsi_b1;
  j["hsi_b2"] = r.hsi_b2;
  j["m"] = r.m;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
}

double mean_poincare_norm(const Matrix& embeddings, Curvature c) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) s += poincare_norm(embeddings.row(i).transpose(), c);
  return s / static_cast<double>(embeddings.rows());
}

PipelineConfig with_seed(PipelineConfig cfg) {
  cfg.data.seed = cfg.seed;
  cfg.embed.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

}  // namespace

std::string config_json(const PipelineConfig& raw) {
  const PipelineConfig cfg = with_seed(raw);
  ojson j;
  j["command"] = "pipeline";
  j["seed"] = cfg.seed;
  j["data"] = synth_json(cfg.data);
  j["embed"] = embed_config_json(cfg.embed);
  j["train"] = train_json(cfg.train);
  j["hidden"] = cfg.hidden;
  j["proto_scale"] = cfg.proto_scale;
  j["gamma"] = cfg.gamma;
  j["clip_norm"] = cfg.clip_norm;
  std::vector<std::string> methods;
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["knn_k"] = cfg.knn_k;
  j["euclidean_baseline"] = cfg.euclidean_baseline;
  return j.dump(2) + "\n";
}

std::vector<LeafPrediction> leaf_predictions(const Model& m, const ModelOutputs& out,
                                             const std::vector<std::string>& ground_truth) {
  const auto pred = predict(out);
  if (pred.size() != ground_truth.size()) throw UsageError("prediction/label count mismatch");
  std::vector<LeafPrediction> res;
  res.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    res.push_back({m.classes()[static_cast<std::size_t>(pred[i])], ground_truth[i]});
  }
  return res;
}

void write_train_trace_csv(std::ostream& out, const std::vector<TrainEpoch>& trace) {
  out << "epoch,loss,train_accuracy,learning_rate\n";
  for (const auto& t : trace) {
    out << t.epoch << ',' << format_double(t.loss) << ',' << format_double(t.accuracy) << ','
        << format_double(t.learning_rate) << '\n';
  }
}

void write_predictions(std::ostream& out, const std::vector<LeafPrediction>& preds) {
  out << "# predicted\tground_truth\n";
  for (const auto& p : preds) out << p.predicted << '\t' << p.ground_truth << '\n';
}

std::vector<LeafPrediction> read_predictions(std::istream& in) {
  std::vector<LeafPrediction> preds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("predictions line " + std::to_string(lineno) + ": expected 'predicted<TAB>ground_truth'");
    }
    preds.push_back({std::string(fields[0]), std::string(fields[1])});
  }
  return preds;
}

PipelineResult run_pipeline(const PipelineConfig& raw, const std::optional<std::string>& out_dir) {
  const PipelineConfig cfg = with_seed(raw);
  PipelineResult r;
  r.data = generate(cfg.data);
  const Hierarchy& id_h = r.data.id_hierarchy;
  const GraphDistances dist = all_pairs_distances(id_h);
  r.embedding = train_balanced(id_h, dist, cfg.embed);
  r.distortion = distortion_metric(r.embedding.embedding, id_h, dist);
  r.map = map_metric(r.embedding.embedding, id_h);

  std::optional<fs::path> dir;
  if (out_dir) {
    dir = fs::path(*out_dir);
    fs::create_directories(*dir / "scores");
    write_synth((*dir / "data").string(), r.data);
    save_embedding_tsv((*dir / "embedding.tsv").string(), r.embedding.embedding);
    std::ofstream trace(*dir / "embedding_trace.csv");
    write_trace_csv(trace, r.embedding.trace);
    write_text(*dir / "config.json", config_json(cfg));
  }

  std::vector<int> sizes{cfg.data.feature_dim};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(cfg.embed.dim);

  std::vector<Source> heads{Source::hyperbolic};
  if (cfg.euclidean_baseline) heads.push_back(Source::euclidean);
  for (Source source : heads) {
    Model init;
    init.backbone = Backbone::random(sizes, cfg.seed);
    init.clip_norm = cfg.clip_norm;
    if (source == Source::hyperbolic) {
      init.head = scale_prototypes(r.embedding.embedding, r.data.id_classes, cfg.proto_scale, cfg.gamma);
    } else {
      init.head = baseline_euclidean_head(cfg.embed.dim, r.data.id_classes, cfg.seed);
    }
    TrainResult trained = train(std::move(init), r.data.train, cfg.train);
    const Model& model = trained.model;

    HeadReport rep;
    rep.source = source;
    const ModelOutputs train_out = infer(model, r.data.train.x);
    const ModelOutputs id_out = infer(model, r.data.test_id.x);
    const ModelOutputs ood_out = infer(model, r.data.test_ood.x);
    const auto train_labels = encode_labels(r.data.train.labels, model.classes());
    rep.train_accuracy = accuracy(model, r.data.train);
    rep.test_accuracy = accuracy(model, r.data.test_id);

    const FeatureBank bank(train_out.features);
    for (Method method : cfg.methods) {
      ScoreConfig sc;
      sc.method = method;
      sc.source = source;
      sc.k = cfg.knn_k;
      if (method == Method::tempscale) sc.temperature = fit_temperature(train_out.logits, train_labels);
      const auto id_scores = score_batch(sc, id_out, &bank);
      const auto ood_scores = score_batch(sc, ood_out, &bank);
      rep.methods.push_back({method, resolved_temperature(sc), evaluate_scores(id_scores, ood_scores)});
      if (dir) {
        const std::string stem = to_string(source) + "_" + to_string(method);
        save_scores((*dir / "scores" / (stem + "_id.txt")).string(), sc, id_scores);
        save_scores((*dir / "scores" / (stem + "_ood.txt")).string(), sc, ood_scores);
      }
    }
    const auto preds = leaf_predictions(model, ood_out, r.data.test_ood.labels);
    rep.hier = evaluate_hierarchy(r.data.hierarchy, preds);
    if (source == Source::hyperbolic) {
      const Curvature c = std::get<PrototypeHead>(model.head).curvature();
      rep.mean_norm_id = mean_poincare_norm(id_out.embeddings, c);
      rep.mean_norm_ood = mean_poincare_norm(ood_out.embeddings, c);
    }
    if (dir) {
      save_model((*dir / ("model_" + to_string(source) + ".json")).string(), model);
      std::ofstream tr(*dir / ("train_trace_" + to_string(source) + ".csv"));
      write_train_trace_csv(tr, trained.trace);
      std::ofstream pr(*dir / ("predictions_" + to_string(source) + ".tsv"));
      write_predictions(pr, preds);
    }
    r.models.push_back(model);
    r.heads.push_back(std::move(rep));
  }
  if (dir) write_text(*dir / "report.json", report_json(r));
  return r;
}

std::string report_json(const PipelineResult& r) {
  ojson j;
  j["embedding"] = {{"distortion", r.distortion}, {"map", r.map}};
  j["n_id_classes"] = r.data.id_classes.size();
  j["n_ood_classes"] = r.data.ood_classes.size();
  j["heads"] = ojson::array();
  for (const auto& h : r.heads) {
    ojson hj;
    hj["source"] = to_string(h.source);
    hj["train_accuracy"] = h.train_accuracy;
    hj["test_accuracy"] = h.test_accuracy;
    if (h.mean_norm_id) {
      hj["mean_norm_id"] = *h.mean_norm_id;
      hj["mean_norm_ood"] = *h.mean_norm_ood;
    }
    ojson mj;
    for (const auto& m : h.methods) {
      ojson e = eval_json(m.eval);
      e["T"] = m.temperature;
      mj[to_string(m.method)] = e;
    }
    hj["methods"] = mj;
    hj["hierarchy"] = hier_json(h.hier);
    j["heads"].push_back(hj);
  }
  return j.dump(2) + "\n";
}

}  // namespace hypood
