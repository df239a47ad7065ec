// hypood command-line tool. Run `hypood <command> --help` for file formats.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hypood/embedder.hpp"
#include "hypood/format.hpp"
#include "hypood/hierarchy.hpp"
#include "hypood/metrics.hpp"
#include "hypood/pipeline.hpp"
#include "hypood/protohead.hpp"
#include "hypood/scoring.hpp"
#include "hypood/synthdata.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace hypood;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

// Tracks everything a command writes so a failed run leaves nothing behind.
class OutputGuard {
 public:
  const std::string& file(const std::string& path) {
    files_.push_back(path);
    return path;
  }
  void dir(const std::string& path) {
    if (!fs::exists(path)) dirs_.push_back(path);
  }
  void commit() { committed_ = true; }
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
    for (const auto& d : dirs_) fs::remove_all(d, ec);
  }

 private:
  std::vector<std::string> files_;
  std::vector<std::string> dirs_;
  bool committed_ = false;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  return out;
}

void write_config_echo(OutputGuard& guard, const std::string& path, const ojson& cfg) {
  auto out = open_out(guard.file(path));
  out << cfg.dump(2) << '\n';
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> v;
  for (auto f : split(s, ',')) {
    const double d = parse_double(f, what);
    if (d != static_cast<int>(d)) throw UsageError(what + ": '" + std::string(f) + "' is not an integer");
    v.push_back(static_cast<int>(d));
  }
  return v;
}

// Flat key/value rendering for --format tsv.
void flatten(const ojson& j, const std::string& prefix, std::ostream& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), out);
  } else if (j.is_number_float()) {
    out << prefix << '\t' << format_double(j.get<double>()) << '\n';
  } else {
    out << prefix << '\t' << (j.is_string() ? j.get<std::string>() : j.dump()) << '\n';
  }
}

void emit_report(const ojson& report, const std::string& format, const std::string& out_path, OutputGuard& guard) {
  std::ostringstream text;
  if (format == "tsv") {
    flatten(report, "", text);
  } else {
    text << report.dump(2) << '\n';
  }
  if (out_path.empty()) {
    std::cout << text.str();
  } else {
    auto out = open_out(guard.file(out_path));
    out << text.str();
  }
}

ojson eval_report_json(const EvalReport& r) { return ojson::parse(to_json(r)); }
ojson hier_report_json(const HierReport& r) { return ojson::parse(to_json(r)); }

// Distinct labels in first-appearance order.
std::vector<std::string> class_order(const std::vector<std::string>& labels) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (seen.insert(l).second) out.push_back(l);
  }
  return out;
}

// --- help text ---------------------------------------------------------------

const char* kHierarchyFormat = R"(
Hierarchy TSV: one "parent<TAB>child" edge per line, '#' starts a comment.
  # root -> superclass -> class
  root	vehicles
  vehicles	bus
)";

const char* kEmbeddingFormat = R"(
Embedding TSV: "#dim=<d> curvature=<c> seed=<s>" header, then one node per line.
  #dim=2 curvature=1 seed=0
  root	0.001	-0.002
  bus	0.61	0.35
Trace CSV: "epoch,L_d,L_n,total"; row 0 is the initialisation.
)";

const char* kFeaturesFormat = R"(
Features CSV: header naming the feature columns, last column "label".
  f0,f1,f2,label
  0.13,-1.2,0.5,n0.3
Model checkpoint: JSON with layer_sizes, row-major weights/biases, classes,
and either prototypes/gamma/proto_scale/curvature/clip_norm (hyperbolic)
or head_weights/head_bias (euclidean).
)";

const char* kScoreFormat = R"(
Score file: "# method=<m> source=<s> T=<t> k=<k>" header ('-' where not
applicable), then one score per line, in input row order. Higher = more ID.
  # method=energy source=hyperbolic T=10 k=-
  -3.2170873
Predictions TSV: "# predicted<TAB>ground_truth" header, then one pair per line.
  # predicted	ground_truth
  n0.1	n0.4
)";

const char* kReportFormat = R"(
Reports are JSON by default; --format tsv prints "key<TAB>value" lines.
  {"auroc": 0.93, "aupr": 0.95, "fpr_at_95": 0.31, "sigma": 0.87, "n_id": 4000, "n_ood": 1000}
  {"h_dist": 1.0, "hsi_b1": 1.0, "hsi_b2": 0.53, "m": 1000}
)";

// --- commands ----------------------------------------------------------------

struct EmbedArgs {
  std::string hierarchy, out, trace;
  EmbedConfig cfg;
  std::optional<double> tau;
};

int cmd_embed(const EmbedArgs& a) {
  OutputGuard guard;
  const Hierarchy h = load_hierarchy(a.hierarchy);
  EmbedConfig cfg = a.cfg;
  if (a.tau) cfg.tau = a.tau;
  const double tau = cfg.tau.value_or(default_tau(h));
  const EmbedResult r = train_balanced(h, all_pairs_distances(h), cfg);
  save_embedding_tsv(guard.file(a.out), r.embedding);
  if (!a.trace.empty()) {
    auto t = open_out(guard.file(a.trace));
    write_trace_csv(t, r.trace);
  }
  ojson c;
  c["command"] = "embed";
  c["hierarchy"] = a.hierarchy;
  c["out"] = a.out;
  c["trace"] = a.trace;
  c["dim"] = cfg.dim;
  c["curvature"] = cfg.curvature;
  c["epochs"] = cfg.epochs;
  c["init_epochs"] = cfg.init_epochs;
  c["init_lr"] = cfg.init_lr;
  c["learning_rate"] = cfg.learning_rate;
  c["warmup_fraction"] = cfg.warmup_fraction;
  c["tau"] = tau;
  c["seed"] = cfg.seed;
  write_config_echo(guard, a.out + ".config.json", c);
  guard.commit();
  return 0;
}

struct EmbedEvalArgs {
  std::string hierarchy, embeddings, format = "json", out;
};

int cmd_embed_eval(const EmbedEvalArgs& a) {
  OutputGuard guard;
  const Hierarchy h = load_hierarchy(a.hierarchy);
  const EmbeddingSet emb = load_embedding_tsv(a.embeddings);
  ojson r;
  r["distortion"] = distortion_metric(emb, h);
  r["map"] = map_metric(emb, h);
  r["level_norms"] = ojson::array();
  for (const auto& s : level_norm_stats(emb, h)) {
    r["level_norms"].push_back({{"level", s.level}, {"count", s.count}, {"mean", s.mean}, {"variance", s.variance}});
  }
  emit_report(r, a.format, a.out, guard);
  if (!a.out.empty()) {
    write_config_echo(guard, a.out + ".config.json",
                      {{"command", "embed-eval"}, {"hierarchy", a.hierarchy}, {"embeddings", a.embeddings}, {"format", a.format}});
  }
  guard.commit();
  return 0;
}

struct GenDataArgs {
  std::string out_dir, branching = "10,10";
  SynthSpec spec;
};

ojson synth_config(const SynthSpec& s) {
  return {{"branching", s.branching}, {"removal_fraction", s.removal_fraction}, {"feature_dim", s.feature_dim},
          {"train_per_class", s.train_per_class}, {"test_per_class", s.test_per_class}, {"sigma_w", s.sigma_w},
          {"base_step", s.base_step}, {"holdout", s.holdout}, {"seed", s.seed}};
}

int cmd_gen_data(GenDataArgs a) {
  OutputGuard guard;
  a.spec.branching = parse_int_list(a.branching, "--branching");
  const SynthData d = generate(a.spec);
  guard.dir(a.out_dir);
  write_synth(a.out_dir, d);
  for (const char* f : {"train.csv", "test_id.csv", "test_ood.csv", "hierarchy.tsv", "id_hierarchy.tsv"}) {
    guard.file((fs::path(a.out_dir) / f).string());
  }
  ojson c{{"command", "gen-data"}, {"out_dir", a.out_dir}};
  c.update(synth_config(a.spec));
  c["id_classes"] = d.id_classes.size();
  c["ood_classes"] = d.ood_classes;
  write_config_echo(guard, (fs::path(a.out_dir) / "config.json").string(), c);
  guard.commit();
  return 0;
}

struct TrainArgs {
  std::string features, embeddings, out, trace, hidden = "128,128";
  bool euclidean = false;
  int embed_dim = 64;
  double proto_scale = 0.95, gamma = 10.0, clip_norm = kDefaultClipNorm;
  TrainConfig cfg;
};

int cmd_train(const TrainArgs& a) {
  OutputGuard guard;
  if (a.euclidean == !a.embeddings.empty()) {
    throw UsageError("pass exactly one of --embeddings or --euclidean-baseline");
  }
  const LabeledFeatures data = load_features_csv(a.features, "train");
  const auto classes = class_order(data.labels);
  Model model;
  model.clip_norm = a.clip_norm;
  int out_dim = a.embed_dim;
  if (!a.euclidean) {
    const EmbeddingSet emb = load_embedding_tsv(a.embeddings);
    out_dim = emb.dim();
    model.head = scale_prototypes(emb, classes, a.proto_scale, a.gamma);
  } else {
    model.head = baseline_euclidean_head(out_dim, classes, a.cfg.seed);
  }
  std::vector<int> sizes{data.dim()};
  for (int s : parse_int_list(a.hidden, "--hidden")) sizes.push_back(s);
  sizes.push_back(out_dim);
  model.backbone = Backbone::random(sizes, a.cfg.seed);
  const TrainResult r = train(std::move(model), data, a.cfg);
  save_model(guard.file(a.out), r.model);
  if (!a.trace.empty()) {
    auto t = open_out(guard.file(a.trace));
    write_train_trace_csv(t, r.trace);
  }
  ojson c{{"command", "train"}, {"features", a.features}, {"embeddings", a.embeddings}, {"euclidean_baseline", a.euclidean},
          {"layer_sizes", sizes}, {"proto_scale", a.proto_scale}, {"gamma", a.gamma}, {"clip_norm", a.clip_norm},
          {"epochs", a.cfg.epochs}, {"batch_size", a.cfg.batch_size}, {"learning_rate", a.cfg.learning_rate},
          {"momentum", a.cfg.momentum}, {"weight_decay", a.cfg.weight_decay}, {"seed", a.cfg.seed},
          {"out", a.out}, {"trace", a.trace}, {"final_train_accuracy", r.trace.empty() ? 0.0 : r.trace.back().accuracy}};
  write_config_echo(guard, a.out + ".config.json", c);
  guard.commit();
  return 0;
}

struct ScoreArgs {
  std::string model, features, method, source, bank, out, predictions;
  double temperature = 0.0;
  int k = 300;
  double gen_gamma = 0.1;
  int gen_top_m = 0;
};

int cmd_score(const ScoreArgs& a) {
  OutputGuard guard;
  const Model model = load_model(a.model);
  const LabeledFeatures data = load_features_csv(a.features);
  ScoreConfig sc;
  sc.method = parse_method(a.method);
  sc.source = a.source.empty() ? (model.hyperbolic() ? Source::hyperbolic : Source::euclidean) : parse_source(a.source);
  sc.k = a.k;
  sc.gen_gamma = a.gen_gamma;
  sc.gen_top_m = a.gen_top_m;
  if (a.temperature != 0.0) sc.temperature = a.temperature;

  const ModelOutputs out = infer(model, data.x);
  std::optional<FeatureBank> bank;
  const bool needs_fit = sc.method == Method::tempscale && !sc.temperature;
  if (sc.method == Method::knn || needs_fit) {
    if (a.bank.empty()) throw UsageError("--bank (training features CSV) is required for knn and for fitting a tempscale temperature");
    const LabeledFeatures train = load_features_csv(a.bank, "train");
    const ModelOutputs train_out = infer(model, train.x);
    if (sc.method == Method::knn) bank.emplace(train_out.features);
    if (needs_fit) sc.temperature = fit_temperature(train_out.logits, encode_labels(train.labels, model.classes()));
  }
  const auto scores = score_batch(sc, out, bank ? &*bank : nullptr);
  save_scores(guard.file(a.out), sc, scores);
  if (!a.predictions.empty()) {
    auto p = open_out(guard.file(a.predictions));
    write_predictions(p, leaf_predictions(model, out, data.labels));
  }
  ojson c{{"command", "score"}, {"model", a.model}, {"features", a.features}, {"method", to_string(sc.method)},
          {"source", to_string(sc.source)}, {"T", resolved_temperature(sc)}, {"k", sc.k}, {"gen_gamma", sc.gen_gamma},
          {"gen_top_m", sc.gen_top_m}, {"bank", a.bank}, {"out", a.out}, {"predictions", a.predictions}};
  write_config_echo(guard, a.out + ".config.json", c);
  guard.commit();
  return 0;
}

struct EvalArgs {
  std::string id_scores, ood_scores, format = "json", out;
};

int cmd_eval(const EvalArgs& a) {
  OutputGuard guard;
  const ScoreFile id = load_scores(a.id_scores);
  const ScoreFile ood = load_scores(a.ood_scores);
  emit_report(eval_report_json(evaluate_scores(id.scores, ood.scores)), a.format, a.out, guard);
  if (!a.out.empty()) {
    write_config_echo(guard, a.out + ".config.json",
                      {{"command", "eval"}, {"id_scores", a.id_scores}, {"ood_scores", a.ood_scores}, {"format", a.format}});
  }
  guard.commit();
  return 0;
}

struct HierEvalArgs {
  std::string hierarchy, predictions, format = "json", out;
};

int cmd_hier_eval(const HierEvalArgs& a) {
  OutputGuard guard;
  const Hierarchy h = load_hierarchy(a.hierarchy);
  std::ifstream in(a.predictions);
  if (!in) throw UsageError("cannot open predictions file: " + a.predictions);
  const auto preds = read_predictions(in);
  emit_report(hier_report_json(evaluate_hierarchy(h, preds)), a.format, a.out, guard);
  if (!a.out.empty()) {
    write_config_echo(guard, a.out + ".config.json",
                      {{"command", "hier-eval"}, {"hierarchy", a.hierarchy}, {"predictions", a.predictions}, {"format", a.format}});
  }
  guard.commit();
  return 0;
}

struct PipelineArgs {
  std::string out_dir, branching = "10,10", hidden = "128,128", methods = "msp,tempscale,energy,gen,knn";
  bool no_baseline = false;
  PipelineConfig cfg;
};

int cmd_pipeline(PipelineArgs a) {
  OutputGuard guard;
  a.cfg.data.branching = parse_int_list(a.branching, "--branching");
  a.cfg.hidden = parse_int_list(a.hidden, "--hidden");
  a.cfg.methods.clear();
  for (auto m : split(a.methods, ',')) a.cfg.methods.push_back(parse_method(std::string(m)));
  a.cfg.euclidean_baseline = !a.no_baseline;
  guard.dir(a.out_dir);
  const PipelineResult r = run_pipeline(a.cfg, a.out_dir);
  std::cout << report_json(r);
  guard.commit();
  return 0;
}

void add_seed(CLI::App* app, std::uint64_t& seed) { app->add_option("--seed", seed, "random seed")->capture_default_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balanced hyperbolic embeddings and hyperbolic OOD scoring"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 2 usage or input error, 3 numerical failure, 1 other.");

  EmbedArgs embed;
  auto* c_embed = app.add_subcommand("embed", "Train balanced hyperbolic embeddings of a hierarchy");
  c_embed->add_option("--hierarchy", embed.hierarchy, "hierarchy TSV")->required();
  c_embed->add_option("--out", embed.out, "embedding TSV to write")->required();
  c_embed->add_option("--trace", embed.trace, "loss trace CSV to write");
  c_embed->add_option("--dim", embed.cfg.dim, "embedding dimension")->capture_default_str();
  c_embed->add_option("--curvature", embed.cfg.curvature, "ball curvature c > 0")->capture_default_str();
  c_embed->add_option("--epochs", embed.cfg.epochs, "balanced-phase epochs (0 = initialisation only)")->capture_default_str();
  c_embed->add_option("--init-epochs", embed.cfg.init_epochs, "warm-start epochs")->capture_default_str();
  c_embed->add_option("--lr", embed.cfg.learning_rate, "balanced-phase learning rate")->capture_default_str();
  c_embed->add_option("--tau", embed.tau, "norm-loss weight (default 0.01 for <= 2 levels, else 0.1)");
  add_seed(c_embed, embed.cfg.seed);
  c_embed->footer(std::string(kHierarchyFormat) + kEmbeddingFormat);

  EmbedEvalArgs ee;
  auto* c_ee = app.add_subcommand("embed-eval", "Distortion, MAP and per-level norms of an embedding");
  c_ee->add_option("--hierarchy", ee.hierarchy, "hierarchy TSV")->required();
  c_ee->add_option("--embeddings", ee.embeddings, "embedding TSV")->required();
  c_ee->add_option("--format", ee.format, "json or tsv")->check(CLI::IsMember({"json", "tsv"}))->capture_default_str();
  c_ee->add_option("--out", ee.out, "report path (default stdout)");
  c_ee->footer(std::string(kHierarchyFormat) + kEmbeddingFormat + kReportFormat);

  GenDataArgs gd;
  auto* c_gd = app.add_subcommand("gen-data", "Generate a synthetic hierarchical feature benchmark");
  c_gd->add_option("--out-dir", gd.out_dir, "output directory")->required();
  c_gd->add_option("--branching", gd.branching, "children per node at each depth")->capture_default_str();
  c_gd->add_option("--removal", gd.spec.removal_fraction, "fraction of leaves removed from the tree")->capture_default_str();
  c_gd->add_option("--feature-dim", gd.spec.feature_dim, "feature dimension")->capture_default_str();
  c_gd->add_option("--train-per-class", gd.spec.train_per_class)->capture_default_str();
  c_gd->add_option("--test-per-class", gd.spec.test_per_class)->capture_default_str();
  c_gd->add_option("--sigma-w", gd.spec.sigma_w, "intra-class noise")->capture_default_str();
  c_gd->add_option("--step", gd.spec.base_step, "depth-1 centre offset; halves per level")->capture_default_str();
  c_gd->add_option("--holdout", gd.spec.holdout, "fraction of leaves held out as OOD")->capture_default_str();
  add_seed(c_gd, gd.spec.seed);
  c_gd->footer(std::string("\nWrites train.csv, test_id.csv, test_ood.csv, hierarchy.tsv, id_hierarchy.tsv, config.json.\n") +
               kFeaturesFormat + kHierarchyFormat);

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train a backbone with a hyperbolic prototype head or a Euclidean baseline");
  c_tr->add_option("--features", tr.features, "training features CSV")->required();
  auto* emb_opt = c_tr->add_option("--embeddings", tr.embeddings, "embedding TSV supplying the prototypes");
  auto* eu_opt = c_tr->add_flag("--euclidean-baseline", tr.euclidean, "train the affine softmax baseline instead");
  emb_opt->excludes(eu_opt);
  c_tr->add_option("--out", tr.out, "model checkpoint JSON")->required();
  c_tr->add_option("--trace", tr.trace, "training trace CSV");
  c_tr->add_option("--hidden", tr.hidden, "hidden layer sizes")->capture_default_str();
  c_tr->add_option("--embed-dim", tr.embed_dim, "backbone output size for the baseline")->capture_default_str();
  c_tr->add_option("--proto-scale", tr.proto_scale)->capture_default_str();
  c_tr->add_option("--gamma", tr.gamma, "logit multiplier")->capture_default_str();
  c_tr->add_option("--clip-norm", tr.clip_norm, "backbone output norm clip before exp0")->capture_default_str();
  c_tr->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  c_tr->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  c_tr->add_option("--lr", tr.cfg.learning_rate, "initial rate (cosine annealed)")->capture_default_str();
  c_tr->add_option("--momentum", tr.cfg.momentum)->capture_default_str();
  c_tr->add_option("--weight-decay", tr.cfg.weight_decay)->capture_default_str();
  add_seed(c_tr, tr.cfg.seed);
  c_tr->footer(std::string(kFeaturesFormat) + kEmbeddingFormat);

  ScoreArgs sc;
  auto* c_sc = app.add_subcommand("score", "Score feature rows with a trained model");
  c_sc->add_option("--model", sc.model, "model checkpoint JSON")->required();
  c_sc->add_option("--features", sc.features, "features CSV to score")->required();
  c_sc->add_option("--method", sc.method, "msp, tempscale, energy, gen or knn")->required();
  c_sc->add_option("--source", sc.source, "hyperbolic or euclidean (must match the model)");
  c_sc->add_option("--bank", sc.bank, "training features CSV (knn bank, tempscale fit)");
  c_sc->add_option("--temperature", sc.temperature, "T for tempscale/energy (defaults: fitted / 10 hyperbolic / 1 euclidean)");
  c_sc->add_option("--k", sc.k, "knn neighbour rank")->capture_default_str();
  c_sc->add_option("--gen-gamma", sc.gen_gamma)->capture_default_str();
  c_sc->add_option("--gen-top-m", sc.gen_top_m, "0 = all classes")->capture_default_str();
  c_sc->add_option("--out", sc.out, "score file")->required();
  c_sc->add_option("--predictions", sc.predictions, "predicted-vs-label TSV for hier-eval");
  c_sc->footer(std::string(kFeaturesFormat) + kScoreFormat);

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "AUROC, AUPR and FPR@95 of ID vs OOD score files");
  c_ev->add_option("--id-scores", ev.id_scores)->required();
  c_ev->add_option("--ood-scores", ev.ood_scores)->required();
  c_ev->add_option("--format", ev.format, "json or tsv")->check(CLI::IsMember({"json", "tsv"}))->capture_default_str();
  c_ev->add_option("--out", ev.out, "report path (default stdout)");
  c_ev->footer(std::string(kScoreFormat) + kReportFormat);

  HierEvalArgs he;
  auto* c_he = app.add_subcommand("hier-eval", "H-Dist and HSI of OOD predictions against a hierarchy");
  c_he->add_option("--hierarchy", he.hierarchy, "full hierarchy TSV (ID and OOD leaves)")->required();
  c_he->add_option("--predictions", he.predictions, "predictions TSV")->required();
  c_he->add_option("--format", he.format, "json or tsv")->check(CLI::IsMember({"json", "tsv"}))->capture_default_str();
  c_he->add_option("--out", he.out, "report path (default stdout)");
  c_he->footer(std::string(kHierarchyFormat) + kScoreFormat + kReportFormat);

  PipelineArgs pl;
  auto* c_pl = app.add_subcommand("pipeline", "gen-data, embed, train both heads, score and evaluate");
  c_pl->add_option("--out-dir", pl.out_dir, "output directory")->required();
  c_pl->add_option("--branching", pl.branching)->capture_default_str();
  c_pl->add_option("--feature-dim", pl.cfg.data.feature_dim)->capture_default_str();
  c_pl->add_option("--train-per-class", pl.cfg.data.train_per_class)->capture_default_str();
  c_pl->add_option("--test-per-class", pl.cfg.data.test_per_class)->capture_default_str();
  c_pl->add_option("--sigma-w", pl.cfg.data.sigma_w)->capture_default_str();
  c_pl->add_option("--step", pl.cfg.data.base_step)->capture_default_str();
  c_pl->add_option("--holdout", pl.cfg.data.holdout)->capture_default_str();
  c_pl->add_option("--embed-dim", pl.cfg.embed.dim)->capture_default_str();
  c_pl->add_option("--embed-epochs", pl.cfg.embed.epochs)->capture_default_str();
  c_pl->add_option("--train-epochs", pl.cfg.train.epochs)->capture_default_str();
  c_pl->add_option("--hidden", pl.hidden)->capture_default_str();
  c_pl->add_option("--methods", pl.methods)->capture_default_str();
  c_pl->add_option("--k", pl.cfg.knn_k, "knn neighbour rank")->capture_default_str();
  c_pl->add_flag("--no-baseline", pl.no_baseline, "skip the Euclidean baseline head");
  add_seed(c_pl, pl.cfg.seed);
  c_pl->footer("\nWrites data/, embedding.tsv, embedding_trace.csv, model_<head>.json, train_trace_<head>.csv,\n"
               "scores/<head>_<method>_{id,ood}.txt, predictions_<head>.tsv, report.json and config.json;\n"
               "the report is also printed to stdout.\n");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*c_embed) return cmd_embed(embed);
    if (*c_ee) return cmd_embed_eval(ee);
    if (*c_gd) return cmd_gen_data(gd);
    if (*c_tr) return cmd_train(tr);
    if (*c_sc) return cmd_score(sc);
    if (*c_ev) return cmd_eval(ev);
    if (*c_he) return cmd_hier_eval(he);
    if (*c_pl) return cmd_pipeline(pl);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
