#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hypood/embedder.hpp"
#include "hypood/geometry.hpp"
#include "hypood/hierarchy.hpp"
#include "hypood/metrics.hpp"
#include "hypood/pipeline.hpp"
#include "hypood/scoring.hpp"
#include "hypood/synthdata.hpp"

namespace py = pybind11;
using namespace hypood;

namespace {

Curvature curv(double c) { return Curvature(c); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Balanced hyperbolic embeddings, prototype heads and OOD scoring";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // geometry
  m.def("distance", [](const Vector& x, const Vector& y, double c) { return distance(x, y, curv(c)); },
        py::arg("x"), py::arg("y"), py::arg("c") = 1.0);
  m.def("mobius_add", [](const Vector& v, const Vector& w, double c) { return mobius_add(v, w, curv(c)); },
        py::arg("v"), py::arg("w"), py::arg("c") = 1.0);
  m.def("exp0", [](const Vector& v, double c) { return exp0_point(v, curv(c)).coords(); }, py::arg("v"),
        py::arg("c") = 1.0);
  m.def("poincare_norm", [](const Vector& x, double c) { return poincare_norm(x, curv(c)); }, py::arg("x"),
        py::arg("c") = 1.0);
  m.def("distance_grad", [](const Vector& x, const Vector& y, double c) { return distance_grad(x, y, curv(c)); },
        py::arg("x"), py::arg("y"), py::arg("c") = 1.0);

  // hierarchy
  py::class_<Hierarchy>(m, "Hierarchy")
      .def_static("parse", [](const std::string& text) { return parse_edge_list(text); }, py::arg("text"))
      .def_static("load", &load_hierarchy, py::arg("path"))
      .def_property_readonly("names", &Hierarchy::names)
      .def_property_readonly("leaves",
                             [](const Hierarchy& h) {
                               std::vector<std::string> out;
                               for (NodeId i : h.leaves()) out.push_back(h.name(i));
                               return out;
                             })
      .def("level", [](const Hierarchy& h, const std::string& n) { return h.level(h.index_of(n)); })
      .def("graph_distances",
           [](const Hierarchy& h) {
             const auto d = all_pairs_distances(h);
             Eigen::MatrixXi out(static_cast<Eigen::Index>(h.size()), static_cast<Eigen::Index>(h.size()));
             for (std::size_t i = 0; i < h.size(); ++i)
               for (std::size_t j = 0; j < h.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d(i, j);
             return out;
           })
      .def("serialize", &serialize_edge_list)
      .def("__len__", &Hierarchy::size);

  // embedder
  py::class_<EmbedConfig>(m, "EmbedConfig")
      .def(py::init<>())
      .def_readwrite("dim", &EmbedConfig::dim)
      .def_readwrite("curvature", &EmbedConfig::curvature)
      .def_readwrite("epochs", &EmbedConfig::epochs)
      .def_readwrite("init_epochs", &EmbedConfig::init_epochs)
      .def_readwrite("learning_rate", &EmbedConfig::learning_rate)
      .def_readwrite("tau", &EmbedConfig::tau)
      .def_readwrite("seed", &EmbedConfig::seed);

  py::class_<EmbeddingSet>(m, "EmbeddingSet")
      .def(py::init([](std::vector<std::string> names, const Matrix& points, double c) {
             return EmbeddingSet(std::move(names), points, curv(c));
           }),
           py::arg("names"), py::arg("points"), py::arg("c") = 1.0)
      .def_static("load", &load_embedding_tsv, py::arg("path"))
      .def("save", [](const EmbeddingSet& e, const std::string& path) { save_embedding_tsv(path, e); })
      .def_property_readonly("names", &EmbeddingSet::names)
      .def_property_readonly("points", &EmbeddingSet::points)
      .def_property_readonly("curvature", [](const EmbeddingSet& e) { return e.curvature().value(); });

  m.def(
      "embed",
      [](const Hierarchy& h, const EmbedConfig& cfg) {
        auto r = train_balanced(h, all_pairs_distances(h), cfg);
        std::vector<std::tuple<int, double, double, double>> trace;
        for (const auto& t : r.trace) trace.emplace_back(t.epoch, t.distortion, t.norm, t.total);
        return py::make_tuple(r.embedding, trace);
      },
      py::arg("hierarchy"), py::arg("config") = EmbedConfig{},
      "Balanced embedding of every node; returns (EmbeddingSet, [(epoch, L_d, L_n, total)]).");
  m.def("default_tau", &default_tau);

  // metrics
  m.def("distortion", [](const EmbeddingSet& e, const Hierarchy& h) { return distortion_metric(e, h); });
  m.def("mean_average_precision", &map_metric);
  m.def(
      "evaluate_scores",
      [](const std::vector<double>& id, const std::vector<double>& ood) {
        const auto r = evaluate_scores(id, ood);
        py::dict d;
        d["auroc"] = r.auroc;
        d["aupr"] = r.aupr;
        d["fpr_at_95"] = r.fpr_at_95;
        d["sigma"] = r.sigma;
        d["n_id"] = r.n_id;
        d["n_ood"] = r.n_ood;
        return d;
      },
      py::arg("id_scores"), py::arg("ood_scores"));
  m.def(
      "hierarchy_metrics",
      [](const Hierarchy& h, const std::vector<std::pair<std::string, std::string>>& preds) {
        std::vector<LeafPrediction> p;
        for (const auto& [pred, gt] : preds) p.push_back({pred, gt});
        const auto r = evaluate_hierarchy(h, p);
        py::dict d;
        d["h_dist"] = r.h_dist;
        d["hsi_b1"] = r.hsi_b1;
        d["hsi_b2"] = r.hsi_b2;
        d["m"] = r.m;
        return d;
      },
      py::arg("hierarchy"), py::arg("predictions"), "predictions are (predicted, ground_truth) leaf pairs");

  // scoring
  m.def("softmax", [](const Vector& l) { return softmax(l); });
  m.def("msp", [](const Vector& l) { return msp(l); });
  m.def("temp_scale", [](const Vector& l, double T) { return temp_scale(l, T); });
  m.def("energy", [](const Vector& d, double T) { return energy(d, T); }, py::arg("distances"), py::arg("T") = 10.0);
  m.def("energy_from_logits", [](const Vector& l, double T) { return energy_from_logits(l, T); }, py::arg("logits"),
        py::arg("T") = 1.0);
  m.def("gen_score", [](const Vector& p, double g, int top_m) { return gen_score(p, g, top_m); }, py::arg("probs"),
        py::arg("gamma") = 0.1, py::arg("top_m") = 0);
  m.def("knn_score", [](const Vector& q, const Matrix& bank, int k) { return knn_score(q, FeatureBank(bank), k); },
        py::arg("query"), py::arg("bank"), py::arg("k") = 300);

  // synthetic data and the end-to-end pipeline
  m.def(
      "generate_synth",
      [](const std::string& out_dir, const std::vector<int>& branching, int feature_dim, int train_per_class,
         int test_per_class, double sigma_w, double holdout, std::uint64_t seed) {
        SynthSpec s;
        s.branching = branching;
        s.feature_dim = feature_dim;
        s.train_per_class = train_per_class;
        s.test_per_class = test_per_class;
        s.sigma_w = sigma_w;
        s.holdout = holdout;
        s.seed = seed;
        const auto d = generate(s);
        write_synth(out_dir, d);
        return py::make_tuple(d.id_classes, d.ood_classes);
      },
      py::arg("out_dir"), py::arg("branching") = std::vector<int>{10, 10}, py::arg("feature_dim") = 64,
      py::arg("train_per_class") = 200, py::arg("test_per_class") = 50, py::arg("sigma_w") = 0.3,
      py::arg("holdout") = 0.2, py::arg("seed") = 0, "Writes the CSV/TSV files to out_dir; returns (id_classes, ood_classes).");

  m.def(
      "run_pipeline",
      [](const std::string& out_dir, const std::vector<int>& branching, int feature_dim, int train_per_class,
         int test_per_class, int embed_dim, int embed_epochs, int train_epochs, const std::vector<int>& hidden,
         int knn_k, std::uint64_t seed) {
        PipelineConfig cfg;
        cfg.data.branching = branching;
        cfg.data.feature_dim = feature_dim;
        cfg.data.train_per_class = train_per_class;
        cfg.data.test_per_class = test_per_class;
        cfg.embed.dim = embed_dim;
        cfg.embed.epochs = embed_epochs;
        cfg.train.epochs = train_epochs;
        cfg.hidden = hidden;
        cfg.knn_k = knn_k;
        cfg.seed = seed;
        return report_json(run_pipeline(cfg, out_dir));
      },
      py::arg("out_dir"), py::arg("branching") = std::vector<int>{10, 10}, py::arg("feature_dim") = 64,
      py::arg("train_per_class") = 200, py::arg("test_per_class") = 50, py::arg("embed_dim") = 64,
      py::arg("embed_epochs") = 10000, py::arg("train_epochs") = 20, py::arg("hidden") = std::vector<int>{128, 128},
      py::arg("knn_k") = 300, py::arg("seed") = 0, "Runs the whole chain and returns the report as JSON text.");
}
