#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "hypood/protohead.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hypood;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

PrototypeHead random_head(std::mt19937_64& rng, int classes, int dim, double gamma = 10.0) {
  Matrix p(classes, dim);
  std::vector<std::string> names;
  for (int k = 0; k < classes; ++k) {
    p.row(k) = oracle::random_in_ball(rng, dim, 0.9).transpose();
    names.push_back("c" + std::to_string(k));
  }
  return PrototypeHead(names, p, Curvature(1.0), gamma);
}

std::vector<int> random_labels(std::mt19937_64& rng, int n, int classes) {
  std::uniform_int_distribution<int> pick(0, classes - 1);
  std::vector<int> y;
  for (int i = 0; i < n; ++i) y.push_back(pick(rng));
  return y;
}

// Worst per-weight relative error between analytic and central-difference gradients.
template <class Loss>
double worst_relative_error(std::vector<LinearLayer>& layers, const LayerGrads& grads, Loss loss, double step = 1e-6) {
  double worst = 0.0;
  auto check = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + step;
    const double fp = loss();
    param = keep - step;
    const double fm = loss();
    param = keep;
    const double fd = (fp - fm) / (2 * step);
    const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-7});
    worst = std::max(worst, std::abs(analytic - fd) / denom);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (Eigen::Index i = 0; i < layers[l].w.rows(); ++i)
      for (Eigen::Index j = 0; j < layers[l].w.cols(); ++j) check(layers[l].w(i, j), grads[l].w(i, j));
    for (Eigen::Index i = 0; i < layers[l].b.size(); ++i) check(layers[l].b(i), grads[l].b(i));
  }
  return worst;
}

// Two Gaussian blobs on either side of a hyperplane.
LabeledFeatures separable_set(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  LabeledFeatures d;
  d.columns = {"f0", "f1", "f2", "f3"};
  d.x.resize(200, 4);
  for (int i = 0; i < 200; ++i) {
    const bool pos = i % 2 == 0;
    for (int j = 0; j < 4; ++j) d.x(i, j) = g(rng) + (j == 0 ? (pos ? 2.0 : -2.0) : 0.0);
    d.labels.push_back(pos ? "pos" : "neg");
  }
  d.split = "train";
  return d;
}

Model hyper_model(std::uint64_t seed) {
  Matrix p(2, 2);
  p << 0.6, 0.0, -0.6, 0.0;
  return Model{Backbone::random({4, 16, 2}, seed), PrototypeHead({"pos", "neg"}, p, Curvature(1.0)), kDefaultClipNorm};
}

Model euclid_model(std::uint64_t seed) {
  return Model{Backbone::random({4, 16, 2}, seed), baseline_euclidean_head(2, {"pos", "neg"}, seed + 1), kDefaultClipNorm};
}

Backbone identity_backbone(int dim) {
  return Backbone({LinearLayer{Matrix::Identity(dim, dim), RowVector::Zero(dim)}});
}

}  // namespace

TEST_CASE("hyperbolic cross-entropy gradient matches finite differences") {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 12; ++t) {
    const int in = 3 + t % 3, hidden = 4 + t % 4, out = 2 + t % 3, classes = 2 + t % 4;
    Backbone b = Backbone::random({in, hidden, out}, 100 + static_cast<std::uint64_t>(t));
    const PrototypeHead head = random_head(rng, classes, out, t % 2 ? 10.0 : 1.0);
    const Matrix x = random_matrix(rng, 6, in, 0.7);
    const auto y = random_labels(rng, 6, classes);
    // small clip radii exercise the clip Jacobian
    const double clip = t % 3 == 0 ? 0.3 : kDefaultClipNorm;
    LayerGrads g;
    hyper_ce_loss(x, y, b, head, clip, &g);
    REQUIRE(g.size() == b.layers().size());
    worst = std::max(worst, worst_relative_error(b.layers(), g, [&] { return hyper_ce_loss(x, y, b, head, clip); }));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("Euclidean cross-entropy gradient matches finite differences") {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  for (int t = 0; t < 6; ++t) {
    Backbone b = Backbone::random({4, 6, 3}, 10 + static_cast<std::uint64_t>(t));
    EuclideanHead head = baseline_euclidean_head(3, {"a", "b", "c", "d"}, static_cast<std::uint64_t>(t));
    head.layer.b = random_matrix(rng, 1, 4, 0.3);
    const Matrix x = random_matrix(rng, 5, 4);
    const auto y = random_labels(rng, 5, 4);
    LayerGrads g;
    euclid_ce_loss(x, y, b, head, &g);
    REQUIRE(g.size() == 3);
    std::vector<LinearLayer> all = b.layers();
    all.push_back(head.layer);
    auto loss = [&] {
      Backbone bb(std::vector<LinearLayer>(all.begin(), all.end() - 1));
      EuclideanHead hh{head.classes, all.back()};
      return euclid_ce_loss(x, y, bb, hh);
    };
    worst = std::max(worst, worst_relative_error(all, g, loss));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("loss closed forms") {
  std::mt19937_64 rng(5);
  const Backbone b = Backbone::random({3, 4, 2}, 1);
  const Matrix x = random_matrix(rng, 4, 3);
  const std::vector<int> zeros(4, 0);

  SUBCASE("one class") {
    Matrix p(1, 2);
    p << 0.3, 0.1;
    const PrototypeHead head({"only"}, p, Curvature(1.0));
    CHECK(hyper_ce_loss(x, zeros, b, head) == 0.0);
  }
  SUBCASE("equidistant prototypes give ln 2") {
    Matrix p(2, 2);
    p << 0.5, 0.0, -0.5, 0.0;
    const PrototypeHead head({"a", "b"}, p, Curvature(1.0));
    // a zero backbone sends every input to the origin
    Backbone zero({LinearLayer{Matrix::Zero(2, 3), RowVector::Zero(2)}});
    CHECK(hyper_ce_loss(x, zeros, zero, head) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("zero-weight affine head gives ln C") {
    EuclideanHead head{{"a", "b", "c"}, LinearLayer{Matrix::Zero(3, 2), RowVector::Zero(3)}};
    CHECK(euclid_ce_loss(x, zeros, b, head) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  }
  SUBCASE("loss is positive with several classes") {
    const PrototypeHead head = random_head(rng, 3, 2);
    CHECK(hyper_ce_loss(x, random_labels(rng, 4, 3), b, head) > 0.0);
  }
}

TEST_CASE("logits") {
  std::mt19937_64 rng(3);
  const PrototypeHead head = random_head(rng, 5, 3, 10.0);
  const Vector at2 = head.prototypes().row(2).transpose();
  const Vector l = head.logits(at2);
  CHECK(l[2] == 0.0);
  for (int k = 0; k < 5; ++k)
    if (k != 2) CHECK(l[k] < 0.0);
  const Vector o = head.logits(Vector::Zero(3));
  for (int k = 0; k < 5; ++k) CHECK(o[k] == doctest::Approx(-10.0 * poincare_norm(head.prototypes().row(k).transpose(), Curvature(1.0))).epsilon(1e-14));
  for (int t = 0; t < 50; ++t) {
    const Vector z = oracle::random_in_ball(rng, 3, 0.95);
    const Vector lz = head.logits(z);
    for (int k = 0; k < 5; ++k) {
      const double want = -10.0 * static_cast<double>(oracle::distance_atanh(oracle::big(z), oracle::big(head.prototypes().row(k).transpose()), 1));
      CHECK(std::abs(lz[k] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
  CHECK_THROWS_AS(head.logits(Vector::Zero(2)), UsageError);
}

TEST_CASE("prototype head validation") {
  Matrix p(2, 2);
  p << 0.5, 0.0, 0.0, 0.5;
  CHECK_THROWS_AS(PrototypeHead({"a", "b"}, p, Curvature(1.0), 0.0), UsageError);
  CHECK_THROWS_AS(PrototypeHead({"a"}, p, Curvature(1.0)), UsageError);
  CHECK_THROWS_AS(PrototypeHead({}, Matrix(0, 2), Curvature(1.0)), UsageError);
  p(1, 1) = 1.0;
  CHECK_THROWS_AS(PrototypeHead({"a", "b"}, p, Curvature(1.0)), UsageError);
}

TEST_CASE("prototype scaling") {
  const Hierarchy h = parse_edge_list("r\ta\nr\tb\n");
  Matrix pts(3, 2);
  pts << 0.0, 0.0, 0.999, 0.0, 0.0, -0.5;
  const EmbeddingSet emb(h.names(), pts, Curvature(1.0));
  const PrototypeHead same = scale_prototypes(emb, {"a", "b"}, 1.0);
  CHECK(same.prototypes().row(0) == pts.row(1));
  CHECK(same.prototypes().row(1) == pts.row(2));
  const PrototypeHead scaled = scale_prototypes(emb, {"a", "b"});
  CHECK(scaled.prototypes().row(0).norm() == doctest::Approx(0.94905).epsilon(1e-15));
  CHECK(scaled.gamma() == 10.0);
  CHECK(scaled.classes() == std::vector<std::string>{"a", "b"});
  try {
    scale_prototypes(emb, {"a", "zz"});
    FAIL("missing leaf accepted");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("zz") != std::string::npos);
  }
  CHECK_THROWS_AS(scale_prototypes(emb, {"a"}, 1.5), UsageError);
  CHECK_THROWS_AS(scale_prototypes(emb, {"a"}, 0.0), UsageError);
}

TEST_CASE("feature embedding") {
  const Curvature c(1.0);
  Backbone zero({LinearLayer{Matrix::Zero(2, 3), RowVector::Zero(2)}});
  CHECK(embed_features(Vector::Ones(3), zero, c).coords() == Vector::Zero(2));

  std::mt19937_64 rng(4);
  const Backbone id = identity_backbone(4);
  for (int t = 0; t < 20; ++t) {
    const Vector v = oracle::random_gauss(rng, 4, 0.6);
    const Vector z = embed_features(v, id, c).coords();
    CHECK((z - exp0(v, c)).norm() <= 1e-15);
    if (v.norm() < kDefaultClipNorm) CHECK(poincare_norm(z, c) == doctest::Approx(2.0 * v.norm()).epsilon(1e-12));
  }
  // clipped outputs stay inside the ball
  const Vector big = Vector::Constant(4, 1e6);
  CHECK(embed_features(big, id, c).coords().norm() == doctest::Approx(std::tanh(6.0)).epsilon(1e-14));
  Backbone nan_backbone({LinearLayer{Matrix::Constant(2, 3, std::numeric_limits<double>::max()), RowVector::Zero(2)}});
  CHECK_THROWS_AS(embed_features(Vector::Constant(3, 1e300), nan_backbone, c), NumericError);
}

TEST_CASE("training") {
  const LabeledFeatures data = separable_set(9);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 32;
  cfg.seed = 3;

  SUBCASE("zero learning rate leaves the weights unchanged") {
    TrainConfig still = cfg;
    still.learning_rate = 0.0;
    still.epochs = 3;
    const Model start = hyper_model(1);
    CHECK(train(start, data, still).model == start);
    const Model e = euclid_model(1);
    CHECK(train(e, data, still).model == e);
  }
  SUBCASE("separable set is learned by both heads") {
    const Model start = hyper_model(1);
    const auto hyper = train(start, data, cfg);
    CHECK(accuracy(hyper.model, data) >= 0.99);
    CHECK(std::get<PrototypeHead>(hyper.model.head).prototypes() == std::get<PrototypeHead>(start.head).prototypes());
    const auto euclid = train(euclid_model(1), data, cfg);
    CHECK(accuracy(euclid.model, data) >= 0.99);
    REQUIRE(hyper.trace.size() == 40);
    CHECK(hyper.trace.back().loss < hyper.trace.front().loss);
    CHECK(hyper.trace.front().learning_rate < cfg.learning_rate);
    CHECK(hyper.trace.back().learning_rate < 1e-3);
  }
  SUBCASE("seeded runs repeat exactly") {
    const auto a = train(euclid_model(2), data, cfg);
    const auto b = train(euclid_model(2), data, cfg);
    CHECK(a.model == b.model);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].loss == b.trace[i].loss);
  }
  SUBCASE("configuration errors") {
    TrainConfig bad = cfg;
    bad.learning_rate = -1.0;
    CHECK_THROWS_AS(train(hyper_model(1), data, bad), UsageError);
    LabeledFeatures wrong = data;
    wrong.labels[0] = "other";
    CHECK_THROWS_AS(train(hyper_model(1), wrong, cfg), UsageError);
  }
  SUBCASE("divergence names the epoch") {
    TrainConfig wild = cfg;
    wild.learning_rate = 1e200;
    wild.epochs = 3;
    try {
      train(euclid_model(1), data, wild);
      FAIL("divergence not detected");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }
}

TEST_CASE("decision rule") {
  std::mt19937_64 rng(31);
  const Backbone b = Backbone::random({5, 8, 3}, 4);
  const PrototypeHead head = random_head(rng, 6, 3, 10.0);
  const Model m{b, head, kDefaultClipNorm};
  const Matrix x = random_matrix(rng, 100, 5);
  const auto out = infer(m, x);
  const auto pred = predict(out);
  PrototypeHead cooler(head.classes(), head.prototypes(), head.curvature(), 0.37);
  const auto pred_cool = predict(infer(Model{b, cooler, kDefaultClipNorm}, x));
  CHECK(pred == pred_cool);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index nearest = 0;
    out.distances.row(i).minCoeff(&nearest);
    CHECK(pred[static_cast<std::size_t>(i)] == nearest);
    const Vector z = embed_features(x.row(i).transpose(), b, Curvature(1.0)).coords();
    CHECK((z.transpose() - out.embeddings.row(i)).norm() <= 1e-15);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto dir = test_util::temp_dir("ckpt");
  for (const Model& m : {hyper_model(7), euclid_model(7)}) {
    const std::string path = (dir / "m.json").string();
    save_model(path, m);
    const Model back = load_model(path);
    CHECK(back == m);
    CHECK(model_to_json(back) == model_to_json(m));
  }
  CHECK_THROWS_AS(model_from_json("{\"format\":\"other\"}"), ParseError);
  CHECK_THROWS_AS(model_from_json("not json"), ParseError);
  CHECK_THROWS_AS(load_model((dir / "missing.json").string()), UsageError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("features CSV") {
  const LabeledFeatures d = separable_set(1);
  std::stringstream ss;
  write_features_csv(ss, d);
  const LabeledFeatures back = read_features_csv(ss, "train");
  CHECK(back.columns == d.columns);
  CHECK(back.labels == d.labels);
  CHECK(back.x == d.x);
  CHECK(back.split == "train");

  std::istringstream no_label("a,b\n1,2\n");
  CHECK_THROWS_AS(read_features_csv(no_label), ParseError);
  std::istringstream short_row("a,b,label\n1,x\n");
  CHECK_THROWS_AS(read_features_csv(short_row), ParseError);
  std::istringstream bad_value("a,label\nfoo,x\n");
  CHECK_THROWS_AS(read_features_csv(bad_value), ParseError);
  std::istringstream inf_value("a,label\ninf,x\n");
  CHECK_THROWS_AS(read_features_csv(inf_value), ParseError);
}

TEST_CASE("label encoding and backbone shape checks") {
  CHECK(encode_labels({"b", "a", "b"}, {"a", "b"}) == std::vector<int>{1, 0, 1});
  CHECK_THROWS_AS(encode_labels({"c"}, {"a", "b"}), UsageError);
  const Backbone b = Backbone::random({3, 5, 2}, 0);
  CHECK(b.sizes() == std::vector<int>{3, 5, 2});
  CHECK(b.parameter_count() == 3 * 5 + 5 + 5 * 2 + 2);
  CHECK_THROWS_AS(b.forward(Matrix::Zero(1, 4)), UsageError);
  CHECK_THROWS_AS(Backbone({LinearLayer{Matrix::Zero(2, 3), RowVector::Zero(3)}}), UsageError);
  CHECK(Backbone::random({3, 5, 2}, 0) == b);
  CHECK_FALSE(Backbone::random({3, 5, 2}, 1) == b);
}
