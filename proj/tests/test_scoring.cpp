#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hypood/scoring.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hypood;
using oracle::Big;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

Big energy_oracle(const Vector& d, double T) {
  Big s = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) s += exp(-Big(d[i]) / T);
  return T * log(s);
}

// Negative distance to the k-th nearest unit-normalised bank row, by full sort.
double knn_oracle(const Vector& q, const Matrix& bank, int k) {
  const Vector qn = q.norm() > 0 ? Vector(q / q.norm()) : q;
  std::vector<double> d;
  for (Eigen::Index i = 0; i < bank.rows(); ++i) {
    Vector b = bank.row(i).transpose();
    if (b.norm() > 0) b /= b.norm();
    double s = 0.0;
    for (Eigen::Index j = 0; j < b.size(); ++j) s += (b[j] - qn[j]) * (b[j] - qn[j]);
    d.push_back(std::sqrt(s));
  }
  std::sort(d.begin(), d.end());
  return -d[static_cast<std::size_t>(k - 1)];
}

}  // namespace

TEST_CASE("MSP and temperature scaling") {
  CHECK(msp(vec({1, 1, 1, 1})) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(msp(vec({50, 0, 0})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(msp(vec({1e4, 0})) == 1.0);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const Vector l = oracle::random_gauss(rng, 2 + t % 20, 5.0);
    const std::vector<double> lv(l.data(), l.data() + l.size());
    const double m = msp(l);
    CHECK(std::abs(m - static_cast<double>(oracle::softmax_max(lv))) <= 1e-15);
    CHECK(m >= 1.0 / static_cast<double>(l.size()));
    CHECK(m <= 1.0);
    CHECK(temp_scale(l, 1.0) == m);
    std::vector<double> half;
    for (double x : lv) half.push_back(x / 2);
    CHECK(std::abs(temp_scale(l, 2.0) - static_cast<double>(oracle::softmax_max(half))) <= 1e-15);
    CHECK(temp_scale(l, 1e12) == doctest::Approx(1.0 / static_cast<double>(l.size())).epsilon(1e-9));
    CHECK(msp(LogitRecord{l, Source::euclidean}) == m);
  }
  CHECK_THROWS_AS(temp_scale(vec({1, 2}), 0.0), UsageError);
  CHECK_THROWS_AS(temp_scale(vec({1, 2}), -1.0), UsageError);
}

TEST_CASE("energy closed forms") {
  CHECK(std::abs(energy(vec({1.0}), 10.0) - (-1.0)) <= 1e-12);
  for (double d : {0.0, 0.5, 3.0, 40.0}) {
    for (int k : {2, 3, 7}) {
      const Vector dist = Vector::Constant(k, d);
      CHECK(std::abs(energy(dist, 10.0) - (10.0 * std::log(k) - d)) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(energy(vec({1.0}), 0.0), UsageError);
  CHECK_THROWS_AS(energy_from_logits(vec({1.0}), -2.0), UsageError);
}

TEST_CASE("energy against the high-precision oracle") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 8.0);
  for (int t = 0; t < 200; ++t) {
    Vector d(1 + t % 30);
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = u(rng);
    for (double T : {0.5, 1.0, 10.0}) {
      const double e = energy(d, T);
      CHECK(std::abs(e - static_cast<double>(energy_oracle(d, T))) <= 1e-12 * std::max(1.0, std::abs(e)));
      // naive evaluation agrees where it does not overflow
      double naive = 0.0;
      for (Eigen::Index i = 0; i < d.size(); ++i) naive += std::exp(-d[i] / T);
      CHECK(std::abs(e - T * std::log(naive)) <= 1e-10);
    }
    // monotone decreasing in every coordinate
    Vector bumped = d;
    bumped[t % d.size()] += 0.25;
    CHECK(energy(bumped) < energy(d));
    // the logits form is the same quantity
    CHECK(std::abs(energy_from_logits(-d, 1.0) - energy(d, 1.0)) <= 1e-12 * std::max(1.0, std::abs(energy(d, 1.0))));
  }
  // max-shift keeps huge distances finite
  CHECK(std::isfinite(energy(vec({1e5, 1e5 + 1}), 1.0)));
  CHECK(energy(vec({1e5, 1e5}), 1.0) == doctest::Approx(std::log(2.0) - 1e5).epsilon(1e-14));
}

TEST_CASE("GEN score") {
  CHECK(gen_score(vec({1, 0, 0})) == 0.0);
  CHECK(gen_score(vec({0.5, 0.5}), 0.5) == doctest::Approx(-1.0).epsilon(1e-15));
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const Vector p = softmax(oracle::random_gauss(rng, 2 + t % 10, 2.0));
    const double g = 0.05 + 0.9 * (t % 10) / 10.0;
    const int m = t % 3;
    std::vector<double> sorted(p.data(), p.data() + p.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::size_t take = m == 0 ? sorted.size() : std::min<std::size_t>(static_cast<std::size_t>(m), sorted.size());
    Big want = 0;
    for (std::size_t i = 0; i < take; ++i) want -= pow(Big(sorted[i]), g) * pow(1 - Big(sorted[i]), g);
    CHECK(std::abs(gen_score(p, g, m) - static_cast<double>(want)) <= 1e-13);
  }
  CHECK_THROWS_AS(gen_score(vec({0.5, 0.5}), 0.0), UsageError);
  CHECK_THROWS_AS(gen_score(vec({0.5, 0.5}), 1.0), UsageError);
}

TEST_CASE("softmax and log-sum-exp") {
  const Vector p = softmax(vec({1, 2, 3}));
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(log_sum_exp(vec({1000, 1000})) == doctest::Approx(1000 + std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(log_sum_exp(Vector(0)), UsageError);
}

TEST_CASE("KNN score") {
  std::mt19937_64 rng(4);
  SUBCASE("examples") {
    Matrix bank(3, 2);
    bank << 1, 0, 0, 2, -3, 0;
    const FeatureBank fb(bank);
    CHECK(knn_score(vec({2, 0}), fb, 1) == 0.0);
    CHECK(knn_score(vec({1, 1}), fb, 3) == doctest::Approx(knn_oracle(vec({1, 1}), bank, 3)).epsilon(1e-15));
    CHECK(knn_score(vec({0, 1}), fb, 3) == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));
    CHECK_THROWS_AS(knn_score(vec({1, 0}), fb, 4), UsageError);
    CHECK_THROWS_AS(knn_score(vec({1, 0}), fb, 0), UsageError);
    CHECK_THROWS_AS(knn_score(vec({1, 0, 0}), fb, 1), UsageError);
  }
  SUBCASE("1000-point bank against brute force") {
    Matrix bank(1000, 8);
    for (Eigen::Index i = 0; i < bank.rows(); ++i) bank.row(i) = oracle::random_gauss(rng, 8).transpose();
    const FeatureBank fb(bank);
    for (int t = 0; t < 50; ++t) {
      const Vector q = oracle::random_gauss(rng, 8, 3.0);
      CHECK(knn_score(q, fb, 10) == knn_oracle(q, bank, 10));
    }
    // bank order does not matter
    Matrix reversed = bank.colwise().reverse();
    const FeatureBank fr(reversed);
    const Vector q = oracle::random_gauss(rng, 8);
    CHECK(knn_score(q, fr, 10) == knn_score(q, fb, 10));
  }
  SUBCASE("duplicates beyond the k-th neighbour are irrelevant") {
    Matrix bank(20, 3);
    for (Eigen::Index i = 0; i < bank.rows(); ++i) bank.row(i) = oracle::random_gauss(rng, 3).transpose();
    const Vector q = oracle::random_gauss(rng, 3);
    std::vector<std::pair<double, Eigen::Index>> order;
    for (Eigen::Index i = 0; i < bank.rows(); ++i) order.push_back({(unit_normalized(q) - unit_normalized(bank.row(i).transpose())).norm(), i});
    std::sort(order.begin(), order.end());
    Matrix dup(21, 3);
    dup.topRows(20) = bank;
    dup.row(20) = bank.row(order.back().second);
    CHECK(knn_score(q, FeatureBank(dup), 5) == knn_score(q, FeatureBank(bank), 5));
  }
  SUBCASE("bank validation") {
    CHECK_THROWS_AS(FeatureBank{Matrix(0, 3)}, UsageError);
    Matrix nan = Matrix::Zero(2, 2);
    nan(0, 0) = std::nan("");
    CHECK_THROWS_AS(FeatureBank{nan}, UsageError);
    const FeatureBank zero(Matrix::Zero(2, 2));
    CHECK(zero.normalized() == Matrix::Zero(2, 2));
  }
}

TEST_CASE("temperature fit") {
  std::mt19937_64 rng(6);
  // logits whose labels are the argmax: sharper is better, so T shrinks
  Matrix confident(50, 3);
  std::vector<int> argmax;
  for (Eigen::Index i = 0; i < 50; ++i) {
    confident.row(i) = oracle::random_gauss(rng, 3).transpose();
    Eigen::Index k = 0;
    confident.row(i).maxCoeff(&k);
    argmax.push_back(static_cast<int>(k));
  }
  const double t_conf = fit_temperature(confident, argmax);
  CHECK(t_conf < 1.0);
  CHECK(t_conf >= 1e-2);
  // random labels: flattening helps, so T grows
  std::uniform_int_distribution<int> pick(0, 2);
  std::vector<int> noise;
  for (int i = 0; i < 50; ++i) noise.push_back(pick(rng));
  CHECK(fit_temperature(confident * 5.0, noise) > 1.0);
}

TEST_CASE("batch scoring") {
  std::mt19937_64 rng(7);
  ModelOutputs out;
  out.hyperbolic = true;
  out.features = Matrix(2, 3);
  out.features << 0.1, 0.2, 0.3, -0.4, 0.1, 0.0;
  out.distances = Matrix(2, 4);
  out.distances << 0.5, 1.0, 1.5, 2.0, 2.0, 0.1, 0.3, 0.9;
  out.logits = -10.0 * out.distances;
  out.embeddings = Matrix::Zero(2, 3);

  ScoreConfig cfg;
  for (Method m : {Method::msp, Method::energy, Method::gen}) {
    cfg.method = m;
    const auto s = score_batch(cfg, out);
    REQUIRE(s.size() == 2);
    for (Eigen::Index i = 0; i < 2; ++i) {
      const Vector l = out.logits.row(i).transpose();
      const Vector d = out.distances.row(i).transpose();
      const double want = m == Method::msp ? msp(l) : m == Method::energy ? energy(d, 10.0) : gen_score(softmax(l));
      CHECK(s[static_cast<std::size_t>(i)] == want);
    }
  }
  cfg.method = Method::tempscale;
  CHECK_THROWS_AS(score_batch(cfg, out), UsageError);
  cfg.temperature = 3.0;
  CHECK(score_batch(cfg, out)[1] == temp_scale(out.logits.row(1).transpose(), 3.0));

  cfg.method = Method::knn;
  cfg.temperature.reset();
  CHECK_THROWS_AS(score_batch(cfg, out), UsageError);
  Matrix bank_rows(4, 3);
  for (Eigen::Index i = 0; i < 4; ++i) bank_rows.row(i) = oracle::random_gauss(rng, 3).transpose();
  const FeatureBank bank(bank_rows);
  cfg.k = 2;
  CHECK(score_batch(cfg, out, &bank)[0] == knn_score(out.features.row(0).transpose(), bank, 2));

  cfg.method = Method::msp;
  cfg.source = Source::euclidean;
  CHECK_THROWS_AS(score_batch(cfg, out), UsageError);

  // Euclidean energy uses the logits and T = 1 by default
  ModelOutputs e = out;
  e.hyperbolic = false;
  cfg.method = Method::energy;
  CHECK(resolved_temperature(cfg) == 1.0);
  CHECK(score_batch(cfg, e)[0] == energy_from_logits(e.logits.row(0).transpose(), 1.0));
  cfg.source = Source::hyperbolic;
  CHECK(resolved_temperature(cfg) == 10.0);
}

TEST_CASE("method and source names") {
  for (Method m : {Method::msp, Method::tempscale, Method::energy, Method::gen, Method::knn}) CHECK(parse_method(to_string(m)) == m);
  CHECK(parse_source("euclidean") == Source::euclidean);
  CHECK_THROWS_AS(parse_method("odin"), UsageError);
  CHECK_THROWS_AS(parse_source("spherical"), UsageError);
}

TEST_CASE("score files") {
  ScoreConfig cfg;
  cfg.method = Method::energy;
  const std::vector<double> scores{-1.5, 0.1, 1.0 / 3.0, -1e-300};
  std::stringstream ss;
  write_scores(ss, cfg, scores);
  CHECK(ss.str().rfind("# method=energy source=hyperbolic T=10 k=-\n", 0) == 0);
  const ScoreFile back = read_scores(ss);
  CHECK(back.scores == scores);
  CHECK(back.header == score_header(cfg));

  std::stringstream empty;
  write_scores(empty, cfg, {});
  const std::string empty_text = empty.str();
  CHECK(std::count(empty_text.begin(), empty_text.end(), '\n') == 1);
  CHECK(read_scores(empty).scores.empty());

  cfg.method = Method::knn;
  CHECK(score_header(cfg) == "method=knn source=hyperbolic T=- k=300");

  std::istringstream bad("# method=msp\n0.5\nabc\n");
  CHECK_THROWS_AS(read_scores(bad), ParseError);
  std::istringstream no_header("0.5\n");
  const ScoreFile plain = read_scores(no_header);
  CHECK(plain.scores == std::vector<double>{0.5});
}
