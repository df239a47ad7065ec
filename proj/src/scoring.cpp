#include "hypood/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "hypood/format.hpp"

namespace hypood {

std::string to_string(Source s) { return s == Source::hyperbolic ? "hyperbolic" : "euclidean"; }

Source parse_source(const std::string& s) {
  if (s == "hyperbolic") return Source::hyperbolic;
  if (s == "euclidean") return Source::euclidean;
  throw UsageError("unknown score source '" + s + "' (expected hyperbolic or euclidean)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::msp: return "msp";
    case Method::tempscale: return "tempscale";
    case Method::energy: return "energy";
    case Method::gen: return "gen";
    case Method::knn: return "knn";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::msp, Method::tempscale, Method::energy, Method::gen, Method::knn}) {
    if (to_string(m) == s) return m;
  }
  throw UsageError("unknown scoring method '" + s + "' (expected msp, tempscale, energy, gen or knn)");
}

double log_sum_exp(ConstVec v) {
  if (v.size() == 0) throw UsageError("log-sum-exp of an empty vector");
  const double mx = v.maxCoeff();
  if (std::isinf(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

Vector softmax(ConstVec logits) {
  const double lse = log_sum_exp(logits);
  return (logits.array() - lse).exp().matrix();
}

double msp(ConstVec logits) { return softmax(logits).maxCoeff(); }

double msp(const LogitRecord& r) { return msp(r.logits); }

double temp_scale(ConstVec logits, double T) {
  if (!(T > 0.0)) throw UsageError("temperature must be positive");
  return msp(logits / T);
}

double energy(ConstVec distances, double T) {
  if (!(T > 0.0)) throw UsageError("temperature must be positive");
  return T * log_sum_exp(-distances / T);
}

double energy_from_logits(ConstVec logits, double T) {
  if (!(T > 0.0)) throw UsageError("temperature must be positive");
  return T * log_sum_exp(logits / T);
}

double gen_score(ConstVec probs, double gamma_g, int top_m) {
  if (!(gamma_g > 0.0 && gamma_g < 1.0)) throw UsageError("GEN gamma must lie in (0, 1)");
  const auto c = static_cast<int>(probs.size());
  if (top_m < 0 || top_m > c) throw UsageError("GEN top_m must lie in [0, number of classes]");
  const int m = top_m == 0 ? c : top_m;
  std::vector<double> p(probs.data(), probs.data() + c);
  std::partial_sort(p.begin(), p.begin() + m, p.end(), std::greater<>());
  double s = 0.0;
  for (int i = 0; i < m; ++i) s += std::pow(p[i], gamma_g) * std::pow(1.0 - p[i], gamma_g);
  return -s;
}

Vector unit_normalized(ConstVec v) {
  const double n = v.norm();
  if (n == 0.0) return v;
  return v / n;
}

FeatureBank::FeatureBank(const Matrix& features) : normalized_(features.rows(), features.cols()) {
  if (features.rows() == 0) throw UsageError("feature bank is empty");
  if (!features.allFinite()) throw UsageError("feature bank has non-finite values");
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    normalized_.row(i) = unit_normalized(features.row(i).transpose()).transpose();
  }
}

double knn_score(ConstVec query, const FeatureBank& bank, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > bank.size()) {
    throw UsageError("knn k = " + std::to_string(k) + " must lie in [1, bank size = " + std::to_string(bank.size()) + "]");
  }
  if (query.size() != bank.dim()) throw UsageError("query dimension does not match feature bank");
  const Vector q = unit_normalized(query);
  const Matrix& b = bank.normalized();
  std::vector<std::pair<double, Eigen::Index>> d(static_cast<std::size_t>(b.rows()));
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      const double t = b(i, j) - q[j];
      s += t * t;
    }
    d[static_cast<std::size_t>(i)] = {s, i};
  }
  // pair ordering breaks distance ties by bank row
  std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
  return -std::sqrt(d[static_cast<std::size_t>(k - 1)].first);
}

double fit_temperature(const Matrix& logits, const std::vector<int>& labels) {
  if (logits.rows() == 0 || static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw UsageError("temperature fit needs one label per logit row");
  }
  auto nll = [&](double log_t) {
    const double inv_t = std::exp(-log_t);
    double s = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const Vector z = logits.row(i).transpose() * inv_t;
      s += log_sum_exp(z) - z[labels[static_cast<std::size_t>(i)]];
    }
    return s;
  };
  // NLL is convex in 1/T, hence unimodal in log T: golden-section search.
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(1e-2);
  double hi = std::log(1e3);
  double x1 = hi - phi * (hi - lo);
  double x2 = lo + phi * (hi - lo);
  double f1 = nll(x1);
  double f2 = nll(x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = nll(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = nll(x2);
    }
  }
  return std::exp(0.5 * (lo + hi));
}

double resolved_temperature(const ScoreConfig& cfg) {
  switch (cfg.method) {
    case Method::tempscale:
      if (!cfg.temperature) throw UsageError("tempscale needs a temperature");
      return *cfg.temperature;
    case Method::energy:
      return cfg.temperature.value_or(cfg.source == Source::hyperbolic ? 10.0 : 1.0);
    default:
      return 1.0;
  }
}

std::vector<double> score_batch(const ScoreConfig& cfg, const ModelOutputs& out, const FeatureBank* bank) {
  const bool hyper = cfg.source == Source::hyperbolic;
  if (hyper != out.hyperbolic) {
    throw UsageError("score source '" + to_string(cfg.source) + "' does not match the model head");
  }
  if (cfg.method == Method::knn && bank == nullptr) throw UsageError("knn scoring needs a feature bank");
  const double T = resolved_temperature(cfg);
  if (!(T > 0.0)) throw UsageError("temperature must be positive");
  const auto n = out.logits.rows();
  std::vector<double> scores(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector logits = out.logits.row(i).transpose();
    double s = 0.0;
    switch (cfg.method) {
      case Method::msp: s = msp(logits); break;
      case Method::tempscale: s = temp_scale(logits, T); break;
      case Method::energy:
        s = hyper ? energy(out.distances.row(i).transpose(), T) : energy_from_logits(logits, T);
        break;
      case Method::gen: s = gen_score(softmax(logits), cfg.gen_gamma, cfg.gen_top_m); break;
      case Method::knn: s = knn_score(out.features.row(i).transpose(), *bank, cfg.k); break;
    }
    scores[static_cast<std::size_t>(i)] = s;
  }
  return scores;
}

std::string score_header(const ScoreConfig& cfg) {
  const bool has_t = cfg.method == Method::tempscale || cfg.method == Method::energy;
  return "method=" + to_string(cfg.method) + " source=" + to_string(cfg.source) +
         " T=" + (has_t ? format_double(resolved_temperature(cfg)) : "-") +
         " k=" + (cfg.method == Method::knn ? std::to_string(cfg.k) : "-");
}

void write_scores(std::ostream& out, const ScoreConfig& cfg, const std::vector<double>& scores) {
  out << "# " << score_header(cfg) << '\n';
  for (double s : scores) out << format_double(s) << '\n';
}

void save_scores(const std::string& path, const ScoreConfig& cfg, const std::vector<double>& scores) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write score file: " + path);
  write_scores(out, cfg, scores);
}

ScoreFile read_scores(std::istream& in) {
  ScoreFile f;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto start = line.find_first_not_of("# ");
      if (f.header.empty() && start != std::string::npos) f.header = line.substr(start);
      continue;
    }
    const double v = parse_double(line, "score file line " + std::to_string(lineno));
    if (!std::isfinite(v)) throw ParseError("score file line " + std::to_string(lineno) + ": non-finite score");
    f.scores.push_back(v);
  }
  return f;
}

ScoreFile load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open score file: " + path);
  return read_scores(in);
}

}  // namespace hypood
