#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hypood/geometry.hpp"
#include "hypood/protohead.hpp"

namespace hypood {

// All scores follow the same convention: higher = more in-distribution.

enum class Source { hyperbolic, euclidean };
std::string to_string(Source s);
Source parse_source(const std::string& s);

enum class Method { msp, tempscale, energy, gen, knn };
std::string to_string(Method m);
Method parse_method(const std::string& s);

// One sample's logits in class order, tagged with the head that produced them.
struct LogitRecord {
  Vector logits;
  Source source = Source::hyperbolic;
};

Vector softmax(ConstVec logits);
double log_sum_exp(ConstVec v);

double msp(ConstVec logits);
double msp(const LogitRecord& r);
// msp of logits / T. Throws UsageError unless T > 0.
double temp_scale(ConstVec logits, double T);

// T log sum_k exp(-d_k / T) over distances to the class prototypes.
double energy(ConstVec distances, double T = 10.0);
// T log sum_k exp(f_k / T), i.e. the negated free energy of ordinary logits.
double energy_from_logits(ConstVec logits, double T = 1.0);

// -sum over the top_m largest probabilities of p^g (1 - p)^g.
// top_m = 0 means all classes. Throws UsageError unless 0 < gamma_g < 1.
double gen_score(ConstVec probs, double gamma_g = 0.1, int top_m = 0);

// Training-split features, stored unit-normalised (zero rows stay zero).
class FeatureBank {
 public:
  explicit FeatureBank(const Matrix& features);

  std::size_t size() const { return static_cast<std::size_t>(normalized_.rows()); }
  int dim() const { return static_cast<int>(normalized_.cols()); }
  const Matrix& normalized() const { return normalized_; }

 private:
  Matrix normalized_;
};

Vector unit_normalized(ConstVec v);

// Negative distance from the normalised query to its k-th nearest bank row.
// Throws UsageError when k is outside [1, bank size] or dimensions differ.
double knn_score(ConstVec query, const FeatureBank& bank, int k = 300);

// Temperature minimising the mean negative log-likelihood of the labels,
// searched over log T in [1e-2, 1e3].
double fit_temperature(const Matrix& logits, const std::vector<int>& labels);

struct ScoreConfig {
  Method method = Method::msp;
  Source source = Source::hyperbolic;
  // Unset: 10 for hyperbolic energy, 1 for Euclidean energy; tempscale requires it.
  std::optional<double> temperature;
  int k = 300;
  double gen_gamma = 0.1;
  int gen_top_m = 0;
};

// Temperature actually used by cfg (1 for methods without one).
double resolved_temperature(const ScoreConfig& cfg);

// One score per row of out, in row order. Throws UsageError when cfg.source
// disagrees with the head that produced out, or knn is requested without a bank.
std::vector<double> score_batch(const ScoreConfig& cfg, const ModelOutputs& out, const FeatureBank* bank = nullptr);

struct ScoreFile {
  std::string header;  // without the leading "# "
  std::vector<double> scores;
};

// "# method=<m> source=<s> T=<t> k=<k>" then one score per line. Fields that
// do not apply to the method are written as "-".
std::string score_header(const ScoreConfig& cfg);
void write_scores(std::ostream& out, const ScoreConfig& cfg, const std::vector<double>& scores);
void save_scores(const std::string& path, const ScoreConfig& cfg, const std::vector<double>& scores);
ScoreFile read_scores(std::istream& in);
ScoreFile load_scores(const std::string& path);

}  // namespace hypood
