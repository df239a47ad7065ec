#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hypood/embedder.hpp"
#include "hypood/geometry.hpp"

namespace hypood {

using RowVector = Eigen::RowVectorXd;

// Feature rows with string labels. CSV layout: header naming the feature
// columns followed by a final "label" column.
struct LabeledFeatures {
  std::vector<std::string> columns;
  Matrix x;
  std::vector<std::string> labels;
  std::string split;

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(x.cols()); }
};

LabeledFeatures read_features_csv(std::istream& in, std::string split = {});
LabeledFeatures load_features_csv(const std::string& path, std::string split = {});
void write_features_csv(std::ostream& out, const LabeledFeatures& data);
void save_features_csv(const std::string& path, const LabeledFeatures& data);

// y = x W^T + b for a batch of row vectors x.
struct LinearLayer {
  Matrix w;  // out x in
  RowVector b;
};

// Multilayer perceptron with rectifier activations between layers and a
// linear output layer.
class Backbone {
 public:
  Backbone() = default;
  explicit Backbone(std::vector<LinearLayer> layers);
  // He-normal weights, zero biases. sizes = {input, hidden..., output}.
  static Backbone random(const std::vector<int>& sizes, std::uint64_t seed);

  int input_dim() const { return static_cast<int>(layers_.front().w.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().w.rows()); }
  std::vector<int> sizes() const;
  std::size_t parameter_count() const;

  const std::vector<LinearLayer>& layers() const { return layers_; }
  std::vector<LinearLayer>& layers() { return layers_; }

  Matrix forward(const Matrix& x) const;

  friend bool operator==(const Backbone& a, const Backbone& b);

 private:
  std::vector<LinearLayer> layers_;
};

// Gradients share the parameter layout of the layers they belong to.
using LayerGrads = std::vector<LinearLayer>;

class PrototypeHead {
 public:
  PrototypeHead() = default;
  // Prototypes must lie strictly inside the ball; gamma > 0.
  PrototypeHead(std::vector<std::string> classes, Matrix prototypes, Curvature c, double gamma = 10.0,
                double proto_scale = 0.95);

  const std::vector<std::string>& classes() const { return classes_; }
  const Matrix& prototypes() const { return prototypes_; }
  Curvature curvature() const { return c_; }
  double gamma() const { return gamma_; }
  double proto_scale() const { return proto_scale_; }
  std::size_t num_classes() const { return classes_.size(); }
  int dim() const { return static_cast<int>(prototypes_.cols()); }

  // d_B(z, p_k) in class order.
  Vector distances(ConstVec z) const;
  // -gamma * d_B(z, p_k) in class order.
  Vector logits(ConstVec z) const;
  Vector logits(const BallPoint& z) const;

  friend bool operator==(const PrototypeHead& a, const PrototypeHead& b);

 private:
  std::vector<std::string> classes_;
  Matrix prototypes_;
  Curvature c_;
  double gamma_ = 10.0;
  double proto_scale_ = 0.95;
};

// Leaf points of emb multiplied by proto_scale. Throws UsageError naming the
// first leaf missing from emb.
PrototypeHead scale_prototypes(const EmbeddingSet& emb, const std::vector<std::string>& leaves,
                               double proto_scale = 0.95, double gamma = 10.0);

// Affine softmax classifier used by the Euclidean baseline.
struct EuclideanHead {
  std::vector<std::string> classes;
  LinearLayer layer;

  friend bool operator==(const EuclideanHead& a, const EuclideanHead& b);
};

EuclideanHead baseline_euclidean_head(int feature_dim, std::vector<std::string> classes, std::uint64_t seed);

inline constexpr double kDefaultClipNorm = 6.0;

// Backbone outputs are norm-clipped to clip_norm before exp0.
BallPoint embed_features(ConstVec features, const Backbone& b, Curvature c, double clip_norm = kDefaultClipNorm);

struct Model {
  Backbone backbone;
  std::variant<PrototypeHead, EuclideanHead> head;
  double clip_norm = kDefaultClipNorm;

  bool hyperbolic() const { return std::holds_alternative<PrototypeHead>(head); }
  const std::vector<std::string>& classes() const;
  std::size_t class_index(const std::string& label) const;

  friend bool operator==(const Model&, const Model&) = default;
};

struct ModelOutputs {
  bool hyperbolic = true;
  Matrix features;    // raw backbone outputs, before clipping and exp0
  Matrix embeddings;  // ball points (hyperbolic heads only)
  Matrix distances;   // d_B to each prototype (hyperbolic heads only)
  Matrix logits;
};

ModelOutputs infer(const Model& m, const Matrix& x);
// argmax of the logits, as class indices.
std::vector<int> predict(const ModelOutputs& out);

// Class index of every label; throws UsageError for labels outside the class list.
std::vector<int> encode_labels(const std::vector<std::string>& labels, const std::vector<std::string>& classes);

// Mean negative log-softmax of -gamma d_B(z, p_y). Prototypes stay fixed; when
// grads is non-null it receives the backbone gradient.
double hyper_ce_loss(const Matrix& x, std::span<const int> y, const Backbone& b, const PrototypeHead& head,
                     double clip_norm = kDefaultClipNorm, LayerGrads* grads = nullptr);

// Mean softmax cross-entropy of the affine head. grads receives the backbone
// layers followed by the head layer.
double euclid_ce_loss(const Matrix& x, std::span<const int> y, const Backbone& b, const EuclideanHead& head,
                      LayerGrads* grads = nullptr);

double model_loss(const Model& m, const Matrix& x, std::span<const int> y, LayerGrads* grads = nullptr);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 128;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
};

struct TrainEpoch {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<TrainEpoch> trace;
};

// Mini-batch SGD with momentum, weight decay and a cosine-annealed rate.
// Throws NumericError if the loss becomes non-finite.
TrainResult train(Model model, const LabeledFeatures& data, const TrainConfig& cfg);

double accuracy(const Model& m, const LabeledFeatures& data);

// Self-describing JSON checkpoint (layer sizes, row-major weights, head data).
std::string model_to_json(const Model& m);
Model model_from_json(const std::string& text);
void save_model(const std::string& path, const Model& m);
Model load_model(const std::string& path);

}  // namespace hypood
