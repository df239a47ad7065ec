#include "hypood/protohead.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "hypood/format.hpp"

namespace hypood {

namespace {

bool same_shape_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same_layer(const LinearLayer& a, const LinearLayer& b) {
  return same_shape_equal(a.w, b.w) && a.b.size() == b.b.size() && a.b == b.b;
}

struct ForwardCache {
  std::vector<Matrix> inputs;  // input of each layer
  Matrix out;
};

ForwardCache forward_cached(const std::vector<LinearLayer>& layers, const Matrix& x) {
  ForwardCache cache;
  cache.inputs.reserve(layers.size());
  Matrix a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix pre = a * layers[l].w.transpose();
    pre.rowwise() += layers[l].b;
    cache.inputs.push_back(std::move(a));
    if (l + 1 < layers.size()) {
      a = pre.cwiseMax(0.0);
    } else {
      cache.out = std::move(pre);
    }
  }
  return cache;
}

// Writes parameter gradients for every layer into grads[0 .. layers.size()).
void backward(const std::vector<LinearLayer>& layers, const ForwardCache& cache, Matrix g, LayerGrads& grads) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    grads[l].w.noalias() = g.transpose() * cache.inputs[l];
    grads[l].b = g.colwise().sum();
    if (l == 0) break;
    Matrix prev = g * layers[l].w;
    g = prev.cwiseProduct((cache.inputs[l].array() > 0.0).cast<double>().matrix());
  }
}

LayerGrads zeros_like(const std::vector<LinearLayer>& layers) {
  LayerGrads out;
  for (const auto& layer : layers) out.push_back({Matrix::Zero(layer.w.rows(), layer.w.cols()), RowVector::Zero(layer.b.size())});
  return out;
}

double log_sum_exp(const Eigen::Ref<const RowVector>& v) {
  const double mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().sum());
}

// Clip to clip_norm, returning the clipped vector.
Vector clip_vector(ConstVec u, double clip_norm) {
  const double r = u.norm();
  if (r > clip_norm) return (clip_norm / r) * u;
  return u;
}

void check_batch(const Matrix& x, std::span<const int> y, int input_dim) {
  if (x.rows() == 0) throw UsageError("empty batch");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw UsageError("feature/label count mismatch");
  if (x.cols() != input_dim) {
    throw UsageError("feature dimension " + std::to_string(x.cols()) + " does not match backbone input " +
                     std::to_string(input_dim));
  }
}

}  // namespace

// --- features CSV ------------------------------------------------------------

LabeledFeatures read_features_csv(std::istream& in, std::string split_tag) {
  LabeledFeatures data;
  data.split = std::move(split_tag);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("features CSV: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  for (auto f : split(line, ',')) data.columns.emplace_back(f);
  if (data.columns.empty() || data.columns.back() != "label") {
    throw ParseError("features CSV: last header column must be 'label'");
  }
  data.columns.pop_back();
  const std::size_t m = data.columns.size();
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    const std::string where = "features CSV line " + std::to_string(lineno);
    if (fields.size() != m + 1) throw ParseError(where + ": expected " + std::to_string(m + 1) + " fields");
    for (std::size_t j = 0; j < m; ++j) {
      const double v = parse_double(fields[j], where);
      if (!std::isfinite(v)) throw ParseError(where + ": non-finite feature value");
      values.push_back(v);
    }
    data.labels.emplace_back(fields[m]);
  }
  data.x = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(data.labels.size()), static_cast<Eigen::Index>(m));
  return data;
}

LabeledFeatures load_features_csv(const std::string& path, std::string split_tag) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open features file: " + path);
  return read_features_csv(in, std::move(split_tag));
}

void write_features_csv(std::ostream& out, const LabeledFeatures& data) {
  for (const auto& c : data.columns) out << c << ',';
  out << "label\n";
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) out << format_double(data.x(i, j)) << ',';
    out << data.labels[static_cast<std::size_t>(i)] << '\n';
  }
}

void save_features_csv(const std::string& path, const LabeledFeatures& data) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write features file: " + path);
  write_features_csv(out, data);
}

// --- backbone ------------------------------------------------------------------

Backbone::Backbone(std::vector<LinearLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw UsageError("backbone needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].b.size() != layers_[l].w.rows()) throw UsageError("backbone bias/weight shape mismatch");
    if (l > 0 && layers_[l].w.cols() != layers_[l - 1].w.rows()) throw UsageError("backbone layer sizes do not chain");
    if (!layers_[l].w.allFinite() || !layers_[l].b.allFinite()) throw UsageError("backbone has non-finite weights");
  }
}

Backbone Backbone::random(const std::vector<int>& sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw UsageError("backbone needs input and output sizes");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<LinearLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l] < 1 || sizes[l + 1] < 1) throw UsageError("layer sizes must be positive");
    const double stddev = std::sqrt(2.0 / sizes[l]);
    LinearLayer layer{Matrix(sizes[l + 1], sizes[l]), RowVector::Zero(sizes[l + 1])};
    for (Eigen::Index i = 0; i < layer.w.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.w.cols(); ++j) layer.w(i, j) = stddev * gauss(rng);
    }
    layers.push_back(std::move(layer));
  }
  return Backbone(std::move(layers));
}

std::vector<int> Backbone::sizes() const {
  std::vector<int> s{input_dim()};
  for (const auto& l : layers_) s.push_back(static_cast<int>(l.w.rows()));
  return s;
}

std::size_t Backbone::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
  return n;
}

Matrix Backbone::forward(const Matrix& x) const {
  if (x.cols() != input_dim()) throw UsageError("feature dimension does not match backbone input");
  return forward_cached(layers_, x).out;
}

bool operator==(const Backbone& a, const Backbone& b) {
  return a.layers_.size() == b.layers_.size() &&
         std::equal(a.layers_.begin(), a.layers_.end(), b.layers_.begin(), same_layer);
}

// --- heads -----------------------------------------------------------------------

PrototypeHead::PrototypeHead(std::vector<std::string> classes, Matrix prototypes, Curvature c, double gamma,
                             double proto_scale)
    : classes_(std::move(classes)), prototypes_(std::move(prototypes)), c_(c), gamma_(gamma), proto_scale_(proto_scale) {
  if (classes_.empty()) throw UsageError("prototype head needs at least one class");
  if (static_cast<Eigen::Index>(classes_.size()) != prototypes_.rows()) throw UsageError("class/prototype count mismatch");
  if (!(gamma_ > 0.0)) throw UsageError("gamma must be positive");
  for (Eigen::Index k = 0; k < prototypes_.rows(); ++k) {
    if (!prototypes_.row(k).allFinite() || !inside_ball(prototypes_.row(k).transpose(), c_)) {
      throw UsageError("prototype '" + classes_[static_cast<std::size_t>(k)] + "' is outside the ball");
    }
  }
}

Vector PrototypeHead::distances(ConstVec z) const {
  if (z.size() != prototypes_.cols()) throw UsageError("embedding dimension does not match prototypes");
  Vector d(prototypes_.rows());
  for (Eigen::Index k = 0; k < prototypes_.rows(); ++k) d[k] = distance(z, prototypes_.row(k).transpose(), c_);
  return d;
}

Vector PrototypeHead::logits(ConstVec z) const { return -gamma_ * distances(z); }

Vector PrototypeHead::logits(const BallPoint& z) const {
  if (!(z.curvature() == c_)) throw UsageError("embedding curvature does not match prototypes");
  return logits(z.coords());
}

bool operator==(const PrototypeHead& a, const PrototypeHead& b) {
  return a.classes_ == b.classes_ && same_shape_equal(a.prototypes_, b.prototypes_) && a.c_ == b.c_ &&
         a.gamma_ == b.gamma_ && a.proto_scale_ == b.proto_scale_;
}

PrototypeHead scale_prototypes(const EmbeddingSet& emb, const std::vector<std::string>& leaves, double proto_scale,
                               double gamma) {
  if (!(proto_scale > 0.0 && proto_scale <= 1.0)) throw UsageError("proto_scale must lie in (0, 1]");
  Matrix protos(static_cast<Eigen::Index>(leaves.size()), emb.dim());
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    protos.row(static_cast<Eigen::Index>(k)) = proto_scale * emb.point(leaves[k]).coords().transpose();
  }
  return {leaves, std::move(protos), emb.curvature(), gamma, proto_scale};
}

bool operator==(const EuclideanHead& a, const EuclideanHead& b) {
  return a.classes == b.classes && same_layer(a.layer, b.layer);
}

EuclideanHead baseline_euclidean_head(int feature_dim, std::vector<std::string> classes, std::uint64_t seed) {
  if (classes.empty()) throw UsageError("euclidean head needs at least one class");
  std::mt19937_64 rng(seed);
  const double bound = std::sqrt(6.0 / (feature_dim + static_cast<double>(classes.size())));
  std::uniform_real_distribution<double> unif(-bound, bound);
  EuclideanHead head{std::move(classes), {Matrix(0, 0), RowVector()}};
  const auto c = static_cast<Eigen::Index>(head.classes.size());
  head.layer.w.resize(c, feature_dim);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = 0; j < feature_dim; ++j) head.layer.w(i, j) = unif(rng);
  }
  head.layer.b = RowVector::Zero(c);
  return head;
}

BallPoint embed_features(ConstVec features, const Backbone& b, Curvature c, double clip_norm) {
  Matrix x = features.transpose();
  const Vector u = b.forward(x).row(0).transpose();
  if (!u.allFinite()) throw NumericError("backbone produced non-finite activations");
  return exp0_point(clip_vector(u, clip_norm), c);
}

// --- model ---------------------------------------------------------------------

const std::vector<std::string>& Model::classes() const {
  return std::visit([](const auto& h) -> const std::vector<std::string>& {
    if constexpr (std::is_same_v<std::decay_t<decltype(h)>, PrototypeHead>) {
      return h.classes();
    } else {
      return h.classes;
    }
  }, head);
}

std::size_t Model::class_index(const std::string& label) const {
  const auto& cls = classes();
  auto it = std::find(cls.begin(), cls.end(), label);
  if (it == cls.end()) throw UsageError("unknown class label '" + label + "'");
  return static_cast<std::size_t>(it - cls.begin());
}

std::vector<int> encode_labels(const std::vector<std::string>& labels, const std::vector<std::string>& classes) {
  std::unordered_map<std::string, int> index;
  for (std::size_t k = 0; k < classes.size(); ++k) index.emplace(classes[k], static_cast<int>(k));
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    auto it = index.find(l);
    if (it == index.end()) throw UsageError("label '" + l + "' is not an in-distribution class");
    out.push_back(it->second);
  }
  return out;
}

ModelOutputs infer(const Model& m, const Matrix& x) {
  ModelOutputs out;
  out.hyperbolic = m.hyperbolic();
  out.features = m.backbone.forward(x);
  if (!out.features.allFinite()) throw NumericError("backbone produced non-finite activations");
  if (const auto* head = std::get_if<PrototypeHead>(&m.head)) {
    const auto n = out.features.rows();
    out.embeddings.resize(n, out.features.cols());
    out.distances.resize(n, static_cast<Eigen::Index>(head->num_classes()));
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vector z = exp0(clip_vector(out.features.row(i).transpose(), m.clip_norm), head->curvature());
      out.embeddings.row(i) = z.transpose();
      out.distances.row(i) = head->distances(z).transpose();
    }
    out.logits = -head->gamma() * out.distances;
  } else {
    const auto& lin = std::get<EuclideanHead>(m.head).layer;
    out.logits = out.features * lin.w.transpose();
    out.logits.rowwise() += lin.b;
  }
  return out;
}

std::vector<int> predict(const ModelOutputs& out) {
  std::vector<int> pred(static_cast<std::size_t>(out.logits.rows()));
  for (Eigen::Index i = 0; i < out.logits.rows(); ++i) {
    Eigen::Index k = 0;
    out.logits.row(i).maxCoeff(&k);
    pred[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return pred;
}

// --- losses --------------------------------------------------------------------

double hyper_ce_loss(const Matrix& x, std::span<const int> y, const Backbone& b, const PrototypeHead& head,
                     double clip_norm, LayerGrads* grads) {
  check_batch(x, y, b.input_dim());
  if (b.output_dim() != head.dim()) throw UsageError("backbone output dimension does not match prototypes");
  const ForwardCache cache = forward_cached(b.layers(), x);
  const Matrix& u_all = cache.out;
  const auto n = x.rows();
  const auto classes = static_cast<Eigen::Index>(head.num_classes());
  const Curvature c = head.curvature();
  const double a = c.sqrt_c();
  const double inv_n = 1.0 / static_cast<double>(n);

  Matrix du = grads ? Matrix::Zero(n, u_all.cols()) : Matrix();
  RowVector logits(classes);
  Vector gz(u_all.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector u = u_all.row(i).transpose();
    if (!u.allFinite()) throw NumericError("backbone produced non-finite activations");
    const double r = u.norm();
    const bool clipped = r > clip_norm;
    const Vector uc = clipped ? Vector((clip_norm / r) * u) : u;
    const Vector z = exp0(uc, c);
    for (Eigen::Index k = 0; k < classes; ++k) logits[k] = -head.gamma() * distance(z, head.prototypes().row(k).transpose(), c);
    const int label = y[static_cast<std::size_t>(i)];
    const double lse = log_sum_exp(logits);
    total += lse - logits[label];
    if (!grads) continue;

    // dL/dd_k = -gamma (softmax_k - [k == y]) / n
    gz.setZero();
    for (Eigen::Index k = 0; k < classes; ++k) {
      const double dl_dd = -head.gamma() * (std::exp(logits[k] - lse) - (k == label ? 1.0 : 0.0)) * inv_n;
      const auto p = head.prototypes().row(k).transpose();
      if (dl_dd == 0.0 || (z - p).squaredNorm() == 0.0) continue;
      distance_grad_accumulate(z, p, c, dl_dd, gz);
    }
    // exp0 Jacobian: f(rho) I + (f'(rho)/rho) uc uc^T with f = tanh(a rho)/(a rho).
    const double rho = uc.norm();
    Vector g;
    if (rho == 0.0) {
      g = gz;
    } else {
      const double t = std::tanh(a * rho);
      const double f = t / (a * rho);
      const double sech2 = 1.0 - t * t;
      const double fprime = (a * rho * sech2 - t) / (a * rho * rho);
      g = f * gz + (fprime / rho * uc.dot(gz)) * uc;
    }
    if (clipped) g = (clip_norm / r) * (g - (u.dot(g) / (r * r)) * u);
    du.row(i) = g.transpose();
  }
  if (grads) {
    *grads = zeros_like(b.layers());
    backward(b.layers(), cache, std::move(du), *grads);
  }
  const double loss = total * inv_n;
  return loss;
}

double euclid_ce_loss(const Matrix& x, std::span<const int> y, const Backbone& b, const EuclideanHead& head,
                      LayerGrads* grads) {
  check_batch(x, y, b.input_dim());
  if (b.output_dim() != head.layer.w.cols()) throw UsageError("backbone output dimension does not match head");
  const ForwardCache cache = forward_cached(b.layers(), x);
  const auto n = x.rows();
  Matrix logits = cache.out * head.layer.w.transpose();
  logits.rowwise() += head.layer.b;
  Matrix dlogits(n, logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = y[static_cast<std::size_t>(i)];
    const double lse = log_sum_exp(logits.row(i));
    total += lse - logits(i, label);
    dlogits.row(i) = (logits.row(i).array() - lse).exp().matrix();
    dlogits(i, label) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grads) {
    dlogits *= inv_n;
    *grads = zeros_like(b.layers());
    grads->push_back({dlogits.transpose() * cache.out, dlogits.colwise().sum()});
    backward(b.layers(), cache, dlogits * head.layer.w, *grads);
  }
  return total * inv_n;
}

double model_loss(const Model& m, const Matrix& x, std::span<const int> y, LayerGrads* grads) {
  if (const auto* head = std::get_if<PrototypeHead>(&m.head)) {
    return hyper_ce_loss(x, y, m.backbone, *head, m.clip_norm, grads);
  }
  return euclid_ce_loss(x, y, m.backbone, std::get<EuclideanHead>(m.head), grads);
}

// --- training ------------------------------------------------------------------

namespace {

std::vector<LinearLayer*> trainable_layers(Model& m) {
  std::vector<LinearLayer*> out;
  for (auto& l : m.backbone.layers()) out.push_back(&l);
  if (auto* head = std::get_if<EuclideanHead>(&m.head)) out.push_back(&head->layer);
  return out;
}

}  // namespace

TrainResult train(Model model, const LabeledFeatures& data, const TrainConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw UsageError("invalid training configuration");
  if (cfg.learning_rate < 0.0) throw UsageError("learning rate must be >= 0");
  if (data.size() == 0) throw UsageError("training set is empty");
  if (data.dim() != model.backbone.input_dim()) {
    throw UsageError("feature dimension " + std::to_string(data.dim()) + " does not match backbone input " +
                     std::to_string(model.backbone.input_dim()));
  }
  const std::vector<int> labels = encode_labels(data.labels, model.classes());
  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index batch = std::min<Eigen::Index>(cfg.batch_size, n);
  const Eigen::Index steps_per_epoch = (n + batch - 1) / batch;
  const double total_steps = static_cast<double>(steps_per_epoch) * cfg.epochs;

  std::vector<LinearLayer*> params = trainable_layers(model);
  LayerGrads velocity;
  for (auto* p : params) velocity.push_back({Matrix::Zero(p->w.rows(), p->w.cols()), RowVector::Zero(p->b.size())});

  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainResult result;
  LayerGrads grads;
  Matrix xb;
  std::vector<int> yb;
  std::int64_t step = 0;
  double lr = cfg.learning_rate;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (Eigen::Index s = 0; s < steps_per_epoch; ++s) {
      const Eigen::Index begin = s * batch;
      const Eigen::Index end = std::min(n, begin + batch);
      xb.resize(end - begin, data.x.cols());
      yb.resize(static_cast<std::size_t>(end - begin));
      for (Eigen::Index i = begin; i < end; ++i) {
        xb.row(i - begin) = data.x.row(order[static_cast<std::size_t>(i)]);
        yb[static_cast<std::size_t>(i - begin)] = labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      }
      const double loss = model_loss(model, xb, yb, &grads);
      if (!std::isfinite(loss)) {
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(s));
      }
      loss_sum += loss * static_cast<double>(end - begin);
      lr = 0.5 * cfg.learning_rate * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
      for (std::size_t p = 0; p < params.size(); ++p) {
        velocity[p].w = cfg.momentum * velocity[p].w + grads[p].w + cfg.weight_decay * params[p]->w;
        velocity[p].b = cfg.momentum * velocity[p].b + grads[p].b + cfg.weight_decay * params[p]->b;
        params[p]->w -= lr * velocity[p].w;
        params[p]->b -= lr * velocity[p].b;
      }
      ++step;
    }
    result.trace.push_back({epoch, loss_sum / static_cast<double>(n), accuracy(model, data), lr});
  }
  result.model = std::move(model);
  return result;
}

double accuracy(const Model& m, const LabeledFeatures& data) {
  if (data.size() == 0) return 0.0;
  const auto labels = encode_labels(data.labels, m.classes());
  const auto pred = predict(infer(m, data.x));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// --- checkpoint --------------------------------------------------------------

namespace {

template <class M>
std::vector<double> matrix_json(const M& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) throw ParseError("checkpoint: weight array has wrong size");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

RowVector row_from_json(const nlohmann::json& j, Eigen::Index size) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != size) throw ParseError("checkpoint: bias array has wrong size");
  return Eigen::Map<const RowVector>(v.data(), size);
}

}  // namespace

std::string model_to_json(const Model& m) {
  nlohmann::ordered_json j;
  j["format"] = "hypood-model";
  j["version"] = 1;
  j["head"] = m.hyperbolic() ? "hyperbolic" : "euclidean";
  j["activation"] = "relu";
  j["layer_sizes"] = m.backbone.sizes();
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (const auto& l : m.backbone.layers()) {
    j["weights"].push_back(matrix_json(l.w));
    j["biases"].push_back(matrix_json(l.b));
  }
  j["classes"] = m.classes();
  if (const auto* head = std::get_if<PrototypeHead>(&m.head)) {
    j["gamma"] = head->gamma();
    j["proto_scale"] = head->proto_scale();
    j["curvature"] = head->curvature().value();
    j["clip_norm"] = m.clip_norm;
    j["prototypes"] = matrix_json(head->prototypes());
  } else {
    const auto& lin = std::get<EuclideanHead>(m.head).layer;
    j["head_weights"] = matrix_json(lin.w);
    j["head_bias"] = matrix_json(lin.b);
  }
  return j.dump();
}

Model model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  try {
    if (j.value("format", "") != "hypood-model") throw ParseError("checkpoint: not a hypood model");
    const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
    if (sizes.size() < 2 || j.at("weights").size() + 1 != sizes.size()) throw ParseError("checkpoint: inconsistent layer sizes");
    std::vector<LinearLayer> layers;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      layers.push_back({matrix_from_json(j["weights"][l], sizes[l + 1], sizes[l]), row_from_json(j["biases"][l], sizes[l + 1])});
    }
    Model m;
    m.backbone = Backbone(std::move(layers));
    auto classes = j.at("classes").get<std::vector<std::string>>();
    const auto c = static_cast<Eigen::Index>(classes.size());
    const Eigen::Index d = sizes.back();
    if (j.at("head") == "hyperbolic") {
      m.clip_norm = j.at("clip_norm").get<double>();
      m.head = PrototypeHead(std::move(classes), matrix_from_json(j.at("prototypes"), c, d),
                             Curvature(j.at("curvature").get<double>()), j.at("gamma").get<double>(),
                             j.at("proto_scale").get<double>());
    } else {
      m.head = EuclideanHead{std::move(classes), {matrix_from_json(j.at("head_weights"), c, d), row_from_json(j.at("head_bias"), c)}};
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_model(const std::string& path, const Model& m) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write model file: " + path);
  out << model_to_json(m) << '\n';
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace hypood
