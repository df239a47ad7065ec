#include "hypood/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "hypood/format.hpp"

namespace hypood {

double default_tau(const Hierarchy& h) { return h.max_level() <= 2 ? 0.01 : 0.1; }

EmbeddingSet::EmbeddingSet(std::vector<std::string> names, Matrix points, Curvature c,
                           std::uint64_t seed, int epochs_trained)
    : names_(std::move(names)), points_(std::move(points)), c_(c), seed_(seed), epochs_trained_(epochs_trained) {
  if (static_cast<Eigen::Index>(names_.size()) != points_.rows()) {
    throw UsageError("embedding: name count does not match point rows");
  }
  if (points_.cols() < 1) throw UsageError("embedding: dimension must be >= 1");
  for (Eigen::Index i = 0; i < points_.rows(); ++i) {
    if (!points_.row(i).allFinite() || c_.value() * points_.row(i).squaredNorm() >= 1.0) {
      throw UsageError("embedding: point '" + names_[static_cast<std::size_t>(i)] + "' is outside the ball");
    }
  }
}

BallPoint EmbeddingSet::point(std::size_t i) const { return {points_.row(static_cast<Eigen::Index>(i)).transpose(), c_}; }

std::size_t EmbeddingSet::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw UsageError("embedding has no node '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

BallPoint EmbeddingSet::point(const std::string& name) const { return point(index_of(name)); }

EmbeddingSet EmbeddingSet::aligned_to(const Hierarchy& h) const {
  if (names_ == h.names()) return *this;
  Matrix pts(static_cast<Eigen::Index>(h.size()), points_.cols());
  for (NodeId i = 0; i < h.size(); ++i) {
    pts.row(static_cast<Eigen::Index>(i)) = points_.row(static_cast<Eigen::Index>(index_of(h.name(i))));
  }
  return {h.names(), std::move(pts), c_, seed_, epochs_trained_};
}

bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
  return a.names_ == b.names_ && a.c_ == b.c_ && a.seed_ == b.seed_ &&
         a.epochs_trained_ == b.epochs_trained_ && a.points_.rows() == b.points_.rows() &&
         a.points_.cols() == b.points_.cols() && a.points_ == b.points_;
}

LossAndGrad distortion_loss(const Matrix& points, Curvature c, const GraphDistances& dist) {
  const auto n = points.rows();
  if (static_cast<std::size_t>(n) != dist.size()) throw UsageError("distortion_loss: node count mismatch");
  const auto d = points.cols();
  LossAndGrad out;
  out.grad = Matrix::Zero(n, d);
  if (n < 2) return out;

  const double k = c.value();
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  Eigen::VectorXd alpha(n);
  for (Eigen::Index i = 0; i < n; ++i) alpha[i] = 1.0 - k * points.row(i).squaredNorm();
  Eigen::RowVectorXd diff(d);

  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto xi = points.row(i);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto xj = points.row(j);
      diff.noalias() = xi - xj;
      const double diff_sq = diff.squaredNorm();
      const double target = dist(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      // Same closed form as distance_grad_accumulate, sharing the pair's terms
      // between both endpoints.
      const double delta = 2.0 * k * diff_sq / (alpha[i] * alpha[j]);
      const double root = std::sqrt(delta * (delta + 2.0));
      const double d_b = std::log1p(delta + root) / c.sqrt_c();
      const double rel = (d_b - target) / target;
      sum += rel * rel;
      if (diff_sq == 0.0) continue;  // cusp of the distance: zero subgradient
      const double w = 2.0 * rel / (target * pairs);
      const double base = w * 4.0 * k / (c.sqrt_c() * root * alpha[i] * alpha[j]);
      const double ci = base / alpha[i];
      const double cj = base / alpha[j];
      out.grad.row(i).noalias() += (ci * alpha[i]) * diff + (ci * k * diff_sq) * xi;
      out.grad.row(j).noalias() += (-cj * alpha[j]) * diff + (cj * k * diff_sq) * xj;
    }
  }
  out.value = sum / pairs;
  return out;
}

LossAndGrad distortion_loss(const EmbeddingSet& emb, const GraphDistances& dist) {
  return distortion_loss(emb.points(), emb.curvature(), dist);
}

LossAndGrad norm_loss(const Matrix& points, Curvature c, const Hierarchy& h) {
  const auto n = points.rows();
  if (static_cast<std::size_t>(n) != h.size()) throw UsageError("norm_loss: node count mismatch");
  LossAndGrad out;
  out.grad = Matrix::Zero(n, points.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (const auto& level : h.nodes_by_level()) {
    if (level.size() < 2) continue;
    std::vector<double> norms(level.size());
    double mean = 0.0;
    for (std::size_t t = 0; t < level.size(); ++t) {
      norms[t] = poincare_norm(points.row(static_cast<Eigen::Index>(level[t])).transpose(), c);
      mean += norms[t];
    }
    mean /= static_cast<double>(level.size());
    for (std::size_t t = 0; t < level.size(); ++t) {
      const double dev = norms[t] - mean;
      sum += dev * dev;
      // The mean's own derivative cancels because the deviations sum to zero.
      const auto row = static_cast<Eigen::Index>(level[t]);
      out.grad.row(row) += (2.0 * inv_n * dev) * poincare_norm_grad(points.row(row).transpose(), c).transpose();
    }
  }
  out.value = sum * inv_n;
  return out;
}

LossAndGrad norm_loss(const EmbeddingSet& emb, const Hierarchy& h) {
  return norm_loss(emb.points(), emb.curvature(), h);
}

namespace {

void rsgd_step(Matrix& points, const Matrix& grad, Curvature c, double lr) {
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double s = 1.0 - c.value() * points.row(i).squaredNorm();
    points.row(i) -= (lr * s * s / 4.0) * grad.row(i);
    project_in_place(points.row(i).transpose(), c);
  }
}

void check_config(const EmbedConfig& cfg) {
  if (cfg.dim < 2) throw UsageError("embedding dimension must be >= 2");
  if (cfg.epochs < 0 || cfg.init_epochs < 0) throw UsageError("epoch counts must be non-negative");
  if (cfg.tau && *cfg.tau < 0.0) throw UsageError("tau must be >= 0");
  if (cfg.learning_rate < 0.0 || cfg.init_lr < 0.0) throw UsageError("learning rates must be >= 0");
}

}  // namespace

EmbeddingSet init_embeddings(const Hierarchy& h, const EmbedConfig& cfg) {
  check_config(cfg);
  const Curvature c(cfg.curvature);
  const auto n = static_cast<Eigen::Index>(h.size());
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Matrix points(n, cfg.dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < cfg.dim; ++j) points(i, j) = gauss(rng);
    const double radius = cfg.init_radius * std::pow(unit(rng), 1.0 / cfg.dim);
    points.row(i) *= radius / points.row(i).norm();
  }

  // Both orientations of every tree edge; negatives are non-neighbours of the anchor.
  std::vector<std::pair<NodeId, NodeId>> pairs;
  std::vector<std::vector<bool>> adjacent(h.size(), std::vector<bool>(h.size(), false));
  for (NodeId v = 0; v < h.size(); ++v) {
    if (v == h.root()) continue;
    pairs.emplace_back(h.parent(v), v);
    pairs.emplace_back(v, h.parent(v));
    adjacent[v][h.parent(v)] = adjacent[h.parent(v)][v] = true;
  }

  std::uniform_int_distribution<NodeId> pick(0, h.size() - 1);
  std::vector<NodeId> cand;
  std::vector<double> dists;
  Eigen::VectorXd grad_u(cfg.dim);
  Matrix grad_c;
  for (int epoch = 0; epoch < cfg.init_epochs; ++epoch) {
    const double lr = epoch < cfg.init_burnin_epochs ? cfg.init_lr / 10.0 : cfg.init_lr;
    std::shuffle(pairs.begin(), pairs.end(), rng);
    for (const auto& [u, v] : pairs) {
      cand.assign(1, v);
      for (int s = 0, tries = 0; s < cfg.negatives && tries < 10 * cfg.negatives; ++tries) {
        const NodeId w = pick(rng);
        if (w == u || adjacent[u][w]) continue;
        cand.push_back(w);
        ++s;
      }
      if (cand.size() < 2 || lr == 0.0) continue;
      // loss = d(u, v) + log sum_w exp(-d(u, w)), w over cand.
      const auto xu = points.row(static_cast<Eigen::Index>(u)).transpose();
      dists.resize(cand.size());
      double mn = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < cand.size(); ++t) {
        dists[t] = distance(xu, points.row(static_cast<Eigen::Index>(cand[t])).transpose(), c);
        mn = std::min(mn, dists[t]);
      }
      double z = 0.0;
      for (double dv : dists) z += std::exp(mn - dv);
      grad_u.setZero();
      grad_c = Matrix::Zero(static_cast<Eigen::Index>(cand.size()), cfg.dim);
      for (std::size_t t = 0; t < cand.size(); ++t) {
        const double dl_dd = (t == 0 ? 1.0 : 0.0) - std::exp(mn - dists[t]) / z;
        if (dl_dd == 0.0) continue;
        const auto xw = points.row(static_cast<Eigen::Index>(cand[t])).transpose();
        if ((xu - xw).squaredNorm() == 0.0) continue;
        distance_grad_accumulate(xu, xw, c, dl_dd, grad_u);
        distance_grad_accumulate(xw, xu, c, dl_dd, grad_c.row(static_cast<Eigen::Index>(t)).transpose());
      }
      for (std::size_t t = 0; t < cand.size(); ++t) {
        auto row = points.row(static_cast<Eigen::Index>(cand[t]));
        const double s = 1.0 - c.value() * row.squaredNorm();
        row -= (lr * s * s / 4.0) * grad_c.row(static_cast<Eigen::Index>(t));
        project_in_place(row.transpose(), c);
      }
      auto row_u = points.row(static_cast<Eigen::Index>(u));
      const double s = 1.0 - c.value() * row_u.squaredNorm();
      row_u -= (lr * s * s / 4.0) * grad_u.transpose();
      project_in_place(row_u.transpose(), c);
    }
  }
  return {h.names(), std::move(points), c, cfg.seed, 0};
}

EmbedResult train_balanced_from(const EmbeddingSet& init, const Hierarchy& h, const GraphDistances& dist,
                                const EmbedConfig& cfg) {
  check_config(cfg);
  if (init.names() != h.names()) throw UsageError("initial embedding does not follow the hierarchy node order");
  const Curvature c = init.curvature();
  const double tau = cfg.tau.value_or(default_tau(h));
  const int epochs = cfg.epochs;
  const int warmup = std::max(1, static_cast<int>(std::ceil(cfg.warmup_fraction * epochs)));

  const double node_scale = 0.5 * static_cast<double>(h.size());
  Matrix points = init.points();
  EmbedResult result;
  result.trace.reserve(static_cast<std::size_t>(epochs) + 1);

  auto evaluate = [&](int epoch, double weight, Matrix* grad) {
    LossAndGrad ld = distortion_loss(points, c, dist);
    LossAndGrad ln = norm_loss(points, c, h);
    const double total = ld.value + weight * ln.value;
    if (!std::isfinite(total)) {
      Eigen::Index worst = 0;
      (ld.grad + ln.grad).rowwise().norm().maxCoeff(&worst);
      for (Eigen::Index i = 0; i < points.rows(); ++i) {
        if (!points.row(i).allFinite()) worst = i;
      }
      throw NumericError("non-finite embedding loss at epoch " + std::to_string(epoch) + " (worst node '" +
                         h.name(static_cast<NodeId>(worst)) + "')");
    }
    result.trace.push_back({epoch, ld.value, ln.value, total});
    if (grad) *grad = std::move(ld.grad) + weight * ln.grad;
  };

  evaluate(0, 0.0, nullptr);
  Matrix grad;
  for (int i = 1; i <= epochs; ++i) {
    const double weight = static_cast<double>(i) / static_cast<double>(epochs) * tau;
    evaluate(i, weight, &grad);
    // The pair-mean loss gives each node a gradient of order 2/n, so the rate is
    // scaled by n/2 to keep per-node steps independent of hierarchy size.
    const double lr = cfg.learning_rate * node_scale * std::min(1.0, static_cast<double>(i) / warmup);
    rsgd_step(points, grad, c, lr);
  }

  result.embedding = EmbeddingSet(h.names(), std::move(points), c, cfg.seed, init.epochs_trained() + epochs);
  return result;
}

EmbedResult train_balanced(const Hierarchy& h, const GraphDistances& dist, const EmbedConfig& cfg) {
  return train_balanced_from(init_embeddings(h, cfg), h, dist, cfg);
}

void write_embedding_tsv(std::ostream& out, const EmbeddingSet& emb) {
  out << "#dim=" << emb.dim() << " curvature=" << format_double(emb.curvature().value())
      << " seed=" << emb.seed() << '\n';
  for (std::size_t i = 0; i < emb.size(); ++i) {
    out << emb.names()[i];
    for (int j = 0; j < emb.dim(); ++j) out << '\t' << format_double(emb.points()(static_cast<Eigen::Index>(i), j));
    out << '\n';
  }
}

void save_embedding_tsv(const std::string& path, const EmbeddingSet& emb) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write embedding file: " + path);
  write_embedding_tsv(out, emb);
}

EmbeddingSet read_embedding_tsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("#dim=", 0) != 0) {
    throw ParseError("embedding file: missing '#dim=d curvature=c seed=s' header");
  }
  int dim = 0;
  double curvature = 1.0;
  std::uint64_t seed = 0;
  {
    std::istringstream hs(line.substr(1));
    std::string kv;
    while (hs >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = kv.substr(0, eq);
      const std::string val = kv.substr(eq + 1);
      if (key == "dim") dim = static_cast<int>(parse_double(val, "embedding header dim"));
      if (key == "curvature") curvature = parse_double(val, "embedding header curvature");
      if (key == "seed") seed = std::stoull(val);
    }
  }
  if (dim < 1) throw ParseError("embedding file: invalid dim in header");

  std::vector<std::string> names;
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, '\t');
    const std::string where = "embedding line " + std::to_string(lineno);
    if (static_cast<int>(fields.size()) != dim + 1) {
      throw ParseError(where + ": expected " + std::to_string(dim + 1) + " fields");
    }
    names.emplace_back(fields[0]);
    for (int j = 0; j < dim; ++j) values.push_back(parse_double(fields[static_cast<std::size_t>(j) + 1], where));
  }
  Matrix points = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(names.size()), dim);
  return {std::move(names), std::move(points), Curvature(curvature), seed, 0};
}

EmbeddingSet load_embedding_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open embedding file: " + path);
  return read_embedding_tsv(in);
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "epoch,L_d,L_n,total\n";
  for (const auto& r : trace) {
    out << r.epoch << ',' << format_double(r.distortion) << ',' << format_double(r.norm) << ','
        << format_double(r.total) << '\n';
  }
}

}  // namespace hypood
