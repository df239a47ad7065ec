#include "hypood/geometry.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace hypood {

namespace {

void check_same_dim(ConstVec a, ConstVec b) {
  if (a.size() != b.size()) {
    throw UsageError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

void check_same_ball(const BallPoint& a, const BallPoint& b) {
  if (!(a.curvature() == b.curvature())) throw UsageError("curvature mismatch between ball points");
  check_same_dim(a.coords(), b.coords());
}

// atanh argument is clamped just below 1 so rounding at the boundary stays finite.
double safe_atanh(double u) {
  constexpr double kMax = 1.0 - std::numeric_limits<double>::epsilon();
  return std::atanh(u < kMax ? u : kMax);
}

}  // namespace

Curvature::Curvature(double c) : c_(c), sqrt_c_(std::sqrt(c)) {
  if (!(c > 0.0) || !std::isfinite(c)) throw UsageError("curvature must be positive and finite");
}

BallPoint::BallPoint(Vector coords, Curvature c) : coords_(std::move(coords)), c_(c) {
  if (coords_.size() < 1) throw UsageError("ball point needs dimension >= 1");
  if (!coords_.allFinite()) throw UsageError("ball point has non-finite coordinates");
  if (!inside_ball(coords_, c_)) throw UsageError("point lies outside the Poincare ball");
}

BallPoint BallPoint::origin(Eigen::Index dim, Curvature c) { return {Vector::Zero(dim), c}; }

bool inside_ball(ConstVec x, Curvature c) { return c.value() * x.squaredNorm() < 1.0; }

double conformal_factor(ConstVec x, Curvature c) {
  const double f = 2.0 / (1.0 - c.value() * x.squaredNorm());
  return f * f;
}

double conformal_factor(const BallPoint& x) { return conformal_factor(x.coords(), x.curvature()); }

Vector mobius_add(ConstVec v, ConstVec w, Curvature c) {
  check_same_dim(v, w);
  const double k = c.value();
  const double vw = v.dot(w);
  const double vv = v.squaredNorm();
  const double ww = w.squaredNorm();
  const double denom = 1.0 + 2.0 * k * vw + k * k * vv * ww;
  Vector out = ((1.0 + 2.0 * k * vw + k * ww) * v + (1.0 - k * vv) * w) / denom;
  if (!inside_ball(out, c)) project_in_place(out, c);
  return out;
}

BallPoint mobius_add(const BallPoint& v, const BallPoint& w) {
  check_same_ball(v, w);
  return {mobius_add(v.coords(), w.coords(), v.curvature()), v.curvature()};
}

double distance(ConstVec x, ConstVec y, Curvature c) {
  check_same_dim(x, y);
  const double k = c.value();
  const double xy = x.dot(y);
  const double xx = x.squaredNorm();
  const double yy = y.squaredNorm();
  // (-x) (+) y without materialising the sum.
  const double a = 1.0 - 2.0 * k * xy + k * yy;
  const double b = 1.0 - k * xx;
  const double denom = 1.0 - 2.0 * k * xy + k * k * xx * yy;
  const double num = (b * y - a * x).norm();
  return 2.0 / c.sqrt_c() * safe_atanh(c.sqrt_c() * num / denom);
}

double distance(const BallPoint& x, const BallPoint& y) {
  check_same_ball(x, y);
  return distance(x.coords(), y.coords(), x.curvature());
}

double distance_arccosh(ConstVec x, ConstVec y, Curvature c) {
  check_same_dim(x, y);
  const double k = c.value();
  const double delta =
      2.0 * k * (x - y).squaredNorm() / ((1.0 - k * x.squaredNorm()) * (1.0 - k * y.squaredNorm()));
  return std::acosh(1.0 + delta) / c.sqrt_c();
}

double poincare_norm(ConstVec x, Curvature c) {
  return 2.0 / c.sqrt_c() * safe_atanh(c.sqrt_c() * x.norm());
}

double poincare_norm(const BallPoint& x) { return poincare_norm(x.coords(), x.curvature()); }

Vector poincare_norm_grad(ConstVec x, Curvature c) {
  const double r = x.norm();
  if (r == 0.0) return Vector::Zero(x.size());
  return (2.0 / ((1.0 - c.value() * r * r) * r)) * x;
}

Vector exp0(ConstVec v, Curvature c) {
  const double r = v.norm();
  if (r == 0.0) return Vector::Zero(v.size());
  const double s = c.sqrt_c() * r;
  Vector out = (std::tanh(s) / s) * v;
  if (!inside_ball(out, c)) project_in_place(out, c);
  return out;
}

BallPoint exp0_point(ConstVec v, Curvature c) {
  if (!v.allFinite()) throw NumericError("exp0: non-finite tangent vector");
  return {exp0(v, c), c};
}

double distance_grad_accumulate(ConstVec x, ConstVec y, Curvature c, double scale,
                                Eigen::Ref<Eigen::VectorXd> out) {
  const double k = c.value();
  const double diff_sq = (x - y).squaredNorm();
  if (diff_sq == 0.0) throw NumericError("distance gradient undefined for coincident points");
  const double alpha = 1.0 - k * x.squaredNorm();
  const double beta = 1.0 - k * y.squaredNorm();
  const double delta = 2.0 * k * diff_sq / (alpha * beta);
  const double root = std::sqrt(delta * (delta + 2.0));
  // d = acosh(1 + delta)/sqrt(c); d(delta)/dx = 4c/(beta alpha^2) (alpha (x - y) + c |x-y|^2 x).
  const double coef = scale * 4.0 * k / (c.sqrt_c() * root * beta * alpha * alpha);
  out.noalias() += (coef * alpha) * (x - y) + (coef * k * diff_sq) * x;
  return std::log1p(delta + root) / c.sqrt_c();
}

Vector distance_grad(ConstVec x, ConstVec y, Curvature c) {
  check_same_dim(x, y);
  Vector g = Vector::Zero(x.size());
  distance_grad_accumulate(x, y, c, 1.0, g);
  return g;
}

Vector riemannian_rescale(ConstVec euclid_grad, ConstVec x, Curvature c) {
  check_same_dim(euclid_grad, x);
  const double s = 1.0 - c.value() * x.squaredNorm();
  return (s * s / 4.0) * euclid_grad;
}

void project_in_place(Eigen::Ref<Eigen::VectorXd> x, Curvature c, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw UsageError("projection eps must lie in (0, 1e-2]");
  const double max_norm = (1.0 - eps) / c.sqrt_c();
  const double r = x.norm();
  if (r >= max_norm) x *= max_norm / r;
}

Vector project_to_ball(ConstVec x, Curvature c, double eps) {
  Vector out = x;
  project_in_place(out, c, eps);
  return out;
}

}  // namespace hypood
