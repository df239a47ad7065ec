#pragma once

// Poincare-ball primitives for curvature -c, c > 0.
//
// Two API layers are provided. The raw layer works on Eigen vectors plus a
// Curvature and is used by the training loops, which keep their points in
// dense matrices. The BallPoint layer validates the ball invariant and is used
// at module boundaries (embedding sets, prototypes, feature embeddings).

#include <Eigen/Dense>

#include "hypood/errors.hpp"

namespace hypood {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstVec = Eigen::Ref<const Eigen::VectorXd>;

class Curvature {
 public:
  Curvature() = default;
  explicit Curvature(double c);

  double value() const { return c_; }
  double sqrt_c() const { return sqrt_c_; }
  // Euclidean radius of the ball, 1/sqrt(c).
  double radius() const { return 1.0 / sqrt_c_; }

  friend bool operator==(const Curvature&, const Curvature&) = default;

 private:
  double c_ = 1.0;
  double sqrt_c_ = 1.0;
};

// Retraction margin applied by every mutation path.
inline constexpr double kBallEps = 1e-5;

class BallPoint {
 public:
  // Throws UsageError unless c * |coords|^2 < 1, coords are finite and dim >= 1.
  BallPoint(Vector coords, Curvature c);
  static BallPoint origin(Eigen::Index dim, Curvature c);

  const Vector& coords() const { return coords_; }
  Curvature curvature() const { return c_; }
  Eigen::Index dim() const { return coords_.size(); }
  double sq_norm() const { return coords_.squaredNorm(); }

 private:
  Vector coords_;
  Curvature c_;
};

bool inside_ball(ConstVec x, Curvature c);

// Squared conformal factor of the metric, (2 / (1 - c|x|^2))^2.
double conformal_factor(ConstVec x, Curvature c);
double conformal_factor(const BallPoint& x);

Vector mobius_add(ConstVec v, ConstVec w, Curvature c);
BallPoint mobius_add(const BallPoint& v, const BallPoint& w);

// Geodesic distance (2/sqrt c) atanh(sqrt c |(-x) (+) y|).
double distance(ConstVec x, ConstVec y, Curvature c);
double distance(const BallPoint& x, const BallPoint& y);

// arccosh form of the distance, generalised to curvature c. Only used as a
// cross-check of distance().
double distance_arccosh(ConstVec x, ConstVec y, Curvature c);

// Distance from the origin, (2/sqrt c) atanh(sqrt c |x|).
double poincare_norm(ConstVec x, Curvature c);
double poincare_norm(const BallPoint& x);

// Euclidean gradient of poincare_norm; zero at the origin.
Vector poincare_norm_grad(ConstVec x, Curvature c);

// Exponential map at the origin.
Vector exp0(ConstVec v, Curvature c);
BallPoint exp0_point(ConstVec v, Curvature c);

// Euclidean gradient of distance(x, y) with respect to x. Throws NumericError
// when x == y, where the distance is not differentiable.
Vector distance_grad(ConstVec x, ConstVec y, Curvature c);

// Accumulates scale * grad_x distance(x, y) into out without allocating.
// Returns the distance. Throws NumericError when x == y.
double distance_grad_accumulate(ConstVec x, ConstVec y, Curvature c, double scale,
                                Eigen::Ref<Eigen::VectorXd> out);

// Inverse-metric rescaling used by Riemannian SGD: ((1 - c|x|^2)^2 / 4) * g.
Vector riemannian_rescale(ConstVec euclid_grad, ConstVec x, Curvature c);

// Rescales x to Euclidean norm (1 - eps)/sqrt(c) when it lies on or beyond that
// radius; leaves it unchanged otherwise. eps must be in (0, 1e-2].
Vector project_to_ball(ConstVec x, Curvature c, double eps = kBallEps);
void project_in_place(Eigen::Ref<Eigen::VectorXd> x, Curvature c, double eps = kBallEps);

}  // namespace hypood
