#pragma once

// First-order optimizers on the unit sphere, the Stiefel manifold
// St(p, k) = { W in R^{p x k} : W^T W = I }, and plain Euclidean space.
//
// Riemannian steps: (optionally Adagrad-precondition the Euclidean gradient),
// project onto the tangent space at W, take a step, retract with a
// sign-fixed QR factorization. The sphere is the k = 1 case.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "symdisc/error.hpp"
#include "symdisc/linalg.hpp"
#include "symdisc/rng.hpp"

namespace symdisc {

enum class OptimizerKind { RiemannianAdagrad, RiemannianSgd, Gd, Adam };
enum class LossKind { L1, MSE };

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::RiemannianAdagrad: return "riemannian-adagrad";
    case OptimizerKind::RiemannianSgd: return "riemannian-sgd";
    case OptimizerKind::Gd: return "gd";
    case OptimizerKind::Adam: return "adam";
  }
  return "?";
}

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "riemannian-adagrad") return OptimizerKind::RiemannianAdagrad;
  if (s == "riemannian-sgd") return OptimizerKind::RiemannianSgd;
  if (s == "gd") return OptimizerKind::Gd;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError("", "unknown optimizer '" + s + "'");
}

inline std::string to_string(LossKind k) { return k == LossKind::L1 ? "L1" : "MSE"; }

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "L1" || s == "l1") return LossKind::L1;
  if (s == "MSE" || s == "mse") return LossKind::MSE;
  throw ConfigError("", "unknown loss '" + s + "'");
}

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::RiemannianAdagrad;
  double lr = 0.1;
  int epochs = 1000;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::L1;

  void validate() const {
    // lr == 0 is allowed and leaves the parameters untouched.
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr", "learning rate must be finite and >= 0");
    if (epochs < 0) throw ConfigError("epochs", "epochs must be >= 0");
  }
};

inline constexpr double kAdagradEps = 1e-10;

struct AdagradState {
  Eigen::MatrixXd accum;  // running sum of squared gradients, per coordinate
  double eps = kAdagradEps;
};

/// G += g^2 coordinatewise (the accumulator is created on first use).
inline AdagradState adagrad_state_update(AdagradState state, const Eigen::MatrixXd& grad) {
  if (state.accum.size() == 0) state.accum = Eigen::MatrixXd::Zero(grad.rows(), grad.cols());
  if (state.accum.rows() != grad.rows() || state.accum.cols() != grad.cols()) {
    throw DimensionError("adagrad state shape does not match gradient");
  }
  state.accum.array() += grad.array().square();
  return state;
}

/// g / sqrt(G + eps), using an already-updated accumulator.
inline Eigen::MatrixXd adagrad_precondition(const AdagradState& state, const Eigen::MatrixXd& grad) {
  return (grad.array() / (state.accum.array() + state.eps).sqrt()).matrix();
}

/// Projection of G onto the tangent space of the Stiefel manifold at W.
inline Eigen::MatrixXd stiefel_tangent(const Eigen::MatrixXd& w, const Eigen::MatrixXd& g) {
  const Eigen::MatrixXd wtg = w.transpose() * g;
  return g - w * (0.5 * (wtg + wtg.transpose()));
}

/// One Riemannian step on the Stiefel manifold. Pass `adagrad` for the
/// preconditioned variant; nullptr gives plain Riemannian gradient descent.
inline Eigen::MatrixXd stiefel_step(const Eigen::MatrixXd& w, const Eigen::MatrixXd& grad, AdagradState* adagrad,
                                    double lr) {
  if (w.rows() != grad.rows() || w.cols() != grad.cols()) throw DimensionError("stiefel_step: shape mismatch");
  if (!grad.allFinite()) throw NumericError("stiefel_step: non-finite gradient");
  Eigen::MatrixXd dir = grad;
  if (adagrad) {
    *adagrad = adagrad_state_update(std::move(*adagrad), grad);
    dir = adagrad_precondition(*adagrad, grad);
  }
  const Eigen::MatrixXd xi = stiefel_tangent(w, dir);
  if (xi.norm() == 0.0) return w;
  return qr_orthonormalize(w - lr * xi);
}

/// One Riemannian step on the unit sphere (retraction by renormalization).
inline Eigen::VectorXd sphere_step(const Eigen::VectorXd& w, const Eigen::VectorXd& grad, AdagradState* adagrad,
                                   double lr) {
  if (w.size() != grad.size()) throw DimensionError("sphere_step: shape mismatch");
  if (!grad.allFinite()) throw NumericError("sphere_step: non-finite gradient");
  Eigen::VectorXd dir = grad;
  if (adagrad) {
    *adagrad = adagrad_state_update(std::move(*adagrad), grad);
    dir = adagrad_precondition(*adagrad, grad);
  }
  const Eigen::VectorXd xi = dir - w * w.dot(dir);
  if (xi.norm() == 0.0) return w;
  const Eigen::VectorXd next = w - lr * xi;
  const double nrm = next.norm();
  if (!(nrm > 0.0)) throw NumericError("sphere_step: retraction of a zero vector");
  return next / nrm;
}

struct AdamState {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// In-place Adam update of `param` (any dense Eigen matrix or vector).
template <class Param, class Grad>
void adam_step(Eigen::MatrixBase<Param>& param, const Eigen::MatrixBase<Grad>& grad, AdamState& s, double lr) {
  if (s.m.size() == 0) {
    s.m = Eigen::MatrixXd::Zero(grad.rows(), grad.cols());
    s.v = Eigen::MatrixXd::Zero(grad.rows(), grad.cols());
  }
  ++s.t;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  param.derived().array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

/// Seeded Gaussian matrix orthonormalized by QR: a point on St(rows, cols).
inline Eigen::MatrixXd random_stiefel(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = rng.normal();
  return qr_orthonormalize(g);
}

enum class Constraint { Euclidean, Stiefel };

/// Objective value; writes the Euclidean gradient into *grad when non-null.
using Objective = std::function<double(const Eigen::MatrixXd&, Eigen::MatrixXd* grad)>;

struct MinimizeResult {
  Eigen::MatrixXd point;  // best iterate seen
  double best_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<double> history;  // loss at every iterate, including the initial one
};

/// Runs `config.epochs` optimizer steps from `initial` and returns the best
/// iterate. On the Stiefel constraint the Riemannian kinds are used (gd acts as
/// riemannian-sgd); Adam is Euclidean only.
inline MinimizeResult minimize(const Objective& objective, const Eigen::MatrixXd& initial, Constraint constraint,
                               const TrainConfig& config) {
  config.validate();
  if (constraint == Constraint::Stiefel && config.optimizer == OptimizerKind::Adam) {
    throw ConfigError("optimizer", "adam is not available on the Stiefel manifold");
  }
  if (constraint == Constraint::Stiefel && orthonormality_error(initial) > 1e-10) {
    throw NumericError("minimize: initial point is not on the Stiefel manifold");
  }
  MinimizeResult res;
  Eigen::MatrixXd w = initial;
  Eigen::MatrixXd grad;
  AdagradState adagrad;
  AdamState adam;
  for (int epoch = 0; epoch <= config.epochs; ++epoch) {
    const double loss = objective(w, &grad);
    res.history.push_back(loss);
    if (!std::isfinite(loss) || !grad.allFinite()) {
      throw NumericError("non-finite loss or gradient at epoch " + std::to_string(epoch), res.history);
    }
    if (loss < res.best_loss) {
      res.best_loss = loss;
      res.point = w;
      res.best_epoch = epoch;
    }
    if (epoch == config.epochs) break;
    if (constraint == Constraint::Stiefel) {
      const bool use_adagrad = config.optimizer == OptimizerKind::RiemannianAdagrad;
      w = stiefel_step(w, grad, use_adagrad ? &adagrad : nullptr, config.lr);
    } else {
      switch (config.optimizer) {
        case OptimizerKind::Adam: adam_step(w, grad, adam, config.lr); break;
        case OptimizerKind::RiemannianAdagrad:
          adagrad = adagrad_state_update(std::move(adagrad), grad);
          w -= config.lr * adagrad_precondition(adagrad, grad);
          break;
        default: w -= config.lr * grad; break;
      }
    }
  }
  return res;
}

}  // namespace symdisc
