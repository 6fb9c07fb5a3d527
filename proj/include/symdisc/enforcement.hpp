#pragma once

// Symmetry-regularized training and invariant polynomial feature bases.
//
// Regularized training minimizes
//   (1 - lambda(t)) * mean (f(x_i) - y_i)^2 + lambda(t) * mean (X_k(f)(c_j))^2
// where the second mean runs over every field X_k and collocation point c_j
// (the training points unless others are supplied).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "symdisc/error.hpp"
#include "symdisc/geom.hpp"
#include "symdisc/linalg.hpp"
#include "symdisc/manopt.hpp"
#include "symdisc/models.hpp"
#include "symdisc/poly.hpp"
#include "symdisc/rng.hpp"

namespace symdisc {

struct RegularizationSchedule {
  enum class Kind { Constant, TwoPhase };

  Kind kind = Kind::Constant;
  double lambda = 0.5;
  int switch_epoch = 0;                 // two-phase: first epoch with lambda active
  std::optional<double> phase_two_lr;   // two-phase: learning rate after the switch
  bool reset_optimizer_at_switch = false;

  static RegularizationSchedule constant(double lambda) {
    RegularizationSchedule s;
    s.lambda = lambda;
    s.validate();
    return s;
  }

  static RegularizationSchedule two_phase(int switch_epoch, double lambda) {
    RegularizationSchedule s;
    s.kind = Kind::TwoPhase;
    s.switch_epoch = switch_epoch;
    s.lambda = lambda;
    s.validate();
    return s;
  }

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("schedule.lambda", "lambda must lie in [0, 1]");
    if (switch_epoch < 0) throw ConfigError("schedule.switch_epoch", "switch epoch must be >= 0");
    if (phase_two_lr && !(*phase_two_lr >= 0.0 && std::isfinite(*phase_two_lr))) {
      throw ConfigError("schedule.phase_two_lr", "learning rate must be finite and >= 0");
    }
  }

  double at(int epoch) const {
    if (kind == Kind::Constant) return lambda;
    return epoch < switch_epoch ? 0.0 : lambda;
  }

  EpochPlan plan(int epoch, double base_lr) const {
    const double l = at(epoch);
    EpochPlan p{1.0 - l, l, base_lr, false};
    if (kind == Kind::TwoPhase && epoch >= switch_epoch) {
      if (phase_two_lr) p.lr = *phase_two_lr;
      p.reset_optimizer = reset_optimizer_at_switch && epoch == switch_epoch;
    }
    return p;
  }
};

// ---------------------------------------------------------------------------
// Polynomial models

/// A(i, j) = X(m_j)(c_i) for a monomial basis, stacked over fields.
inline Eigen::MatrixXd symmetry_design_matrix(const std::vector<Monomial>& basis, const std::vector<VectorField>& fields,
                                              const PointSet& points) {
  if (basis.empty()) throw ParseError("symmetry_design_matrix: empty basis");
  const std::size_t n = basis.front().dimension();
  std::vector<std::vector<Polynomial>> dm;
  for (const auto& m : basis) {
    const Polynomial p = Polynomial::term(m, 1.0, std::max(kDefaultDegreeCap, m.degree()));
    std::vector<Polynomial> d;
    for (std::size_t a = 0; a < n; ++a) d.push_back(partial(p, a));
    dm.push_back(std::move(d));
  }
  const Eigen::Index rows = points.rows() * static_cast<Eigen::Index>(fields.size());
  Eigen::MatrixXd a(rows, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (fields[k].dimension() != n) throw DimensionError("symmetry_design_matrix: field dimension mismatch");
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const Eigen::VectorXd x = points.row(i).transpose();
      const Eigen::VectorXd v = fields[k].at(x);
      const Eigen::Index r = static_cast<Eigen::Index>(k) * points.rows() + i;
      for (std::size_t j = 0; j < basis.size(); ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < n; ++c) s += v[static_cast<Eigen::Index>(c)] * eval(dm[j][c], x);
        a(r, static_cast<Eigen::Index>(j)) = s;
      }
    }
  }
  return a;
}

struct PolyTrainResult {
  PolyModel model;
  std::vector<CompositeLoss> history;  // loss before each update, plus the final state
};

/// Trains a polynomial model under the regularized loss, starting from its
/// current weights. Supported optimizers: gd and adam.
inline PolyTrainResult train_with_symmetry(PolyModel model, const PointSet& data, const Eigen::VectorXd& targets,
                                           const std::vector<VectorField>& fields,
                                           const RegularizationSchedule& schedule, const TrainConfig& config,
                                           const std::optional<PointSet>& collocation = std::nullopt) {
  config.validate();
  schedule.validate();
  if (data.rows() == 0) throw ParseError("train_with_symmetry: empty training data");
  if (targets.size() != data.rows()) throw DimensionError("train_with_symmetry: targets length does not match data");
  if (static_cast<std::size_t>(data.cols()) != model.input_dim()) {
    throw DimensionError("train_with_symmetry: data dimension does not match model");
  }
  if (config.optimizer != OptimizerKind::Gd && config.optimizer != OptimizerKind::Adam) {
    throw ConfigError("optimizer", "polynomial training supports gd or adam");
  }
  const Eigen::MatrixXd phi = model.design_matrix(data);
  Eigen::MatrixXd a;
  if (!fields.empty()) a = symmetry_design_matrix(model.basis(), fields, collocation ? *collocation : data);
  const auto n_data = static_cast<double>(data.rows());
  const auto n_sym = static_cast<double>(std::max<Eigen::Index>(a.rows(), 1));

  Eigen::VectorXd w = model.weights();
  AdamState adam;
  PolyTrainResult res;
  std::vector<double> totals;
  for (int epoch = 0; epoch <= config.epochs; ++epoch) {
    const EpochPlan p = schedule.plan(std::min(epoch, std::max(config.epochs - 1, 0)), config.lr);
    const Eigen::VectorXd r = phi * w - targets;
    CompositeLoss loss;
    loss.data = r.squaredNorm() / n_data;
    Eigen::VectorXd s;
    if (a.rows() > 0) {
      s = a * w;
      loss.symmetry = s.squaredNorm() / n_sym;
    }
    loss.total = p.data_weight * loss.data + p.symmetry_weight * loss.symmetry;
    res.history.push_back(loss);
    totals.push_back(loss.total);
    if (!std::isfinite(loss.total)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " (data " + std::to_string(loss.data) +
                             ", symmetry " + std::to_string(loss.symmetry) + ")",
                         totals);
    }
    if (epoch == config.epochs) break;
    Eigen::VectorXd g = (2.0 * p.data_weight / n_data) * (phi.transpose() * r);
    if (a.rows() > 0 && p.symmetry_weight != 0.0) g += (2.0 * p.symmetry_weight / n_sym) * (a.transpose() * s);
    if (p.reset_optimizer) adam = AdamState{};
    if (config.optimizer == OptimizerKind::Adam) {
      adam_step(w, g, adam, p.lr);
    } else {
      w -= p.lr * g;
    }
  }
  model.set_weights(w);
  res.model = std::move(model);
  return res;
}

// ---------------------------------------------------------------------------
// MLP models

/// Trains an MLP under the regularized loss. The symmetry term is evaluated at
/// `collocation` when given, otherwise at the training points.
inline MlpTrainResult train_with_symmetry(MlpModel model, const PointSet& data, const Eigen::VectorXd& targets,
                                          const std::vector<VectorField>& fields,
                                          const RegularizationSchedule& schedule, const TrainConfig& config,
                                          const std::optional<PointSet>& collocation = std::nullopt) {
  config.validate();
  schedule.validate();
  if (static_cast<std::size_t>(data.cols()) != model.input_dim()) {
    throw DimensionError("train_with_symmetry: data dimension does not match model");
  }
  if (config.optimizer != OptimizerKind::Gd && config.optimizer != OptimizerKind::Adam) {
    throw ConfigError("optimizer", "MLP training supports gd or adam");
  }
  std::optional<DirectionalBatch> batch;
  if (!fields.empty()) batch = make_directional_batch(fields, collocation ? *collocation : data);
  const double lr = config.lr;
  return mlp_fit(std::move(model), data, targets, config.epochs, config.optimizer,
                 [&schedule, lr](int e) { return schedule.plan(e, lr); }, batch ? &*batch : nullptr);
}

// ---------------------------------------------------------------------------
// Invariant feature bases

/// Columns X(p_j) of the operator restricted to span{p_j}.
inline std::vector<Polynomial> operator_matrix(const VectorField& x, const std::vector<Polynomial>& basis) {
  std::vector<Polynomial> out;
  out.reserve(basis.size());
  for (const auto& p : basis) out.push_back(apply(x, p));
  return out;
}

/// G(i, j) = integral over the box of Z_i Z_j, computed exactly.
inline Eigen::MatrixXd gram_matrix(const std::vector<Polynomial>& cols, const Box& domain) {
  const auto k = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      const auto& a = cols[static_cast<std::size_t>(i)];
      const auto& b = cols[static_cast<std::size_t>(j)];
      const double v = (a.is_zero() || b.is_zero()) ? 0.0 : inner_product(a, b, domain);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

struct InvariantBasis {
  VectorField field;
  std::vector<Polynomial> ambient;  // p_1..p_k
  Box domain;
  double epsilon = 0.0;
  double bound_b = 1.0;
  Eigen::MatrixXd gram;
  Eigen::VectorXd spectrum;         // descending
  Eigen::MatrixXd eigenvectors;     // column j pairs with spectrum[j]
  Eigen::VectorXd retained_sigma;   // ascending
  Eigen::MatrixXd retained;         // k x r coefficient vectors of the features
  std::vector<Polynomial> features;
};

/// Monomials up to degree d, Gram matrix of their images under X, and the
/// eigenvectors whose eigenvalue is at most eps (ascending). An empty feature
/// list means no eigenvalue fell below eps.
inline InvariantBasis build_invariant_basis(const VectorField& x, int degree, const Box& domain, double eps,
                                            double bound_b = 1.0) {
  if (degree < 1) throw ConfigError("degree", "degree must be >= 1");
  if (!(eps > 0.0)) throw ConfigError("epsilon", "epsilon must be > 0");
  if (!(bound_b > 0.0)) throw ConfigError("B", "coefficient bound must be > 0");
  domain.validate();
  if (domain.dimension() != x.dimension()) throw DimensionError("build_invariant_basis: domain dimension");
  InvariantBasis b;
  b.field = x;
  b.domain = domain;
  b.epsilon = eps;
  b.bound_b = bound_b;
  for (const auto& m : monomials_up_to(x.dimension(), degree)) b.ambient.push_back(Polynomial::term(m, 1.0));
  b.gram = gram_matrix(operator_matrix(x, b.ambient), domain);
  const SymmetricEigen eig = jacobi_eigen(b.gram);
  b.spectrum = eig.values;
  b.eigenvectors = eig.vectors;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = b.spectrum.size(); j-- > 0;)
    if (b.spectrum[j] <= eps) keep.push_back(j);
  b.retained.resize(b.gram.rows(), static_cast<Eigen::Index>(keep.size()));
  b.retained_sigma.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto c = static_cast<Eigen::Index>(r);
    b.retained.col(c) = b.eigenvectors.col(keep[r]);
    b.retained_sigma[c] = b.spectrum[keep[r]];
    Polynomial f(x.dimension());
    for (std::size_t l = 0; l < b.ambient.size(); ++l) f += b.retained(static_cast<Eigen::Index>(l), c) * b.ambient[l];
    b.features.push_back(std::move(f));
  }
  return b;
}

/// Mass matrix P(i, j) = integral of p_i p_j over the domain.
inline Eigen::MatrixXd mass_matrix(const InvariantBasis& b) { return gram_matrix(b.ambient, b.domain); }

struct SoundnessReport {
  int trials = 0;
  double max_norm = 0.0;        // largest ||X g||_2 observed
  double bound = 0.0;           // sqrt(B eps)
  double rigorous_bound = 0.0;  // B sqrt(max retained sigma), valid for any B
  bool passed = true;
  bool vacuous = false;
};

/// ||X g||_2 for g = sum_j c_j f_j, exact through the Gram matrix.
inline double operator_norm_of_combination(const InvariantBasis& b, const Eigen::VectorXd& c) {
  const Eigen::VectorXd coeffs = b.retained * c;
  return std::sqrt(std::max(0.0, coeffs.dot(b.gram * coeffs)));
}

/// Random combinations g = sum_j c_j f_j with ||c||_1 <= B.
inline SoundnessReport soundness_check(const InvariantBasis& b, int trials, std::uint64_t seed = 0) {
  SoundnessReport rep;
  rep.trials = trials;
  rep.bound = std::sqrt(b.bound_b * b.epsilon);
  const double smax = b.retained_sigma.size() ? std::max(0.0, b.retained_sigma.maxCoeff()) : 0.0;
  // Rounding floor: the quadratic form c^T G c is only accurate to about n eps ||G||.
  const double floor = static_cast<double>(b.gram.rows()) * std::numeric_limits<double>::epsilon() * b.gram.norm();
  rep.rigorous_bound = b.bound_b * std::sqrt(smax + floor);
  if (b.features.empty()) {
    rep.vacuous = true;
    return rep;
  }
  Rng rng(seed);
  const Eigen::Index r = b.retained.cols();
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd c(r);
    for (Eigen::Index j = 0; j < r; ++j) c[j] = rng.uniform(-1.0, 1.0);
    const double l1 = c.lpNorm<1>();
    if (l1 > 0.0) c *= b.bound_b * rng.uniform() / l1;
    rep.max_norm = std::max(rep.max_norm, operator_norm_of_combination(b, c));
  }
  rep.passed = rep.max_norm <= rep.bound;
  return rep;
}

struct CompletenessReport {
  double gamma = 0.0;                 // ||X g||_2 on the domain
  double coefficient_distance = 0.0;  // distance of g's coefficients to the retained span
  double function_distance = 0.0;     // L2(domain) distance of g to span{f_j}
  double lemma_bound = 0.0;           // gamma / sqrt(eps)
  double lambda_x = 0.0;              // operator norm of X on the degree-d space, in L2
  double theorem_bound = 0.0;         // gamma + lambda_x * gamma / sqrt(eps)
  bool passed = false;                // coefficient_distance <= lemma_bound
};

/// Coefficients of g in the ambient monomial basis; throws when g has terms outside it.
inline Eigen::VectorXd ambient_coefficients(const InvariantBasis& b, const Polynomial& g) {
  if (g.dimension() != b.field.dimension()) throw DimensionError("ambient_coefficients: dimension mismatch");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.ambient.size()));
  std::size_t matched = 0;
  for (std::size_t l = 0; l < b.ambient.size(); ++l) {
    const Monomial& m = b.ambient[l].terms().begin()->first;
    const double v = g.coefficient(m);
    if (v != 0.0) ++matched;
    c[static_cast<Eigen::Index>(l)] = v;
  }
  if (matched != g.size()) throw DegreeCapError("polynomial exceeds the degree budget of the invariant basis");
  return c;
}

inline CompletenessReport completeness_check(const InvariantBasis& b, const Polynomial& g) {
  const Eigen::VectorXd c = ambient_coefficients(b, g);
  CompletenessReport rep;
  // Spectral form avoids cancellation when c is dominated by invariant directions.
  const Eigen::VectorXd proj = b.eigenvectors.transpose() * c;
  rep.gamma = std::sqrt(proj.cwiseAbs2().dot(b.spectrum.cwiseMax(0.0)));
  const Eigen::MatrixXd& f = b.retained;
  if (f.cols() > 0) {
    rep.coefficient_distance = (c - f * (f.transpose() * c)).norm();
  } else {
    rep.coefficient_distance = c.norm();
  }
  const Eigen::MatrixXd p = mass_matrix(b);
  double resid2 = c.dot(p * c);
  if (f.cols() > 0) {
    const Eigen::VectorXd rhs = f.transpose() * (p * c);
    const Eigen::MatrixXd pf = f.transpose() * p * f;
    resid2 -= rhs.dot(pf.ldlt().solve(rhs));
  }
  rep.function_distance = std::sqrt(std::max(0.0, resid2));
  rep.lemma_bound = rep.gamma / std::sqrt(b.epsilon);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(b.gram, p, Eigen::EigenvaluesOnly);
  rep.lambda_x = std::sqrt(std::max(0.0, ges.eigenvalues().maxCoeff()));
  rep.theorem_bound = rep.gamma + rep.lambda_x * rep.lemma_bound;
  // Slack covers round-off when g lies exactly in the kernel.
  rep.passed = rep.coefficient_distance <= rep.lemma_bound + 1e-10 * std::max(1.0, c.norm());
  return rep;
}

}  // namespace symdisc
