#pragma once

// Estimation of infinitesimal generators X with X(f) ~ 0.
//
// A vector field is parameterized as a linear combination of basis fields.
// For the polynomial basis the coefficient vector w (length n*m) holds, for
// each component a = 1..n, the weights of the m feature polynomials p_j in
// alpha^a. The extended feature matrix M maps w to the values X(f)(x_i), so
// generators are (near) null directions of M; they are found by minimizing a
// columnwise loss of M W over matrices W with orthonormal columns.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "symdisc/error.hpp"
#include "symdisc/function.hpp"
#include "symdisc/geom.hpp"
#include "symdisc/manopt.hpp"
#include "symdisc/poly.hpp"
#include "symdisc/rng.hpp"

namespace symdisc {

struct VFBasis {
  enum class Kind { Polynomial, Explicit };

  Kind kind = Kind::Polynomial;
  std::size_t dimension = 0;
  std::vector<Polynomial> features;  // polynomial kind: p_1..p_m
  std::vector<VectorField> fields;   // explicit kind: X_1..X_s
  std::string id;

  /// All monomials of degree <= `degree` as coefficient features.
  static VFBasis polynomial(std::size_t n, int degree) {
    if (n < 1 || degree < 0) throw ParseError("VFBasis: invalid dimension or degree");
    VFBasis b;
    b.kind = Kind::Polynomial;
    b.dimension = n;
    for (const auto& m : monomials_up_to(n, degree)) b.features.push_back(Polynomial::term(m, 1.0));
    b.id = "poly-deg" + std::to_string(degree);
    return b;
  }

  static VFBasis polynomial_features(std::size_t n, std::vector<Polynomial> feats, std::string id = "poly-custom") {
    if (feats.empty()) throw ParseError("VFBasis: need at least one feature");
    for (const auto& p : feats)
      if (p.dimension() != n) throw DimensionError("VFBasis: feature dimension mismatch");
    VFBasis b;
    b.dimension = n;
    b.features = std::move(feats);
    b.id = std::move(id);
    return b;
  }

  static VFBasis explicit_fields(std::vector<VectorField> fs, std::string id = "explicit") {
    if (fs.empty()) throw ParseError("VFBasis: need at least one field");
    VFBasis b;
    b.kind = Kind::Explicit;
    b.dimension = fs.front().dimension();
    for (const auto& f : fs)
      if (f.dimension() != b.dimension) throw DimensionError("VFBasis: explicit fields differ in dimension");
    b.fields = std::move(fs);
    b.id = std::move(id);
    return b;
  }

  std::size_t feature_count() const { return kind == Kind::Polynomial ? features.size() : fields.size(); }

  Eigen::Index coefficient_count() const {
    return static_cast<Eigen::Index>(kind == Kind::Polynomial ? dimension * features.size() : fields.size());
  }
};

struct ExtendedFeatureMatrix {
  Eigen::MatrixXd matrix;
  VFBasis basis;
  std::string dataset_id;
  std::string function_id;
  std::vector<Eigen::Index> degenerate_columns;  // identically zero over the data
};

namespace detail {
inline std::vector<Eigen::Index> zero_columns(const Eigen::MatrixXd& m) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    if (m.col(c).cwiseAbs().maxCoeff() == 0.0) out.push_back(c);
  return out;
}
}  // namespace detail

/// Extended feature matrix for a vector-valued function F = (f_1..f_k).
///
/// For each point x_i the block b_i (n x nm) holds the feature row B_i placed
/// at offset a*m in row a; the point contributes J_F(x_i) b_i, k rows of
/// length nm. Blocks are stacked in point order.
inline ExtendedFeatureMatrix build_extended_matrix(const std::vector<const MLFunction*>& components,
                                                   const PointSet& data, const VFBasis& basis,
                                                   std::string dataset_id = {}, std::string function_id = {}) {
  if (basis.kind != VFBasis::Kind::Polynomial) throw ParseError("build_extended_matrix: needs a polynomial basis");
  if (data.rows() == 0) throw ParseError("build_extended_matrix: empty dataset");
  if (components.empty()) throw ParseError("build_extended_matrix: no function components");
  const std::size_t n = basis.dimension;
  if (static_cast<std::size_t>(data.cols()) != n) throw DimensionError("build_extended_matrix: data dimension");
  const auto m = static_cast<Eigen::Index>(basis.features.size());
  const auto k = static_cast<Eigen::Index>(components.size());
  std::vector<Eigen::MatrixXd> grads;
  for (const MLFunction* f : components) {
    if (f->input_dim() != n) throw DimensionError("build_extended_matrix: function dimension");
    f->require_gradient();
    grads.push_back(f->gradients(data));
  }
  ExtendedFeatureMatrix out;
  out.matrix = Eigen::MatrixXd::Zero(data.rows() * k, static_cast<Eigen::Index>(n) * m);
  Eigen::VectorXd feat(m);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const Eigen::VectorXd x = data.row(i).transpose();
    for (Eigen::Index j = 0; j < m; ++j) feat[j] = eval(basis.features[static_cast<std::size_t>(j)], x);
    for (Eigen::Index c = 0; c < k; ++c) {
      for (std::size_t a = 0; a < n; ++a) {
        const double da = grads[static_cast<std::size_t>(c)](i, static_cast<Eigen::Index>(a));
        out.matrix.block(i * k + c, static_cast<Eigen::Index>(a) * m, 1, m) = da * feat.transpose();
      }
    }
  }
  if (!out.matrix.allFinite()) throw NumericError("build_extended_matrix: non-finite entries");
  out.basis = basis;
  out.dataset_id = std::move(dataset_id);
  out.function_id = std::move(function_id);
  out.degenerate_columns = detail::zero_columns(out.matrix);
  return out;
}

inline ExtendedFeatureMatrix build_extended_matrix(const MLFunction& f, const PointSet& data, const VFBasis& basis,
                                                   std::string dataset_id = {}, std::string function_id = {}) {
  return build_extended_matrix(std::vector<const MLFunction*>{&f}, data, basis, std::move(dataset_id),
                               std::move(function_id));
}

/// Matrix with entry (j, i) = X_i(f)(x_j) for an explicit field basis.
inline ExtendedFeatureMatrix build_killing_matrix(const MLFunction& f, const PointSet& data, const VFBasis& basis,
                                                  std::string dataset_id = {}, std::string function_id = {}) {
  if (basis.kind != VFBasis::Kind::Explicit) throw ParseError("build_killing_matrix: needs an explicit field basis");
  if (data.rows() == 0) throw ParseError("build_killing_matrix: empty dataset");
  ExtendedFeatureMatrix out;
  out.matrix.resize(data.rows(), static_cast<Eigen::Index>(basis.fields.size()));
  for (std::size_t i = 0; i < basis.fields.size(); ++i) {
    out.matrix.col(static_cast<Eigen::Index>(i)) = apply_numeric(basis.fields[i], f, data);
  }
  if (!out.matrix.allFinite()) throw NumericError("build_killing_matrix: non-finite entries");
  out.basis = basis;
  out.dataset_id = std::move(dataset_id);
  out.function_id = std::move(function_id);
  out.degenerate_columns = detail::zero_columns(out.matrix);
  return out;
}

/// Vector fields encoded by the columns of W.
inline std::vector<VectorField> realize_fields(const VFBasis& basis, const Eigen::MatrixXd& w) {
  if (w.rows() != basis.coefficient_count()) throw DimensionError("realize_fields: W has the wrong number of rows");
  std::vector<VectorField> out;
  const std::size_t n = basis.dimension;
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    if (basis.kind == VFBasis::Kind::Polynomial) {
      const std::size_t m = basis.features.size();
      std::vector<Polynomial> alpha(n, Polynomial(n));
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t j = 0; j < m; ++j)
          alpha[a] += w(static_cast<Eigen::Index>(a * m + j), c) * basis.features[j];
      out.emplace_back(std::move(alpha));
    } else {
      VectorField x = VectorField::zero(n);
      for (std::size_t i = 0; i < basis.fields.size(); ++i) x += w(static_cast<Eigen::Index>(i), c) * basis.fields[i];
      out.push_back(std::move(x));
    }
  }
  return out;
}

struct GeneratorEstimate {
  VFBasis basis;
  Eigen::MatrixXd w;            // columns = generators, orthonormal
  Eigen::VectorXd column_loss;  // final loss of each column
  double total_loss = 0.0;
  std::vector<VectorField> fields;
  std::vector<double> history;
  std::vector<Eigen::Index> degenerate_columns;
  std::string provenance;  // "polynomial" or "killing"
};

/// Per-column loss of the residual R = M W: mean |r| (L1) or mean r^2 (MSE).
inline Eigen::VectorXd column_losses(const Eigen::MatrixXd& residual, LossKind kind) {
  const auto rows = static_cast<double>(residual.rows());
  if (kind == LossKind::L1) return residual.cwiseAbs().colwise().sum().transpose() / rows;
  return residual.cwiseAbs2().colwise().sum().transpose() / rows;
}

/// Objective sum_c loss(M w_c) with its Euclidean gradient.
inline Objective column_loss_objective(const Eigen::MatrixXd& m, LossKind kind) {
  return [&m, kind](const Eigen::MatrixXd& w, Eigen::MatrixXd* grad) {
    const Eigen::MatrixXd r = m * w;
    const auto rows = static_cast<double>(m.rows());
    if (grad) {
      if (kind == LossKind::L1) {
        *grad = m.transpose() * r.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }) / rows;
      } else {
        *grad = (2.0 / rows) * (m.transpose() * r);
      }
    }
    return column_losses(r, kind).sum();
  };
}

/// Minimizes the summed column loss of M W over W with k orthonormal columns.
inline GeneratorEstimate estimate_generators(const ExtendedFeatureMatrix& em, int k, const TrainConfig& config) {
  const Eigen::MatrixXd& m = em.matrix;
  if (k < 1 || k > m.cols()) throw ConfigError("k", "generator count must be in [1, columns of M]");
  Rng rng(config.seed);
  const Eigen::MatrixXd w0 = random_stiefel(m.cols(), k, rng);
  TrainConfig cfg = config;
  if (cfg.optimizer == OptimizerKind::Adam) throw ConfigError("optimizer", "discovery needs a Riemannian optimizer");
  const MinimizeResult res = minimize(column_loss_objective(m, cfg.loss), w0, Constraint::Stiefel, cfg);
  GeneratorEstimate est;
  est.basis = em.basis;
  est.w = res.point;
  est.column_loss = column_losses(m * res.point, cfg.loss);
  est.total_loss = res.best_loss;
  est.history = res.history;
  est.fields = realize_fields(em.basis, res.point);
  est.degenerate_columns = em.degenerate_columns;
  est.provenance = em.basis.kind == VFBasis::Kind::Polynomial ? "polynomial" : "killing";
  return est;
}

struct ElbowResult {
  int k = 1;
  std::vector<double> losses;  // total loss for k = 1..k_max
  std::vector<GeneratorEstimate> estimates;
};

/// Knee of a non-decreasing loss-vs-count curve.
///
/// The curve is anchored at (0, 0) (no generators, no loss) and both axes are
/// scaled to [0, 1]; the chosen k maximizes the distance below the chord from
/// the anchor to the last point. A curve whose last value is below
/// `flat_tol` (in the same units as the losses) is treated as flat, meaning
/// every tried k is a symmetry, and k_max is returned.
inline int knee_index(const std::vector<double>& losses, double flat_tol) {
  const int kmax = static_cast<int>(losses.size());
  if (kmax <= 1) return 1;
  const double top = losses.back();
  if (!(top > flat_tol)) return kmax;
  int best = kmax;
  double best_d = 0.0;
  for (int k = 1; k < kmax; ++k) {
    const double xk = static_cast<double>(k) / kmax;
    const double yk = losses[static_cast<std::size_t>(k - 1)] / top;
    const double d = (xk - yk) / std::sqrt(2.0);  // signed distance below the chord y = x
    if (d > best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

/// Runs estimate_generators for k = 1..k_max and picks k at the elbow.
inline ElbowResult select_generator_count(const ExtendedFeatureMatrix& em, int k_max, const TrainConfig& config) {
  if (k_max < 1) throw ConfigError("k_max", "k_max must be >= 1");
  k_max = std::min<int>(k_max, static_cast<int>(em.matrix.cols()));
  ElbowResult out;
  for (int k = 1; k <= k_max; ++k) {
    out.estimates.push_back(estimate_generators(em, k, config));
    out.losses.push_back(out.estimates.back().total_loss);
  }
  // Reference scale: mean loss of a single coordinate direction.
  const Eigen::VectorXd ref = column_losses(em.matrix, config.loss);
  const double flat_tol = 1e-3 * ref.mean();
  out.k = knee_index(out.losses, flat_tol);
  return out;
}

}  // namespace symdisc
