#pragma once

// Vector fields, metrics, Lie derivatives and flows on R^n with polynomial
// coefficients.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "symdisc/error.hpp"
#include "symdisc/function.hpp"
#include "symdisc/poly.hpp"

namespace symdisc {

/// X = sum_i alpha^i d/dx^i with polynomial coefficients alpha^i.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(std::vector<Polynomial> coefficients) : coeffs_(std::move(coefficients)) {
    for (const auto& c : coeffs_) {
      if (c.dimension() != coeffs_.size()) {
        throw DimensionError("vector field coefficient has dimension " + std::to_string(c.dimension()) +
                             ", field has " + std::to_string(coeffs_.size()) + " components");
      }
    }
  }

  static VectorField zero(std::size_t n) { return VectorField(std::vector<Polynomial>(n, Polynomial(n))); }

  /// The coordinate field d/dx^{axis+1}.
  static VectorField coordinate(std::size_t n, std::size_t axis) {
    std::vector<Polynomial> c(n, Polynomial(n));
    c.at(axis) = Polynomial::constant(n, 1.0);
    return VectorField(std::move(c));
  }

  std::size_t dimension() const { return coeffs_.size(); }
  const std::vector<Polynomial>& coefficients() const { return coeffs_; }
  const Polynomial& operator[](std::size_t i) const { return coeffs_[i]; }

  bool is_zero() const {
    for (const auto& c : coeffs_)
      if (!c.is_zero()) return false;
    return true;
  }

  Eigen::VectorXd at(const Eigen::VectorXd& x) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(coeffs_.size()));
    for (std::size_t i = 0; i < coeffs_.size(); ++i) v[static_cast<Eigen::Index>(i)] = eval(coeffs_[i], x);
    return v;
  }

  VectorField& operator+=(const VectorField& o) {
    require_same(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    return *this;
  }
  VectorField& operator*=(double s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
  }
  friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
  friend VectorField operator-(VectorField a, const VectorField& b) { return a += (-1.0) * b; }
  friend VectorField operator*(double s, VectorField a) { return a *= s; }
  friend bool operator==(const VectorField&, const VectorField&) = default;

 private:
  void require_same(const VectorField& o) const {
    if (o.dimension() != dimension()) throw DimensionError("vector field dimension mismatch");
  }
  std::vector<Polynomial> coeffs_;
};

/// X(f) = sum_i alpha^i df/dx^i, computed exactly.
inline Polynomial apply(const VectorField& x, const Polynomial& f) {
  if (f.dimension() != x.dimension()) throw DimensionError("apply: field and function dimensions differ");
  Polynomial out(f.dimension(), f.degree_cap());
  for (std::size_t i = 0; i < x.dimension(); ++i) {
    if (x[i].is_zero()) continue;
    out += x[i] * partial(f, i);
  }
  return out;
}

/// <grad f(x_j), X(x_j)> at every row of `points`.
inline Eigen::VectorXd apply_numeric(const VectorField& x, const MLFunction& f, const PointSet& points) {
  f.require_gradient();
  if (f.input_dim() != x.dimension() || static_cast<std::size_t>(points.cols()) != x.dimension()) {
    throw DimensionError("apply_numeric: dimension mismatch");
  }
  const Eigen::MatrixXd grads = f.gradients(points);
  Eigen::VectorXd out(points.rows());
  for (Eigen::Index j = 0; j < points.rows(); ++j) {
    out[j] = grads.row(j).dot(x.at(points.row(j).transpose()));
  }
  return out;
}

/// Square matrix of polynomials.
using PolyMatrix = std::vector<std::vector<Polynomial>>;

inline Eigen::MatrixXd evaluate(const PolyMatrix& m, const Eigen::VectorXd& x) {
  const auto n = static_cast<Eigen::Index>(m.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out(i, j) = eval(m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], x);
  return out;
}

inline bool is_zero(const PolyMatrix& m) {
  for (const auto& row : m)
    for (const auto& p : row)
      if (!p.is_zero()) return false;
  return true;
}

/// Riemannian metric with polynomial entries g_ij = g_ji.
class MetricTensor {
 public:
  MetricTensor() = default;
  explicit MetricTensor(PolyMatrix entries) : g_(std::move(entries)) {
    const std::size_t n = g_.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (g_[i].size() != n) throw DimensionError("metric must be square");
      for (std::size_t j = 0; j < n; ++j) {
        if (g_[i][j].dimension() != n) throw DimensionError("metric entry has wrong dimension");
      }
      if (g_[i][i].is_zero()) throw ParseError("metric diagonal entry " + std::to_string(i + 1) + " is zero");
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (!(g_[i][j] == g_[j][i])) throw ParseError("metric is not symmetric");
  }

  static MetricTensor euclidean(std::size_t n) {
    PolyMatrix g(n, std::vector<Polynomial>(n, Polynomial(n)));
    for (std::size_t i = 0; i < n; ++i) g[i][i] = Polynomial::constant(n, 1.0);
    return MetricTensor(std::move(g));
  }

  std::size_t dimension() const { return g_.size(); }
  const PolyMatrix& entries() const { return g_; }
  const Polynomial& operator()(std::size_t i, std::size_t j) const { return g_[i][j]; }
  Eigen::MatrixXd at(const Eigen::VectorXd& x) const { return evaluate(g_, x); }

  bool is_euclidean() const { return *this == euclidean(dimension()); }

  friend bool operator==(const MetricTensor& a, const MetricTensor& b) { return a.g_ == b.g_; }

 private:
  PolyMatrix g_;
};

/// (L_X g)_ij = sum_k X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k.
inline PolyMatrix lie_derivative_metric(const VectorField& x, const MetricTensor& g) {
  const std::size_t n = g.dimension();
  if (x.dimension() != n) throw DimensionError("lie_derivative_metric: dimension mismatch");
  // dX[k][i] = d_i X^k
  std::vector<std::vector<Polynomial>> dx(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) dx[k].push_back(partial(x[k], i));
  PolyMatrix out(n, std::vector<Polynomial>(n, Polynomial(n)));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      Polynomial s(n);
      for (std::size_t k = 0; k < n; ++k) {
        s += x[k] * partial(g(i, j), k);
        s += g(k, j) * dx[k][i];
        s += g(i, k) * dx[k][j];
      }
      out[i][j] = s;
      out[j][i] = std::move(s);
    }
  }
  return out;
}

/// Polynomial map R^n -> R^m.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t input_dim, std::vector<Polynomial> components)
      : n_(input_dim), comps_(std::move(components)) {
    for (const auto& c : comps_)
      if (c.dimension() != n_) throw DimensionError("feature map component has wrong dimension");
    for (const auto& c : comps_) {
      std::vector<Polynomial> row;
      for (std::size_t i = 0; i < n_; ++i) row.push_back(partial(c, i));
      jac_.push_back(std::move(row));
    }
  }

  std::size_t input_dim() const { return n_; }
  std::size_t output_dim() const { return comps_.size(); }
  const std::vector<Polynomial>& components() const { return comps_; }
  /// d Phi^a / d x^i as polynomials.
  const Polynomial& jacobian_entry(std::size_t a, std::size_t i) const { return jac_[a][i]; }

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(comps_.size()));
    for (std::size_t a = 0; a < comps_.size(); ++a) v[static_cast<Eigen::Index>(a)] = eval(comps_[a], x);
    return v;
  }

  /// m x n Jacobian at x.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(comps_.size()), static_cast<Eigen::Index>(n_));
    for (std::size_t a = 0; a < comps_.size(); ++a)
      for (std::size_t i = 0; i < n_; ++i)
        j(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(i)) = eval(jac_[a][i], x);
    return j;
  }

 private:
  std::size_t n_ = 0;
  std::vector<Polynomial> comps_;
  std::vector<std::vector<Polynomial>> jac_;
};

/// g = J_Phi^T J_Phi, the metric induced by a Euclidean target space.
inline MetricTensor pullback_metric(const FeatureMap& phi) {
  const std::size_t n = phi.input_dim();
  PolyMatrix g(n, std::vector<Polynomial>(n, Polynomial(n)));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      Polynomial s(n);
      for (std::size_t a = 0; a < phi.output_dim(); ++a) s += phi.jacobian_entry(a, i) * phi.jacobian_entry(a, j);
      g[i][j] = s;
      g[j][i] = std::move(s);
    }
  }
  return MetricTensor(std::move(g));
}

struct FlowTrace {
  std::vector<double> times;
  Eigen::MatrixXd points;  // row k is the state at times[k]
  VectorField generator;
  bool left_domain = false;
  std::optional<double> exit_time;  // first time the state left the domain box
};

/// Raised when the state becomes non-finite; carries the trace up to the last valid step.
class IntegrationDiverged : public NumericError {
 public:
  IntegrationDiverged(double last_valid_time, FlowTrace partial)
      : NumericError("integration diverged after t = " + std::to_string(last_valid_time)),
        last_valid_time_(last_valid_time),
        partial_(std::move(partial)) {}
  double last_valid_time() const { return last_valid_time_; }
  const FlowTrace& partial_trace() const { return partial_; }

 private:
  double last_valid_time_;
  FlowTrace partial_;
};

/// Classic fixed-step RK4 integration of dx/dt = X(x) from `start` to t_end.
inline FlowTrace flow(const VectorField& x, const Eigen::VectorXd& start, double t_end, int steps,
                      const std::optional<Box>& domain = std::nullopt) {
  if (steps < 1) throw ParseError("flow: steps must be >= 1");
  if (static_cast<std::size_t>(start.size()) != x.dimension()) throw DimensionError("flow: start has wrong dimension");
  const double h = t_end / steps;
  FlowTrace trace;
  trace.generator = x;
  trace.times.reserve(static_cast<std::size_t>(steps) + 1);
  trace.points.resize(steps + 1, start.size());
  trace.times.push_back(0.0);
  trace.points.row(0) = start.transpose();
  Eigen::VectorXd s = start;
  auto note_domain = [&](double t) {
    if (domain && !trace.left_domain && !domain->contains(s)) {
      trace.left_domain = true;
      trace.exit_time = t;
    }
  };
  note_domain(0.0);
  for (int k = 1; k <= steps; ++k) {
    const Eigen::VectorXd k1 = x.at(s);
    const Eigen::VectorXd k2 = x.at(s + 0.5 * h * k1);
    const Eigen::VectorXd k3 = x.at(s + 0.5 * h * k2);
    const Eigen::VectorXd k4 = x.at(s + h * k3);
    const Eigen::VectorXd next = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) {
      trace.points.conservativeResize(k, Eigen::NoChange);
      const double last = trace.times.back();
      throw IntegrationDiverged(last, std::move(trace));
    }
    s = next;
    const double t = k == steps ? t_end : k * h;
    trace.times.push_back(t);
    trace.points.row(k) = s.transpose();
    note_domain(t);
  }
  return trace;
}

struct KillingReport {
  std::vector<double> max_residual;  // per field, max |(L_X g)_ij| over samples
  std::vector<bool> passed;
  bool all_passed = true;
  bool vacuous = false;
  std::string warning;
};

/// Evaluates the Lie derivative of g along each field at the samples and flags
/// fields whose largest entry exceeds `tol`.
inline KillingReport killing_basis_check(const std::vector<VectorField>& fields, const MetricTensor& g,
                                         const PointSet& samples, double tol) {
  if (fields.empty()) throw ParseError("killing_basis_check: empty field list");
  KillingReport rep;
  if (samples.rows() == 0) {
    rep.vacuous = true;
    rep.warning = "no sample points; check is vacuous";
  }
  for (const auto& f : fields) {
    const PolyMatrix l = lie_derivative_metric(f, g);
    double worst = 0.0;
    for (Eigen::Index s = 0; s < samples.rows(); ++s) {
      worst = std::max(worst, evaluate(l, samples.row(s).transpose()).cwiseAbs().maxCoeff());
    }
    rep.max_residual.push_back(worst);
    const bool ok = worst <= tol;
    rep.passed.push_back(ok);
    rep.all_passed = rep.all_passed && ok;
  }
  return rep;
}

/// Sup-norm Lipschitz proxy for a polynomial field on a box: the maximum over a
/// grid of max_i sum_j |d alpha^i / d x^j| + max_i |alpha^i|.
inline double lipschitz_proxy(const VectorField& x, const Box& box, int grid_per_axis = 21) {
  const std::size_t n = x.dimension();
  if (box.dimension() != n) throw DimensionError("lipschitz_proxy: dimension mismatch");
  std::vector<std::vector<Polynomial>> dx(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dx[i].push_back(partial(x[i], j));
  const int g = std::max(2, grid_per_axis);
  std::vector<int> idx(n, 0);
  double best = 0.0;
  Eigen::VectorXd p(static_cast<Eigen::Index>(n));
  while (true) {
    for (std::size_t a = 0; a < n; ++a) {
      const auto ai = static_cast<Eigen::Index>(a);
      p[ai] = box.lower[ai] + (box.upper[ai] - box.lower[ai]) * idx[a] / (g - 1);
    }
    double row_max = 0.0;
    double val_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += std::abs(eval(dx[i][j], p));
      row_max = std::max(row_max, s);
      val_max = std::max(val_max, std::abs(eval(x[i], p)));
    }
    best = std::max(best, row_max + val_max);
    std::size_t a = 0;
    while (a < n && ++idx[a] == g) idx[a++] = 0;
    if (a == n) break;
  }
  return best;
}

}  // namespace symdisc
