#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "symdisc/error.hpp"
#include "symdisc/poly.hpp"

namespace symdisc {

/// Point sets are stored one point per row.
using PointSet = Eigen::MatrixXd;

/// A differentiable scalar function of n real inputs.
class MLFunction {
 public:
  virtual ~MLFunction() = default;

  virtual std::size_t input_dim() const = 0;
  virtual double value(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;

  virtual bool has_gradient() const { return true; }
  virtual bool smooth() const { return true; }

  virtual Eigen::VectorXd values(const PointSet& points) const {
    Eigen::VectorXd out(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) out[i] = value(points.row(i).transpose());
    return out;
  }

  /// Gradients at every point, one per row.
  virtual Eigen::MatrixXd gradients(const PointSet& points) const {
    require_gradient();
    Eigen::MatrixXd out(points.rows(), points.cols());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      out.row(i) = gradient(points.row(i).transpose()).transpose();
    }
    return out;
  }

  void require_gradient() const {
    if (!has_gradient()) throw NumericError("gradient unavailable for this function");
  }

 protected:
  void check_input(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim()) {
      throw DimensionError("input has length " + std::to_string(x.size()) + ", expected " +
                           std::to_string(input_dim()));
    }
  }
};

/// A fixed polynomial with its exact gradient.
class PolynomialFunction final : public MLFunction {
 public:
  explicit PolynomialFunction(Polynomial p) : p_(std::move(p)) {
    for (std::size_t i = 0; i < p_.dimension(); ++i) grad_.push_back(partial(p_, i));
  }

  std::size_t input_dim() const override { return p_.dimension(); }
  double value(const Eigen::VectorXd& x) const override { return eval(p_, x); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
    check_input(x);
    Eigen::VectorXd g(x.size());
    for (std::size_t i = 0; i < grad_.size(); ++i) g[static_cast<Eigen::Index>(i)] = eval(grad_[i], x);
    return g;
  }
  const Polynomial& polynomial() const { return p_; }

 private:
  Polynomial p_;
  std::vector<Polynomial> grad_;
};

/// Adapter over arbitrary callables; the gradient may be omitted.
class CallableFunction final : public MLFunction {
 public:
  using ValueFn = std::function<double(const Eigen::VectorXd&)>;
  using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  CallableFunction(std::size_t dim, ValueFn f, GradFn g = {})
      : dim_(dim), f_(std::move(f)), g_(std::move(g)) {}

  std::size_t input_dim() const override { return dim_; }
  double value(const Eigen::VectorXd& x) const override { return f_(x); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
    require_gradient();
    return g_(x);
  }
  bool has_gradient() const override { return static_cast<bool>(g_); }

 private:
  std::size_t dim_;
  ValueFn f_;
  GradFn g_;
};

/// Central finite-difference gradient. Test-only oracle; the pipeline never uses it.
inline Eigen::VectorXd finite_difference_gradient(const MLFunction& f, const Eigen::VectorXd& x,
                                                  double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f.value(xp) - f.value(xm)) / (2.0 * h);
  }
  return g;
}

}  // namespace symdisc
