#pragma once

// Sparse multivariate polynomials with real coefficients.
//
// Terms are kept in a map ordered graded-lexicographically (total degree
// ascending, ties broken with x1 before x2 before ...). Coefficients whose
// magnitude falls below kPruneThreshold after any arithmetic are dropped, so a
// Polynomial never stores a zero coefficient.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "symdisc/error.hpp"

namespace symdisc {

inline constexpr int kDefaultDegreeCap = 8;
inline constexpr double kPruneThreshold = 1e-14;

class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::vector<int> exponents) : exps_(std::move(exponents)) {
    for (int e : exps_) {
      if (e < 0) throw ParseError("monomial exponents must be non-negative");
    }
  }

  static Monomial one(std::size_t dimension) { return Monomial(std::vector<int>(dimension, 0)); }

  static Monomial variable(std::size_t dimension, std::size_t axis, int power = 1) {
    if (axis >= dimension) throw DimensionError("variable axis out of range");
    std::vector<int> e(dimension, 0);
    e[axis] = power;
    return Monomial(std::move(e));
  }

  std::size_t dimension() const { return exps_.size(); }
  int degree() const { return std::accumulate(exps_.begin(), exps_.end(), 0); }
  int operator[](std::size_t i) const { return exps_[i]; }
  const std::vector<int>& exponents() const { return exps_; }

  friend Monomial operator*(const Monomial& a, const Monomial& b) {
    if (a.dimension() != b.dimension()) throw DimensionError("monomial dimension mismatch");
    std::vector<int> e(a.exps_);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += b.exps_[i];
    return Monomial(std::move(e));
  }

  friend bool operator==(const Monomial&, const Monomial&) = default;

 private:
  std::vector<int> exps_;
};

/// Graded lexicographic order.
struct GrlexLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    const int da = a.degree();
    const int db = b.degree();
    if (da != db) return da < db;
    // Within a degree, larger leading exponents come first: x^2, xy, y^2.
    return b.exponents() < a.exponents();
  }
};

/// All monomials in `dimension` variables of total degree <= max_degree, in
/// graded lexicographic order.
inline std::vector<Monomial> monomials_up_to(std::size_t dimension, int max_degree) {
  std::vector<Monomial> out;
  std::vector<int> e(dimension, 0);
  for (int d = 0; d <= max_degree; ++d) {
    std::vector<Monomial> level;
    // Enumerate compositions of d into `dimension` parts.
    auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
      if (pos + 1 == dimension) {
        e[pos] = remaining;
        level.emplace_back(e);
        return;
      }
      for (int k = remaining; k >= 0; --k) {
        e[pos] = k;
        self(self, pos + 1, remaining - k);
      }
    };
    if (dimension == 0) break;
    rec(rec, 0, d);
    std::sort(level.begin(), level.end(), GrlexLess{});
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GrlexLess>;

  Polynomial() = default;
  explicit Polynomial(std::size_t dimension, int degree_cap = kDefaultDegreeCap)
      : dim_(dimension), cap_(degree_cap) {}

  Polynomial(std::size_t dimension, TermMap terms, int degree_cap = kDefaultDegreeCap)
      : dim_(dimension), cap_(degree_cap) {
    for (auto& [m, c] : terms) add_term(m, c);
  }

  static Polynomial constant(std::size_t dimension, double c) {
    Polynomial p(dimension);
    p.add_term(Monomial::one(dimension), c);
    return p;
  }

  static Polynomial variable(std::size_t dimension, std::size_t axis) {
    Polynomial p(dimension);
    p.add_term(Monomial::variable(dimension, axis), 1.0);
    return p;
  }

  static Polynomial term(const Monomial& m, double c, int degree_cap = kDefaultDegreeCap) {
    Polynomial p(m.dimension(), degree_cap);
    p.add_term(m, c);
    return p;
  }

  std::size_t dimension() const { return dim_; }
  int degree_cap() const { return cap_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  int degree() const { return terms_.empty() ? -1 : terms_.rbegin()->first.degree(); }

  double coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
  }

  /// Copy with a different degree cap; fails if the polynomial already exceeds it.
  Polynomial with_degree_cap(int cap) const {
    Polynomial p(*this);
    p.cap_ = cap;
    p.check_cap();
    return p;
  }

  /// Adds c * m in place, pruning the result.
  void add_term(const Monomial& m, double c) {
    if (m.dimension() != dim_) throw DimensionError("monomial dimension does not match polynomial");
    if (m.degree() > cap_) {
      throw DegreeCapError("monomial degree " + std::to_string(m.degree()) + " exceeds cap " +
                           std::to_string(cap_));
    }
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) it->second += c;
    if (!(std::abs(it->second) >= kPruneThreshold)) terms_.erase(it);
  }

  Polynomial& operator+=(const Polynomial& o) {
    require_same_dim(o);
    cap_ = std::max(cap_, o.cap_);
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }

  Polynomial& operator-=(const Polynomial& o) {
    require_same_dim(o);
    cap_ = std::max(cap_, o.cap_);
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }

  Polynomial& operator*=(double s) {
    TermMap old;
    old.swap(terms_);
    for (const auto& [m, c] : old) add_term(m, s * c);
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator-(Polynomial a) { return a *= -1.0; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }

  /// Product with an explicit degree cap for the result.
  static Polynomial multiply(const Polynomial& a, const Polynomial& b, int cap) {
    a.require_same_dim(b);
    if (!a.is_zero() && !b.is_zero() && a.degree() + b.degree() > cap) {
      throw DegreeCapError("product degree " + std::to_string(a.degree() + b.degree()) +
                           " exceeds cap " + std::to_string(cap));
    }
    Polynomial out(a.dim_, cap);
    for (const auto& [ma, ca] : a.terms_) {
      for (const auto& [mb, cb] : b.terms_) out.add_term(ma * mb, ca * cb);
    }
    return out;
  }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    return multiply(a, b, std::max(a.cap_, b.cap_));
  }

  /// Exact equality of term maps (coefficients compared bitwise).
  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.dim_ == b.dim_ && a.terms_ == b.terms_;
  }

  void require_same_dim(const Polynomial& o) const {
    if (o.dim_ != dim_) {
      throw DimensionError("polynomial dimension mismatch: " + std::to_string(dim_) + " vs " +
                           std::to_string(o.dim_));
    }
  }

 private:
  void check_cap() const {
    if (degree() > cap_) {
      throw DegreeCapError("polynomial degree " + std::to_string(degree()) + " exceeds cap " +
                           std::to_string(cap_));
    }
  }

  std::size_t dim_ = 0;
  int cap_ = kDefaultDegreeCap;
  TermMap terms_;
};

inline Polynomial add(const Polynomial& a, const Polynomial& b) { return a + b; }
inline Polynomial mul(const Polynomial& a, const Polynomial& b) { return a * b; }

/// Exact partial derivative with respect to x_{axis+1}.
inline Polynomial partial(const Polynomial& p, std::size_t axis) {
  if (axis >= p.dimension()) throw DimensionError("partial: axis out of range");
  Polynomial out(p.dimension(), p.degree_cap());
  for (const auto& [m, c] : p.terms()) {
    const int k = m[axis];
    if (k == 0) continue;
    std::vector<int> e = m.exponents();
    e[axis] -= 1;
    out.add_term(Monomial(std::move(e)), c * k);
  }
  return out;
}

/// Evaluates p at `point` summing terms in graded lexicographic order.
inline double eval(const Polynomial& p, const double* point, std::size_t length) {
  if (length != p.dimension()) {
    throw DimensionError("eval: point has length " + std::to_string(length) +
                         ", polynomial dimension " + std::to_string(p.dimension()));
  }
  double sum = 0.0;
  for (const auto& [m, c] : p.terms()) {
    double v = c;
    for (std::size_t i = 0; i < length; ++i) {
      for (int k = 0; k < m[i]; ++k) v *= point[i];
    }
    sum += v;
  }
  return sum;
}

inline double eval(const Polynomial& p, const Eigen::VectorXd& point) {
  return eval(p, point.data(), static_cast<std::size_t>(point.size()));
}

inline double eval(const Polynomial& p, const std::vector<double>& point) {
  return eval(p, point.data(), point.size());
}

/// Axis-aligned box [lower, upper].
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

  /// The cube [lo, hi]^n.
  static Box cube(std::size_t n, double lo, double hi) {
    return Box(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), lo),
               Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), hi));
  }

  std::size_t dimension() const { return static_cast<std::size_t>(lower.size()); }

  void validate() const {
    if (lower.size() != upper.size()) throw DimensionError("box bounds have different lengths");
    if (lower.size() == 0) throw ParseError("box must have positive dimension");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      if (!(std::isfinite(lower[i]) && std::isfinite(upper[i]) && lower[i] < upper[i])) {
        throw ParseError("invalid box: need lower[i] < upper[i] on axis " + std::to_string(i));
      }
    }
  }

  double volume() const { return (upper - lower).prod(); }

  bool contains(const Eigen::VectorXd& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
};

/// Exact integral of p over the box using closed-form monomial antiderivatives.
inline double integrate_box(const Polynomial& p, const Box& domain) {
  domain.validate();
  if (domain.dimension() != p.dimension()) throw DimensionError("integrate_box: dimension mismatch");
  double sum = 0.0;
  for (const auto& [m, c] : p.terms()) {
    double v = c;
    for (std::size_t i = 0; i < p.dimension(); ++i) {
      const int k = m[i];
      const double l = domain.lower[static_cast<Eigen::Index>(i)];
      const double u = domain.upper[static_cast<Eigen::Index>(i)];
      v *= (std::pow(u, k + 1) - std::pow(l, k + 1)) / (k + 1);
    }
    sum += v;
  }
  return sum;
}

/// L2(box) inner product of two polynomials, computed exactly.
inline double inner_product(const Polynomial& a, const Polynomial& b, const Box& domain) {
  const int cap = std::max({a.degree_cap(), b.degree_cap(), a.degree() + b.degree()});
  return integrate_box(Polynomial::multiply(a, b, cap), domain);
}

}  // namespace symdisc
