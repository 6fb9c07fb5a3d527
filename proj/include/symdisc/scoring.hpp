#pragma once

// Similarity of vector fields under a metric, gradient-based symmetry scores,
// function-space cosines, and a flow-drift robustness harness.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "symdisc/data.hpp"
#include "symdisc/error.hpp"
#include "symdisc/function.hpp"
#include "symdisc/geom.hpp"
#include "symdisc/poly.hpp"
#include "symdisc/rng.hpp"

namespace symdisc {

inline constexpr double kNormFloor = 1e-12;
inline constexpr int kDefaultMcSamples = 100000;
inline constexpr int kBootstrapResamples = 200;

struct SimilarityReport {
  double value = 0.0;
  double std_error = 0.0;  // bootstrap standard error of the mean
  std::string method;      // "monte-carlo" or "dataset"
  int samples = 0;         // points drawn, including excluded ones
  int excluded = 0;        // points where a field norm fell below the floor
  std::string metric_id;
};

namespace detail {

inline double bootstrap_se(const std::vector<double>& v, std::uint64_t seed) {
  if (v.size() < 2) return 0.0;
  Rng rng = Rng(seed).split(0xB007);
  std::vector<double> means;
  means.reserve(kBootstrapResamples);
  for (int b = 0; b < kBootstrapResamples; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[rng.below(v.size())];
    means.push_back(s / static_cast<double>(v.size()));
  }
  double mu = 0.0;
  for (double m : means) mu += m;
  mu /= static_cast<double>(means.size());
  double var = 0.0;
  for (double m : means) var += (m - mu) * (m - mu);
  return std::sqrt(var / static_cast<double>(means.size() - 1));
}

inline std::string metric_id(const MetricTensor& g) { return g.is_euclidean() ? "euclidean" : "polynomial"; }

/// Mean of a pointwise cosine over the rows of `points`; `cosine` returns a
/// negative value to mark an excluded point.
template <class PointCosine>
SimilarityReport average_cosine(const PointSet& points, PointCosine cosine, std::uint64_t seed) {
  SimilarityReport rep;
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double c = cosine(Eigen::VectorXd(points.row(i).transpose()));
    if (c < 0.0) {
      ++rep.excluded;
    } else {
      vals.push_back(std::min(c, 1.0));
    }
  }
  rep.samples = static_cast<int>(points.rows());
  if (vals.empty()) throw NumericError("similarity: every sample point has a degenerate field norm");
  double s = 0.0;
  for (double v : vals) s += v;
  rep.value = s / static_cast<double>(vals.size());
  rep.std_error = bootstrap_se(vals, seed);
  return rep;
}

}  // namespace detail

/// Pointwise |<X, Y>_g| / (|X|_g |Y|_g) at x, or -1 when a norm is below the floor.
inline double metric_cosine(const VectorField& x, const VectorField& y, const MetricTensor& g,
                            const Eigen::VectorXd& p) {
  const Eigen::VectorXd a = x.at(p);
  const Eigen::VectorXd b = y.at(p);
  const Eigen::MatrixXd gm = g.at(p);
  const double na = std::sqrt(std::max(0.0, a.dot(gm * a)));
  const double nb = std::sqrt(std::max(0.0, b.dot(gm * b)));
  if (na < kNormFloor || nb < kNormFloor) return -1.0;
  return std::abs(a.dot(gm * b)) / (na * nb);
}

inline void check_similarity_dims(const VectorField& x, const VectorField& y, const MetricTensor& g,
                                  std::size_t region_dim) {
  if (x.dimension() != y.dimension() || g.dimension() != x.dimension() || region_dim != x.dimension()) {
    throw DimensionError("similarity: fields, metric and region must share one dimension");
  }
}

/// Average over the given points (a dataset).
inline SimilarityReport similarity(const VectorField& x, const VectorField& y, const MetricTensor& g,
                                   const PointSet& points, std::uint64_t seed = 0) {
  check_similarity_dims(x, y, g, static_cast<std::size_t>(points.cols()));
  if (points.rows() == 0) throw ParseError("similarity: no points");
  SimilarityReport rep =
      detail::average_cosine(points, [&](const Eigen::VectorXd& p) { return metric_cosine(x, y, g, p); }, seed);
  rep.method = "dataset";
  rep.metric_id = detail::metric_id(g);
  return rep;
}

/// Monte Carlo average with uniform samples on a box.
inline SimilarityReport similarity(const VectorField& x, const VectorField& y, const MetricTensor& g,
                                   const Box& region, int samples = kDefaultMcSamples, std::uint64_t seed = 0) {
  region.validate();
  check_similarity_dims(x, y, g, region.dimension());
  if (samples < 1) throw ConfigError("samples", "sample count must be >= 1");
  Rng rng(seed);
  SimilarityReport rep = similarity(x, y, g, sample_box(region, samples, rng), seed);
  rep.method = "monte-carlo";
  return rep;
}

/// Metric cosine between X and the gradient field grad_g f = g^{-1} df:
/// |X(f)| / (|X|_g sqrt(df^T g^{-1} df)). Zero means X-invariant.
inline double gradient_cosine(const MLFunction& f, const VectorField& x, const MetricTensor& g,
                              const Eigen::VectorXd& p) {
  const Eigen::VectorXd v = x.at(p);
  const Eigen::VectorXd df = f.gradient(p);
  const Eigen::MatrixXd gm = g.at(p);
  const double nv = std::sqrt(std::max(0.0, v.dot(gm * v)));
  const Eigen::VectorXd grad_g = gm.ldlt().solve(df);
  const double ng = std::sqrt(std::max(0.0, df.dot(grad_g)));
  if (nv < kNormFloor || ng < kNormFloor || !std::isfinite(ng)) return -1.0;
  return std::abs(v.dot(df)) / (nv * ng);
}

inline SimilarityReport symmetry_score(const MLFunction& f, const VectorField& x, const MetricTensor& g,
                                       const PointSet& points, std::uint64_t seed = 0) {
  f.require_gradient();
  if (f.input_dim() != x.dimension() || g.dimension() != x.dimension() ||
      static_cast<std::size_t>(points.cols()) != x.dimension()) {
    throw DimensionError("symmetry_score: function, field, metric and points must share one dimension");
  }
  if (points.rows() == 0) throw ParseError("symmetry_score: no points");
  SimilarityReport rep =
      detail::average_cosine(points, [&](const Eigen::VectorXd& p) { return gradient_cosine(f, x, g, p); }, seed);
  rep.method = "dataset";
  rep.metric_id = detail::metric_id(g);
  return rep;
}

inline SimilarityReport symmetry_score(const MLFunction& f, const VectorField& x, const MetricTensor& g,
                                       const Box& region, int samples = kDefaultMcSamples, std::uint64_t seed = 0) {
  region.validate();
  if (samples < 1) throw ConfigError("samples", "sample count must be >= 1");
  Rng rng(seed);
  SimilarityReport rep = symmetry_score(f, x, g, sample_box(region, samples, rng), seed);
  rep.method = "monte-carlo";
  return rep;
}

/// <a, b> / (|a| |b|) in L2 of the box, computed exactly.
inline double function_cosine(const Polynomial& a, const Polynomial& b, const Box& domain) {
  const double ab = inner_product(a, b, domain);
  const double aa = inner_product(a, a, domain);
  const double bb = inner_product(b, b, domain);
  if (!(aa > 0.0) || !(bb > 0.0)) throw NumericError("function_cosine: zero function");
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

struct RobustnessTrial {
  Eigen::VectorXd start;
  double max_drift = 0.0;
  double max_excess = 0.0;  // max over steps of drift - lambda * eps * t
  bool left_domain = false;
  bool diverged = false;
};

struct RobustnessReport {
  double epsilon = 0.0;         // max |f - fhat| over the probe grid
  double lambda = 0.0;          // Lipschitz proxy of Xhat on the domain
  double apply_residual = 0.0;  // max |Xhat(fhat)| over the probe grid
  double max_excess = 0.0;
  double tolerance = 1e-6;
  int trials = 0;
  int diverged = 0;
  int left_domain = 0;
  std::vector<RobustnessTrial> per_trial;
  bool passed = false;
};

struct RobustnessOptions {
  int steps = 1000;           // RK4 steps per trajectory
  int grid_per_axis = 41;     // probe grid for eps and the residual
  double tolerance = 1e-6;
  double residual_tol = 1e-8;
};

namespace detail {
inline PointSet grid_points(const Box& box, int per_axis) {
  const auto n = static_cast<Eigen::Index>(box.dimension());
  const int g = std::max(2, per_axis);
  Eigen::Index total = 1;
  for (Eigen::Index a = 0; a < n; ++a) total *= g;
  PointSet pts(total, n);
  for (Eigen::Index r = 0; r < total; ++r) {
    Eigen::Index rem = r;
    for (Eigen::Index a = 0; a < n; ++a) {
      const Eigen::Index i = rem % g;
      rem /= g;
      pts(r, a) = box.lower[a] + (box.upper[a] - box.lower[a]) * static_cast<double>(i) / (g - 1);
    }
  }
  return pts;
}
}  // namespace detail

/// Integrates the flow of Xhat from random starts in the domain and measures
/// |f(Psi(t, z)) - f(z)| - lambda * eps * t while the trajectory stays in the
/// domain. Xhat must annihilate fhat up to `residual_tol` on the probe grid.
inline RobustnessReport robustness_check(const MLFunction& f, const MLFunction& fhat, const VectorField& xhat,
                                         const Box& domain, double t_max, int trials, std::uint64_t seed,
                                         const RobustnessOptions& opt = {}) {
  domain.validate();
  if (f.input_dim() != xhat.dimension() || fhat.input_dim() != xhat.dimension() ||
      domain.dimension() != xhat.dimension()) {
    throw DimensionError("robustness_check: dimension mismatch");
  }
  if (!(t_max >= 0.0)) throw ConfigError("t_max", "t_max must be >= 0");
  if (trials < 1) throw ConfigError("trials", "trials must be >= 1");
  RobustnessReport rep;
  rep.tolerance = opt.tolerance;
  rep.trials = trials;
  const PointSet probe = detail::grid_points(domain, opt.grid_per_axis);
  const Eigen::VectorXd resid = apply_numeric(xhat, fhat, probe);
  rep.apply_residual = resid.cwiseAbs().maxCoeff();
  if (rep.apply_residual > opt.residual_tol) {
    throw NumericError("robustness_check: Xhat does not annihilate fhat (residual " +
                       std::to_string(rep.apply_residual) + ")");
  }
  rep.epsilon = (f.values(probe) - fhat.values(probe)).cwiseAbs().maxCoeff();
  rep.lambda = lipschitz_proxy(xhat, domain);

  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    RobustnessTrial tr;
    tr.start = sample_box(domain, 1, rng).row(0).transpose();
    const double f0 = f.value(tr.start);
    try {
      const FlowTrace trace = t_max == 0.0 ? FlowTrace{{0.0}, tr.start.transpose(), xhat, false, std::nullopt}
                                           : flow(xhat, tr.start, t_max, opt.steps, domain);
      tr.left_domain = trace.left_domain;
      for (std::size_t k = 0; k < trace.times.size(); ++k) {
        const double time = trace.times[k];
        if (trace.exit_time && time >= *trace.exit_time) break;
        const double drift = std::abs(f.value(trace.points.row(static_cast<Eigen::Index>(k)).transpose()) - f0);
        tr.max_drift = std::max(tr.max_drift, drift);
        tr.max_excess = std::max(tr.max_excess, drift - rep.lambda * rep.epsilon * time);
      }
    } catch (const IntegrationDiverged&) {
      tr.diverged = true;
      ++rep.diverged;
    }
    if (tr.left_domain) ++rep.left_domain;
    rep.max_excess = std::max(rep.max_excess, tr.max_excess);
    rep.per_trial.push_back(std::move(tr));
  }
  rep.passed = rep.max_excess <= rep.tolerance && rep.diverged == 0;
  return rep;
}

}  // namespace symdisc
