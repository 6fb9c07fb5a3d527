// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>

#include "symdisc/pipeline.hpp"

using namespace symdisc;
using pipeline::json;

namespace {

// Tolerances and ceilings.
constexpr double kExp1MinSimilarity = 0.98;
constexpr double kExp1DiscoverSeconds = 300.0;
constexpr double kExp1MaxMseRatio = 0.5;
constexpr double kExp1EnforceSeconds = 600.0;
constexpr double kExp2BaselineCosLo = 0.80;
constexpr double kExp2BaselineCosHi = 0.95;
constexpr double kExp2MinEnforcedCos = 0.995;
constexpr double kExp2CoefficientTol = 0.05;
constexpr double kExp2Seconds = 600.0;
constexpr double kExp3CoefficientTol = 0.05;
constexpr double kExp3MinSimilarity = 0.999;
constexpr double kExp3Seconds = 300.0;
constexpr double kMlpGradRelTol = 1e-4;
constexpr double kOtherGradRelTol = 1e-8;
constexpr int kGradPoints = 100;
constexpr double kFlowClosedFormTol = 1e-9;
constexpr double kFlowRoundTripTol = 1e-6;
constexpr double kInvariantEps = 1e-8;
constexpr double kSpanTol = 1e-9;
constexpr int kSoundnessTrials = 1000;
constexpr double kRobustnessTol = 1e-6;
constexpr int kRobustnessTrials = 100;
constexpr double kNullspaceMinCos = 0.999;

struct Outcome {
  bool pass;
  std::string detail;
};

int g_failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++g_failures;
  std::printf("[%s] %s %s: %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Timed {
  json doc;
  double seconds;
};

Timed run_preset(const std::string& name, std::vector<std::string> sets = {}) {
  pipeline::RunContext ctx;
  ctx.quiet = true;
  ctx.config = pipeline::resolve_config("", pipeline::load_preset(name), std::nullopt, sets, &ctx.warnings);
  const auto t0 = std::chrono::steady_clock::now();
  pipeline::run(ctx);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {pipeline::results_document(ctx, "ok"), dt};
}

Polynomial P(const char* s, std::size_t n) { return parse_polynomial(s, n); }

VectorField field(std::initializer_list<const char*> comps) {
  std::vector<Polynomial> c;
  for (const char* s : comps) c.push_back(P(s, comps.size()));
  return VectorField(std::move(c));
}

FeatureMap quadric_features() {
  std::vector<Polynomial> c;
  for (const char* s : {"x1^2", "1.4142135623730951*x1*x2", "1.4142135623730951*x1*x3", "x2^2",
                        "1.4142135623730951*x2*x3", "x3^2"})
    c.push_back(P(s, 3));
  return FeatureMap(3, std::move(c));
}

Outcome exp1_discovery() {
  std::string detail;
  bool ok = true;
  for (int seed : {0, 1, 2}) {
    const Timed r = run_preset("exp1", {"seed=" + std::to_string(seed)});
    const double sim = std::abs(r.doc["outputs"]["similarity"][0][0]["value"].get<double>());
    ok = ok && sim >= kExp1MinSimilarity && r.seconds <= kExp1DiscoverSeconds;
    detail += fmt("seed %d similarity %.5f (%.1fs); ", seed, sim, r.seconds);
  }
  return {ok, detail + fmt("need >= %.2f within %.0fs each", kExp1MinSimilarity, kExp1DiscoverSeconds)};
}

Outcome exp1_enforcement() {
  const Timed r = run_preset("exp1-enforce");
  const json& o = r.doc["outputs"];
  const double base = o["baseline"]["test_mse"], enf = o["enforced"]["test_mse"];
  const double ratio = o["test_mse_ratio"];
  return {ratio <= kExp1MaxMseRatio && r.seconds <= kExp1EnforceSeconds,
          fmt("baseline test MSE %.4f, enforced %.4f, ratio %.4f (need <= %.2f), %.1fs", base, enf, ratio,
              kExp1MaxMseRatio, r.seconds)};
}

Outcome exp2_strip() {
  const Timed r = run_preset("exp2");
  const json& o = r.doc["outputs"];
  const double cb = o["baseline"]["function_cosine"], ce = o["enforced"]["function_cosine"];
  const Polynomial p = io::poly_model_from(o["enforced"]["checkpoint"]).to_polynomial();
  const double c40 = p.coefficient(Monomial({4, 0})), c22 = p.coefficient(Monomial({2, 2}));
  const bool ok = cb >= kExp2BaselineCosLo && cb <= kExp2BaselineCosHi && ce >= kExp2MinEnforcedCos &&
                  std::abs(c40 - 2.0) <= kExp2CoefficientTol && std::abs(c22 + 2.0) <= kExp2CoefficientTol &&
                  r.seconds <= kExp2Seconds;
  return {ok, fmt("baseline cosine %.4f, enforced cosine %.6f, x^4 %.4f, x^2y^2 %.4f, %.1fs", cb, ce, c40, c22,
                  r.seconds)};
}

Outcome exp3_killing() {
  const Timed r = run_preset("exp3");
  const json& o = r.doc["outputs"];
  const json& c = o["estimate"]["coefficients"][0];
  const double c1 = c[0], c2 = c[1], c3 = c[2];
  const double h = 1.0 / std::numbers::sqrt2;
  const double sim = o["similarity"][0][0]["value"];
  const bool ok = std::abs(c1) <= kExp3CoefficientTol && std::abs(std::abs(c2) - h) <= kExp3CoefficientTol &&
                  std::abs(std::abs(c3) - h) <= kExp3CoefficientTol && c2 * c3 < 0 && sim >= kExp3MinSimilarity &&
                  r.seconds <= kExp3Seconds;
  return {ok, fmt("coefficients (%.4f, %.4f, %.4f), similarity %.6f, %.1fs", c1, c2, c3, sim, r.seconds)};
}

Outcome killing_verification() {
  const MetricTensor g = pullback_metric(quadric_features());
  bool all_zero = true;
  for (const auto& x : {field({"0", "-x3", "x2"}), field({"-x3", "0", "x1"}), field({"-x2", "x1", "0"})})
    all_zero = all_zero && is_zero(lie_derivative_metric(x, g));
  const auto l = lie_derivative_metric(field({"x1", "0"}), MetricTensor::euclidean(2));
  const bool scaling = l[0][0] == Polynomial::constant(2, 2.0) && l[0][1].is_zero() && l[1][1].is_zero();
  Rng rng(0);
  const auto rep = killing_basis_check({field({"x1", "0"})}, MetricTensor::euclidean(2),
                                       sample_box(Box::cube(2, -1, 1), 10, rng), 1e-9);
  return {all_zero && scaling && !rep.all_passed,
          fmt("rotations exact zero: %s; scaling residual %.3g (fails: %s)", all_zero ? "yes" : "no",
              rep.max_residual[0], rep.all_passed ? "no" : "yes")};
}

Outcome gradient_oracles() {
  Rng rng(42);
  auto worst = [&](const MLFunction& f, double radius) {
    double w = 0.0;
    for (int i = 0; i < kGradPoints; ++i) {
      Eigen::VectorXd x(static_cast<Eigen::Index>(f.input_dim()));
      for (Eigen::Index a = 0; a < x.size(); ++a) x[a] = rng.uniform(-radius, radius);
      const Eigen::VectorXd g = f.gradient(x);
      const Eigen::VectorXd fd = finite_difference_gradient(f, x, 1e-5);
      w = std::max(w, (g - fd).norm() / std::max(g.norm(), 1.0));
    }
    return w;
  };
  const PolynomialFunction poly(quartic_target());
  PolyModel pm = PolyModel::full(2, 4);
  Eigen::VectorXd w(pm.weights().size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1, 1);
  pm.set_weights(w);
  Rng init(7);
  const MlpModel mlp = MlpModel::initialize({2, 64, 64, 1}, Activation::Tanh, init);
  const LogisticFeatureModel logi(quadric_features(), (Eigen::VectorXd(6) << 1.0, -0.3, 0.2, 0.5, -0.7, 0.4).finished(),
                                  -0.5);
  const CallableFunction call(2, [](const Eigen::VectorXd& x) { return std::sin(x[0]) * x[1]; },
                              [](const Eigen::VectorXd& x) {
                                return Eigen::Vector2d(std::cos(x[0]) * x[1], std::sin(x[0])).eval();
                              });
  const double e_poly = worst(poly, 2.0), e_pm = worst(pm, 2.0), e_mlp = worst(mlp, 2.0), e_log = worst(logi, 1.0),
               e_call = worst(call, 2.0);
  const bool ok = e_poly <= kOtherGradRelTol && e_pm <= kOtherGradRelTol && e_mlp <= kMlpGradRelTol &&
                  e_log <= kOtherGradRelTol && e_call <= kOtherGradRelTol;
  return {ok, fmt("worst relative error: polynomial %.2e, poly model %.2e, mlp %.2e, logistic %.2e, callable %.2e",
                  e_poly, e_pm, e_mlp, e_log, e_call)};
}

Outcome flow_oracle() {
  const VectorField rot = field({"-x2", "x1"});
  const Eigen::Vector2d x0(0.7, -0.4);
  const double t = std::numbers::pi / 2.0;
  const FlowTrace a = flow(rot, x0, t, 1000);
  const Eigen::Vector2d want(std::cos(t) * x0[0] - std::sin(t) * x0[1], std::sin(t) * x0[0] + std::cos(t) * x0[1]);
  const double e1 = (a.points.bottomRows(1).transpose() - want).norm();
  const FlowTrace b = flow(rot, x0, 2.0 * std::numbers::pi, 1000);
  const double e2 = (b.points.bottomRows(1).transpose() - x0).norm();
  return {e1 <= kFlowClosedFormTol && e2 <= kFlowRoundTripTol,
          fmt("closed-form error %.2e at t = pi/2, round-trip error %.2e at t = 2pi", e1, e2)};
}

Outcome invariant_basis() {
  const VectorField rot = field({"-x2", "x1"});
  const InvariantBasis b = build_invariant_basis(rot, 2, Box::cube(2, -1, 1), kInvariantEps);
  // Distance of 1 and (x^2 + y^2)/sqrt(2) to the retained span, and of each
  // retained vector to span{1, x^2 + y^2}.
  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(6, 2);
  want(0, 0) = 1.0;
  want(3, 1) = want(5, 1) = 1.0 / std::numbers::sqrt2;
  const Eigen::MatrixXd& f = b.retained;
  double span_err = 0.0;
  if (f.cols() == 2) {
    span_err = std::max((want - f * (f.transpose() * want)).norm(), (f - want * (want.transpose() * f)).norm());
  }
  const bool span_ok = f.cols() == 2 && span_err <= kSpanTol;

  const InvariantBasis b4 = build_invariant_basis(rot, 4, Box::cube(2, -1, 1), kInvariantEps);
  const auto sound = soundness_check(b4, kSoundnessTrials, 1);

  Rng rng(5);
  int complete_ok = 0;
  const int perturbed = 100;
  for (int t = 0; t < perturbed; ++t) {
    const double delta = std::pow(10.0, rng.uniform(-8, -1));
    Polynomial g = rng.uniform(-2, 2) * P("x1^2 + x2^2", 2) + rng.uniform(-2, 2) * P("x1^4 + 2*x1^2*x2^2 + x2^4", 2) +
                   rng.uniform(-2, 2) * P("1", 2);
    for (const auto& m : monomials_up_to(2, 4)) g += delta * rng.uniform(-1, 1) * Polynomial::term(m, 1.0);
    if (completeness_check(b4, g).passed) ++complete_ok;
  }
  return {span_ok && sound.passed && complete_ok == perturbed,
          fmt("retained %d (span error %.1e); soundness max %.2e <= %.2e over %d; completeness %d/%d",
              static_cast<int>(f.cols()), span_err, sound.max_norm, sound.bound, kSoundnessTrials, complete_ok,
              perturbed)};
}

Outcome robustness() {
  // fhat = x^2 + y^2 is exactly rotation invariant; f perturbs it by terms of size <= 0.015.
  const PolynomialFunction fhat(P("x1^2 + x2^2", 2));
  const PolynomialFunction f(P("x1^2 + x2^2 + 0.01*x1 + 0.005*x1*x2", 2));
  RobustnessOptions opt;
  opt.tolerance = kRobustnessTol;
  const auto rep = robustness_check(f, fhat, field({"-x2", "x1"}), Box::cube(2, -1, 1), 1.0, kRobustnessTrials, 11, opt);
  return {rep.passed && rep.trials == kRobustnessTrials,
          fmt("max(drift - lambda*eps*t) = %.2e over %d trials (eps %.3g, lambda %.3g, %d left the domain)",
              rep.max_excess, rep.trials, rep.epsilon, rep.lambda, rep.left_domain)};
}

Outcome exact_nullspace() {
  Rng rng(3);
  const PointSet pts = sample_box(Box::cube(2, -2, 2), 500, rng);
  const PolynomialFunction f(P("x1^2 + x2^2", 2));
  const auto em = build_extended_matrix(f, pts, VFBasis::polynomial(2, 1));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(em.matrix, Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  const Eigen::VectorXd oracle = svd.matrixV().col(5);
  TrainConfig cfg;
  cfg.seed = 9;
  const auto est = estimate_generators(em, 1, cfg);
  const double cos = std::abs(est.w.col(0).dot(oracle));
  Eigen::VectorXd rot = Eigen::VectorXd::Zero(6);
  rot[2] = -1.0 / std::numbers::sqrt2;
  rot[4] = 1.0 / std::numbers::sqrt2;
  const double oracle_vs_truth = std::abs(oracle.dot(rot));
  return {s[5] < 1e-10 && s[4] > 1e-3 && cos >= kNullspaceMinCos && oracle_vs_truth >= kNullspaceMinCos,
          fmt("|cos(optimizer, SVD)| = %.6f, |cos(SVD, rotation)| = %.6f, sigma_min %.1e, next %.2f", cos,
              oracle_vs_truth, s[5], s[4])};
}

Outcome elbow() {
  Rng rng(4);
  const PointSet pts = sample_box(Box::cube(3, -1, 1), 500, rng);
  const PolynomialFunction f(P("x1^2 + x2^2 + x3^2", 3));
  const auto em = build_extended_matrix(f, pts, VFBasis::polynomial(3, 1));
  TrainConfig cfg;
  cfg.epochs = 2000;
  const auto r = select_generator_count(em, 6, cfg);
  std::string losses;
  for (double l : r.losses) losses += fmt("%.3g ", l);
  return {r.k == 3, fmt("k = %d (losses %s)", r.k, losses.c_str())};
}

}  // namespace

int main() {
  report("C1", "exp1 discovery", exp1_discovery);
  report("C2", "exp1 enforcement", exp1_enforcement);
  report("C3", "exp2 thin strip", exp2_strip);
  report("C4", "exp3 Killing discovery", exp3_killing);
  report("C5", "Killing verification", killing_verification);
  report("C6", "gradient oracles", gradient_oracles);
  report("C7", "flow oracle", flow_oracle);
  report("C8", "invariant basis", invariant_basis);
  report("C9", "robustness harness", robustness);
  report("C10", "exact nullspace", exact_nullspace);
  report("C11", "elbow selection", elbow);
  std::printf("%d of 11 criteria failed\n", g_failures);
  return g_failures;
}
