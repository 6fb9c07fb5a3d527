#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "symdisc/data.hpp"
#include "symdisc/geom.hpp"
#include "symdisc/poly_text.hpp"

using namespace symdisc;

namespace {

Polynomial P(const char* s, std::size_t n = 2) { return parse_polynomial(s, n); }

VectorField field(std::initializer_list<const char*> comps) {
  std::vector<Polynomial> c;
  for (const char* s : comps) c.push_back(P(s, comps.size()));
  return VectorField(std::move(c));
}

const VectorField kRotation = field({"-x2", "x1"});

FeatureMap quadric_features() {
  std::vector<Polynomial> c;
  for (const char* s : {"x1^2", "1.4142135623730951*x1*x2", "1.4142135623730951*x1*x3", "x2^2",
                        "1.4142135623730951*x2*x3", "x3^2"})
    c.push_back(P(s, 3));
  return FeatureMap(3, std::move(c));
}

}  // namespace

TEST(Apply, RotationAnnihilatesRadialFunctions) {
  EXPECT_TRUE(apply(kRotation, P("x1^2 + x2^2")).is_zero());
  EXPECT_TRUE(apply(kRotation, P("x1^4 + 2*x1^2*x2^2 + x2^4")).is_zero());
  EXPECT_EQ(apply(kRotation, P("x1")), P("-x2"));
  EXPECT_EQ(apply(kRotation, P("x1*x2")), P("x1^2 - x2^2"));
}

TEST(Apply, QuarticFieldAnnihilatesTheStripTarget) {
  const VectorField x = field({"x1^2*x2 - x2^3", "2*x1^3 - x1*x2^2"});
  EXPECT_TRUE(apply(x, quartic_target()).is_zero());
}

TEST(Apply, NumericMatchesSymbolic) {
  const Polynomial f = P("x1^3 - 2*x1*x2 + x2^2");
  const PolynomialFunction pf(f);
  Rng rng(1);
  const PointSet pts = sample_box(Box::cube(2, -2, 2), 50, rng);
  const Eigen::VectorXd num = apply_numeric(kRotation, pf, pts);
  const Polynomial sym = apply(kRotation, f);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) EXPECT_NEAR(num[i], eval(sym, Eigen::VectorXd(pts.row(i).transpose())), 1e-12);
}

TEST(Apply, DimensionMismatchThrows) {
  EXPECT_THROW(apply(kRotation, P("x1", 3)), DimensionError);
  const PolynomialFunction pf(P("x1"));
  EXPECT_THROW(apply_numeric(kRotation, pf, PointSet::Zero(3, 3)), DimensionError);
}

TEST(Apply, RequiresGradient) {
  const CallableFunction f(2, [](const Eigen::VectorXd& x) { return x.sum(); });
  EXPECT_THROW(apply_numeric(kRotation, f, PointSet::Zero(1, 2)), Error);
}

TEST(Lie, RotationIsKillingForEuclidean) {
  EXPECT_TRUE(is_zero(lie_derivative_metric(kRotation, MetricTensor::euclidean(2))));
}

TEST(Lie, DilationScalesEuclidean) {
  const auto l = lie_derivative_metric(field({"x1", "x2"}), MetricTensor::euclidean(2));
  EXPECT_EQ(l[0][0], P("2"));
  EXPECT_EQ(l[1][1], P("2"));
  EXPECT_TRUE(l[0][1].is_zero());
}

TEST(Lie, PullbackMetricOfQuadricFeatures) {
  const MetricTensor g = pullback_metric(quadric_features());
  // J^T J for the scaled quadratic features is 4 * (x.x) * I on the diagonal
  // and 2 x_i x_j off it.
  EXPECT_EQ(g(0, 0).terms().size(), 3u);
  Eigen::VectorXd x(3);
  x << 0.3, -1.2, 0.7;
  Eigen::Matrix3d want;
  const double r2 = x.squaredNorm();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) want(i, j) = (i == j ? 4.0 * x[i] * x[i] + 2.0 * (r2 - x[i] * x[i]) : 2.0 * x[i] * x[j]);
  EXPECT_LE((g.at(x) - want).norm(), 1e-12);
}

TEST(Lie, SoThreeFieldsAreKillingForTheQuadricPullback) {
  const MetricTensor g = pullback_metric(quadric_features());
  const std::vector<VectorField> fs{field({"0", "-x3", "x2"}), field({"-x3", "0", "x1"}), field({"-x2", "x1", "0"})};
  for (const auto& f : fs) EXPECT_TRUE(is_zero(lie_derivative_metric(f, g)));
  Rng rng(2);
  const auto rep = killing_basis_check(fs, g, sample_box(Box::cube(3, -2, 2), 30, rng), 1e-9);
  EXPECT_TRUE(rep.all_passed);
  const auto bad = killing_basis_check({field({"x1", "x2", "x3"})}, g, sample_box(Box::cube(3, -2, 2), 30, rng), 1e-9);
  EXPECT_FALSE(bad.all_passed);
}

TEST(Lie, EmptyKillingInputs) {
  EXPECT_THROW(killing_basis_check({}, MetricTensor::euclidean(2), PointSet::Zero(1, 2), 1e-9), ParseError);
  const auto rep = killing_basis_check({kRotation}, MetricTensor::euclidean(2), PointSet(0, 2), 1e-9);
  EXPECT_TRUE(rep.vacuous);
}

TEST(Metric, RejectsAsymmetricEntries) {
  PolyMatrix m{{P("1"), P("x1")}, {P("x2"), P("1")}};
  EXPECT_THROW(MetricTensor{m}, Error);
}

TEST(Flow, RotationMatchesClosedForm) {
  Eigen::Vector2d x0(1.0, 0.5);
  const double t = 1.3;
  const FlowTrace tr = flow(kRotation, x0, t, 1000);
  Eigen::Vector2d want(std::cos(t) * x0[0] - std::sin(t) * x0[1], std::sin(t) * x0[0] + std::cos(t) * x0[1]);
  EXPECT_LE((tr.points.bottomRows(1).transpose() - want).norm(), 1e-12);
  EXPECT_EQ(tr.times.size(), 1001u);
  EXPECT_EQ(tr.times.back(), t);
}

TEST(Flow, RotationIsPeriodic) {
  const Eigen::Vector2d x0(0.2, -1.1);
  const FlowTrace tr = flow(kRotation, x0, 2.0 * std::numbers::pi, 2000);
  EXPECT_LE((tr.points.bottomRows(1).transpose() - x0).norm(), 1e-10);
}

TEST(Flow, ConservesInvariantAlongTheQuarticField) {
  const VectorField x = field({"x1^2*x2 - x2^3", "2*x1^3 - x1*x2^2"});
  const PolynomialFunction f(quartic_target());
  const Eigen::Vector2d x0(0.4, 0.3);
  const FlowTrace tr = flow(x, x0, 0.5, 2000);
  for (Eigen::Index k = 0; k < tr.points.rows(); k += 100)
    EXPECT_NEAR(f.value(tr.points.row(k).transpose()), f.value(x0), 1e-9);
}

TEST(Flow, DivergenceCarriesThePartialTrace) {
  // dx/dt = x^2 blows up at t = 1 from x0 = 1.
  const VectorField x = VectorField(std::vector<Polynomial>{P("x1^2", 1)});
  try {
    flow(x, Eigen::VectorXd::Ones(1), 5.0, 50);
    FAIL() << "expected divergence";
  } catch (const IntegrationDiverged& e) {
    EXPECT_GT(e.partial_trace().points.rows(), 1);
    EXPECT_EQ(static_cast<std::size_t>(e.partial_trace().points.rows()), e.partial_trace().times.size());
    EXPECT_TRUE(e.partial_trace().points.allFinite());
    EXPECT_EQ(e.last_valid_time(), e.partial_trace().times.back());
  }
}

TEST(Flow, RecordsDomainExit) {
  const FlowTrace tr = flow(field({"1", "0"}), Eigen::Vector2d(0, 0), 2.0, 200, Box::cube(2, -1, 1));
  ASSERT_TRUE(tr.left_domain);
  EXPECT_NEAR(*tr.exit_time, 1.0, 0.011);
  EXPECT_THROW(flow(kRotation, Eigen::Vector2d(0, 0), 1.0, 0), ParseError);
  EXPECT_THROW(flow(kRotation, Eigen::VectorXd::Zero(3), 1.0, 10), DimensionError);
}

TEST(Lipschitz, LinearFieldOnTheUnitCube) {
  // max row sum of |J| = 1 plus max |alpha| = 1 at a corner.
  EXPECT_NEAR(lipschitz_proxy(kRotation, Box::cube(2, -1, 1)), 2.0, 1e-12);
  EXPECT_NEAR(lipschitz_proxy(field({"x1^2", "0"}), Box::cube(2, 0, 2)), 4.0 + 4.0, 1e-12);
}

TEST(GeomProperty, LieDerivativeIsLinearInTheField) {
  const MetricTensor g = pullback_metric(quadric_features());
  const VectorField a = field({"x2", "x1*x3", "1"}), b = field({"x3^2", "0", "-x1"});
  const auto lhs = lie_derivative_metric(a + 2.5 * b, g);
  const auto la = lie_derivative_metric(a, g), lb = lie_derivative_metric(b, g);
  Eigen::Vector3d x(0.4, -0.9, 1.3);
  EXPECT_LE((evaluate(lhs, x) - evaluate(la, x) - 2.5 * evaluate(lb, x)).norm(), 1e-10);
}
