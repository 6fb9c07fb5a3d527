#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

#include "symdisc/linalg.hpp"
#include "symdisc/manopt.hpp"

using namespace symdisc;

TEST(Jacobi, MatchesSelfAdjointSolver) {
  Rng rng(1);
  for (int n : {1, 2, 5, 12, 30}) {
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    a = a * a.transpose();
    const SymmetricEigen mine = jacobi_eigen(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a);
    Eigen::VectorXd want = ref.eigenvalues().reverse();
    EXPECT_LE((mine.values - want).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, want.cwiseAbs().maxCoeff())) << n;
    EXPECT_LE((a * mine.vectors - mine.vectors * mine.values.asDiagonal()).norm(), 1e-9 * a.norm());
    EXPECT_LE(orthonormality_error(mine.vectors), 1e-10);
  }
}

TEST(Jacobi, DiagonalAndZeroInputs) {
  Eigen::MatrixXd d = Eigen::Vector3d(1.0, 3.0, 2.0).asDiagonal();
  const auto e = jacobi_eigen(d);
  EXPECT_EQ(e.values, Eigen::Vector3d(3.0, 2.0, 1.0));
  const auto z = jacobi_eigen(Eigen::MatrixXd::Zero(4, 4));
  EXPECT_EQ(z.values.norm(), 0.0);
  EXPECT_THROW(jacobi_eigen(Eigen::MatrixXd::Zero(2, 3)), DimensionError);
}

TEST(Jacobi, SignConventionIsDeterministic) {
  Eigen::Matrix2d a;
  a << 2, 1, 1, 2;
  const auto e = jacobi_eigen(a);
  for (int j = 0; j < 2; ++j) {
    Eigen::Index i;
    e.vectors.col(j).cwiseAbs().maxCoeff(&i);
    EXPECT_GT(e.vectors(i, j), 0.0);
  }
}

TEST(Qr, OrthonormalizesAndRejectsRankDeficiency) {
  Rng rng(2);
  const Eigen::MatrixXd w = random_stiefel(7, 3, rng);
  EXPECT_LE(orthonormality_error(w), 1e-12);
  Eigen::MatrixXd bad(3, 2);
  bad << 1, 2, 2, 4, 3, 6;
  EXPECT_THROW(qr_orthonormalize(bad), NumericError);
}

TEST(Stiefel, TangentProjectionIsTangent) {
  Rng rng(3);
  const Eigen::MatrixXd w = random_stiefel(6, 2, rng);
  const Eigen::MatrixXd g = Eigen::MatrixXd::Random(6, 2);
  const Eigen::MatrixXd xi = stiefel_tangent(w, g);
  const Eigen::MatrixXd s = w.transpose() * xi;
  EXPECT_LE((s + s.transpose()).norm(), 1e-12);
}

TEST(Stiefel, StepsPreserveTheConstraint) {
  Rng rng(4);
  Eigen::MatrixXd w = random_stiefel(9, 3, rng);
  AdagradState st;
  for (int k = 0; k < 200; ++k) {
    const Eigen::MatrixXd g = Eigen::MatrixXd::Random(9, 3) * 10.0;
    w = stiefel_step(w, g, k % 2 ? &st : nullptr, 0.3);
    ASSERT_LE(orthonormality_error(w), 1e-10);
  }
}

TEST(Stiefel, ZeroGradientIsANoOp) {
  Rng rng(5);
  const Eigen::MatrixXd w = random_stiefel(4, 2, rng);
  EXPECT_EQ(stiefel_step(w, Eigen::MatrixXd::Zero(4, 2), nullptr, 1.0), w);
  EXPECT_THROW(stiefel_step(w, Eigen::MatrixXd::Zero(3, 2), nullptr, 1.0), DimensionError);
  Eigen::MatrixXd nan = Eigen::MatrixXd::Zero(4, 2);
  nan(0, 0) = std::nan("");
  EXPECT_THROW(stiefel_step(w, nan, nullptr, 1.0), NumericError);
}

TEST(Sphere, StepsStayOnTheSphere) {
  Eigen::VectorXd w = Eigen::VectorXd::Unit(5, 0);
  AdagradState st;
  for (int k = 0; k < 100; ++k) {
    w = sphere_step(w, Eigen::VectorXd::Random(5), &st, 0.5);
    ASSERT_NEAR(w.norm(), 1.0, 1e-12);
  }
}

TEST(Adagrad, AccumulatesSquaredGradients) {
  AdagradState st;
  Eigen::MatrixXd g(1, 2);
  g << 3.0, -4.0;
  st = adagrad_state_update(st, g);
  st = adagrad_state_update(st, g);
  EXPECT_DOUBLE_EQ(st.accum(0, 0), 18.0);
  EXPECT_DOUBLE_EQ(st.accum(0, 1), 32.0);
  const Eigen::MatrixXd p = adagrad_precondition(st, g);
  EXPECT_NEAR(p(0, 0), 3.0 / std::sqrt(18.0), 1e-9);
}

TEST(Minimize, RecoversSmallestEigenvectorOnTheSphere) {
  // min w^T A w over |w| = 1 is the smallest eigenvector.
  Eigen::Matrix3d a;
  a << 4, 1, 0, 1, 3, 0, 0, 0, 0.5;
  const Objective obj = [&](const Eigen::MatrixXd& w, Eigen::MatrixXd* g) {
    if (g) *g = 2.0 * a * w;
    return (w.transpose() * a * w)(0, 0);
  };
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::RiemannianSgd;
  cfg.lr = 0.1;
  cfg.epochs = 500;
  Eigen::MatrixXd w0(3, 1);
  w0 << 1, 1, 1;
  w0.normalize();
  const auto r = minimize(obj, w0, Constraint::Stiefel, cfg);
  EXPECT_NEAR(std::abs(r.point(2, 0)), 1.0, 1e-6);
  EXPECT_NEAR(r.best_loss, 0.5, 1e-9);
  EXPECT_EQ(r.history.size(), 501u);
}

TEST(Minimize, ZeroLearningRateLeavesThePointAlone) {
  const Objective obj = [](const Eigen::MatrixXd& w, Eigen::MatrixXd* g) {
    if (g) *g = 2.0 * w;
    return w.squaredNorm();
  };
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Gd;
  cfg.lr = 0.0;
  cfg.epochs = 10;
  const Eigen::MatrixXd w0 = Eigen::MatrixXd::Constant(2, 1, 3.0);
  const auto r = minimize(obj, w0, Constraint::Euclidean, cfg);
  EXPECT_EQ(r.point, w0);
  for (double h : r.history) EXPECT_EQ(h, 18.0);
}

TEST(Minimize, AdamConvergesOnAQuadratic) {
  const Objective obj = [](const Eigen::MatrixXd& w, Eigen::MatrixXd* g) {
    Eigen::MatrixXd d = w.array() - 1.0;
    if (g) *g = 2.0 * d;
    return d.squaredNorm();
  };
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.lr = 0.05;
  cfg.epochs = 2000;
  const auto r = minimize(obj, Eigen::MatrixXd::Zero(3, 1), Constraint::Euclidean, cfg);
  EXPECT_LT(r.best_loss, 1e-8);
}

TEST(Minimize, NonFiniteLossReportsHistory) {
  int calls = 0;
  const Objective obj = [&](const Eigen::MatrixXd& w, Eigen::MatrixXd* g) {
    if (g) *g = Eigen::MatrixXd::Ones(w.rows(), w.cols());
    return ++calls > 3 ? std::nan("") : 1.0;
  };
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Gd;
  cfg.epochs = 10;
  try {
    minimize(obj, Eigen::MatrixXd::Zero(2, 1), Constraint::Euclidean, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.history().size(), 4u);
  }
}

TEST(Minimize, RejectsBadConfigurations) {
  const Objective obj = [](const Eigen::MatrixXd& w, Eigen::MatrixXd* g) {
    if (g) *g = w;
    return 0.0;
  };
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Adam;
  EXPECT_THROW(minimize(obj, Eigen::MatrixXd::Identity(3, 1), Constraint::Stiefel, cfg), ConfigError);
  cfg.optimizer = OptimizerKind::Gd;
  cfg.lr = -1.0;
  EXPECT_THROW(minimize(obj, Eigen::MatrixXd::Identity(3, 1), Constraint::Euclidean, cfg), ConfigError);
  cfg.lr = 0.1;
  EXPECT_THROW(minimize(obj, Eigen::MatrixXd::Ones(3, 1), Constraint::Stiefel, cfg), NumericError);
  EXPECT_THROW(parse_optimizer_kind("sgd-ish"), ConfigError);
  EXPECT_EQ(parse_loss_kind("mse"), LossKind::MSE);
}
