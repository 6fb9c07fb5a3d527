#pragma once

// Differentiable scalar models: polynomial regressors, a small tanh MLP with
// hand-written reverse mode, and logistic regression over a polynomial
// feature map.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <set>
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

// ---------------------------------------------------------------------------
// Polynomial model

/// f(x) = sum_k w_k m_k(x) over a fixed list of distinct monomials.
class PolyModel final : public MLFunction {
 public:
  PolyModel() = default;
  PolyModel(std::vector<Monomial> basis, Eigen::VectorXd weights)
      : basis_(std::move(basis)), weights_(std::move(weights)) {
    if (basis_.empty()) throw ParseError("PolyModel: empty basis");
    if (static_cast<std::size_t>(weights_.size()) != basis_.size()) {
      throw DimensionError("PolyModel: weight count does not match basis size");
    }
    dim_ = basis_.front().dimension();
    std::set<std::vector<int>> seen;
    int max_deg = 0;
    for (const auto& m : basis_) {
      if (m.dimension() != dim_) throw DimensionError("PolyModel: basis monomials differ in dimension");
      if (!seen.insert(m.exponents()).second) throw ParseError("PolyModel: duplicate basis monomial");
      max_deg = std::max(max_deg, m.degree());
    }
    cap_ = std::max(kDefaultDegreeCap, max_deg);
    for (const auto& m : basis_) {
      std::vector<Polynomial> d;
      const Polynomial p = Polynomial::term(m, 1.0, cap_);
      for (std::size_t i = 0; i < dim_; ++i) d.push_back(partial(p, i));
      basis_grad_.push_back(std::move(d));
    }
  }

  /// All monomials up to `degree` with zero weights.
  static PolyModel full(std::size_t dimension, int degree) {
    auto basis = monomials_up_to(dimension, degree);
    const auto k = static_cast<Eigen::Index>(basis.size());
    return PolyModel(std::move(basis), Eigen::VectorXd::Zero(k));
  }

  std::size_t input_dim() const override { return dim_; }
  const std::vector<Monomial>& basis() const { return basis_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  void set_weights(Eigen::VectorXd w) {
    if (w.size() != weights_.size()) throw DimensionError("PolyModel: weight count mismatch");
    weights_ = std::move(w);
  }

  double value(const Eigen::VectorXd& x) const override {
    check_input(x);
    return features(x).dot(weights_);
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
    check_input(x);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    for (std::size_t k = 0; k < basis_.size(); ++k) {
      const double w = weights_[static_cast<Eigen::Index>(k)];
      for (std::size_t i = 0; i < dim_; ++i) g[static_cast<Eigen::Index>(i)] += w * eval(basis_grad_[k][i], x);
    }
    return g;
  }

  /// Monomial values at x, in basis order.
  Eigen::VectorXd features(const Eigen::VectorXd& x) const {
    Eigen::VectorXd f(static_cast<Eigen::Index>(basis_.size()));
    for (std::size_t k = 0; k < basis_.size(); ++k) {
      double v = 1.0;
      for (std::size_t i = 0; i < dim_; ++i)
        for (int e = 0; e < basis_[k][i]; ++e) v *= x[static_cast<Eigen::Index>(i)];
      f[static_cast<Eigen::Index>(k)] = v;
    }
    return f;
  }

  /// N x k design matrix.
  Eigen::MatrixXd design_matrix(const PointSet& points) const {
    Eigen::MatrixXd m(points.rows(), static_cast<Eigen::Index>(basis_.size()));
    for (Eigen::Index r = 0; r < points.rows(); ++r) m.row(r) = features(points.row(r).transpose()).transpose();
    return m;
  }

  Polynomial to_polynomial() const {
    Polynomial p(dim_, cap_);
    for (std::size_t k = 0; k < basis_.size(); ++k) p.add_term(basis_[k], weights_[static_cast<Eigen::Index>(k)]);
    return p;
  }

 private:
  std::size_t dim_ = 0;
  int cap_ = kDefaultDegreeCap;
  std::vector<Monomial> basis_;
  Eigen::VectorXd weights_;
  std::vector<std::vector<Polynomial>> basis_grad_;
};

/// Value and exact gradient of a polynomial model.
inline std::pair<double, Eigen::VectorXd> poly_value_grad(const PolyModel& m, const Eigen::VectorXd& x) {
  return {m.value(x), m.gradient(x)};
}

// ---------------------------------------------------------------------------
// Multilayer perceptron

enum class Activation { Tanh, Identity };

inline std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "identity"; }

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Fully connected network; every layer but the last applies the activation.
class MlpModel final : public MLFunction {
 public:
  MlpModel() = default;
  MlpModel(std::vector<DenseLayer> layers, Activation act) : layers_(std::move(layers)), act_(act) {
    if (layers_.empty()) throw ParseError("MlpModel: no layers");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (layers_[l].bias.size() != layers_[l].weight.rows()) throw DimensionError("MlpModel: bias shape");
      if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows()) {
        throw DimensionError("MlpModel: layer shapes do not chain");
      }
    }
    if (layers_.back().weight.rows() != 1) throw DimensionError("MlpModel: output must be scalar");
  }

  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static MlpModel initialize(const std::vector<int>& sizes, Activation act, Rng& rng) {
    if (sizes.size() < 2) throw ParseError("MlpModel: need at least input and output sizes");
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const int in = sizes[l];
      const int out = sizes[l + 1];
      if (in < 1 || out < 1) throw ParseError("MlpModel: layer sizes must be positive");
      const double bound = std::sqrt(6.0 / (in + out));
      DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
      for (int i = 0; i < out; ++i)
        for (int j = 0; j < in; ++j) layer.weight(i, j) = rng.uniform(-bound, bound);
      layers.push_back(std::move(layer));
    }
    return MlpModel(std::move(layers), act);
  }

  std::size_t input_dim() const override { return static_cast<std::size_t>(layers_.front().weight.cols()); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  Activation activation() const { return act_; }
  bool smooth() const override { return true; }

  std::vector<int> sizes() const {
    std::vector<int> s{static_cast<int>(layers_.front().weight.cols())};
    for (const auto& l : layers_) s.push_back(static_cast<int>(l.weight.rows()));
    return s;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Flattened parameters: per layer, weight (column-major) then bias.
  Eigen::VectorXd parameters() const {
    Eigen::VectorXd p(parameter_count());
    Eigen::Index o = 0;
    for (const auto& l : layers_) {
      p.segment(o, l.weight.size()) = l.weight.reshaped();
      o += l.weight.size();
      p.segment(o, l.bias.size()) = l.bias;
      o += l.bias.size();
    }
    return p;
  }

  void set_parameters(const Eigen::VectorXd& p) {
    if (p.size() != parameter_count()) throw DimensionError("MlpModel: parameter count mismatch");
    Eigen::Index o = 0;
    for (auto& l : layers_) {
      l.weight.reshaped() = p.segment(o, l.weight.size());
      o += l.weight.size();
      l.bias = p.segment(o, l.bias.size());
      o += l.bias.size();
    }
  }

  double value(const Eigen::VectorXd& x) const override {
    check_input(x);
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::VectorXd z = layers_[l].weight * a + layers_[l].bias;
      a = l + 1 < layers_.size() ? activate(z) : z;
    }
    return a[0];
  }

  /// Input gradient by reverse accumulation through the layers.
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
    check_input(x);
    Eigen::MatrixXd xt = x;
    return input_gradients_t(xt).col(0);
  }

  Eigen::VectorXd values(const PointSet& points) const override {
    return forward_t(points.transpose()).transpose();
  }

  Eigen::MatrixXd gradients(const PointSet& points) const override {
    return input_gradients_t(points.transpose()).transpose();
  }

  /// Outputs for inputs stored one per column (1 x N).
  Eigen::MatrixXd forward_t(const Eigen::MatrixXd& xt) const {
    Eigen::MatrixXd a = xt;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::MatrixXd z = layers_[l].weight * a;
      z.colwise() += layers_[l].bias;
      a = l + 1 < layers_.size() ? activate(z) : z;
    }
    return a;
  }

  /// Input gradients for inputs stored one per column (n x N).
  Eigen::MatrixXd input_gradients_t(const Eigen::MatrixXd& xt) const {
    std::vector<Eigen::MatrixXd> acts{xt};
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      Eigen::MatrixXd z = layers_[l].weight * acts.back();
      z.colwise() += layers_[l].bias;
      acts.push_back(activate(z));
    }
    Eigen::MatrixXd delta = layers_.back().weight.transpose().replicate(1, xt.cols());
    for (std::size_t l = layers_.size() - 1; l-- > 0;) {
      delta = layers_[l].weight.transpose() * delta.cwiseProduct(derivative(acts[l + 1]));
    }
    return delta;
  }

  template <class M>
  M activate(const M& z) const {
    if (act_ == Activation::Identity) return z;
    return z.array().tanh().matrix();
  }

  /// Activation derivative expressed through the activation output.
  Eigen::MatrixXd derivative(const Eigen::MatrixXd& a) const {
    if (act_ == Activation::Identity) return Eigen::MatrixXd::Ones(a.rows(), a.cols());
    return (1.0 - a.array().square()).matrix();
  }

  /// d(derivative)/d(a), elementwise.
  Eigen::MatrixXd derivative_slope(const Eigen::MatrixXd& a) const {
    if (act_ == Activation::Identity) return Eigen::MatrixXd::Zero(a.rows(), a.cols());
    return -2.0 * a;
  }

 private:
  std::vector<DenseLayer> layers_;
  Activation act_ = Activation::Tanh;
};

inline double mlp_forward(const MlpModel& m, const Eigen::VectorXd& x) { return m.value(x); }
inline Eigen::VectorXd mlp_input_gradient(const MlpModel& m, const Eigen::VectorXd& x) { return m.gradient(x); }

struct CompositeLoss {
  double data = 0.0;      // mean squared error against targets
  double symmetry = 0.0;  // mean squared directional derivative along the fields
  double total = 0.0;     // data_weight * data + symmetry_weight * symmetry
};

/// Inputs for the symmetry term: collocation points (one per column) and the
/// field direction at each of them. Several fields are handled by stacking
/// columns.
struct DirectionalBatch {
  Eigen::MatrixXd points_t;      // n x M
  Eigen::MatrixXd directions_t;  // n x M
};

/// Composite loss
///   data_weight * mean_i (F(x_i) - y_i)^2
///   + symmetry_weight * mean_j (grad F(c_j) . v_j)^2
/// and its gradient with respect to the flattened parameters. The symmetry
/// term is differentiated by propagating the tangent v_j forward through the
/// network and back-propagating through both the primal and tangent paths.
inline CompositeLoss mlp_composite_loss(const MlpModel& m, const Eigen::MatrixXd& xt, const Eigen::VectorXd& y,
                                        double data_weight, const DirectionalBatch* sym, double symmetry_weight,
                                        Eigen::VectorXd* grad) {
  const auto& layers = m.layers();
  const std::size_t L = layers.size();
  std::vector<Eigen::MatrixXd> dW(L);
  std::vector<Eigen::VectorXd> db(L);
  for (std::size_t l = 0; l < L; ++l) {
    dW[l] = Eigen::MatrixXd::Zero(layers[l].weight.rows(), layers[l].weight.cols());
    db[l] = Eigen::VectorXd::Zero(layers[l].bias.size());
  }
  CompositeLoss loss;

  // Data term.
  {
    const auto n = static_cast<double>(xt.cols());
    std::vector<Eigen::MatrixXd> acts{xt};
    for (std::size_t l = 0; l + 1 < L; ++l) {
      Eigen::MatrixXd z = layers[l].weight * acts.back();
      z.colwise() += layers[l].bias;
      acts.push_back(m.activate(z));
    }
    Eigen::MatrixXd out = layers[L - 1].weight * acts.back();
    out.colwise() += layers[L - 1].bias;
    const Eigen::RowVectorXd r = out.row(0) - y.transpose();
    loss.data = r.squaredNorm() / n;
    if (grad && data_weight != 0.0) {
      Eigen::MatrixXd d = (2.0 * data_weight / n) * r;
      for (std::size_t l = L; l-- > 0;) {
        dW[l] += d * acts[l].transpose();
        db[l] += d.rowwise().sum();
        if (l == 0) break;
        d = (layers[l].weight.transpose() * d).cwiseProduct(m.derivative(acts[l]));
      }
    }
  }

  // Symmetry term.
  if (sym && sym->points_t.cols() > 0) {
    const auto n = static_cast<double>(sym->points_t.cols());
    std::vector<Eigen::MatrixXd> acts{sym->points_t};
    std::vector<Eigen::MatrixXd> deriv{Eigen::MatrixXd()};
    std::vector<Eigen::MatrixXd> tan{sym->directions_t};
    std::vector<Eigen::MatrixXd> tan_pre{Eigen::MatrixXd()};
    for (std::size_t l = 0; l + 1 < L; ++l) {
      Eigen::MatrixXd z = layers[l].weight * acts.back();
      z.colwise() += layers[l].bias;
      acts.push_back(m.activate(z));
      deriv.push_back(m.derivative(acts.back()));
      tan_pre.push_back(layers[l].weight * tan.back());
      tan.push_back(deriv.back().cwiseProduct(tan_pre.back()));
    }
    const Eigen::RowVectorXd s = layers[L - 1].weight * tan.back();
    loss.symmetry = s.squaredNorm() / n;
    if (grad && symmetry_weight != 0.0) {
      const Eigen::RowVectorXd ds = (2.0 * symmetry_weight / n) * s;
      dW[L - 1] += ds * tan[L - 1].transpose();
      Eigen::MatrixXd d_tan = layers[L - 1].weight.transpose() * ds;
      Eigen::MatrixXd d_act = Eigen::MatrixXd::Zero(d_tan.rows(), d_tan.cols());
      for (std::size_t l = L - 1; l-- > 0;) {
        // tan[l+1] = deriv[l+1] .* (W_l tan[l]),  deriv[l+1] = act'(acts[l+1])
        const Eigen::MatrixXd d_tan_pre = d_tan.cwiseProduct(deriv[l + 1]);
        const Eigen::MatrixXd d_deriv = d_tan.cwiseProduct(tan_pre[l + 1]);
        d_act += d_deriv.cwiseProduct(m.derivative_slope(acts[l + 1]));
        dW[l] += d_tan_pre * tan[l].transpose();
        // acts[l+1] = act(W_l acts[l] + b_l)
        const Eigen::MatrixXd dz = d_act.cwiseProduct(deriv[l + 1]);
        dW[l] += dz * acts[l].transpose();
        db[l] += dz.rowwise().sum();
        if (l == 0) break;
        d_tan = layers[l].weight.transpose() * d_tan_pre;
        d_act = layers[l].weight.transpose() * dz;
      }
    }
  }

  loss.total = data_weight * loss.data + symmetry_weight * loss.symmetry;
  if (grad) {
    grad->resize(m.parameter_count());
    Eigen::Index o = 0;
    for (std::size_t l = 0; l < L; ++l) {
      grad->segment(o, dW[l].size()) = dW[l].reshaped();
      o += dW[l].size();
      grad->segment(o, db[l].size()) = db[l];
      o += db[l].size();
    }
  }
  return loss;
}

/// Field directions X(c_j) for every field, stacked column-wise.
inline DirectionalBatch make_directional_batch(const std::vector<VectorField>& fields, const PointSet& points) {
  DirectionalBatch b;
  const Eigen::Index m = points.rows();
  const Eigen::Index n = points.cols();
  b.points_t.resize(n, m * static_cast<Eigen::Index>(fields.size()));
  b.directions_t.resize(n, m * static_cast<Eigen::Index>(fields.size()));
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (fields[k].dimension() != static_cast<std::size_t>(n)) throw DimensionError("field dimension mismatch");
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index c = static_cast<Eigen::Index>(k) * m + j;
      b.points_t.col(c) = points.row(j).transpose();
      b.directions_t.col(c) = fields[k].at(points.row(j).transpose());
    }
  }
  return b;
}

struct MlpSpec {
  std::vector<int> sizes{2, 64, 64, 1};
  Activation activation = Activation::Tanh;
};

/// Per-epoch loss weights and learning rate for MLP training.
struct EpochPlan {
  double data_weight = 1.0;
  double symmetry_weight = 0.0;
  double lr = 0.0;
  bool reset_optimizer = false;  // start a fresh optimizer state at this epoch
};

struct MlpTrainResult {
  MlpModel model;
  std::vector<CompositeLoss> history;  // loss before each update, plus the final state
};

/// Full-batch training loop shared by plain and symmetry-regularized training.
inline MlpTrainResult mlp_fit(MlpModel model, const PointSet& data, const Eigen::VectorXd& targets, int epochs,
                              OptimizerKind optimizer, const std::function<EpochPlan(int)>& plan,
                              const DirectionalBatch* sym) {
  if (data.rows() == 0) throw ParseError("training data is empty");
  if (targets.size() != data.rows()) throw DimensionError("targets length does not match data");
  const Eigen::MatrixXd xt = data.transpose();
  Eigen::VectorXd params = model.parameters();
  Eigen::VectorXd grad;
  AdamState adam;
  MlpTrainResult res;
  std::vector<double> totals;
  for (int epoch = 0; epoch <= epochs; ++epoch) {
    const EpochPlan p = plan(std::min(epoch, std::max(epochs - 1, 0)));
    const bool need_sym = sym && p.symmetry_weight != 0.0;
    const CompositeLoss loss = mlp_composite_loss(model, xt, targets, p.data_weight, need_sym ? sym : nullptr,
                                                  p.symmetry_weight, epoch < epochs ? &grad : nullptr);
    res.history.push_back(loss);
    totals.push_back(loss.total);
    if (!std::isfinite(loss.total)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " (data " +
                             std::to_string(loss.data) + ", symmetry " + std::to_string(loss.symmetry) + ")",
                         totals);
    }
    if (epoch == epochs) break;
    if (p.reset_optimizer) adam = AdamState{};
    if (optimizer == OptimizerKind::Adam) {
      adam_step(params, grad, adam, p.lr);
    } else {
      params -= p.lr * grad;
    }
    model.set_parameters(params);
  }
  res.model = std::move(model);
  return res;
}

/// Full-batch MLP regression on MSE, initialized from config.seed.
inline MlpTrainResult mlp_train(const PointSet& data, const Eigen::VectorXd& targets, const TrainConfig& config,
                                const MlpSpec& spec = {}) {
  config.validate();
  if (data.rows() == 0) throw ParseError("training data is empty");
  if (spec.sizes.front() != data.cols()) throw DimensionError("MLP input size does not match data dimension");
  Rng rng(config.seed);
  MlpModel model = MlpModel::initialize(spec.sizes, spec.activation, rng);
  const double lr = config.lr;
  return mlp_fit(std::move(model), data, targets, config.epochs, config.optimizer,
                 [lr](int) { return EpochPlan{1.0, 0.0, lr, false}; }, nullptr);
}

// ---------------------------------------------------------------------------
// Logistic regression over a feature map

/// p(x) = 1 / (1 + exp(-(w . Phi(x) + b))).
class LogisticFeatureModel final : public MLFunction {
 public:
  LogisticFeatureModel() = default;
  LogisticFeatureModel(FeatureMap phi, Eigen::VectorXd weights, double bias)
      : phi_(std::move(phi)), w_(std::move(weights)), b_(bias) {
    if (static_cast<std::size_t>(w_.size()) != phi_.output_dim()) {
      throw DimensionError("logistic model: weight count does not match feature map");
    }
  }

  std::size_t input_dim() const override { return phi_.input_dim(); }
  const FeatureMap& feature_map() const { return phi_; }
  const Eigen::VectorXd& weights() const { return w_; }
  double bias() const { return b_; }

  double decision(const Eigen::VectorXd& x) const { return w_.dot(phi_(x)) + b_; }

  double value(const Eigen::VectorXd& x) const override {
    check_input(x);
    return sigmoid(decision(x));
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
    check_input(x);
    const double p = sigmoid(decision(x));
    return p * (1.0 - p) * (phi_.jacobian(x).transpose() * w_);
  }

  /// The decision function w . Phi + b as a polynomial.
  Polynomial decision_polynomial() const {
    Polynomial f = Polynomial::constant(phi_.input_dim(), b_);
    for (std::size_t a = 0; a < phi_.output_dim(); ++a) f += w_[static_cast<Eigen::Index>(a)] * phi_.components()[a];
    return f;
  }

  static double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
  }

 private:
  FeatureMap phi_;
  Eigen::VectorXd w_;
  double b_ = 0.0;
};

inline std::pair<double, Eigen::VectorXd> logistic_value_grad(const LogisticFeatureModel& m,
                                                              const Eigen::VectorXd& x) {
  return {m.value(x), m.gradient(x)};
}

struct LogisticFitResult {
  LogisticFeatureModel model;
  std::vector<double> history;  // mean cross-entropy per epoch
  double accuracy = 0.0;
};

/// Full-batch gradient descent on mean cross-entropy in feature space,
/// starting from zero weights.
inline LogisticFitResult logistic_fit(const FeatureMap& phi, const PointSet& data, const std::vector<int>& labels,
                                      const TrainConfig& config) {
  config.validate();
  if (data.rows() == 0) throw ParseError("logistic_fit: empty data");
  if (labels.size() != static_cast<std::size_t>(data.rows())) throw DimensionError("logistic_fit: label count");
  int ones = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ParseError("logistic_fit: labels must be 0 or 1");
    ones += l;
  }
  if (ones == 0 || ones == static_cast<int>(labels.size())) {
    throw NumericError("logistic_fit: degenerate single-class data");
  }
  const auto n = data.rows();
  const auto m = static_cast<Eigen::Index>(phi.output_dim());
  Eigen::MatrixXd feats(n, m);
  for (Eigen::Index i = 0; i < n; ++i) feats.row(i) = phi(data.row(i).transpose()).transpose();
  if (feats.cwiseAbs().maxCoeff() == 0.0) throw NumericError("logistic_fit: all features are zero");
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)];

  // Parameters: [w; b].
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m + 1);
  AdamState adam;
  LogisticFitResult res;
  for (int epoch = 0; epoch <= config.epochs; ++epoch) {
    const Eigen::VectorXd t = (feats * theta.head(m)).array() + theta[m];
    double ce = 0.0;
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = LogisticFeatureModel::sigmoid(t[i]);
      // log(1 + e^t) - y t, computed stably
      ce += (t[i] > 0 ? t[i] + std::log1p(std::exp(-t[i])) : std::log1p(std::exp(t[i]))) - y[i] * t[i];
      r[i] = p - y[i];
    }
    ce /= static_cast<double>(n);
    res.history.push_back(ce);
    if (!std::isfinite(ce)) throw NumericError("logistic_fit: non-finite loss", res.history);
    if (epoch == config.epochs) break;
    Eigen::VectorXd g(m + 1);
    g.head(m) = feats.transpose() * r / static_cast<double>(n);
    g[m] = r.mean();
    if (config.optimizer == OptimizerKind::Adam) {
      adam_step(theta, g, adam, config.lr);
    } else {
      theta -= config.lr * g;
    }
  }
  res.model = LogisticFeatureModel(phi, theta.head(m), theta[m]);
  int correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = feats.row(i).dot(theta.head(m)) + theta[m];
    correct += ((t > 0 ? 1 : 0) == labels[static_cast<std::size_t>(i)]) ? 1 : 0;
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return res;
}

}  // namespace symdisc
