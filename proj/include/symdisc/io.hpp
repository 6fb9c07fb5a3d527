#pragma once

// JSON encoding of library objects. Doubles are written with 17 significant
// digits so every value round-trips exactly.

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "symdisc/discovery.hpp"
#include "symdisc/enforcement.hpp"
#include "symdisc/error.hpp"
#include "symdisc/geom.hpp"
#include "symdisc/models.hpp"
#include "symdisc/poly.hpp"
#include "symdisc/poly_text.hpp"
#include "symdisc/scoring.hpp"

namespace symdisc::io {

using json = nlohmann::json;

inline json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_json(m.row(r).transpose()));
  return rows;
}

inline Eigen::VectorXd vector_from(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Eigen::MatrixXd matrix_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
  const Eigen::VectorXd first = vector_from(j[0], path + "[0]");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), first.size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Eigen::VectorXd row = vector_from(j[r], path + "[" + std::to_string(r) + "]");
    if (row.size() != m.cols()) throw ConfigError(path, "ragged matrix");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

inline json std_vector_json(const std::vector<double>& v) { return json(v); }

// Polynomials, fields, metrics ----------------------------------------------

inline json to_json(const Polynomial& p) { return to_string(p); }

inline Polynomial polynomial_from(const json& j, std::size_t dim, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a polynomial string");
  try {
    return parse_polynomial(j.get<std::string>(), dim);
  } catch (const ParseError& e) {
    throw ConfigError(path, e.what());
  }
}

inline json to_json(const VectorField& x) {
  json a = json::array();
  for (const auto& c : x.coefficients()) a.push_back(to_string(c));
  return a;
}

inline VectorField field_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected an array of component polynomials");
  std::vector<Polynomial> c;
  for (std::size_t i = 0; i < j.size(); ++i) c.push_back(polynomial_from(j[i], j.size(), path + "[" + std::to_string(i) + "]"));
  return VectorField(std::move(c));
}

inline std::vector<VectorField> fields_from(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of fields");
  std::vector<VectorField> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(field_from(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline json to_json(const MetricTensor& g) {
  json rows = json::array();
  for (const auto& row : g.entries()) {
    json r = json::array();
    for (const auto& e : row) r.push_back(to_string(e));
    rows.push_back(r);
  }
  return rows;
}

inline FeatureMap feature_map_from(const json& j, std::size_t dim, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected an array of feature polynomials");
  std::vector<Polynomial> comps;
  for (std::size_t i = 0; i < j.size(); ++i) comps.push_back(polynomial_from(j[i], dim, path + "[" + std::to_string(i) + "]"));
  return FeatureMap(dim, std::move(comps));
}

/// "euclidean", {"pullback": [features...]} or a square array of polynomial strings.
inline MetricTensor metric_from(const json& j, std::size_t dim, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() == "euclidean") return MetricTensor::euclidean(dim);
    throw ConfigError(path, "unknown metric '" + j.get<std::string>() + "'");
  }
  if (j.is_object()) {
    if (j.size() != 1 || !j.contains("pullback")) throw ConfigError(path, "metric object must have only 'pullback'");
    return pullback_metric(feature_map_from(j["pullback"], dim, path + ".pullback"));
  }
  if (!j.is_array() || j.size() != dim) throw ConfigError(path, "metric must be a " + std::to_string(dim) + "x" + std::to_string(dim) + " array");
  std::vector<std::vector<Polynomial>> g;
  for (std::size_t r = 0; r < dim; ++r) {
    if (!j[r].is_array() || j[r].size() != dim) throw ConfigError(path, "metric rows must have length " + std::to_string(dim));
    std::vector<Polynomial> row;
    for (std::size_t c = 0; c < dim; ++c) {
      row.push_back(polynomial_from(j[r][c], dim, path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]"));
    }
    g.push_back(std::move(row));
  }
  try {
    return MetricTensor(std::move(g));
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

// Models ----------------------------------------------------------------------

inline json to_json(const PolyModel& m) {
  json basis = json::array();
  for (const auto& mono : m.basis()) basis.push_back(mono.exponents());
  return {{"kind", "poly"}, {"basis", basis}, {"weights", vector_json(m.weights())}, {"polynomial", to_string(m.to_polynomial())}};
}

inline json to_json(const MlpModel& m) {
  json layers = json::array();
  for (const auto& l : m.layers()) layers.push_back({{"weight", matrix_json(l.weight)}, {"bias", vector_json(l.bias)}});
  return {{"kind", "mlp"}, {"sizes", m.sizes()}, {"activation", to_string(m.activation())}, {"layers", layers}};
}

inline json to_json(const LogisticFeatureModel& m) {
  json feats = json::array();
  for (const auto& p : m.feature_map().components()) feats.push_back(to_string(p));
  return {{"kind", "logistic"},
          {"feature_map", feats},
          {"weights", vector_json(m.weights())},
          {"bias", m.bias()},
          {"decision", to_string(m.decision_polynomial())}};
}

inline PolyModel poly_model_from(const json& j) {
  std::vector<Monomial> basis;
  for (const auto& e : j.at("basis")) basis.emplace_back(e.get<std::vector<int>>());
  return PolyModel(std::move(basis), vector_from(j.at("weights"), "weights"));
}

inline MlpModel mlp_model_from(const json& j) {
  std::vector<DenseLayer> layers;
  for (const auto& l : j.at("layers")) layers.push_back({matrix_from(l.at("weight"), "weight"), vector_from(l.at("bias"), "bias")});
  const Activation act = j.at("activation").get<std::string>() == "tanh" ? Activation::Tanh : Activation::Identity;
  return MlpModel(std::move(layers), act);
}

// Reports ---------------------------------------------------------------------

inline json to_json(const SimilarityReport& r) {
  return {{"value", r.value},       {"std_error", r.std_error}, {"method", r.method},
          {"samples", r.samples},   {"excluded", r.excluded},   {"metric", r.metric_id}};
}

inline json to_json(const GeneratorEstimate& e) {
  json fields = json::array();
  for (const auto& f : e.fields) fields.push_back(to_json(f));
  json degenerate = json::array();
  for (auto c : e.degenerate_columns) degenerate.push_back(c);
  return {{"basis", e.basis.id},
          {"provenance", e.provenance},
          {"coefficients", matrix_json(e.w.transpose())},
          {"column_loss", vector_json(e.column_loss)},
          {"total_loss", e.total_loss},
          {"fields", fields},
          {"degenerate_columns", degenerate}};
}

/// Every `stride`-th entry plus the last one.
template <class T, class F>
json thinned(const std::vector<T>& v, int stride, F&& encode) {
  json a = json::array();
  if (stride < 1) stride = 1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i % static_cast<std::size_t>(stride) == 0 || i + 1 == v.size()) a.push_back({{"epoch", i}, {"value", encode(v[i])}});
  }
  return a;
}

inline json loss_history_json(const std::vector<CompositeLoss>& h, int stride) {
  return thinned(h, stride, [](const CompositeLoss& l) {
    return json{{"data", l.data}, {"symmetry", l.symmetry}, {"total", l.total}};
  });
}

inline json scalar_history_json(const std::vector<double>& h, int stride) {
  return thinned(h, stride, [](double v) { return v; });
}

inline std::string spectrum_csv(const InvariantBasis& b) {
  std::string s = "index,sigma,retained\n";
  for (Eigen::Index j = 0; j < b.spectrum.size(); ++j) {
    s += std::to_string(j) + "," + format_coefficient(b.spectrum[j]) + "," + (b.spectrum[j] <= b.epsilon ? "1" : "0") + "\n";
  }
  return s;
}

inline json to_json(const InvariantBasis& b) {
  json feats = json::array();
  for (const auto& f : b.features) feats.push_back(to_string(f));
  json ambient = json::array();
  for (const auto& p : b.ambient) ambient.push_back(to_string(p));
  return {{"field", to_json(b.field)},
          {"epsilon", b.epsilon},
          {"B", b.bound_b},
          {"domain", {{"lower", vector_json(b.domain.lower)}, {"upper", vector_json(b.domain.upper)}}},
          {"ambient_basis", ambient},
          {"spectrum", vector_json(b.spectrum)},
          {"spectrum_csv", spectrum_csv(b)},
          {"retained_sigma", vector_json(b.retained_sigma)},
          {"features", feats}};
}

inline json to_json(const SoundnessReport& r) {
  return {{"trials", r.trials},  {"max_norm", r.max_norm}, {"bound", r.bound}, {"rigorous_bound", r.rigorous_bound},
          {"passed", r.passed},  {"vacuous", r.vacuous}};
}

inline json to_json(const CompletenessReport& r) {
  return {{"gamma", r.gamma},
          {"coefficient_distance", r.coefficient_distance},
          {"function_distance", r.function_distance},
          {"lemma_bound", r.lemma_bound},
          {"lambda_x", r.lambda_x},
          {"theorem_bound", r.theorem_bound},
          {"passed", r.passed}};
}

inline json to_json(const RobustnessReport& r) {
  return {{"epsilon", r.epsilon},   {"lambda", r.lambda},       {"apply_residual", r.apply_residual},
          {"max_excess", r.max_excess}, {"tolerance", r.tolerance}, {"trials", r.trials},
          {"diverged", r.diverged}, {"left_domain", r.left_domain}, {"passed", r.passed}};
}

// Hashing -------------------------------------------------------------------

/// 64-bit FNV-1a over a byte string, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace symdisc::io
