#pragma once

// Seeded synthetic datasets and CSV I/O.

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "symdisc/error.hpp"
#include "symdisc/function.hpp"
#include "symdisc/poly.hpp"
#include "symdisc/poly_text.hpp"
#include "symdisc/rng.hpp"

namespace symdisc {

/// Coordinate-wise min/max of a point set (may be degenerate, unlike Box).
struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box to_box() const { return Box(lower, upper); }
};

inline Bounds bounds_of(const PointSet& points) {
  if (points.rows() == 0) return {};
  return {points.colwise().minCoeff().transpose(), points.colwise().maxCoeff().transpose()};
}

struct Dataset {
  PointSet points;  // N x n
  std::optional<Eigen::VectorXd> targets;
  std::optional<std::vector<int>> labels;
  Bounds bounds;
  std::uint64_t seed = 0;
  std::string generator;
  std::vector<std::string> warnings;

  Eigen::Index size() const { return points.rows(); }
  std::size_t dimension() const { return static_cast<std::size_t>(points.cols()); }

  void validate() const {
    if (!points.allFinite()) throw ParseError("dataset contains non-finite coordinates");
    if (targets && targets->size() != points.rows()) throw DimensionError("targets length does not match points");
    if (targets && !targets->allFinite()) throw ParseError("dataset contains non-finite targets");
    if (labels && static_cast<Eigen::Index>(labels->size()) != points.rows()) {
      throw DimensionError("labels length does not match points");
    }
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    auto same_opt = [](const auto& x, const auto& y) { return x.has_value() == y.has_value() && (!x || *x == *y); };
    return a.points.rows() == b.points.rows() && a.points.cols() == b.points.cols() && a.points == b.points &&
           same_opt(a.targets, b.targets) && same_opt(a.labels, b.labels);
  }
};

/// x^2 + y^2 sampled as r = sqrt(U), U ~ U(0, 4), theta ~ U(theta_lo, theta_hi).
inline Dataset gen_half_disk(int n, double theta_lo, double theta_hi, std::uint64_t seed) {
  if (n < 1) throw ParseError("gen_half_disk: N must be >= 1");
  Rng rng(seed);
  Dataset d;
  d.points.resize(n, 2);
  d.targets = Eigen::VectorXd(n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform(0.0, 4.0);
    const double theta = rng.uniform(theta_lo, theta_hi);
    const double r = std::sqrt(u);
    const double x = r * std::cos(theta);
    const double y = r * std::sin(theta);
    d.points(i, 0) = x;
    d.points(i, 1) = y;
    (*d.targets)[i] = x * x + y * y;
  }
  d.bounds = bounds_of(d.points);
  d.seed = seed;
  d.generator = "half-disk";
  return d;
}

/// Target of the thin-strip regression problem: 2x^4 - 2x^2y^2 + y^4.
inline Polynomial quartic_target() { return parse_polynomial("2*x1^4 - 2*x1^2*x2^2 + x2^4", 2); }

/// x ~ U(-4, 4), y ~ U(-0.1, 0.1), targets 2x^4 - 2x^2y^2 + y^4.
inline Dataset gen_thin_strip(int n, std::uint64_t seed) {
  if (n < 1) throw ParseError("gen_thin_strip: N must be >= 1");
  Rng rng(seed);
  Dataset d;
  d.points.resize(n, 2);
  d.targets = Eigen::VectorXd(n);
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(-4.0, 4.0);
    const double y = rng.uniform(-0.1, 0.1);
    d.points(i, 0) = x;
    d.points(i, 1) = y;
    (*d.targets)[i] = 2.0 * x * x * x * x - 2.0 * x * x * y * y + y * y * y * y;
  }
  d.bounds = bounds_of(d.points);
  d.seed = seed;
  d.generator = "thin-strip";
  return d;
}

/// Decision function of the 3-d classification problem: x^2 + y^2/2 - yz + z^2/2 - 1/2.
inline Polynomial quadric_decision() {
  return parse_polynomial("x1^2 + 0.5*x2^2 - x2*x3 + 0.5*x3^2 - 0.5", 3);
}

/// Uniform points in `box` labelled 1 where the quadric decision function is positive.
inline Dataset gen_quadric_labels(int n, const Box& box, std::uint64_t seed) {
  if (n < 1) throw ParseError("gen_quadric_labels: N must be >= 1");
  if (box.dimension() != 3) throw DimensionError("gen_quadric_labels: box must be 3-dimensional");
  const Polynomial f = quadric_decision();
  Rng rng(seed);
  Dataset d;
  d.points.resize(n, 3);
  d.labels = std::vector<int>(static_cast<std::size_t>(n));
  int ones = 0;
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) d.points(i, a) = rng.uniform(box.lower[a], box.upper[a]);
    const int label = eval(f, Eigen::VectorXd(d.points.row(i).transpose())) > 0.0 ? 1 : 0;
    (*d.labels)[static_cast<std::size_t>(i)] = label;
    ones += label;
  }
  if (ones == 0 || ones == n) d.warnings.push_back("single-class outcome; regenerate with another seed or box");
  d.bounds = bounds_of(d.points);
  d.seed = seed;
  d.generator = "quadric-labels";
  return d;
}

/// Uniform points on the disk of the given radius (area-uniform).
inline Dataset gen_uniform_disk(int n, double radius, std::uint64_t seed) {
  if (n < 1) throw ParseError("gen_uniform_disk: N must be >= 1");
  Rng rng(seed);
  Dataset d;
  d.points.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const double r = radius * std::sqrt(rng.uniform());
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    d.points(i, 0) = r * std::cos(theta);
    d.points(i, 1) = r * std::sin(theta);
  }
  d.bounds = bounds_of(d.points);
  d.seed = seed;
  d.generator = "uniform-disk";
  return d;
}

/// Uniform points in a box.
inline PointSet sample_box(const Box& box, int n, Rng& rng) {
  PointSet p(n, static_cast<Eigen::Index>(box.dimension()));
  for (int i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < p.cols(); ++a) p(i, a) = rng.uniform(box.lower[a], box.upper[a]);
  return p;
}

/// Named dataset presets: exp1-train, exp1-test, exp2, exp3.
inline Dataset preset_dataset(const std::string& name, std::uint64_t seed) {
  if (name == "exp1-train") return gen_half_disk(1000, 0.0, std::numbers::pi, seed);
  if (name == "exp1-test") return gen_half_disk(3000, std::numbers::pi, 2.0 * std::numbers::pi, seed);
  if (name == "exp2") return gen_thin_strip(2000, seed);
  if (name == "exp3") return gen_quadric_labels(5000, Box::cube(3, -2.0, 2.0), seed);
  throw ConfigError("dataset.preset", "unknown dataset preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// CSV

inline void write_csv(const Dataset& d, std::ostream& os) {
  d.validate();
  const auto n = d.points.cols();
  for (Eigen::Index a = 0; a < n; ++a) os << (a ? "," : "") << "x" << (a + 1);
  if (d.targets) os << ",target";
  if (d.labels) os << ",label";
  os << "\n";
  for (Eigen::Index i = 0; i < d.points.rows(); ++i) {
    for (Eigen::Index a = 0; a < n; ++a) os << (a ? "," : "") << format_coefficient(d.points(i, a));
    if (d.targets) os << "," << format_coefficient((*d.targets)[i]);
    if (d.labels) os << "," << (*d.labels)[static_cast<std::size_t>(i)];
    os << "\n";
  }
}

inline void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open '" + path + "' for writing");
  write_csv(d, os);
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}
}  // namespace detail

inline Dataset read_csv(std::istream& is, const std::string& name = "<csv>") {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(name + ": empty file");
  const auto header = detail::split_csv(line);
  std::vector<int> coord_col;
  int target_col = -1;
  int label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (h == "target") {
      target_col = static_cast<int>(c);
    } else if (h == "label") {
      label_col = static_cast<int>(c);
    } else if (h.size() > 1 && h[0] == 'x') {
      const int idx = std::stoi(h.substr(1));
      if (idx != static_cast<int>(coord_col.size()) + 1) throw ParseError(name + ": coordinate columns must be x1..xn in order");
      coord_col.push_back(static_cast<int>(c));
    } else {
      throw ParseError(name + ": unknown column '" + h + "'");
    }
  }
  if (coord_col.empty()) throw ParseError(name + ": no coordinate columns");
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size()) {
      throw ParseError(name + ", line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(cells.size()));
    }
    auto num = [&](std::size_t c) {
      double v = 0.0;
      const std::string& s = cells[c];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(name + ", line " + std::to_string(line_no) + ": malformed number '" + s + "'");
      }
      if (!std::isfinite(v)) {
        throw ParseError(name + ", line " + std::to_string(line_no) + ": non-finite value '" + s + "'");
      }
      return v;
    };
    std::vector<double> r;
    for (int c : coord_col) r.push_back(num(static_cast<std::size_t>(c)));
    rows.push_back(std::move(r));
    if (target_col >= 0) targets.push_back(num(static_cast<std::size_t>(target_col)));
    if (label_col >= 0) {
      const double l = num(static_cast<std::size_t>(label_col));
      if (l != 0.0 && l != 1.0) throw ParseError(name + ", line " + std::to_string(line_no) + ": label must be 0 or 1");
      labels.push_back(static_cast<int>(l));
    }
  }
  Dataset d;
  d.points.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(coord_col.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t a = 0; a < coord_col.size(); ++a)
      d.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = rows[i][a];
  if (target_col >= 0) d.targets = Eigen::Map<Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  if (label_col >= 0) d.labels = labels;
  d.bounds = bounds_of(d.points);
  d.generator = "csv";
  return d;
}

inline Dataset read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path + "'");
  return read_csv(is, path);
}

}  // namespace symdisc
