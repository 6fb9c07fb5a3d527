// Recovers the rotation symmetry of f(x, y) = x^2 + y^2 from samples, then
// builds the degree-2 invariant basis of the recovered field.

#include <cstdio>

#include "symdisc/data.hpp"
#include "symdisc/discovery.hpp"
#include "symdisc/enforcement.hpp"
#include "symdisc/poly_text.hpp"
#include "symdisc/scoring.hpp"

int main() {
  using namespace symdisc;
  const PolynomialFunction f(parse_polynomial("x1^2 + x2^2", 2));
  const Dataset data = gen_uniform_disk(500, 2.0, 7);

  const auto em = build_extended_matrix(f, data.points, VFBasis::polynomial(2, 1));
  TrainConfig cfg;
  cfg.epochs = 1000;
  cfg.seed = 7;
  const GeneratorEstimate est = estimate_generators(em, 1, cfg);
  const VectorField& x = est.fields.front();
  std::printf("estimated field:\n  d/dx1: %s\n  d/dx2: %s\n", to_string(x[0]).c_str(), to_string(x[1]).c_str());

  const VectorField rotation({parse_polynomial("-x2", 2), parse_polynomial("x1", 2)});
  const auto sim = similarity(x, rotation, MetricTensor::euclidean(2), Box::cube(2, -2, 2), 20000, 1);
  std::printf("similarity to -y d/dx + x d/dy: %.6f (se %.1e)\n", sim.value, sim.std_error);

  const InvariantBasis basis = build_invariant_basis(x, 2, Box::cube(2, -1, 1), 1e-4);
  std::printf("invariant features (eps = 1e-4):\n");
  for (std::size_t i = 0; i < basis.features.size(); ++i) {
    std::printf("  sigma %.2e  %s\n", basis.retained_sigma[static_cast<Eigen::Index>(i)],
                to_string(basis.features[i]).c_str());
  }
  return 0;
}
