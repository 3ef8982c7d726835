// Eigen-backed reference values and random matrix generators for the AHP tests.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mlrisk/ahp.hpp"

namespace testing_support {

struct OracleEigen {
  std::vector<double> weights;
  double lambda_max = 0;
};

// Dense eigendecomposition; the principal eigenpair is the one with the
// largest real eigenvalue.
inline OracleEigen oracle_eigen(const mlrisk::ahp::PairwiseMatrix& m) {
  const auto n = static_cast<Eigen::Index>(m.size());
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = m(i, j);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < n; ++i)
    if (solver.eigenvalues()[i].real() > solver.eigenvalues()[best].real()) best = i;
  Eigen::VectorXd v = solver.eigenvectors().col(best).real().cwiseAbs();
  v /= v.sum();
  return {std::vector<double>(v.data(), v.data() + n), solver.eigenvalues()[best].real()};
}

inline std::vector<std::string> labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("i" + std::to_string(i));
  return out;
}

inline std::vector<double> random_weights(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<double> d(0.05, 1.0);
  std::vector<double> w(n);
  for (auto& x : w) x = d(rng);
  return w;
}

inline mlrisk::ahp::PairwiseMatrix random_consistent(std::mt19937& rng, std::size_t n) {
  return mlrisk::ahp::PairwiseMatrix::from_weights(labels(n), random_weights(rng, n));
}

// Upper triangle drawn from the 17-value judgment scale.
inline mlrisk::ahp::PairwiseMatrix random_reciprocal(std::mt19937& rng, std::size_t n) {
  std::uniform_int_distribution<int> k(1, 9);
  std::bernoulli_distribution invert(0.5);
  mlrisk::ahp::PairwiseMatrix m(labels(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double r = k(rng);
      m.set(i, j, invert(rng) ? 1.0 / r : r);
    }
  return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Random positive local weights for every sibling group.
inline mlrisk::ahp::WeightModel random_weight_model(std::mt19937& rng, const mlrisk::ahp::Hierarchy& h) {
  std::map<std::string, std::map<std::string, double>> local;
  for (const auto& g : h.groups()) {
    auto w = random_weights(rng, g.items.size());
    double total = 0;
    for (double x : w) total += x;
    for (std::size_t i = 0; i < w.size(); ++i) local[g.path][g.items[i].id] = w[i] / total;
  }
  return mlrisk::ahp::WeightModel(h, std::move(local));
}

}  // namespace testing_support
