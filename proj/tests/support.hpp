#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "simplexclf/simplex.hpp"

namespace testsupport {

// Strictly positive composition with parts spread over a few orders of
// magnitude, so log-ratios are not all close to zero.
inline simplexclf::Composition random_composition(std::size_t D, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 1.0);
  std::vector<double> raw(D);
  for (auto& v : raw) v = std::pow(10.0, u(rng));
  return simplexclf::closure(raw);
}

inline std::vector<double> random_raw(std::size_t D, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 5.0);
  std::vector<double> raw(D);
  for (auto& v : raw) v = u(rng);
  return raw;
}

inline Eigen::MatrixXd random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace testsupport
