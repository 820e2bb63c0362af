#pragma once

#include <span>
#include <string>
#include <vector>

#include "simplexclf/simplex.hpp"

namespace simplexclf {

enum class MetricKind { AlphaMetric, Esov };

struct MetricSpec {
  MetricKind kind = MetricKind::AlphaMetric;
  Alpha alpha{1.0};  // ignored for Esov

  static MetricSpec alpha_metric(Alpha a) { return {MetricKind::AlphaMetric, a}; }
  static MetricSpec esov() { return {MetricKind::Esov, Alpha(1.0)}; }

  std::string name() const;
  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

/// Row-major n_a x n_b matrix of distances.
struct DistanceMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  MetricSpec metric;

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

/// The alpha-metric, evaluated in closed form:
///   (D/|a|) * || u_a(x) - u_a(y) ||   for a != 0,
///   || clr(x) - clr(y) ||             for a == 0 (Aitchison distance).
double alpha_distance(const Composition& x, const Composition& y, Alpha alpha);

/// The vector the closed form compares: u_a(x) for a != 0, clr(x) for a == 0.
Eigen::VectorXd metric_image(const Composition& x, Alpha alpha);

/// Closed-form alpha-metric between two precomputed metric_image() vectors.
double alpha_distance_from_images(const Eigen::VectorXd& ix, const Eigen::VectorXd& iy,
                                  Alpha alpha);

/// || z_a(x) - z_a(y) || computed through the transformed coordinates. Agrees
/// with alpha_distance() for every valid basis.
double alpha_distance_via_transform(const Composition& x, const Composition& y,
                                    Alpha alpha, const ContrastBasis& basis);

/// Square root of the symmetrised Jensen-Shannon-type sum; zero parts
/// contribute nothing.
double esov_distance(const Composition& x, const Composition& y);

double distance(const Composition& x, const Composition& y, const MetricSpec& metric);

/// Entry (i, j) is distance(a[i], b[j]). Errors name the offending pair.
/// Rows may be computed on several threads; the result does not depend on it.
DistanceMatrix pairwise_distances(std::span<const Composition> a,
                                  std::span<const Composition> b,
                                  const MetricSpec& metric, unsigned threads = 1);

}  // namespace simplexclf
