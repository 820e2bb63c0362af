#pragma once

// Regularised discriminant analysis on alpha-transformed compositions, and
// k-nearest-neighbour classification under any simplicial metric.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "simplexclf/dataio.hpp"
#include "simplexclf/metrics.hpp"
#include "simplexclf/simplex.hpp"

namespace simplexclf {

/// Condition numbers above this make a covariance matrix unusable.
inline constexpr double kMaxConditionNumber = 1e12;

struct GaussianGroupModel {
  int label = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // divisor count - 1
  std::size_t count = 0;
};

struct GaussianGroupFit {
  std::vector<GaussianGroupModel> groups;
  Eigen::MatrixXd pooled;
};

/// Per-group sample means and covariances of the rows of z, and the pooled
/// covariance sum_i (n_i - 1) S_i / (n - g). Labels must lie in
/// [0, group_count); every group needs at least two rows.
GaussianGroupFit fit_gaussian_groups(const Eigen::MatrixXd& z, std::span<const int> labels,
                                     std::size_t group_count);

/// S_p(g) = g S_p + (1 - g) tr(S_p) I / d;  S_i(l, g) = l S_i + (1 - l) S_p(g).
std::vector<Eigen::MatrixXd> regularize_covariances(
    const std::vector<GaussianGroupModel>& groups, const Eigen::MatrixXd& pooled,
    double lambda, double gamma);

enum class PriorMode { Proportional, Uniform };

/// A regularised covariance with its Cholesky factor and log-determinant.
struct FactoredCovariance {
  Eigen::MatrixXd matrix;
  Eigen::LLT<Eigen::MatrixXd> cholesky;
  double log_det = 0.0;
  double condition = 1.0;

  /// Throws IllConditioned if the matrix is not numerically SPD.
  static FactoredCovariance factor(Eigen::MatrixXd m);
  double mahalanobis_sq(const Eigen::VectorXd& centred) const;
};

struct RdaModel {
  Alpha alpha;
  double lambda = 1.0;
  double gamma = 0.0;
  PriorMode prior_mode = PriorMode::Proportional;
  std::vector<GaussianGroupModel> groups;
  Eigen::MatrixXd pooled;
  std::vector<FactoredCovariance> regularized;
  std::vector<double> priors;
  ContrastBasis basis = helmert_submatrix(2);

  std::size_t parts() const noexcept { return basis.dim_D(); }
};

/// Fits RDA(alpha, lambda, gamma) on already-transformed rows. The basis is
/// only recorded for scoring new compositions.
RdaModel fit_rda_transformed(const Eigen::MatrixXd& z, std::span<const int> labels,
                             std::size_t group_count, Alpha alpha, double lambda,
                             double gamma, PriorMode prior_mode, ContrastBasis basis);

/// Builds the model from fitted groups; lets callers reuse one group fit for
/// many (lambda, gamma) pairs.
RdaModel rda_from_groups(const GaussianGroupFit& fit, Alpha alpha, double lambda,
                         double gamma, PriorMode prior_mode, ContrastBasis basis);

RdaModel fit_rda(const LabeledCompositionDataset& data, Alpha alpha, double lambda,
                 double gamma, PriorMode prior_mode = PriorMode::Proportional);
RdaModel fit_rda(const LabeledCompositionDataset& data, Alpha alpha, double lambda,
                 double gamma, PriorMode prior_mode, const ContrastBasis& basis);

/// delta_i(z) = -log|2 pi S_i|/2 - (z - mu_i)' S_i^-1 (z - mu_i)/2 + log pi_i.
std::vector<double> rda_scores_transformed(const RdaModel& model, const Eigen::VectorXd& z);
std::vector<double> rda_scores(const RdaModel& model, const Composition& x);

/// Argmax of the scores; exact ties go to the lowest group index.
int rda_predict(const RdaModel& model, const Composition& x);
int rda_predict_transformed(const RdaModel& model, const Eigen::VectorXd& z);

struct KnnFit {
  std::vector<Composition> train_points;
  std::vector<int> train_labels;
  std::size_t k = 1;
  MetricSpec metric;

  KnnFit(std::vector<Composition> points, std::vector<int> labels, std::size_t k,
         MetricSpec metric);
};

/// Majority label among the first k entries of neighbour_labels (which must
/// already be ordered nearest first). Ties between labels are broken
/// uniformly at random with rng; rng is untouched when there is no tie.
int knn_vote(std::span<const int> neighbour_labels, std::size_t k, std::mt19937_64& rng);

/// Training indices ordered by (distance, index).
std::vector<std::size_t> neighbour_order(std::span<const double> distances);

int knn_predict(const KnnFit& fit, const Composition& x, std::mt19937_64& rng);

}  // namespace simplexclf
