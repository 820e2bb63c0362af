#include "simplexclf/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "simplexclf/error.hpp"

namespace simplexclf {

namespace {

void require_unit_interval(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorCode::ParameterOutOfRange,
                std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
  }
}

std::vector<double> make_priors(const std::vector<GaussianGroupModel>& groups,
                                PriorMode mode) {
  std::vector<double> priors(groups.size());
  if (mode == PriorMode::Uniform) {
    std::fill(priors.begin(), priors.end(), 1.0 / static_cast<double>(groups.size()));
    return priors;
  }
  std::size_t n = 0;
  for (const auto& g : groups) n += g.count;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    priors[i] = static_cast<double>(groups[i].count) / static_cast<double>(n);
  }
  return priors;
}

}  // namespace

GaussianGroupFit fit_gaussian_groups(const Eigen::MatrixXd& z, std::span<const int> labels,
                                     std::size_t group_count) {
  if (static_cast<std::size_t>(z.rows()) != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "one label per row is required");
  }
  const auto d = z.cols();
  std::vector<std::size_t> counts(group_count, 0);
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= group_count) {
      throw Error(ErrorCode::InvalidSpec, "label out of range");
    }
    ++counts[static_cast<std::size_t>(label)];
  }
  for (std::size_t g = 0; g < group_count; ++g) {
    if (counts[g] < 2) {
      throw Error(ErrorCode::GroupTooSmall, "group " + std::to_string(g) + " has " +
                                                std::to_string(counts[g]) +
                                                " training rows; at least 2 are needed");
    }
  }

  GaussianGroupFit fit;
  fit.groups.resize(group_count);
  for (std::size_t g = 0; g < group_count; ++g) {
    fit.groups[g].label = static_cast<int>(g);
    fit.groups[g].count = counts[g];
    fit.groups[g].mean = Eigen::VectorXd::Zero(d);
    fit.groups[g].covariance = Eigen::MatrixXd::Zero(d, d);
  }
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    fit.groups[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])].mean +=
        z.row(r).transpose();
  }
  for (auto& g : fit.groups) g.mean /= static_cast<double>(g.count);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    auto& g = fit.groups[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])];
    const Eigen::VectorXd c = z.row(r).transpose() - g.mean;
    g.covariance.noalias() += c * c.transpose();
  }

  fit.pooled = Eigen::MatrixXd::Zero(d, d);
  for (auto& g : fit.groups) {
    fit.pooled += g.covariance;  // (n_i - 1) S_i
    g.covariance /= static_cast<double>(g.count - 1);
  }
  fit.pooled /= static_cast<double>(z.rows() - static_cast<Eigen::Index>(group_count));
  return fit;
}

std::vector<Eigen::MatrixXd> regularize_covariances(
    const std::vector<GaussianGroupModel>& groups, const Eigen::MatrixXd& pooled,
    double lambda, double gamma) {
  require_unit_interval(lambda, "lambda");
  require_unit_interval(gamma, "gamma");
  const auto d = pooled.rows();
  const Eigen::MatrixXd shrunk_pooled =
      gamma * pooled + (1.0 - gamma) * (pooled.trace() / static_cast<double>(d)) *
                           Eigen::MatrixXd::Identity(d, d);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    if (lambda == 1.0) {
      out.push_back(g.covariance);
    } else if (lambda == 0.0) {
      out.push_back(shrunk_pooled);
    } else {
      out.push_back(lambda * g.covariance + (1.0 - lambda) * shrunk_pooled);
    }
  }
  return out;
}

FactoredCovariance FactoredCovariance::factor(Eigen::MatrixXd m) {
  FactoredCovariance f;
  f.matrix = std::move(m);
  const Eigen::VectorXd eig =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(f.matrix, Eigen::EigenvaluesOnly)
          .eigenvalues();
  const double lo = eig.minCoeff();
  const double hi = eig.maxCoeff();
  f.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(lo > 0.0) || !(f.condition <= kMaxConditionNumber)) {
    throw Error(ErrorCode::IllConditioned,
                "covariance condition number " + std::to_string(f.condition) +
                    " exceeds the limit");
  }
  f.cholesky.compute(f.matrix);
  if (f.cholesky.info() != Eigen::Success) {
    throw Error(ErrorCode::IllConditioned, "covariance is not positive definite");
  }
  f.log_det = 2.0 * f.cholesky.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return f;
}

double FactoredCovariance::mahalanobis_sq(const Eigen::VectorXd& centred) const {
  const Eigen::VectorXd w = cholesky.matrixL().solve(centred);
  return w.squaredNorm();
}

RdaModel rda_from_groups(const GaussianGroupFit& fit, Alpha alpha, double lambda,
                         double gamma, PriorMode prior_mode, ContrastBasis basis) {
  RdaModel model;
  model.alpha = alpha;
  model.lambda = lambda;
  model.gamma = gamma;
  model.prior_mode = prior_mode;
  model.groups = fit.groups;
  model.pooled = fit.pooled;
  model.basis = std::move(basis);
  model.priors = make_priors(fit.groups, prior_mode);
  auto covs = regularize_covariances(fit.groups, fit.pooled, lambda, gamma);
  model.regularized.reserve(covs.size());
  for (std::size_t g = 0; g < covs.size(); ++g) {
    try {
      model.regularized.push_back(FactoredCovariance::factor(std::move(covs[g])));
    } catch (const Error& e) {
      throw Error(e.code(), "group " + std::to_string(g) + ": " + e.message());
    }
  }
  return model;
}

RdaModel fit_rda_transformed(const Eigen::MatrixXd& z, std::span<const int> labels,
                             std::size_t group_count, Alpha alpha, double lambda,
                             double gamma, PriorMode prior_mode, ContrastBasis basis) {
  require_unit_interval(lambda, "lambda");
  require_unit_interval(gamma, "gamma");
  return rda_from_groups(fit_gaussian_groups(z, labels, group_count), alpha, lambda, gamma,
                         prior_mode, std::move(basis));
}

RdaModel fit_rda(const LabeledCompositionDataset& data, Alpha alpha, double lambda,
                 double gamma, PriorMode prior_mode, const ContrastBasis& basis) {
  const Eigen::MatrixXd z = transform_rows(data.rows, alpha, basis);
  return fit_rda_transformed(z, data.labels, data.group_count(), alpha, lambda, gamma,
                             prior_mode, basis);
}

RdaModel fit_rda(const LabeledCompositionDataset& data, Alpha alpha, double lambda,
                 double gamma, PriorMode prior_mode) {
  return fit_rda(data, alpha, lambda, gamma, prior_mode, helmert_submatrix(data.parts()));
}

std::vector<double> rda_scores_transformed(const RdaModel& model, const Eigen::VectorXd& z) {
  if (static_cast<std::size_t>(z.size()) != model.basis.dim_d()) {
    throw Error(ErrorCode::DimensionMismatch, "transformed vector has the wrong length");
  }
  const double d = static_cast<double>(z.size());
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  std::vector<double> scores(model.groups.size());
  for (std::size_t g = 0; g < model.groups.size(); ++g) {
    const auto& cov = model.regularized[g];
    // log|2 pi S| = d log(2 pi) + log|S|
    scores[g] = -0.5 * (d * log_2pi + cov.log_det) -
                0.5 * cov.mahalanobis_sq(z - model.groups[g].mean) + std::log(model.priors[g]);
  }
  return scores;
}

std::vector<double> rda_scores(const RdaModel& model, const Composition& x) {
  if (x.size() != model.parts()) {
    throw Error(ErrorCode::DimensionMismatch, "composition has the wrong number of parts");
  }
  return rda_scores_transformed(model, alpha_transform(x, model.alpha, model.basis).coords);
}

int rda_predict_transformed(const RdaModel& model, const Eigen::VectorXd& z) {
  const auto scores = rda_scores_transformed(model, z);
  // max_element returns the first maximum, i.e. the lowest index on ties.
  return model.groups[static_cast<std::size_t>(
                          std::max_element(scores.begin(), scores.end()) - scores.begin())]
      .label;
}

int rda_predict(const RdaModel& model, const Composition& x) {
  const auto scores = rda_scores(model, x);
  return model.groups[static_cast<std::size_t>(
                          std::max_element(scores.begin(), scores.end()) - scores.begin())]
      .label;
}

KnnFit::KnnFit(std::vector<Composition> points, std::vector<int> labels, std::size_t k_,
               MetricSpec metric_)
    : train_points(std::move(points)), train_labels(std::move(labels)), k(k_), metric(metric_) {
  if (train_points.size() != train_labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "one label per training point is required");
  }
  if (k == 0 || k > train_points.size()) {
    throw Error(ErrorCode::ParameterOutOfRange,
                "k must lie in [1, " + std::to_string(train_points.size()) + "]");
  }
}

int knn_vote(std::span<const int> neighbour_labels, std::size_t k, std::mt19937_64& rng) {
  if (k == 0 || k > neighbour_labels.size()) {
    throw Error(ErrorCode::ParameterOutOfRange, "k exceeds the number of neighbours");
  }
  // Labels in order of first appearance among the neighbours, with counts.
  std::vector<std::pair<int, std::size_t>> tally;
  for (std::size_t i = 0; i < k; ++i) {
    const int label = neighbour_labels[i];
    auto it = std::find_if(tally.begin(), tally.end(),
                           [label](const auto& e) { return e.first == label; });
    if (it == tally.end()) {
      tally.emplace_back(label, 1);
    } else {
      ++it->second;
    }
  }
  std::size_t best = 0;
  for (const auto& [label, count] : tally) best = std::max(best, count);
  std::vector<int> tied;
  for (const auto& [label, count] : tally) {
    if (count == best) tied.push_back(label);
  }
  if (tied.size() == 1) return tied.front();
  std::sort(tied.begin(), tied.end());
  std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
  return tied[pick(rng)];
}

std::vector<std::size_t> neighbour_order(std::span<const double> distances) {
  std::vector<std::size_t> order(distances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return distances[a] < distances[b] || (distances[a] == distances[b] && a < b);
  });
  return order;
}

int knn_predict(const KnnFit& fit, const Composition& x, std::mt19937_64& rng) {
  const std::size_t n = fit.train_points.size();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (fit.train_points[i].size() != x.size()) {
      throw Error(ErrorCode::DimensionMismatch, "query and training point sizes differ");
    }
    dist[i] = distance(x, fit.train_points[i], fit.metric);
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  const auto kth = idx.begin() + static_cast<std::ptrdiff_t>(fit.k);
  std::partial_sort(idx.begin(), kth, idx.end(), [&](std::size_t a, std::size_t b) {
    return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
  });
  std::vector<int> labels(fit.k);
  for (std::size_t i = 0; i < fit.k; ++i) labels[i] = fit.train_labels[idx[i]];
  return knn_vote(labels, fit.k, rng);
}

}  // namespace simplexclf
