#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "simplexclf/classifiers.hpp"
#include "simplexclf/dataio.hpp"
#include "simplexclf/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace simplexclf;
using namespace testsupport;
using doctest::Approx;

namespace {

Eigen::MatrixXd column(std::initializer_list<double> v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("group moments and pooled covariance") {
  const std::vector<int> labels{0, 0, 1, 1};
  auto fit = fit_gaussian_groups(column({0, 2, 1, 3}), labels, 2);
  CHECK(fit.groups[0].covariance(0, 0) == 2.0);
  CHECK(fit.groups[1].covariance(0, 0) == 2.0);
  CHECK(fit.groups[0].mean[0] == 1.0);
  CHECK(fit.pooled(0, 0) == 2.0);

  auto flat = fit_gaussian_groups(column({1, 1, 5, 5}), labels, 2);
  CHECK(flat.groups[0].covariance(0, 0) == 0.0);
  CHECK(flat.pooled(0, 0) == 0.0);

  const std::vector<int> lonely{0, 0, 1};
  CHECK_THROWS_WITH_AS(fit_gaussian_groups(column({0, 1, 2}), lonely, 2), doctest::Contains("group 1"),
                       Error);
}

TEST_CASE("pooled covariance is the common one when all groups agree") {
  // Three groups that are translates of each other share S_i exactly.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd base(6, 3);
  for (Eigen::Index i = 0; i < base.size(); ++i) base.data()[i] = normal(rng);
  Eigen::MatrixXd z(18, 3);
  std::vector<int> labels;
  for (int g = 0; g < 3; ++g) {
    z.middleRows(6 * g, 6) = base.rowwise() + Eigen::RowVector3d::Constant(4.0 * g);
    labels.insert(labels.end(), 6, g);
  }
  auto fit = fit_gaussian_groups(z, labels, 3);
  for (const auto& g : fit.groups) CHECK((g.covariance - fit.pooled).norm() <= 1e-12);
}

TEST_CASE("regularization corners") {
  std::mt19937_64 rng(9);
  auto s = gaussian_groups(3, 10, 4, 3.0, rng);
  auto fit = fit_gaussian_groups(s.z, s.labels, 3);

  auto qda = regularize_covariances(fit.groups, fit.pooled, 1.0, 0.0);
  for (std::size_t g = 0; g < 3; ++g) CHECK(qda[g] == fit.groups[g].covariance);

  auto lda = regularize_covariances(fit.groups, fit.pooled, 0.0, 1.0);
  for (const auto& m : lda) CHECK(m == fit.pooled);

  auto sph = regularize_covariances(fit.groups, fit.pooled, 0.0, 0.0);
  const double level = fit.pooled.trace() / 4.0;
  for (const auto& m : sph) CHECK((m - level * Eigen::MatrixXd::Identity(4, 4)).norm() <= 1e-14);

  auto mid = regularize_covariances(fit.groups, fit.pooled, 0.3, 0.6);
  const Eigen::MatrixXd sp = 0.6 * fit.pooled + 0.4 * level * Eigen::MatrixXd::Identity(4, 4);
  for (std::size_t g = 0; g < 3; ++g) {
    CHECK((mid[g] - (0.3 * fit.groups[g].covariance + 0.7 * sp)).norm() <= 1e-12);
    CHECK((mid[g] - mid[g].transpose()).norm() <= 1e-12);
  }

  CHECK_THROWS_AS(regularize_covariances(fit.groups, fit.pooled, 1.1, 0.0), Error);
  CHECK_THROWS_AS(regularize_covariances(fit.groups, fit.pooled, 0.5, -0.1), Error);
}

TEST_CASE("priors") {
  std::mt19937_64 rng(12);
  auto s = gaussian_groups(2, 10, 2, 3.0, rng);
  s.labels[0] = 1;  // sizes 9 and 11
  auto prop = fit_rda_transformed(s.z, s.labels, 2, Alpha(1.0), 0.5, 0.5, PriorMode::Proportional,
                                  helmert_submatrix(3));
  CHECK(prop.priors[0] == 9.0 / 20.0);
  CHECK(prop.priors[1] == 11.0 / 20.0);
  auto uni = fit_rda_transformed(s.z, s.labels, 2, Alpha(1.0), 0.5, 0.5, PriorMode::Uniform,
                                 helmert_submatrix(3));
  CHECK(uni.priors[0] == 0.5);
}

TEST_CASE("scalar gaussian score") {
  const double a = 1.0 / std::sqrt(2.0);  // sample variance of {-a, a} is 1
  const std::vector<int> labels{0, 0};
  auto model = fit_rda_transformed(column({-a, a}), labels, 1, Alpha(1.0), 1.0, 0.0,
                                   PriorMode::Proportional, helmert_submatrix(2));
  Eigen::VectorXd z(1);
  z << 0.0;
  CHECK(rda_scores_transformed(model, z)[0] == Approx(-0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-12));
  CHECK(rda_scores_transformed(model, z)[0] == Approx(-0.918939).epsilon(1e-6));
  z << 1.5;
  CHECK(rda_scores_transformed(model, z)[0] ==
        Approx(-0.5 * std::log(2 * std::numbers::pi) - 1.125).epsilon(1e-12));
}

TEST_CASE("only the prior term differs for identical groups") {
  const std::vector<int> labels{0, 0, 0, 1, 1, 1};
  auto model = fit_rda_transformed(column({-1, 0, 1, -1, 0, 1}), labels, 2, Alpha(1.0), 1.0, 0.0,
                                   PriorMode::Uniform, helmert_submatrix(2));
  model.priors = {0.9, 0.1};
  Eigen::VectorXd z(1);
  z << 0.37;
  auto s = rda_scores_transformed(model, z);
  CHECK(s[0] - s[1] == Approx(std::log(9.0)).epsilon(1e-12));
}

TEST_CASE("point at a group mean with unit covariance goes to that group") {
  Eigen::MatrixXd z(8, 2);
  z << -1, 0, 1, 0, 0, -1, 0, 1, 4, 3, 6, 3, 5, 2, 5, 4;
  const std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1};
  auto model = fit_rda_transformed(z, labels, 2, Alpha(1.0), 1.0, 0.0, PriorMode::Uniform,
                                   helmert_submatrix(3));
  CHECK(rda_predict_transformed(model, Eigen::Vector2d(0, 0)) == 0);
  CHECK(rda_predict_transformed(model, Eigen::Vector2d(5, 3)) == 1);

  // Equal covariances: the boundary is the perpendicular bisector.
  auto lda = fit_rda_transformed(z, labels, 2, Alpha(1.0), 0.0, 1.0, PriorMode::Uniform,
                                 helmert_submatrix(3));
  const Eigen::Vector2d mid(2.5, 1.5), dir(5, 3);
  CHECK(rda_predict_transformed(lda, mid - 1e-6 * dir) == 0);
  CHECK(rda_predict_transformed(lda, mid + 1e-6 * dir) == 1);
}

TEST_CASE("small groups in eight parts cannot use QDA") {
  // Two groups of 5 and 3 in D = 8 leave rank-deficient group covariances.
  std::mt19937_64 rng(21);
  std::vector<std::vector<double>> raw;
  std::vector<int> labels;
  for (int i = 0; i < 8; ++i) {
    raw.push_back(testsupport::random_raw(8, rng));
    labels.push_back(i < 5 ? 0 : 1);
  }
  std::vector<std::string> names;
  for (int c = 0; c < 8; ++c) names.push_back("c" + std::to_string(c));
  auto data = LabeledCompositionDataset::from_raw(names, raw, labels, {"a", "b"}, "test");
  try {
    fit_rda(data, Alpha(1.0), 1.0, 0.0);
    FAIL("expected IllConditioned");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IllConditioned);
    CHECK_FALSE(e.is_input_error());
  }
  CHECK_NOTHROW(fit_rda(data, Alpha(1.0), 0.0, 0.0));
}

TEST_CASE("scores do not depend on the contrast basis") {
  std::mt19937_64 rng(77);
  for (double a : {0.0, 0.5, 1.0}) {
    auto data = generate_synthetic({SyntheticRegime::LraFavored, 5, 3, 20, 2.0, 50.0, 3});
    const auto h = helmert_submatrix(5);
    const auto rotated = ContrastBasis::from_matrix(testsupport::random_orthogonal(4, rng) * h.matrix());
    for (auto [lam, gam] : {std::pair{1.0, 0.0}, {0.0, 1.0}, {0.4, 0.7}}) {
      auto m1 = fit_rda(data, Alpha(a), lam, gam, PriorMode::Proportional, h);
      auto m2 = fit_rda(data, Alpha(a), lam, gam, PriorMode::Proportional, rotated);
      double worst = 0.0;
      for (int q = 0; q < 50; ++q) {
        auto x = testsupport::random_composition(5, rng);
        auto s1 = rda_scores(m1, x), s2 = rda_scores(m2, x);
        for (std::size_t g = 0; g < s1.size(); ++g) worst = std::max(worst, std::abs(s1[g] - s2[g]));
      }
      CHECK(worst <= 1e-8);
    }
  }
}

TEST_CASE("LDA corner matches an independent pooled discriminant") {
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0, total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t g = 2 + trial % 4;
    auto train = gaussian_groups(g, 15, 3, 1.5, rng);
    auto test = gaussian_groups(g, 20, 3, 1.5, rng);
    auto model = fit_rda_transformed(train.z, train.labels, g, Alpha(1.0), 0.0, 1.0,
                                     PriorMode::Proportional, helmert_submatrix(4));
    auto oracle = lda_oracle(train, g, test.z);
    for (Eigen::Index q = 0; q < test.z.rows(); ++q, ++total)
      if (rda_predict_transformed(model, test.z.row(q).transpose()) != oracle[q]) ++mismatches;
  }
  CHECK(total == 1400);
  CHECK(mismatches == 0);
}

TEST_CASE("QDA boundary agrees with scalar root finding") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(60, 2);
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) {
    z.row(i) << 0.5 * normal(rng), 0.5 * normal(rng);
    labels.push_back(0);
  }
  for (int i = 30; i < 60; ++i) {
    z.row(i) << 3 + 2.0 * normal(rng), 1 + 0.7 * normal(rng);
    labels.push_back(1);
  }
  auto model = fit_rda_transformed(z, labels, 2, Alpha(1.0), 1.0, 0.0, PriorMode::Uniform,
                                   helmert_submatrix(3));

  // Log-density difference with 2x2 determinants and inverses written out.
  auto logdens = [&](int g, double x, double y) {
    const auto& m = model.groups[g].mean;
    const auto& s = model.groups[g].covariance;
    const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
    const double dx = x - m[0], dy = y - m[1];
    const double q = (s(1, 1) * dx * dx - 2 * s(0, 1) * dx * dy + s(0, 0) * dy * dy) / det;
    return -0.5 * std::log(4 * std::numbers::pi * std::numbers::pi * det) - 0.5 * q;
  };
  const Eigen::Vector2d a = model.groups[0].mean, b = model.groups[1].mean;
  for (double offset : {-1.0, 0.0, 0.8}) {
    const Eigen::Vector2d shift(0.0, offset);
    auto f = [&](double t) {
      const Eigen::Vector2d p = a + t * (b - a) + shift;
      return logdens(0, p[0], p[1]) - logdens(1, p[0], p[1]);
    };
    double lo = 0.0, hi = 1.0;
    REQUIRE(f(lo) > 0);
    REQUIRE(f(hi) < 0);
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (lo + hi);
      (f(m) > 0 ? lo : hi) = m;
    }
    const double root = 0.5 * (lo + hi);
    CHECK(rda_predict_transformed(model, a + (root - 1e-6) * (b - a) + shift) == 0);
    CHECK(rda_predict_transformed(model, a + (root + 1e-6) * (b - a) + shift) == 1);
  }
}

TEST_CASE("raising a prior never moves a prediction away from that group") {
  std::mt19937_64 rng(15);
  auto s = gaussian_groups(3, 12, 2, 1.0, rng);
  auto model = fit_rda_transformed(s.z, s.labels, 3, Alpha(1.0), 0.5, 0.5, PriorMode::Uniform,
                                   helmert_submatrix(3));
  std::normal_distribution<double> normal;
  for (int q = 0; q < 300; ++q) {
    const Eigen::Vector2d x(2 * normal(rng), 2 * normal(rng));
    const int before = rda_predict_transformed(model, x);
    auto boosted = model;
    boosted.priors[before] *= 3.0;
    CHECK(rda_predict_transformed(boosted, x) == before);
  }
}

TEST_CASE("log-ratio data favour alpha zero on the training set") {
  auto data = generate_synthetic({SyntheticRegime::LraFavored, 4, 2, 50, 3.0, 50.0, 1});
  auto accuracy = [&](double a) {
    auto m = fit_rda(data, Alpha(a), 0.0, 1.0);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < data.size(); ++i) ok += rda_predict(m, data.rows[i]) == data.labels[i];
    return static_cast<double>(ok) / static_cast<double>(data.size());
  };
  CHECK(accuracy(0.0) >= accuracy(1.0));
}

TEST_CASE("knn vote") {
  std::mt19937_64 rng(1);
  const std::vector<int> labels{2, 1, 2, 1, 1};
  auto untouched = rng;
  CHECK(knn_vote(labels, 1, rng) == 2);
  CHECK(knn_vote(labels, 3, rng) == 2);
  CHECK(knn_vote(labels, 5, rng) == 1);
  CHECK(rng == untouched);
}

TEST_CASE("two-way tie is broken evenly") {
  const std::vector<int> labels{0, 1};
  int zeros = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    std::mt19937_64 rng(seed);
    zeros += knn_vote(labels, 2, rng) == 0;
  }
  CHECK(zeros / 10000.0 == Approx(0.5).epsilon(0.04));
}

TEST_CASE("neighbour order breaks distance ties by index") {
  const std::vector<double> d{0.5, 0.1, 0.5, 0.1, 0.0};
  CHECK(neighbour_order(d) == std::vector<std::size_t>{4, 1, 3, 0, 2});
}

TEST_CASE("knn matches a brute-force implementation") {
  std::mt19937_64 rng(8080);
  std::vector<Composition> train;
  std::vector<int> labels;
  for (int i = 0; i < 50; ++i) {
    train.push_back(testsupport::random_composition(5, rng));
    labels.push_back(i % 3);
  }
  for (const auto& metric : {MetricSpec::alpha_metric(Alpha(0.5)), MetricSpec::esov()}) {
    for (std::size_t k : {1u, 3u, 5u}) {
      KnnFit fit(train, labels, k, metric);
      for (int q = 0; q < 100; ++q) {
        auto x = testsupport::random_composition(5, rng);
        auto winners = knn_oracle(train, labels, x, k, metric);
        std::mt19937_64 r1(q), r2(q);
        const int got = knn_predict(fit, x, r1);
        CHECK(winners.count(got) == 1);
        if (winners.size() == 1) CHECK(got == *winners.begin());
        CHECK(knn_predict(fit, x, r2) == got);
      }
    }
  }
}

TEST_CASE("scaling the metric does not change neighbours") {
  std::mt19937_64 rng(64);
  std::vector<Composition> train;
  for (int i = 0; i < 40; ++i) train.push_back(testsupport::random_composition(6, rng));
  for (int q = 0; q < 100; ++q) {
    auto x = testsupport::random_composition(6, rng);
    std::vector<double> a1, eu;
    for (const auto& t : train) {
      a1.push_back(alpha_distance(x, t, Alpha(1.0)));
      eu.push_back((x.as_vector() - t.as_vector()).norm());
    }
    CHECK(neighbour_order(a1) == neighbour_order(eu));
  }
}

TEST_CASE("knn fit validates") {
  std::vector<Composition> pts{Composition({0.5, 0.5}), Composition({0.2, 0.8})};
  CHECK_THROWS_AS(KnnFit(pts, {0, 1}, 3, MetricSpec::esov()), Error);
  CHECK_THROWS_AS(KnnFit(pts, {0}, 1, MetricSpec::esov()), Error);
  CHECK_THROWS_AS(KnnFit(pts, {0, 1}, 0, MetricSpec::esov()), Error);
}
