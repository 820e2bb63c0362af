#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "simplexclf/error.hpp"
#include "simplexclf/evaluation.hpp"

using namespace simplexclf;
using doctest::Approx;

namespace {

const LabeledCompositionDataset& glass() {
  static const auto data =
      load_dataset(std::string(SIMPLEXCLF_DATA_DIR) + "/glass.csv", glass_schema());
  return data;
}

LabeledCompositionDataset separated() {
  return generate_synthetic({SyntheticRegime::EdaFavored, 4, 2, 30, 10.0, 1.0, 5});
}

CvConfig small_cv(std::size_t n_test, std::size_t reps, std::uint64_t seed = 1) {
  CvConfig cv;
  cv.n_test = n_test;
  cv.reps = reps;
  cv.seed = seed;
  return cv;
}

// Six observations with 0, 0, 1, 1, 2, 2 zeros in two groups.
LabeledCompositionDataset six_rows() {
  return LabeledCompositionDataset::from_raw(
      {"a", "b", "c"},
      {{0.2, 0.3, 0.5}, {0.3, 0.3, 0.4}, {0, 0.5, 0.5}, {0.5, 0, 0.5}, {0, 0, 1}, {1, 0, 0}},
      {0, 1, 0, 1, 0, 1}, {"g0", "g1"}, "hand");
}

}  // namespace

TEST_CASE("stratified allocation") {
  const std::vector<std::size_t> glass_sizes{70, 76, 17, 13, 9, 29};
  CHECK(stratified_allocation(glass_sizes, 30) == std::vector<std::size_t>{10, 11, 2, 2, 1, 4});
  CHECK(stratified_allocation(std::vector<std::size_t>{5, 5}, 2) == std::vector<std::size_t>{1, 1});
  CHECK(stratified_allocation(std::vector<std::size_t>{98, 1, 1}, 3) ==
        std::vector<std::size_t>{1, 1, 1});
  CHECK(stratified_allocation(std::vector<std::size_t>{98, 1, 1}, 10) ==
        std::vector<std::size_t>{8, 1, 1});
  CHECK_THROWS_AS(stratified_allocation(std::vector<std::size_t>{5, 5, 5}, 2), Error);
}

TEST_CASE("glass allocation is what the split draws") {
  auto rng = derived_stream(1, {0, 0});
  auto split = stratified_split(glass().labels, glass().group_count(), 30, rng);
  std::vector<std::size_t> counts(6, 0);
  for (auto r : split.test) ++counts[glass().labels[r]];
  CHECK(counts == stratified_allocation(glass().group_sizes(), 30));
}

TEST_CASE("splits are deterministic partitions") {
  const auto& labels = glass().labels;
  auto r1 = derived_stream(7, {0, 3}), r2 = derived_stream(7, {0, 3}), r3 = derived_stream(8, {0, 3});
  auto a = stratified_split(labels, 6, 30, r1);
  auto b = stratified_split(labels, 6, 30, r2);
  auto c = stratified_split(labels, 6, 30, r3);
  CHECK(a.test == b.test);
  CHECK(a.test != c.test);
  CHECK(std::is_sorted(a.test.begin(), a.test.end()));
  CHECK(std::is_sorted(a.train.begin(), a.train.end()));
  std::vector<std::size_t> all = a.train;
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(labels.size());
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);
}

TEST_CASE("stratification bound holds for every replicate") {
  const auto& d = glass();
  const auto sizes = d.group_sizes();
  // With n_test = g every group is forced to one test row, which can miss a
  // large group's share by more than the rounding bound; 6 and 7 do so here.
  CHECK(stratified_allocation(sizes, 6) == std::vector<std::size_t>(6, 1));
  for (std::size_t n_test : {12u, 13u, 30u, 57u}) {
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
      auto rng = derived_stream(3, {0, rep});
      auto split = stratified_split(d.labels, 6, n_test, rng);
      REQUIRE(split.test.size() == n_test);
      std::vector<std::size_t> counts(6, 0);
      for (auto r : split.test) ++counts[d.labels[r]];
      for (std::size_t g = 0; g < 6; ++g) {
        CHECK(counts[g] >= 1);
        CHECK(std::abs(static_cast<double>(counts[g]) / n_test - static_cast<double>(sizes[g]) / 214.0) <=
              1.0 / n_test + 1.0 / 214.0);
      }
    }
  }
}

TEST_CASE("derived streams are distinct") {
  auto a = derived_stream(1, {0, 0}), b = derived_stream(1, {0, 1}), c = derived_stream(2, {0, 0});
  auto a2 = derived_stream(1, {0, 0});
  const auto va = a();
  CHECK(va == a2());
  CHECK(va != b());
  CHECK(va != c());
}

TEST_CASE("correct rate") {
  const std::vector<int> truth(30, 1);
  CHECK(correct_rate(truth, truth) == 1.0);
  CHECK(correct_rate(std::vector<int>(30, 0), truth) == 0.0);
  std::vector<int> some = truth;
  some[0] = some[5] = some[9] = 2;
  CHECK(correct_rate(some, truth) == Approx(0.9).epsilon(1e-15));
  CHECK_THROWS_AS(correct_rate(std::vector<int>{1}, truth), Error);
}

TEST_CASE("separable data are classified perfectly") {
  auto data = separated();
  auto r = cv_evaluate(data, MethodSpec::lda(1.0), small_cv(10, 20));
  CHECK(r.mean_q == 1.0);
  REQUIRE(r.sd_q);
  CHECK(*r.sd_q == 0.0);
  CHECK(r.outcomes.size() == 200);

  GridSpec grid;
  grid.alphas = {0.5, 1.0};
  grid.lambdas = {0.0, 1.0};
  grid.gammas = {1.0};
  grid.ks = {1, 3};
  grid.methods = {MethodKind::Rda, MethodKind::KnnAlpha};
  auto g = grid_search(data, grid, small_cv(10, 10));
  CHECK(g.ranked.front().mean_q == 1.0);
}

TEST_CASE("report statistics") {
  auto data = generate_synthetic({SyntheticRegime::LraFavored, 4, 3, 20, 1.5, 50.0, 2});
  auto r = cv_evaluate(data, MethodSpec::rda(0.5, 0.5, 0.5), small_cv(12, 25));
  REQUIRE(r.q.size() == 25);
  double sum = 0.0;
  for (double q : r.q) {
    const double c = q * 12;
    CHECK(std::abs(c - std::round(c)) <= 1e-12);
    sum += q;
  }
  CHECK(r.mean_q == sum / 25);
  double ss = 0.0;
  for (double q : r.q) ss += (q - r.mean_q) * (q - r.mean_q);
  REQUIRE(r.sd_q);
  REQUIRE(r.se_q);
  CHECK(*r.sd_q == Approx(std::sqrt(ss / 24)).epsilon(1e-14));
  CHECK(*r.se_q == Approx(*r.sd_q / 5).epsilon(1e-14));

  auto one = cv_evaluate(data, MethodSpec::rda(0.5, 0.5, 0.5), small_cv(3, 1));
  CHECK(one.q.size() == 1);
  CHECK(one.mean_q == one.q[0]);
  CHECK_FALSE(one.sd_q);
  CHECK_FALSE(one.se_q);
}

TEST_CASE("singleton grid equals a direct evaluation") {
  const auto& d = glass();
  GridSpec grid;
  grid.alphas = {1.0};
  grid.lambdas = {0.0};
  grid.gammas = {1.0};
  grid.methods = {MethodKind::Rda};
  const auto cv = small_cv(30, 15, 4);
  auto g = grid_search(d, grid, cv);
  REQUIRE(g.ranked.size() == 1);
  auto direct = cv_evaluate(d, MethodSpec::rda(1.0, 0.0, 1.0), cv);
  CHECK(g.ranked[0].q == direct.q);
  CHECK(g.ranked[0].mean_q == direct.mean_q);
  CHECK(g.ranked[0].sd_q == direct.sd_q);
  CHECK(g.ranked[0].breakdown.by_group[2].mean_accuracy ==
        direct.breakdown.by_group[2].mean_accuracy);

  // The LDA corner shares predictions with RDA(1, 0, 1).
  auto lda = cv_evaluate(d, MethodSpec::lda(1.0), cv);
  CHECK(lda.q == direct.q);
}

TEST_CASE("results do not depend on the thread count") {
  const auto& d = glass();
  GridSpec grid;
  grid.alphas = {0.5, 1.0};
  grid.lambdas = {0.0, 0.5};
  grid.gammas = {0.5, 1.0};
  grid.ks = {1, 2, 3};
  grid.methods = {MethodKind::Rda, MethodKind::KnnAlpha, MethodKind::KnnEsov};
  auto cv = small_cv(30, 12, 9);
  auto serial = grid_search(d, grid, cv);
  cv.threads = 4;
  auto parallel = grid_search(d, grid, cv);
  REQUIRE(serial.ranked.size() == parallel.ranked.size());
  for (std::size_t i = 0; i < serial.ranked.size(); ++i) {
    CHECK(serial.ranked[i].method == parallel.ranked[i].method);
    CHECK(serial.ranked[i].q == parallel.ranked[i].q);
  }
  auto one = cv_evaluate(d, MethodSpec::knn(0.85, 3), small_cv(30, 12, 9));
  auto cv4 = small_cv(30, 12, 9);
  cv4.threads = 3;
  CHECK(cv_evaluate(d, MethodSpec::knn(0.85, 3), cv4).q == one.q);
}

TEST_CASE("breakdown by zero count by hand") {
  const auto d = six_rows();
  const std::vector<ObservationOutcome> outcomes{
      {0, 0, 0, 0}, {0, 2, 0, 1}, {0, 4, 0, 0}, {0, 5, 1, 1},
      {1, 1, 1, 0}, {1, 3, 1, 1}, {1, 4, 0, 0}};
  auto b = breakdown_by_zero_count(outcomes, d, {2});
  REQUIRE(b.by_zero_count.size() == 3);
  CHECK(b.by_zero_count[0].label == "0");
  CHECK(b.by_zero_count[0].mean_accuracy == 0.5);
  CHECK(*b.by_zero_count[0].sd_accuracy == Approx(std::sqrt(0.5)));
  CHECK(b.by_zero_count[1].mean_accuracy == 0.5);
  CHECK(b.by_zero_count[2].mean_accuracy == 1.0);
  CHECK(*b.by_zero_count[2].sd_accuracy == 0.0);
  for (const auto& bin : b.by_zero_count) {
    CHECK(bin.occupancy == Approx(1.0 / 3));
    CHECK(bin.replicates == 2);
  }
  REQUIRE(b.by_group.size() == 2);
  CHECK(b.by_group[0].mean_accuracy == Approx(5.0 / 6));
  CHECK(b.by_group[1].mean_accuracy == Approx(0.75));
  CHECK(b.by_group[0].any_zero_fraction == Approx(2.0 / 3));

  auto tail = breakdown_by_zero_count(outcomes, d, {1});
  REQUIRE(tail.by_zero_count.size() == 2);
  CHECK(tail.by_zero_count[1].label == "1-2");
  // rep 0: r2 wrong, r4 and r5 right; rep 1: r3 and r4 right
  CHECK(tail.by_zero_count[1].mean_accuracy == Approx((2.0 / 3 + 1.0) / 2));
}

TEST_CASE("zero-free data give a single bin matching the overall rate") {
  auto data = generate_synthetic({SyntheticRegime::LraFavored, 4, 2, 20, 2.0, 50.0, 6});
  auto r = cv_evaluate(data, MethodSpec::knn(0.0, 3), small_cv(8, 20));
  REQUIRE(r.breakdown.by_zero_count.size() == 1);
  CHECK(r.breakdown.by_zero_count[0].label == "0");
  CHECK(r.breakdown.by_zero_count[0].mean_accuracy == Approx(r.mean_q).epsilon(1e-14));
}

TEST_CASE("glass zero-count bins") {
  auto r = cv_evaluate(glass(), MethodSpec::knn_esov(1), small_cv(30, 3));
  REQUIRE(r.breakdown.by_zero_count.size() == 5);
  const double pct[] = {3.27, 29.44, 50.93, 13.55, 2.80};
  for (int c = 0; c < 5; ++c)
    CHECK(std::round(r.breakdown.by_zero_count[c].occupancy * 10000) / 100 == Approx(pct[c]));
}

TEST_CASE("configuration errors come before any work") {
  const auto& d = glass();
  auto code = [&](const MethodSpec& m, const CvConfig& cv) {
    try {
      cv_evaluate(d, m, cv);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  CHECK(code(MethodSpec::lda(0.0), small_cv(30, 2)) == ErrorCode::ZeroWithNonpositiveAlpha);
  CHECK(code(MethodSpec::rda(0.5, 1.5, 0.0), small_cv(30, 2)) == ErrorCode::ParameterOutOfRange);
  CHECK(code(MethodSpec::knn(0.5, 500), small_cv(30, 2)) == ErrorCode::ParameterOutOfRange);
  CHECK(code(MethodSpec::lda(0.5), small_cv(4, 2)) == ErrorCode::TestTooSmall);
  CHECK(code(MethodSpec::lda(0.5), small_cv(30, 0)) == ErrorCode::InvalidConfig);
}

TEST_CASE("ill-conditioned points are reported") {
  const auto& d = glass();
  try {
    cv_evaluate(d, MethodSpec::qda(1.0), small_cv(30, 3));
    FAIL("expected a failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IllConditioned);
    CHECK(std::string(e.what()).find("QDA(1)") != std::string::npos);
  }
  GridSpec grid;
  grid.alphas = {1.0};
  grid.methods = {MethodKind::Lda, MethodKind::Qda};
  auto g = grid_search(d, grid, small_cv(30, 3));
  REQUIRE(g.skipped.size() == 1);
  CHECK(g.skipped[0].method.kind == MethodKind::Qda);
  REQUIRE(g.ranked.size() == 1);
  CHECK(g.ranked[0].method.kind == MethodKind::Lda);
  CHECK_FALSE(g.qda_curve[0]);
  CHECK(g.lda_curve[0]);
}

TEST_CASE("ranking order") {
  auto rep = [](MethodSpec m, double q) {
    EvalReport r;
    r.method = m;
    r.mean_q = q;
    return r;
  };
  CHECK(ranks_before(rep(MethodSpec::knn(1, 3), 0.8), rep(MethodSpec::lda(0.1), 0.7)));
  CHECK(ranks_before(rep(MethodSpec::lda(1), 0.7), rep(MethodSpec::rda(0.1, 0.5, 0.5), 0.7)));
  CHECK(ranks_before(rep(MethodSpec::rda(0.1, 0.5, 0.5), 0.7), rep(MethodSpec::rda(-0.2, 0.5, 0.5), 0.7)));
  CHECK(ranks_before(rep(MethodSpec::knn_esov(4), 0.7), rep(MethodSpec::knn(0.05, 1), 0.7)));
  CHECK_FALSE(ranks_before(rep(MethodSpec::lda(1), 0.7), rep(MethodSpec::lda(1), 0.7)));
}

TEST_CASE("grid parsing and expansion") {
  CHECK(parse_range("0:1:0.25") == std::vector<double>{0, 0.25, 0.5, 0.75, 1});
  auto a = parse_range("0.05:1:0.05");
  CHECK(a.size() == 20);
  CHECK(a[16] == 0.85);
  CHECK(parse_range("-1:1:0.05").size() == 41);
  CHECK(parse_range("3") == std::vector<double>{3});
  CHECK_THROWS_AS(parse_range("1:0:0.1"), Error);
  CHECK_THROWS_AS(parse_range("0:1:0"), Error);
  CHECK_THROWS_AS(parse_range("a:b:c"), Error);

  auto grid = GridSpec::defaults(true);
  CHECK(grid.alphas.front() == 0.05);
  auto pts = grid.expand();
  // RDA 20*11*11, LDA and QDA 20 each, k-NN 10*20, ESOV 10
  CHECK(pts.size() == 2420 + 40 + 200 + 10);
  CHECK(GridSpec::defaults(false).alphas.size() == 41);

  CHECK(MethodSpec::rda(0.95, 0.1, 1).name() == "RDA(0.95,0.1,1)");
  CHECK(MethodSpec::knn(0.85, 3).name() == "3-NN(0.85)");
  CHECK(MethodSpec::knn_esov(3).name() == "3-NN_ESOV");
  CHECK(MethodSpec::lda(1).name() == "LDA(1)");
  CHECK(method_kind_from_string("knn_esov") == MethodKind::KnnEsov);
}
