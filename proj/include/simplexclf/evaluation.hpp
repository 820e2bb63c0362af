#pragma once

// Repeated stratified hold-out evaluation and grid search over the
// transformation and classifier parameters.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "simplexclf/classifiers.hpp"
#include "simplexclf/dataio.hpp"
#include "simplexclf/error.hpp"

namespace simplexclf {

struct CvConfig {
  std::size_t n_test = 30;
  std::size_t reps = 200;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  // Called once per finished replicate (from worker threads).
  std::function<void(std::size_t done, std::size_t total)> progress;
};

enum class MethodKind { Rda, Lda, Qda, KnnAlpha, KnnEsov };

std::string to_string(MethodKind kind);
std::optional<MethodKind> method_kind_from_string(const std::string& name);

/// One fully specified classifier configuration.
struct MethodSpec {
  MethodKind kind = MethodKind::Rda;
  double alpha = 1.0;
  double lambda = 1.0;
  double gamma = 0.0;
  std::size_t k = 1;
  PriorMode prior = PriorMode::Proportional;

  static MethodSpec rda(double alpha, double lambda, double gamma);
  static MethodSpec lda(double alpha);
  static MethodSpec qda(double alpha);
  static MethodSpec knn(double alpha, std::size_t k);
  static MethodSpec knn_esov(std::size_t k);

  bool uses_alpha() const noexcept { return kind != MethodKind::KnnEsov; }
  bool is_rda_family() const noexcept {
    return kind == MethodKind::Rda || kind == MethodKind::Lda || kind == MethodKind::Qda;
  }
  // The (lambda, gamma) actually used; LDA and QDA are fixed corners.
  double effective_lambda() const noexcept;
  double effective_gamma() const noexcept;
  std::size_t parameter_count() const noexcept;
  /// Table-style name, e.g. "RDA(0.95,0.1,1)", "3-NN(0.85)", "3-NN_ESOV".
  std::string name() const;

  friend bool operator==(const MethodSpec& a, const MethodSpec& b) {
    return a.kind == b.kind && a.alpha == b.alpha && a.lambda == b.lambda &&
           a.gamma == b.gamma && a.k == b.k && a.prior == b.prior;
  }
};

struct Split {
  std::vector<std::size_t> train;  // ascending row indices
  std::vector<std::size_t> test;   // ascending row indices
};

/// Test-set size per group: largest-remainder rounding of n_i n_test / n,
/// then every group raised to at least one member (taking the surplus from
/// the groups whose rounded counts exceed their quotas the most).
std::vector<std::size_t> stratified_allocation(std::span<const std::size_t> group_sizes,
                                               std::size_t n_test);

Split stratified_split(std::span<const int> labels, std::size_t group_count,
                       std::size_t n_test, std::mt19937_64& rng);

/// Fraction of equal entries.
double correct_rate(std::span<const int> predicted, std::span<const int> truth);

/// Independent random stream for a (master seed, purpose/counter...) tuple.
std::mt19937_64 derived_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

struct ObservationOutcome {
  std::size_t replicate = 0;
  std::size_t row = 0;
  int truth = 0;
  int predicted = 0;

  bool correct() const noexcept { return truth == predicted; }
};

/// Bins observations by their number of zero parts: one bin per count below
/// tail_start and a single bin for tail_start or more.
struct ZeroBinning {
  std::size_t tail_start = 4;
};

struct ZeroBin {
  std::string label;
  std::size_t min_zeros = 0;
  std::size_t max_zeros = 0;
  double occupancy = 0.0;  // share of dataset rows in the bin
  double mean_accuracy = 0.0;
  std::optional<double> sd_accuracy;
  std::size_t replicates = 0;  // replicates with at least one test row in the bin
};

struct GroupAccuracy {
  int group = 0;
  std::string name;
  double mean_accuracy = 0.0;
  std::optional<double> sd_accuracy;
  std::size_t replicates = 0;
  double any_zero_fraction = 0.0;  // within-group share of rows with a zero
};

struct Breakdown {
  std::vector<ZeroBin> by_zero_count;
  std::vector<GroupAccuracy> by_group;
};

/// Accuracy by zero count and by group, averaged over replicates.
Breakdown breakdown_by_zero_count(std::span<const ObservationOutcome> outcomes,
                                  const LabeledCompositionDataset& data,
                                  ZeroBinning binning = {});

struct EvalReport {
  MethodSpec method;
  std::size_t n_test = 0;
  std::vector<double> q;
  double mean_q = 0.0;
  std::optional<double> sd_q;  // across replicates, divisor B - 1
  std::optional<double> se_q;  // sd_q / sqrt(B)
  Breakdown breakdown;
  std::vector<ObservationOutcome> outcomes;  // filled by cv_evaluate only
};

/// B stratified splits, fit on train, score the test rows. Any replicate whose
/// fit fails aborts the evaluation with an error naming the method.
EvalReport cv_evaluate(const LabeledCompositionDataset& data, const MethodSpec& method,
                       const CvConfig& cv);

struct GridSpec {
  std::vector<double> alphas;
  std::vector<double> lambdas;
  std::vector<double> gammas;
  std::vector<std::size_t> ks;
  std::vector<MethodKind> methods;
  PriorMode prior = PriorMode::Proportional;

  /// Alpha in steps of 0.05 over [-1, 1] (or [0.05, 1] with zeros), lambda and
  /// gamma in steps of 0.1 over [0, 1], k = 1..10, every method.
  static GridSpec defaults(bool data_has_zeros);
  /// All method configurations the grid describes, in a fixed order.
  std::vector<MethodSpec> expand() const;
};

/// lo:hi:step inclusive, robust to rounding (values are snapped to step).
std::vector<double> parse_range(const std::string& text);

struct SkippedPoint {
  MethodSpec method;
  std::string reason;
  ErrorCode code = ErrorCode::IllConditioned;
  std::size_t replicate = 0;  // first replicate that failed
};

struct GridResult {
  std::vector<EvalReport> ranked;
  std::vector<EvalReport> best_per_method;
  std::vector<SkippedPoint> skipped;

  // Accuracy against alpha for LDA, QDA and the best RDA at each alpha.
  std::vector<double> curve_alphas;
  std::vector<std::optional<double>> lda_curve;
  std::vector<std::optional<double>> qda_curve;
  std::vector<std::optional<double>> rda_curve;
  // k-NN accuracy, rows = ks, columns = curve_alphas.
  std::vector<std::size_t> knn_ks;
  std::vector<std::vector<std::optional<double>>> knn_heat;
  std::vector<std::optional<double>> esov_by_k;
};

/// Mean q descending; ties go to fewer parameters, then smaller |alpha|.
bool ranks_before(const EvalReport& a, const EvalReport& b);

/// Every grid point is evaluated on the same B splits. Ill-conditioned
/// points are listed in `skipped` and left out of the ranking.
GridResult grid_search(const LabeledCompositionDataset& data, const GridSpec& grid,
                       const CvConfig& cv);

}  // namespace simplexclf
