#include "simplexclf/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "simplexclf/error.hpp"

namespace simplexclf {

namespace {

constexpr std::uint64_t kSplitStream = 0;
constexpr std::uint64_t kKnnTieStream = 1;

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Mean and (B - 1)-divisor sd of a sequence, accumulated in order.
std::pair<double, std::optional<double>> mean_sd(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, std::nullopt};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

// Maps each dataset row to its zero-count bin.
struct BinLayout {
  std::vector<ZeroBin> bins;        // only occupied bins, in count order
  std::vector<std::size_t> row_bin;  // row -> index into bins
};

BinLayout make_bins(const LabeledCompositionDataset& data, ZeroBinning binning) {
  const std::size_t tail = std::max<std::size_t>(binning.tail_start, 1);
  std::vector<std::size_t> counts(data.size());
  std::size_t max_count = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    counts[r] = data.rows[r].zero_count();
    max_count = std::max(max_count, counts[r]);
  }
  // Candidate bins: 0, 1, ..., tail-1, [tail, max].
  std::vector<std::size_t> occupancy(tail + 1, 0);
  auto slot_of = [&](std::size_t c) { return std::min(c, tail); };
  for (std::size_t c : counts) ++occupancy[slot_of(c)];

  BinLayout layout;
  std::vector<std::size_t> slot_to_bin(tail + 1, 0);
  for (std::size_t s = 0; s <= tail; ++s) {
    if (occupancy[s] == 0) continue;
    ZeroBin bin;
    bin.min_zeros = s;
    bin.max_zeros = s == tail ? max_count : s;
    bin.label = bin.min_zeros == bin.max_zeros
                    ? std::to_string(bin.min_zeros)
                    : std::to_string(bin.min_zeros) + "-" + std::to_string(bin.max_zeros);
    bin.occupancy = static_cast<double>(occupancy[s]) / static_cast<double>(data.size());
    slot_to_bin[s] = layout.bins.size();
    layout.bins.push_back(bin);
  }
  layout.row_bin.resize(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) layout.row_bin[r] = slot_to_bin[slot_of(counts[r])];
  return layout;
}

// reps x columns table of small counts.
struct CountTable {
  std::size_t columns = 0;
  std::vector<std::uint32_t> values;

  CountTable() = default;
  CountTable(std::size_t reps, std::size_t cols) : columns(cols), values(reps * cols, 0) {}
  std::uint32_t& at(std::size_t rep, std::size_t col) { return values[rep * columns + col]; }
  std::uint32_t at(std::size_t rep, std::size_t col) const { return values[rep * columns + col]; }
};

// Per-column accuracy over the replicates in which the column had test rows.
template <typename Out>
void summarize_columns(const CountTable& totals, const CountTable& correct, std::size_t reps,
                       std::vector<Out>& out) {
  for (std::size_t c = 0; c < out.size(); ++c) {
    std::vector<double> acc;
    for (std::size_t b = 0; b < reps; ++b) {
      if (totals.at(b, c) == 0) continue;
      acc.push_back(static_cast<double>(correct.at(b, c)) /
                    static_cast<double>(totals.at(b, c)));
    }
    out[c].replicates = acc.size();
    if (acc.empty()) continue;
    auto [mean, sd] = mean_sd(acc);
    out[c].mean_accuracy = mean;
    out[c].sd_accuracy = sd;
  }
}

Breakdown summarize_breakdown(const LabeledCompositionDataset& data, const BinLayout& layout,
                              std::size_t reps, const CountTable& group_totals,
                              const CountTable& group_correct, const CountTable& bin_totals,
                              const CountTable& bin_correct) {
  Breakdown out;
  out.by_zero_count = layout.bins;
  summarize_columns(bin_totals, bin_correct, reps, out.by_zero_count);

  const auto groups = group_summary(data);
  out.by_group.resize(data.group_count());
  for (std::size_t g = 0; g < data.group_count(); ++g) {
    out.by_group[g].group = static_cast<int>(g);
    out.by_group[g].name = data.group_names[g];
    out.by_group[g].any_zero_fraction =
        static_cast<double>(groups[g].with_zero) / static_cast<double>(groups[g].size);
  }
  summarize_columns(group_totals, group_correct, reps, out.by_group);
  return out;
}

void fill_q_stats(EvalReport& report) {
  auto [mean, sd] = mean_sd(report.q);
  report.mean_q = mean;
  report.sd_q = sd;
  if (sd) report.se_q = *sd / std::sqrt(static_cast<double>(report.q.size()));
}

// What one grid point produced over all replicates.
struct PointResult {
  CountTable group_correct;
  CountTable bin_correct;
  std::vector<char> failed;
  std::vector<std::string> errors;
  std::vector<ErrorCode> error_codes;
  std::vector<std::vector<int>> predictions;  // only when outcomes are kept
};

struct EngineOutput {
  std::vector<Split> splits;
  CountTable group_totals;
  CountTable bin_totals;
  BinLayout layout;
  std::vector<PointResult> points;
};

unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void validate_cv(const LabeledCompositionDataset& data, const CvConfig& cv) {
  if (cv.reps == 0) throw Error(ErrorCode::InvalidConfig, "the number of replicates must be >= 1");
  if (cv.n_test == 0 || cv.n_test >= data.size()) {
    throw Error(ErrorCode::InvalidConfig, "n_test must lie in [1, n)");
  }
  if (cv.n_test < data.group_count()) {
    throw Error(ErrorCode::TestTooSmall, "n_test must be at least the number of groups");
  }
}

void validate_method(const LabeledCompositionDataset& data, const MethodSpec& m,
                     std::size_t n_train) {
  if (m.uses_alpha()) {
    Alpha a(m.alpha);
    if (a.value <= 0.0 && data.has_zeros()) {
      throw Error(ErrorCode::ZeroWithNonpositiveAlpha,
                  m.name() + ": the data contain zeros, so alpha must be > 0");
    }
  }
  if (m.is_rda_family()) {
    for (double v : {m.effective_lambda(), m.effective_gamma()}) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::ParameterOutOfRange, m.name() + ": lambda/gamma outside [0, 1]");
      }
    }
  } else if (m.k == 0 || m.k > n_train) {
    throw Error(ErrorCode::ParameterOutOfRange,
                m.name() + ": k must lie in [1, " + std::to_string(n_train) + "]");
  }
}

EngineOutput run_engine(const LabeledCompositionDataset& data,
                        const std::vector<MethodSpec>& points, const CvConfig& cv,
                        bool keep_predictions) {
  validate_cv(data, cv);
  const std::size_t n_train = data.size() - cv.n_test;
  for (const auto& p : points) validate_method(data, p, n_train);

  const std::size_t reps = cv.reps;
  const std::size_t g = data.group_count();
  const ContrastBasis basis = helmert_submatrix(data.parts());

  EngineOutput out;
  out.layout = make_bins(data, {});
  const std::size_t nbins = out.layout.bins.size();
  out.splits.resize(reps);
  out.group_totals = CountTable(reps, g);
  out.bin_totals = CountTable(reps, nbins);
  out.points.resize(points.size());
  for (auto& p : out.points) {
    p.group_correct = CountTable(reps, g);
    p.bin_correct = CountTable(reps, nbins);
    p.failed.assign(reps, 0);
    p.errors.resize(reps);
    p.error_codes.resize(reps, ErrorCode::IllConditioned);
    if (keep_predictions) p.predictions.resize(reps);
  }

  // Work shared by all replicates: one transform / metric image per alpha.
  std::vector<double> alphas;
  std::vector<std::size_t> point_alpha(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].uses_alpha()) continue;
    auto it = std::find(alphas.begin(), alphas.end(), points[i].alpha);
    if (it == alphas.end()) {
      alphas.push_back(points[i].alpha);
      it = alphas.end() - 1;
    }
    point_alpha[i] = static_cast<std::size_t>(it - alphas.begin());
  }
  std::vector<Eigen::MatrixXd> transformed(alphas.size());
  std::vector<std::vector<Eigen::VectorXd>> images(alphas.size());
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    bool need_z = false;
    bool need_images = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!points[i].uses_alpha() || point_alpha[i] != a) continue;
      (points[i].is_rda_family() ? need_z : need_images) = true;
    }
    if (need_z) transformed[a] = transform_rows(data.rows, Alpha(alphas[a]), basis);
    if (need_images) {
      images[a].reserve(data.size());
      for (const auto& row : data.rows) images[a].push_back(metric_image(row, Alpha(alphas[a])));
    }
  }

  auto record = [&](std::size_t point, std::size_t rep, const Split& split,
                    const std::vector<int>& preds) {
    auto& res = out.points[point];
    for (std::size_t j = 0; j < split.test.size(); ++j) {
      const std::size_t row = split.test[j];
      if (preds[j] != data.labels[row]) continue;
      ++res.group_correct.at(rep, static_cast<std::size_t>(data.labels[row]));
      ++res.bin_correct.at(rep, out.layout.row_bin[row]);
    }
    if (keep_predictions) res.predictions[rep] = preds;
  };
  auto record_failure = [&](std::size_t point, std::size_t rep, const Error& e) {
    auto& res = out.points[point];
    res.failed[rep] = 1;
    res.errors[rep] = e.message();
    res.error_codes[rep] = e.code();
  };

  auto run_replicate = [&](std::size_t rep) {
    auto split_rng = derived_stream(cv.seed, {kSplitStream, rep});
    Split split = stratified_split(data.labels, g, cv.n_test, split_rng);
    for (std::size_t row : split.test) {
      ++out.group_totals.at(rep, static_cast<std::size_t>(data.labels[row]));
      ++out.bin_totals.at(rep, out.layout.row_bin[row]);
    }
    std::vector<int> train_labels(split.train.size());
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      train_labels[i] = data.labels[split.train[i]];
    }
    const std::size_t n_test = split.test.size();

    // RDA family, grouped by alpha so the group fit is shared.
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].is_rda_family() && point_alpha[i] == a) members.push_back(i);
      }
      if (members.empty()) continue;
      const Eigen::MatrixXd& z = transformed[a];
      Eigen::MatrixXd z_train(static_cast<Eigen::Index>(split.train.size()), z.cols());
      for (std::size_t i = 0; i < split.train.size(); ++i) {
        z_train.row(static_cast<Eigen::Index>(i)) = z.row(static_cast<Eigen::Index>(split.train[i]));
      }
      std::optional<GaussianGroupFit> fit;
      try {
        fit = fit_gaussian_groups(z_train, train_labels, g);
      } catch (const Error& e) {
        for (std::size_t i : members) record_failure(i, rep, e);
        continue;
      }
      // Points sharing (lambda, gamma, prior) share predictions.
      std::map<std::tuple<double, double, int>, std::vector<std::size_t>> by_params;
      for (std::size_t i : members) {
        by_params[{points[i].effective_lambda(), points[i].effective_gamma(),
                   static_cast<int>(points[i].prior)}]
            .push_back(i);
      }
      for (const auto& [params, ids] : by_params) {
        const auto& [lambda, gamma, prior] = params;
        try {
          const RdaModel model = rda_from_groups(*fit, Alpha(alphas[a]), lambda, gamma,
                                                 static_cast<PriorMode>(prior), basis);
          std::vector<int> preds(n_test);
          for (std::size_t j = 0; j < n_test; ++j) {
            preds[j] = rda_predict_transformed(
                model, z.row(static_cast<Eigen::Index>(split.test[j])).transpose());
          }
          for (std::size_t i : ids) record(i, rep, split, preds);
        } catch (const Error& e) {
          for (std::size_t i : ids) record_failure(i, rep, e);
        }
      }
    }

    // k-NN: one neighbour ordering per (metric, test row), shared across k.
    auto run_knn = [&](const std::vector<std::size_t>& members, auto&& dist_to_train) {
      std::vector<std::vector<int>> preds(members.size(), std::vector<int>(n_test));
      std::vector<double> dist(split.train.size());
      std::vector<int> ordered(split.train.size());
      for (std::size_t j = 0; j < n_test; ++j) {
        dist_to_train(split.test[j], dist);
        const auto order = neighbour_order(dist);
        for (std::size_t i = 0; i < order.size(); ++i) ordered[i] = train_labels[order[i]];
        for (std::size_t m = 0; m < members.size(); ++m) {
          const std::size_t k = points[members[m]].k;
          auto rng = derived_stream(cv.seed, {kKnnTieStream, rep, j, k});
          preds[m][j] = knn_vote(ordered, k, rng);
        }
      }
      for (std::size_t m = 0; m < members.size(); ++m) record(members[m], rep, split, preds[m]);
    };

    for (std::size_t a = 0; a < alphas.size(); ++a) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].kind == MethodKind::KnnAlpha && point_alpha[i] == a) members.push_back(i);
      }
      if (members.empty()) continue;
      const Alpha alpha(alphas[a]);
      run_knn(members, [&](std::size_t row, std::vector<double>& dist) {
        for (std::size_t t = 0; t < split.train.size(); ++t) {
          dist[t] = alpha_distance_from_images(images[a][row], images[a][split.train[t]], alpha);
        }
      });
    }
    std::vector<std::size_t> esov_members;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].kind == MethodKind::KnnEsov) esov_members.push_back(i);
    }
    if (!esov_members.empty()) {
      run_knn(esov_members, [&](std::size_t row, std::vector<double>& dist) {
        for (std::size_t t = 0; t < split.train.size(); ++t) {
          dist[t] = esov_distance(data.rows[row], data.rows[split.train[t]]);
        }
      });
    }
    out.splits[rep] = std::move(split);
  };

  const unsigned threads = std::min<unsigned>(resolve_threads(cv.threads),
                                              static_cast<unsigned>(reps));
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::exception_ptr failure;
  std::size_t failure_rep = reps;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t rep = next++; rep < reps; rep = next++) {
      try {
        run_replicate(rep);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (rep < failure_rep) {
          failure_rep = rep;
          failure = std::current_exception();
        }
      }
      const std::size_t finished = ++done;
      if (cv.progress) cv.progress(finished, reps);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

EvalReport build_report(const LabeledCompositionDataset& data, const EngineOutput& engine,
                        const MethodSpec& method, std::size_t point, const CvConfig& cv) {
  const PointResult& res = engine.points[point];
  const std::size_t reps = cv.reps;
  EvalReport report;
  report.method = method;
  report.n_test = cv.n_test;
  report.q.resize(reps);
  for (std::size_t b = 0; b < reps; ++b) {
    std::uint32_t correct = 0;
    for (std::size_t c = 0; c < data.group_count(); ++c) correct += res.group_correct.at(b, c);
    report.q[b] = static_cast<double>(correct) / static_cast<double>(cv.n_test);
  }
  fill_q_stats(report);
  report.breakdown = summarize_breakdown(data, engine.layout, reps, engine.group_totals,
                                         res.group_correct, engine.bin_totals, res.bin_correct);
  if (!res.predictions.empty()) {
    for (std::size_t b = 0; b < reps; ++b) {
      const Split& split = engine.splits[b];
      for (std::size_t j = 0; j < split.test.size(); ++j) {
        report.outcomes.push_back(
            {b, split.test[j], data.labels[split.test[j]], res.predictions[b][j]});
      }
    }
  }
  return report;
}

// Index of the first failed replicate, if any.
std::optional<std::size_t> first_failure(const PointResult& res) {
  for (std::size_t b = 0; b < res.failed.size(); ++b) {
    if (res.failed[b]) return b;
  }
  return std::nullopt;
}

}  // namespace

std::string to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::Rda: return "RDA";
    case MethodKind::Lda: return "LDA";
    case MethodKind::Qda: return "QDA";
    case MethodKind::KnnAlpha: return "KNN_ALPHA";
    case MethodKind::KnnEsov: return "KNN_ESOV";
  }
  return "?";
}

std::optional<MethodKind> method_kind_from_string(const std::string& name) {
  std::string upper;
  for (char c : name) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (upper == "RDA") return MethodKind::Rda;
  if (upper == "LDA") return MethodKind::Lda;
  if (upper == "QDA") return MethodKind::Qda;
  if (upper == "KNN_ALPHA" || upper == "KNN") return MethodKind::KnnAlpha;
  if (upper == "KNN_ESOV" || upper == "ESOV") return MethodKind::KnnEsov;
  return std::nullopt;
}

MethodSpec MethodSpec::rda(double alpha, double lambda, double gamma) {
  MethodSpec m;
  m.kind = MethodKind::Rda;
  m.alpha = alpha;
  m.lambda = lambda;
  m.gamma = gamma;
  return m;
}

MethodSpec MethodSpec::lda(double alpha) {
  MethodSpec m = rda(alpha, 0.0, 1.0);
  m.kind = MethodKind::Lda;
  return m;
}

MethodSpec MethodSpec::qda(double alpha) {
  MethodSpec m = rda(alpha, 1.0, 0.0);
  m.kind = MethodKind::Qda;
  return m;
}

MethodSpec MethodSpec::knn(double alpha, std::size_t k) {
  MethodSpec m;
  m.kind = MethodKind::KnnAlpha;
  m.alpha = alpha;
  m.k = k;
  return m;
}

MethodSpec MethodSpec::knn_esov(std::size_t k) {
  MethodSpec m;
  m.kind = MethodKind::KnnEsov;
  m.k = k;
  return m;
}

double MethodSpec::effective_lambda() const noexcept {
  switch (kind) {
    case MethodKind::Lda: return 0.0;
    case MethodKind::Qda: return 1.0;
    default: return lambda;
  }
}

double MethodSpec::effective_gamma() const noexcept {
  switch (kind) {
    case MethodKind::Lda: return 1.0;
    case MethodKind::Qda: return 0.0;
    default: return gamma;
  }
}

std::size_t MethodSpec::parameter_count() const noexcept {
  switch (kind) {
    case MethodKind::Rda: return 3;
    case MethodKind::KnnAlpha: return 2;
    default: return 1;
  }
}

std::string MethodSpec::name() const {
  switch (kind) {
    case MethodKind::Rda:
      return "RDA(" + format_number(alpha) + "," + format_number(lambda) + "," +
             format_number(gamma) + ")";
    case MethodKind::Lda: return "LDA(" + format_number(alpha) + ")";
    case MethodKind::Qda: return "QDA(" + format_number(alpha) + ")";
    case MethodKind::KnnAlpha: return std::to_string(k) + "-NN(" + format_number(alpha) + ")";
    case MethodKind::KnnEsov: return std::to_string(k) + "-NN_ESOV";
  }
  return "?";
}

std::vector<std::size_t> stratified_allocation(std::span<const std::size_t> group_sizes,
                                               std::size_t n_test) {
  const std::size_t g = group_sizes.size();
  const std::size_t n = std::accumulate(group_sizes.begin(), group_sizes.end(), std::size_t{0});
  if (g == 0 || std::find(group_sizes.begin(), group_sizes.end(), 0u) != group_sizes.end()) {
    throw Error(ErrorCode::EmptyInput, "every group must be nonempty");
  }
  if (n_test < g) {
    throw Error(ErrorCode::TestTooSmall, "n_test (" + std::to_string(n_test) +
                                             ") is smaller than the number of groups (" +
                                             std::to_string(g) + ")");
  }
  if (n_test > n) throw Error(ErrorCode::InvalidConfig, "n_test exceeds the sample size");

  std::vector<double> quota(g);
  std::vector<std::size_t> alloc(g);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < g; ++i) {
    quota[i] = static_cast<double>(group_sizes[i]) * static_cast<double>(n_test) /
               static_cast<double>(n);
    alloc[i] = static_cast<std::size_t>(std::floor(quota[i]));
    assigned += alloc[i];
  }
  // Largest remainder; stable so equal remainders favour lower indices.
  std::vector<std::size_t> order(g);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
  });
  for (std::size_t pass = 0; assigned < n_test; ++pass) {
    for (std::size_t i : order) {
      if (assigned == n_test) break;
      if (alloc[i] < group_sizes[i] && (pass > 0 || quota[i] > static_cast<double>(alloc[i]))) {
        ++alloc[i];
        ++assigned;
      }
    }
  }
  // Every group gets at least one test member.
  for (std::size_t i = 0; i < g; ++i) {
    if (alloc[i] > 0) continue;
    std::size_t donor = g;
    double best_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g; ++j) {
      if (alloc[j] <= 1) continue;
      const double excess = static_cast<double>(alloc[j]) - quota[j];
      if (excess > best_excess) {
        best_excess = excess;
        donor = j;
      }
    }
    --alloc[donor];  // exists because n_test >= g
    alloc[i] = 1;
  }
  return alloc;
}

Split stratified_split(std::span<const int> labels, std::size_t group_count,
                       std::size_t n_test, std::mt19937_64& rng) {
  std::vector<std::vector<std::size_t>> members(group_count);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= group_count) {
      throw Error(ErrorCode::InvalidSpec, "label out of range", r);
    }
    members[static_cast<std::size_t>(label)].push_back(r);
  }
  std::vector<std::size_t> sizes(group_count);
  for (std::size_t i = 0; i < group_count; ++i) sizes[i] = members[i].size();
  const auto alloc = stratified_allocation(sizes, n_test);

  std::vector<char> in_test(labels.size(), 0);
  for (std::size_t i = 0; i < group_count; ++i) {
    auto& pool = members[i];
    // Partial Fisher-Yates: the first alloc[i] entries become a uniform sample.
    for (std::size_t j = 0; j < alloc[i]; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, pool.size() - 1);
      std::swap(pool[j], pool[pick(rng)]);
      in_test[pool[j]] = 1;
    }
  }
  Split split;
  split.test.reserve(n_test);
  split.train.reserve(labels.size() - n_test);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    (in_test[r] ? split.test : split.train).push_back(r);
  }
  return split;
}

double correct_rate(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "predicted and true label counts differ");
  }
  if (predicted.empty()) throw Error(ErrorCode::EmptyInput, "no predictions");
  std::size_t c = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) c += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(predicted.size());
}

std::mt19937_64 derived_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (std::uint64_t p : path) push(p);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

Breakdown breakdown_by_zero_count(std::span<const ObservationOutcome> outcomes,
                                  const LabeledCompositionDataset& data, ZeroBinning binning) {
  if (outcomes.empty()) throw Error(ErrorCode::EmptyInput, "no outcomes to break down");
  std::size_t reps = 0;
  for (const auto& o : outcomes) {
    if (o.row >= data.size()) throw Error(ErrorCode::InvalidSpec, "outcome row out of range");
    reps = std::max(reps, o.replicate + 1);
  }
  const BinLayout layout = make_bins(data, binning);
  const std::size_t g = data.group_count();
  CountTable group_totals(reps, g), group_correct(reps, g);
  CountTable bin_totals(reps, layout.bins.size()), bin_correct(reps, layout.bins.size());
  for (const auto& o : outcomes) {
    const auto group = static_cast<std::size_t>(data.labels[o.row]);
    const std::size_t bin = layout.row_bin[o.row];
    ++group_totals.at(o.replicate, group);
    ++bin_totals.at(o.replicate, bin);
    if (o.correct()) {
      ++group_correct.at(o.replicate, group);
      ++bin_correct.at(o.replicate, bin);
    }
  }
  return summarize_breakdown(data, layout, reps, group_totals, group_correct, bin_totals,
                             bin_correct);
}

EvalReport cv_evaluate(const LabeledCompositionDataset& data, const MethodSpec& method,
                       const CvConfig& cv) {
  const EngineOutput engine = run_engine(data, {method}, cv, /*keep_predictions=*/true);
  if (auto b = first_failure(engine.points[0])) {
    throw Error(engine.points[0].error_codes[*b],
                "at " + method.name() + " (replicate " + std::to_string(*b) +
                    "): " + engine.points[0].errors[*b]);
  }
  return build_report(data, engine, method, 0, cv);
}

GridSpec GridSpec::defaults(bool data_has_zeros) {
  GridSpec grid;
  grid.alphas = parse_range(data_has_zeros ? "0.05:1:0.05" : "-1:1:0.05");
  grid.lambdas = parse_range("0:1:0.1");
  grid.gammas = parse_range("0:1:0.1");
  for (std::size_t k = 1; k <= 10; ++k) grid.ks.push_back(k);
  grid.methods = {MethodKind::Rda, MethodKind::Lda, MethodKind::Qda, MethodKind::KnnAlpha,
                  MethodKind::KnnEsov};
  return grid;
}

std::vector<MethodSpec> GridSpec::expand() const {
  std::vector<MethodSpec> out;
  auto with_prior = [this](MethodSpec m) {
    m.prior = prior;
    return m;
  };
  for (MethodKind kind : methods) {
    switch (kind) {
      case MethodKind::Rda:
        for (double a : alphas)
          for (double l : lambdas)
            for (double g : gammas) out.push_back(with_prior(MethodSpec::rda(a, l, g)));
        break;
      case MethodKind::Lda:
        for (double a : alphas) out.push_back(with_prior(MethodSpec::lda(a)));
        break;
      case MethodKind::Qda:
        for (double a : alphas) out.push_back(with_prior(MethodSpec::qda(a)));
        break;
      case MethodKind::KnnAlpha:
        for (double a : alphas)
          for (std::size_t k : ks) out.push_back(MethodSpec::knn(a, k));
        break;
      case MethodKind::KnnEsov:
        for (std::size_t k : ks) out.push_back(MethodSpec::knn_esov(k));
        break;
    }
  }
  return out;
}

std::vector<double> parse_range(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad range '" + text + "'; expected lo:hi:step");
    }
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw Error(ErrorCode::InvalidConfig, "bad range '" + text + "'; expected lo:hi:step");
  }
  const double lo = parts[0], hi = parts[1], step = parts[2];
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> values;
  for (std::size_t i = 0; i < count; ++i) {
    const double v = lo + static_cast<double>(i) * step;
    // Snap to 12 decimals so 0.05 * 17 prints and compares as 0.85.
    const double snapped = std::round(v * 1e12) / 1e12;
    values.push_back(snapped == 0.0 ? 0.0 : snapped);
  }
  return values;
}

bool ranks_before(const EvalReport& a, const EvalReport& b) {
  if (a.mean_q != b.mean_q) return a.mean_q > b.mean_q;
  const auto& ma = a.method;
  const auto& mb = b.method;
  if (ma.parameter_count() != mb.parameter_count()) {
    return ma.parameter_count() < mb.parameter_count();
  }
  const double aa = ma.uses_alpha() ? std::abs(ma.alpha) : 0.0;
  const double ab = mb.uses_alpha() ? std::abs(mb.alpha) : 0.0;
  if (aa != ab) return aa < ab;
  return std::make_tuple(static_cast<int>(ma.kind), ma.alpha, ma.lambda, ma.gamma, ma.k) <
         std::make_tuple(static_cast<int>(mb.kind), mb.alpha, mb.lambda, mb.gamma, mb.k);
}

GridResult grid_search(const LabeledCompositionDataset& data, const GridSpec& grid,
                       const CvConfig& cv) {
  const std::vector<MethodSpec> points = grid.expand();
  if (points.empty()) throw Error(ErrorCode::EmptyGrid, "the grid has no admissible points");
  const EngineOutput engine = run_engine(data, points, cv, /*keep_predictions=*/false);

  GridResult result;
  std::vector<std::optional<std::size_t>> report_of(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (auto b = first_failure(engine.points[i])) {
      result.skipped.push_back(
          {points[i], engine.points[i].errors[*b], engine.points[i].error_codes[*b], *b});
      continue;
    }
    report_of[i] = result.ranked.size();
    result.ranked.push_back(build_report(data, engine, points[i], i, cv));
  }

  // Curves are read off before sorting, while indices still line up.
  result.curve_alphas = grid.alphas;
  result.knn_ks = grid.ks;
  const std::size_t na = grid.alphas.size();
  result.lda_curve.assign(na, std::nullopt);
  result.qda_curve.assign(na, std::nullopt);
  result.rda_curve.assign(na, std::nullopt);
  result.knn_heat.assign(grid.ks.size(), std::vector<std::optional<double>>(na));
  result.esov_by_k.assign(grid.ks.size(), std::nullopt);
  auto keep_max = [](std::optional<double>& slot, double v) {
    if (!slot || v > *slot) slot = v;
  };
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!report_of[i]) continue;
    const double q = result.ranked[*report_of[i]].mean_q;
    const auto& m = points[i];
    const auto ai = static_cast<std::size_t>(
        std::find(grid.alphas.begin(), grid.alphas.end(), m.alpha) - grid.alphas.begin());
    const auto ki = static_cast<std::size_t>(
        std::find(grid.ks.begin(), grid.ks.end(), m.k) - grid.ks.begin());
    switch (m.kind) {
      case MethodKind::Rda: keep_max(result.rda_curve[ai], q); break;
      case MethodKind::Lda: keep_max(result.lda_curve[ai], q); break;
      case MethodKind::Qda: keep_max(result.qda_curve[ai], q); break;
      case MethodKind::KnnAlpha: result.knn_heat[ki][ai] = q; break;
      case MethodKind::KnnEsov: result.esov_by_k[ki] = q; break;
    }
  }

  std::stable_sort(result.ranked.begin(), result.ranked.end(), ranks_before);
  for (MethodKind kind : {MethodKind::Rda, MethodKind::Lda, MethodKind::Qda,
                          MethodKind::KnnAlpha, MethodKind::KnnEsov}) {
    auto it = std::find_if(result.ranked.begin(), result.ranked.end(),
                           [kind](const EvalReport& r) { return r.method.kind == kind; });
    if (it != result.ranked.end()) result.best_per_method.push_back(*it);
  }
  return result;
}

}  // namespace simplexclf
