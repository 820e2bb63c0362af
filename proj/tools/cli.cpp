#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "simplexclf/classifiers.hpp"
#include "simplexclf/dataio.hpp"
#include "simplexclf/error.hpp"
#include "simplexclf/evaluation.hpp"
#include "simplexclf/metrics.hpp"
#include "simplexclf/simplex.hpp"

#ifndef SIMPLEXCLF_VERSION
#define SIMPLEXCLF_VERSION "0.0.0"
#endif

namespace simplexclf::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

struct Options {
  std::string command;

  // dataset
  std::string data;
  std::string label_col = "label";
  std::string drop_cols;
  std::string preset;

  // method
  std::string method = "rda";
  double alpha = 1.0;
  double lambda = 0.0;
  double gamma = 1.0;
  std::size_t k = 1;
  std::string metric = "alpha";
  std::string prior = "proportional";

  // grid
  std::string alpha_grid;
  std::string lambda_grid = "0:1:0.1";
  std::string gamma_grid = "0:1:0.1";
  std::string k_grid = "1:10:1";
  std::string methods = "rda,lda,qda,knn,knn_esov";

  // evaluation
  std::size_t n_test = 30;
  std::size_t reps = 200;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool progress = false;

  // output
  std::string out_dir = ".";
  std::string format;

  // transform / predict
  bool inverse = false;
  std::string manifest;
  std::string model;

  // synth
  std::string regime = "lra";
  std::size_t parts = 4;
  std::size_t groups = 2;
  std::size_t group_size = 50;
  double separation = 10.0;
  double anisotropy = 50.0;

  bool label_col_set = false;
  bool k_set = false;
  bool method_set = false;
  bool out_dir_set = false;
};

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, what);
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(' ');
    const auto b = item.find_last_not_of(' ');
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

PriorMode prior_of(const Options& o) {
  return o.prior == "uniform" ? PriorMode::Uniform : PriorMode::Proportional;
}

std::string to_string(PriorMode p) { return p == PriorMode::Uniform ? "uniform" : "proportional"; }

// ---------------------------------------------------------------------------
// Output files are collected in memory and written together at the end, each
// through a temporary file and a rename.

struct PendingFile {
  fs::path path;
  std::string content;
};

class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) {
    files_.push_back({dir_ / name, std::move(content)});
  }

  std::vector<fs::path> commit() const {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir_.string() + ": " + ec.message());
    std::vector<fs::path> written;
    for (const auto& f : files_) {
      const fs::path tmp = f.path.string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << f.content;
        out.flush();
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
      }
      fs::rename(tmp, f.path, ec);
      if (ec) throw Error(ErrorCode::IoError, "cannot rename to " + f.path.string());
      written.push_back(f.path);
    }
    return written;
  }

 private:
  fs::path dir_;
  std::vector<PendingFile> files_;
};

void check_out_dir(const Options& o) {
  std::error_code ec;
  if (fs::exists(o.out_dir, ec) && !fs::is_directory(o.out_dir, ec)) {
    config_error("--out-dir " + o.out_dir + " exists and is not a directory");
  }
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) config_error(std::string(flag) + " is required");
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) config_error("cannot read " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

char delimiter_for(const std::string& format) { return format == "csv" ? ',' : '\t'; }

// ---------------------------------------------------------------------------
// Dataset and method plumbing

CsvSchema schema_of(const Options& o) {
  CsvSchema s;
  if (o.preset == "glass") {
    s = glass_schema();
    if (o.label_col_set) s.label_column = o.label_col;
  } else {
    s.label_column = o.label_col;
  }
  for (auto& c : split_list(o.drop_cols)) s.drop_columns.push_back(c);
  return s;
}

LabeledCompositionDataset load(const Options& o) {
  require_file(o.data, "--data");
  return load_dataset(o.data, schema_of(o));
}

json dataset_json(const LabeledCompositionDataset& d, const std::string& path) {
  json j;
  j["path"] = path;
  j["sha256"] = dataset_digest(d);
  j["n"] = d.size();
  j["parts"] = d.parts();
  j["groups"] = d.group_count();
  j["component_names"] = d.component_names;
  j["group_names"] = d.group_names;
  j["group_sizes"] = d.group_sizes();
  j["provenance"] = d.provenance;
  return j;
}

MethodSpec method_of(const Options& o) {
  std::string kind = o.method;
  if (!o.method_set && o.k_set) kind = "knn";
  MethodSpec m;
  if (kind == "rda") {
    m = MethodSpec::rda(o.alpha, o.lambda, o.gamma);
  } else if (kind == "lda") {
    m = MethodSpec::lda(o.alpha);
  } else if (kind == "qda") {
    m = MethodSpec::qda(o.alpha);
  } else if (kind == "knn") {
    m = o.metric == "esov" ? MethodSpec::knn_esov(o.k) : MethodSpec::knn(o.alpha, o.k);
  } else {
    config_error("unknown method " + kind);
  }
  m.prior = prior_of(o);
  return m;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json method_json(const MethodSpec& m) {
  json j;
  j["name"] = m.name();
  j["kind"] = to_string(m.kind);
  j["alpha"] = m.uses_alpha() ? json(m.alpha) : json(nullptr);
  if (m.is_rda_family()) {
    j["lambda"] = m.effective_lambda();
    j["gamma"] = m.effective_gamma();
    j["prior"] = to_string(m.prior);
  } else {
    j["k"] = m.k;
    j["metric"] = m.kind == MethodKind::KnnEsov ? "esov" : "alpha";
  }
  return j;
}

json breakdown_json(const Breakdown& b) {
  json bins = json::array();
  for (const auto& z : b.by_zero_count) {
    bins.push_back({{"label", z.label},
                    {"min_zeros", z.min_zeros},
                    {"max_zeros", z.max_zeros},
                    {"occupancy", z.occupancy},
                    {"mean_accuracy", z.replicates ? json(z.mean_accuracy) : json(nullptr)},
                    {"sd_accuracy", opt(z.sd_accuracy)},
                    {"replicates", z.replicates}});
  }
  json groups = json::array();
  for (const auto& g : b.by_group) {
    groups.push_back({{"group", g.group},
                      {"name", g.name},
                      {"any_zero_fraction", g.any_zero_fraction},
                      {"mean_accuracy", g.replicates ? json(g.mean_accuracy) : json(nullptr)},
                      {"sd_accuracy", opt(g.sd_accuracy)},
                      {"replicates", g.replicates}});
  }
  return {{"by_zero_count", bins}, {"by_group", groups}};
}

json summary_json(const EvalReport& r) {
  json j = method_json(r.method);
  j["mean_q"] = r.mean_q;
  j["sd_q"] = opt(r.sd_q);
  j["se_q"] = opt(r.se_q);
  return j;
}

json report_json(const EvalReport& r, bool with_outcomes) {
  json j;
  j["method"] = method_json(r.method);
  j["n_test"] = r.n_test;
  j["replicates"] = r.q.size();
  j["mean_q"] = r.mean_q;
  j["sd_q"] = opt(r.sd_q);
  j["se_q"] = opt(r.se_q);
  j["q"] = r.q;
  j["breakdown"] = breakdown_json(r.breakdown);
  if (with_outcomes) {
    json rep = json::array(), row = json::array(), truth = json::array(), pred = json::array();
    for (const auto& o : r.outcomes) {
      rep.push_back(o.replicate);
      row.push_back(o.row);
      truth.push_back(o.truth);
      pred.push_back(o.predicted);
    }
    j["outcomes"] = {{"replicate", rep}, {"row", row}, {"truth", truth}, {"predicted", pred}};
  }
  return j;
}

json cv_json(const CvConfig& cv) {
  return {{"n_test", cv.n_test},
          {"reps", cv.reps},
          {"seed", cv.seed},
          {"split_stream", "seed_seq(seed, 0, replicate)"},
          {"knn_tie_stream", "seed_seq(seed, 1, replicate, test_position, k)"}};
}

json header_json(const Options& o, const json& config) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["version"] = SIMPLEXCLF_VERSION;
  j["command"] = o.command;
  j["seed"] = o.seed;
  j["config"] = config;
  return j;
}

json method_config(const Options& o) {
  return {{"method", o.method}, {"alpha", o.alpha},   {"lambda", o.lambda}, {"gamma", o.gamma},
          {"k", o.k},           {"metric", o.metric}, {"prior", o.prior}};
}

json data_config(const Options& o) {
  return {{"data", o.data},
          {"preset", o.preset},
          {"label_col", schema_of(o).label_column},
          {"drop_cols", split_list(o.drop_cols)}};
}

CvConfig cv_of(const Options& o, std::ostream& err, std::mutex& err_mutex) {
  CvConfig cv;
  cv.n_test = o.n_test;
  cv.reps = o.reps;
  cv.seed = o.seed;
  cv.threads = o.threads;
  if (o.progress) {
    cv.progress = [&err, &err_mutex](std::size_t done, std::size_t total) {
      std::lock_guard lock(err_mutex);
      err << "\rreplicate " << done << "/" << total << (done == total ? "\n" : "") << std::flush;
    };
  }
  return cv;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// transform

std::vector<std::string> coordinate_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= d; ++i) names.push_back("z" + std::to_string(i));
  return names;
}

std::string join_row(const std::vector<std::string>& cells, char delim) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out.push_back(delim);
    out += cells[i];
  }
  return out + "\n";
}

int cmd_transform_forward(const Options& o, std::ostream& out) {
  const auto data = load(o);
  const Alpha a(o.alpha);
  if (a.value <= 0.0) {
    std::vector<std::size_t> bad;
    for (std::size_t r = 0; r < data.size(); ++r)
      if (data.rows[r].has_zeros()) bad.push_back(r);
    if (!bad.empty()) {
      std::ostringstream msg;
      msg << bad.size() << " rows contain zeros, which alpha = " << num(a.value)
          << " cannot transform; rows:";
      for (std::size_t i = 0; i < bad.size(); ++i) msg << (i ? ", " : " ") << bad[i];
      throw Error(ErrorCode::ZeroWithNonpositiveAlpha, msg.str(), bad.front());
    }
  }
  const auto basis = helmert_submatrix(data.parts());
  const Eigen::MatrixXd z = transform_rows(data.rows, a, basis);
  const char delim = delimiter_for(o.format);
  auto header = coordinate_names(data.parts() - 1);
  header.push_back("label");
  std::string table = join_row(header, delim);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    std::vector<std::string> cells;
    for (Eigen::Index c = 0; c < z.cols(); ++c) cells.push_back(num(z(r, c)));
    cells.push_back(data.group_names[static_cast<std::size_t>(data.labels[r])]);
    table += join_row(cells, delim);
  }
  json manifest = header_json(o, json{{"alpha", o.alpha}, {"format", o.format}});
  manifest["kind"] = "alpha_transform";
  manifest["alpha"] = a.value;
  manifest["parts"] = data.parts();
  manifest["basis"] = "helmert";
  manifest["component_names"] = data.component_names;
  manifest["delimiter"] = std::string(1, delim);
  manifest["dataset"] = dataset_json(data, o.data);

  const std::string stem = "transformed";
  OutputSet files(o.out_dir);
  files.add(stem + "." + o.format, std::move(table));
  files.add(stem + ".manifest.json", dump(manifest));
  for (const auto& p : files.commit()) out << "wrote " << p.string() << "\n";
  return kExitOk;
}

int cmd_transform_inverse(const Options& o, std::ostream& out) {
  require_file(o.data, "--data");
  fs::path manifest_path = o.manifest;
  if (manifest_path.empty()) {
    manifest_path = fs::path(o.data).parent_path() / (fs::path(o.data).stem().string() + ".manifest.json");
  }
  require_file(manifest_path.string(), "--manifest");
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path.string()));
  } catch (const json::exception& e) {
    config_error("cannot parse " + manifest_path.string() + ": " + e.what());
  }
  if (!manifest.contains("alpha") || !manifest.contains("parts") ||
      !manifest.contains("component_names")) {
    config_error(manifest_path.string() + " is not a transform manifest");
  }
  const Alpha a(manifest["alpha"].get<double>());
  const auto D = manifest["parts"].get<std::size_t>();
  const auto names = manifest["component_names"].get<std::vector<std::string>>();
  const char delim = manifest.value("delimiter", std::string(",")).front();

  std::istringstream in(read_file(o.data));
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, o.data + ": no header row");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, delim)) header.push_back(cell);
  }
  const auto expected = coordinate_names(D - 1);
  if (header.size() < expected.size() ||
      !std::equal(expected.begin(), expected.end(), header.begin())) {
    throw Error(ErrorCode::MissingColumn, o.data + ": expected columns z1..z" + std::to_string(D - 1));
  }
  const bool has_label = header.size() > expected.size();

  const char out_delim = delimiter_for(o.format);
  auto out_header = names;
  if (has_label) out_header.push_back("label");
  std::string table = join_row(out_header, out_delim);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, delim)) cells.push_back(cell);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::ParseError, o.data + ": row " + std::to_string(row) + " has " +
                                             std::to_string(cells.size()) + " fields", row);
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(D - 1));
    for (std::size_t c = 0; c + 1 < D; ++c) {
      const auto& s = cells[c];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v[static_cast<Eigen::Index>(c)]);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::ParseError,
                    o.data + ": row " + std::to_string(row) + ": cannot parse '" + s + "'", row, c);
      }
    }
    Composition x = [&] {
      try {
        return inverse_alpha_transform(v, a, D);
      } catch (const Error& e) {
        throw Error(e.code(), "row " + std::to_string(row) + ": " + e.message(), row);
      }
    }();
    std::vector<std::string> outcells;
    for (double p : x.parts()) outcells.push_back(num(p));
    if (has_label) outcells.push_back(cells.back());
    table += join_row(outcells, out_delim);
    ++row;
  }
  OutputSet files(o.out_dir);
  files.add("inverse." + o.format, std::move(table));
  for (const auto& p : files.commit()) out << "wrote " << p.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// distance

int cmd_distance(const Options& o, std::ostream& out) {
  const auto data = load(o);
  const MetricSpec metric =
      o.metric == "esov" ? MetricSpec::esov() : MetricSpec::alpha_metric(Alpha(o.alpha));
  const auto dm = pairwise_distances(data.rows, data.rows, metric, o.threads);
  OutputSet files(o.out_dir);
  if (o.format == "json") {
    json values = json::array();
    for (std::size_t i = 0; i < dm.rows; ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < dm.cols; ++j) row.push_back(dm(i, j));
      values.push_back(std::move(row));
    }
    json j = header_json(o, json{{"data", data_config(o)}, {"metric", o.metric}, {"alpha", o.alpha}});
    j["metric"] = metric.name();
    j["dataset"] = dataset_json(data, o.data);
    j["distances"] = std::move(values);
    files.add("distances.json", dump(j));
  } else {
    const char delim = delimiter_for(o.format);
    std::vector<std::string> header{"row"};
    for (std::size_t j = 0; j < dm.cols; ++j) header.push_back(std::to_string(j));
    std::string table = join_row(header, delim);
    for (std::size_t i = 0; i < dm.rows; ++i) {
      std::vector<std::string> cells{std::to_string(i)};
      for (std::size_t j = 0; j < dm.cols; ++j) cells.push_back(num(dm(i, j)));
      table += join_row(cells, delim);
    }
    files.add("distances." + o.format, std::move(table));
  }
  for (const auto& p : files.commit()) out << "wrote " << p.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// summarize

std::string pct(double fraction) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * fraction;
  return os.str();
}

// Left-aligned first column, right-aligned others.
std::string aligned(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream os;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) os << "  ";
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << r[c];
      } else {
        os << std::right << std::setw(static_cast<int>(width[c])) << r[c];
      }
    }
    os << "\n";
  }
  return os.str();
}

int cmd_summarize(const Options& o, std::ostream& out) {
  const auto data = load(o);
  const auto zs = zero_summary(data);
  const auto gs = group_summary(data);

  json j = header_json(o, json{{"data", data_config(o)}});
  j["dataset"] = dataset_json(data, o.data);
  json comps = json::array();
  for (std::size_t c = 0; c < data.parts(); ++c) {
    comps.push_back({{"name", data.component_names[c]},
                     {"zeros", zs.per_component_zero_count[c]},
                     {"fraction", zs.per_component_zero_fraction[c]}});
  }
  j["zeros_by_component"] = comps;
  json dist = json::array();
  for (std::size_t c = 0; c < zs.zero_count_distribution.size(); ++c) {
    dist.push_back({{"zeros", c}, {"fraction", zs.zero_count_distribution[c]}});
  }
  j["zero_count_distribution"] = dist;
  json groups = json::array();
  for (std::size_t g = 0; g < gs.size(); ++g) {
    groups.push_back({{"name", gs[g].name},
                      {"size", gs[g].size},
                      {"with_zero", gs[g].with_zero},
                      {"any_zero_fraction", zs.per_group_any_zero_fraction[g]}});
  }
  j["groups"] = groups;
  j["total_zeros"] = zs.total_zeros;

  std::vector<std::vector<std::string>> t1{{"component", "zeros", "percent"}};
  for (std::size_t c = 0; c < data.parts(); ++c) {
    t1.push_back({data.component_names[c], std::to_string(zs.per_component_zero_count[c]),
                  pct(zs.per_component_zero_fraction[c])});
  }
  std::vector<std::vector<std::string>> t2{{"zeros per row", "rows", "percent"}};
  for (std::size_t c = 0; c < zs.zero_count_distribution.size(); ++c) {
    const double f = zs.zero_count_distribution[c];
    if (f == 0.0) continue;
    t2.push_back({std::to_string(c), std::to_string(static_cast<std::size_t>(std::llround(f * data.size()))),
                  pct(f)});
  }
  std::vector<std::vector<std::string>> t3{{"group", "size", "with zero", "percent"}};
  for (std::size_t g = 0; g < gs.size(); ++g) {
    t3.push_back({gs[g].name, std::to_string(gs[g].size), std::to_string(gs[g].with_zero),
                  pct(zs.per_group_any_zero_fraction[g])});
  }
  std::ostringstream text;
  text << data.size() << " rows, " << data.parts() << " parts, " << data.group_count()
       << " groups\n\n"
       << aligned(t1) << "\n"
       << aligned(t2) << "\n"
       << aligned(t3);

  if (o.format == "json") {
    out << dump(j);
  } else {
    out << text.str();
  }
  if (o.out_dir_set) {
    OutputSet files(o.out_dir);
    files.add("summary.json", dump(j));
    files.add("summary.txt", text.str());
    files.commit();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit / predict

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) config_error("ragged matrix in model");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

int cmd_fit(const Options& o, std::ostream& out) {
  const auto data = load(o);
  const MethodSpec m = method_of(o);
  json j = header_json(o, json{{"data", data_config(o)}, {"method", method_config(o)}});
  j["dataset"] = dataset_json(data, o.data);
  j["method"] = method_json(m);
  j["component_names"] = data.component_names;
  j["group_names"] = data.group_names;
  if (m.is_rda_family()) {
    const RdaModel model = fit_rda(data, Alpha(m.alpha), m.effective_lambda(),
                                   m.effective_gamma(), m.prior);
    j["model"] = "rda";
    json groups = json::array();
    for (const auto& g : model.groups) {
      groups.push_back({{"label", g.label},
                        {"count", g.count},
                        {"mean", std::vector<double>(g.mean.data(), g.mean.data() + g.mean.size())},
                        {"covariance", matrix_json(g.covariance)}});
    }
    j["groups"] = groups;
    j["pooled"] = matrix_json(model.pooled);
    j["priors"] = model.priors;
    json cond = json::array();
    for (const auto& f : model.regularized) cond.push_back(f.condition);
    j["condition_numbers"] = cond;
  } else {
    KnnFit check(data.rows, data.labels, m.k,
                 m.kind == MethodKind::KnnEsov ? MetricSpec::esov()
                                               : MetricSpec::alpha_metric(Alpha(m.alpha)));
    j["model"] = "knn";
    json rows = json::array();
    for (const auto& r : data.rows) rows.push_back(std::vector<double>(r.parts().begin(), r.parts().end()));
    j["train"] = {{"rows", rows}, {"labels", data.labels}};
  }
  OutputSet files(o.out_dir);
  files.add("model.json", dump(j));
  for (const auto& p : files.commit()) out << "wrote " << p.string() << "\n";
  return kExitOk;
}

struct LoadedModel {
  std::string kind;
  std::vector<std::string> component_names;
  std::vector<std::string> group_names;
  std::optional<RdaModel> rda;
  std::optional<KnnFit> knn;
};

LoadedModel load_model(const std::string& path) {
  require_file(path, "--model");
  try {
    const json j = json::parse(read_file(path));
    LoadedModel m;
    m.kind = j.at("model").get<std::string>();
    m.component_names = j.at("component_names").get<std::vector<std::string>>();
    m.group_names = j.at("group_names").get<std::vector<std::string>>();
    const auto& meth = j.at("method");
    if (m.kind == "rda") {
      GaussianGroupFit fit;
      for (const auto& g : j.at("groups")) {
        GaussianGroupModel gm;
        gm.label = g.at("label").get<int>();
        gm.count = g.at("count").get<std::size_t>();
        const auto mean = g.at("mean").get<std::vector<double>>();
        gm.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        gm.covariance = matrix_from(g.at("covariance"));
        fit.groups.push_back(std::move(gm));
      }
      fit.pooled = matrix_from(j.at("pooled"));
      const PriorMode prior =
          meth.at("prior").get<std::string>() == "uniform" ? PriorMode::Uniform : PriorMode::Proportional;
      m.rda = rda_from_groups(fit, Alpha(meth.at("alpha").get<double>()), meth.at("lambda").get<double>(),
                              meth.at("gamma").get<double>(), prior,
                              helmert_submatrix(m.component_names.size()));
    } else if (m.kind == "knn") {
      std::vector<Composition> rows;
      for (const auto& r : j.at("train").at("rows")) rows.emplace_back(r.get<std::vector<double>>());
      const auto labels = j.at("train").at("labels").get<std::vector<int>>();
      const MetricSpec metric = meth.at("metric").get<std::string>() == "esov"
                                    ? MetricSpec::esov()
                                    : MetricSpec::alpha_metric(Alpha(meth.at("alpha").get<double>()));
      m.knn.emplace(std::move(rows), labels, meth.at("k").get<std::size_t>(), metric);
    } else {
      config_error(path + ": unknown model kind " + m.kind);
    }
    return m;
  } catch (const json::exception& e) {
    config_error("cannot read model " + path + ": " + e.what());
  }
}

int cmd_predict(const Options& o, std::ostream& out) {
  const LoadedModel model = load_model(o.model);
  require_file(o.data, "--data");
  std::string text = read_file(o.data);
  CsvSchema schema = schema_of(o);
  schema.component_columns = model.component_names;
  schema.drop_columns.clear();

  // Unlabelled input: add a placeholder label column so the reader accepts it.
  const std::string first_line = text.substr(0, text.find('\n'));
  CsvSchema probe = schema;
  bool labelled = true;
  {
    std::vector<std::string> cols;
    std::stringstream ss(first_line);
    std::string c;
    while (std::getline(ss, c, schema.delimiter)) {
      while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
      cols.push_back(c);
    }
    labelled = std::find(cols.begin(), cols.end(), schema.label_column) != cols.end();
  }
  if (!labelled) {
    std::istringstream in(text);
    std::string line, rebuilt;
    bool header = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      rebuilt += line + schema.delimiter + (header ? "__label__" : "?") + "\n";
      header = false;
    }
    text = std::move(rebuilt);
    schema.label_column = "__label__";
    schema.label_names.clear();
  }
  const auto data = parse_dataset(text, schema, o.data);

  std::vector<int> predicted;
  for (std::size_t r = 0; r < data.size(); ++r) {
    if (model.rda) {
      predicted.push_back(rda_predict(*model.rda, data.rows[r]));
    } else {
      auto rng = derived_stream(o.seed, {1, 0, r, model.knn->k});
      predicted.push_back(knn_predict(*model.knn, data.rows[r], rng));
    }
  }
  const char delim = delimiter_for(o.format.empty() ? "csv" : o.format);
  std::vector<std::string> header{"row", "predicted"};
  if (labelled) header.push_back("truth");
  std::string table = join_row(header, delim);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    std::vector<std::string> cells{std::to_string(r), model.group_names[predicted[r]]};
    if (labelled) {
      const auto& truth = data.group_names[data.labels[r]];
      cells.push_back(truth);
      correct += truth == model.group_names[predicted[r]];
    }
    table += join_row(cells, delim);
  }
  OutputSet files(o.out_dir);
  files.add("predictions." + (o.format.empty() ? std::string("csv") : o.format), std::move(table));
  for (const auto& p : files.commit()) out << "wrote " << p.string() << "\n";
  if (labelled) {
    out << "correct " << correct << "/" << data.size() << " = "
        << num(static_cast<double>(correct) / static_cast<double>(data.size())) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// cv / grid

std::string cell(const std::optional<double>& v) { return v ? num(*v) : std::string("NA"); }

std::string group_table(const std::vector<EvalReport>& reports, char delim) {
  std::string t = join_row({"method", "group", "any_zero_fraction", "mean_accuracy", "sd_accuracy"}, delim);
  for (const auto& r : reports) {
    for (const auto& g : r.breakdown.by_group) {
      t += join_row({r.method.name(), g.name, num(g.any_zero_fraction),
                     g.replicates ? num(g.mean_accuracy) : "NA", cell(g.sd_accuracy)},
                    delim);
    }
  }
  return t;
}

std::string zero_bin_table(const EvalReport& r, char delim) {
  std::string t = join_row({"zeros", "occupancy", "mean_accuracy", "sd_accuracy", "replicates"}, delim);
  for (const auto& z : r.breakdown.by_zero_count) {
    t += join_row({z.label, num(z.occupancy), z.replicates ? num(z.mean_accuracy) : "NA",
                   cell(z.sd_accuracy), std::to_string(z.replicates)},
                  delim);
  }
  return t;
}

std::string table_ext(const Options& o) { return o.format == "csv" ? "csv" : "tsv"; }

int cmd_cv(const Options& o, std::ostream& out, std::ostream& err) {
  const auto data = load(o);
  const MethodSpec m = method_of(o);
  std::mutex err_mutex;
  const CvConfig cv = cv_of(o, err, err_mutex);
  const EvalReport r = cv_evaluate(data, m, cv);

  json j = header_json(o, json{{"data", data_config(o)},
                               {"method", method_config(o)},
                               {"n_test", o.n_test},
                               {"reps", o.reps},
                               {"threads", o.threads}});
  j["dataset"] = dataset_json(data, o.data);
  j["cv"] = cv_json(cv);
  j["report"] = report_json(r, true);

  const char delim = delimiter_for(table_ext(o));
  OutputSet files(o.out_dir);
  files.add("cv_report.json", dump(j));
  files.add("group_accuracy." + table_ext(o), group_table({r}, delim));
  files.add("zero_bins." + table_ext(o), zero_bin_table(r, delim));
  files.commit();
  out << m.name() << "  mean_q " << num(r.mean_q) << "  sd " << cell(r.sd_q) << "  se "
      << cell(r.se_q) << "  (B = " << r.q.size() << ", n_test = " << r.n_test << ")\n";
  return kExitOk;
}

std::vector<MethodKind> methods_of(const Options& o) {
  std::vector<MethodKind> out;
  for (const auto& name : split_list(o.methods)) {
    auto k = method_kind_from_string(name);
    if (!k) config_error("unknown method '" + name + "' in --methods");
    out.push_back(*k);
  }
  if (out.empty()) config_error("--methods is empty");
  return out;
}

std::vector<double> range_of(const std::string& text, const char* flag) {
  try {
    return parse_range(text);
  } catch (const Error& e) {
    config_error(std::string(flag) + ": " + e.what());
  }
}

int cmd_grid(const Options& o, std::ostream& out, std::ostream& err) {
  const auto data = load(o);
  GridSpec grid = GridSpec::defaults(data.has_zeros());
  if (!o.alpha_grid.empty()) grid.alphas = range_of(o.alpha_grid, "--alpha-grid");
  grid.lambdas = range_of(o.lambda_grid, "--lambda-grid");
  grid.gammas = range_of(o.gamma_grid, "--gamma-grid");
  grid.ks.clear();
  for (double k : range_of(o.k_grid, "--k-grid")) {
    if (k < 1 || k != std::floor(k)) config_error("--k-grid values must be positive integers");
    grid.ks.push_back(static_cast<std::size_t>(k));
  }
  grid.methods = methods_of(o);
  grid.prior = prior_of(o);

  std::mutex err_mutex;
  const CvConfig cv = cv_of(o, err, err_mutex);
  const GridResult res = grid_search(data, grid, cv);

  json j = header_json(o, json{{"data", data_config(o)},
                               {"alpha_grid", o.alpha_grid},
                               {"lambda_grid", o.lambda_grid},
                               {"gamma_grid", o.gamma_grid},
                               {"k_grid", o.k_grid},
                               {"methods", o.methods},
                               {"prior", o.prior},
                               {"n_test", o.n_test},
                               {"reps", o.reps},
                               {"threads", o.threads}});
  j["dataset"] = dataset_json(data, o.data);
  j["cv"] = cv_json(cv);
  j["splits"] = {{"reused_across_grid", true}, {"count", cv.reps}};
  std::vector<std::string> kinds;
  for (auto k : grid.methods) kinds.push_back(to_string(k));
  j["grid"] = {{"alphas", grid.alphas}, {"lambdas", grid.lambdas}, {"gammas", grid.gammas},
               {"ks", grid.ks},         {"methods", kinds},        {"points", grid.expand().size()}};
  j["best"] = res.ranked.empty() ? json(nullptr) : report_json(res.ranked.front(), false);
  json best = json::array();
  for (const auto& r : res.best_per_method) best.push_back(report_json(r, false));
  j["best_per_method"] = best;
  json ranked = json::array();
  for (const auto& r : res.ranked) ranked.push_back(summary_json(r));
  j["ranked"] = ranked;
  json skipped = json::array();
  for (const auto& s : res.skipped) {
    skipped.push_back({{"type", s.code == ErrorCode::IllConditioned ? "IllConditionedAt" : "FailedAt"},
                       {"code", simplexclf::to_string(s.code)},
                       {"method", method_json(s.method)},
                       {"replicate", s.replicate},
                       {"reason", s.reason}});
  }
  j["skipped"] = skipped;

  const char delim = delimiter_for(table_ext(o));
  std::string curves = join_row({"alpha", "LDA", "QDA", "RDA"}, delim);
  for (std::size_t a = 0; a < res.curve_alphas.size(); ++a) {
    curves += join_row({num(res.curve_alphas[a]), cell(res.lda_curve[a]), cell(res.qda_curve[a]),
                        cell(res.rda_curve[a])},
                       delim);
  }
  std::vector<std::string> heat_header{"k"};
  for (double a : res.curve_alphas) heat_header.push_back(num(a));
  std::string heat = join_row(heat_header, delim);
  for (std::size_t i = 0; i < res.knn_ks.size(); ++i) {
    std::vector<std::string> row{std::to_string(res.knn_ks[i])};
    for (const auto& v : res.knn_heat[i]) row.push_back(cell(v));
    heat += join_row(row, delim);
  }
  // Accuracy against k at the alpha of the best alpha-metric k-NN point.
  std::optional<std::size_t> sel;
  for (const auto& r : res.best_per_method) {
    if (r.method.kind != MethodKind::KnnAlpha) continue;
    for (std::size_t a = 0; a < res.curve_alphas.size(); ++a)
      if (res.curve_alphas[a] == r.method.alpha) sel = a;
  }
  std::vector<std::string> by_k_header{"k"};
  if (sel) by_k_header.push_back("alpha=" + num(res.curve_alphas[*sel]));
  by_k_header.push_back("ESOV");
  std::string by_k = join_row(by_k_header, delim);
  for (std::size_t i = 0; i < res.knn_ks.size(); ++i) {
    std::vector<std::string> row{std::to_string(res.knn_ks[i])};
    if (sel) row.push_back(cell(res.knn_heat[i][*sel]));
    row.push_back(i < res.esov_by_k.size() ? cell(res.esov_by_k[i]) : "NA");
    by_k += join_row(row, delim);
  }

  OutputSet files(o.out_dir);
  files.add("grid_report.json", dump(j));
  files.add("alpha_curves." + table_ext(o), curves);
  files.add("knn_heat." + table_ext(o), heat);
  files.add("knn_by_k." + table_ext(o), by_k);
  files.add("group_accuracy." + table_ext(o), group_table(res.best_per_method, delim));
  files.commit();

  if (res.ranked.empty()) {
    err << "every grid point failed; see skipped entries in the report\n";
    return kExitComputation;
  }
  std::vector<std::vector<std::string>> t{{"method", "mean_q", "sd", "se"}};
  for (const auto& r : res.best_per_method)
    t.push_back({r.method.name(), num(r.mean_q), cell(r.sd_q), cell(r.se_q)});
  out << aligned(t);
  out << res.ranked.size() << " points ranked, " << res.skipped.size() << " skipped\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const Options& o, std::ostream& out) {
  SyntheticSpec spec;
  spec.regime = o.regime == "eda" ? SyntheticRegime::EdaFavored : SyntheticRegime::LraFavored;
  spec.parts = o.parts;
  spec.groups = o.groups;
  spec.group_size = o.group_size;
  spec.separation = o.separation;
  spec.anisotropy = o.anisotropy;
  spec.seed = o.seed;
  const auto data = generate_synthetic(spec);
  OutputSet files(o.out_dir);
  files.add("synthetic_" + o.regime + ".csv", to_canonical_csv(data));
  for (const auto& p : files.commit()) out << "wrote " << p.string() << "\n";
  out << "sha256 " << dataset_digest(data) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// argument wiring

void add_data(CLI::App* sub, Options& o) {
  sub->add_option("--data", o.data, "input CSV file")->required();
  sub->add_option("--label-col", o.label_col, "label column name (default: label)")
      ->each([&o](const std::string&) { o.label_col_set = true; });
  sub->add_option("--drop-cols", o.drop_cols, "comma-separated columns to ignore");
  sub->add_option("--preset", o.preset, "column layout preset")->check(CLI::IsMember({"glass"}));
}

void add_method(CLI::App* sub, Options& o) {
  sub->add_option("--method", o.method, "rda, lda, qda or knn")
      ->check(CLI::IsMember({"rda", "lda", "qda", "knn"}))
      ->each([&o](const std::string&) { o.method_set = true; });
  sub->add_option("--alpha", o.alpha, "transformation parameter");
  sub->add_option("--lambda", o.lambda, "RDA lambda in [0, 1]");
  sub->add_option("--gamma", o.gamma, "RDA gamma in [0, 1]");
  sub->add_option("--k", o.k, "number of neighbours")
      ->check(CLI::PositiveNumber)
      ->each([&o](const std::string&) { o.k_set = true; });
  sub->add_option("--metric", o.metric, "k-NN metric")->check(CLI::IsMember({"alpha", "esov"}));
  sub->add_option("--prior", o.prior, "RDA priors")->check(CLI::IsMember({"proportional", "uniform"}));
}

void add_cv(CLI::App* sub, Options& o) {
  sub->add_option("--n-test", o.n_test, "test rows per replicate");
  sub->add_option("--reps", o.reps, "number of replicates B");
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--threads", o.threads, "worker threads (0 = all cores)")
      ->envname("SIMPLEX_CLF_THREADS");
  sub->add_flag("--progress", o.progress, "print a replicate counter on stderr");
}

void add_out(CLI::App* sub, Options& o, std::vector<std::string> formats) {
  sub->add_option("--out-dir", o.out_dir, "output directory")
      ->each([&o](const std::string&) { o.out_dir_set = true; });
  sub->add_option("--format", o.format, "output format")->check(CLI::IsMember(formats));
}

std::string default_format(const std::string& command) {
  if (command == "summarize") return "tsv";
  if (command == "fit" || command == "cv" || command == "grid") return "json";
  return "csv";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Classification of compositional data with the alpha-transformation"};
  app.set_version_flag("--version", SIMPLEXCLF_VERSION);
  app.require_subcommand(1);

  auto* transform = app.add_subcommand("transform", "alpha-transform a dataset, or invert one");
  add_data(transform, o);
  transform->add_option("--alpha", o.alpha, "transformation parameter");
  transform->add_flag("--inverse", o.inverse, "map transformed coordinates back to the simplex");
  transform->add_option("--manifest", o.manifest, "manifest written by the forward transform");
  add_out(transform, o, {"csv", "tsv"});

  auto* distance = app.add_subcommand("distance", "pairwise distances between all rows");
  add_data(distance, o);
  distance->add_option("--alpha", o.alpha, "alpha-metric parameter");
  distance->add_option("--metric", o.metric, "metric")->check(CLI::IsMember({"alpha", "esov"}));
  distance->add_option("--threads", o.threads, "worker threads")->envname("SIMPLEX_CLF_THREADS");
  add_out(distance, o, {"csv", "tsv", "json"});

  auto* summarize = app.add_subcommand("summarize", "zero patterns and group sizes");
  add_data(summarize, o);
  add_out(summarize, o, {"json", "tsv", "csv"});

  auto* fit = app.add_subcommand("fit", "fit one classifier on the whole dataset");
  add_data(fit, o);
  add_method(fit, o);
  add_out(fit, o, {"json"});

  auto* predict = app.add_subcommand("predict", "classify rows with a fitted model");
  predict->add_option("--model", o.model, "model.json written by fit")->required();
  add_data(predict, o);
  predict->add_option("--seed", o.seed, "seed for k-NN vote ties");
  add_out(predict, o, {"csv", "tsv"});

  auto* cv = app.add_subcommand("cv", "repeated stratified hold-out for one configuration");
  add_data(cv, o);
  add_method(cv, o);
  add_cv(cv, o);
  add_out(cv, o, {"json", "tsv", "csv"});

  auto* grid = app.add_subcommand("grid", "grid search over alpha, lambda, gamma and k");
  add_data(grid, o);
  grid->add_option("--alpha-grid", o.alpha_grid, "lo:hi:step (default depends on zeros)");
  grid->add_option("--lambda-grid", o.lambda_grid, "lo:hi:step");
  grid->add_option("--gamma-grid", o.gamma_grid, "lo:hi:step");
  grid->add_option("--k-grid", o.k_grid, "lo:hi:step");
  grid->add_option("--methods", o.methods, "comma-separated: rda,lda,qda,knn,knn_esov");
  grid->add_option("--prior", o.prior, "RDA priors")->check(CLI::IsMember({"proportional", "uniform"}));
  add_cv(grid, o);
  add_out(grid, o, {"json", "tsv", "csv"});

  auto* synth = app.add_subcommand("synth", "generate a synthetic labelled dataset");
  synth->add_option("--regime", o.regime, "lra (Gaussian in clr) or eda (Gaussian in raw parts)")
      ->check(CLI::IsMember({"lra", "eda"}));
  synth->add_option("--parts", o.parts, "number of parts D");
  synth->add_option("--groups", o.groups, "number of groups");
  synth->add_option("--group-size", o.group_size, "rows per group");
  synth->add_option("--separation", o.separation, "distance between neighbouring group means");
  synth->add_option("--anisotropy", o.anisotropy, "eda placement stretch");
  synth->add_option("--seed", o.seed, "seed");
  add_out(synth, o, {"csv"});

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    o.command = app.get_subcommands().front()->get_name();
    if (o.format.empty()) o.format = default_format(o.command);
    check_out_dir(o);
    if (o.command == "transform") return o.inverse ? cmd_transform_inverse(o, out) : cmd_transform_forward(o, out);
    if (o.command == "distance") return cmd_distance(o, out);
    if (o.command == "summarize") return cmd_summarize(o, out);
    if (o.command == "fit") return cmd_fit(o, out);
    if (o.command == "predict") return cmd_predict(o, out);
    if (o.command == "cv") return cmd_cv(o, out, err);
    if (o.command == "grid") return cmd_grid(o, out, err);
    if (o.command == "synth") return cmd_synth(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_input_error() ? kExitInput : kExitComputation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitComputation;
  }
  return kExitInput;
}

}  // namespace simplexclf::cli
