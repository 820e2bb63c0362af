#include "simplexclf/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <openssl/evp.h>

#include "simplexclf/error.hpp"

namespace simplexclf {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// Splits one line on the delimiter; double-quoted fields may contain it.
std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::string quote_if_needed(const std::string& s, char delim) {
  if (s.find(delim) == std::string::npos && s.find('"') == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

bool LabeledCompositionDataset::has_zeros() const noexcept {
  return std::any_of(rows.begin(), rows.end(), [](const Composition& c) { return c.has_zeros(); });
}

std::vector<std::size_t> LabeledCompositionDataset::group_sizes() const {
  std::vector<std::size_t> sizes(group_names.size(), 0);
  for (int label : labels) ++sizes[static_cast<std::size_t>(label)];
  return sizes;
}

LabeledCompositionDataset LabeledCompositionDataset::from_raw(
    std::vector<std::string> component_names, std::vector<std::vector<double>> raw_rows,
    std::vector<int> labels, std::vector<std::string> group_names, std::string provenance) {
  if (raw_rows.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "one label per row is required");
  }
  LabeledCompositionDataset data;
  data.component_names = std::move(component_names);
  data.group_names = std::move(group_names);
  data.provenance = std::move(provenance);
  data.rows.reserve(raw_rows.size());
  for (std::size_t r = 0; r < raw_rows.size(); ++r) {
    const auto& raw = raw_rows[r];
    if (raw.size() != data.component_names.size()) {
      throw Error(ErrorCode::DimensionMismatch, "row " + std::to_string(r) + " has " +
                                                    std::to_string(raw.size()) + " parts",
                  r);
    }
    for (std::size_t c = 0; c < raw.size(); ++c) {
      if (!(raw[c] >= 0.0) || !std::isfinite(raw[c])) {
        throw Error(ErrorCode::NegativeComponent,
                    "row " + std::to_string(r) + ", column " + data.component_names[c] +
                        " is negative or not finite",
                    r, c);
      }
    }
    if (std::all_of(raw.begin(), raw.end(), [](double v) { return v == 0.0; })) {
      throw Error(ErrorCode::AllZeroRow, "row " + std::to_string(r) + " is all zero", r);
    }
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= data.group_names.size()) {
      throw Error(ErrorCode::InvalidSpec, "row " + std::to_string(r) + " has an unknown label", r);
    }
    data.rows.push_back(closure(raw));
  }
  data.labels = std::move(labels);
  data.raw_rows = std::move(raw_rows);
  return data;
}

LabeledCompositionDataset LabeledCompositionDataset::subset(
    const std::vector<std::size_t>& indices) const {
  LabeledCompositionDataset out;
  out.component_names = component_names;
  out.group_names = group_names;
  out.provenance = provenance + " (subset)";
  for (std::size_t i : indices) {
    out.rows.push_back(rows.at(i));
    out.labels.push_back(labels.at(i));
    out.raw_rows.push_back(raw_rows.at(i));
  }
  return out;
}

CsvSchema glass_schema() {
  CsvSchema s;
  s.label_column = "Type";
  s.drop_columns = {"Id", "RI"};
  s.label_names = {{"1", "window float"}, {"2", "window non-float"}, {"3", "vehicle window"},
                   {"5", "containers"},   {"6", "tableware"},        {"7", "headlamps"}};
  return s;
}

CsvSchema canonical_schema() {
  CsvSchema s;
  s.label_column = "label";
  return s;
}

LabeledCompositionDataset parse_dataset(const std::string& text, const CsvSchema& schema,
                                        const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split_fields(line, schema.delimiter);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorCode::MissingColumn, source + ": no header row");

  auto column_index = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(ErrorCode::MissingColumn, source + ": column '" + name + "' not found");
    }
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t label_col = column_index(schema.label_column);
  std::vector<std::size_t> drop;
  for (const auto& name : schema.drop_columns) drop.push_back(column_index(name));
  std::vector<std::size_t> parts;
  std::vector<std::string> part_names;
  if (schema.component_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == label_col || std::find(drop.begin(), drop.end(), c) != drop.end()) continue;
      parts.push_back(c);
      part_names.push_back(header[c]);
    }
  } else {
    for (const auto& name : schema.component_columns) {
      parts.push_back(column_index(name));
      part_names.push_back(name);
    }
  }
  if (parts.size() < 2) {
    throw Error(ErrorCode::MissingColumn, source + ": at least two component columns are needed");
  }

  std::vector<std::vector<double>> raw_rows;
  std::vector<int> labels;
  std::vector<std::string> group_names;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::size_t row = raw_rows.size();
    const auto fields = split_fields(line, schema.delimiter);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ParseError,
                  source + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()),
                  row);
    }
    std::vector<double> values(parts.size());
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const std::string& cell = fields[parts[p]];
      const char* end = cell.data() + cell.size();
      auto [ptr, ec] = std::from_chars(cell.data(), end, values[p]);
      if (ec != std::errc() || ptr != end) {
        throw Error(ErrorCode::ParseError,
                    source + ": line " + std::to_string(line_no) + ", column '" +
                        header[parts[p]] + "': cannot parse '" + cell + "'",
                    row, p);
      }
      if (values[p] < 0.0) {
        throw Error(ErrorCode::NegativeComponent,
                    source + ": line " + std::to_string(line_no) + ", column '" +
                        header[parts[p]] + "' is negative",
                    row, p);
      }
    }
    if (std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; })) {
      throw Error(ErrorCode::AllZeroRow,
                  source + ": line " + std::to_string(line_no) + " has only zero parts", row);
    }
    std::string label = fields[label_col];
    if (auto it = schema.label_names.find(label); it != schema.label_names.end()) {
      label = it->second;
    }
    auto it = std::find(group_names.begin(), group_names.end(), label);
    if (it == group_names.end()) {
      group_names.push_back(label);
      it = group_names.end() - 1;
    }
    labels.push_back(static_cast<int>(it - group_names.begin()));
    raw_rows.push_back(std::move(values));
  }
  if (raw_rows.empty()) throw Error(ErrorCode::EmptyInput, source + ": no data rows");

  std::vector<double> sums;
  for (const auto& r : raw_rows) {
    double s = 0.0;
    for (double v : r) s += v;
    sums.push_back(s);
  }
  std::ostringstream prov;
  prov << source << "; " << raw_rows.size() << " rows; pre-closure row sums in ["
       << *std::min_element(sums.begin(), sums.end()) << ", "
       << *std::max_element(sums.begin(), sums.end()) << "]";
  return LabeledCompositionDataset::from_raw(std::move(part_names), std::move(raw_rows),
                                             std::move(labels), std::move(group_names),
                                             prov.str());
}

LabeledCompositionDataset load_dataset(const std::filesystem::path& path,
                                       const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), schema, path.string());
}

std::string to_canonical_csv(const LabeledCompositionDataset& data) {
  std::string out;
  for (const auto& name : data.component_names) out += quote_if_needed(name, ',') + ",";
  out += "label\n";
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (double v : data.raw_rows[r]) out += shortest(v) + ",";
    out += quote_if_needed(data.group_names[static_cast<std::size_t>(data.labels[r])], ',') + "\n";
  }
  return out;
}

std::string dataset_digest(const LabeledCompositionDataset& data) {
  const std::string text = to_canonical_csv(data);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "SHA-256 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

ZeroSummary zero_summary(const LabeledCompositionDataset& data) {
  const std::size_t D = data.parts();
  ZeroSummary s;
  s.per_component_zero_count.assign(D, 0);
  s.per_observation_zero_count.assign(data.size(), 0);
  s.zero_count_distribution.assign(D + 1, 0.0);
  std::vector<std::size_t> group_any(data.group_count(), 0);
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t c = 0; c < D; ++c) {
      if (data.raw_rows[r][c] == 0.0) {
        ++s.per_component_zero_count[c];
        ++s.per_observation_zero_count[r];
      }
    }
    s.total_zeros += s.per_observation_zero_count[r];
    s.zero_count_distribution[s.per_observation_zero_count[r]] += 1.0;
    if (s.per_observation_zero_count[r] > 0) ++group_any[static_cast<std::size_t>(data.labels[r])];
  }
  const double n = static_cast<double>(data.size());
  for (std::size_t c = 0; c < D; ++c) {
    s.per_component_zero_fraction.push_back(static_cast<double>(s.per_component_zero_count[c]) / n);
  }
  for (double& v : s.zero_count_distribution) v /= n;
  const auto sizes = data.group_sizes();
  for (std::size_t g = 0; g < data.group_count(); ++g) {
    s.per_group_any_zero_fraction.push_back(static_cast<double>(group_any[g]) /
                                            static_cast<double>(sizes[g]));
  }
  return s;
}

std::vector<GroupSummaryRow> group_summary(const LabeledCompositionDataset& data) {
  std::vector<GroupSummaryRow> rows(data.group_count());
  for (std::size_t g = 0; g < rows.size(); ++g) rows[g].name = data.group_names[g];
  for (std::size_t r = 0; r < data.size(); ++r) {
    auto& row = rows[static_cast<std::size_t>(data.labels[r])];
    ++row.size;
    if (data.rows[r].has_zeros()) ++row.with_zero;
  }
  return rows;
}

LabeledCompositionDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.parts < 2 || spec.groups < 1 || spec.group_size < 2 || !(spec.separation >= 0.0) ||
      !std::isfinite(spec.separation) || !(spec.anisotropy >= 1.0) ||
      !std::isfinite(spec.anisotropy)) {
    throw Error(ErrorCode::InvalidSpec,
                "synthetic data need D >= 2, groups of at least 2, a finite separation >= 0 "
                "and a finite anisotropy >= 1");
  }
  if (spec.regime == SyntheticRegime::LraFavored && spec.parts < 3) {
    throw Error(ErrorCode::InvalidSpec, "the log-ratio regime needs D >= 3");
  }
  const std::size_t D = spec.parts;
  const auto d = static_cast<Eigen::Index>(D - 1);
  const ContrastBasis basis = helmert_submatrix(D);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Group means lie on a line through the origin along the last basis
  // direction (the contrast of the last part against all others), spaced
  // `separation` apart and centred.
  Eigen::VectorXd direction = Eigen::VectorXd::Zero(d);
  direction[d - 1] = 1.0;
  const double centre = 0.5 * static_cast<double>(spec.groups - 1);
  auto group_mean = [&](std::size_t g) -> Eigen::VectorXd {
    return (static_cast<double>(g) - centre) * spec.separation * direction;
  };
  auto draw = [&](const Eigen::VectorXd& mean) {
    Eigen::VectorXd y(d);
    for (Eigen::Index i = 0; i < d; ++i) y[i] = mean[i] + normal(rng);
    return y;
  };

  // Raw-space placement. Off the separating axis one standard deviation maps
  // to a third of the inscribed radius; along it the scale is smaller by the
  // anisotropy factor.
  const double inscribed = 1.0 / std::sqrt(static_cast<double>(D * (D - 1)));
  Eigen::VectorXd scale = Eigen::VectorXd::Constant(d, inscribed / 3.0);
  scale[d - 1] /= spec.anisotropy;

  std::vector<std::vector<double>> raw;
  std::vector<int> labels;
  std::vector<std::string> names;
  std::vector<std::string> component_names;
  for (std::size_t c = 0; c < D; ++c) component_names.push_back("x" + std::to_string(c + 1));
  for (std::size_t g = 0; g < spec.groups; ++g) {
    names.push_back("group" + std::to_string(g + 1));
    const Eigen::VectorXd mean = group_mean(g);
    for (std::size_t i = 0; i < spec.group_size; ++i) {
      if (spec.regime == SyntheticRegime::LraFavored) {
        const Composition x = inverse_alpha_transform(draw(mean), Alpha(0.0), basis);
        raw.emplace_back(x.parts().begin(), x.parts().end());
      } else {
        std::vector<double> parts;
        for (;;) {
          const Eigen::VectorXd p =
              Eigen::VectorXd::Constant(static_cast<Eigen::Index>(D), 1.0 / static_cast<double>(D)) +
              basis.matrix().transpose() * scale.cwiseProduct(draw(mean));
          if ((p.array() > 0.0).all()) {
            parts.assign(p.data(), p.data() + p.size());
            break;
          }
        }
        raw.push_back(std::move(parts));
      }
      labels.push_back(static_cast<int>(g));
    }
  }
  std::ostringstream prov;
  prov << "synthetic " << (spec.regime == SyntheticRegime::LraFavored ? "lra" : "eda")
       << " D=" << D << " groups=" << spec.groups << "x" << spec.group_size
       << " separation=" << spec.separation;
  if (spec.regime == SyntheticRegime::EdaFavored) prov << " anisotropy=" << spec.anisotropy;
  prov << " seed=" << spec.seed;
  return LabeledCompositionDataset::from_raw(std::move(component_names), std::move(raw),
                                             std::move(labels), std::move(names), prov.str());
}

}  // namespace simplexclf
