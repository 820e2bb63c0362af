#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simplexclf/simplex.hpp"

namespace simplexclf {

/// n closed compositions with group labels. Labels are indices into
/// group_names, numbered in order of first appearance in the source.
struct LabeledCompositionDataset {
  std::vector<std::string> component_names;
  std::vector<Composition> rows;
  std::vector<int> labels;
  std::vector<std::string> group_names;
  std::string provenance;
  // Values as read, before closure. Zero detection and re-export use these.
  std::vector<std::vector<double>> raw_rows;

  std::size_t size() const noexcept { return rows.size(); }
  std::size_t parts() const noexcept { return component_names.size(); }
  std::size_t group_count() const noexcept { return group_names.size(); }
  bool has_zeros() const noexcept;
  std::vector<std::size_t> group_sizes() const;

  /// Builds a dataset from raw rows, applying closure. Throws with the row
  /// index on negative or all-zero rows.
  static LabeledCompositionDataset from_raw(std::vector<std::string> component_names,
                                            std::vector<std::vector<double>> raw_rows,
                                            std::vector<int> labels,
                                            std::vector<std::string> group_names,
                                            std::string provenance);

  /// Rows/labels at the given indices, keeping group numbering.
  LabeledCompositionDataset subset(const std::vector<std::size_t>& indices) const;
};

struct CsvSchema {
  std::string label_column;
  // Empty means every column other than the label and the dropped ones.
  std::vector<std::string> component_columns;
  std::vector<std::string> drop_columns;
  char delimiter = ',';
  // Optional renaming of label values (e.g. UCI type codes to names).
  std::map<std::string, std::string> label_names;
};

/// Layout of the UCI glass identification file: Id and refractive index are
/// dropped, the eight oxides are the parts, and type codes get their names.
CsvSchema glass_schema();

LabeledCompositionDataset load_dataset(const std::filesystem::path& path,
                                       const CsvSchema& schema);
LabeledCompositionDataset parse_dataset(const std::string& text, const CsvSchema& schema,
                                        const std::string& source = "<memory>");

/// Canonical CSV: component columns then "label"; raw values written in
/// shortest round-trip form. Loading it back with canonical_schema() gives
/// an identical dataset.
std::string to_canonical_csv(const LabeledCompositionDataset& data);
CsvSchema canonical_schema();

/// SHA-256 of the canonical CSV, hex encoded.
std::string dataset_digest(const LabeledCompositionDataset& data);

struct ZeroSummary {
  std::vector<double> per_component_zero_fraction;
  std::vector<std::size_t> per_component_zero_count;
  std::vector<std::size_t> per_observation_zero_count;
  std::vector<double> per_group_any_zero_fraction;
  // Share of observations with exactly c zeros, c = 0..D.
  std::vector<double> zero_count_distribution;
  std::size_t total_zeros = 0;
};

ZeroSummary zero_summary(const LabeledCompositionDataset& data);

struct GroupSummaryRow {
  std::string name;
  std::size_t size = 0;
  std::size_t with_zero = 0;
};

std::vector<GroupSummaryRow> group_summary(const LabeledCompositionDataset& data);

enum class SyntheticRegime { LraFavored, EdaFavored };

struct SyntheticSpec {
  SyntheticRegime regime = SyntheticRegime::LraFavored;
  std::size_t parts = 4;
  std::size_t groups = 2;
  std::size_t group_size = 50;
  double separation = 10.0;
  // EdaFavored only: spread across the separating direction relative to the
  // spread along it.
  double anisotropy = 50.0;
  std::uint64_t seed = 1;
};

/// LraFavored: groups are unit-covariance Gaussians in clr coordinates.
/// EdaFavored: groups are Gaussians in the raw simplex coordinates, placed
/// affinely inside the simplex with out-of-range draws resampled. The
/// placement stretches the directions parallel to the group boundary so the
/// clouds reach the faces of the simplex while the gap between groups stays
/// narrow.
LabeledCompositionDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace simplexclf
