#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace gdro {

enum class LabelKind { binary, multiclass };

// Row-major feature storage so per-sample rows are contiguous.
using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Two-level finite-sum data: m groups of labeled samples. Immutable after
// load/generation; shareable across threads.
struct GroupedDataset {
  int dim = 0;
  LabelKind label_kind = LabelKind::binary;
  int classes = 2;  // meaningful for multiclass only
  std::vector<FeatureMatrix> features;  // one (n_i x dim) block per group
  std::vector<Eigen::VectorXi> labels;  // +/-1 binary, 0..classes-1 multiclass

  int num_groups() const { return static_cast<int>(features.size()); }
  std::int64_t group_size(int i) const { return features[i].rows(); }
  std::int64_t total_samples() const;
  double n_bar() const;  // average group size
  std::int64_t min_group_size() const;
  double harmonic_mean_group_size() const;

  // Throws std::invalid_argument on violated invariants (empty groups,
  // inconsistent feature widths, labels out of range).
  void validate() const;
};

// Extracts group i as a one-group dataset (shares nothing; copies).
GroupedDataset single_group(const GroupedDataset& ds, int i);

enum class DatasetFormat { text, binary };

// Line-oriented text format:
//   gdro v1 <m> <dim> <label_kind>
//   group <i> <n_i>
//   <label> <f_1> ... <f_dim>
// where <label_kind> is "binary" or "multiclass:<C>"; floats use 17
// significant digits. The binary variant carries identical logical content:
// magic "GDR1", then little-endian u64 {m, dim, kind, classes}, then per
// group u64 n_i followed by n_i records of i64 label + dim f64 features.
void save_dataset(const GroupedDataset& ds, const std::string& path,
                  DatasetFormat format);

// Sniffs the format from the leading bytes. Failure modes carry distinct
// diagnostics: "malformed header", "truncated file", "group-count mismatch".
GroupedDataset load_dataset(const std::string& path);

}  // namespace gdro
