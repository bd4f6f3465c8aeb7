#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace bcs {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class SensingKind { kPixelMask, kGaussian, kOrthobasisRows };

const char* to_string(SensingKind kind);

class UnionMatrix;

/// One per-signal measurement operator A_i (m_i x n).
///
/// Pixel masks are kept as index lists only; `dense()` materializes the
/// identity rows when a dense matrix is actually needed.
class SensingMatrix {
 public:
  SensingKind kind() const { return kind_; }
  Index rows() const { return m_; }
  Index cols() const { return n_; }
  /// Pool row ids (identity rows for pixel masks); empty for gaussian.
  const std::vector<Index>& row_ids() const { return row_ids_; }

  Matrix dense() const;
  /// A * X for a matrix with n rows.
  Matrix apply(const Matrix& x) const;
  Vector apply(const Vector& x) const;
  /// A^T * y, lifting a measurement back to signal space.
  Vector apply_transpose(const Vector& y) const;
  /// A^T A (n x n).
  Matrix gram() const;

 private:
  friend SensingMatrix make_pixel_mask(Index, std::vector<Index>);
  friend SensingMatrix make_gaussian(Index, Index, std::uint64_t);
  friend SensingMatrix make_orthobasis_subset(const UnionMatrix&, std::vector<Index>);

  SensingKind kind_ = SensingKind::kPixelMask;
  Index m_ = 0;
  Index n_ = 0;
  std::vector<Index> row_ids_;
  Matrix rows_;  // unused for pixel masks
};

SensingMatrix make_pixel_mask(Index n, std::vector<Index> observed);
SensingMatrix make_gaussian(Index m, Index n, std::uint64_t seed);
/// Selects pool rows; ids are sorted into canonical (ascending) order.
SensingMatrix make_orthobasis_subset(const UnionMatrix& pool, std::vector<Index> row_ids);

/// Deduplicated union of the sensing rows of a signal collection (A-tilde).
class UnionMatrix {
 public:
  UnionMatrix() = default;
  /// A pool of candidate rows, ids 0..M-1 (e.g. a random orthobasis).
  static UnionMatrix pool(Matrix rows);

  SensingKind kind() const { return kind_; }
  Index rows() const { return rows_.rows(); }
  Index cols() const { return rows_.cols(); }
  const Matrix& matrix() const { return rows_; }
  /// Pool id of each union row; for gaussian unions, -(1 + first-appearance ordinal).
  const std::vector<std::int64_t>& provenance() const { return provenance_; }
  /// Union row holding row j of `sensor`, if present.
  std::optional<Index> find_row(const SensingMatrix& sensor, Index j) const;
  Index rank() const;

 private:
  friend UnionMatrix build_union(std::span<const SensingMatrix> sensors);

  SensingKind kind_ = SensingKind::kOrthobasisRows;
  Matrix rows_;
  std::vector<std::int64_t> provenance_;
  std::unordered_map<std::int64_t, Index> by_id_;
  std::unordered_map<std::string, Index> by_value_;
};

UnionMatrix build_union(std::span<const SensingMatrix> sensors);

/// One observed vector y_i = A_i x_i with its sensing matrix.
struct Measurement {
  SensingMatrix sensor;
  Vector y;
};

/// Measurements sharing an ambient dimension n.
class MeasurementSet {
 public:
  MeasurementSet() = default;
  MeasurementSet(Index n, std::vector<Measurement> items);

  Index n() const { return n_; }
  Index size() const { return static_cast<Index>(items_.size()); }
  bool empty() const { return items_.empty(); }
  const Measurement& operator[](Index i) const { return items_[static_cast<std::size_t>(i)]; }
  const std::vector<Measurement>& items() const { return items_; }
  /// Sum of m_i.
  Index total_measurements() const;
  /// Sub-collection in the given order.
  MeasurementSet subset(std::span<const Index> indices) const;
  std::vector<SensingMatrix> sensors(std::span<const Index> indices) const;

 private:
  Index n_ = 0;
  std::vector<Measurement> items_;
};

/// Convenience: y_i = A_i x_i for each column of `signals`.
MeasurementSet measure(const Matrix& signals, std::vector<SensingMatrix> sensors);

/// Partially observed M x |omega_l| matrix P_Omega(Y).
class ObservationMatrix {
 public:
  ObservationMatrix(Index rows, Index cols) : rows_(rows), cols_(cols) {}

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index observed_count() const { return static_cast<Index>(entries_.size()); }
  const std::map<std::pair<Index, Index>, double>& entries() const { return entries_; }
  std::vector<std::pair<Index, Index>> omega() const;
  void set(Index u, Index v, double value);
  bool observed(Index u, Index v) const { return entries_.count({u, v}) != 0; }
  /// Dense matrix with unobserved entries set to `fill`.
  Matrix to_dense(double fill = 0.0) const;
  /// 1 where observed, 0 elsewhere.
  Matrix mask() const;
  std::vector<Index> missing_rows() const;
  std::vector<Index> missing_cols() const;

 private:
  Index rows_;
  Index cols_;
  std::map<std::pair<Index, Index>, double> entries_;
};

/// Column v holds the measurements of the v-th listed signal, placed at the
/// union rows its sensor maps to.
ObservationMatrix assemble_observation(const MeasurementSet& measurements,
                                       std::span<const Index> signals, const UnionMatrix& uni);

}  // namespace bcs
