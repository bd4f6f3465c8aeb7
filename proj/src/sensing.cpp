#include "bcs/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "bcs/error.hpp"

namespace bcs {

namespace {

std::string row_key(const Matrix& m, Index r) {
  std::string key(static_cast<std::size_t>(m.cols()) * sizeof(double), '\0');
  for (Index j = 0; j < m.cols(); ++j) {
    const double v = m(r, j);
    std::memcpy(key.data() + static_cast<std::size_t>(j) * sizeof(double), &v, sizeof(double));
  }
  return key;
}

void check_strictly_increasing(const std::vector<Index>& ids, Index bound, const char* what) {
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] < 0 || ids[j] >= bound) {
      std::ostringstream os;
      os << what << ": index " << ids[j] << " outside [0, " << bound << ")";
      detail::throw_contract(os.str());
    }
    if (j > 0 && ids[j] <= ids[j - 1]) {
      std::ostringstream os;
      os << what << ": duplicate or unsorted index " << ids[j];
      detail::throw_contract(os.str());
    }
  }
}

}  // namespace

namespace detail {
void throw_contract(const std::string& what) { throw ContractViolation(what); }
}  // namespace detail

const char* to_string(SensingKind kind) {
  switch (kind) {
    case SensingKind::kPixelMask:
      return "pixel_mask";
    case SensingKind::kGaussian:
      return "gaussian";
    case SensingKind::kOrthobasisRows:
      return "orthobasis_rows";
  }
  return "unknown";
}

Matrix SensingMatrix::dense() const {
  if (kind_ != SensingKind::kPixelMask) return rows_;
  Matrix a = Matrix::Zero(m_, n_);
  for (Index j = 0; j < m_; ++j) a(j, row_ids_[static_cast<std::size_t>(j)]) = 1.0;
  return a;
}

Matrix SensingMatrix::apply(const Matrix& x) const {
  BCS_REQUIRE(x.rows() == n_, "sensing apply: operand has wrong row count");
  if (kind_ != SensingKind::kPixelMask) return rows_ * x;
  Matrix out(m_, x.cols());
  for (Index j = 0; j < m_; ++j) out.row(j) = x.row(row_ids_[static_cast<std::size_t>(j)]);
  return out;
}

Vector SensingMatrix::apply(const Vector& x) const {
  BCS_REQUIRE(x.size() == n_, "sensing apply: operand has wrong length");
  if (kind_ != SensingKind::kPixelMask) return rows_ * x;
  Vector out(m_);
  for (Index j = 0; j < m_; ++j) out(j) = x(row_ids_[static_cast<std::size_t>(j)]);
  return out;
}

Vector SensingMatrix::apply_transpose(const Vector& y) const {
  BCS_REQUIRE(y.size() == m_, "sensing apply_transpose: operand has wrong length");
  if (kind_ != SensingKind::kPixelMask) return rows_.transpose() * y;
  Vector out = Vector::Zero(n_);
  for (Index j = 0; j < m_; ++j) out(row_ids_[static_cast<std::size_t>(j)]) = y(j);
  return out;
}

Matrix SensingMatrix::gram() const {
  if (kind_ != SensingKind::kPixelMask) return rows_.transpose() * rows_;
  Matrix g = Matrix::Zero(n_, n_);
  for (Index id : row_ids_) g(id, id) = 1.0;
  return g;
}

SensingMatrix make_pixel_mask(Index n, std::vector<Index> observed) {
  BCS_REQUIRE(n >= 1, "make_pixel_mask: n must be positive");
  BCS_REQUIRE(!observed.empty(), "make_pixel_mask: observed index list is empty");
  check_strictly_increasing(observed, n, "make_pixel_mask");
  SensingMatrix a;
  a.kind_ = SensingKind::kPixelMask;
  a.m_ = static_cast<Index>(observed.size());
  a.n_ = n;
  a.row_ids_ = std::move(observed);
  return a;
}

SensingMatrix make_gaussian(Index m, Index n, std::uint64_t seed) {
  BCS_REQUIRE(m >= 1 && n >= 1, "make_gaussian: dimensions must be positive");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SensingMatrix a;
  a.kind_ = SensingKind::kGaussian;
  a.m_ = m;
  a.n_ = n;
  a.rows_.resize(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) a.rows_(i, j) = normal(gen);
  return a;
}

SensingMatrix make_orthobasis_subset(const UnionMatrix& pool, std::vector<Index> row_ids) {
  BCS_REQUIRE(!row_ids.empty(), "make_orthobasis_subset: row id list is empty");
  std::sort(row_ids.begin(), row_ids.end());
  check_strictly_increasing(row_ids, pool.rows(), "make_orthobasis_subset");
  SensingMatrix a;
  a.kind_ = SensingKind::kOrthobasisRows;
  a.m_ = static_cast<Index>(row_ids.size());
  a.n_ = pool.cols();
  a.rows_.resize(a.m_, a.n_);
  for (Index j = 0; j < a.m_; ++j) a.rows_.row(j) = pool.matrix().row(row_ids[static_cast<std::size_t>(j)]);
  a.row_ids_ = std::move(row_ids);
  return a;
}

UnionMatrix UnionMatrix::pool(Matrix rows) {
  BCS_REQUIRE(rows.rows() >= 1 && rows.cols() >= 1, "UnionMatrix::pool: empty pool");
  UnionMatrix u;
  u.kind_ = SensingKind::kOrthobasisRows;
  u.rows_ = std::move(rows);
  for (Index r = 0; r < u.rows_.rows(); ++r) {
    u.provenance_.push_back(r);
    u.by_id_.emplace(r, r);
  }
  return u;
}

std::optional<Index> UnionMatrix::find_row(const SensingMatrix& sensor, Index j) const {
  if (sensor.kind() == SensingKind::kGaussian) {
    const Matrix a = sensor.dense();
    auto it = by_value_.find(row_key(a, j));
    if (it == by_value_.end()) return std::nullopt;
    return it->second;
  }
  auto it = by_id_.find(sensor.row_ids()[static_cast<std::size_t>(j)]);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

Index UnionMatrix::rank() const {
  if (rows_.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(rows_);
  return qr.rank();
}

UnionMatrix build_union(std::span<const SensingMatrix> sensors) {
  BCS_REQUIRE(!sensors.empty(), "build_union: no sensors");
  const Index n = sensors.front().cols();
  const SensingKind kind = sensors.front().kind();
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    if (sensors[s].cols() != n) {
      std::ostringstream os;
      os << "build_union: sensor " << s << " has n=" << sensors[s].cols() << ", expected " << n;
      detail::throw_contract(os.str());
    }
    if (sensors[s].kind() != kind) {
      std::ostringstream os;
      os << "build_union: sensor " << s << " has kind " << to_string(sensors[s].kind())
         << ", expected " << to_string(kind);
      detail::throw_contract(os.str());
    }
  }

  UnionMatrix u;
  u.kind_ = kind;
  if (kind == SensingKind::kGaussian) {
    std::vector<Vector> rows;
    for (const auto& s : sensors) {
      const Matrix a = s.dense();
      for (Index j = 0; j < a.rows(); ++j) {
        auto key = row_key(a, j);
        if (u.by_value_.count(key)) continue;
        const auto idx = static_cast<Index>(rows.size());
        u.by_value_.emplace(std::move(key), idx);
        u.provenance_.push_back(-1 - static_cast<std::int64_t>(idx));
        rows.emplace_back(a.row(j).transpose());
      }
    }
    u.rows_.resize(static_cast<Index>(rows.size()), n);
    for (std::size_t r = 0; r < rows.size(); ++r) u.rows_.row(static_cast<Index>(r)) = rows[r].transpose();
    return u;
  }

  // Pooled kinds: ascending id order. Row contents come from the sensors themselves.
  std::map<Index, Vector> by_id;
  for (const auto& s : sensors) {
    const auto& ids = s.row_ids();
    for (Index j = 0; j < s.rows(); ++j) {
      const Index id = ids[static_cast<std::size_t>(j)];
      if (by_id.count(id)) continue;
      if (kind == SensingKind::kPixelMask) {
        Vector e = Vector::Zero(n);
        e(id) = 1.0;
        by_id.emplace(id, std::move(e));
      } else {
        by_id.emplace(id, s.dense().row(j).transpose());
      }
    }
  }
  u.rows_.resize(static_cast<Index>(by_id.size()), n);
  Index r = 0;
  for (auto& [id, row] : by_id) {
    u.rows_.row(r) = row.transpose();
    u.provenance_.push_back(id);
    u.by_id_.emplace(id, r);
    ++r;
  }
  return u;
}

MeasurementSet::MeasurementSet(Index n, std::vector<Measurement> items) : n_(n), items_(std::move(items)) {
  BCS_REQUIRE(n >= 1, "MeasurementSet: n must be positive");
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& m = items_[i];
    if (m.sensor.cols() != n || m.y.size() != m.sensor.rows()) {
      std::ostringstream os;
      os << "MeasurementSet: measurement " << i << " is inconsistent (sensor " << m.sensor.rows() << "x"
         << m.sensor.cols() << ", y of length " << m.y.size() << ", n=" << n << ")";
      detail::throw_contract(os.str());
    }
    if (!m.y.allFinite()) {
      std::ostringstream os;
      os << "MeasurementSet: measurement " << i << " has non-finite entries";
      detail::throw_contract(os.str());
    }
  }
}

Index MeasurementSet::total_measurements() const {
  Index total = 0;
  for (const auto& m : items_) total += m.sensor.rows();
  return total;
}

MeasurementSet MeasurementSet::subset(std::span<const Index> indices) const {
  std::vector<Measurement> out;
  out.reserve(indices.size());
  for (Index i : indices) {
    BCS_REQUIRE(i >= 0 && i < size(), "MeasurementSet::subset: index out of range");
    out.push_back(items_[static_cast<std::size_t>(i)]);
  }
  return MeasurementSet(n_, std::move(out));
}

std::vector<SensingMatrix> MeasurementSet::sensors(std::span<const Index> indices) const {
  std::vector<SensingMatrix> out;
  out.reserve(indices.size());
  for (Index i : indices) {
    BCS_REQUIRE(i >= 0 && i < size(), "MeasurementSet::sensors: index out of range");
    out.push_back(items_[static_cast<std::size_t>(i)].sensor);
  }
  return out;
}

MeasurementSet measure(const Matrix& signals, std::vector<SensingMatrix> sensors) {
  BCS_REQUIRE(static_cast<Index>(sensors.size()) == signals.cols(),
              "measure: need one sensing matrix per signal column");
  std::vector<Measurement> items;
  items.reserve(sensors.size());
  for (Index i = 0; i < signals.cols(); ++i) {
    auto& s = sensors[static_cast<std::size_t>(i)];
    Vector y = s.apply(Vector(signals.col(i)));
    items.push_back({std::move(s), std::move(y)});
  }
  return MeasurementSet(signals.rows(), std::move(items));
}

std::vector<std::pair<Index, Index>> ObservationMatrix::omega() const {
  std::vector<std::pair<Index, Index>> out;
  out.reserve(entries_.size());
  for (const auto& [key, value] : entries_) out.push_back(key);
  return out;
}

void ObservationMatrix::set(Index u, Index v, double value) {
  BCS_REQUIRE(u >= 0 && u < rows_ && v >= 0 && v < cols_, "ObservationMatrix::set: index out of range");
  BCS_REQUIRE(std::isfinite(value), "ObservationMatrix::set: non-finite value");
  entries_[{u, v}] = value;
}

Matrix ObservationMatrix::to_dense(double fill) const {
  Matrix out = Matrix::Constant(rows_, cols_, fill);
  for (const auto& [key, value] : entries_) out(key.first, key.second) = value;
  return out;
}

Matrix ObservationMatrix::mask() const {
  Matrix out = Matrix::Zero(rows_, cols_);
  for (const auto& [key, value] : entries_) out(key.first, key.second) = 1.0;
  return out;
}

std::vector<Index> ObservationMatrix::missing_rows() const {
  std::vector<char> seen(static_cast<std::size_t>(rows_), 0);
  for (const auto& [key, value] : entries_) seen[static_cast<std::size_t>(key.first)] = 1;
  std::vector<Index> out;
  for (Index u = 0; u < rows_; ++u)
    if (!seen[static_cast<std::size_t>(u)]) out.push_back(u);
  return out;
}

std::vector<Index> ObservationMatrix::missing_cols() const {
  std::vector<char> seen(static_cast<std::size_t>(cols_), 0);
  for (const auto& [key, value] : entries_) seen[static_cast<std::size_t>(key.second)] = 1;
  std::vector<Index> out;
  for (Index v = 0; v < cols_; ++v)
    if (!seen[static_cast<std::size_t>(v)]) out.push_back(v);
  return out;
}

ObservationMatrix assemble_observation(const MeasurementSet& measurements, std::span<const Index> signals,
                                       const UnionMatrix& uni) {
  ObservationMatrix obs(uni.rows(), static_cast<Index>(signals.size()));
  for (std::size_t v = 0; v < signals.size(); ++v) {
    const Index i = signals[v];
    BCS_REQUIRE(i >= 0 && i < measurements.size(), "assemble_observation: signal index out of range");
    const auto& m = measurements[i];
    for (Index j = 0; j < m.sensor.rows(); ++j) {
      const auto u = uni.find_row(m.sensor, j);
      if (!u) {
        std::ostringstream os;
        os << "assemble_observation: row " << j << " of signal " << i
           << " is not in the union matrix (built from a different ensemble?)";
        detail::throw_contract(os.str());
      }
      obs.set(*u, static_cast<Index>(v), m.y(j));
    }
  }
  return obs;
}

}  // namespace bcs
