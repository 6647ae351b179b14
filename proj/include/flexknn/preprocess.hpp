#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "flexknn/dataset.hpp"
#include "flexknn/errors.hpp"
#include "flexknn/matrix.hpp"
#include "flexknn/rng.hpp"

namespace flexknn {

// Per-coordinate min/max learned from training data only. Applying to other
// data uses the training ranges verbatim; values outside land outside [0, 1].
struct ScalerParams {
  std::vector<double> lo;
  std::vector<double> hi;
};

inline ScalerParams minmax_fit(const LabeledDataset& train) {
  if (train.empty()) throw EmptyDataset("cannot fit a scaler on an empty dataset");
  ScalerParams p;
  p.lo.assign(train.dim(), std::numeric_limits<double>::infinity());
  p.hi.assign(train.dim(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::span<const double> row = train.row(i);
    for (std::size_t c = 0; c < train.dim(); ++c) {
      p.lo[c] = std::min(p.lo[c], row[c]);
      p.hi[c] = std::max(p.hi[c], row[c]);
    }
  }
  return p;
}

// Constant training columns map to 0 everywhere.
inline LabeledDataset minmax_apply(const LabeledDataset& ds, const ScalerParams& p) {
  if (p.lo.size() != ds.dim()) throw DimensionMismatch("scaler dimension does not match dataset");
  LabeledDataset out(ds.dim());
  out.reserve(ds.size());
  std::vector<double> row(ds.dim());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::span<const double> src = ds.row(i);
    for (std::size_t c = 0; c < ds.dim(); ++c) {
      const double range = p.hi[c] - p.lo[c];
      row[c] = range > 0.0 ? (src[c] - p.lo[c]) / range : 0.0;
    }
    out.add(row, ds.label(i));
    out.set_tiebreak(i, ds.tiebreak(i));
  }
  out.set_num_classes(ds.num_classes());
  return out;
}

struct MinMaxResult {
  LabeledDataset train;
  LabeledDataset test;
  ScalerParams params;
};

inline MinMaxResult minmax_fit_transform(const LabeledDataset& train, const LabeledDataset& test) {
  MinMaxResult out;
  out.params = minmax_fit(train);
  out.train = minmax_apply(train, out.params);
  out.test = minmax_apply(test, out.params);
  return out;
}

// Principal components via the symmetric Jacobi eigensolver on the sample
// covariance. Components are orthonormal columns, sorted by explained
// variance.
struct PcaModel {
  std::vector<double> mean;
  Matrix components;               // dim x retained
  std::vector<double> eigenvalues; // descending, one per retained component
};

inline PcaModel pca_fit(const LabeledDataset& train, int retained) {
  const std::size_t n = train.size();
  const std::size_t d = train.dim();
  if (n < 2) throw TooSmall("pca needs at least two rows");
  if (retained < 1 || static_cast<std::size_t>(retained) > std::min(n - 1, d))
    throw RankTooSmall("retained components must lie in [1, min(n-1, d)]");

  PcaModel model;
  model.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> row = train.row(i);
    for (std::size_t c = 0; c < d; ++c) model.mean[c] += row[c];
  }
  for (double& m : model.mean) m /= static_cast<double>(n);

  Matrix cov(d, d);
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> row = train.row(i);
    for (std::size_t c = 0; c < d; ++c) centered[c] = row[c] - model.mean[c];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) cov(a, b) += centered[a] * centered[b];
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      cov(a, b) /= static_cast<double>(n - 1);
      cov(b, a) = cov(a, b);
    }

  const EigenDecomposition eig = jacobi_eigen_sym(cov);
  model.components = Matrix(d, retained);
  model.eigenvalues.assign(eig.values.begin(), eig.values.begin() + retained);
  for (int j = 0; j < retained; ++j)
    for (std::size_t i = 0; i < d; ++i) model.components(i, j) = eig.vectors(i, j);
  return model;
}

inline LabeledDataset pca_apply(const PcaModel& model, const LabeledDataset& ds) {
  if (ds.dim() != model.mean.size()) throw DimensionMismatch("pca dimension does not match dataset");
  const std::size_t r = model.components.cols();
  LabeledDataset out(r);
  out.reserve(ds.size());
  std::vector<double> proj(r);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::span<const double> row = ds.row(i);
    for (std::size_t j = 0; j < r; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < ds.dim(); ++c) acc += (row[c] - model.mean[c]) * model.components(c, j);
      proj[j] = acc;
    }
    out.add(proj, ds.label(i));
    out.set_tiebreak(i, ds.tiebreak(i));
  }
  out.set_num_classes(ds.num_classes());
  return out;
}

// Coordinate-wise median per class; even counts take the midpoint of the two
// middle values.
inline std::vector<std::vector<double>> median_centroids(const LabeledDataset& ds) {
  const int q = ds.num_classes();
  if (q < 1 || ds.empty()) throw EmptyDataset("median centroids need data");
  std::vector<std::vector<std::size_t>> members(q);
  for (std::size_t i = 0; i < ds.size(); ++i) members[ds.label(i)].push_back(i);

  std::vector<std::vector<double>> out(q, std::vector<double>(ds.dim(), 0.0));
  std::vector<double> column;
  for (int c = 0; c < q; ++c) {
    if (members[c].empty()) throw ClassTooSmall("class " + std::to_string(c) + " has no points");
    for (std::size_t col = 0; col < ds.dim(); ++col) {
      column.clear();
      for (std::size_t i : members[c]) column.push_back(ds.row(i)[col]);
      std::sort(column.begin(), column.end());
      const std::size_t m = column.size();
      out[c][col] = m % 2 == 1 ? column[m / 2] : 0.5 * (column[m / 2 - 1] + column[m / 2]);
    }
  }
  return out;
}

// One uniformly chosen point per class goes to the test side, the rest train.
struct StratifiedSplit {
  LabeledDataset train;
  LabeledDataset test;
};

inline StratifiedSplit stratified_leave_one_per_class(const LabeledDataset& ds, std::uint64_t seed) {
  const int q = ds.num_classes();
  std::vector<std::vector<std::size_t>> members(q);
  for (std::size_t i = 0; i < ds.size(); ++i) members[ds.label(i)].push_back(i);
  std::mt19937_64 eng = make_engine(seed);

  std::vector<std::size_t> test_rows;
  for (int c = 0; c < q; ++c) {
    if (members[c].size() < 2) throw ClassTooSmall("class " + std::to_string(c) + " needs at least two points");
    std::uniform_int_distribution<std::size_t> pick(0, members[c].size() - 1);
    test_rows.push_back(members[c][pick(eng)]);
  }
  std::vector<std::size_t> train_rows;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (std::find(test_rows.begin(), test_rows.end(), i) == test_rows.end()) train_rows.push_back(i);

  StratifiedSplit out;
  out.train = ds.subset(train_rows);
  out.test = ds.subset(test_rows);
  return out;
}

}  // namespace flexknn
