#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "flexknn/dataset.hpp"
#include "flexknn/distance.hpp"
#include "flexknn/errors.hpp"

namespace flexknn {

// The k nearest points of a query, sorted by (distance ascending, tiebreak
// descending). Tiebreaks are pairwise distinct, so the order is total and the
// result does not depend on how the selection was computed. `degenerate` is
// set when every selected distance is +inf (the spec saw nothing it considers
// finite reachable).
struct NeighborSet {
  std::vector<std::size_t> indices;
  std::vector<double> distances;
  bool degenerate = false;
  int k() const { return static_cast<int>(indices.size()); }
};

inline NeighborSet neighbors(const LabeledDataset& ds, const DistanceSpec& spec, std::span<const double> query,
                             int k) {
  const std::size_t n = ds.size();
  if (k < 1) throw InvalidParameter("k must be at least 1");
  if (static_cast<std::size_t>(k) > n) throw KTooLarge("k exceeds dataset size");
  if (query.size() != ds.dim()) throw DimensionMismatch("query dimension does not match dataset");

  thread_local std::vector<double> dist;
  thread_local std::vector<std::size_t> order;
  dist.resize(n);
  order.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = distance(spec, query, ds.row(i));
    order[i] = i;
  }

  // Total order: nearer first; on equal distance the larger tiebreak wins.
  auto before = [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return ds.tiebreak(a) > ds.tiebreak(b);
  };
  if (static_cast<std::size_t>(k) < n)
    std::nth_element(order.begin(), order.begin() + k, order.end(), before);
  std::sort(order.begin(), order.begin() + k, before);

  NeighborSet out;
  out.indices.assign(order.begin(), order.begin() + k);
  out.distances.resize(k);
  out.degenerate = true;
  for (int i = 0; i < k; ++i) {
    out.distances[i] = dist[out.indices[i]];
    if (std::isfinite(out.distances[i])) out.degenerate = false;
  }
  return out;
}

// Uniform weights 1/k on the selected points, zero elsewhere.
inline std::vector<double> weight_vector(const NeighborSet& ns, std::size_t n) {
  std::vector<double> w(n, 0.0);
  const double share = 1.0 / ns.k();
  for (std::size_t i : ns.indices) w[i] = share;
  return w;
}

// Fraction of label-1 points among the neighbors. Binary labels only.
inline double regression_estimate(const LabeledDataset& ds, const NeighborSet& ns) {
  int ones = 0;
  for (std::size_t i : ns.indices) {
    const int l = ds.label(i);
    if (l != 0 && l != 1) throw NotBinary("regression estimate needs labels in {0, 1}");
    ones += l;
  }
  return static_cast<double>(ones) / ns.k();
}

// Votes 1 exactly when the regression estimate reaches 1/2; an even split is
// a 1-vote. Integer comparison, so there is no rounding edge.
inline int predict_binary(const LabeledDataset& ds, const NeighborSet& ns) {
  int ones = 0;
  for (std::size_t i : ns.indices) {
    const int l = ds.label(i);
    if (l != 0 && l != 1) throw NotBinary("binary prediction needs labels in {0, 1}");
    ones += l;
  }
  return 2 * ones >= ns.k() ? 1 : 0;
}

// Plurality vote; ties go to the smallest label index.
inline int predict_multiclass(const LabeledDataset& ds, const NeighborSet& ns, int num_classes) {
  if (num_classes < 1) throw InvalidParameter("need at least one class");
  std::vector<int> counts(num_classes, 0);
  for (std::size_t i : ns.indices) {
    const int l = ds.label(i);
    if (l >= num_classes) throw InvalidParameter("label exceeds num_classes");
    ++counts[l];
  }
  int best = 0;
  for (int c = 1; c < num_classes; ++c)
    if (counts[c] > counts[best]) best = c;
  return best;
}

inline int predict(const LabeledDataset& ds, const DistanceSpec& spec, std::span<const double> query, int k) {
  const NeighborSet ns = neighbors(ds, spec, query, k);
  const int q = ds.num_classes();
  return q <= 2 ? predict_binary(ds, ns) : predict_multiclass(ds, ns, q);
}

// Predictions for every k in [1, ns.k()] from a single neighbor pass: the
// k-neighborhood is always a prefix of the sorted list, so the votes can be
// accumulated incrementally. pred[k-1] equals predict(..., k) exactly.
inline std::vector<int> prefix_predictions(const LabeledDataset& ds, const NeighborSet& ns, int num_classes) {
  std::vector<int> out(ns.k());
  if (num_classes <= 2) {
    int ones = 0;
    for (int k = 1; k <= ns.k(); ++k) {
      const int l = ds.label(ns.indices[k - 1]);
      if (l != 0 && l != 1) throw NotBinary("binary prediction needs labels in {0, 1}");
      ones += l;
      out[k - 1] = 2 * ones >= k ? 1 : 0;
    }
    return out;
  }
  std::vector<int> counts(num_classes, 0);
  int best = 0;
  for (int k = 1; k <= ns.k(); ++k) {
    const int l = ds.label(ns.indices[k - 1]);
    if (l >= num_classes) throw InvalidParameter("label exceeds num_classes");
    ++counts[l];
    if (counts[l] > counts[best] || (counts[l] == counts[best] && l < best)) best = l;
    out[k - 1] = best;
  }
  return out;
}

}  // namespace flexknn
