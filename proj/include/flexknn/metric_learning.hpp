#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "flexknn/dataset.hpp"
#include "flexknn/distance.hpp"
#include "flexknn/errors.hpp"
#include "flexknn/knn.hpp"
#include "flexknn/optimize.hpp"
#include "flexknn/stats.hpp"

namespace flexknn {

// ---------------------------------------------------------------------------
// Parametric distance families searched by the local metric learner.
//
// Every realization clamps / projects its parameters into the family box, so
// optimizers can roam freely: out-of-box proposals land on the boundary and
// the realized spec is always valid. Scale-like parameters (diagonal entries,
// the lp exponent, the leading polynomial coefficient) live in log space so an
// additive optimizer step means a multiplicative change.
// ---------------------------------------------------------------------------

enum class MatrixShape { diagonal, full };

struct MatrixLpFamily {
  MatrixShape shape = MatrixShape::diagonal;
  double entry_lo = 0.1;  // diagonal entries, or singular-value bounds for full matrices
  double entry_hi = 10.0;
  double p_lo = 0.5;
  double p_hi = 4.0;
};

// Matrix transform followed by a coordinate polynomial sum_i f(|v_i|) with
// f(x) = a_1 x + ... + a_deg x^deg. The leading coefficient keeps a positive
// floor so f stays strictly increasing near zero; higher coefficients may
// vanish.
struct MatrixPolynomialFamily {
  int degree = 5;
  double lead_lo = 0.1;
  double coeff_hi = 10.0;
  double entry_lo = 0.1;
  double entry_hi = 10.0;
};

using ParamFamily = std::variant<MatrixLpFamily, MatrixPolynomialFamily>;

namespace detail {

inline void validate(const MatrixLpFamily& f) {
  if (!(f.entry_lo > 0.0) || !(f.entry_hi >= f.entry_lo)) throw InvalidParameter("bad matrix entry bounds");
  if (!(f.p_lo >= 0.1) || !(f.p_hi <= 8.0) || !(f.p_lo <= f.p_hi)) throw InvalidParameter("p range must sit inside [0.1, 8]");
}

inline void validate(const MatrixPolynomialFamily& f) {
  if (f.degree < 1) throw InvalidParameter("polynomial degree must be at least 1");
  if (!(f.lead_lo > 0.0) || !(f.coeff_hi >= f.lead_lo)) throw InvalidParameter("bad polynomial coefficient bounds");
  if (!(f.entry_lo > 0.0) || !(f.entry_hi >= f.entry_lo)) throw InvalidParameter("bad matrix entry bounds");
}

inline double log_clamped(double v, double lo, double hi) { return std::log(std::clamp(v, lo, hi)); }

}  // namespace detail

inline std::size_t param_count(const ParamFamily& family, std::size_t dim) {
  if (const auto* lp = std::get_if<MatrixLpFamily>(&family))
    return (lp->shape == MatrixShape::diagonal ? dim : dim * dim) + 1;
  const auto& poly = std::get<MatrixPolynomialFamily>(family);
  return dim + static_cast<std::size_t>(poly.degree);
}

// Parameter vector whose realization is the family's identity element (or its
// projection into the box): unit matrix and p = 2, or unit matrix and f(x) = x.
inline std::vector<double> identity_params(const ParamFamily& family, std::size_t dim) {
  std::vector<double> x(param_count(family, dim), 0.0);
  if (const auto* lp = std::get_if<MatrixLpFamily>(&family)) {
    detail::validate(*lp);
    if (lp->shape == MatrixShape::diagonal) {
      for (std::size_t i = 0; i < dim; ++i) x[i] = detail::log_clamped(1.0, lp->entry_lo, lp->entry_hi);
    } else {
      const double diag = std::clamp(1.0, lp->entry_lo, lp->entry_hi);
      for (std::size_t i = 0; i < dim; ++i) x[i * dim + i] = diag;
    }
    x.back() = detail::log_clamped(2.0, lp->p_lo, lp->p_hi);
    return x;
  }
  const auto& poly = std::get<MatrixPolynomialFamily>(family);
  detail::validate(poly);
  for (std::size_t i = 0; i < dim; ++i) x[i] = detail::log_clamped(1.0, poly.entry_lo, poly.entry_hi);
  x[dim] = detail::log_clamped(1.0, poly.lead_lo, poly.coeff_hi);
  return x;
}

// Decode a raw parameter vector into a concrete DistanceSpec, projecting into
// the family box. Continuous in the parameters.
inline DistanceSpec realize_spec(const ParamFamily& family, std::size_t dim, std::span<const double> params) {
  if (params.size() != param_count(family, dim)) throw InvalidParameter("parameter vector has the wrong length");
  if (const auto* lp = std::get_if<MatrixLpFamily>(&family)) {
    detail::validate(*lp);
    const double p = std::clamp(std::exp(params.back()), lp->p_lo, lp->p_hi);
    if (lp->shape == MatrixShape::diagonal) {
      std::vector<double> diag(dim);
      for (std::size_t i = 0; i < dim; ++i) diag[i] = std::clamp(std::exp(params[i]), lp->entry_lo, lp->entry_hi);
      return DistanceSpec::with_matrix(Matrix::diagonal(diag), DistanceSpec::lp(p));
    }
    Matrix m = Matrix::from_rows(dim, dim, params.subspan(0, dim * dim));
    if (!m.all_finite()) throw InvalidParameter("matrix parameters must be finite");
    m = clamp_singular_values(m, lp->entry_lo, lp->entry_hi);
    return DistanceSpec::with_matrix(std::move(m), DistanceSpec::lp(p));
  }
  const auto& poly = std::get<MatrixPolynomialFamily>(family);
  detail::validate(poly);
  std::vector<double> diag(dim);
  for (std::size_t i = 0; i < dim; ++i) diag[i] = std::clamp(std::exp(params[i]), poly.entry_lo, poly.entry_hi);
  std::vector<double> coeffs(poly.degree, 0.0);
  coeffs[0] = std::clamp(std::exp(params[dim]), poly.lead_lo, poly.coeff_hi);
  for (int m = 2; m <= poly.degree; ++m) coeffs[m - 1] = std::clamp(params[dim + m - 1], 0.0, poly.coeff_hi);
  return DistanceSpec::with_matrix(Matrix::diagonal(diag), DistanceSpec::polynomial(std::move(coeffs)));
}

inline std::string family_label(const ParamFamily& family) {
  if (const auto* lp = std::get_if<MatrixLpFamily>(&family)) {
    std::string out = lp->shape == MatrixShape::diagonal ? "matlp:diag" : "matlp:full";
    out += "," + detail::format_double(lp->entry_lo) + "," + detail::format_double(lp->entry_hi);
    out += ",p," + detail::format_double(lp->p_lo) + "," + detail::format_double(lp->p_hi);
    return out;
  }
  const auto& poly = std::get<MatrixPolynomialFamily>(family);
  return "matpoly:deg" + std::to_string(poly.degree);
}

// ---------------------------------------------------------------------------
// Sample splitting and the correlation objective.
// ---------------------------------------------------------------------------

// Disjoint halves of a training set: one part supplies the voting neighbors,
// the other drives distance selection. Keeping them disjoint keeps the
// selected distance independent of the points that vote.
struct SplitSample {
  LabeledDataset classify_part;
  LabeledDataset select_part;
};

inline SplitSample split_sample(const LabeledDataset& ds, double proportion, std::uint64_t seed) {
  if (!(proportion > 0.0) || !(proportion < 1.0)) throw InvalidParameter("split proportion must lie in (0, 1)");
  const std::size_t n = ds.size();
  if (n < 2) throw TooSmall("need at least two points to split");
  std::size_t classify_n = static_cast<std::size_t>(std::lround(proportion * static_cast<double>(n)));
  classify_n = std::clamp<std::size_t>(classify_n, 1, n - 1);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 eng = make_engine(seed);
  std::shuffle(perm.begin(), perm.end(), eng);

  SplitSample out;
  out.classify_part = ds.subset(std::span<const std::size_t>(perm.data(), classify_n));
  out.select_part = ds.subset(std::span<const std::size_t>(perm.data() + classify_n, n - classify_n));
  return out;
}

// Pearson correlation between the distances from a training query to its
// neighbors and the indicator of label agreement. A good local distance makes
// this strongly negative: nearby points share the query's label, far ones do
// not. Throws DegenerateVariance when either side is constant.
inline double label_agreement_correlation(const LabeledDataset& ds, std::size_t tq_index,
                                          std::span<const std::size_t> neighbor_indices,
                                          const DistanceSpec& spec) {
  std::vector<double> x;
  std::vector<double> y;
  x.reserve(neighbor_indices.size());
  y.reserve(neighbor_indices.size());
  for (std::size_t j : neighbor_indices) {
    if (j == tq_index) continue;
    x.push_back(distance(spec, ds.row(tq_index), ds.row(j)));
    y.push_back(ds.label(tq_index) == ds.label(j) ? 1.0 : 0.0);
  }
  return pearson_correlation(x, y);
}

// Everything predict-time code wants to configure about local selection.
struct LocalMetricQuery {
  int k1 = 10;  // training queries drawn from the query's neighborhood
  int k2 = 50;  // neighborhood each training query is correlated against
  int m = 5;    // candidate support is the m*k base-spec nearest
  DistanceSpec base_spec = DistanceSpec::euclidean();
  ParamFamily family = MatrixLpFamily{};
  int optimizer_budget = 150;  // Nelder-Mead iterations / annealing evaluations
  // Minimum objective improvement over the identity point before the
  // optimized parameters are kept, in units of the null standard error of a
  // Pearson estimate over one neighborhood (1/sqrt(pairs)). Derivative-free
  // search can always carve ~1 se off the objective by fitting noise in a
  // ~50-point neighborhood, and such adaptations re-rank neighbors worse than
  // the identity they replaced. Values <= 0 keep every improvement.
  double min_gain_se = 1.0;
  // When set, correlations use distances measured from the classification
  // query itself rather than from each training query. Off by default: the
  // query's coordinates then only steer which neighborhood is scored.
  bool correlate_from_query = false;
};

// Precomputed difference vectors and agreement flags for one query
// neighborhood, so objective evaluations cost one spec evaluation per pair.
struct LocalObjectiveContext {
  std::size_t dim = 0;
  std::size_t k1 = 0;
  std::size_t pairs_per_tq = 0;
  std::vector<double> diffs;   // k1 * pairs_per_tq * dim, row-major
  std::vector<double> agrees;  // k1 * pairs_per_tq
};

inline LocalObjectiveContext make_local_context(const LabeledDataset& ds, std::span<const double> query,
                                                const LocalMetricQuery& q) {
  if (ds.empty()) throw EmptySelectSet("selection set is empty");
  if (q.k1 < 1 || q.k2 < q.k1) throw InvalidParameter("need 1 <= k1 <= k2");
  if (q.k2 < 2) throw InvalidParameter("k2 must be at least 2");

  const NeighborSet hood = neighbors(ds, q.base_spec, query, q.k2);
  LocalObjectiveContext ctx;
  ctx.dim = ds.dim();
  ctx.k1 = static_cast<std::size_t>(q.k1);
  ctx.pairs_per_tq = hood.indices.size() - 1;
  ctx.diffs.reserve(ctx.k1 * ctx.pairs_per_tq * ctx.dim);
  ctx.agrees.reserve(ctx.k1 * ctx.pairs_per_tq);

  for (std::size_t t = 0; t < ctx.k1; ++t) {
    const std::size_t tq = hood.indices[t];
    const std::span<const double> anchor = q.correlate_from_query ? query : ds.row(tq);
    for (std::size_t jj = 0; jj < hood.indices.size(); ++jj) {
      const std::size_t j = hood.indices[jj];
      if (j == tq) continue;
      const std::span<const double> other = ds.row(j);
      for (std::size_t c = 0; c < ctx.dim; ++c) ctx.diffs.push_back(anchor[c] - other[c]);
      ctx.agrees.push_back(ds.label(tq) == ds.label(j) ? 1.0 : 0.0);
    }
  }
  return ctx;
}

// Mean label-agreement correlation over the k1 training queries; lower is
// better. Training queries whose correlation is undefined (constant distances,
// all-agreeing labels, or a single pair) contribute zero: they carry no signal
// either way.
inline double local_objective_from_context(const LocalObjectiveContext& ctx, const DistanceSpec& candidate) {
  std::vector<double> x(ctx.pairs_per_tq);
  double total = 0.0;
  const double* diff = ctx.diffs.data();
  const double* agree = ctx.agrees.data();
  for (std::size_t t = 0; t < ctx.k1; ++t) {
    for (std::size_t p = 0; p < ctx.pairs_per_tq; ++p, diff += ctx.dim)
      x[p] = candidate.evaluate(std::span<const double>(diff, ctx.dim));
    double corr = 0.0;
    try {
      corr = pearson_correlation(x, std::span<const double>(agree, ctx.pairs_per_tq));
    } catch (const DegenerateVariance&) {
      corr = 0.0;
    } catch (const TooFew&) {
      corr = 0.0;
    }
    total += corr;
    agree += ctx.pairs_per_tq;
  }
  return total / static_cast<double>(ctx.k1);
}

inline double local_objective(const LabeledDataset& ds, std::span<const double> query,
                              std::span<const double> params, const LocalMetricQuery& q) {
  const LocalObjectiveContext ctx = make_local_context(ds, query, q);
  return local_objective_from_context(ctx, realize_spec(q.family, ds.dim(), params));
}

// ---------------------------------------------------------------------------
// Local distance selection and prediction.
// ---------------------------------------------------------------------------

struct LearnedLocalSpec {
  DistanceSpec spec = DistanceSpec::euclidean();
  std::vector<double> params;
  double objective_identity = 0.0;
  double objective_best = 0.0;
  bool fell_back = false;  // optimizer failed to beat the identity start by the required margin
};

inline LearnedLocalSpec select_local_distance(const SplitSample& split, std::span<const double> query,
                                              const LocalMetricQuery& q, const Optimizer& optimizer,
                                              std::uint64_t seed) {
  if (split.select_part.empty()) throw EmptySelectSet("selection set is empty");
  const std::size_t dim = split.select_part.dim();
  const LocalObjectiveContext ctx = make_local_context(split.select_part, query, q);

  auto objective = [&](const std::vector<double>& params) {
    return local_objective_from_context(ctx, realize_spec(q.family, dim, params));
  };

  std::vector<double> x0 = identity_params(q.family, dim);
  const double f0 = objective(x0);

  Optimizer opt = optimizer;
  if (auto* nm = std::get_if<NelderMeadOptions>(&opt)) {
    nm->max_iter = std::min(nm->max_iter, q.optimizer_budget);
  } else if (auto* sa = std::get_if<AnnealingOptions>(&opt)) {
    sa->max_evals = std::min(sa->max_evals, q.optimizer_budget);
    sa->seed = seed;
  }
  OptResult res = optimize(opt, objective, x0);

  const double margin =
      q.min_gain_se > 0.0 ? q.min_gain_se / std::sqrt(static_cast<double>(ctx.pairs_per_tq)) : 0.0;
  LearnedLocalSpec out;
  out.objective_identity = f0;
  if (res.f <= f0 - margin) {
    out.params = std::move(res.x);
    out.objective_best = res.f;
  } else {
    out.params = std::move(x0);
    out.objective_best = f0;
    out.fell_back = true;
  }
  out.spec = realize_spec(q.family, dim, out.params);
  return out;
}

struct LocalPrediction {
  int label = 0;
  std::vector<std::size_t> support;  // indices into classify_part, base-spec order
  LearnedLocalSpec learned;
};

// Locally adaptive k-NN: take the m*k base-spec nearest classify-part points
// as the support, learn a local spec on the select part, re-rank the support
// under the learned spec, and vote among the best k.
inline LocalPrediction predict_local(const SplitSample& split, std::span<const double> query,
                                     const LocalMetricQuery& q, const Optimizer& optimizer, int k,
                                     std::uint64_t seed) {
  if (k < 1) throw InvalidParameter("k must be at least 1");
  if (q.m < 1) throw InvalidParameter("support multiplier m must be at least 1");
  const std::size_t mk = static_cast<std::size_t>(q.m) * static_cast<std::size_t>(k);
  if (mk > split.classify_part.size()) throw KTooLarge("m*k exceeds the classify part");

  LocalPrediction out;
  const NeighborSet base = neighbors(split.classify_part, q.base_spec, query, static_cast<int>(mk));
  out.support = base.indices;
  out.learned = select_local_distance(split, query, q, optimizer, seed);

  const LabeledDataset pool = split.classify_part.subset(out.support);
  const NeighborSet local = neighbors(pool, out.learned.spec, query, k);
  const int classes = split.classify_part.num_classes();
  out.label = classes <= 2 ? predict_binary(pool, local) : predict_multiclass(pool, local, classes);
  return out;
}

}  // namespace flexknn
