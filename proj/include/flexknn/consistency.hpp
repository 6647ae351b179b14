#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "flexknn/distance.hpp"
#include "flexknn/distributions.hpp"
#include "flexknn/knn.hpp"
#include "flexknn/parallel.hpp"
#include "flexknn/rng.hpp"

namespace flexknn {

struct ErrorEstimate {
  int n = 0;
  int k = 0;
  long trials = 0;
  double error = 0.0;
  double std_err = 0.0;
};

// A prediction rule: fresh training sample plus query in, label out.
using PredictionRule = std::function<int(const LabeledDataset&, std::span<const double>)>;

inline PredictionRule knn_rule(DistanceSpec spec, int k) {
  return [spec = std::move(spec), k](const LabeledDataset& ds, std::span<const double> query) {
    return predict(ds, spec, query, k);
  };
}

inline PredictionRule constant_rule(int label) {
  return [label](const LabeledDataset&, std::span<const double>) { return label; };
}

// Long-run error of a rule: each trial draws a fresh n-point sample and an
// independent query from the same distribution, applies the rule, and scores
// the mismatch. Trials are independent work items with derived seeds, so the
// estimate does not depend on thread count or scheduling.
inline ErrorEstimate estimate_error(const SyntheticDistribution& dist, const PredictionRule& rule, int n, int k,
                                    long trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidParameter("need at least one trial");
  std::vector<unsigned char> wrong(static_cast<std::size_t>(trials), 0);
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    const std::uint64_t ts = child_seed(seed, t);
    const LabeledDataset ds = dist.sample(n, child_seed(ts, 0));
    std::mt19937_64 eng = make_engine(child_seed(ts, 1));
    const auto [query, truth] = dist.sample_query(eng);
    wrong[t] = rule(ds, query) != truth ? 1 : 0;
  });
  long bad = 0;
  for (unsigned char w : wrong) bad += w;

  ErrorEstimate out;
  out.n = n;
  out.k = k;
  out.trials = trials;
  out.error = static_cast<double>(bad) / static_cast<double>(trials);
  out.std_err = std::sqrt(out.error * (1.0 - out.error) / static_cast<double>(trials));
  return out;
}

// ---------------------------------------------------------------------------
// Sample-size-dependent norm schedules on the two-segments distribution.
// rho_n(v) = |diag(a_n, b_n) v|_inf with the horizontal scale racing away from
// (or collapsing onto) the vertical one. Both schedules make the k-NN vote a
// coin flip even though each individual rho_n is a perfectly good norm.
// ---------------------------------------------------------------------------

enum class BadNormSchedule { unbounded_above, unbounded_below };

inline double schedule_a(BadNormSchedule s, int n) {
  return s == BadNormSchedule::unbounded_above ? static_cast<double>(n) * n : 1.0;
}

inline double schedule_b(BadNormSchedule s, int n) {
  return s == BadNormSchedule::unbounded_above ? 1.0 : 1.0 / (static_cast<double>(n) * n);
}

inline DistanceSpec schedule_spec(BadNormSchedule s, int n) {
  if (n < 1) throw InvalidParameter("schedule needs n >= 1");
  return DistanceSpec::with_matrix(Matrix::diagonal({schedule_a(s, n), schedule_b(s, n)}),
                                   DistanceSpec::lp_inf());
}

// k-NN error under the schedule's norm at sample size n. k must be odd so a
// vote can't tie (ties would add a bias term of their own).
inline ErrorEstimate bad_norm_error(BadNormSchedule s, int n, int k, long trials, std::uint64_t seed) {
  if (k % 2 == 0) throw InvalidParameter("bad-norm experiments require odd k");
  return estimate_error(SyntheticDistribution::two_segments(), knn_rule(schedule_spec(s, n), k), n, k, trials,
                        seed);
}

// P(all n sample points are farther than b_n from the query, under rho_n)
// is at least (1 - 2 b_n / a_n)^n.
inline double far_probability_bound(double a, double b, int n) {
  return std::pow(std::max(0.0, 1.0 - 2.0 * b / a), n);
}

struct FarProbability {
  int n = 0;
  long trials = 0;
  double empirical = 0.0;
  double std_err = 0.0;
  double lower_bound = 0.0;
};

inline FarProbability far_probability(BadNormSchedule s, int n, long trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidParameter("need at least one trial");
  const DistanceSpec spec = schedule_spec(s, n);
  const double threshold = schedule_b(s, n);
  const SyntheticDistribution dist = SyntheticDistribution::two_segments();

  std::vector<unsigned char> all_far(static_cast<std::size_t>(trials), 0);
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    const std::uint64_t ts = child_seed(seed, t);
    const LabeledDataset ds = dist.sample(n, child_seed(ts, 0));
    std::mt19937_64 eng = make_engine(child_seed(ts, 1));
    const auto [query, truth] = dist.sample_query(eng);
    (void)truth;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (!(distance(spec, query, ds.row(i)) > threshold)) return;
    }
    all_far[t] = 1;
  });
  long far = 0;
  for (unsigned char w : all_far) far += w;

  FarProbability out;
  out.n = n;
  out.trials = trials;
  out.empirical = static_cast<double>(far) / static_cast<double>(trials);
  out.std_err = std::sqrt(out.empirical * (1.0 - out.empirical) / static_cast<double>(trials));
  out.lower_bound = far_probability_bound(schedule_a(s, n), schedule_b(s, n), n);
  return out;
}

// ---------------------------------------------------------------------------
// Per-point norms on the quarter circle. Point i sits at angle
// theta_i = (i-1) pi / (2n); its norm rotates that angle onto the x-axis and
// then doubles the y-coordinate before taking the Euclidean norm. Under its
// OWN norm every point is strictly nearer to the origin than any other sample
// point, even as n grows without bound: per-point norm choice can cheat.
// ---------------------------------------------------------------------------

struct CircleCounterexample {
  int n = 0;
  std::vector<unsigned char> per_point_ok;
  bool all_ok = true;
};

inline CircleCounterexample circle_counterexample(int n) {
  if (n < 1) throw InvalidParameter("circle counterexample needs n >= 1");
  const double pi = std::acos(-1.0);
  std::vector<std::vector<double>> pts(n, std::vector<double>(2));
  for (int i = 0; i < n; ++i) {
    const double theta = (static_cast<double>(i) * pi) / (2.0 * n);
    pts[i][0] = std::cos(theta);
    pts[i][1] = std::sin(theta);
  }

  CircleCounterexample out;
  out.n = n;
  out.per_point_ok.assign(n, 1);
  for (int i = 0; i < n; ++i) {
    const double theta = (static_cast<double>(i) * pi) / (2.0 * n);
    const DistanceSpec rho_i = DistanceSpec::with_matrix(
        Matrix::diagonal({1.0, 2.0}) * Matrix::rotation2d(-theta), DistanceSpec::lp(2.0));
    const double self = rho_i.evaluate(pts[i]);
    for (int j = 0; j < n && out.per_point_ok[i]; ++j) {
      if (j == i) continue;
      if (!(rho_i.evaluate(pts[j]) > self + 1e-9)) out.per_point_ok[i] = 0;
    }
    if (!out.per_point_ok[i]) out.all_ok = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Label-dependent weights. The rule votes with weight 1/k on the k nearest
// label-0 points among the 5k Euclidean nearest, topping up with the nearest
// label-1 points when there are fewer than k zeros. On a distribution whose
// labels carry no positional information this drives the error to 2/3 -- twice
// the Bayes error -- although the weights still sum to one and live on the 5k
// nearest points.
// ---------------------------------------------------------------------------

inline PredictionRule label_dependent_rule(int k) {
  return [k](const LabeledDataset& ds, std::span<const double> query) {
    const std::size_t want = 5 * static_cast<std::size_t>(k);
    if (want > ds.size()) throw KTooLarge("label-dependent rule needs 5k <= n");
    const NeighborSet ns = neighbors(ds, DistanceSpec::euclidean(), query, static_cast<int>(want));
    int zeros = 0;
    for (std::size_t i : ns.indices)
      if (ds.label(i) == 0 && zeros < k) ++zeros;
    const int ones = k - zeros;  // top-up uses label-1 points, nearest first
    return 2 * ones >= k ? 1 : 0;
  };
}

struct LabelWeightExperiment {
  ErrorEstimate biased;  // label-dependent weights
  ErrorEstimate plain;   // ordinary k-NN, same n / k / trial stream
};

inline LabelWeightExperiment label_dependent_rule_error(int n, int k, long trials, std::uint64_t seed,
                                                        int dim = 2) {
  const SyntheticDistribution dist = SyntheticDistribution::label_independent_gaussian(dim);
  LabelWeightExperiment out;
  out.biased = estimate_error(dist, label_dependent_rule(k), n, k, trials, seed);
  out.plain = estimate_error(dist, knn_rule(DistanceSpec::euclidean(), k), n, k, trials, seed);
  return out;
}

}  // namespace flexknn
