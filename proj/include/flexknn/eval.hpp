#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "flexknn/dataset.hpp"
#include "flexknn/distance.hpp"
#include "flexknn/knn.hpp"
#include "flexknn/metric_learning.hpp"
#include "flexknn/optimize.hpp"
#include "flexknn/parallel.hpp"
#include "flexknn/rng.hpp"
#include "flexknn/stats.hpp"

namespace flexknn {

// ---------------------------------------------------------------------------
// Benchmark dataset: x uniform on [0,1]^7; with t = 2 x1, the label compares
// the two cubic polynomials p1 = x2 t + x3 t^2 + x4 t^3 and
// p2 = x5 t + x6 t^2 + x7 t^3 (label 1 iff p1 > p2). Symmetric in the two
// coefficient blocks, so the classes are balanced in distribution.
// ---------------------------------------------------------------------------

struct PolynomialDatasetPair {
  LabeledDataset train;
  LabeledDataset test;
};

inline int polynomial_label(std::span<const double> x) {
  const double t = 2.0 * x[0];
  const double p1 = x[1] * t + x[2] * t * t + x[3] * t * t * t;
  const double p2 = x[4] * t + x[5] * t * t + x[6] * t * t * t;
  return p1 > p2 ? 1 : 0;
}

inline PolynomialDatasetPair generate_polynomial_dataset(int n_train, int n_test, std::uint64_t seed) {
  if (n_train < 1 || n_test < 1) throw InvalidParameter("need positive train and test sizes");
  std::mt19937_64 eng = make_engine(child_seed(seed, 0));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto draw = [&](int n) {
    LabeledDataset ds(7);
    ds.reserve(n);
    std::vector<double> x(7);
    for (int i = 0; i < n; ++i) {
      for (double& c : x) c = unif(eng);
      ds.add(x, polynomial_label(x));
    }
    ds.set_num_classes(2);
    return ds;
  };

  PolynomialDatasetPair out;
  out.train = draw(n_train);
  out.test = draw(n_test);
  out.train.assign_tiebreaks(child_seed(seed, 1));
  out.test.assign_tiebreaks(child_seed(seed, 2));
  return out;
}

// ---------------------------------------------------------------------------
// Repeated evaluation.
// ---------------------------------------------------------------------------

// Produces a fresh (train, test) pair for a repeat. Generator-backed sources
// draw new data; file-backed sources resample disjoint subsets.
using DatasetSource = std::function<PolynomialDatasetPair(int n_train, int n_test, std::uint64_t seed)>;

inline DatasetSource polynomial_source() {
  return [](int n_train, int n_test, std::uint64_t seed) {
    return generate_polynomial_dataset(n_train, n_test, seed);
  };
}

// Shuffles the file's rows with the repeat seed and deals out disjoint train
// and test subsets.
inline DatasetSource resample_source(LabeledDataset full) {
  return [full = std::move(full)](int n_train, int n_test, std::uint64_t seed) {
    const std::size_t need = static_cast<std::size_t>(n_train) + static_cast<std::size_t>(n_test);
    if (n_train < 1 || n_test < 1) throw InvalidParameter("need positive train and test sizes");
    if (need > full.size()) throw TooSmall("dataset has fewer rows than train + test");
    std::vector<std::size_t> perm(full.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 eng = make_engine(seed);
    std::shuffle(perm.begin(), perm.end(), eng);
    PolynomialDatasetPair out;
    out.train = full.subset(std::span<const std::size_t>(perm.data(), n_train));
    out.test = full.subset(std::span<const std::size_t>(perm.data() + n_train, n_test));
    return out;
  };
}

struct EvalConfig {
  int n_train = 500;
  int n_test = 500;
  int repeats = 50;
  int k_max = 20;
  int folds = 1;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

struct TrialReport {
  std::string distance_label;
  std::vector<double> accuracies;  // one per repeat
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double alpha = 0.05;
  std::vector<int> k_selected;  // one per repeat
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> repeat_seeds;
  double wall_time_s = 0.0;
  int n_train = 0;
  int n_test = 0;
  int k_max = 0;
};

inline double knn_accuracy(const LabeledDataset& train, const LabeledDataset& test, const DistanceSpec& spec,
                           int k) {
  if (test.empty()) throw EmptyDataset("no test rows");
  std::vector<unsigned char> hit(test.size(), 0);
  parallel_for(test.size(), [&](std::size_t i) {
    hit[i] = predict(train, spec, test.row(i), k) == test.label(i) ? 1 : 0;
  });
  long good = 0;
  for (unsigned char h : hit) good += h;
  return static_cast<double>(good) / static_cast<double>(test.size());
}

// For each spec: per repeat, draw data, pick k on the training part, score on
// the test part; then aggregate into a Student-t interval. Same seed, same
// report, bit for bit.
inline std::vector<TrialReport> repeated_eval(const DatasetSource& source, const std::vector<DistanceSpec>& specs,
                                              const EvalConfig& cfg) {
  if (specs.empty()) throw InvalidParameter("need at least one distance spec");
  if (cfg.repeats < 2) throw InvalidParameter("need at least two repeats for an interval");

  std::vector<TrialReport> reports(specs.size());
  for (std::size_t s = 0; s < specs.size(); ++s) {
    TrialReport& r = reports[s];
    r.distance_label = specs[s].format();
    r.alpha = cfg.alpha;
    r.seed = cfg.seed;
    r.n_train = cfg.n_train;
    r.n_test = cfg.n_test;
    r.k_max = cfg.k_max;
    r.accuracies.resize(cfg.repeats);
    r.k_selected.resize(cfg.repeats);
    r.repeat_seeds.resize(cfg.repeats);
  }

  for (int rep = 0; rep < cfg.repeats; ++rep) {
    const std::uint64_t rep_seed = child_seed(cfg.seed, rep);
    const PolynomialDatasetPair pair = source(cfg.n_train, cfg.n_test, child_seed(rep_seed, 0));
    for (std::size_t s = 0; s < specs.size(); ++s) {
      const auto t0 = std::chrono::steady_clock::now();
      const GridSearchResult gs =
          grid_search_k(pair.train, specs[s], cfg.k_max, cfg.folds, child_seed(rep_seed, 1 + s));
      reports[s].k_selected[rep] = gs.k;
      reports[s].accuracies[rep] = knn_accuracy(pair.train, pair.test, specs[s], gs.k);
      reports[s].repeat_seeds[rep] = rep_seed;
      reports[s].wall_time_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  }

  for (TrialReport& r : reports) {
    const ConfidenceInterval ci = mean_ci(r.accuracies, cfg.alpha);
    r.mean = ci.mean;
    r.ci_lo = ci.lo;
    r.ci_hi = ci.hi;
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Repeated evaluation of locally learned distances, same reporting shape.
// Selection and voting both see the whole training sample, the protocol the
// reference accuracies were measured under; split_sample stays available for
// experiments that want the selected distance independent of the voters. The
// k grid search reuses the seed repeated_eval gives its first spec, so a run
// against the base spec compares the two rules on identical draws.
// ---------------------------------------------------------------------------

struct LocalEvalConfig {
  EvalConfig eval;
  LocalMetricQuery query;
  Optimizer optimizer = NelderMeadOptions{};
};

inline TrialReport local_knn_eval(const DatasetSource& source, const LocalEvalConfig& cfg) {
  const EvalConfig& e = cfg.eval;
  if (e.repeats < 2) throw InvalidParameter("need at least two repeats for an interval");

  TrialReport r;
  r.distance_label = "local:" + family_label(cfg.query.family);
  r.alpha = e.alpha;
  r.seed = e.seed;
  r.n_train = e.n_train;
  r.n_test = e.n_test;
  r.k_max = e.k_max;
  r.accuracies.resize(e.repeats);
  r.k_selected.resize(e.repeats);
  r.repeat_seeds.resize(e.repeats);

  const auto t0 = std::chrono::steady_clock::now();
  for (int rep = 0; rep < e.repeats; ++rep) {
    const std::uint64_t rep_seed = child_seed(e.seed, rep);
    const PolynomialDatasetPair pair = source(e.n_train, e.n_test, child_seed(rep_seed, 0));
    const SplitSample split{pair.train, pair.train};

    int k = grid_search_k(split.classify_part, cfg.query.base_spec, e.k_max, e.folds, child_seed(rep_seed, 1)).k;
    const std::size_t max_k = split.classify_part.size() / static_cast<std::size_t>(cfg.query.m);
    if (static_cast<std::size_t>(k) > max_k) k = static_cast<int>(max_k);

    std::vector<unsigned char> hit(pair.test.size(), 0);
    parallel_for(pair.test.size(), [&](std::size_t i) {
      const LocalPrediction p =
          predict_local(split, pair.test.row(i), cfg.query, cfg.optimizer, k, child_seed(rep_seed, 100 + i));
      hit[i] = p.label == pair.test.label(i) ? 1 : 0;
    });
    long good = 0;
    for (unsigned char h : hit) good += h;

    r.accuracies[rep] = static_cast<double>(good) / static_cast<double>(pair.test.size());
    r.k_selected[rep] = k;
    r.repeat_seeds[rep] = rep_seed;
  }
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const ConfidenceInterval ci = mean_ci(r.accuracies, e.alpha);
  r.mean = ci.mean;
  r.ci_lo = ci.lo;
  r.ci_hi = ci.hi;
  return r;
}

}  // namespace flexknn
