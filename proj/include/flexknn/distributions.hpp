#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "flexknn/dataset.hpp"
#include "flexknn/errors.hpp"
#include "flexknn/rng.hpp"

namespace flexknn {

// Synthetic binary-label distributions with known Bayes error, used to
// measure long-run classifier behavior against exact targets.
//
//   deterministic_concept  1-D: mass 1/2 at x = 0 with label 0, otherwise x
//                          uniform on (0, 1] with label 1. Bayes error 0.
//   fuzzy_concept          1-D: x uniform on [0, 1], label 1 with probability
//                          2/3 independently of x. Bayes error 1/3.
//   two_segments           2-D: (x, 0) labeled 0 or (x, 1) labeled 1 with
//                          equal probability, x uniform. Bayes error 0.
//   label_independent_gaussian  d-dim standard normal, label 1 with
//                          probability 2/3 independent of position. Bayes 1/3.
class SyntheticDistribution {
 public:
  enum class Kind { deterministic_concept, fuzzy_concept, two_segments, label_independent_gaussian };

  static SyntheticDistribution deterministic_concept() { return {Kind::deterministic_concept, 1, 0.0}; }
  static SyntheticDistribution fuzzy_concept() { return {Kind::fuzzy_concept, 1, 1.0 / 3.0}; }
  static SyntheticDistribution two_segments() { return {Kind::two_segments, 2, 0.0}; }
  static SyntheticDistribution label_independent_gaussian(int dim = 2) {
    if (dim < 1) throw InvalidParameter("gaussian distribution needs dim >= 1");
    return {Kind::label_independent_gaussian, dim, 1.0 / 3.0};
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double bayes_error() const { return bayes_; }
  int num_classes() const { return 2; }

  void sample_point(std::mt19937_64& eng, std::vector<double>& x, int& label) const {
    x.resize(dim_);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    switch (kind_) {
      case Kind::deterministic_concept: {
        if (unif(eng) < 0.5) {
          x[0] = 0.0;
          label = 0;
        } else {
          x[0] = 1.0 - unif(eng);  // uniform on (0, 1]
          label = 1;
        }
        return;
      }
      case Kind::fuzzy_concept: {
        x[0] = unif(eng);
        label = unif(eng) < 2.0 / 3.0 ? 1 : 0;
        return;
      }
      case Kind::two_segments: {
        x[0] = unif(eng);
        label = unif(eng) < 0.5 ? 0 : 1;
        x[1] = static_cast<double>(label);
        return;
      }
      case Kind::label_independent_gaussian: {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (double& c : x) c = normal(eng);
        label = unif(eng) < 2.0 / 3.0 ? 1 : 0;
        return;
      }
    }
  }

  // n i.i.d. points with tiebreaks attached; fully determined by the seed.
  LabeledDataset sample(int n, std::uint64_t seed) const {
    if (n < 1) throw InvalidParameter("sample size must be positive");
    std::mt19937_64 eng = make_engine(child_seed(seed, 0));
    LabeledDataset ds(static_cast<std::size_t>(dim_));
    ds.reserve(n);
    std::vector<double> x;
    int label = 0;
    for (int i = 0; i < n; ++i) {
      sample_point(eng, x, label);
      ds.add(x, label);
    }
    ds.set_num_classes(2);
    ds.assign_tiebreaks(child_seed(seed, 1));
    return ds;
  }

  std::pair<std::vector<double>, int> sample_query(std::mt19937_64& eng) const {
    std::vector<double> x;
    int label = 0;
    sample_point(eng, x, label);
    return {std::move(x), label};
  }

 private:
  SyntheticDistribution(Kind k, int dim, double bayes) : kind_(k), dim_(dim), bayes_(bayes) {}
  Kind kind_;
  int dim_;
  double bayes_;
};

}  // namespace flexknn
