#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "flexknn/errors.hpp"
#include "flexknn/rng.hpp"

namespace flexknn {

// Feature rows, integer labels in [0, num_classes), and one uniform tiebreak
// value per point. The tiebreaks implement randomized tie-breaking for equal
// distances: on a tie the point with the LARGER tiebreak wins. They are drawn
// once per dataset and are pairwise distinct, which makes every neighbor query
// a total order and therefore exactly reproducible.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  explicit LabeledDataset(std::size_t dim) : dim_(dim) {}

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return labels_.empty(); }

  void reserve(std::size_t n) {
    features_.reserve(n * dim_);
    labels_.reserve(n);
    tiebreak_.reserve(n);
  }

  void add(std::span<const double> x, int label) {
    if (dim_ == 0 && size() == 0) dim_ = x.size();
    if (x.size() != dim_) throw DimensionMismatch("row dimension does not match dataset");
    if (label < 0) throw InvalidParameter("labels must be nonnegative");
    features_.insert(features_.end(), x.begin(), x.end());
    labels_.push_back(label);
    tiebreak_.push_back(0.0);
  }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features_.data() + i * dim_, dim_);
  }
  int label(std::size_t i) const { return labels_[i]; }
  double tiebreak(std::size_t i) const { return tiebreak_[i]; }
  void set_tiebreak(std::size_t i, double u) { tiebreak_[i] = u; }

  int num_classes() const {
    if (explicit_classes_ > 0) return explicit_classes_;
    int q = 0;
    for (int l : labels_) q = std::max(q, l + 1);
    return q;
  }
  void set_num_classes(int q) {
    for (int l : labels_)
      if (l >= q) throw InvalidParameter("existing label exceeds num_classes");
    explicit_classes_ = q;
  }

  // Fresh uniform tiebreaks, regenerated until pairwise distinct.
  void assign_tiebreaks(std::uint64_t seed) {
    std::mt19937_64 eng = make_engine(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int attempt = 0; attempt < 64; ++attempt) {
      for (double& u : tiebreak_) u = unif(eng);
      std::vector<double> sorted = tiebreak_;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end()) return;
    }
    throw Error("could not draw distinct tiebreak values");
  }

  // Row subset in the given order; labels and tiebreaks travel with the rows.
  LabeledDataset subset(std::span<const std::size_t> indices) const {
    LabeledDataset out(dim_);
    out.reserve(indices.size());
    for (std::size_t i : indices) {
      out.add(row(i), labels_[i]);
      out.tiebreak_.back() = tiebreak_[i];
    }
    out.explicit_classes_ = explicit_classes_;
    return out;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
  std::vector<double> tiebreak_;
  int explicit_classes_ = 0;
};

}  // namespace flexknn
