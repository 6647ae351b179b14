#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <variant>
#include <vector>

#include "flexknn/dataset.hpp"
#include "flexknn/errors.hpp"
#include "flexknn/knn.hpp"
#include "flexknn/rng.hpp"

namespace flexknn {

struct OptResult {
  std::vector<double> x;
  double f = 0.0;
  int evals = 0;
  int iterations = 0;
  bool converged = false;
};

struct NelderMeadOptions {
  double reflect = 1.0;
  double expand = 2.0;
  double contract = 0.5;
  double shrink = 0.5;
  double tol = 1e-10;  // stop when the f-spread across the simplex drops below this
  int max_iter = 1000;
};

// Nelder-Mead downhill simplex. Deterministic: no randomness, ties in vertex
// ordering resolved by insertion order. The best vertex never regresses, so
// the result is never worse than f(x0).
template <typename F>
OptResult nelder_mead(F&& f, std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  if (n == 0) throw InvalidParameter("nelder_mead needs at least one parameter");

  int evals = 0;
  auto call = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    if (std::isnan(v)) throw NonFiniteObjective("objective returned NaN");
    return v;
  };

  // Initial simplex: x0 plus one vertex per axis, displaced by a step that
  // scales with the coordinate but never vanishes.
  std::vector<std::vector<double>> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (std::size_t i = 0; i < n; ++i) xs[i + 1][i] += std::max(0.05 * std::fabs(x0[i]), 0.1);
  for (std::size_t i = 0; i <= n; ++i) fs[i] = call(xs[i]);

  std::vector<std::size_t> order(n + 1);
  OptResult out;
  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    const std::size_t best = order[0], second_worst = order[n - 1], worst = order[n];

    if (fs[worst] - fs[best] < opt.tol) {
      out.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t i = 0; i < n; ++i) centroid[i] += xs[order[r]][i];
    for (double& c : centroid) c /= static_cast<double>(n);

    auto blend = [&](double coef) {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = centroid[i] + coef * (centroid[i] - xs[worst][i]);
      return x;
    };

    const std::vector<double> xr = blend(opt.reflect);
    const double fr = call(xr);
    if (fr < fs[best]) {
      const std::vector<double> xe = blend(opt.expand);
      const double fe = call(xe);
      if (fe < fr) {
        xs[worst] = xe;
        fs[worst] = fe;
      } else {
        xs[worst] = xr;
        fs[worst] = fr;
      }
      continue;
    }
    if (fr < fs[second_worst]) {
      xs[worst] = xr;
      fs[worst] = fr;
      continue;
    }
    // Contraction: outside when the reflection improved on the worst vertex,
    // inside otherwise.
    const bool outside = fr < fs[worst];
    std::vector<double> xc(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double anchor = outside ? xr[i] : xs[worst][i];
      xc[i] = centroid[i] + opt.contract * (anchor - centroid[i]);
    }
    const double fc = call(xc);
    if (fc < (outside ? fr : fs[worst])) {
      xs[worst] = xc;
      fs[worst] = fc;
      continue;
    }
    // Shrink everything toward the best vertex.
    for (std::size_t r = 1; r <= n; ++r) {
      const std::size_t v = order[r];
      for (std::size_t i = 0; i < n; ++i) xs[v][i] = xs[best][i] + opt.shrink * (xs[v][i] - xs[best][i]);
      fs[v] = call(xs[v]);
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (fs[i] < fs[best]) best = i;
  out.x = xs[best];
  out.f = fs[best];
  out.evals = evals;
  out.iterations = iter;
  return out;
}

struct AnnealingOptions {
  double t0 = 1.0;        // initial temperature; 0 gives a greedy descent
  double cooling = 0.95;  // geometric factor applied after each temperature level
  int steps_per_temp = 50;
  double step_scale = 0.5;  // proposal stddev at t0; shrinks with temperature
  int max_evals = 5000;
  double t_min = 1e-8;  // stop once T / t0 falls below this
  std::uint64_t seed = 0;
};

// Simulated annealing with Gaussian proposals and Metropolis acceptance.
// Tracks the best point ever visited, so the result is never worse than
// f(x0). Fully determined by the seed.
template <typename F>
OptResult simulated_annealing(F&& f, std::vector<double> x0, const AnnealingOptions& opt = {}) {
  const std::size_t n = x0.size();
  if (n == 0) throw InvalidParameter("simulated_annealing needs at least one parameter");
  if (opt.t0 < 0.0 || opt.cooling <= 0.0 || opt.cooling >= 1.0 || opt.steps_per_temp < 1)
    throw InvalidParameter("bad annealing schedule");

  std::mt19937_64 eng = make_engine(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  int evals = 0;
  auto call = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    if (std::isnan(v)) throw NonFiniteObjective("objective returned NaN");
    return v;
  };

  std::vector<double> cur = std::move(x0);
  double f_cur = call(cur);
  OptResult out;
  out.x = cur;
  out.f = f_cur;

  double t = opt.t0;
  int levels = 0;
  std::vector<double> prop(n);
  while (evals < opt.max_evals) {
    const double rel = opt.t0 > 0.0 ? t / opt.t0 : 1.0;
    const double sigma = opt.step_scale * rel;
    for (int s = 0; s < opt.steps_per_temp && evals < opt.max_evals; ++s) {
      for (std::size_t i = 0; i < n; ++i) prop[i] = cur[i] + sigma * normal(eng);
      const double f_prop = call(prop);
      const double delta = f_prop - f_cur;
      bool accept;
      if (delta <= 0.0)
        accept = true;
      else if (t <= 0.0)
        accept = false;
      else
        accept = unif(eng) < std::exp(-delta / t);
      if (accept) {
        cur = prop;
        f_cur = f_prop;
        if (f_cur < out.f) {
          out.f = f_cur;
          out.x = cur;
        }
      }
    }
    ++levels;
    t *= opt.cooling;
    if (opt.t0 > 0.0 && t / opt.t0 < opt.t_min) break;
    if (opt.t0 == 0.0 && levels >= 1 + opt.max_evals / opt.steps_per_temp) break;
  }
  out.evals = evals;
  out.iterations = levels;
  out.converged = true;
  return out;
}

// Either optimizer, choosable at runtime (the CLI exposes this as --opt).
using Optimizer = std::variant<NelderMeadOptions, AnnealingOptions>;

template <typename F>
OptResult optimize(const Optimizer& opt, F&& f, std::vector<double> x0) {
  if (std::holds_alternative<NelderMeadOptions>(opt))
    return nelder_mead(std::forward<F>(f), std::move(x0), std::get<NelderMeadOptions>(opt));
  return simulated_annealing(std::forward<F>(f), std::move(x0), std::get<AnnealingOptions>(opt));
}

struct GridSearchResult {
  int k = 1;
  std::vector<double> accuracy;  // accuracy[i] is the validation accuracy of k = i + 1
};

// Validation-split search for k over [1, k_max]. Each fold shuffles the
// training set with its own child seed and holds out 25% for validation; all
// k values are scored from a single neighbor pass per validation point. Ties
// resolve to the smallest k.
inline GridSearchResult grid_search_k(const LabeledDataset& train, const DistanceSpec& spec, int k_max,
                                      int folds, std::uint64_t seed) {
  const std::size_t n = train.size();
  if (k_max < 1) throw InvalidParameter("k_max must be at least 1");
  if (folds < 1) throw InvalidParameter("folds must be at least 1");
  if (n < 4) throw TooSmall("grid search needs at least 4 training points");

  const std::size_t val_n = std::max<std::size_t>(1, n / 4);
  const std::size_t fit_n = n - val_n;
  const int k_hi = std::min<int>(k_max, static_cast<int>(fit_n));

  std::vector<long> correct(k_hi, 0);
  std::vector<std::size_t> perm(n);
  const int q = train.num_classes();

  for (int fold = 0; fold < folds; ++fold) {
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 eng = make_engine(child_seed(seed, fold));
    std::shuffle(perm.begin(), perm.end(), eng);

    const LabeledDataset fit = train.subset(std::span<const std::size_t>(perm.data(), fit_n));
    for (std::size_t v = fit_n; v < n; ++v) {
      const std::size_t row = perm[v];
      const NeighborSet ns = neighbors(fit, spec, train.row(row), k_hi);
      const std::vector<int> preds = prefix_predictions(fit, ns, q);
      for (int k = 1; k <= k_hi; ++k)
        if (preds[k - 1] == train.label(row)) ++correct[k - 1];
    }
  }

  GridSearchResult out;
  out.accuracy.resize(k_hi);
  const double denom = static_cast<double>(folds) * static_cast<double>(val_n);
  int best = 0;
  for (int k = 0; k < k_hi; ++k) {
    out.accuracy[k] = static_cast<double>(correct[k]) / denom;
    if (correct[k] > correct[best]) best = k;
  }
  out.k = best + 1;
  return out;
}

}  // namespace flexknn
