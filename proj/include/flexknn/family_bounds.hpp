#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "flexknn/distance.hpp"
#include "flexknn/rng.hpp"

namespace flexknn {

struct NormAxiomReport {
  bool homogeneity_ok = true;
  bool triangle_ok = true;
  double max_violation = 0.0;  // worst relative violation seen over all samples
};

namespace detail {

inline std::vector<double> gaussian_vector(std::mt19937_64& eng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = normal(eng);
  return v;
}

// Uniform point in the Euclidean ball of radius r.
inline std::vector<double> ball_point(std::mt19937_64& eng, int dim, double r) {
  std::vector<double> v = gaussian_vector(eng, dim);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) norm = 1.0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double radius = r * std::pow(unif(eng), 1.0 / dim);
  for (double& x : v) x *= radius / norm;
  return v;
}

inline double euclid(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace detail

// Monte Carlo audit of absolute homogeneity and the triangle inequality.
// Random Gaussian pairs plus deterministic axis witnesses (the axis pairs are
// what exposes quasinorms regardless of seed). Violations are reported
// relative to the magnitude of the quantities compared.
inline NormAxiomReport check_norm_axioms(const DistanceSpec& spec, int dim, int samples, std::uint64_t seed,
                                         double tol = 1e-9) {
  if (dim < 1) throw InvalidParameter("check_norm_axioms needs dim >= 1");
  if (samples < 1) throw InvalidParameter("check_norm_axioms needs samples >= 1");
  NormAxiomReport report;

  auto check_pair = [&](std::span<const double> u, std::span<const double> v, double lambda) {
    std::vector<double> lv(v.size()), uv(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      lv[i] = lambda * v[i];
      uv[i] = u[i] + v[i];
    }
    const double rv = spec.evaluate(v);
    const double rlv = spec.evaluate(lv);
    if (std::isfinite(rv) && std::isfinite(rlv)) {
      const double want = std::fabs(lambda) * rv;
      const double scale = std::max({rlv, want, 1e-12});
      const double hom = std::fabs(rlv - want) / scale;
      report.max_violation = std::max(report.max_violation, hom);
      if (hom > tol) report.homogeneity_ok = false;
    }
    const double ru = spec.evaluate(u);
    const double ruv = spec.evaluate(uv);
    if (std::isfinite(ru) && std::isfinite(rv) && std::isfinite(ruv)) {
      const double tri = (ruv - (ru + rv)) / std::max(ru + rv, 1e-12);
      report.max_violation = std::max(report.max_violation, tri);
      if (tri > tol) report.triangle_ok = false;
    }
  };

  // Deterministic axis witnesses: unit vectors and their pairwise sums.
  std::vector<double> ei(dim, 0.0), ej(dim, 0.0);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      std::fill(ei.begin(), ei.end(), 0.0);
      std::fill(ej.begin(), ej.end(), 0.0);
      ei[i] = 1.0;
      ej[j] = 1.0;
      check_pair(ei, ej, 2.0);
      check_pair(ei, ej, 0.5);
    }
  }

  std::mt19937_64 eng = make_engine(seed);
  std::normal_distribution<double> scale(0.0, 2.0);
  for (int s = 0; s < samples; ++s) {
    const std::vector<double> u = detail::gaussian_vector(eng, dim);
    const std::vector<double> v = detail::gaussian_vector(eng, dim);
    check_pair(u, v, scale(eng));
  }
  return report;
}

// Estimated constants of the locally-Lipschitz family conditions, probed over
// the Euclidean ball of radius r:
//   alpha  max difference quotient |rho(x)-rho(y)| / |x-y|_2  (local Lipschitz)
//   beta   min radial growth rate  d rho(lambda v)/d lambda / |v|_2
//   gamma  min of rho on the shell |v|_2 in [r, 4r]
//   delta  inner radius min(r, gamma) / (4 alpha)
struct FamilyBounds {
  double alpha = 1.0;  // clamped to >= 1 (scaling a distance never changes ranks)
  double beta = 1.0;   // clamped to <= 1
  double gamma = 1.0;
  double r = 1.0;
  double delta = 0.25;
};

struct FamilyBoundsEstimate {
  FamilyBounds bounds;
  bool violated = false;  // beta <= 0, gamma <= 0, or alpha diverges under refinement
  double alpha_raw = 0.0;
  double beta_raw = 0.0;
  double gamma_raw = 0.0;
  double alpha_coarse = 0.0;  // alpha at grid N, for the divergence probe
  double alpha_fine = 0.0;    // alpha at grid 2N
};

namespace detail {

inline double alpha_probe(const DistanceSpec& spec, int dim, double r, int grid, std::uint64_t seed) {
  std::mt19937_64 eng = make_engine(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0.0;
  std::vector<double> x(dim), y(dim);

  auto quotient = [&](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(dim);
    for (int i = 0; i < dim; ++i) d[i] = a[i] - b[i];
    const double len = euclid(d);
    if (len < 1e-300) return;
    const double ra = spec.evaluate(a), rb = spec.evaluate(b);
    if (!std::isfinite(ra) || !std::isfinite(rb)) return;
    worst = std::max(worst, std::fabs(ra - rb) / len);
  };

  // Deterministic probes near the axes with displacements that shrink as the
  // grid refines; this is what catches quasinorm blow-up. Collinear probes pin
  // alpha = 1 exactly for homogeneous norms.
  const double h_min = r / (100.0 * grid);
  for (int i = 0; i < dim; ++i) {
    for (int t = 1; t <= grid; ++t) {
      const double h = (r / 4.0) * std::pow(h_min / (r / 4.0), static_cast<double>(t) / grid);
      for (int j = 0; j < dim; ++j) {
        if (j == i) continue;
        std::fill(x.begin(), x.end(), 0.0);
        x[i] = r / 2.0;
        y = x;
        y[j] += h;
        quotient(x, y);
      }
      // Collinear pair along axis i.
      std::fill(x.begin(), x.end(), 0.0);
      x[i] = r / 2.0;
      y = x;
      y[i] += h;
      quotient(x, y);
    }
  }

  // Random pairs: far pairs plus short random displacements.
  for (int s = 0; s < 4 * grid; ++s) {
    x = ball_point(eng, dim, r);
    y = ball_point(eng, dim, r);
    quotient(x, y);

    x = ball_point(eng, dim, r * 0.9);
    std::vector<double> dir = gaussian_vector(eng, dim);
    const double len = std::max(euclid(dir), 1e-300);
    const double h = r * std::pow(unif(eng), 2.0) / grid;
    y = x;
    for (int i = 0; i < dim; ++i) y[i] += dir[i] * (h / len);
    quotient(x, y);
  }
  return worst;
}

inline double beta_probe(const DistanceSpec& spec, int dim, double r, int grid, std::uint64_t seed) {
  std::mt19937_64 eng = make_engine(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  std::vector<double> v(dim), a(dim), b(dim);

  auto probe_direction = [&](const std::vector<double>& dir) {
    const double len = euclid(dir);
    if (len < 1e-300) return;
    for (int t = 0; t < grid; ++t) {
      // Lambda pairs covering (0, 1] including the endpoints' neighborhoods.
      const double l1 = static_cast<double>(t) / grid;
      const double l2 = static_cast<double>(t + 1) / grid;
      for (int i = 0; i < dim; ++i) {
        a[i] = l1 * dir[i];
        b[i] = l2 * dir[i];
      }
      const double ra = spec.evaluate(a), rb = spec.evaluate(b);
      if (!std::isfinite(ra) || !std::isfinite(rb)) continue;
      const double q = (rb - ra) / (l2 - l1) / len;
      worst = std::min(worst, q);
    }
  };

  for (int i = 0; i < dim; ++i) {
    std::fill(v.begin(), v.end(), 0.0);
    v[i] = r * 0.999;
    probe_direction(v);
  }
  for (int s = 0; s < 4 * grid; ++s) {
    v = gaussian_vector(eng, dim);
    const double len = std::max(euclid(v), 1e-300);
    const double target = r * (0.05 + 0.949 * unif(eng));
    for (double& x : v) x *= target / len;
    probe_direction(v);
  }
  return std::isfinite(worst) ? worst : 0.0;
}

inline double gamma_probe(const DistanceSpec& spec, int dim, double r, int grid, std::uint64_t seed) {
  std::mt19937_64 eng = make_engine(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  std::vector<double> v(dim);

  auto probe = [&](const std::vector<double>& x) {
    const double rx = spec.evaluate(x);
    if (std::isfinite(rx)) worst = std::min(worst, rx);
  };

  for (int i = 0; i < dim; ++i) {
    std::fill(v.begin(), v.end(), 0.0);
    v[i] = r;
    probe(v);
    v[i] = 4.0 * r;
    probe(v);
  }
  for (int s = 0; s < 8 * grid; ++s) {
    v = gaussian_vector(eng, dim);
    const double len = std::max(euclid(v), 1e-300);
    const double target = s % 4 == 0 ? r : r * (1.0 + 3.0 * unif(eng));
    for (double& x : v) x *= target / len;
    probe(v);
  }
  return std::isfinite(worst) ? worst : 0.0;
}

}  // namespace detail

// Numerically estimates the family constants. `grid` controls probe density;
// a second pass at twice the density flags alpha divergence (the signature of
// distances whose local slope is unbounded, e.g. lp with p < 1).
inline FamilyBoundsEstimate estimate_family_bounds(const DistanceSpec& spec, int dim, double r, int grid,
                                                   std::uint64_t seed) {
  if (dim < 1) throw InvalidParameter("estimate_family_bounds needs dim >= 1");
  if (!(r > 0.0)) throw InvalidParameter("estimate_family_bounds needs r > 0");
  if (grid < 10) throw InvalidParameter("estimate_family_bounds needs grid >= 10");

  FamilyBoundsEstimate est;
  est.alpha_coarse = detail::alpha_probe(spec, dim, r, grid, child_seed(seed, 1));
  est.alpha_fine = detail::alpha_probe(spec, dim, r, 2 * grid, child_seed(seed, 2));
  est.alpha_raw = std::max(est.alpha_coarse, est.alpha_fine);
  est.beta_raw = detail::beta_probe(spec, dim, r, 2 * grid, child_seed(seed, 3));
  est.gamma_raw = detail::gamma_probe(spec, dim, r, 2 * grid, child_seed(seed, 4));

  est.violated = est.beta_raw <= 1e-9 || est.gamma_raw <= 1e-9 || est.alpha_fine > 1.25 * est.alpha_coarse;

  est.bounds.r = r;
  est.bounds.alpha = std::max(1.0, est.alpha_raw);
  est.bounds.beta = std::min(1.0, est.beta_raw);
  est.bounds.gamma = est.gamma_raw;
  est.bounds.delta = std::min(r, est.bounds.gamma) / (4.0 * est.bounds.alpha);
  return est;
}

// The cone property of norms: if rho(x) <= rho(y) then the remainder y - x is
// strictly closer to the origin than y. `violated` reports a counterexample.
struct ConeCheck {
  double rho_x = 0.0;
  double rho_y = 0.0;
  double rho_diff = 0.0;  // rho(y - x)
  bool violated = false;
};

inline ConeCheck cone_condition_violation(const DistanceSpec& spec, std::span<const double> x,
                                          std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("cone check arguments differ in dimension");
  ConeCheck out;
  out.rho_x = spec.evaluate(x);
  out.rho_y = spec.evaluate(y);
  std::vector<double> diff(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff[i] = y[i] - x[i];
  out.rho_diff = spec.evaluate(diff);
  out.violated = out.rho_x <= out.rho_y && out.rho_diff >= out.rho_y;
  return out;
}

// Planar witness family for the l^{1/2} quasinorm: with x = (t, t^2) and
// y = (1, 0), the gap rho(y - x) - rho(y) equals t^2 + 2 t sqrt(1 - t) - t.
// Positive gap on (0, 1/4) means the cone property fails on a whole segment,
// not just at isolated points.
inline double quasinorm_cone_gap(double t) { return t * t + 2.0 * t * std::sqrt(1.0 - t) - t; }

}  // namespace flexknn
