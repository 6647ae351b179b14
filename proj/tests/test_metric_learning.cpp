#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "flexknn/metric_learning.hpp"

using namespace flexknn;
using Catch::Matchers::WithinAbs;

namespace {

// Classes separated along x; y is high-variance noise. The right local metric
// stretches x and shrinks y.
LabeledDataset axis_clusters(int per_class, std::uint64_t seed) {
  std::mt19937_64 eng = make_engine(seed);
  std::normal_distribution<double> tight(0.0, 0.1);
  std::normal_distribution<double> loose(0.0, 2.0);
  LabeledDataset ds(2);
  for (int i = 0; i < per_class; ++i) {
    ds.add(std::vector<double>{-1.0 + tight(eng), loose(eng)}, 0);
    ds.add(std::vector<double>{1.0 + tight(eng), loose(eng)}, 1);
  }
  ds.assign_tiebreaks(child_seed(seed, 1));
  return ds;
}

LabeledDataset random_labels(int n, std::uint64_t seed) {
  std::mt19937_64 eng = make_engine(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LabeledDataset ds(2);
  for (int i = 0; i < n; ++i)
    ds.add(std::vector<double>{unif(eng), unif(eng)}, unif(eng) < 0.5 ? 0 : 1);
  ds.assign_tiebreaks(child_seed(seed, 1));
  return ds;
}

}  // namespace

TEST_CASE("split_sample deals disjoint halves of the right size", "[local]") {
  LabeledDataset ds(1);
  for (int i = 0; i < 101; ++i) ds.add(std::vector<double>{static_cast<double>(i)}, i % 2);
  ds.assign_tiebreaks(2);

  const SplitSample split = split_sample(ds, 0.5, 9);
  CHECK(split.classify_part.size() == 51);  // lround(50.5) rounds away from zero
  CHECK(split.select_part.size() == 50);

  // every original value appears exactly once across the two parts
  std::vector<double> seen;
  for (std::size_t i = 0; i < split.classify_part.size(); ++i) seen.push_back(split.classify_part.row(i)[0]);
  for (std::size_t i = 0; i < split.select_part.size(); ++i) seen.push_back(split.select_part.row(i)[0]);
  std::sort(seen.begin(), seen.end());
  for (int i = 0; i < 101; ++i) CHECK(seen[i] == static_cast<double>(i));

  CHECK_THROWS_AS(split_sample(ds, 0.0, 1), InvalidParameter);
  CHECK_THROWS_AS(split_sample(ds, 1.0, 1), InvalidParameter);
  LabeledDataset one(1);
  one.add(std::vector<double>{0.0}, 0);
  CHECK_THROWS_AS(split_sample(one, 0.5, 1), TooSmall);
}

TEST_CASE("parameter vectors have the documented shapes", "[local]") {
  const ParamFamily diag = MatrixLpFamily{};
  const ParamFamily full = MatrixLpFamily{MatrixShape::full, 0.1, 10.0, 0.5, 4.0};
  const ParamFamily poly = MatrixPolynomialFamily{};
  CHECK(param_count(diag, 3) == 4);
  CHECK(param_count(full, 3) == 10);
  CHECK(param_count(poly, 3) == 8);  // 3 log-entries + 5 coefficients

  CHECK(family_label(diag) == "matlp:diag,0.1,10,p,0.5,4");
  CHECK(family_label(full) == "matlp:full,0.1,10,p,0.5,4");
  CHECK(family_label(poly) == "matpoly:deg5");
}

TEST_CASE("identity parameters realize to the base euclidean behavior", "[local]") {
  std::mt19937_64 eng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  const DistanceSpec plain = DistanceSpec::euclidean();
  for (const ParamFamily& family :
       {ParamFamily{MatrixLpFamily{}}, ParamFamily{MatrixLpFamily{MatrixShape::full, 0.1, 10.0, 0.5, 4.0}}}) {
    const std::vector<double> x0 = identity_params(family, 2);
    const DistanceSpec spec = realize_spec(family, 2, x0);
    for (int rep = 0; rep < 20; ++rep) {
      const std::vector<double> v{g(eng), g(eng)};
      CHECK_THAT(spec.evaluate(v), WithinAbs(plain.evaluate(v), 1e-12));
    }
  }
  // polynomial identity is f(x) = x, i.e. the l1 norm
  const ParamFamily poly = MatrixPolynomialFamily{};
  const DistanceSpec pspec = realize_spec(poly, 2, identity_params(poly, 2));
  CHECK_THAT(pspec.evaluate(std::vector<double>{3.0, -4.0}), WithinAbs(7.0, 1e-12));
}

TEST_CASE("realize_spec projects parameters into the family box", "[local]") {
  const ParamFamily family = MatrixLpFamily{};
  // log-space parameters far outside [0.1, 10] x [0.5, 4]
  const std::vector<double> wild{std::log(1000.0), std::log(1e-6), std::log(100.0)};
  const DistanceSpec spec = realize_spec(family, 2, wild);
  // diag entries clamp to 10 and 0.1, p clamps to 4
  CHECK_THAT(spec.evaluate(std::vector<double>{1.0, 0.0}), WithinAbs(10.0, 1e-12));
  CHECK_THAT(spec.evaluate(std::vector<double>{0.0, 1.0}), WithinAbs(0.1, 1e-12));
  const double both = spec.evaluate(std::vector<double>{1.0, 10.0});
  CHECK_THAT(both, WithinAbs(std::pow(std::pow(10.0, 4.0) + std::pow(1.0, 4.0), 0.25), 1e-9));

  CHECK_THROWS_AS(realize_spec(family, 2, std::vector<double>{0.0, 0.0}), InvalidParameter);

  // full matrices come back with singular values inside the box
  const ParamFamily full = MatrixLpFamily{MatrixShape::full, 0.5, 2.0, 0.5, 4.0};
  std::vector<double> params(5, 0.0);
  params[0] = 100.0;  // entry (0,0) of the raw matrix
  params[3] = 0.001;
  params[4] = std::log(2.0);
  const DistanceSpec fspec = realize_spec(full, 2, params);
  const std::vector<double> sv = singular_values(fspec.matrix());
  for (double s : sv) {
    CHECK(s >= 0.5 - 1e-9);
    CHECK(s <= 2.0 + 1e-9);
  }
}

TEST_CASE("label agreement correlation reduces to a pearson worked example", "[local]") {
  LabeledDataset ds(1);
  ds.add(std::vector<double>{0.0}, 1);  // the training query
  ds.add(std::vector<double>{1.0}, 1);
  ds.add(std::vector<double>{2.0}, 1);
  ds.add(std::vector<double>{3.0}, 0);
  ds.assign_tiebreaks(3);
  const std::vector<std::size_t> hood{0, 1, 2, 3};  // tq itself is skipped
  const double r = label_agreement_correlation(ds, 0, hood, DistanceSpec::euclidean());
  CHECK_THAT(r, WithinAbs(-std::sqrt(3.0) / 2.0, 1e-14));
}

TEST_CASE("the local objective rewards the separating axis", "[local]") {
  const LabeledDataset select = axis_clusters(30, 11);
  const std::vector<double> query{0.9, 0.0};
  LocalMetricQuery q;
  q.k1 = 8;
  q.k2 = 30;

  const std::vector<double> identity = identity_params(q.family, 2);
  std::vector<double> stretched = identity;
  stretched[0] = std::log(4.0);   // weight x up
  stretched[1] = std::log(0.25);  // weight y down

  const double f_id = local_objective(select, query, identity, q);
  const double f_good = local_objective(select, query, stretched, q);
  CHECK(f_good < f_id);
  CHECK(f_good < -0.5);  // strong negative correlation once x dominates
}

TEST_CASE("the local objective is near zero when labels are independent noise", "[local]") {
  const LabeledDataset select = random_labels(80, 13);
  LocalMetricQuery q;
  q.k1 = 10;
  q.k2 = 40;
  const double f = local_objective(select, std::vector<double>{0.5, 0.5}, identity_params(q.family, 2), q);
  CHECK(std::fabs(f) < 0.25);
}

TEST_CASE("uninformative neighborhoods contribute exactly zero", "[local]") {
  // all labels equal: agreement is constant 1, correlation undefined -> 0
  LabeledDataset same(2);
  std::mt19937_64 eng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 20; ++i) same.add(std::vector<double>{unif(eng), unif(eng)}, 0);
  same.assign_tiebreaks(1);
  LocalMetricQuery q;
  q.k1 = 5;
  q.k2 = 10;
  CHECK(local_objective(same, std::vector<double>{0.5, 0.5}, identity_params(q.family, 2), q) == 0.0);

  // k2 = 2 leaves a single pair per training query: no correlation, zero
  const LabeledDataset noisy = random_labels(10, 19);
  LocalMetricQuery tiny;
  tiny.k1 = 1;
  tiny.k2 = 2;
  CHECK(local_objective(noisy, std::vector<double>{0.5, 0.5}, identity_params(tiny.family, 2), tiny) == 0.0);
}

TEST_CASE("context construction validates its inputs", "[local]") {
  const LabeledDataset ds = random_labels(12, 23);
  const std::vector<double> query{0.5, 0.5};
  LocalMetricQuery q;
  q.k1 = 0;
  CHECK_THROWS_AS(make_local_context(ds, query, q), InvalidParameter);
  q.k1 = 5;
  q.k2 = 3;
  CHECK_THROWS_AS(make_local_context(ds, query, q), InvalidParameter);
  q.k1 = 1;
  q.k2 = 1;
  CHECK_THROWS_AS(make_local_context(ds, query, q), InvalidParameter);
  CHECK_THROWS_AS(make_local_context(LabeledDataset(2), query, LocalMetricQuery{}), EmptySelectSet);

  q.k1 = 4;
  q.k2 = 9;
  const LocalObjectiveContext ctx = make_local_context(ds, query, q);
  CHECK(ctx.pairs_per_tq == 8);
  CHECK(ctx.diffs.size() == 4 * 8 * 2);
  CHECK(ctx.agrees.size() == 4 * 8);
}

TEST_CASE("selection never returns a worse objective than the identity start", "[local]") {
  const LabeledDataset full = axis_clusters(40, 29);
  const SplitSample split = split_sample(full, 0.5, 31);
  LocalMetricQuery q;
  q.k1 = 8;
  q.k2 = 25;
  q.optimizer_budget = 60;

  const LearnedLocalSpec learned =
      select_local_distance(split, std::vector<double>{0.8, 0.3}, q, NelderMeadOptions{}, 7);
  CHECK(learned.objective_best <= learned.objective_identity);
  if (learned.fell_back) CHECK(learned.objective_best == learned.objective_identity);

  // the separating axis must end up weighted more heavily than the noise axis
  CHECK(learned.spec.evaluate(std::vector<double>{1.0, 0.0}) >
        learned.spec.evaluate(std::vector<double>{0.0, 1.0}));
}

TEST_CASE("a collapsed family box pins the learned spec to the base metric", "[local]") {
  const LabeledDataset full = random_labels(40, 37);
  const SplitSample split = split_sample(full, 0.5, 41);
  LocalMetricQuery q;
  q.k1 = 4;
  q.k2 = 12;
  q.family = MatrixLpFamily{MatrixShape::diagonal, 1.0, 1.0, 2.0, 2.0};
  q.optimizer_budget = 25;

  const LearnedLocalSpec learned =
      select_local_distance(split, std::vector<double>{0.5, 0.5}, q, NelderMeadOptions{}, 3);
  std::mt19937_64 eng(43);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const std::vector<double> v{g(eng), g(eng)};
    CHECK_THAT(learned.spec.evaluate(v), WithinAbs(DistanceSpec::euclidean().evaluate(v), 1e-12));
  }
}

TEST_CASE("with the full support and a collapsed family, local knn is plain knn", "[local]") {
  const LabeledDataset full = axis_clusters(20, 47);
  const SplitSample split = split_sample(full, 0.5, 53);
  LocalMetricQuery q;
  q.k1 = 3;
  q.k2 = 10;
  q.family = MatrixLpFamily{MatrixShape::diagonal, 1.0, 1.0, 2.0, 2.0};
  q.optimizer_budget = 10;
  const int k = 5;
  q.m = static_cast<int>(split.classify_part.size()) / k;  // support = whole classify part

  std::mt19937_64 eng(59);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 8; ++rep) {
    const std::vector<double> query{g(eng), g(eng)};
    const LocalPrediction p = predict_local(split, query, q, NelderMeadOptions{}, k, 61);
    CHECK(p.label == predict(split.classify_part, DistanceSpec::euclidean(), query, k));
    CHECK(p.support.size() == static_cast<std::size_t>(q.m * k));
  }
}

TEST_CASE("relabeling 0 <-> 1 flips local predictions at odd k", "[local]") {
  const LabeledDataset full = axis_clusters(20, 67);
  LabeledDataset flipped(2);
  for (std::size_t i = 0; i < full.size(); ++i) {
    flipped.add(full.row(i), 1 - full.label(i));
    flipped.set_tiebreak(i, full.tiebreak(i));
  }

  LocalMetricQuery q;
  q.k1 = 4;
  q.k2 = 12;
  q.m = 3;
  q.optimizer_budget = 40;

  std::mt19937_64 eng(71);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    const std::vector<double> query{g(eng), g(eng)};
    // identical shuffles on both datasets keep row correspondence
    const SplitSample a = split_sample(full, 0.5, 73);
    const SplitSample b = split_sample(flipped, 0.5, 73);
    const LocalPrediction pa = predict_local(a, query, q, NelderMeadOptions{}, 5, 79);
    const LocalPrediction pb = predict_local(b, query, q, NelderMeadOptions{}, 5, 79);
    CHECK(pa.label == 1 - pb.label);
    CHECK(pa.support == pb.support);
  }
}

TEST_CASE("predict_local enforces the support budget", "[local]") {
  const LabeledDataset full = random_labels(20, 83);
  const SplitSample split = split_sample(full, 0.5, 89);  // classify part has 10 points
  LocalMetricQuery q;
  q.k1 = 2;
  q.k2 = 6;
  q.m = 4;
  CHECK_THROWS_AS(predict_local(split, std::vector<double>{0.5, 0.5}, q, NelderMeadOptions{}, 3, 1),
                  KTooLarge);  // m*k = 12 > 10
  CHECK_THROWS_AS(predict_local(split, std::vector<double>{0.5, 0.5}, q, NelderMeadOptions{}, 0, 1),
                  InvalidParameter);
}
