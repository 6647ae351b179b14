#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <set>
#include <sstream>

#include "flexknn/csv.hpp"
#include "flexknn/eval.hpp"
#include "flexknn/preprocess.hpp"
#include "flexknn/report_json.hpp"

using namespace flexknn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("polynomial concept label", "[eval]") {
  // t = 2 * 0.5 = 1, so each cubic just sums its coefficients.
  REQUIRE(polynomial_label(std::vector<double>{0.5, 0.9, 0.1, 0.1, 0.1, 0.1, 0.1}) == 1);
  REQUIRE(polynomial_label(std::vector<double>{0.5, 0.1, 0.1, 0.1, 0.9, 0.1, 0.1}) == 0);
  REQUIRE(polynomial_label(std::vector<double>{0.0, 0.3, 0.3, 0.3, 0.9, 0.9, 0.9}) == 0);  // tie at t = 0
  // t = 2: p1 = 2*2 + 0*4 + 0*8 = 4, p2 = 0 + 0.4*4 + 0.2*8 = 3.2.
  REQUIRE(polynomial_label(std::vector<double>{1.0, 2.0, 0.0, 0.0, 0.0, 0.4, 0.2}) == 1);
}

TEST_CASE("polynomial dataset generation", "[eval]") {
  const PolynomialDatasetPair pair = generate_polynomial_dataset(300, 120, 17);
  REQUIRE(pair.train.size() == 300);
  REQUIRE(pair.test.size() == 120);
  REQUIRE(pair.train.dim() == 7);
  REQUIRE(pair.train.num_classes() == 2);
  REQUIRE(pair.test.num_classes() == 2);

  SECTION("coordinates are in the unit cube and labels follow the concept") {
    for (std::size_t i = 0; i < pair.train.size(); ++i) {
      for (double v : pair.train.row(i)) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
      }
      REQUIRE(pair.train.label(i) == polynomial_label(pair.train.row(i)));
    }
  }

  SECTION("the two classes are balanced by symmetry") {
    const PolynomialDatasetPair big = generate_polynomial_dataset(4000, 1, 3);
    long ones = 0;
    for (std::size_t i = 0; i < big.train.size(); ++i) ones += big.train.label(i);
    REQUIRE_THAT(ones / 4000.0, WithinAbs(0.5, 0.04));
  }

  SECTION("generation is a pure function of the seed") {
    const PolynomialDatasetPair again = generate_polynomial_dataset(300, 120, 17);
    const PolynomialDatasetPair other = generate_polynomial_dataset(300, 120, 18);
    bool same = true;
    for (std::size_t i = 0; i < 300; ++i) {
      same = same && again.train.tiebreak(i) == pair.train.tiebreak(i);
      for (std::size_t c = 0; c < 7; ++c) same = same && again.train.row(i)[c] == pair.train.row(i)[c];
    }
    REQUIRE(same);
    REQUIRE(other.train.row(0)[0] != pair.train.row(0)[0]);
  }

  SECTION("the functional source wraps the generator") {
    const PolynomialDatasetPair direct = generate_polynomial_dataset(20, 10, 99);
    const PolynomialDatasetPair sourced = polynomial_source()(20, 10, 99);
    REQUIRE(sourced.train.size() == 20);
    REQUIRE(sourced.train.row(3)[2] == direct.train.row(3)[2]);
    REQUIRE(sourced.test.row(7)[6] == direct.test.row(7)[6]);
  }
}

TEST_CASE("resampling source deals disjoint hands from a fixed table", "[eval]") {
  LabeledDataset full(1);
  for (int i = 0; i < 30; ++i) full.add(std::vector<double>{static_cast<double>(i)}, i % 2);
  full.set_num_classes(2);
  full.assign_tiebreaks(8);
  const DatasetSource source = resample_source(full);

  const PolynomialDatasetPair hand = source(20, 10, 5);
  REQUIRE(hand.train.size() == 20);
  REQUIRE(hand.test.size() == 10);
  REQUIRE(hand.train.num_classes() == 2);

  std::set<double> seen;
  for (std::size_t i = 0; i < 20; ++i) seen.insert(hand.train.row(i)[0]);
  for (std::size_t i = 0; i < 10; ++i) seen.insert(hand.test.row(i)[0]);
  REQUIRE(seen.size() == 30);  // disjoint and jointly exhaustive here

  SECTION("labels travel with their rows") {
    for (std::size_t i = 0; i < 20; ++i)
      REQUIRE(hand.train.label(i) == static_cast<int>(hand.train.row(i)[0]) % 2);
  }

  SECTION("same seed, same deal; the deck itself never changes") {
    const PolynomialDatasetPair again = source(20, 10, 5);
    REQUIRE(again.train.row(0)[0] == hand.train.row(0)[0]);
    REQUIRE(again.test.row(9)[0] == hand.test.row(9)[0]);
  }

  SECTION("asking for more rows than the table has") {
    REQUIRE_THROWS_AS(source(25, 10, 1), TooSmall);
  }
}

TEST_CASE("accuracy of a fixed spec on a held-out set", "[eval]") {
  LabeledDataset train(1);
  train.add(std::vector<double>{0.0}, 0);
  train.add(std::vector<double>{1.0}, 0);
  train.add(std::vector<double>{10.0}, 1);
  train.add(std::vector<double>{11.0}, 1);
  train.set_num_classes(2);
  train.assign_tiebreaks(1);

  LabeledDataset test(1);
  test.add(std::vector<double>{0.5}, 0);
  test.add(std::vector<double>{10.5}, 1);
  test.add(std::vector<double>{5.2}, 1);  // nearest neighbor disagrees
  test.set_num_classes(2);
  test.assign_tiebreaks(2);

  REQUIRE_THAT(knn_accuracy(train, test, DistanceSpec::euclidean(), 1), WithinRel(2.0 / 3.0, 1e-15));
  REQUIRE_THAT(knn_accuracy(train, test, DistanceSpec::euclidean(), 4), WithinRel(2.0 / 3.0, 1e-15));
}

TEST_CASE("repeated evaluation across fresh draws", "[eval]") {
  EvalConfig cfg;
  cfg.n_train = 60;
  cfg.n_test = 40;
  cfg.repeats = 4;
  cfg.k_max = 7;
  cfg.seed = 3;
  const std::vector<DistanceSpec> specs{DistanceSpec::euclidean(), DistanceSpec::lp(1.0)};
  const auto reports = repeated_eval(polynomial_source(), specs, cfg);

  REQUIRE(reports.size() == 2);
  REQUIRE(reports[0].distance_label == "lp:2");
  REQUIRE(reports[1].distance_label == "lp:1");

  for (const TrialReport& r : reports) {
    REQUIRE(r.accuracies.size() == 4);
    REQUIRE(r.k_selected.size() == 4);
    REQUIRE(r.n_train == 60);
    REQUIRE(r.n_test == 40);
    REQUIRE(r.k_max == 7);
    REQUIRE(r.alpha == 0.05);
    REQUIRE(r.wall_time_s > 0.0);
    double sum = 0.0;
    for (int rep = 0; rep < 4; ++rep) {
      REQUIRE(r.accuracies[rep] >= 0.0);
      REQUIRE(r.accuracies[rep] <= 1.0);
      REQUIRE(r.k_selected[rep] >= 1);
      REQUIRE(r.k_selected[rep] <= 7);
      REQUIRE(r.repeat_seeds[rep] == child_seed(3, rep));
      sum += r.accuracies[rep];
    }
    REQUIRE_THAT(r.mean, WithinAbs(sum / 4.0, 1e-15));
    REQUIRE(r.ci_lo <= r.mean);
    REQUIRE(r.mean <= r.ci_hi);
  }
  // The concept is learnable: the euclidean run clears coin-flipping easily.
  REQUIRE(reports[0].mean > 0.6);

  SECTION("reruns reproduce byte-identical accuracy sequences") {
    const auto again = repeated_eval(polynomial_source(), specs, cfg);
    REQUIRE(again[0].accuracies == reports[0].accuracies);
    REQUIRE(again[1].k_selected == reports[1].k_selected);
  }

  SECTION("input validation") {
    EvalConfig bad = cfg;
    bad.repeats = 1;
    REQUIRE_THROWS_AS(repeated_eval(polynomial_source(), specs, bad), InvalidParameter);
    REQUIRE_THROWS_AS(repeated_eval(polynomial_source(), {}, cfg), InvalidParameter);
  }
}

TEST_CASE("repeated evaluation with a locally learned distance", "[eval]") {
  LocalEvalConfig cfg;
  cfg.eval.n_train = 40;
  cfg.eval.n_test = 12;
  cfg.eval.repeats = 2;
  cfg.eval.k_max = 3;
  cfg.eval.seed = 5;
  cfg.query.k1 = 3;
  cfg.query.k2 = 8;
  cfg.query.m = 2;
  cfg.query.optimizer_budget = 20;

  const TrialReport r = local_knn_eval(polynomial_source(), cfg);
  REQUIRE(r.distance_label == "local:" + family_label(cfg.query.family));
  REQUIRE(r.accuracies.size() == 2);
  for (double a : r.accuracies) {
    REQUIRE(a >= 0.0);
    REQUIRE(a <= 1.0);
  }
  for (int k : r.k_selected) {
    REQUIRE(k >= 1);
    REQUIRE(k <= 3);
  }
  REQUIRE_THAT(r.mean, WithinAbs(0.5 * (r.accuracies[0] + r.accuracies[1]), 1e-15));
  REQUIRE(r.wall_time_s > 0.0);

  const TrialReport again = local_knn_eval(polynomial_source(), cfg);
  REQUIRE(again.accuracies == r.accuracies);

  LocalEvalConfig bad = cfg;
  bad.eval.repeats = 1;
  REQUIRE_THROWS_AS(local_knn_eval(polynomial_source(), bad), InvalidParameter);
}

TEST_CASE("csv round trip preserves rows bit for bit", "[eval]") {
  LabeledDataset ds(2);
  ds.add(std::vector<double>{0.125, -3.5}, 0);
  ds.add(std::vector<double>{1e-3, 7.25}, 0);
  ds.add(std::vector<double>{2.0 / 3.0, 0.1}, 1);
  ds.add(std::vector<double>{-0.0625, 123456.789}, 1);
  ds.add(std::vector<double>{42.0, -1e-12}, 0);
  ds.set_num_classes(2);
  ds.assign_tiebreaks(9);

  std::stringstream buf;
  save_csv(buf, ds, {"a", "b"});
  const LoadedTable loaded = load_csv(buf, TabularSchema{});

  REQUIRE(loaded.feature_names == std::vector<std::string>{"a", "b"});
  REQUIRE(loaded.label_names == std::vector<std::string>{"0", "1"});
  REQUIRE(loaded.data.size() == 5);
  REQUIRE(loaded.data.num_classes() == 2);
  for (std::size_t i = 0; i < 5; ++i) {
    REQUIRE(loaded.data.label(i) == ds.label(i));
    REQUIRE(loaded.data.row(i)[0] == ds.row(i)[0]);
    REQUIRE(loaded.data.row(i)[1] == ds.row(i)[1]);
  }

  SECTION("loading is deterministic, including tiebreaks") {
    std::stringstream b2;
    save_csv(b2, ds, {"a", "b"});
    const LoadedTable again = load_csv(b2, TabularSchema{});
    for (std::size_t i = 0; i < 5; ++i) REQUIRE(again.data.tiebreak(i) == loaded.data.tiebreak(i));
  }
}

TEST_CASE("csv schema handling and failure modes", "[eval]") {
  SECTION("string labels map to ids in first-seen order") {
    std::stringstream in("x,label\n1,yes\n2,no\n3,yes\n");
    const LoadedTable t = load_csv(in, TabularSchema{});
    REQUIRE(t.label_names == std::vector<std::string>{"yes", "no"});
    REQUIRE(t.data.label(0) == 0);
    REQUIRE(t.data.label(1) == 1);
    REQUIRE(t.data.label(2) == 0);
  }

  SECTION("feature selection, custom label column, and a semicolon delimiter") {
    std::stringstream in("u;v;cls\n1.5; 2.5 ;a\n3;4;b\n");
    TabularSchema schema;
    schema.feature_columns = {"v"};
    schema.label_column = "cls";
    schema.delimiter = ';';
    const LoadedTable t = load_csv(in, schema);
    REQUIRE(t.data.dim() == 1);
    REQUIRE(t.data.row(0)[0] == 2.5);  // padding spaces are trimmed
    REQUIRE(t.data.row(1)[0] == 4.0);
  }

  SECTION("missing columns") {
    std::stringstream in("x,y\n1,2\n");
    REQUIRE_THROWS_AS(load_csv(in, TabularSchema{}), MissingColumn);
    std::stringstream in2("x,label\n1,0\n");
    TabularSchema schema;
    schema.feature_columns = {"z"};
    REQUIRE_THROWS_AS(load_csv(in2, schema), MissingColumn);
  }

  SECTION("malformed numbers report their position") {
    std::stringstream in("x,y,label\n1,2,0\n1,oops,1\n");
    try {
      load_csv(in, TabularSchema{});
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      REQUIRE(e.row == 3);
      REQUIRE(e.col == 2);
    }
  }

  SECTION("ragged rows and empty inputs") {
    std::stringstream ragged("x,label\n1,0,extra\n");
    REQUIRE_THROWS_AS(load_csv(ragged, TabularSchema{}), ParseError);
    std::stringstream headers_only("x,label\n");
    REQUIRE_THROWS_AS(load_csv(headers_only, TabularSchema{}), EmptyDataset);
    std::stringstream empty("");
    REQUIRE_THROWS_AS(load_csv(empty, TabularSchema{}), EmptyDataset);
  }

  SECTION("saving validates the name count") {
    LabeledDataset ds(2);
    ds.add(std::vector<double>{1.0, 2.0}, 0);
    std::stringstream out;
    REQUIRE_THROWS_AS(save_csv(out, ds, {"only_one"}), DimensionMismatch);
  }
}

TEST_CASE("min-max scaling learns ranges from training data only", "[eval]") {
  LabeledDataset train(2);
  train.add(std::vector<double>{0.0, 5.0}, 0);
  train.add(std::vector<double>{10.0, 5.0}, 1);
  train.add(std::vector<double>{4.0, 5.0}, 0);
  train.set_num_classes(2);
  train.assign_tiebreaks(3);

  LabeledDataset test(2);
  test.add(std::vector<double>{20.0, 7.0}, 1);
  test.set_num_classes(2);
  test.assign_tiebreaks(4);

  const MinMaxResult out = minmax_fit_transform(train, test);
  REQUIRE(out.params.lo == std::vector<double>{0.0, 5.0});
  REQUIRE(out.params.hi == std::vector<double>{10.0, 5.0});
  REQUIRE(out.train.row(0)[0] == 0.0);
  REQUIRE(out.train.row(1)[0] == 1.0);
  REQUIRE_THAT(out.train.row(2)[0], WithinRel(0.4, 1e-15));
  for (std::size_t i = 0; i < 3; ++i) REQUIRE(out.train.row(i)[1] == 0.0);  // constant column
  REQUIRE(out.test.row(0)[0] == 2.0);  // outside the training range, on purpose
  REQUIRE(out.test.row(0)[1] == 0.0);

  SECTION("labels and tiebreaks ride along") {
    REQUIRE(out.train.label(1) == 1);
    REQUIRE(out.train.tiebreak(2) == train.tiebreak(2));
    REQUIRE(out.train.num_classes() == 2);
  }

  SECTION("validation") {
    REQUIRE_THROWS_AS(minmax_fit(LabeledDataset(2)), EmptyDataset);
    ScalerParams wrong;
    wrong.lo = {0.0};
    wrong.hi = {1.0};
    REQUIRE_THROWS_AS(minmax_apply(train, wrong), DimensionMismatch);
  }
}

TEST_CASE("pca on collinear points recovers the shared direction", "[eval]") {
  LabeledDataset ds(2);
  for (int i = 0; i < 5; ++i) ds.add(std::vector<double>{static_cast<double>(i), static_cast<double>(i)}, 0);
  ds.set_num_classes(1);
  ds.assign_tiebreaks(5);

  const PcaModel model = pca_fit(ds, 2);
  REQUIRE_THAT(model.mean[0], WithinAbs(2.0, 1e-12));
  // Sample covariance [[2.5, 2.5], [2.5, 2.5]]: eigenvalues 5 and 0.
  REQUIRE_THAT(model.eigenvalues[0], WithinAbs(5.0, 1e-9));
  REQUIRE_THAT(model.eigenvalues[1], WithinAbs(0.0, 1e-9));
  const double c = model.components(0, 0);
  REQUIRE_THAT(std::abs(c), WithinAbs(std::sqrt(0.5), 1e-9));
  REQUIRE_THAT(model.components(1, 0), WithinAbs(c, 1e-9));  // direction (1, 1)

  SECTION("projection is the centered dot product with the component") {
    const PcaModel one = pca_fit(ds, 1);
    const LabeledDataset proj = pca_apply(one, ds);
    REQUIRE(proj.dim() == 1);
    const double s = one.components(0, 0) > 0 ? 1.0 : -1.0;
    for (int i = 0; i < 5; ++i)
      REQUIRE_THAT(proj.row(i)[0], WithinAbs(s * (i - 2.0) * std::sqrt(2.0), 1e-9));
    REQUIRE(proj.label(3) == 0);
    REQUIRE(proj.tiebreak(3) == ds.tiebreak(3));
  }

  SECTION("eigenvalues come out in descending order on generic data") {
    LabeledDataset wide(3);
    std::mt19937_64 eng = make_engine(44);
    std::normal_distribution<double> normal;
    std::vector<double> x(3);
    for (int i = 0; i < 40; ++i) {
      x[0] = 3.0 * normal(eng);
      x[1] = normal(eng);
      x[2] = 0.2 * normal(eng);
      wide.add(x, 0);
    }
    wide.set_num_classes(1);
    wide.assign_tiebreaks(6);
    const PcaModel m = pca_fit(wide, 3);
    REQUIRE(m.eigenvalues[0] >= m.eigenvalues[1]);
    REQUIRE(m.eigenvalues[1] >= m.eigenvalues[2]);
  }

  SECTION("validation") {
    REQUIRE_THROWS_AS(pca_fit(ds, 0), RankTooSmall);
    REQUIRE_THROWS_AS(pca_fit(ds, 3), RankTooSmall);
    LabeledDataset tiny(2);
    tiny.add(std::vector<double>{1.0, 2.0}, 0);
    REQUIRE_THROWS_AS(pca_fit(tiny, 1), TooSmall);
    LabeledDataset wrong(3);
    wrong.add(std::vector<double>{1.0, 2.0, 3.0}, 0);
    REQUIRE_THROWS_AS(pca_apply(pca_fit(ds, 1), wrong), DimensionMismatch);
  }
}

TEST_CASE("per-class coordinate-wise medians", "[eval]") {
  LabeledDataset ds(2);
  ds.add(std::vector<double>{1.0, 10.0}, 0);
  ds.add(std::vector<double>{3.0, 14.0}, 0);
  ds.add(std::vector<double>{2.0, 100.0}, 0);
  ds.add(std::vector<double>{5.0, 0.0}, 1);
  ds.add(std::vector<double>{9.0, 2.0}, 1);
  ds.set_num_classes(2);
  ds.assign_tiebreaks(7);

  const auto centroids = median_centroids(ds);
  REQUIRE(centroids.size() == 2);
  REQUIRE(centroids[0] == std::vector<double>{2.0, 14.0});  // odd count: middle value
  REQUIRE(centroids[1] == std::vector<double>{7.0, 1.0});   // even count: midpoint

  LabeledDataset holes(1);
  holes.add(std::vector<double>{1.0}, 0);
  holes.set_num_classes(3);
  holes.assign_tiebreaks(8);
  REQUIRE_THROWS_AS(median_centroids(holes), ClassTooSmall);
  REQUIRE_THROWS_AS(median_centroids(LabeledDataset(2)), EmptyDataset);
}

TEST_CASE("stratified one-per-class holdout", "[eval]") {
  LabeledDataset ds(1);
  for (int i = 0; i < 5; ++i) ds.add(std::vector<double>{static_cast<double>(i)}, 0);
  for (int i = 5; i < 8; ++i) ds.add(std::vector<double>{static_cast<double>(i)}, 1);
  ds.set_num_classes(2);
  ds.assign_tiebreaks(10);

  const StratifiedSplit split = stratified_leave_one_per_class(ds, 31);
  REQUIRE(split.test.size() == 2);
  REQUIRE(split.train.size() == 6);
  REQUIRE(split.test.label(0) != split.test.label(1));

  std::set<double> all;
  for (std::size_t i = 0; i < 6; ++i) all.insert(split.train.row(i)[0]);
  for (std::size_t i = 0; i < 2; ++i) all.insert(split.test.row(i)[0]);
  REQUIRE(all.size() == 8);

  const StratifiedSplit again = stratified_leave_one_per_class(ds, 31);
  REQUIRE(again.test.row(0)[0] == split.test.row(0)[0]);

  LabeledDataset lonely(1);
  lonely.add(std::vector<double>{0.0}, 0);
  lonely.add(std::vector<double>{1.0}, 1);
  lonely.add(std::vector<double>{2.0}, 1);
  lonely.set_num_classes(2);
  lonely.assign_tiebreaks(11);
  REQUIRE_THROWS_AS(stratified_leave_one_per_class(lonely, 1), ClassTooSmall);
}

TEST_CASE("trial reports survive the json round trip", "[eval]") {
  TrialReport r;
  r.distance_label = "comb:0.5*lp:1+0.5*lp:2";
  r.accuracies = {0.8, 0.9, 0.85};
  r.mean = 0.85;
  r.ci_lo = 0.72;
  r.ci_hi = 0.98;
  r.alpha = 0.1;
  r.k_selected = {3, 5, 3};
  r.seed = 1234567890123456789ULL;
  r.repeat_seeds = {1, 2, 3};
  r.wall_time_s = 0.125;
  r.n_train = 500;
  r.n_test = 250;
  r.k_max = 20;

  const nlohmann::json j = to_json(r);
  REQUIRE(j.at("distance") == "comb:0.5*lp:1+0.5*lp:2");
  REQUIRE(j.at("repeats") == 3);
  REQUIRE(j.at("ci").at("alpha") == 0.1);

  // Through text and back: nothing lost, including the 64-bit seed.
  const TrialReport back = trial_report_from_json(nlohmann::json::parse(j.dump()));
  REQUIRE(back.distance_label == r.distance_label);
  REQUIRE(back.accuracies == r.accuracies);
  REQUIRE(back.mean == r.mean);
  REQUIRE(back.ci_lo == r.ci_lo);
  REQUIRE(back.ci_hi == r.ci_hi);
  REQUIRE(back.alpha == r.alpha);
  REQUIRE(back.k_selected == r.k_selected);
  REQUIRE(back.seed == r.seed);
  REQUIRE(back.repeat_seeds == r.repeat_seeds);
  REQUIRE(back.wall_time_s == r.wall_time_s);
  REQUIRE(back.n_train == r.n_train);
  REQUIRE(back.n_test == r.n_test);
  REQUIRE(back.k_max == r.k_max);
}
