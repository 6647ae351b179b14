// Command-line front end: dataset generation, repeated k-NN evaluation,
// locally adaptive k-NN, and the consistency experiments.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flexknn/flexknn.hpp"

namespace {

using namespace flexknn;

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(part);
  return out;
}

double to_double(const std::string& s) { return detail::parse_double(s); }

// "nm[,tol=T,iters=N]" or "sa[,t0=T,cool=C,steps=S,scale=W,evals=N]".
// The per-query budget still caps iteration counts, and the annealer's seed is
// derived per query, so those knobs set upper bounds and shapes only.
Optimizer parse_optimizer(const std::string& text) {
  const std::vector<std::string> parts = split_commas(text);
  if (parts.empty()) throw InvalidParameter("empty optimizer string");

  auto kv = [&](const std::string& part) {
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos) throw InvalidParameter("expected key=value in optimizer string: " + part);
    return std::pair<std::string, std::string>(part.substr(0, eq), part.substr(eq + 1));
  };

  if (parts[0] == "nm") {
    NelderMeadOptions o;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const auto [key, val] = kv(parts[i]);
      if (key == "tol")
        o.tol = to_double(val);
      else if (key == "iters")
        o.max_iter = static_cast<int>(to_double(val));
      else
        throw InvalidParameter("unknown nm option: " + key);
    }
    return o;
  }
  if (parts[0] == "sa") {
    AnnealingOptions o;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const auto [key, val] = kv(parts[i]);
      if (key == "t0")
        o.t0 = to_double(val);
      else if (key == "cool")
        o.cooling = to_double(val);
      else if (key == "steps")
        o.steps_per_temp = static_cast<int>(to_double(val));
      else if (key == "scale")
        o.step_scale = to_double(val);
      else if (key == "evals")
        o.max_evals = static_cast<int>(to_double(val));
      else
        throw InvalidParameter("unknown sa option: " + key);
    }
    return o;
  }
  throw InvalidParameter("optimizer must be 'nm' or 'sa', got '" + parts[0] + "'");
}

// "matlp:diag[,lo,hi,p,plo,phi]", "matlp:full[,...]" or "matpoly[:degD]".
ParamFamily parse_family(const std::string& text) {
  if (text.starts_with("matlp:")) {
    const std::vector<std::string> parts = split_commas(text.substr(6));
    MatrixLpFamily f;
    if (parts.empty() || (parts[0] != "diag" && parts[0] != "full"))
      throw InvalidParameter("matlp family needs shape 'diag' or 'full'");
    f.shape = parts[0] == "diag" ? MatrixShape::diagonal : MatrixShape::full;
    if (parts.size() > 1) {
      if (parts.size() != 6 || parts[3] != "p")
        throw InvalidParameter("matlp family syntax: matlp:SHAPE,lo,hi,p,plo,phi");
      f.entry_lo = to_double(parts[1]);
      f.entry_hi = to_double(parts[2]);
      f.p_lo = to_double(parts[4]);
      f.p_hi = to_double(parts[5]);
    }
    return f;
  }
  if (text.starts_with("matpoly")) {
    MatrixPolynomialFamily f;
    if (text.starts_with("matpoly:deg")) f.degree = static_cast<int>(to_double(text.substr(11)));
    else if (text != "matpoly") throw InvalidParameter("matpoly family syntax: matpoly or matpoly:degD");
    return f;
  }
  throw InvalidParameter("unknown family '" + text + "'");
}

DatasetSource make_source(const std::string& data_path, const std::string& label_column) {
  if (data_path.empty()) return polynomial_source();
  TabularSchema schema;
  schema.label_column = label_column;
  return resample_source(load_csv(data_path, schema).data);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

void print_report(const TrialReport& r) {
  std::cout << r.distance_label << ": mean accuracy " << r.mean << "  (" << (1.0 - r.alpha) * 100
            << "% CI [" << r.ci_lo << ", " << r.ci_hi << "], " << r.accuracies.size() << " repeats, "
            << r.wall_time_s << " s)\n";
}

int run_datagen(int n_train, int n_test, std::uint64_t seed, const std::string& out_path) {
  const PolynomialDatasetPair pair = generate_polynomial_dataset(n_train, n_test, seed);
  LabeledDataset all(pair.train.dim());
  all.reserve(pair.train.size() + pair.test.size());
  for (std::size_t i = 0; i < pair.train.size(); ++i) all.add(pair.train.row(i), pair.train.label(i));
  for (std::size_t i = 0; i < pair.test.size(); ++i) all.add(pair.test.row(i), pair.test.label(i));

  std::vector<std::string> names;
  for (std::size_t i = 1; i <= all.dim(); ++i) names.push_back("x" + std::to_string(i));
  save_csv(out_path, all, names);
  std::cout << "wrote " << all.size() << " rows (" << n_train << " train + " << n_test << " test) to "
            << out_path << '\n';
  return 0;
}

int run_eval(const std::string& data_path, const std::string& label_column, const std::string& specs_text,
             const EvalConfig& cfg, const std::string& out_path) {
  std::vector<DistanceSpec> specs;
  for (const std::string& s : split_spec_list(specs_text)) specs.push_back(DistanceSpec::parse(s));

  const DatasetSource source = make_source(data_path, label_column);
  const std::vector<TrialReport> reports = repeated_eval(source, specs, cfg);

  nlohmann::json arr = nlohmann::json::array();
  for (const TrialReport& r : reports) {
    print_report(r);
    arr.push_back(to_json(r));
  }
  write_json(out_path, arr);
  std::cout << "report written to " << out_path << '\n';
  return 0;
}

int run_localknn(const std::string& data_path, const std::string& label_column, const std::string& base_text,
                 const std::string& family_text, const std::string& opt_text, const LocalMetricQuery& query_in,
                 const EvalConfig& cfg, const std::string& out_path) {
  LocalEvalConfig local_cfg;
  local_cfg.eval = cfg;
  local_cfg.query = query_in;
  local_cfg.query.base_spec = DistanceSpec::parse(base_text);
  local_cfg.query.family = parse_family(family_text);
  local_cfg.optimizer = parse_optimizer(opt_text);

  const DatasetSource source = make_source(data_path, label_column);

  const std::vector<TrialReport> base = repeated_eval(source, {local_cfg.query.base_spec}, cfg);
  print_report(base[0]);
  const TrialReport local = local_knn_eval(source, local_cfg);
  print_report(local);

  nlohmann::json arr = nlohmann::json::array();
  arr.push_back(to_json(base[0]));
  arr.push_back(to_json(local));
  write_json(out_path, arr);
  std::cout << "report written to " << out_path << '\n';
  return 0;
}

int run_consistency(const std::string& experiment, const std::vector<int>& ns, int k, long trials,
                    std::uint64_t seed, const std::string& out_path) {
  std::ostringstream csv;
  csv << "experiment,n,k,error,std_err,lower_bound\n";
  auto num = [](double v) { return detail::format_double(v); };
  auto emit = [&](const std::string& name, int n, int kk, double error, double std_err, double bound) {
    const std::string line = name + "," + std::to_string(n) + "," + std::to_string(kk) + "," + num(error) +
                             "," + num(std_err) + "," + num(bound);
    csv << line << '\n';
    std::cout << line << '\n';
  };

  const DistanceSpec euclid = DistanceSpec::euclidean();
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const int n = ns[i];
    const std::uint64_t s = child_seed(seed, i);
    if (experiment == "fuzzy") {
      const ErrorEstimate e = estimate_error(SyntheticDistribution::fuzzy_concept(), knn_rule(euclid, k), n, k,
                                             trials, s);
      emit(experiment, n, k, e.error, e.std_err, 0.0);
    } else if (experiment == "deterministic") {
      const ErrorEstimate e = estimate_error(SyntheticDistribution::deterministic_concept(), knn_rule(euclid, k),
                                             n, k, trials, s);
      emit(experiment, n, k, e.error, e.std_err, 0.0);
    } else if (experiment == "badnorm-above" || experiment == "badnorm-below") {
      const BadNormSchedule sched = experiment == "badnorm-above" ? BadNormSchedule::unbounded_above
                                                                  : BadNormSchedule::unbounded_below;
      const ErrorEstimate e = bad_norm_error(sched, n, k, trials, s);
      emit(experiment, n, k, e.error, e.std_err, 0.0);
    } else if (experiment == "farbound") {
      const FarProbability fp = far_probability(BadNormSchedule::unbounded_above, n, trials, s);
      emit(experiment, n, 0, fp.empirical, fp.std_err, fp.lower_bound);
    } else if (experiment == "circle") {
      const CircleCounterexample c = circle_counterexample(n);
      long bad = 0;
      for (unsigned char ok : c.per_point_ok) bad += ok ? 0 : 1;
      emit(experiment, n, 0, static_cast<double>(bad) / static_cast<double>(n), 0.0, 0.0);
    } else if (experiment == "labelweights") {
      const LabelWeightExperiment lw = label_dependent_rule_error(n, k, trials, s);
      emit(experiment + "-biased", n, k, lw.biased.error, lw.biased.std_err, 0.0);
      emit(experiment + "-plain", n, k, lw.plain.error, lw.plain.std_err, 0.0);
    } else {
      throw InvalidParameter("unknown experiment '" + experiment + "'");
    }
  }

  std::ofstream out(out_path);
  if (!out) throw Error("cannot open '" + out_path + "' for writing");
  out << csv.str();
  std::cout << "sweep written to " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"k-NN with pluggable distances: evaluation, local adaptation, consistency experiments"};
  app.require_subcommand(1);

  // datagen
  auto* datagen = app.add_subcommand("datagen", "generate the polynomial benchmark dataset as CSV");
  int dg_train = 500, dg_test = 500;
  std::uint64_t dg_seed = 0;
  std::string dg_out = "data.csv";
  std::string dg_kind = "poly";
  datagen->add_option("kind", dg_kind, "dataset kind")->check(CLI::IsMember({"poly"}));
  datagen->add_option("--train", dg_train, "training rows");
  datagen->add_option("--test", dg_test, "test rows");
  datagen->add_option("--seed", dg_seed, "rng seed");
  datagen->add_option("--out", dg_out, "output CSV path");

  // eval
  auto* eval = app.add_subcommand("eval", "repeated k-NN evaluation over one or more distance specs");
  std::string ev_data, ev_label = "label", ev_specs = "lp:2", ev_out = "report.json";
  EvalConfig ev_cfg;
  eval->add_option("--data", ev_data, "CSV path; omit to draw from the polynomial benchmark");
  eval->add_option("--label", ev_label, "label column name");
  eval->add_option("--specs", ev_specs, "comma-separated distance specs, e.g. 'lp:2,lp:0.25,fn:arctan'");
  eval->add_option("--repeats", ev_cfg.repeats, "independent repeats");
  eval->add_option("--kmax", ev_cfg.k_max, "largest k tried by the grid search");
  eval->add_option("--folds", ev_cfg.folds, "validation folds per grid search");
  eval->add_option("--alpha", ev_cfg.alpha, "interval level (0.05 gives 95%)");
  eval->add_option("--train", ev_cfg.n_train, "training rows per repeat");
  eval->add_option("--test", ev_cfg.n_test, "test rows per repeat");
  eval->add_option("--seed", ev_cfg.seed, "rng seed");
  eval->add_option("--out", ev_out, "JSON report path");

  // localknn
  auto* local = app.add_subcommand("localknn", "locally adaptive k-NN vs. its base distance");
  std::string lc_data, lc_label = "label", lc_base = "lp:2", lc_family = "matlp:diag", lc_opt = "nm";
  std::string lc_out = "local_report.json";
  EvalConfig lc_cfg;
  lc_cfg.repeats = 10;
  LocalMetricQuery lc_query;
  local->add_option("--data", lc_data, "CSV path; omit to draw from the polynomial benchmark");
  local->add_option("--label", lc_label, "label column name");
  local->add_option("--base", lc_base, "base distance spec");
  local->add_option("--family", lc_family, "search family: matlp:diag[,lo,hi,p,plo,phi], matlp:full[...], matpoly[:degD]");
  local->add_option("--opt", lc_opt, "optimizer: nm[,tol=T,iters=N] or sa[,t0=T,cool=C,steps=S,scale=W,evals=N]");
  local->add_option("--k1", lc_query.k1, "selection queries per prediction");
  local->add_option("--k2", lc_query.k2, "neighborhood size behind the correlation objective");
  local->add_option("--m", lc_query.m, "support multiplier: re-rank the m*k base-nearest points");
  local->add_option("--budget", lc_query.optimizer_budget, "objective evaluation budget per prediction");
  local->add_option("--min-gain", lc_query.min_gain_se,
                    "objective improvement required before adapting, in null-Pearson standard errors (<=0 keeps all)");
  local->add_option("--repeats", lc_cfg.repeats, "independent repeats");
  local->add_option("--kmax", lc_cfg.k_max, "largest k tried by the grid search");
  local->add_option("--folds", lc_cfg.folds, "validation folds per grid search");
  local->add_option("--alpha", lc_cfg.alpha, "interval level");
  local->add_option("--train", lc_cfg.n_train, "training rows per repeat");
  local->add_option("--test", lc_cfg.n_test, "test rows per repeat");
  local->add_option("--seed", lc_cfg.seed, "rng seed");
  local->add_option("--out", lc_out, "JSON report path");

  // consistency
  auto* cons = app.add_subcommand("consistency", "Monte Carlo consistency and counterexample sweeps");
  std::string cs_experiment, cs_out = "sweep.csv";
  std::vector<int> cs_ns;
  int cs_k = 1;
  long cs_trials = 10000;
  std::uint64_t cs_seed = 0;
  cons->add_option("--experiment", cs_experiment, "one of: fuzzy, deterministic, badnorm-above, badnorm-below, farbound, circle, labelweights")
      ->required()
      ->check(CLI::IsMember({"fuzzy", "deterministic", "badnorm-above", "badnorm-below", "farbound", "circle",
                             "labelweights"}));
  cons->add_option("--n", cs_ns, "sample sizes to sweep")->required()->expected(-1);
  cons->add_option("--k", cs_k, "neighbors per vote");
  cons->add_option("--trials", cs_trials, "Monte Carlo trials per sweep point");
  cons->add_option("--seed", cs_seed, "rng seed");
  cons->add_option("--out", cs_out, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*datagen) return run_datagen(dg_train, dg_test, dg_seed, dg_out);
    if (*eval) return run_eval(ev_data, ev_label, ev_specs, ev_cfg, ev_out);
    if (*local) return run_localknn(lc_data, lc_label, lc_base, lc_family, lc_opt, lc_query, lc_cfg, lc_out);
    if (*cons) return run_consistency(cs_experiment, cs_ns, cs_k, cs_trials, cs_seed, cs_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
