#pragma once

#include <json.hpp>

#include "flexknn/eval.hpp"

namespace flexknn {

inline nlohmann::json to_json(const TrialReport& r) {
  return nlohmann::json{
      {"distance", r.distance_label},
      {"n_train", r.n_train},
      {"n_test", r.n_test},
      {"k_max", r.k_max},
      {"repeats", r.accuracies.size()},
      {"accuracies", r.accuracies},
      {"mean_accuracy", r.mean},
      {"ci", {{"alpha", r.alpha}, {"lo", r.ci_lo}, {"hi", r.ci_hi}}},
      {"k_selected", r.k_selected},
      {"seeds", {{"root", r.seed}, {"repeats", r.repeat_seeds}}},
      {"wall_time_s", r.wall_time_s},
  };
}

inline TrialReport trial_report_from_json(const nlohmann::json& j) {
  TrialReport r;
  r.distance_label = j.at("distance").get<std::string>();
  r.n_train = j.at("n_train").get<int>();
  r.n_test = j.at("n_test").get<int>();
  r.k_max = j.at("k_max").get<int>();
  r.accuracies = j.at("accuracies").get<std::vector<double>>();
  r.mean = j.at("mean_accuracy").get<double>();
  const auto& ci = j.at("ci");
  r.alpha = ci.at("alpha").get<double>();
  r.ci_lo = ci.at("lo").get<double>();
  r.ci_hi = ci.at("hi").get<double>();
  r.k_selected = j.at("k_selected").get<std::vector<int>>();
  const auto& seeds = j.at("seeds");
  r.seed = seeds.at("root").get<std::uint64_t>();
  r.repeat_seeds = seeds.at("repeats").get<std::vector<std::uint64_t>>();
  r.wall_time_s = j.at("wall_time_s").get<double>();
  return r;
}

}  // namespace flexknn
