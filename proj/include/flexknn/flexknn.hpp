#pragma once

// Umbrella header.

#include "flexknn/consistency.hpp"
#include "flexknn/csv.hpp"
#include "flexknn/dataset.hpp"
#include "flexknn/distance.hpp"
#include "flexknn/distributions.hpp"
#include "flexknn/errors.hpp"
#include "flexknn/eval.hpp"
#include "flexknn/family_bounds.hpp"
#include "flexknn/knn.hpp"
#include "flexknn/matrix.hpp"
#include "flexknn/metric_learning.hpp"
#include "flexknn/optimize.hpp"
#include "flexknn/parallel.hpp"
#include "flexknn/preprocess.hpp"
#include "flexknn/report_json.hpp"
#include "flexknn/rng.hpp"
#include "flexknn/stats.hpp"
