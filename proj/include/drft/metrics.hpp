#pragma once

#include <map>
#include <vector>

#include "drft/data.hpp"
#include "drft/interval.hpp"

namespace drft {

// Temporal intersection-over-union on the real line. Both zero-length and
// equal counts as 1; both zero-length and unequal as 0.
double tiou(const TimeInterval& a, const TimeInterval& b);

struct IntervalPair {
    TimeInterval pred;
    TimeInterval gt;
};

// 100 * |{ tiou >= threshold }| / |pairs|
double recall_at(const std::vector<IntervalPair>& pairs, double threshold);
// 100 * mean tiou
double mean_tiou(const std::vector<IntervalPair>& pairs);

struct CategoryMetrics {
    std::map<double, double> recall_at;  // threshold -> percentage
    double mean_tiou = 0.0;
    int count = 0;
};

struct EvalResult {
    CategoryMetrics overall;
    std::map<ActionLabel, CategoryMetrics> per_category;
};

EvalResult evaluate_pairs(const std::vector<IntervalPair>& pairs,
                          const std::vector<ActionLabel>& labels,
                          const std::vector<double>& thresholds = {0.3, 0.5, 0.7});

}  // namespace drft
