#include "drft/metrics.hpp"

#include <algorithm>

#include "drft/errors.hpp"

namespace drft {

double tiou(const TimeInterval& a, const TimeInterval& b) {
    const double inter = std::min(a.t_e, b.t_e) - std::max(a.t_s, b.t_s);
    const double uni = std::max(a.t_e, b.t_e) - std::min(a.t_s, b.t_s);
    if (uni <= 0.0) {
        // Both intervals are zero-length.
        return a.t_s == b.t_s ? 1.0 : 0.0;
    }
    return inter > 0.0 ? inter / uni : 0.0;
}

double recall_at(const std::vector<IntervalPair>& pairs, double threshold) {
    if (pairs.empty()) throw ContractError("recall_at: empty pair list");
    int hits = 0;
    for (const IntervalPair& p : pairs) {
        if (tiou(p.pred, p.gt) >= threshold) ++hits;
    }
    return 100.0 * hits / static_cast<double>(pairs.size());
}

double mean_tiou(const std::vector<IntervalPair>& pairs) {
    if (pairs.empty()) throw ContractError("mean_tiou: empty pair list");
    double acc = 0.0;
    for (const IntervalPair& p : pairs) acc += tiou(p.pred, p.gt);
    return 100.0 * acc / static_cast<double>(pairs.size());
}

EvalResult evaluate_pairs(const std::vector<IntervalPair>& pairs,
                          const std::vector<ActionLabel>& labels,
                          const std::vector<double>& thresholds) {
    if (pairs.size() != labels.size()) {
        throw ShapeError("evaluate_pairs: " + std::to_string(pairs.size()) + " pairs vs " +
                         std::to_string(labels.size()) + " labels");
    }
    EvalResult result;
    result.overall.count = static_cast<int>(pairs.size());
    result.overall.mean_tiou = mean_tiou(pairs);
    for (double th : thresholds) result.overall.recall_at[th] = recall_at(pairs, th);

    std::map<ActionLabel, std::vector<IntervalPair>> by_label;
    for (size_t i = 0; i < pairs.size(); ++i) by_label[labels[i]].push_back(pairs[i]);
    for (const auto& [label, group] : by_label) {
        CategoryMetrics m;
        m.count = static_cast<int>(group.size());
        m.mean_tiou = mean_tiou(group);
        for (double th : thresholds) m.recall_at[th] = recall_at(group, th);
        result.per_category[label] = std::move(m);
    }
    return result;
}

}  // namespace drft
