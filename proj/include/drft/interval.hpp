#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

namespace drft {

// Normalized time interval on [0,1]; the grounding target and prediction.
struct TimeInterval {
    double t_s = 0.0;
    double t_e = 0.0;

    bool valid() const { return 0.0 <= t_s && t_s <= t_e && t_e <= 1.0; }
};

// Maps a normalized interval onto segment indices [first, last] (inclusive),
// clamped to [0, T-1]. An interval collapsing to zero segments yields the
// single segment at floor(t_s * T).
inline std::pair<int, int> segment_range(const TimeInterval& iv, int segments) {
    int first = static_cast<int>(std::floor(iv.t_s * segments));
    int last = static_cast<int>(std::ceil(iv.t_e * segments)) - 1;
    first = std::clamp(first, 0, segments - 1);
    last = std::clamp(last, 0, segments - 1);
    if (last < first) last = first;
    return {first, last};
}

}  // namespace drft
