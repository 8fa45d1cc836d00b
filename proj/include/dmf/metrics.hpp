#pragma once

#include <cmath>
#include <span>
#include <utility>

#include "dmf/errors.hpp"

namespace dmf {

/// (prediction, target) in the original rating domain.
using PredictionPair = std::pair<double, double>;

inline double rmse(std::span<const PredictionPair> pairs) {
    if (pairs.empty()) throw ValidationError("rmse of an empty pair list");
    double s = 0.0;
    for (const auto& [r, m] : pairs) s += (r - m) * (r - m);
    return std::sqrt(s / static_cast<double>(pairs.size()));
}

inline double mae(std::span<const PredictionPair> pairs) {
    if (pairs.empty()) throw ValidationError("mae of an empty pair list");
    double s = 0.0;
    for (const auto& [r, m] : pairs) s += std::fabs(r - m);
    return s / static_cast<double>(pairs.size());
}

}  // namespace dmf
