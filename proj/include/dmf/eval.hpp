#pragma once

// RMSE/MAE reports over the evaluation entries, split by area, plus the
// round-after-prediction baseline.

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dmf/data.hpp"
#include "dmf/errors.hpp"
#include "dmf/metrics.hpp"
#include "dmf/model.hpp"
#include "dmf/quantizer.hpp"
#include "dmf/train.hpp"
#include "json.hpp"

namespace dmf {

enum class EvalMode {
    real,     ///< real-valued predictions
    discrete, ///< hard quantizer of a quantized model
    rounded,  ///< real-valued predictions rounded to the nearest level
};

inline const char* eval_mode_name(EvalMode m) {
    switch (m) {
        case EvalMode::real: return "real-valued";
        case EvalMode::discrete: return "discrete";
        case EvalMode::rounded: return "rounded-baseline";
    }
    return "?";
}

/// Nearest of the uniformly spaced `levels`; ties go to the upper level and
/// values outside the range clamp to the extremes.
inline double round_to_level(double x, std::span<const double> levels) {
    const double delta = levels[1] - levels[0];
    const double t = std::floor((x - levels.front()) / delta + 0.5);
    if (!(t > 0.0)) return levels.front();
    const auto idx = static_cast<std::size_t>(t);
    return idx >= levels.size() ? levels.back() : levels[idx];
}

struct ScopeMetrics {
    std::size_t count = 0;
    std::optional<double> rmse;  ///< absent when the scope is empty
    std::optional<double> mae;
};

struct MetricsReport {
    EvalMode mode = EvalMode::real;
    ScopeMetrics overall;
    std::array<ScopeMetrics, 4> areas;

    const ScopeMetrics& area(Area a) const { return areas[static_cast<std::size_t>(a)]; }

    /// Non-negative metrics, RMSE >= MAE in every scope, and area counts (when
    /// reported) sum to the overall count.
    void check() const {
        std::size_t total = 0;
        auto one = [](const ScopeMetrics& s, const std::string& name) {
            if (!s.rmse) return;
            if (*s.rmse < 0.0 || *s.mae < 0.0) throw ValidationError(name + ": negative metric");
            if (*s.rmse < *s.mae * (1.0 - 1e-12)) throw ValidationError(name + ": RMSE below MAE");
        };
        one(overall, "overall");
        for (Area a : kAllAreas) {
            one(area(a), std::string("area ") + area_name(a));
            total += area(a).count;
        }
        if (total != 0 && total != overall.count) throw ValidationError("area counts do not sum to the evaluation count");
    }

    std::string to_csv() const {
        std::ostringstream out;
        out.precision(17);
        out << "scope,count,rmse,mae,mode\n";
        auto row = [&](const std::string& name, const ScopeMetrics& s) {
            out << name << ',' << s.count << ',';
            if (s.rmse) out << *s.rmse;
            out << ',';
            if (s.mae) out << *s.mae;
            out << ',' << eval_mode_name(mode) << '\n';
        };
        row("overall", overall);
        for (Area a : kAllAreas) row(std::string("area_") + area_name(a), area(a));
        return out.str();
    }

    nlohmann::ordered_json to_json() const {
        auto scope = [](const ScopeMetrics& s) {
            nlohmann::ordered_json j;
            j["count"] = s.count;
            j["rmse"] = s.rmse ? nlohmann::ordered_json(*s.rmse) : nlohmann::ordered_json();
            j["mae"] = s.mae ? nlohmann::ordered_json(*s.mae) : nlohmann::ordered_json();
            return j;
        };
        nlohmann::ordered_json j;
        j["mode"] = eval_mode_name(mode);
        j["overall"] = scope(overall);
        for (Area a : kAllAreas) j["areas"][area_name(a)] = scope(area(a));
        return j;
    }

    /// One table row of RMSE per area, "-" for empty areas.
    std::string area_table(const std::string& label) const {
        std::ostringstream out;
        out.setf(std::ios::fixed);
        out.precision(3);
        out << "| model | (I) | (II) | (III) | (IV) |\n|---|---|---|---|---|\n| " << label;
        for (Area a : kAllAreas) {
            out << " | ";
            if (area(a).rmse) {
                out << *area(a).rmse;
            } else {
                out << '-';
            }
        }
        out << " |\n";
        return out.str();
    }
};

namespace detail {

inline ScopeMetrics scope_metrics(std::span<const PredictionPair> pairs) {
    ScopeMetrics s;
    s.count = pairs.size();
    if (!pairs.empty()) {
        s.rmse = rmse(pairs);
        s.mae = mae(pairs);
    }
    return s;
}

inline std::vector<PredictionPair> mode_predictions(const DmfModel& model, const InputIndex& inputs,
                                                    const RatingMatrix& scaled, std::span<const std::size_t> entries,
                                                    EvalMode mode, std::span<const double> levels) {
    if (mode == EvalMode::discrete && !model.quantizer) throw StateError("model lacks a quantizer");
    auto pairs = predict_entries(model, inputs, scaled, entries, mode == EvalMode::discrete);
    if (mode == EvalMode::rounded)
        for (auto& p : pairs) p.first = round_to_level(p.first, levels);
    return pairs;
}

}  // namespace detail

/// Rating-domain levels for the rounded baseline: `count` uniform levels
/// from alpha to beta.
inline std::vector<double> rating_levels(const RatingScale& s, std::size_t count) {
    return uniform_levels(s.alpha(), s.beta(), count);
}

/// Metrics for each area of `areas` (already restricted to the evaluation
/// entries) and for their union.
inline MetricsReport evaluate_areas(const DmfModel& model, const InputIndex& inputs, const RatingMatrix& scaled,
                                    const AreaSplit& areas, EvalMode mode, std::size_t level_count = 5) {
    const std::vector<double> levels = rating_levels(model.scale, level_count);
    MetricsReport report;
    report.mode = mode;
    std::vector<PredictionPair> all;
    for (Area a : kAllAreas) {
        const auto pairs = detail::mode_predictions(model, inputs, scaled, areas.area(a), mode, levels);
        report.areas[static_cast<std::size_t>(a)] = detail::scope_metrics(pairs);
        all.insert(all.end(), pairs.begin(), pairs.end());
    }
    report.overall = detail::scope_metrics(all);
    report.check();
    return report;
}

/// Real-valued predictions rounded to the nearest rating level, over
/// `entries`. Only the overall scope is filled.
inline MetricsReport rounded_baseline(const DmfModel& model, const InputIndex& inputs, const RatingMatrix& scaled,
                                      std::span<const std::size_t> entries, std::size_t level_count = 5) {
    const std::vector<double> levels = rating_levels(model.scale, level_count);
    MetricsReport report;
    report.mode = EvalMode::rounded;
    const auto pairs = detail::mode_predictions(model, inputs, scaled, entries, EvalMode::rounded, levels);
    report.overall = detail::scope_metrics(pairs);
    report.check();
    return report;
}

}  // namespace dmf
