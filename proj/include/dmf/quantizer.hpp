#pragma once

// Hard quantizer over uniformly spaced levels, its sigmoid relaxation, the
// uniform reference boundaries with their squared-distance penalty, and the
// geometric sharpness schedule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dmf/errors.hpp"
#include "dmf/ndcore.hpp"
#include "json.hpp"

namespace dmf {

/// Geometric sharpness schedule: lambda(t) = start * (end / start)^(t / epochs).
struct LambdaSchedule {
    double start = 5.0;
    double end = 1e3;
    std::size_t epochs = 1;

    void validate() const {
        if (!(start > 0.0) || !(end >= start) || !std::isfinite(end)) {
            throw ConfigError("lambda schedule requires 0 < start <= end");
        }
    }
};

/// Sharpness at epoch `t`; clamps to `end` for t >= epochs.
inline double anneal(const LambdaSchedule& s, std::size_t t) {
    s.validate();
    if (s.epochs == 0 || t >= s.epochs) return s.end;
    if (t == 0) return s.start;
    return s.start * std::pow(s.end / s.start, static_cast<double>(t) / static_cast<double>(s.epochs));
}

/// Boundaries halfway between adjacent levels, with outer boundaries half a
/// step beyond the extreme levels. Throws unless the levels are uniformly
/// spaced.
inline std::vector<double> uniform_reference(std::span<const double> levels) {
    if (levels.size() < 2) throw ConfigError("quantizer needs at least two levels");
    const double delta = levels[1] - levels[0];
    if (!(delta > 0.0)) throw ConfigError("quantizer levels must be strictly increasing");
    for (std::size_t v = 1; v + 1 < levels.size(); ++v) {
        if (std::fabs((levels[v + 1] - levels[v]) - delta) > 1e-9 * std::max(1.0, std::fabs(delta))) {
            throw ConfigError("quantizer levels must be uniformly spaced");
        }
    }
    std::vector<double> b(levels.size() + 1);
    b.front() = levels.front() - delta / 2.0;
    b.back() = levels.back() + delta / 2.0;
    for (std::size_t v = 1; v < levels.size(); ++v) b[v] = (levels[v - 1] + levels[v]) / 2.0;
    return b;
}

/// `count` levels spread uniformly over [lo, hi].
inline std::vector<double> uniform_levels(double lo, double hi, std::size_t count) {
    if (count < 2 || !(lo < hi)) throw ConfigError("uniform_levels needs count >= 2 and lo < hi");
    std::vector<double> out(count);
    for (std::size_t v = 0; v < count; ++v) {
        out[v] = lo + (hi - lo) * static_cast<double>(v) / static_cast<double>(count - 1);
    }
    out.back() = hi;
    return out;
}

struct SoftGrad {
    double dx = 0.0;         ///< dG/dx
    double dboundary = 0.0;  ///< dG/d(active interior boundary)
    std::size_t segment = 0; ///< active interior boundary index (0-based)
};

/// Levels I_1 < ... < I_d with constant gap, boundaries b_0 < ... < b_d.
/// The outer boundaries stay at the reference endpoints; the d-1 interior
/// boundaries are stored as a tensor so they can sit on a tape.
class Quantizer {
public:
    static constexpr double kMinGap = 1e-4;

    static Quantizer uniform(std::vector<double> levels, double lambda = 5.0) {
        auto reference = uniform_reference(levels);
        return Quantizer(std::move(levels), reference, lambda);
    }

    Quantizer(std::vector<double> levels, std::vector<double> boundaries, double lambda)
        : levels_(std::move(levels)), reference_(uniform_reference(levels_)), lambda_(lambda) {
        delta_ = levels_[1] - levels_[0];
        if (boundaries.size() != levels_.size() + 1) throw ConfigError("quantizer needs levels + 1 boundaries");
        if (boundaries.front() != reference_.front() || boundaries.back() != reference_.back()) {
            throw ConfigError("outer quantizer boundaries must equal the reference endpoints");
        }
        interior_ = Tensor::vector(std::vector<double>(boundaries.begin() + 1, boundaries.end() - 1));
        check_order();
        if (!(lambda_ > 0.0)) throw ConfigError("quantizer sharpness must be positive");
        knots_.assign(levels_.begin(), levels_.end() - 1);
        knots_.front() = reference_.front();
        knots_.push_back(reference_.back());
    }

    std::size_t level_count() const noexcept { return levels_.size(); }
    const std::vector<double>& levels() const noexcept { return levels_; }
    const std::vector<double>& reference() const noexcept { return reference_; }
    double delta() const noexcept { return delta_; }
    double lambda() const noexcept { return lambda_; }
    void set_lambda(double lambda) {
        if (!(lambda > 0.0)) throw ConfigError("quantizer sharpness must be positive");
        lambda_ = lambda;
    }

    /// Selector knots [b_0, I_2, ..., I_{d-1}, b_d].
    const std::vector<double>& knots() const noexcept { return knots_; }

    /// b_0 .. b_d.
    std::vector<double> boundaries() const {
        std::vector<double> b;
        b.reserve(levels_.size() + 1);
        b.push_back(reference_.front());
        b.insert(b.end(), interior_.values().begin(), interior_.values().end());
        b.push_back(reference_.back());
        return b;
    }

    const Tensor& interior() const noexcept { return interior_; }
    Tensor& interior() noexcept { return interior_; }

    /// Restores b_{v-1} + gap <= b_v for every v by clamping interior
    /// boundaries, sweeping up then down.
    void project(double gap = kMinGap) {
        auto b = interior_.values();
        double lo = reference_.front();
        for (double& v : b) {
            v = std::max(v, lo + gap);
            lo = v;
        }
        double hi = reference_.back();
        for (std::size_t k = b.size(); k-- > 0;) {
            b[k] = std::min(b[k], hi - gap);
            hi = b[k];
        }
    }

    /// Index v of the level for x: x in [b_v, b_{v+1}) maps to level v
    /// (0-based). Out-of-range values clamp to the extreme levels.
    std::size_t hard_index(double x) const {
        const auto b = interior_.values();
        return static_cast<std::size_t>(std::upper_bound(b.begin(), b.end(), x) - b.begin());
    }

    double hard(double x) const { return levels_[hard_index(x)]; }

    /// Selector segment s with knots[s] <= x < knots[s+1]; below the first
    /// knot selects segment 0, at-or-above the last selects the final one.
    std::size_t segment(double x) const {
        const std::size_t last = levels_.size() - 2;
        const auto it = std::upper_bound(knots_.begin() + 1, knots_.end() - 1, x);
        return std::min(static_cast<std::size_t>(it - (knots_.begin() + 1)), last);
    }

    double soft(double x) const {
        const std::size_t s = segment(x);
        return levels_[s] + delta_ * ElementwiseOp::logistic(lambda_ * (x - interior_[s]));
    }

    SoftGrad soft_grad(double x) const {
        const std::size_t s = segment(x);
        const double sig = ElementwiseOp::logistic(lambda_ * (x - interior_[s]));
        const double d = delta_ * lambda_ * sig * (1.0 - sig);
        return {d, -d, s};
    }

    /// Squared distance between current and reference boundaries.
    double penalty() const {
        double s = 0.0;
        for (std::size_t k = 0; k < interior_.size(); ++k) {
            const double diff = interior_[k] - reference_[k + 1];
            s += diff * diff;
        }
        return s;
    }

    /// Gradient of `penalty()` w.r.t. the interior boundaries.
    std::vector<double> penalty_grad() const {
        std::vector<double> g(interior_.size());
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = 2.0 * (interior_[k] - reference_[k + 1]);
        return g;
    }

private:
    void check_order() const {
        double prev = reference_.front();
        for (double v : interior_.values()) {
            if (!(v > prev)) throw ConfigError("quantizer boundaries must be strictly increasing");
            prev = v;
        }
        if (!(reference_.back() > prev)) throw ConfigError("quantizer boundaries must be strictly increasing");
    }

    std::vector<double> levels_;
    std::vector<double> reference_;
    Tensor interior_;
    std::vector<double> knots_;
    double delta_ = 0.0;
    double lambda_ = 1.0;
};

inline double hard_quantize(const Quantizer& q, double x) { return q.hard(x); }
inline double soft_quantize(const Quantizer& q, double x) { return q.soft(x); }
inline SoftGrad soft_quantize_grad(const Quantizer& q, double x) { return q.soft_grad(x); }
inline double boundary_penalty(const Quantizer& q) { return q.penalty(); }

/// Soft quantizer as a tape op. `interior` must be a node whose value is the
/// quantizer's interior boundary tensor (usually `tape.parameter(q.interior())`).
/// The selector is not differentiated.
inline Var soft_quantize(const Quantizer& q, Var x, Var interior) {
    const Tensor& xv = x.value();
    const Tensor& bv = interior.value();
    if (bv.size() != q.level_count() - 1) throw DimensionError("soft_quantize: boundary count mismatch");
    Tensor out(xv.shape());
    Tensor slope(xv.shape());
    std::vector<std::size_t> segs(xv.size());
    const double lambda = q.lambda();
    const double delta = q.delta();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const std::size_t s = q.segment(xv[i]);
        const double sig = ElementwiseOp::logistic(lambda * (xv[i] - bv[s]));
        out[i] = q.levels()[s] + delta * sig;
        slope[i] = delta * lambda * sig * (1.0 - sig);
        segs[i] = s;
    }
    out.require_finite("soft_quantize");
    return x.tape().record(std::move(out), {x, interior},
                           [x, interior, slope = std::move(slope), segs = std::move(segs)](Tape& t, const Tensor& g) {
                               if (Tensor* gx = t.grad_slot(x))
                                   for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * slope[i];
                               if (Tensor* gb = t.grad_slot(interior))
                                   for (std::size_t i = 0; i < g.size(); ++i) (*gb)[segs[i]] -= g[i] * slope[i];
                           });
}

/// ||b - b_ref||^2 over the interior boundaries as a tape op.
inline Var boundary_penalty(const Quantizer& q, Var interior) {
    const Tensor& bv = interior.value();
    std::vector<double> diff(bv.size());
    double s = 0.0;
    for (std::size_t k = 0; k < bv.size(); ++k) {
        diff[k] = bv[k] - q.reference()[k + 1];
        s += diff[k] * diff[k];
    }
    return interior.tape().record(Tensor::scalar(s), {interior}, [interior, diff = std::move(diff)](Tape& t, const Tensor& g) {
        if (Tensor* gb = t.grad_slot(interior))
            for (std::size_t k = 0; k < diff.size(); ++k) (*gb)[k] += 2.0 * diff[k] * g[0];
    });
}

inline nlohmann::ordered_json to_json(const Quantizer& q) {
    return {{"levels", q.levels()}, {"boundaries", q.boundaries()}, {"lambda", q.lambda()}};
}

inline Quantizer quantizer_from_json(const nlohmann::json& j) {
    return Quantizer(j.at("levels").get<std::vector<double>>(), j.at("boundaries").get<std::vector<double>>(),
                     j.at("lambda").get<double>());
}

}  // namespace dmf
