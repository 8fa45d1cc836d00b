#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dmf/eval.hpp"
#include "test_support.hpp"

namespace dmf {
namespace {

using testing::iota_indices;

const std::vector<double> kStars{1, 2, 3, 4, 5};

TEST(Metrics, PerfectPredictions) {
    const std::vector<PredictionPair> pairs{{1, 1}, {4, 4}, {2.5, 2.5}};
    EXPECT_EQ(rmse(pairs), 0.0);
    EXPECT_EQ(mae(pairs), 0.0);
}

TEST(Metrics, SymmetricErrors) {
    const std::vector<PredictionPair> pairs{{3, 1}, {1, 3}};
    EXPECT_EQ(rmse(pairs), 2.0);
    EXPECT_EQ(mae(pairs), 2.0);
}

TEST(Metrics, EmptyListRejected) {
    EXPECT_THROW(rmse({}), ValidationError);
    EXPECT_THROW(mae({}), ValidationError);
}

TEST(Metrics, MatchDirectFormula) {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<PredictionPair> pairs(100);
        long double sq = 0, ab = 0;
        for (auto& [p, t] : pairs) {
            p = rng.uniform(0.0, 6.0);
            t = 1.0 + static_cast<double>(rng.below(5));
            sq += static_cast<long double>(p - t) * (p - t);
            ab += std::fabs(p - t);
        }
        EXPECT_NEAR(rmse(pairs), static_cast<double>(std::sqrt(sq / 100)), 1e-12);
        EXPECT_NEAR(mae(pairs), static_cast<double>(ab / 100), 1e-12);
        EXPECT_GE(rmse(pairs), mae(pairs));
    }
}

TEST(Metrics, IndependentOfOrder) {
    Rng rng(4);
    std::vector<PredictionPair> pairs(64);
    for (auto& [p, t] : pairs) {
        p = rng.uniform(1.0, 5.0);
        t = rng.uniform(1.0, 5.0);
    }
    const double r = rmse(pairs), m = mae(pairs);
    rng.shuffle(pairs);
    EXPECT_NEAR(rmse(pairs), r, 1e-12);
    EXPECT_NEAR(mae(pairs), m, 1e-12);
}

TEST(Rounding, TiesGoUpAndOutOfRangeClamps) {
    EXPECT_EQ(round_to_level(3.4, kStars), 3.0);
    EXPECT_EQ(round_to_level(3.5, kStars), 4.0);
    EXPECT_EQ(round_to_level(5.2, kStars), 5.0);
    EXPECT_EQ(round_to_level(0.2, kStars), 1.0);
    EXPECT_EQ(round_to_level(1.49, kStars), 1.0);
    EXPECT_EQ(round_to_level(4.5, kStars), 5.0);
}

TEST(Rounding, NearestLevelOracle) {
    Rng rng(8);
    for (int k = 0; k < 2000; ++k) {
        const double x = rng.uniform(-1.0, 7.0);
        double best = kStars[0];
        for (double l : kStars)
            if (std::fabs(x - l) < std::fabs(x - best)) best = l;
        EXPECT_EQ(round_to_level(x, kStars), best) << x;
    }
}

TEST(Report, CheckRejectsInconsistentMetrics) {
    MetricsReport r;
    r.overall = {2, 0.5, 0.7};
    EXPECT_THROW(r.check(), ValidationError);
    r.overall = {2, 0.7, 0.5};
    EXPECT_NO_THROW(r.check());
    r.areas[0] = {1, 0.7, 0.5};
    EXPECT_THROW(r.check(), ValidationError);
    r.areas[3] = {1, 0.7, 0.5};
    EXPECT_NO_THROW(r.check());
    r.overall = {2, -0.1, -0.2};
    EXPECT_THROW(r.check(), ValidationError);
}

TEST(Report, EmptyAreaIsAbsentNotZero) {
    MetricsReport r;
    r.overall = {1, 1.0, 1.0};
    r.areas[0] = {1, 1.0, 1.0};
    EXPECT_EQ(r.to_csv(), "scope,count,rmse,mae,mode\noverall,1,1,1,real-valued\narea_I,1,1,1,real-valued\n"
                          "area_II,0,,,real-valued\narea_III,0,,,real-valued\narea_IV,0,,,real-valued\n");
    EXPECT_TRUE(r.to_json()["areas"]["II"]["rmse"].is_null());
    EXPECT_NE(r.area_table("DMF").find("| DMF | 1.000 | - | - | - |"), std::string::npos);
}

// ---------------------------------------------------------------------------

class Extension : public ::testing::Test {
protected:
    RatingMatrix raw = testing::quantized_low_rank(40, 30, 3, 0.5, 12);
    RatingMatrix scaled = scale(raw);
    SplitSets split = random_split(scaled, {}, 12);
    AreaSplit areas = area_split(scaled, 0.2, 0.2, 12);
    InputIndex inputs{scaled, split.train, areas.seen_rows, areas.seen_cols};
    DmfModel model = init({areas.seen_cols.size(), {16}, 8, Activation::selu},
                          {areas.seen_rows.size(), {16}, 8, Activation::selu}, 5, scaled.scale());
};

TEST_F(Extension, CountsPartitionTheEvaluationSet) {
    const AreaSplit test_areas = areas.restricted_to(split.test);
    const MetricsReport r = evaluate_areas(model, inputs, scaled, test_areas, EvalMode::real);
    EXPECT_EQ(r.overall.count, split.test.size());
    std::size_t total = 0;
    for (Area a : kAllAreas) {
        EXPECT_EQ(r.area(a).count, test_areas.area(a).size());
        EXPECT_EQ(r.area(a).rmse.has_value(), r.area(a).count > 0);
        total += r.area(a).count;
    }
    EXPECT_EQ(total, split.test.size());
    EXPECT_GT(r.area(Area::IV).count, 0u);
}

TEST_F(Extension, AreaMetricsMatchPerEntryPredictions) {
    const AreaSplit test_areas = areas.restricted_to(split.test);
    const MetricsReport r = evaluate_areas(model, inputs, scaled, test_areas, EvalMode::real);
    for (Area a : kAllAreas) {
        std::vector<PredictionPair> pairs;
        for (const std::size_t k : test_areas.area(a)) {
            const Rating& e = scaled.entry(k);
            pairs.push_back({scaled.scale().unscale(predict_area(model, a, inputs, e.row, e.col)),
                             scaled.scale().unscale(e.value)});
        }
        ASSERT_FALSE(pairs.empty());
        EXPECT_NEAR(*r.area(a).rmse, rmse(pairs), 1e-12);
        EXPECT_NEAR(*r.area(a).mae, mae(pairs), 1e-12);
    }
}

TEST_F(Extension, DiscreteModeNeedsQuantizer) {
    EXPECT_THROW(evaluate_areas(model, inputs, scaled, areas.restricted_to(split.test), EvalMode::discrete),
                 StateError);
    model.quantizer = Quantizer::uniform({-1, -0.5, 0, 0.5, 1});
    const MetricsReport r = evaluate_areas(model, inputs, scaled, areas.restricted_to(split.test), EvalMode::discrete);
    EXPECT_EQ(r.mode, EvalMode::discrete);
    // Discrete errors are whole stars, so every squared error is an integer.
    const double n = static_cast<double>(r.overall.count);
    const double sse = *r.overall.rmse * *r.overall.rmse * n;
    EXPECT_NEAR(sse, std::round(sse), 1e-6);
    EXPECT_NEAR(*r.overall.mae * n, std::round(*r.overall.mae * n), 1e-6);
}

TEST_F(Extension, RoundedBaselineOutputsAreLevels) {
    const MetricsReport r = rounded_baseline(model, inputs, scaled, split.test);
    EXPECT_EQ(r.mode, EvalMode::rounded);
    EXPECT_EQ(r.overall.count, split.test.size());
    for (Area a : kAllAreas) EXPECT_EQ(r.area(a).count, 0u);
    const std::set<double> stars(kStars.begin(), kStars.end());
    for (const auto& [pred, target] : predict_entries(model, inputs, scaled, split.test, false)) {
        EXPECT_TRUE(stars.contains(round_to_level(pred, kStars)));
        (void)target;
    }
    const double n = static_cast<double>(r.overall.count);
    EXPECT_NEAR(*r.overall.mae * n, std::round(*r.overall.mae * n), 1e-6);
}

TEST(Duplication, ClonedRowAreaIIMatchesSourceAreaI) {
    const RatingMatrix base = scale(testing::quantized_low_rank(12, 10, 2, 0.7, 3));
    const std::size_t source = 4;
    const RatingMatrix m = testing::with_cloned_row(base, source);
    const std::size_t clone = base.rows();
    const AreaSplit areas = make_area_split(m, iota_indices(clone), iota_indices(m.cols()));
    const InputIndex inputs(m, iota_indices(m.size()), areas.seen_rows, areas.seen_cols);
    DmfModel model = init({m.cols(), {8}, 4, Activation::selu}, {clone, {8}, 4, Activation::selu}, 9, m.scale());

    std::vector<std::size_t> source_entries;
    for (std::size_t k = 0; k < m.size(); ++k)
        if (m.entry(k).row == source) source_entries.push_back(k);
    const MetricsReport whole = evaluate_areas(model, inputs, m, areas, EvalMode::real);
    const MetricsReport src = evaluate_areas(model, inputs, m, areas.restricted_to(source_entries), EvalMode::real);
    ASSERT_EQ(whole.area(Area::II).count, source_entries.size());
    EXPECT_NEAR(*whole.area(Area::II).rmse, *src.area(Area::I).rmse, 1e-9);
    EXPECT_NEAR(*whole.area(Area::II).mae, *src.area(Area::I).mae, 1e-9);
}

TEST(Sanity, TrainedRankOneAreaOrdering) {
    const RatingMatrix m = testing::rank_one_matrix(30, 25, 17);
    const RatingMatrix s = scale(m);
    const AreaSplit areas = area_split(s, 0.2, 0.2, 17);
    const SplitSets split = random_split(s, {}, 17);
    const InputIndex inputs(s, split.train, areas.seen_rows, areas.seen_cols);

    // Only area-I entries carry gradient signal for both branches.
    std::vector<std::size_t> train_entries;
    for (const std::size_t k : split.train)
        if (areas.seen_rows.contains(s.entry(k).row) && areas.seen_cols.contains(s.entry(k).col))
            train_entries.push_back(k);
    DmfModel model = init({areas.seen_cols.size(), {16}, 8, Activation::selu},
                          {areas.seen_rows.size(), {16}, 8, Activation::selu}, 2, s.scale());
    TrainConfig cfg;
    cfg.learning_rate = 3e-3;
    cfg.batch_size = 32;
    cfg.max_epochs = 60;
    cfg.gamma = 0.0;
    const TrainResult r = train(model, {s, inputs, train_entries, {}}, cfg);
    const MetricsReport report = evaluate_areas(r.last, inputs, s, areas.restricted_to(split.test), EvalMode::real);
    for (Area a : kAllAreas) ASSERT_TRUE(report.area(a).rmse && std::isfinite(*report.area(a).rmse));
    EXPECT_LT(*report.area(Area::I).rmse, *report.area(Area::IV).rmse + 0.5);
}

}  // namespace
}  // namespace dmf
