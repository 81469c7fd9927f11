#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cascadex/error.hpp"
#include "cascadex/metrics.hpp"
#include "cascadex/rng.hpp"
#include "oracles.hpp"

namespace {

using namespace cascadex;

std::vector<ScoredInstance> with_difficulty(const std::vector<double>& conf, const std::vector<int>& diff) {
    std::vector<ScoredInstance> out;
    for (std::size_t i = 0; i < conf.size(); ++i) {
        out.push_back({conf[i], diff[i], 0, 0});
    }
    return out;
}

std::vector<ScoredInstance> with_correctness(const std::vector<double>& conf, const std::vector<int>& correct) {
    std::vector<ScoredInstance> out;
    for (std::size_t i = 0; i < conf.size(); ++i) {
        out.push_back({conf[i], std::nullopt, correct[i] ? 1u : 0u, 1});
    }
    return out;
}

std::vector<ScoredInstance> random_scored(Rng& rng, std::size_t n) {
    std::vector<ScoredInstance> out;
    for (std::size_t i = 0; i < n; ++i) {
        // Coarse grid so ties are common.
        out.push_back({static_cast<double>(rng.below(20)) / 20.0, static_cast<int>(i % 3 == 0), 0, 0});
    }
    return out;
}

TEST(Dis, PerfectAndReversedOrdering) {
    EXPECT_DOUBLE_EQ(dis(with_difficulty({0.9, 0.8, 0.6, 0.5}, {0, 0, 1, 1})), 1.0);
    EXPECT_DOUBLE_EQ(dis(with_difficulty({0.5, 0.6, 0.8, 0.9}, {0, 0, 1, 1})), 0.0);
}

TEST(Dis, TiesAreNotInversions) {
    EXPECT_DOUBLE_EQ(dis(with_difficulty({0.7, 0.7}, {0, 1})), 1.0);
    EXPECT_DOUBLE_EQ(dis(with_difficulty({0.7, 0.7, 0.8}, {0, 1, 0})), 1.0);
    EXPECT_DOUBLE_EQ(dis(with_difficulty({0.6, 0.7, 0.7}, {0, 1, 0})), 0.5);
}

TEST(Dis, MatchesBruteForce) {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const auto scored = random_scored(rng, 3 + rng.below(60));
        EXPECT_NEAR(dis(scored), oracle::dis_brute_force(scored), 1e-12);
    }
}

TEST(Dis, RequiresBothClassesAndLabels) {
    EXPECT_THROW(dis(with_difficulty({0.5, 0.6}, {0, 0})), ValidationError);
    EXPECT_THROW(dis(with_difficulty({0.5, 0.6}, {1, 1})), ValidationError);
    std::vector<ScoredInstance> unlabeled{{0.5, std::nullopt, 0, 0}, {0.6, 1, 0, 0}};
    EXPECT_THROW(dis(unlabeled), ValidationError);
}

TEST(Dis, StrictReversalWithoutTies) {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        auto scored = random_scored(rng, 40);
        for (std::size_t i = 0; i < scored.size(); ++i) {
            scored[i].confidence = rng.uniform();
        }
        auto reversed = scored;
        for (auto& s : reversed) {
            s.confidence = 1.0 - s.confidence;
        }
        EXPECT_NEAR(dis(scored) + dis(reversed), 1.0, 1e-12);
    }
}

TEST(Dis, InvariantUnderMonotoneTransform) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto scored = random_scored(rng, 50);
        auto squashed = scored;
        for (auto& s : squashed) {
            s.confidence = std::exp(3.0 * s.confidence) / 100.0;
        }
        EXPECT_DOUBLE_EQ(dis(scored), dis(squashed));
    }
}

TEST(Ece, MatchedAccuracyIsZero) {
    std::vector<double> conf(100, 0.8);
    std::vector<int> correct(100, 0);
    std::fill(correct.begin(), correct.begin() + 80, 1);
    EXPECT_NEAR(ece(with_correctness(conf, correct)), 0.0, 1e-12);
}

TEST(Ece, HandComputedTenInstances) {
    // Bins hit: 1, 2, 3 (0.25 and 0.3), 5, 6, 7, 8, 10 (0.95 and 1.0).
    const std::vector<double> conf{0.05, 0.15, 0.25, 0.3, 0.45, 0.55, 0.65, 0.75, 0.95, 1.0};
    const std::vector<int> correct{0, 0, 1, 0, 1, 1, 0, 1, 1, 1};
    EXPECT_NEAR(ece(with_correctness(conf, correct)), 0.26, 1e-12);
}

TEST(Ece, EdgesBelongToTheLowerBin) {
    // 0.1 and 0.2 sit on bin edges and must land in bins 1 and 2.
    EXPECT_NEAR(ece(with_correctness({0.1, 0.15}, {0, 1})), (0.1 + 0.85) / 2.0, 1e-12);
    EXPECT_NEAR(ece(with_correctness({0.2, 0.21}, {1, 0})), (0.8 + 0.21) / 2.0, 1e-12);
    EXPECT_NEAR(ece(with_correctness({0.0, 0.05}, {0, 0})), 0.025, 1e-12);
}

TEST(Ece, BoundedByOne) {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> conf;
        std::vector<int> correct;
        for (int i = 0; i < 30; ++i) {
            conf.push_back(rng.uniform());
            correct.push_back(static_cast<int>(rng.below(2)));
        }
        const double e = ece(with_correctness(conf, correct));
        EXPECT_GE(e, 0.0);
        EXPECT_LE(e, 1.0);
    }
}

TEST(F1, HandCounts) {
    // TP 3, FP 1, FN 2, TN 2.
    std::vector<ScoredInstance> s{
        {0.9, std::nullopt, 1, 1}, {0.9, std::nullopt, 1, 1}, {0.9, std::nullopt, 1, 1},
        {0.9, std::nullopt, 1, 0}, {0.9, std::nullopt, 0, 1}, {0.9, std::nullopt, 0, 1},
        {0.9, std::nullopt, 0, 0}, {0.9, std::nullopt, 0, 0},
    };
    EXPECT_NEAR(f1_binary(s, 1), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(accuracy(s), 5.0 / 8.0, 1e-15);
}

TEST(F1, NoPositivePredictionsIsZero) {
    std::vector<ScoredInstance> s{{0.9, std::nullopt, 0, 1}, {0.9, std::nullopt, 0, 0}};
    EXPECT_DOUBLE_EQ(f1_binary(s, 1), 0.0);
}

ExitTrace make_trace(std::string id, std::size_t stage, double p1, std::int64_t cost) {
    ExitTrace t;
    t.instance_id = std::move(id);
    t.exit_stage = stage;
    t.distribution.probs = {1.0 - p1, p1};
    t.confidence = std::max(p1, 1.0 - p1);
    t.total_cost = cost;
    return t;
}

TEST(Evaluate, HistogramSpeedupAndDis) {
    std::vector<Instance> items{
        {"a", {0.0}, 1, std::nullopt}, {"b", {0.0}, 0, std::nullopt}, {"c", {0.0}, 1, std::nullopt}};
    const Dataset data(std::move(items), 2, 1);
    // Traces deliberately out of dataset order.
    const std::vector<ExitTrace> traces{make_trace("c", 1, 0.6, 14), make_trace("a", 0, 0.9, 2),
                                        make_trace("b", 0, 0.8, 2)};
    const std::map<std::string, int> difficulty{{"a", 0}, {"b", 0}, {"c", 1}};
    EvaluateOptions options;
    options.num_stages = 2;
    options.f1_positive_class = 1;
    const auto report = evaluate(traces, data, 12, options, &difficulty);
    EXPECT_EQ(report.instances, 3u);
    EXPECT_EQ(report.exit_histogram, (std::vector<std::size_t>{2, 1}));
    EXPECT_DOUBLE_EQ(report.speedup, 2.0);
    EXPECT_DOUBLE_EQ(report.mean_cost, 6.0);
    EXPECT_NEAR(report.accuracy, 2.0 / 3.0, 1e-15);
    ASSERT_TRUE(report.dis.has_value());
    EXPECT_DOUBLE_EQ(*report.dis, 1.0);
    ASSERT_TRUE(report.f1.has_value());
    EXPECT_DOUBLE_EQ(*report.f1, 0.8);

    const auto no_dis = evaluate(traces, data, 12, options);
    EXPECT_FALSE(no_dis.dis.has_value());
}

TEST(Evaluate, MismatchedIdsThrow) {
    std::vector<Instance> items{{"a", {0.0}, 1, std::nullopt}, {"b", {0.0}, 0, std::nullopt}};
    const Dataset data(std::move(items), 2, 1);
    EvaluateOptions options;
    options.num_stages = 2;
    EXPECT_THROW(evaluate(std::vector<ExitTrace>{make_trace("a", 0, 0.9, 2)}, data, 12, options), ValidationError);
    EXPECT_THROW(evaluate(std::vector<ExitTrace>{make_trace("a", 0, 0.9, 2), make_trace("z", 0, 0.9, 2)}, data,
                          12, options),
                 ValidationError);
}

TEST(Sweep, CsvLayout) {
    const std::vector<SweepRow> rows{{0.5, 2.0, 0.9, 0.75, 0.05}, {1.0, 1.0, 0.92, std::nullopt, 0.04}};
    std::ostringstream out;
    write_sweep_csv(rows, out);
    EXPECT_EQ(out.str(), "tau,speedup,accuracy,dis,ece\n0.5,2.0,0.9,0.75,0.05\n1.0,1.0,0.92,,0.04\n");
}

}  // namespace
