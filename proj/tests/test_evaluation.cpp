#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "bgait/evaluation.hpp"

using namespace bgait;

namespace {
SilhouetteFrame frame_with(int on_pixels, int offset, int h = 20, int w = 20) {
    SilhouetteFrame f;
    f.pixels = Eigen::MatrixXf::Zero(h, w);
    for (int i = 0; i < on_pixels; ++i) {
        const int p = offset + i;
        f.pixels(p / w, p % w) = 1.0f;
    }
    return f;
}

EvalRecord record_with_truth_at_rank(int rank) {
    EvalRecord r;
    r.true_label = "target";
    for (int i = 1; i <= 5; ++i)
        r.ranked.push_back({i == rank ? "target" : "other" + std::to_string(i), 1.0 / i});
    return r;
}
}  // namespace

TEST_CASE("dice on identical, disjoint, and half-overlapping masks") {
    auto a = frame_with(100, 0);
    CHECK(dice_score(a, a) == 1.0);

    auto b = frame_with(100, 100);
    CHECK(dice_score(a, b) == 0.0);

    auto c = frame_with(100, 50);  // overlap 50 with a
    CHECK(dice_score(a, c) == 0.5);
}

TEST_CASE("dice of two empty masks is 1 by convention") {
    auto z = frame_with(0, 0);
    CHECK(dice_score(z, z) == 1.0);
}

TEST_CASE("dice geometry mismatch") {
    auto a = frame_with(4, 0, 10, 10);
    auto b = frame_with(4, 0, 12, 12);
    CHECK_THROWS_AS(dice_score(a, b), GeometryMismatch);
}

TEST_CASE("dice symmetry and bounds over random soft frames") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    for (int t = 0; t < 1000; ++t) {
        SilhouetteFrame a, b;
        a.pixels = Eigen::MatrixXf::NullaryExpr(6, 6, [&]() { return unit(rng); });
        b.pixels = Eigen::MatrixXf::NullaryExpr(6, 6, [&]() { return unit(rng); });
        const double ab = dice_score(a, b);
        CHECK(ab == dice_score(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("cmc counting example") {
    std::vector<EvalRecord> records{record_with_truth_at_rank(1), record_with_truth_at_rank(2),
                                    record_with_truth_at_rank(3), record_with_truth_at_rank(5)};
    auto curve = cmc_curve(records, 5);
    REQUIRE(curve.size() == 5);
    CHECK(curve[0].second == 25.0);
    CHECK(curve[1].second == 50.0);
    CHECK(curve[2].second == 75.0);
    CHECK(curve[3].second == 75.0);
    CHECK(curve[4].second == 100.0);
    for (std::size_t i = 1; i < curve.size(); ++i)
        CHECK(curve[i].second >= curve[i - 1].second);
}

TEST_CASE("perfect predictor is flat at 100%") {
    std::vector<EvalRecord> records(3, record_with_truth_at_rank(1));
    for (auto& [rank, acc] : cmc_curve(records, 5)) CHECK(acc == 100.0);
}

TEST_CASE("cmc rejects an empty record set") {
    CHECK_THROWS_AS(cmc_curve({}, 5), EmptyRecords);
}

TEST_CASE("kfold emits k accuracies per requested k and stratifies") {
    std::vector<std::pair<SilhouetteFrame, std::string>> corpus;
    for (int cls = 0; cls < 2; ++cls)
        for (int v = 0; v < 5; ++v) {
            SilhouetteFrame f;
            f.pixels = Eigen::MatrixXf::Zero(16, 16);
            f.pixels.block(2 + 8 * cls, 2, 4, 12).setConstant(0.9f);
            f.pixels(v, 15) = 0.3f;
            corpus.emplace_back(f, cls == 0 ? "a" : "b");
        }
    GeinetConfig gc;
    gc.geometry = {16, 16};
    gc.conv1_channels = 4;
    gc.conv2_channels = 4;
    TrainConfig tc;
    tc.epochs = 20;
    tc.learning_rate = 0.01;
    tc.batch_size = 4;
    tc.seed = 17;
    auto results = kfold_robustness(corpus, {2, 5}, gc, tc);
    REQUIRE(results.size() == 2);
    CHECK(results[0].k == 2);
    CHECK(results[0].fold_accuracies_pct.size() == 2);
    CHECK(results[1].fold_accuracies_pct.size() == 5);
    for (const auto& r : results) {
        CHECK(r.min <= r.q1);
        CHECK(r.q1 <= r.median);
        CHECK(r.median <= r.q3);
        CHECK(r.q3 <= r.max);
    }

    CHECK_THROWS_AS(kfold_robustness(corpus, {6}, gc, tc), InsufficientPerClass);
}
