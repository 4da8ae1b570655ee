#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bgait/keypose.hpp"
#include "bgait/synthetic.hpp"

using namespace bgait;

namespace {
SilhouetteFrame frame_of(std::initializer_list<float> vals, int h, int w) {
    SilhouetteFrame f;
    f.pixels.resize(h, w);
    int i = 0;
    for (float v : vals) f.pixels(i / w, i % w) = v, ++i;
    return f;
}
}  // namespace

TEST_CASE("fit_pca rejects rank-deficient requests") {
    std::vector<SilhouetteFrame> frames(10, frame_of({0.5f, 0.5f, 0.5f, 0.5f}, 2, 2));
    CHECK_THROWS_AS(fit_pca(frames, 1), DimTooLarge);
}

TEST_CASE("fit_pca principal axis matches the closed form") {
    // 2-pixel samples on the line y = x: axis must be (1,1)/sqrt(2) up to sign
    std::vector<SilhouetteFrame> frames{frame_of({0.0f, 0.0f}, 1, 2),
                                        frame_of({0.25f, 0.25f}, 1, 2),
                                        frame_of({0.5f, 0.5f}, 1, 2)};
    auto pca = fit_pca(frames, 1);
    const float inv_sqrt2 = 1.0f / std::sqrt(2.0f);
    CHECK(std::abs(std::abs(pca.basis(0, 0)) - inv_sqrt2) < 1e-5f);
    CHECK(std::abs(std::abs(pca.basis(1, 0)) - inv_sqrt2) < 1e-5f);
    CHECK(pca.basis(0, 0) * pca.basis(1, 0) > 0);  // same sign
}

TEST_CASE("full-rank projection round trip") {
    // 12 random frames span an 11-dimensional affine subspace, so a basis of
    // the full data rank must reproduce every sample
    std::mt19937 rng(11);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    std::vector<SilhouetteFrame> frames(12);
    for (auto& f : frames) f.pixels = Eigen::MatrixXf::NullaryExpr(8, 8, [&]() { return unit(rng); });
    auto pca = fit_pca(frames, 8);
    auto full = fit_pca(frames, 11);
    for (const auto& f : frames) {
        Eigen::MatrixXf back = full.back_project(full.project(f));
        CHECK((back - f.pixels).cwiseAbs().maxCoeff() < 1e-4f);
    }
    CHECK(pca.dim == 8);
}

TEST_CASE("basis columns are orthonormal") {
    auto seq = generate_synthetic_walker({}, 20, 7, {32, 32});
    auto pca = fit_pca(seq.frames, 6);
    Eigen::MatrixXf gram = pca.basis.transpose() * pca.basis;
    CHECK((gram - Eigen::MatrixXf::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("fit_pca is deterministic across refits") {
    auto seq = generate_synthetic_walker({}, 20, 7, {32, 32});
    auto a = fit_pca(seq.frames, 5);
    auto b = fit_pca(seq.frames, 5);
    CHECK(a.basis == b.basis);
    CHECK(a.mean_frame == b.mean_frame);
}

TEST_CASE("build_keyposes recovers well-separated point masses in phase order") {
    // 4 distinct frames, each duplicated, with phases in bin order
    std::vector<SilhouetteFrame> protos;
    for (int i = 0; i < 4; ++i) {
        SilhouetteFrame f;
        f.pixels = Eigen::MatrixXf::Zero(4, 4);
        f.pixels(i, i) = 1.0f;
        f.pixels(3 - i, i) = 1.0f;
        protos.push_back(f);
    }
    GaitSequence seq;
    std::vector<double> phases;
    for (int rep = 0; rep < 3; ++rep)
        for (int i = 0; i < 4; ++i) {
            seq.frames.push_back(protos[i]);
            phases.push_back(i / 4.0 + 0.01);
        }
    auto pca = fit_pca(seq.frames, 3);
    auto kp = build_keyposes({{seq, phases}}, 4, pca);
    REQUIRE(kp.k == 4);
    for (int i = 0; i < 4; ++i) {
        Eigen::VectorXf target = pca.project(protos[i]);
        CHECK((kp.embeddings[i] - target).norm() < 1e-4f);
    }
    CHECK(kp.occlusion_threshold > 0.0);
}

TEST_CASE("build_keyposes needs at least k distinct frames") {
    SilhouetteFrame f;
    f.pixels = Eigen::MatrixXf::Zero(4, 4);
    f.pixels(0, 0) = 1.0f;
    SilhouetteFrame g = f;
    g.pixels(1, 1) = 1.0f;
    GaitSequence seq;
    seq.frames = {f, g, f, g};
    auto pca = fit_pca(seq.frames, 1);
    CHECK_THROWS_AS(build_keyposes({{seq, {0.0, 0.3, 0.6, 0.9}}}, 3, pca), InsufficientData);
}

TEST_CASE("estimate_period finds the walker cycle") {
    SyntheticWalkerParams p;
    p.period = 24;
    auto seq = generate_synthetic_walker(p, 120, 5, {48, 48});
    const int est = estimate_period(seq);
    CHECK(est >= 23);
    CHECK(est <= 25);
}

TEST_CASE("key poses come out phase-ordered and track a clean cycle") {
    // 16 well-separated prototypes on a ring: a 3x3 block whose position
    // circles the canvas, phases i/16. Clustering must recover them in
    // temporal order and a probe walking the ring must visit them in order.
    const int k = 16;
    std::vector<SilhouetteFrame> protos;
    for (int i = 0; i < k; ++i) {
        SilhouetteFrame f;
        f.pixels = Eigen::MatrixXf::Zero(16, 16);
        const double a = 2.0 * M_PI * i / k;
        const int r = 7 + static_cast<int>(std::lround(5.0 * std::sin(a)));
        const int c = 7 + static_cast<int>(std::lround(5.0 * std::cos(a)));
        f.pixels.block(r, c, 3, 3).setConstant(1.0f);
        protos.push_back(f);
    }
    GaitSequence seq;
    std::vector<double> phases;
    for (int rep = 0; rep < 3; ++rep)
        for (int i = 0; i < k; ++i) {
            seq.frames.push_back(protos[i]);
            phases.push_back(static_cast<double>(i) / k);
        }
    auto pca = fit_pca(seq.frames, 10);
    auto kp = build_keyposes({{seq, phases}}, k, pca);

    for (int i = 1; i < kp.k; ++i) CHECK(kp.phase_means[i] >= kp.phase_means[i - 1]);

    std::vector<int> nearest;
    for (const auto& f : protos) {
        Eigen::VectorXf e = pca.project(f);
        int best = 0;
        float bd = (e - kp.embeddings[0]).norm();
        for (int j = 1; j < kp.k; ++j) {
            const float d = (e - kp.embeddings[j]).norm();
            if (d < bd) bd = d, best = j;
        }
        nearest.push_back(best);
    }
    for (int i = 0; i < k; ++i) CHECK(nearest[i] == i);
}

TEST_CASE("keypose checkpoint round trip") {
    auto seq = generate_synthetic_walker({}, 60, 8, {32, 32});
    std::vector<double> phases = estimate_phases(seq);
    auto pca = fit_pca(seq.frames, 6);
    auto kp = build_keyposes({{seq, phases}}, 4, pca);
    auto file = std::filesystem::temp_directory_path() / "bgait_test_kp.bin";
    kp.save(file);
    auto back = KeyPoseSet::load(file);
    CHECK(back.k == kp.k);
    CHECK(back.occlusion_threshold == kp.occlusion_threshold);
    for (int i = 0; i < kp.k; ++i) CHECK(back.embeddings[i] == kp.embeddings[i]);
    CHECK(back.subspace.basis == kp.subspace.basis);
}
