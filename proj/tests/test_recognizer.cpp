#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "bgait/recognizer.hpp"
#include "bgait/synthetic.hpp"

using namespace bgait;

namespace {

GeinetConfig tiny_config(int n_classes = 0) {
    GeinetConfig c;
    c.geometry = {16, 16};
    c.conv1_channels = 4;
    c.conv2_channels = 6;
    c.n_classes = n_classes;
    return c;
}

// Distinct blocky energy images per class, mildly jittered per sample.
SilhouetteFrame toy_gei(int cls, int variant) {
    SilhouetteFrame f;
    f.pixels = Eigen::MatrixXf::Zero(16, 16);
    const int r = 2 + 3 * cls;
    f.pixels.block(r, 2, 3, 12).setConstant(0.8f);
    f.pixels(1 + variant % 3, 1 + variant % 5) = 0.4f;
    return f;
}

}  // namespace

TEST_CASE("gei of identical frames equals the frame") {
    GaitSequence seq;
    SilhouetteFrame f;
    f.pixels = Eigen::MatrixXf::Constant(8, 8, 1.0f);
    seq.frames = {f, f, f};
    CHECK(compute_gei(seq).pixels == f.pixels);

    GaitSequence empty;
    CHECK_THROWS_AS(compute_gei(empty), EmptySequence);
}

TEST_CASE("gei of half-on half-off frames is uniform 0.5") {
    GaitSequence seq;
    SilhouetteFrame on, off;
    on.pixels = Eigen::MatrixXf::Ones(4, 4);
    off.pixels = Eigen::MatrixXf::Zero(4, 4);
    seq.frames = {on, off, on, off};
    CHECK((compute_gei(seq).pixels.array() == 0.5f).all());
}

TEST_CASE("gei over two periods matches one period closely") {
    SyntheticWalkerParams p;
    p.period = 20;
    auto two = generate_synthetic_walker(p, 40, 5, {32, 32});
    GaitSequence one;
    one.frames.assign(two.frames.begin(), two.frames.begin() + 20);
    const auto g1 = compute_gei(one).pixels;
    const auto g2 = compute_gei(two).pixels;
    CHECK((g1 - g2).cwiseAbs().mean() < 0.02f);
}

TEST_CASE("gei linearity over concatenation") {
    auto a = generate_synthetic_walker({}, 7, 1, {16, 16});
    auto b = generate_synthetic_walker({}, 3, 2, {16, 16});
    GaitSequence cat = a;
    for (const auto& f : b.frames) cat.frames.push_back(f);
    Eigen::MatrixXf expect =
        (7.0f * compute_gei(a).pixels + 3.0f * compute_gei(b).pixels) / 10.0f;
    CHECK((compute_gei(cat).pixels - expect).cwiseAbs().maxCoeff() < 1e-6f);
}

TEST_CASE("classify emits a full normalized ranking") {
    GeinetModel model(tiny_config(3), {"a", "b", "c"}, 4);
    auto ranked = model.classify(toy_gei(0, 0));
    REQUIRE(ranked.size() == 3);
    double sum = 0;
    for (const auto& p : ranked) sum += p.score;
    CHECK(std::abs(sum - 1.0) < 1e-6);
    CHECK(ranked[0].score >= ranked[1].score);
    CHECK(ranked[1].score >= ranked[2].score);
    auto again = model.classify(toy_gei(0, 0));
    for (int i = 0; i < 3; ++i) CHECK(ranked[i].label == again[i].label);
}

TEST_CASE("training separates distinct toy classes") {
    std::vector<std::pair<SilhouetteFrame, std::string>> gallery;
    for (int cls = 0; cls < 2; ++cls)
        for (int v = 0; v < 10; ++v)
            gallery.emplace_back(toy_gei(cls, v), cls == 0 ? "left" : "right");
    TrainConfig tc;
    tc.epochs = 50;
    tc.learning_rate = 0.01;
    tc.batch_size = 4;
    tc.seed = 2;
    std::vector<GeinetEpochLog> log;
    auto model = train_geinet(gallery, tiny_config(), tc, &log);
    CHECK(log.back().accuracy == 1.0);
    for (const auto& [gei, label] : gallery)
        CHECK(model.classify(gei).front().label == label);
}

TEST_CASE("training rejects degenerate galleries") {
    TrainConfig tc;
    CHECK_THROWS_AS(train_geinet({}, tiny_config(), tc), EmptyGallery);
    std::vector<std::pair<SilhouetteFrame, std::string>> one{{toy_gei(0, 0), "solo"},
                                                             {toy_gei(0, 1), "solo"}};
    CHECK_THROWS_AS(train_geinet(one, tiny_config(), tc), SingleClass);
}

TEST_CASE("training logs are deterministic given the seed") {
    std::vector<std::pair<SilhouetteFrame, std::string>> gallery;
    for (int cls = 0; cls < 2; ++cls)
        for (int v = 0; v < 4; ++v)
            gallery.emplace_back(toy_gei(cls, v), cls == 0 ? "a" : "b");
    TrainConfig tc;
    tc.epochs = 5;
    tc.learning_rate = 0.005;
    tc.batch_size = 2;
    tc.seed = 13;
    std::vector<GeinetEpochLog> la, lb;
    train_geinet(gallery, tiny_config(), tc, &la);
    train_geinet(gallery, tiny_config(), tc, &lb);
    for (std::size_t i = 0; i < la.size(); ++i) {
        CHECK(la[i].l_ce == lb[i].l_ce);
        CHECK(la[i].accuracy == lb[i].accuracy);
    }
}

TEST_CASE("checkpoint round trip keeps labels and outputs") {
    GeinetModel model(tiny_config(3), {"x", "y", "z"}, 6);
    const auto file = std::filesystem::temp_directory_path() / "bgait_test_geinet.bin";
    model.save(file);
    auto back = GeinetModel::load(file);
    CHECK(back.class_labels() == std::vector<std::string>{"x", "y", "z"});
    auto a = model.classify(toy_gei(1, 2));
    auto b = back.classify(toy_gei(1, 2));
    for (int i = 0; i < 3; ++i) {
        CHECK(a[i].label == b[i].label);
        CHECK(a[i].score == b[i].score);
    }
}
