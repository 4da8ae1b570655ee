#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bgait/occlusion.hpp"
#include "bgait/synthetic.hpp"

using namespace bgait;

TEST_CASE("degree 0 keeps everything, degree 1 drops everything") {
    auto all_keep = sample_mask(100, 0.0, 1);
    CHECK(all_keep.dropped_count() == 0);
    auto all_drop = sample_mask(100, 1.0, 1);
    CHECK(all_drop.dropped_count() == 100);
}

TEST_CASE("degree outside [0,1] is rejected") {
    CHECK_THROWS_AS(sample_mask(10, -0.1, 1), DegreeOutOfRange);
    CHECK_THROWS_AS(sample_mask(10, 1.1, 1), DegreeOutOfRange);
    CHECK_THROWS_AS(sample_mask(0, 0.5, 1), DegreeOutOfRange);
}

TEST_CASE("empirical drop rate tracks the degree") {
    for (double degree : {0.1, 0.5, 0.9}) {
        auto mask = sample_mask(100000, degree, 42);
        CHECK(std::abs(mask.dropped_fraction() - degree) < 0.01);
    }
}

TEST_CASE("masks are deterministic given seed") {
    auto a = sample_mask(500, 0.3, 77);
    auto b = sample_mask(500, 0.3, 77);
    CHECK(a.keep == b.keep);
    auto c = sample_mask(500, 0.3, 78);
    CHECK(a.keep != c.keep);
}

TEST_CASE("apply_mask_latent zeroes dropped and keeps the rest bit-exact") {
    LatentWindow w;
    for (int t = 0; t < kWindowLen; ++t)
        w.vectors.push_back(Eigen::VectorXf::Constant(4, 0.5f + t));
    OcclusionMask mask;
    mask.keep = {true, false, true, false, true, true};
    auto out = apply_mask_latent(w, mask);
    for (int t = 0; t < kWindowLen; ++t) {
        if (mask.keep[t])
            CHECK(out.vectors[t] == w.vectors[t]);
        else
            CHECK(out.vectors[t].norm() == 0.0f);
    }

    OcclusionMask bad;
    bad.keep = {true, false};
    CHECK_THROWS_AS(apply_mask_latent(w, bad), LengthMismatch);
}

TEST_CASE("occlude_sequence replaces dropped frames by flagged placeholders") {
    auto seq = generate_synthetic_walker({}, 45, 4, {32, 32});
    seq.subject_label = "s03";
    auto occ = occlude_sequence(seq, 0.53, 9);
    CHECK(occ.subject_label == "s03");
    const auto mask = sample_mask(45, 0.53, 9);
    int flagged = 0;
    for (int i = 0; i < 45; ++i) {
        if (occ.frames[i].is_occluded_placeholder) {
            ++flagged;
            CHECK(occ.frames[i].pixels.maxCoeff() == 0.0f);
            CHECK_FALSE(mask.keep[i]);
        } else {
            CHECK(occ.frames[i].pixels == seq.frames[i].pixels);
        }
    }
    CHECK(flagged == mask.dropped_count());

    auto none = occlude_sequence(seq, 0.0, 9);
    for (int i = 0; i < 45; ++i) CHECK(none.frames[i].pixels == seq.frames[i].pixels);
    auto all = occlude_sequence(seq, 1.0, 9);
    for (int i = 0; i < 45; ++i) CHECK(all.frames[i].is_occluded_placeholder);
}

TEST_CASE("mask export is a 0/1 line") {
    auto mask = sample_mask(8, 0.5, 3);
    auto file = std::filesystem::temp_directory_path() / "bgait_test_mask.txt";
    save_mask(mask, file);
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    REQUIRE(line.size() == 8);
    for (int i = 0; i < 8; ++i) CHECK(line[i] == (mask.keep[i] ? '1' : '0'));
}
