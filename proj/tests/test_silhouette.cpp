#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "bgait/silhouette.hpp"
#include "bgait/synthetic.hpp"

using namespace bgait;
namespace fs = std::filesystem;

namespace {
Eigen::MatrixXf blank(int h, int w) { return Eigen::MatrixXf::Zero(h, w); }

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("bgait_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}
}  // namespace

TEST_CASE("normalize_frame rejects empty masks") {
    CHECK_THROWS_AS(normalize_frame(blank(100, 100), {64, 64}), EmptyFrame);
}

TEST_CASE("normalize_frame of all-one mask is all-one") {
    Eigen::MatrixXf mask = Eigen::MatrixXf::Ones(100, 100);
    auto f = normalize_frame(mask, {64, 64});
    CHECK(f.pixels.rows() == 64);
    CHECK(f.pixels.cols() == 64);
    CHECK(f.pixels.minCoeff() == 1.0f);
}

TEST_CASE("normalize_frame is translation invariant") {
    auto make = [](int top, int left) {
        Eigen::MatrixXf m = blank(200, 200);
        m.block(top, left, 20, 10).setOnes();
        return m;
    };
    auto a = normalize_frame(make(0, 0), {64, 64});
    auto b = normalize_frame(make(90, 120), {64, 64});
    auto c = normalize_frame(make(180, 190), {64, 64});
    CHECK(a.pixels == b.pixels);
    CHECK(b.pixels == c.pixels);
}

TEST_CASE("normalize_frame is idempotent") {
    auto seq = generate_synthetic_walker({}, 8, 5, {64, 64});
    for (const auto& f : seq.frames) {
        auto again = normalize_frame(f.pixels, {64, 64});
        CHECK(again.pixels == f.pixels);
    }
}

TEST_CASE("normalized pixels are exactly 0 or 1") {
    auto seq = generate_synthetic_walker({}, 5, 1, {48, 48});
    for (const auto& f : seq.frames)
        CHECK(((f.pixels.array() == 0.0f) || (f.pixels.array() == 1.0f)).all());
}

TEST_CASE("walker is exactly periodic without noise") {
    SyntheticWalkerParams p;
    p.period = 30;
    auto seq = generate_synthetic_walker(p, 60, 3, {64, 64});
    CHECK(seq.frames[0].pixels == seq.frames[30].pixels);
    CHECK(seq.frames[7].pixels == seq.frames[37].pixels);
}

TEST_CASE("walker is deterministic given seed") {
    SyntheticWalkerParams p;
    p.noise_rate = 0.05;
    auto a = generate_synthetic_walker(p, 10, 11, {64, 64});
    auto b = generate_synthetic_walker(p, 10, 11, {64, 64});
    for (int i = 0; i < 10; ++i) CHECK(a.frames[i].pixels == b.frames[i].pixels);
}

TEST_CASE("walker area autocorrelation peaks at the period") {
    SyntheticWalkerParams p;
    p.period = 30;
    auto seq = generate_synthetic_walker(p, 150, 9, {64, 64});
    std::vector<double> area;
    for (const auto& f : seq.frames) area.push_back(f.pixels.sum());
    const double mean = std::accumulate(area.begin(), area.end(), 0.0) / area.size();
    int best_lag = 0;
    double best = -1e30;
    for (int lag = 2; lag <= 75; ++lag) {
        double acc = 0;
        for (std::size_t i = 0; i + lag < area.size(); ++i)
            acc += (area[i] - mean) * (area[i + lag] - mean);
        if (acc > best) {
            best = acc;
            best_lag = lag;
        }
    }
    CHECK(best_lag >= 29);
    CHECK(best_lag <= 31);
}

TEST_CASE("pgm io round trip") {
    auto dir = temp_dir("pgm");
    auto seq = generate_synthetic_walker({}, 1, 2, {32, 32});
    write_pgm(seq.frames[0].pixels, dir / "a.pgm");
    Eigen::MatrixXf back = read_pgm(dir / "a.pgm");
    CHECK(back == seq.frames[0].pixels);
}

TEST_CASE("sequence save/load round trip") {
    auto dir = temp_dir("seq");
    auto seq = generate_synthetic_walker({}, 3, 4, {32, 32});
    seq.subject_label = "s07";
    seq.sequence_id = "s07_seq0";
    save_sequence(seq, dir / "s07_seq0");
    auto back = load_sequence(dir / "s07_seq0", {32, 32});
    CHECK(back.size() == 3);
    CHECK(back.subject_label == "s07");
    for (int i = 0; i < 3; ++i) CHECK(back.frames[i].pixels == seq.frames[i].pixels);
}

TEST_CASE("load_sequence errors") {
    CHECK_THROWS_AS(load_sequence("/nonexistent/dir", {32, 32}), MissingPath);
}

TEST_CASE("mixed raw resolutions normalize to one geometry") {
    auto dir = temp_dir("mixed");
    Eigen::MatrixXf a = blank(40, 40);
    a.block(5, 5, 20, 9).setOnes();
    Eigen::MatrixXf b = blank(90, 70);
    b.block(10, 10, 44, 21).setOnes();
    write_pgm(a, dir / "frame_00000.pgm");
    write_pgm(b, dir / "frame_00001.pgm");
    auto seq = load_sequence(dir, {48, 48});
    CHECK(seq.size() == 2);
    for (const auto& f : seq.frames) {
        CHECK(f.pixels.rows() == 48);
        CHECK(f.pixels.cols() == 48);
    }
}

TEST_CASE("manifest round trip") {
    auto dir = temp_dir("manifest");
    std::vector<ManifestEntry> entries{{"s00_seq0", "s00", "a/b"}, {"s01_seq1", "s01", "c"}};
    write_manifest(entries, dir / "m.txt");
    auto back = read_manifest(dir / "m.txt");
    REQUIRE(back.size() == 2);
    CHECK(back[0].sequence_id == "s00_seq0");
    CHECK(back[1].subject_label == "s01");
    CHECK(back[1].path == "c");
}

TEST_CASE("placeholder frames are all-zero and flagged") {
    auto f = SilhouetteFrame::placeholder({32, 32});
    CHECK(f.is_occluded_placeholder);
    CHECK(f.pixels.maxCoeff() == 0.0f);
}
