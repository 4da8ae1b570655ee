#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* kToyConfig =
    "geometry.width = 16\n"
    "geometry.height = 16\n"
    "pca.dim = 8\n"
    "keypose.k = 4\n"
    "cvae.d_z = 6\n"
    "cvae.channels1 = 4\n"
    "cvae.channels2 = 4\n"
    "cvae.channels3 = 4\n"
    "cvae.cond_embed = 4\n"
    "cvae.shared_dense = 8\n"
    "cvae.epochs = 2\n"
    "cvae.learning_rate = 0.001\n"
    "bilstm.hidden = 6\n"
    "bilstm.epochs = 2\n"
    "geinet.epochs = 10\n"
    "geinet.learning_rate = 0.01\n";

struct CliFixture {
    fs::path root;
    fs::path cfg;

    CliFixture() {
        root = fs::temp_directory_path() / "bgait_test_cli";
        fs::remove_all(root);
        fs::create_directories(root);
        cfg = root / "cfg.txt";
        std::ofstream(cfg) << kToyConfig;
#ifdef _WIN32
        _putenv_s("GOL_CACHE", (root / "cache").string().c_str());
#else
        setenv("GOL_CACHE", (root / "cache").string().c_str(), 1);
#endif
    }

    int run(const std::string& args) const {
        const std::string cmd = std::string(BGAIT_CLI_PATH) + " " + args + " >" +
                                (root / "stdout.txt").string() + " 2>" +
                                (root / "stderr.txt").string();
        const int rc = std::system(cmd.c_str());
        return WEXITSTATUS(rc);
    }

    std::string stderr_text() const {
        std::ifstream in(root / "stderr.txt");
        return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }
};

}  // namespace

TEST_CASE("no arguments yields usage and status 2") {
    CliFixture cli;
    CHECK(cli.run("") == 2);
    CHECK(cli.run("frobnicate") == 2);
}

TEST_CASE("component failures exit 1 with a machine-parsable line") {
    CliFixture cli;
    CHECK(cli.run("build-keyposes --data /nonexistent/manifest.txt") == 1);
    const auto err = cli.stderr_text();
    CHECK(err.find("error module=") == 0);
    CHECK(err.find("cause=") != std::string::npos);
}

TEST_CASE("end-to-end pipeline smoke run") {
    CliFixture cli;
    const std::string common = " --config " + cli.cfg.string();
    const fs::path data = cli.root / "data";
    const fs::path occl = cli.root / "occluded";
    const fs::path recon = cli.root / "recon";
    const fs::path report = cli.root / "report";

    REQUIRE(cli.run("synth-data" + common + " --out " + data.string() +
                    " --subjects 3 --seqs 2 --frames 30") == 0);
    CHECK(fs::exists(data / "manifest.txt"));
    int dirs = 0;
    for (const auto& e : fs::directory_iterator(data))
        if (e.is_directory()) ++dirs;
    CHECK(dirs == 6);

    const std::string manifest = " --data " + (data / "manifest.txt").string();
    REQUIRE(cli.run("build-keyposes" + common + manifest + " --out " +
                    (cli.root / "kp").string()) == 0);
    REQUIRE(cli.run("train-cvae" + common + manifest + " --out " + report.string()) == 0);
    REQUIRE(cli.run("train-bilstm" + common + manifest + " --out " + report.string()) == 0);
    REQUIRE(cli.run("train-geinet" + common + manifest + " --out " + report.string()) == 0);

    REQUIRE(cli.run("label" + common + manifest + " --out " + (cli.root / "labels").string()) ==
            0);
    CHECK(fs::exists(cli.root / "labels" / "s00_seq0_states.txt"));

    REQUIRE(cli.run("occlude" + common + manifest + " --degree 0.5 --out " + occl.string()) ==
            0);
    REQUIRE(cli.run("reconstruct" + common + " --data " + (occl / "manifest.txt").string() +
                    " --out " + recon.string()) == 0);
    CHECK(fs::exists(recon / "s00_seq0_report.csv"));

    REQUIRE(cli.run("evaluate" + common + " --data " + (recon / "manifest.txt").string() +
                    " --out " + report.string()) == 0);
    CHECK(fs::exists(report / "cmc.csv"));
    CHECK(fs::exists(report / "records.csv"));

    // rank-1 column parses
    std::ifstream cmc(report / "cmc.csv");
    std::string header, row;
    std::getline(cmc, header);
    std::getline(cmc, row);
    CHECK(header == "rank,accuracy_pct");
    const double rank1 = std::stod(row.substr(row.find(',') + 1));
    CHECK(rank1 >= 0.0);
    CHECK(rank1 <= 100.0);

    REQUIRE(cli.run("kfold" + common + manifest + " --k 2 --out " + report.string()) == 0);
    CHECK(fs::exists(report / "kfold.csv"));
}
