#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "quanta/io.hpp"
#include "quanta/stats.hpp"

using namespace quanta;
using nlohmann::json;

namespace {

const std::string cli = QUANTA_CLI_PATH;

std::filesystem::path work_dir() {
    const auto d = std::filesystem::temp_directory_path() / "quanta_cli_test";
    std::filesystem::create_directories(d);
    return d;
}

struct RunResult {
    int code = -1;
    std::string out;
};

RunResult run(const std::string& args) {
    const auto dir = work_dir();
    const std::string out_path = (dir / "stdout.txt").string();
    const int rc = std::system((cli + " " + args + " > " + out_path + " 2> /dev/null").c_str());
    RunResult r;
    r.code = WEXITSTATUS(rc);
    std::ifstream in(out_path);
    r.out = std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return r;
}

}  // namespace

TEST_CASE("toy then simulate lands on the predicted activation rate") {
    const auto dir = work_dir();
    const std::string scene = (dir / "scene.qds").string();
    const std::string bits = (dir / "scene.qbs").string();

    RunResult t = run("toy --out " + scene + " --frames 64 --height 32 --width 32");
    REQUIRE(t.code == 0);
    CHECK(json::parse(t.out)["shape"][0] == 64);

    RunResult s = run("simulate --ref " + scene + " --rate 0.06 --seed 1 --out " + bits);
    REQUIRE(s.code == 0);
    const json sj = json::parse(s.out);

    // expected activation rate from the reference itself
    const DenseVolume ref = read_qds(scene);
    const double q = 0.06 / ref.mean();
    double expect = 0.0;
    for (std::int64_t i = 0; i < ref.volume(); ++i) expect += activation_prob(q * ref[i]);
    expect /= static_cast<double>(ref.volume());
    const double sigma = std::sqrt(expect * (1 - expect) / static_cast<double>(ref.volume()));
    CHECK(std::fabs(sj["rate"].get<double>() - expect) < 3.0 * sigma);
    CHECK(expect < 0.06);  // Jensen: below the mean-rate bound
}

TEST_CASE("split emits a valid triple") {
    const auto dir = work_dir();
    const std::string scene = (dir / "s2.qds").string();
    const std::string bits = (dir / "s2.qbs").string();
    REQUIRE(run("toy --out " + scene + " --frames 16 --height 16 --width 16").code == 0);
    REQUIRE(run("simulate --ref " + scene + " --rate 0.1 --seed 2 --out " + bits).code == 0);

    const std::string prefix = (dir / "triple").string();
    RunResult r = run("split --in " + bits + " --p 0.5 --seed 7 --out-prefix " + prefix);
    REQUIRE(r.code == 0);

    const BitVolume raw = read_qbs(bits);
    const BitVolume input = read_qbs(prefix + ".input.qbs");
    const BitVolume target = read_qbs(prefix + ".target.qbs");
    const BitVolume mask = read_qbs(prefix + ".mask.qbs");
    for (std::int64_t i = 0; i < raw.volume(); ++i) {
        CHECK((input.get_linear(i) & target.get_linear(i)) == 0);
        CHECK((input.get_linear(i) | target.get_linear(i)) == raw.get_linear(i));
        CHECK(mask.get_linear(i) == 1 - input.get_linear(i));
    }
    const json j = json::parse(r.out);
    CHECK(j["input_photons"].get<std::int64_t>() + j["target_photons"].get<std::int64_t>() ==
          j["raw_photons"].get<std::int64_t>());
}

TEST_CASE("metrics on identical volumes reports the caps") {
    const auto dir = work_dir();
    const std::string scene = (dir / "s3.qds").string();
    REQUIRE(run("toy --out " + scene + " --frames 4 --height 24 --width 24").code == 0);
    RunResult r = run("metrics --pred " + scene + " --gt " + scene);
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["psnr"]["mean"].get<double>() == 99.0);
    CHECK(j["ssim"]["mean"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("bin matches the library operation") {
    const auto dir = work_dir();
    const std::string scene = (dir / "s4.qds").string();
    const std::string bits = (dir / "s4.qbs").string();
    const std::string binned = (dir / "s4_binned.qds").string();
    REQUIRE(run("toy --out " + scene + " --frames 16 --height 16 --width 16").code == 0);
    REQUIRE(run("simulate --ref " + scene + " --rate 0.2 --seed 3 --out " + bits).code == 0);
    REQUIRE(run("bin --in " + bits + " --window 4 --out " + binned).code == 0);
    const DenseVolume got = read_qds(binned);
    const DenseVolume want = bin_temporal(read_qbs(bits), 4);
    CHECK(got.values() == want.values());
}

TEST_CASE("stats-check passes and prints one line per check") {
    RunResult r = run("stats-check --seed 5");
    CHECK(r.code == 0);
    int lines = 0;
    for (std::size_t pos = 0; (pos = r.out.find("[PASS]", pos)) != std::string::npos; ++pos)
        ++lines;
    CHECK(lines >= 6);
    CHECK(r.out.find("[FAIL]") == std::string::npos);
}

TEST_CASE("exit codes distinguish usage from data errors") {
    CHECK(run("no-such-command").code == 1);
    CHECK(run("simulate --bogus-flag 1").code == 1);
    CHECK(run("metrics --pred /nonexistent.qds --gt /nonexistent.qds").code == 2);

    // malformed magic -> data error
    const auto dir = work_dir();
    const std::string bad = (dir / "bad.qbs").string();
    std::ofstream out(bad, std::ios::binary);
    out << "NOPE";
    out.close();
    CHECK(run("bin --in " + bad + " --window 2 --out " + (dir / "x.qds").string()).code == 2);
}

TEST_CASE("train config files reject unknown keys") {
    const auto dir = work_dir();
    const std::string scene = (dir / "s5.qds").string();
    const std::string bits = (dir / "s5.qbs").string();
    REQUIRE(run("toy --out " + scene + " --frames 16 --height 16 --width 16").code == 0);
    REQUIRE(run("simulate --ref " + scene + " --rate 0.1 --seed 4 --out " + bits).code == 0);

    const std::string cfg = (dir / "train.json").string();
    std::ofstream out(cfg);
    out << "{\"epochs\": 1, \"typo_key\": 3}";
    out.close();
    RunResult r = run("train --data " + bits + " --config " + cfg);
    CHECK(r.code == 2);
}
