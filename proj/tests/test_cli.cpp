#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bbmlab/stats.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli()
{
    const char* p = std::getenv("BBMLAB_CLI");
    REQUIRE_MESSAGE(p != nullptr, "BBMLAB_CLI must point at the command-line binary");
    return p;
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("bbmlab_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args, const fs::path& out)
{
    const std::string cmd = cli() + " --out " + out.string() + " " + args + " > " + (out / "stdout.txt").string() +
                            " 2> " + (out / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("verify identities passes")
{
    const auto out = scratch("verify");
    CHECK(run("verify identities", out) == 0);
    CHECK(slurp(out / "stdout.txt").find("[hard] PASS  1") != std::string::npos);
    const auto report = slurp(out / "verify-identities.json");
    CHECK(report.find("\"config_hash\"") != std::string::npos);
    CHECK(report.find("residual_N3") != std::string::npos);
}

TEST_CASE("simulate-bbm is byte-reproducible")
{
    const auto a = scratch("sim_a");
    const auto b = scratch("sim_b");
    const std::string args = "simulate-bbm --seed 7 --N 1000 --horizon 4 --checkpoints 8 --genealogy true";
    REQUIRE(run(args, a) == 0);
    REQUIRE(run(args, b) == 0);
    CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
    CHECK(slurp(a / "genealogy.json") == slurp(b / "genealogy.json"));
    CHECK(slurp(a / "simulate-bbm.ini") == "[simulate-bbm]\nN = 1000\ncheckpoints = 8\ngenealogy = true\nhorizon = 4\nseed = 7\n");
    CHECK(slurp(a / "trajectory.csv").rfind("# config_hash=", 0) == 0);
    const auto c = scratch("sim_c");
    REQUIRE(run("simulate-bbm --seed 8 --N 1000 --horizon 4 --checkpoints 8", c) == 0);
    CHECK(slurp(a / "trajectory.csv") != slurp(c / "trajectory.csv"));

    // The saved log feeds genealogy-extract.
    const auto g = scratch("extract");
    CHECK(run("genealogy-extract --input " + (a / "genealogy.json").string() + " --n 5", g) == 0);
    CHECK(fs::exists(g / "partitions.json"));
    CHECK(fs::exists(g / "bridge.csv"));
}

TEST_CASE("config file with flag overrides")
{
    const auto dir = scratch("config");
    std::ofstream(dir / "run.ini") << "[simulate-bbm]\nN = 1000\nhorizon = 2\nseed = 3\n[estimate-w]\ny = 2\n";
    REQUIRE(run("--config " + (dir / "run.ini").string() + " simulate-bbm --seed 5", dir) == 0);
    CHECK(slurp(dir / "simulate-bbm.ini") == "[simulate-bbm]\nN = 1000\nhorizon = 2\nseed = 5\n");
}

TEST_CASE("sample-coalescent histogram matches the BSZ rates")
{
    const auto out = scratch("coal");
    REQUIRE(run("sample-coalescent --kind bsz --n 5 --replicates 100000", out) == 0);
    std::istringstream in(slurp(out / "first_event.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# config_hash=", 0) == 0);
    std::getline(in, line);
    CHECK(line == "k,count,expected");
    std::vector<double> counts;
    std::vector<double> expected;
    while (std::getline(in, line)) {
        int k = 0;
        double n = 0, e = 0;
        REQUIRE(std::sscanf(line.c_str(), "%d,%lf,%lf", &k, &n, &e) == 3);
        counts.push_back(n);
        expected.push_back(e);
    }
    REQUIRE(counts.size() == 4);
    // C(5,k) lambda_{5,k} / 4 from the Beta integrals.
    const double oracle[] = {10.0 / 16, 10.0 / 48, 5.0 / 48, 1.0 / 16};
    for (int i = 0; i < 4; ++i) CHECK(expected[std::size_t(i)] == doctest::Approx(1e5 * oracle[i]));
    CHECK(bbmlab::stats::chi_square(counts, expected).passed);
}

TEST_CASE("exit codes")
{
    const auto out = scratch("codes");
    CHECK(run("simulate-bbm --no-such-flag 1", out) == 2);
    CHECK(run("", out) == 2);
    CHECK(run("verify nosuch", out) == 2);
    std::ofstream(out / "bad.ini") << "[simulate-bbm]\nN = many\n";
    CHECK(run("--config " + (out / "bad.ini").string() + " simulate-bbm", out) == 3);
    std::ofstream(out / "unknown.ini") << "[simulate-bbm]\ncolour = blue\n";
    CHECK(run("--config " + (out / "unknown.ini").string() + " simulate-bbm", out) == 3);
    std::ofstream(out / "broken.ini") << "[simulate-bbm\n";
    CHECK(run("--config " + (out / "broken.ini").string() + " simulate-bbm", out) == 3);
    CHECK(run("--config " + (out / "missing.ini").string() + " simulate-bbm", out) == 3);
    CHECK(run("simulate-bbm --N 2", out) == 3);
}

TEST_CASE("output directory from the environment")
{
    const auto out = scratch("env");
    const std::string cmd = "BBMLAB_OUT=" + out.string() + " " + cli() + " solve-fkpp --X 15 --step 0.01 > /dev/null";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(out / "wave.csv"));
    CHECK(slurp(out / "wave_fit.json").find("\"C\"") != std::string::npos);
}
