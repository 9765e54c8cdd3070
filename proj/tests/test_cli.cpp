#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "usforest/dataset.hpp"
#include "usforest/rng.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("USFOREST_CLI");
    REQUIRE_MESSAGE(env != nullptr, "USFOREST_CLI must point at the binary");
    return env;
}

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult res;
    char buf[4096];
    while (std::size_t got = fread(buf, 1, sizeof(buf), pipe)) {
        res.output.append(buf, got);
    }
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "usforest_cli_tests";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    REQUIRE(out.good());
    out << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// n-row CSV with y = 3 x1 + noise plus a pure-noise column x2.
fs::path signal_csv(std::size_t n, std::uint64_t seed) {
    const fs::path path = work_dir() / ("signal_" + std::to_string(seed) + ".csv");
    usforest::RngStream rng = usforest::RngStream::derive(seed, {0});
    std::ostringstream out;
    out.precision(17);
    out << "x1,x2,y\n";
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = rng.next_double();
        const double x2 = rng.next_double();
        out << x1 << "," << x2 << "," << 3.0 * x1 + 0.1 * rng.next_normal() << "\n";
    }
    write_file(path, out.str());
    return path;
}

fs::path constant_csv() {
    const fs::path path = work_dir() / "constant.csv";
    std::ostringstream out;
    out << "x1,y\n";
    for (int i = 0; i < 30; ++i) out << 0.1 * i << ",4.5\n";
    write_file(path, out.str());
    return path;
}

}  // namespace

TEST_CASE("missing --response is a usage error naming the flag") {
    const auto res = run("predict --data nowhere.csv --k 5 --m 10 --point 1");
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("--response") != std::string::npos);
}

TEST_CASE("alpha outside (0,1) is a usage error") {
    const fs::path csv = signal_csv(40, 1);
    const auto res = run("test --data " + csv.string() +
                         " --response y --reduced x1 --sample-points 2 --k 8 --nz 5 "
                         "--nmc 5 --alpha 1.5");
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("alpha") != std::string::npos);
}

TEST_CASE("missing data file fails without producing output") {
    const auto res = run("predict --data /no/such/file.csv --response y --k 5 --m 10 "
                         "--point 1");
    CHECK(res.exit_code != 0);
}

TEST_CASE("constant response yields a degenerate interval") {
    const fs::path csv = constant_csv();
    const fs::path out = work_dir() / "constant_predict.json";
    const auto res = run("predict --data " + csv.string() +
                         " --response y --k 5 --m 25 --nz 5 --nmc 10 --point 1.0 "
                         "--point 2.0 --seed 7 --out " + out.string());
    REQUIRE_MESSAGE(res.exit_code == 0, res.output);
    const auto report = nlohmann::json::parse(read_file(out));
    for (const auto& p : report["per_point"]) {
        CHECK(p["theta_hat"].get<double>() == doctest::Approx(4.5).epsilon(1e-12));
        CHECK(p["lower"] == p["theta_hat"]);
        CHECK(p["upper"] == p["theta_hat"]);
        CHECK(p["variance"].get<double>() == 0.0);
    }
}

TEST_CASE("predict report carries the resolved config and estimates") {
    const fs::path csv = signal_csv(60, 2);
    const fs::path out = work_dir() / "predict.json";
    const auto res = run("predict --data " + csv.string() +
                         " --response y --k 10 --internal --nz 8 --nmc 12 "
                         "--point 0.5,0.5 --seed 3 --out " + out.string());
    REQUIRE_MESSAGE(res.exit_code == 0, res.output);
    const auto report = nlohmann::json::parse(read_file(out));
    CHECK(report["config"]["k"] == 10);
    CHECK(report["config"]["method"] == "internal");
    CHECK(report["config"]["seed"] == 3);
    const auto& p = report["per_point"][0];
    CHECK(std::isfinite(p["lower"].get<double>()));
    CHECK(std::isfinite(p["upper"].get<double>()));
    CHECK(p["lower"].get<double>() <= p["upper"].get<double>());
    CHECK(p["zeta1"].get<double>() >= 0.0);
    CHECK(p["zetakk"].get<double>() >= 0.0);
}

TEST_CASE("reduced set equal to all features gives statistic zero") {
    const fs::path csv = signal_csv(50, 4);
    const fs::path pts = work_dir() / "points.csv";
    write_file(pts, "0.3,0.3\n0.7,0.7\n");
    const fs::path out = work_dir() / "null_test.json";
    const auto res = run("test --data " + csv.string() +
                         " --response y --reduced x1,x2 --points-file " + pts.string() +
                         " --k 8 --nz 6 --nmc 8 --seed 5 --out " + out.string());
    REQUIRE_MESSAGE(res.exit_code == 0, res.output);
    const auto report = nlohmann::json::parse(read_file(out));
    CHECK(report["results"][0]["statistic"].get<double>() == 0.0);
    CHECK_FALSE(report["results"][0]["reject"].get<bool>());
}

TEST_CASE("battery mode emits four labeled results") {
    const fs::path csv = signal_csv(120, 6);
    const fs::path pts = work_dir() / "battery_points.csv";
    write_file(pts, "0.2,0.2\n0.5,0.5\n0.8,0.8\n");
    const fs::path out = work_dir() / "battery.json";
    const auto res = run("test --data " + csv.string() +
                         " --response y --reduced x1 --points-file " + pts.string() +
                         " --k 12 --nz 10 --nmc 15 --seed 9 --battery --out " +
                         out.string());
    REQUIRE_MESSAGE(res.exit_code == 0, res.output);
    const auto report = nlohmann::json::parse(read_file(out));
    REQUIRE(report["results"].size() == 4);
    CHECK(report["results"][0]["label"] == "full_vs_reduced");
    CHECK(report["results"][3]["label"] == "randomized_vs_rerandomized");
}

TEST_CASE("experiment reruns are byte-identical and config errors exit 2") {
    const fs::path cfg = work_dir() / "experiment.json";
    const fs::path out_a = work_dir() / "exp_a.json";
    const fs::path out_b = work_dir() / "exp_b.json";
    const fs::path hist = work_dir() / "exp_hist.csv";
    nlohmann::json doc = {
        {"operation", "distribution"},
        {"seed", 77},
        {"generator", {{"kind", "slr"}, {"n", 50}, {"noise_sd", 1.0}}},
        {"ensemble", {{"k", 8}, {"scheme", "uniform"}, {"m", 30}}},
        {"replicates", 5},
        {"points", {{10.0}}},
        {"histogram_csv", hist.string()},
    };
    write_file(cfg, doc.dump(2));

    const auto a = run("experiment --config " + cfg.string() + " --out " + out_a.string());
    REQUIRE_MESSAGE(a.exit_code == 0, a.output);
    const auto b = run("experiment --config " + cfg.string() + " --out " + out_b.string());
    REQUIRE_MESSAGE(b.exit_code == 0, b.output);
    CHECK(read_file(out_a) == read_file(out_b));

    const std::string hist_text = read_file(hist);
    CHECK(hist_text.rfind("bin_left,bin_right,count\n", 0) == 0);

    doc["bogus_key"] = 1;
    write_file(cfg, doc.dump(2));
    const auto bad = run("experiment --config " + cfg.string());
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("bogus_key") != std::string::npos);
}

TEST_CASE("thread count never changes results") {
    const fs::path csv = signal_csv(80, 8);
    const fs::path out1 = work_dir() / "threads1.json";
    const fs::path out3 = work_dir() / "threads3.json";
    const std::string base = "predict --data " + csv.string() +
                             " --response y --k 10 --m 60 --nz 6 --nmc 10 "
                             "--point 0.4,0.4 --seed 11 --out ";
    const auto a = run("--threads 1 " + base + out1.string());
    const auto b = run("--threads 3 " + base + out3.string());
    REQUIRE_MESSAGE(a.exit_code == 0, a.output);
    REQUIRE_MESSAGE(b.exit_code == 0, b.output);
    CHECK(read_file(out1) == read_file(out3));
}
