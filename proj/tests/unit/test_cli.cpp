#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "commands.hpp"
#include "ionforce/constants.hpp"
#include "ionforce/scan_io.hpp"

using namespace ionforce;
using namespace ionforce::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("ionforce_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

RunConfig small_fig2(const fs::path& out) {
    auto c = fig2_defaults();
    c.tau.points = 6;
    c.xi_points = 6;
    c.shots = 60;
    c.out_dir = out.string();
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("simulate then fit reproduces the in-process phase-map fit") {
    TempDir dir("roundtrip");
    std::ostringstream log;
    for (const char* format : {"csv", "json"}) {
        auto c = small_fig2(dir.path);
        c.format = format;
        const auto files = cmd_simulate_sync(c, log);
        REQUIRE(files.size() == 1);
        const auto fitted = cmd_fit(c, {files[0], "phase-map"}, log);
        const auto direct = cmd_reproduce_fig2(c, log);
        REQUIRE(fitted.results.size() == 1);
        const auto& a = fitted.results[0];
        const auto& b = direct.fit.result;
        REQUIRE(a.parameters.size() == b.parameters.size());
        for (std::size_t i = 0; i < a.parameters.size(); ++i) {
            CHECK(a.parameters[i].name == b.parameters[i].name);
            CHECK(a.parameters[i].value == b.parameters[i].value);
            CHECK(a.parameters[i].lower == b.parameters[i].lower);
            CHECK(a.parameters[i].upper == b.parameters[i].upper);
        }
    }
}

TEST_CASE("hand-made noiseless fringe file fits exactly") {
    TempDir dir("fringe");
    const auto path = (dir.path / "fringe.csv").string();
    {
        std::ofstream out(path);
        out << "# pulse_count=2\ntau_s,xi_rad,phi_rad,shots,d_counts\n";
        const int shots = 1000000000;
        for (int i = 0; i < 12; ++i) {
            const double phi = kTwoPi * i / 12.0;
            out << "0.0001,NA," << phi << ',' << shots << ','
                << std::lround(shots * (0.5 + 0.45 * std::cos(phi - 1.2))) << '\n';
        }
    }
    auto c = small_fig2(dir.path);
    std::ostringstream log;
    const auto fit = cmd_fit(c, {path, "fringe"}, log);
    REQUIRE(fit.results.size() == 1);
    CHECK(fit.results[0].at("contrast").value == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(fit.results[0].at("phase").value == doctest::Approx(1.2).epsilon(1e-6));
}

TEST_CASE("truncated data file is a validation error") {
    TempDir dir("trunc");
    const auto path = (dir.path / "t.csv").string();
    std::ofstream(path) << "tau_s,xi_rad,phi_rad,shots\n0.0001,0,0,10\n";
    std::ostringstream log;
    CHECK_THROWS_AS(cmd_fit(small_fig2(dir.path), {path, "phase-map"}, log), ValidationError);
}

TEST_CASE("same seed writes byte-identical outputs") {
    TempDir a("rerun_a"), b("rerun_b");
    std::ostringstream log;
    auto ca = small_fig2(a.path);
    ca.plot = true;
    auto cb = small_fig2(b.path);
    cb.plot = true;
    cb.threads = 3;
    const auto fa = cmd_reproduce_fig2(ca, log).files;
    const auto fb = cmd_reproduce_fig2(cb, log).files;
    REQUIRE(fa.size() == fb.size());
    for (std::size_t i = 0; i < fa.size(); ++i) {
        CHECK(fs::path(fa[i]).filename() == fs::path(fb[i]).filename());
        CHECK(slurp(fa[i]) == slurp(fb[i]));
    }
}

TEST_CASE("ten times the shots shrinks the amplitude interval by about sqrt(10)") {
    TempDir dir("shots");
    std::ostringstream log;
    auto c = small_fig2(dir.path);
    c.shots = 40;
    const double wide = cmd_reproduce_fig2(c, log).fit.result.at("amplitude").sigma();
    c.shots = 400;
    const double narrow = cmd_reproduce_fig2(c, log).fit.result.at("amplitude").sigma();
    CHECK(wide / narrow == doctest::Approx(std::sqrt(10.0)).epsilon(0.2));
}

TEST_CASE("zero force gives a flat map and a flat contrast curve") {
    TempDir dir("zero");
    std::ostringstream log;
    Overrides o;
    o.force = "0 N";
    auto c2 = resolve_config(small_fig2(dir.path), std::nullopt, o);
    const auto fig2 = cmd_reproduce_fig2(c2, log);
    CHECK(fig2.fit.result.at("amplitude").covers(0.0));

    auto c3 = resolve_config(fig3_defaults(), std::nullopt, o);
    c3.out_dir = dir.path.string();
    c3.pulse_counts = {10};
    c3.tau.points = 20;
    const auto fig3 = cmd_reproduce_fig3(c3, log);
    REQUIRE(fig3.size() == 1);
    CHECK(fig3[0].fit.result.diagnostics.has_flag("force_not_detected"));
    CHECK(fig3[0].fit.result.at("amplitude").covers(0.0));
}

TEST_CASE("unknown fit model is rejected") {
    TempDir dir("model");
    std::ostringstream log;
    auto c = small_fig2(dir.path);
    const auto files = cmd_simulate_sync(c, log);
    CHECK_THROWS_AS(cmd_fit(c, {files[0], "spline"}, log), ValidationError);
}
