#include <doctest.h>

#include <sstream>

#include "ionforce/errors.hpp"
#include "ionforce/scan_io.hpp"

using namespace ionforce;

namespace {

ScanResult small_sync() {
    ScanPlan plan;
    plan.tau_grid_s = linear_grid(1.1e-4, 3.3e-4, 3);
    plan.xi_grid_rad = linear_grid(0.1, 6.0, 4);
    plan.shots_per_phase = 37;
    return run_sync_scan(plan, Truth{1013.0, 0.774, 0.3}, NoiseModel{0.95, 17, {}});
}

ScanResult small_async() {
    ScanPlan plan;
    plan.tau_grid_s = linear_grid(1.5e-4, 3.5e-4, 4);
    plan.shots_per_phase = 12;
    plan.pulse_count = 20;
    return run_async_scan(plan, Truth{1013.0, 0.774, 0.0}, NoiseModel{1.0, 3, {}}, true);
}

}  // namespace

TEST_CASE("CSV round trip keeps every count and grid value") {
    for (const auto& scan : {small_sync(), small_async()}) {
        std::stringstream ss;
        write_scan_csv(scan, ss);
        const auto back = read_scan_csv(ss);
        CHECK(back.mode == scan.mode);
        CHECK(back.pulse_count == scan.pulse_count);
        CHECK(back.tau_grid_s == scan.tau_grid_s);
        CHECK(back.xi_grid_rad == scan.xi_grid_rad);
        CHECK(back.phases_rad == scan.phases_rad);
        CHECK(back.paired == scan.paired);
        REQUIRE(back.records.size() == scan.records.size());
        for (std::size_t i = 0; i < scan.records.size(); ++i)
            CHECK(back.records[i].d_counts == scan.records[i].d_counts);
        REQUIRE(back.references.size() == scan.references.size());
        for (std::size_t i = 0; i < scan.references.size(); ++i)
            CHECK(back.references[i].d_counts == scan.references[i].d_counts);
    }
}

TEST_CASE("JSON round trip is exact") {
    for (const auto& scan : {small_sync(), small_async()}) {
        CHECK(scan_from_json(scan_to_json(scan)) == scan);
        CHECK(scan_from_json(nlohmann::json::parse(scan_to_json(scan).dump())) == scan);
    }
}

TEST_CASE("pulse count falls back to the caller's default") {
    std::stringstream ss("tau_s,xi_rad,phi_rad,shots,d_counts\n"
                         "0.0001,0,0,10,7\n0.0001,0,2,10,2\n0.0001,0,4,10,3\n");
    CHECK(read_scan_csv(ss, 20).pulse_count == 20);
}

TEST_CASE("malformed files fail with a ValidationError") {
    SUBCASE("missing column") {
        std::stringstream ss("tau_s,xi_rad,phi_rad,shots\n0.0001,0,0,10\n");
        CHECK_THROWS_WITH_AS(read_scan_csv(ss), doctest::Contains("d_counts"), ValidationError);
    }
    SUBCASE("truncated row") {
        std::stringstream full;
        write_scan_csv(small_sync(), full);
        std::string text = full.str();
        text.resize(text.size() - 6);
        std::stringstream ss(text);
        CHECK_THROWS_AS(read_scan_csv(ss), ValidationError);
    }
    SUBCASE("bad number names the line") {
        std::stringstream ss("tau_s,xi_rad,phi_rad,shots,d_counts\n0.0001,0,0,10,seven\n");
        CHECK_THROWS_WITH_AS(read_scan_csv(ss), doctest::Contains("line 2"), ValidationError);
    }
    SUBCASE("counts above shots") {
        std::stringstream ss("tau_s,xi_rad,phi_rad,shots,d_counts\n0.0001,0,0,10,11\n");
        CHECK_THROWS_AS(read_scan_csv(ss), ValidationError);
    }
    SUBCASE("empty file") {
        std::stringstream ss("");
        CHECK_THROWS_AS(read_scan_csv(ss), ValidationError);
    }
}
