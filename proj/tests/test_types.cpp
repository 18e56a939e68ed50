#include "doctest.h"

#include "c2t/types.hpp"

#include <string>

using namespace c2t;

TEST_CASE("percentile uses 1-based lower interpolation") {
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(percentile_lower(v, 0.10, 0.0) == doctest::Approx(1.0));
    CHECK(percentile_lower(v, 0.50, 0.0) == doctest::Approx(5.0));
    CHECK(percentile_lower(v, 1.00, 0.0) == doctest::Approx(10.0));
    CHECK(percentile_lower({}, 0.5, 42.0) == doctest::Approx(42.0));
    CHECK(percentile_lower({3.0}, 0.1, 0.0) == doctest::Approx(3.0));
}

TEST_CASE("phase names round-trip") {
    for (int i = 0; i < 4; ++i) {
        PhaseId p = static_cast<PhaseId>(i);
        auto back = phase_from_name(phase_name(p));
        REQUIRE(back.has_value());
        CHECK(*back == p);
    }
    CHECK(!phase_from_name("bogus").has_value());
}

TEST_CASE("config validation names the offending field") {
    SimConfig c;
    CHECK_NOTHROW(c.validate());
    c.grid_rows = 0;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("grid_rows"), ConfigError);
    c = SimConfig{};
    c.arrival_rate_per_entry = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SimConfig{};
    c.green_s = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SimConfig{};
    c.green_s = 30.5; // dt must divide stage durations
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("surge profile ramps the arrival multiplier") {
    SimConfig c;
    c.surge = SurgeProfile{4.0, 100.0, 300.0};
    CHECK(c.rate_multiplier(0.0) == doctest::Approx(1.0));
    CHECK(c.rate_multiplier(100.0) == doctest::Approx(1.0));
    CHECK(c.rate_multiplier(250.0) == doctest::Approx(2.5)); // halfway up the ramp
    CHECK(c.rate_multiplier(400.0) == doctest::Approx(4.0));
    CHECK(c.rate_multiplier(1000.0) == doctest::Approx(4.0));
}

TEST_CASE("diurnal profile interpolates piecewise-linearly") {
    DiurnalProfile d;
    d.points = {{0.0, 1.0}, {100.0, 3.0}, {200.0, 1.0}};
    CHECK(d.at(0.0) == doctest::Approx(1.0));
    CHECK(d.at(50.0) == doctest::Approx(2.0));
    CHECK(d.at(100.0) == doctest::Approx(3.0));
    CHECK(d.at(150.0) == doctest::Approx(2.0));
    CHECK(d.at(500.0) == doctest::Approx(1.0)); // clamped past the last point
}
