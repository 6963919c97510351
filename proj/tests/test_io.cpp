#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "levyflow/io.hpp"

using namespace levyflow;
namespace fs = std::filesystem;

#ifndef LEVYFLOW_DATA_DIR
#define LEVYFLOW_DATA_DIR "../data"
#endif

namespace {

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("levyflow_test_" + name);
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

}  // namespace

TEST_CASE("bundled day-224 observations") {
    const ObservationSet set = load_observations(fs::path(LEVYFLOW_DATA_DIR) / "made_day224.csv");
    REQUIRE(set.groups.size() == 1);
    const auto& g = set.groups[0];
    CHECK(g.time == 224.0);
    CHECK(g.weight == 1.0);
    REQUIRE(g.points.size() == 29);
    CHECK(g.points.front().x == Catch::Approx(2.1));
    CHECK(g.points.front().c == Catch::Approx(3378.0));
    CHECK(g.points.back().x == Catch::Approx(268.7));
    CHECK(g.points.back().c == Catch::Approx(6.0));
    CHECK_NOTHROW(set.validate(0.0, 300.0));
}

TEST_CASE("bundled day-328 observations") {
    const ObservationSet set = load_observations(fs::path(LEVYFLOW_DATA_DIR) / "made_day328.csv");
    REQUIRE(set.groups.size() == 1);
    const auto& g = set.groups[0];
    CHECK(g.time == 328.0);
    REQUIRE(g.points.size() == 32);
    CHECK(g.points.front().x == Catch::Approx(2.1));
    CHECK(g.points.front().c == Catch::Approx(1762.0));
}

TEST_CASE("loader error paths") {
    SECTION("empty file") {
        const auto p = temp_file("empty.csv");
        write_file(p, "");
        CHECK_THROWS_WITH(load_observations(p), Catch::Matchers::ContainsSubstring("no observations"));
    }
    SECTION("header only") {
        const auto p = temp_file("header_only.csv");
        write_file(p, "time,x,concentration\n");
        CHECK_THROWS_WITH(load_observations(p), Catch::Matchers::ContainsSubstring("no observations"));
    }
    SECTION("malformed row reports its line number") {
        const auto p = temp_file("malformed.csv");
        write_file(p, "time,x,concentration\n224,2.1,3378\n224,oops,7\n");
        CHECK_THROWS_WITH(load_observations(p), Catch::Matchers::ContainsSubstring("line 3"));
    }
    SECTION("negative concentration") {
        const auto p = temp_file("negative.csv");
        write_file(p, "time,x,concentration\n224,2.1,-5\n");
        CHECK_THROWS_WITH(load_observations(p), Catch::Matchers::ContainsSubstring("negative"));
    }
    SECTION("duplicate (time, x)") {
        const auto p = temp_file("dup.csv");
        write_file(p, "time,x,concentration\n224,2.1,5\n224,2.1,6\n");
        CHECK_THROWS_WITH(load_observations(p), Catch::Matchers::ContainsSubstring("duplicate"));
    }
    SECTION("inconsistent group weight") {
        const auto p = temp_file("weights.csv");
        write_file(p, "time,x,concentration,weight\n224,2.1,5,1\n224,3.0,6,2\n");
        CHECK_THROWS_WITH(load_observations(p), Catch::Matchers::ContainsSubstring("weight"));
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(load_observations(temp_file("does_not_exist.csv")), ParseError);
    }
}

TEST_CASE("weight column and multiple groups") {
    const auto p = temp_file("grouped.csv");
    write_file(p,
               "time,x,concentration,weight\n"
               "132,5.0,10,2\n"
               "224,2.1,5,1\n"
               "224,3.0,6,1\n"
               "132,8.0,11,2\n");
    const ObservationSet set = load_observations(p);
    REQUIRE(set.groups.size() == 2);
    CHECK(set.groups[0].time == 132.0);
    CHECK(set.groups[0].weight == 2.0);
    CHECK(set.groups[0].points.size() == 2);
    CHECK(set.groups[1].time == 224.0);
    CHECK(set.groups[1].points.size() == 2);
}

TEST_CASE("ingest/emit round trip preserves the observation set") {
    const ObservationSet set = load_observations(fs::path(LEVYFLOW_DATA_DIR) / "made_day224.csv");
    const auto p = temp_file("roundtrip.csv");
    write_observations(set, p);
    const ObservationSet again = load_observations(p);
    REQUIRE(again.groups.size() == set.groups.size());
    for (std::size_t g = 0; g < set.groups.size(); ++g) {
        CHECK(again.groups[g].time == set.groups[g].time);
        CHECK(again.groups[g].weight == set.groups[g].weight);
        REQUIRE(again.groups[g].points.size() == set.groups[g].points.size());
        for (std::size_t i = 0; i < set.groups[g].points.size(); ++i) {
            CHECK(again.groups[g].points[i].x == set.groups[g].points[i].x);
            CHECK(again.groups[g].points[i].c == set.groups[g].points[i].c);
        }
    }
}

TEST_CASE("estimate_mass_constant") {
    SECTION("rectangle") {
        ObservationSet::Group g{0.0, 1.0, {{0.0, 2.0}, {1.0, 2.0}}};
        CHECK(estimate_mass_constant(g, 0.0, 1.0) == Catch::Approx(2.0));
    }
    SECTION("zero extension to the domain endpoints") {
        ObservationSet::Group g{0.0, 1.0, {{1.0, 2.0}, {2.0, 2.0}}};
        // trapezoid of (0,0)-(1,2)-(2,2)-(3,0): 1 + 2 + 1
        CHECK(estimate_mass_constant(g, 0.0, 3.0) == Catch::Approx(4.0));
    }
    SECTION("day-224 estimate lands within 25% of the published constant") {
        const ObservationSet set =
            load_observations(fs::path(LEVYFLOW_DATA_DIR) / "made_day224.csv");
        const double k = estimate_mass_constant(set.groups[0], 0.0, 300.0);
        CHECK(std::abs(k - 56778.24) / 56778.24 < 0.25);
    }
    SECTION("scaling the concentrations scales K and keeps densities fixed") {
        ObservationSet::Group g{0.0, 1.0, {{1.0, 2.0}, {2.0, 3.0}, {4.0, 1.0}}};
        const double k1 = estimate_mass_constant(g, 0.0, 5.0);
        ObservationSet::Group g10 = g;
        for (auto& pt : g10.points) pt.c *= 10.0;
        const double k10 = estimate_mass_constant(g10, 0.0, 5.0);
        CHECK(k10 == Catch::Approx(10.0 * k1));
        for (std::size_t i = 0; i < g.points.size(); ++i)
            CHECK(g.points[i].c / k1 == Catch::Approx(g10.points[i].c / k10));
    }
    SECTION("a single point is rejected") {
        ObservationSet::Group g{0.0, 1.0, {{1.0, 2.0}}};
        CHECK_THROWS_AS(estimate_mass_constant(g, 0.0, 3.0), std::invalid_argument);
    }
    SECTION("unsorted input is handled") {
        ObservationSet::Group g{0.0, 1.0, {{2.0, 2.0}, {1.0, 2.0}}};
        CHECK(estimate_mass_constant(g, 1.0, 2.0) == Catch::Approx(2.0));
    }
}

TEST_CASE("run config parsing") {
    const auto p = temp_file("config.ini");
    write_file(p,
               "# example configuration\n"
               "[model]\n"
               "lambda = 0.8\n"
               "gamma = 0.9999\n"
               "b = 0.1859783\n"
               "cells = 600\n"
               "output_times = 112, 224\n"
               "normalize = false\n");
    const RunConfig cfg = RunConfig::load(p);
    CHECK(cfg.get_double("lambda") == Catch::Approx(0.8));
    CHECK(cfg.get_u64("cells", 0) == 600);
    CHECK(cfg.get_double("missing", 7.5) == 7.5);
    CHECK_FALSE(cfg.get_bool("normalize", true));
    const auto times = cfg.get_double_list("output_times");
    REQUIRE(times.size() == 2);
    CHECK(times[1] == Catch::Approx(224.0));
    CHECK_THROWS_AS(cfg.get_double("nope"), ParseError);

    SECTION("duplicate keys rejected") {
        const auto q = temp_file("dup.ini");
        write_file(q, "a = 1\na = 2\n");
        CHECK_THROWS_WITH(RunConfig::load(q), Catch::Matchers::ContainsSubstring("duplicate"));
    }
    SECTION("garbage line rejected") {
        const auto q = temp_file("garbage.ini");
        write_file(q, "just words\n");
        CHECK_THROWS_AS(RunConfig::load(q), ParseError);
    }
}

TEST_CASE("sample CSV round trip with header metadata") {
    SampleBatch batch;
    batch.seed = 987654321;
    batch.time = 224.0;
    batch.values = {1.5, 2.25, 300.0, 0.125};
    FadeParams params;
    params.drift.x_mid = 0.5;
    const auto p = temp_file("batch.csv");
    write_sample_csv(batch, params, p);
    const SampleBatch again = load_sample_csv(p);
    CHECK(again.seed == batch.seed);
    CHECK(again.time == batch.time);
    REQUIRE(again.values.size() == batch.values.size());
    for (std::size_t i = 0; i < batch.values.size(); ++i)
        CHECK(again.values[i] == batch.values[i]);
}

TEST_CASE("params hash distinguishes parameter sets") {
    FadeParams a;
    a.drift.x_mid = 0.5;
    FadeParams b = a;
    b.b = 2.0;
    CHECK(params_hash(a) != params_hash(b));
    CHECK(params_hash(a) == params_hash(a));
}
