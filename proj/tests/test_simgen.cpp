#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cmmi/simgen.hpp"
#include "doctest.h"

using namespace cmmi;

TEST_CASE("grid_network shapes") {
    RoadNetwork g12 = grid_network(1, 2, 5, CrossingMode::AllCrossing);
    CHECK(g12.intersections.size() == 2);
    CHECK(g12.edges.size() == 2);

    RoadNetwork g22 = grid_network(2, 2, 5, CrossingMode::AllCrossing);
    CHECK(g22.intersections.size() == 4);
    CHECK(g22.edges.size() == 8);

    RoadNetwork g33 = grid_network(3, 3, 5, CrossingMode::FourWay);
    // only the interior node carries an explicit 4-way table; the boundary
    // keeps the all-crossing default
    CHECK(g33.crossing.size() == 1);
    CHECK(g33.crossing.count(5) == 1);
    CHECK(g33.crossing[5].size() == 8);
}

TEST_CASE("poisson_demand is seeded and exact in K") {
    RoadNetwork net = grid_network(1, 3, 2, CrossingMode::AllCrossing);
    DemandSpec spec;
    spec.routes.push_back({{1, 2, 3}, 2.5});
    spec.target_cars = 3;
    spec.seed = 99;
    std::vector<Trip> trips = poisson_demand(net, spec);
    REQUIRE(trips.size() == 3);
    CHECK(trips[0].id == 1);
    for (size_t n = 1; n < trips.size(); ++n) CHECK(trips[n - 1].depart <= trips[n].depart);

    std::vector<Trip> again = poisson_demand(net, spec);
    REQUIRE(again.size() == trips.size());
    for (size_t n = 0; n < trips.size(); ++n) {
        CHECK(again[n].id == trips[n].id);
        CHECK(again[n].depart == trips[n].depart);
        CHECK(again[n].route == trips[n].route);
    }
}

TEST_CASE("poisson_demand golden file") {
    RoadNetwork net = grid_network(2, 2, 3, CrossingMode::AllCrossing);
    DemandSpec spec;
    spec.routes.push_back({{1, 2, 4}, 0.2});
    spec.routes.push_back({{3, 4, 2}, 0.2});
    spec.target_cars = 10;
    spec.seed = 7;
    std::vector<Trip> trips = poisson_demand(net, spec);
    std::ostringstream got;
    for (const Trip& t : trips) {
        got << t.id << "@" << t.depart << ":";
        for (IntersectionId i : t.route) got << i << " ";
        got << "\n";
    }
    std::ifstream golden(std::string(std::getenv("CMMI_TEST_DATA")) + "/demand_seed7.txt");
    REQUIRE(golden.good());
    std::ostringstream expected;
    expected << golden.rdbuf();
    CHECK(got.str() == expected.str());
}

TEST_CASE("poisson_demand rejects starving rates") {
    RoadNetwork net = grid_network(1, 2, 1, CrossingMode::AllCrossing);
    DemandSpec spec;
    spec.routes.push_back({{1, 2}, 1e-7});
    spec.target_cars = 100;
    spec.seed = 1;
    CHECK_THROWS_AS(poisson_demand(net, spec), std::invalid_argument);
}

TEST_CASE("fixtures validate") {
    for (const char* name : {"fig2", "appendixH", "jsp_small"}) {
        Scenario s = fixture(name);
        ValidationReport report = validate_scenario(s);
        CHECK_MESSAGE(report.ok(), name);
    }
    Scenario ext = fixture("fig2_extended:6");
    CHECK(validate_scenario(ext).ok());
    CHECK(ext.trips.size() == 6);
    CHECK(ext.trips.back().depart == 4);
    CHECK_THROWS_AS(fixture("nope"), std::invalid_argument);
    CHECK_THROWS_AS(fixture("fig2_extended:x"), std::invalid_argument);
}

TEST_CASE("fig2 fixture carries the counterexample parameters") {
    Scenario s = fixture("fig2");
    CHECK(s.wait_bound == 1);
    for (const auto& [e, len] : s.network.edges) {
        (void)e;
        CHECK(len == 5);
    }
    REQUIRE(s.trips.size() == 4);
    CHECK(s.trips[1].route == std::vector<IntersectionId>{7, 5, 2, 3});
    CHECK(s.trips[0].depart == 0);
    CHECK(s.trips[1].depart == 0);
    CHECK(s.trips[2].depart == 1);
    CHECK(s.trips[3].depart == 2);
    // all paths crossing: no explicit sets anywhere
    CHECK(s.network.crossing.empty());
}
