#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmmi/network.hpp"

namespace cmmi {

struct RouteDemand {
    std::vector<IntersectionId> route;
    double rate = 0.0;  // Poisson arrivals per time step
};

struct DemandSpec {
    std::vector<RouteDemand> routes;
    int32_t target_cars = 1;  // K
    uint64_t seed = 0;
};

// 4-connected bidirectional grid; intersection ids are 1-based row-major.
// FourWay installs the default 4-way conflict table at interior nodes;
// boundary nodes keep the all-crossing default.
RoadNetwork grid_network(int32_t rows, int32_t cols, TimeStep edge_len, CrossingMode mode);

// Seeded Poisson demand: per step, per route in order, draw arrivals and
// emit trips until exactly K exist. Errors when the rates are too low to
// reach K in any reasonable horizon.
std::vector<Trip> poisson_demand(const RoadNetwork& net, const DemandSpec& spec);

// Named paper fixtures: "fig2", "fig2_extended:<N>", "appendixH",
// "jsp_small". CMMI_FIXTURE_DIR is handled by the CLI, not here.
Scenario fixture(const std::string& name);

Scenario fixture_fig2();
Scenario fixture_fig2_extended(int32_t n_cars);
Scenario fixture_appendix_h();
Scenario fixture_jsp_small();

}  // namespace cmmi
