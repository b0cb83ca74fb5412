#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cmmi {

using IntersectionId = int32_t;
using CarId = int32_t;
using TimeStep = int32_t;

// Sentinel for "no slot assigned" (the paper's empty allocation).
constexpr TimeStep kUnallocated = -1;

struct Edge {
    IntersectionId from = 0;
    IntersectionId to = 0;

    auto operator<=>(const Edge&) const = default;
};

// A movement through an intersection: (incoming edge, outgoing edge),
// stored relative to the intersection as (from, to) endpoints. A departure
// path has no incoming edge; it models a car entering the network.
struct Path {
    IntersectionId from = -1;  // upstream neighbour; ignored when departure
    IntersectionId to = -1;    // downstream neighbour
    bool departure = false;

    auto operator<=>(const Path&) const = default;
};

using CrossingSet = std::vector<Path>;

enum class CrossingMode { AllCrossing, FourWay };

struct RoadNetwork {
    std::set<IntersectionId> intersections;
    std::map<Edge, TimeStep> edges;  // edge -> travel time, >= 1
    // Explicit crossing sets per intersection. An absent entry means the
    // all-crossing default (every pair of paths conflicts).
    std::map<IntersectionId, std::vector<CrossingSet>> crossing;

    bool has_edge(IntersectionId from, IntersectionId to) const {
        return edges.count(Edge{from, to}) > 0;
    }
    TimeStep edge_len(IntersectionId from, IntersectionId to) const;
    std::vector<Edge> in_edges(IntersectionId i) const;
    std::vector<Edge> out_edges(IntersectionId i) const;
};

struct Trip {
    CarId id = 0;
    std::vector<IntersectionId> route;  // at least origin + destination
    TimeStep depart = 0;
};

struct Scenario {
    RoadNetwork network;
    std::vector<Trip> trips;
    TimeStep horizon = 0;       // T: slots are {0, ..., T}
    TimeStep wait_bound = 0;    // T_UB
    int32_t edge_capacity = 1;  // K_UB
};

struct Violation {
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
};

ValidationReport validate_scenario(const Scenario& s);

// The intersection preceding i on the trip's route. Throws if i is the
// origin or not on the route.
IntersectionId predecessor(const Trip& trip, IntersectionId i);

// Crossing-set construction. AllCrossing yields a single set with every
// path through i, departure paths included. FourWay yields the conflict
// table of a standard 4-way intersection and requires exactly four
// incoming and four outgoing edges with matching neighbours.
std::vector<CrossingSet> default_crossing_sets(const RoadNetwork& net,
                                               IntersectionId i,
                                               CrossingMode mode);

// All paths through i derivable from the network's edges, departure paths
// included.
std::vector<Path> paths_at(const RoadNetwork& net, IntersectionId i);

// JSON interchange. load rejects malformed documents with position info;
// with strict=true it additionally runs validate_scenario and throws on
// any violation.
Scenario load_scenario(const std::string& text, bool strict = false);
std::string save_scenario(const Scenario& s);

}  // namespace cmmi
