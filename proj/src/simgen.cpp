#include "cmmi/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace cmmi {

RoadNetwork grid_network(int32_t rows, int32_t cols, TimeStep edge_len, CrossingMode mode) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("grid needs rows, cols >= 1");
    if (edge_len < 1) throw std::invalid_argument("grid needs edge_len >= 1");
    RoadNetwork net;
    auto id = [cols](int32_t r, int32_t c) { return r * cols + c + 1; };
    for (int32_t r = 0; r < rows; ++r) {
        for (int32_t c = 0; c < cols; ++c) net.intersections.insert(id(r, c));
    }
    auto link = [&](IntersectionId a, IntersectionId b) {
        net.edges[Edge{a, b}] = edge_len;
        net.edges[Edge{b, a}] = edge_len;
    };
    for (int32_t r = 0; r < rows; ++r) {
        for (int32_t c = 0; c < cols; ++c) {
            if (c + 1 < cols) link(id(r, c), id(r, c + 1));
            if (r + 1 < rows) link(id(r, c), id(r + 1, c));
        }
    }
    if (mode == CrossingMode::FourWay) {
        for (IntersectionId i : net.intersections) {
            if (net.in_edges(i).size() == 4 && net.out_edges(i).size() == 4) {
                net.crossing[i] = default_crossing_sets(net, i, CrossingMode::FourWay);
            }
            // boundary nodes keep the all-crossing default
        }
    }
    return net;
}

namespace {

// Portable uniform double in [0,1) and Knuth Poisson sampling; the
// standard library's poisson_distribution is implementation-defined and
// would break golden files across toolchains.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int32_t poisson_draw(std::mt19937_64& rng, double lambda) {
    double limit = std::exp(-lambda);
    double p = 1.0;
    int32_t n = -1;
    do {
        p *= uniform01(rng);
        ++n;
    } while (p > limit);
    return n;
}

}  // namespace

std::vector<Trip> poisson_demand(const RoadNetwork& net, const DemandSpec& spec) {
    if (spec.target_cars < 1) throw std::invalid_argument("demand needs K >= 1");
    double total_rate = 0.0;
    for (const RouteDemand& rd : spec.routes) {
        if (rd.rate <= 0.0) throw std::invalid_argument("demand rates must be positive");
        for (size_t l = 0; l + 1 < rd.route.size(); ++l) {
            if (!net.has_edge(rd.route[l], rd.route[l + 1])) {
                throw std::invalid_argument("demand route uses missing edge (" +
                                            std::to_string(rd.route[l]) + "," +
                                            std::to_string(rd.route[l + 1]) + ")");
            }
        }
        total_rate += rd.rate;
    }
    if (spec.routes.empty()) throw std::invalid_argument("demand needs at least one route");
    constexpr double kMaxExpectedSteps = 100000.0;
    if (static_cast<double>(spec.target_cars) / total_rate > kMaxExpectedSteps) {
        throw std::invalid_argument("demand rates too low to reach K within the horizon");
    }

    std::mt19937_64 rng(spec.seed);
    std::vector<Trip> trips;
    CarId next_id = 1;
    for (TimeStep step = 0; static_cast<int32_t>(trips.size()) < spec.target_cars; ++step) {
        for (const RouteDemand& rd : spec.routes) {
            int32_t arrivals = poisson_draw(rng, rd.rate);
            for (int32_t n = 0; n < arrivals; ++n) {
                if (static_cast<int32_t>(trips.size()) >= spec.target_cars) break;
                trips.push_back(Trip{next_id++, rd.route, step});
            }
        }
    }
    return trips;
}

namespace {

Scenario with_uniform_edges(std::vector<IntersectionId> intersections,
                            std::vector<Edge> edges, TimeStep len) {
    Scenario s;
    s.network.intersections.insert(intersections.begin(), intersections.end());
    for (const Edge& e : edges) s.network.edges[e] = len;
    return s;
}

}  // namespace

Scenario fixture_fig2() { return fixture_fig2_extended(4); }

Scenario fixture_fig2_extended(int32_t n_cars) {
    if (n_cars < 4) throw std::invalid_argument("fig2_extended needs at least 4 cars");
    Scenario s = with_uniform_edges({1, 2, 3, 4, 5, 6, 7},
                                    {{6, 5}, {5, 4}, {7, 5}, {5, 2}, {2, 3}, {4, 1}, {1, 2}}, 5);
    s.trips.push_back(Trip{1, {6, 5, 4}, 0});
    s.trips.push_back(Trip{2, {7, 5, 2, 3}, 0});
    for (CarId k = 3; k <= n_cars; ++k) {
        s.trips.push_back(Trip{k, {4, 1, 2, 3}, k - 2});
    }
    s.horizon = n_cars + 20;
    s.wait_bound = 1;
    s.edge_capacity = n_cars;
    return s;
}

Scenario fixture_appendix_h() {
    // Two cars meeting head-on at intersection 2; car 2 keeps a variable
    // at intersection 3, so a move at 2 resets it downstream. Node 4 is
    // car 2's terminal.
    Scenario s = with_uniform_edges({1, 2, 3, 4}, {{1, 2}, {2, 3}, {3, 4}, {3, 2}, {2, 1}}, 5);
    s.trips.push_back(Trip{1, {3, 2, 1}, 0});
    s.trips.push_back(Trip{2, {1, 2, 3, 4}, 0});
    s.horizon = 30;
    s.wait_bound = 1;
    s.edge_capacity = 2;
    return s;
}

Scenario fixture_jsp_small() {
    // Two unit-time jobs over machines {1, 2} in the same order; unit edge
    // lengths stand in for the reduction's zero-length hops.
    Scenario s = with_uniform_edges({1, 2, 3}, {{1, 2}, {2, 3}}, 1);
    s.trips.push_back(Trip{1, {1, 2, 3}, 0});
    s.trips.push_back(Trip{2, {1, 2, 3}, 0});
    s.horizon = 12;
    s.wait_bound = 10;
    s.edge_capacity = 2;
    return s;
}

Scenario fixture(const std::string& name) {
    if (name == "fig2") return fixture_fig2();
    if (name == "appendixH") return fixture_appendix_h();
    if (name == "jsp_small") return fixture_jsp_small();
    const std::string ext_prefix = "fig2_extended:";
    if (name.rfind(ext_prefix, 0) == 0) {
        int32_t n = 0;
        try {
            n = static_cast<int32_t>(std::stol(name.substr(ext_prefix.size())));
        } catch (const std::exception&) {
            throw std::invalid_argument("bad fixture name \"" + name + "\"");
        }
        return fixture_fig2_extended(n);
    }
    throw std::invalid_argument("unknown fixture \"" + name + "\"");
}

}  // namespace cmmi
