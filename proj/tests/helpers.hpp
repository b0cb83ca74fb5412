#pragma once

#include <random>
#include <vector>

#include "cmmi/game.hpp"
#include "cmmi/simgen.hpp"

namespace cmmi::testing {

// fig2 allocations reconstructed from the counterexample narrative: the
// optimum has car 1 braking once at intersection 5; the bad equilibrium
// has car 2 braking there and the brake cascading to cars 3 and 4.
inline Allocation fig2_optimum(const GameInstance& g) {
    Allocation a = g.empty_allocation();
    a.set(6, 1, 0);
    a.set(5, 1, 6);
    a.set(7, 2, 0);
    a.set(5, 2, 5);
    a.set(2, 2, 10);
    a.set(4, 3, 1);
    a.set(1, 3, 6);
    a.set(2, 3, 11);
    a.set(4, 4, 2);
    a.set(1, 4, 7);
    a.set(2, 4, 12);
    return a;
}

inline Allocation fig2_bad_nash(const GameInstance& g) {
    Allocation a = g.empty_allocation();
    a.set(6, 1, 0);
    a.set(5, 1, 5);
    a.set(7, 2, 0);
    a.set(5, 2, 6);
    a.set(2, 2, 11);
    a.set(4, 3, 1);
    a.set(1, 3, 6);
    a.set(2, 3, 12);
    a.set(4, 4, 2);
    a.set(1, 4, 7);
    a.set(2, 4, 13);
    return a;
}

// Small random scenario on a grid with straight-line routes. With
// bind_bounds=false the wait bound, capacity and horizon are set so they
// can never bind (the Lemma 3 regime).
inline Scenario random_scenario(std::mt19937_64& rng, int32_t max_cars = 4,
                                bool bind_bounds = true) {
    int32_t rows = 2 + static_cast<int32_t>(rng() % 2);
    int32_t cols = 2 + static_cast<int32_t>(rng() % 2);
    TimeStep len = 1 + static_cast<TimeStep>(rng() % 3);
    Scenario s;
    s.network = grid_network(rows, cols, len, CrossingMode::AllCrossing);

    auto id = [cols](int32_t r, int32_t c) { return r * cols + c + 1; };
    std::vector<std::vector<IntersectionId>> routes;
    for (int32_t r = 0; r < rows; ++r) {
        std::vector<IntersectionId> fwd;
        for (int32_t c = 0; c < cols; ++c) fwd.push_back(id(r, c));
        routes.push_back(fwd);
        routes.push_back({fwd.rbegin(), fwd.rend()});
    }
    for (int32_t c = 0; c < cols; ++c) {
        std::vector<IntersectionId> down;
        for (int32_t r = 0; r < rows; ++r) down.push_back(id(r, c));
        routes.push_back(down);
        routes.push_back({down.rbegin(), down.rend()});
    }

    int32_t cars = 1 + static_cast<int32_t>(rng() % max_cars);
    int32_t max_hops = 0;
    TimeStep latest_zero_wait = 0;
    for (CarId k = 1; k <= cars; ++k) {
        const auto& route = routes[rng() % routes.size()];
        TimeStep depart = static_cast<TimeStep>(rng() % 4);
        s.trips.push_back(Trip{k, route, depart});
        max_hops = std::max(max_hops, static_cast<int32_t>(route.size()) - 1);
        latest_zero_wait = std::max<TimeStep>(
            latest_zero_wait, depart + static_cast<TimeStep>(route.size() - 1) * len);
    }
    if (bind_bounds) {
        s.wait_bound = static_cast<TimeStep>(rng() % 4);
        s.edge_capacity = 1 + static_cast<int32_t>(rng() % cars);
        s.horizon = latest_zero_wait + s.wait_bound * max_hops + 4;
    } else {
        s.horizon = latest_zero_wait + cars * max_hops + 6;
        s.wait_bound = s.horizon;
        s.edge_capacity = cars;
    }
    return s;
}

// Random (possibly partial, possibly infeasible) allocation.
inline Allocation random_allocation(std::mt19937_64& rng, const GameInstance& g,
                                    bool allow_unallocated = true) {
    Allocation a = g.empty_allocation();
    for (VarId v = 0; v < g.var_index()->size(); ++v) {
        if (allow_unallocated && rng() % 4 == 0) continue;
        a.set(v, static_cast<TimeStep>(rng() % (g.scenario().horizon + 1)));
    }
    return a;
}

}  // namespace cmmi::testing
