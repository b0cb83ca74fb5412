#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmmi/game.hpp"

namespace cmmi {

enum class OptimalStatus { Optimal, Infeasible, BudgetExceeded };

struct OptimalResult {
    OptimalStatus status = OptimalStatus::Infeasible;
    std::optional<Allocation> allocation;  // best found (incumbent on budget exhaustion)
    int64_t delay = -1;
    int64_t nodes = 0;
};

// Exact minimum-delay oracle: depth-first branch and bound, cars ordered
// by (departure, id) and variables in route order. Non-origin slots range
// over the h_wb window; origin slots range to the horizon and are cut by
// the incumbent bound, so late departures are covered exactly.
OptimalResult solve_optimal(const Scenario& s, int64_t node_budget = 50'000'000,
                            GameOptions opt = {});

// All feasible allocations within the h_wb windows that are Nash
// equilibria under full deviation enumeration for the given agent model.
// Throws std::runtime_error when the node budget is exhausted.
std::vector<std::pair<Allocation, int64_t>> enumerate_nash(const Scenario& s, AgentModel model,
                                                           int64_t node_budget = 50'000'000,
                                                           GameOptions opt = {});

// CPLEX-LP text of the time-indexed MILP (binaries y_t_k_i_j). The text
// starts with the "Minimize" section; callers add any file header.
std::string export_lp(const Scenario& s);

struct MilpCheck {
    std::vector<std::string> violated_rows;

    bool ok() const { return violated_rows.empty(); }
};

// Re-evaluates a fully allocated assignment against the MILP rows
// (wait-bound, capacity, departure, arrival, collision and exclusivity).
// The capacity row uses the cumulative cars-on-edge count and the
// departure row the lower-bound reading, matching the feasibility model
// they correspond to. Throws on partially allocated input.
MilpCheck check_solution_against_milp(const Scenario& s, const Allocation& a,
                                      GameOptions opt = {});

}  // namespace cmmi
