#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmmi/game.hpp"
#include "cmmi/solver.hpp"

namespace cmmi {

struct Rational {
    int64_t num = 0;
    int64_t den = 1;

    static Rational make(int64_t num, int64_t den);
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    auto operator<=>(const Rational& o) const {
        return num * o.den <=> o.num * den;  // both reduced, positive den
    }
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
};

// Gini index of per-car delays; 0 when the total delay is 0. Throws on an
// infeasible allocation.
double gini(const GameInstance& g, const Allocation& a);

struct ExternalityResult {
    int64_t value = 0;  // D(a_ne) - D(a_ne without the car)
    bool base_feasible = false;
    bool reduced_feasible = false;
};

// Re-solves the scenario without car k under the same deterministic
// config and reports the equilibrium delay difference.
ExternalityResult externality(const Scenario& s, CarId k, const SolverConfig& cfg,
                              GameOptions opt = {});

struct PoaResult {
    Rational ratio;
    int64_t optimal_delay = 0;
    int64_t worst_nash_delay = 0;
    int64_t nash_count = 0;
    bool optimum_is_nash = false;  // flagged when the optimum is not in A_ne
};

// max over feasible Nash equilibria of (|J(a_ne)|+eps) / (|J(a_so)|+eps),
// with |J| the total delay (car agents).
PoaResult poa_ratio(const Scenario& s, AgentModel model, Rational eps,
                    int64_t budget = 50'000'000, GameOptions opt = {});

struct RunConfig {
    std::string label;
    AgentModel agent_model = AgentModel::Car;
    InitMode init = InitMode::Empty;
    std::string mode = "bru";  // bru | bru-best | dsa
    double p = 0.7;
    std::vector<int32_t> order;  // empty = by id
};

struct RunRecord {
    std::string scenario_id;
    std::string agents;
    std::string init;
    std::string mode;
    uint64_t seed = 0;
    bool feasible = false;
    int64_t delay = 0;
    std::optional<int64_t> optimal;       // absent when the oracle hit its budget
    std::optional<double> ratio;          // absent when excluded (D(a_so)=0) or infeasible
    std::optional<double> gini;           // absent when infeasible
    int64_t updates = 0;
    int64_t evals = 0;
    std::vector<int64_t> per_car_delay;
};

struct Aggregate {
    std::string label;
    int64_t runs = 0;
    int64_t feasible_runs = 0;
    int64_t ratio_runs = 0;  // feasible runs with D(a_so) > 0
    double mean_ratio = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
    double mean_gini = 0.0;
};

struct Report {
    std::vector<RunRecord> records;
    std::vector<Aggregate> aggregates;

    std::string to_csv() const;   // header + one row per record
    std::string to_json() const;  // same field names
};

// Runs every (scenario, config) pair, compares against the exact oracle
// and aggregates the delay-ratio statistics per config. Scenarios whose
// optimum is zero delay are excluded from ratio aggregates. Per-run
// failures are recorded, not thrown.
Report compare_experiment(const std::vector<std::pair<std::string, Scenario>>& scenarios,
                          const std::vector<RunConfig>& configs, uint64_t base_seed,
                          int64_t oracle_budget = 50'000'000, GameOptions opt = {},
                          int32_t jobs = 1);

}  // namespace cmmi
