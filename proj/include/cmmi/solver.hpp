#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmmi/game.hpp"

namespace cmmi {

enum class InitMode { Empty, Pba, Given };

struct DsaConfig {
    double p = 0.7;           // commit probability, in (0,1]
    int32_t max_rounds = 0;   // 0 = same default as max_iterations
    uint64_t seed = 0;
};

struct SolverConfig {
    AgentModel agent_model = AgentModel::Car;
    InitMode init = InitMode::Empty;
    std::optional<Allocation> given;   // when init == Given
    bool best_update = false;          // Alg. 1's bestU
    std::optional<DsaConfig> dsa;
    std::vector<int32_t> agent_order;  // public ids; empty = by id
    int64_t max_iterations = 0;        // 0 = 10 * T * I * K
};

enum class Termination { NashReached, IterationCap };

struct UpdateChange {
    VarKey var;
    TimeStep old_slot = kUnallocated;
    TimeStep new_slot = kUnallocated;
};

struct UpdateRecord {
    int64_t sweep = 0;
    AgentId agent = -1;
    std::string agent_label;
    std::vector<UpdateChange> changes;
    CostVector cost_before;
    CostVector cost_after;
};

struct SolveTrace {
    std::vector<UpdateRecord> updates;
    std::vector<int32_t> update_counts;  // committed updates per agent
    int64_t sweeps = 0;
    int64_t candidate_evals = 0;  // slot probes during restricted scans
    Termination termination = Termination::NashReached;

    std::string to_jsonl() const;
};

// Downstream reset after agent j moves from a_old to a_new (which may
// differ only on j's variables; anything else throws). Returns a_new with
// the affected cars' later slots cleared.
Allocation down_reset(const GameInstance& g, AgentId j, const Allocation& a_old,
                      const Allocation& a_new);

// Restricted action space: rebuild j's variables greedily at the earliest
// slots satisfying every constraint on the touched variable except delay
// and alloc. If some variable with an allocated upstream admits no slot at
// all, the agent keeps its current action (car/atomic: whole candidate;
// intersection: that car). A car whose upstream slot is unallocated stays
// unallocated (intersection agents).
Allocation fastest_feasible(const GameInstance& g, AgentId j, const Allocation& a,
                            int64_t* candidate_evals = nullptr);

// Personal Best Actions: every car's zero-wait schedule, independent of
// all others.
Allocation pba_init(const GameInstance& g);

std::pair<Allocation, SolveTrace> brudr(const GameInstance& g, const SolverConfig& cfg);
std::pair<Allocation, SolveTrace> dsa(const GameInstance& g, const SolverConfig& cfg);

enum class NashSpace { Restricted, FullEnumerated };

// Pure-NE check. Restricted probes each agent's fastest_feasible+reset
// candidate; FullEnumerated scans unilateral deviations exhaustively
// (domains is pruned only by exact dominance arguments) and throws when
// the evaluation budget is exhausted.
bool is_nash(const GameInstance& g, const Allocation& a, NashSpace space,
             int64_t budget = 50'000'000);

std::vector<AgentId> resolve_agent_order(const GameInstance& g,
                                         const std::vector<int32_t>& public_order);

}  // namespace cmmi
