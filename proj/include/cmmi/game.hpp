#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cmmi/network.hpp"

namespace cmmi {

enum class AgentModel { Atomic, Car, Intersection };

std::string to_string(AgentModel m);
AgentModel agent_model_from_string(const std::string& name);

// Lexicographic penalty cost realizing P_fwd >> P_col >> P_none >> P_2 >>
// P_1 >> delay. Addition is componentwise, comparison left-to-right;
// smaller is better. A total cost is feasible iff the first five
// components are zero.
struct CostVector {
    int64_t fwd = 0;
    int64_t col = 0;
    int64_t none = 0;
    int64_t p2 = 0;
    int64_t p1 = 0;
    int64_t delay = 0;

    auto operator<=>(const CostVector&) const = default;

    CostVector& operator+=(const CostVector& o) {
        fwd += o.fwd;
        col += o.col;
        none += o.none;
        p2 += o.p2;
        p1 += o.p1;
        delay += o.delay;
        return *this;
    }
    CostVector operator+(const CostVector& o) const {
        CostVector r = *this;
        r += o;
        return r;
    }
    CostVector operator-(const CostVector& o) const {
        return {fwd - o.fwd, col - o.col, none - o.none, p2 - o.p2, p1 - o.p1, delay - o.delay};
    }
    bool feasible() const { return fwd == 0 && col == 0 && none == 0 && p2 == 0 && p1 == 0; }
};

using VarId = int32_t;
using AgentId = int32_t;
using EdgeId = int32_t;

struct VarKey {
    IntersectionId i = 0;
    CarId k = 0;

    auto operator<=>(const VarKey&) const = default;
};

// Dense index over the allocation variables IK = {(i,k) | i in r_k^-},
// ordered car-major in route order. Shared by Allocation and GameInstance.
class VarIndex {
  public:
    explicit VarIndex(const Scenario& s);

    int32_t size() const { return static_cast<int32_t>(vars_.size()); }
    const VarKey& key(VarId v) const { return vars_[v]; }
    VarId id(IntersectionId i, CarId k) const;  // throws if (i,k) not in IK
    bool contains(IntersectionId i, CarId k) const { return lookup_.count({i, k}) > 0; }

    const std::vector<VarId>& vars_of_car(CarId k) const;
    const std::vector<VarId>& vars_at(IntersectionId i) const;
    const std::vector<CarId>& car_ids() const { return car_ids_; }

    // Per-variable route structure.
    bool is_origin(VarId v) const { return pred_[v] < 0; }
    VarId pred(VarId v) const { return pred_[v]; }       // -1 for origins
    VarId succ(VarId v) const { return succ_[v]; }       // -1 when next hop is the destination
    TimeStep len_in(VarId v) const { return len_in_[v]; }
    TimeStep len_out(VarId v) const { return len_out_[v]; }
    IntersectionId next_hop(VarId v) const { return next_hop_[v]; }
    bool is_last(VarId v) const { return succ_[v] < 0; }
    TimeStep depart(VarId v) const { return depart_[v]; }
    const Trip& trip_of(CarId k) const;

  private:
    std::vector<VarKey> vars_;
    std::map<VarKey, VarId> lookup_;
    std::map<CarId, std::vector<VarId>> by_car_;
    std::map<IntersectionId, std::vector<VarId>> by_intersection_;
    std::map<CarId, Trip> trips_;
    std::vector<CarId> car_ids_;
    std::vector<VarId> pred_, succ_;
    std::vector<TimeStep> len_in_, len_out_, depart_;
    std::vector<IntersectionId> next_hop_;
    std::vector<VarId> empty_;
};

// Partial map from IK to a slot in {0..T} or kUnallocated. Value type;
// copies are cheap and independent.
class Allocation {
  public:
    Allocation() = default;
    explicit Allocation(std::shared_ptr<const VarIndex> idx)
        : idx_(std::move(idx)), slots_(idx_->size(), kUnallocated) {}

    const VarIndex& index() const { return *idx_; }
    std::shared_ptr<const VarIndex> index_ptr() const { return idx_; }

    TimeStep at(VarId v) const { return slots_[v]; }
    TimeStep at(IntersectionId i, CarId k) const { return slots_[idx_->id(i, k)]; }
    void set(VarId v, TimeStep t) { slots_[v] = t; }
    void set(IntersectionId i, CarId k, TimeStep t) { slots_[idx_->id(i, k)] = t; }
    bool fully_allocated() const;

    bool operator==(const Allocation& o) const { return slots_ == o.slots_; }

    std::string to_json() const;
    static Allocation from_json(const std::string& text, std::shared_ptr<const VarIndex> idx);

  private:
    std::shared_ptr<const VarIndex> idx_;
    std::vector<TimeStep> slots_;
};

enum class ConstraintKind { Delay, WaitBound, EdgeCapacity, Departure, Arrival, Collision, Forward, Alloc };

// One DCOP-game constraint: the variables its cost reads, the agents in
// its neighbourhood, and the payload needed by the evaluator. Indicator
// constraints contribute 0/1 in their component; delay constraints
// contribute their waiting-time sum.
struct Constraint {
    ConstraintKind kind;
    std::vector<VarId> scope;      // variables the evaluator reads
    std::vector<AgentId> agents;   // N_c, sorted unique
    EdgeId edge = -1;              // EdgeCapacity
    TimeStep t = -1;               // EdgeCapacity
    IntersectionId intersection = -1;  // Collision
};

struct GameOptions {
    // Paper-literal K_e^t never decrements on a route's final edge; with
    // release_final_edge a car leaves its last edge at entry + length.
    bool release_final_edge = false;
};

class GameInstance {
  public:
    GameInstance(Scenario scenario, AgentModel model, GameOptions opt = {});

    const Scenario& scenario() const { return scenario_; }
    AgentModel model() const { return model_; }
    const GameOptions& options() const { return options_; }
    const std::shared_ptr<const VarIndex>& var_index() const { return idx_; }

    Allocation empty_allocation() const { return Allocation(idx_); }

    // Agents. agent_label is a stable human-readable id used in traces;
    // agent_public_id is the car / intersection id (for atomic agents the
    // owning car id, used by order specifications).
    int32_t agent_count() const { return static_cast<int32_t>(agent_vars_.size()); }
    const std::vector<VarId>& owned_vars(AgentId j) const { return agent_vars_[j]; }
    std::string agent_label(AgentId j) const;
    int32_t agent_public_id(AgentId j) const { return agent_public_[j]; }

    const std::vector<Constraint>& constraints() const { return constraints_; }
    const std::vector<int32_t>& constraints_of(AgentId j) const { return by_agent_[j]; }
    const std::vector<int32_t>& constraints_with_var(VarId v) const { return by_var_[v]; }

    // Edges traversed by at least one trip, in deterministic order.
    int32_t route_edge_count() const { return static_cast<int32_t>(edge_keys_.size()); }
    const Edge& edge_key(EdgeId e) const { return edge_keys_[e]; }

    // Paper-literal or flag-adjusted cars-on-edge count K_e^t.
    int32_t edge_occupancy(const Allocation& a, EdgeId e, TimeStep t) const;
    int32_t edge_occupancy(const Allocation& a, Edge e, TimeStep t) const;

    // Ordered pairs of distinct allocated same-slot variables at i whose
    // paths conflict.
    int32_t collision_count(const Allocation& a, IntersectionId i) const;

    bool paths_conflict(VarId x, VarId y) const;

    CostVector constraint_cost(const Constraint& c, const Allocation& a) const;
    CostVector constraint_cost(int32_t cid, const Allocation& a) const {
        return constraint_cost(constraints_[cid], a);
    }

    // u_j as a cost (negated utility); lower cost = higher utility.
    CostVector utility_cost(AgentId j, const Allocation& a) const;
    // Sum of utility costs over all agents (-J(a) plus neighbourhood
    // multiplicities in the penalty components).
    CostVector social_cost(const Allocation& a) const;
    bool is_feasible(const Allocation& a) const;

  private:
    void build_agents();
    void build_constraints();
    void add_constraint(Constraint c);

    Scenario scenario_;
    AgentModel model_;
    GameOptions options_;
    std::shared_ptr<const VarIndex> idx_;

    std::vector<std::vector<VarId>> agent_vars_;
    std::vector<int32_t> agent_public_;
    std::vector<AgentId> agent_of_var_;

    std::vector<Edge> edge_keys_;
    std::map<Edge, EdgeId> edge_ids_;
    // Per route edge: (entry var, exit var or -1) per traversing car.
    std::vector<std::vector<std::pair<VarId, VarId>>> edge_traversals_;

    // Per intersection: conflict matrix over vars_at(i) (path-crossing).
    std::map<IntersectionId, std::vector<std::vector<bool>>> conflict_;

    std::vector<Constraint> constraints_;
    std::vector<std::vector<int32_t>> by_agent_;
    std::vector<std::vector<int32_t>> by_var_;
};

// Waiting time of car k at intersection i. Origins wait a - T_k^o; other
// variables wait a - (a_pred + L); any unallocated side gives 0. May be
// negative for out-of-order slots.
int64_t waiting_time(const GameInstance& g, const Allocation& a, IntersectionId i, CarId k);
int64_t waiting_time(const GameInstance& g, const Allocation& a, VarId v);

// D(a): total waiting time over all variables.
int64_t total_delay(const GameInstance& g, const Allocation& a);

// Per-car delay vector D_k(a), indexed like VarIndex::car_ids().
std::vector<int64_t> per_car_delay(const GameInstance& g, const Allocation& a);

std::string cost_to_json(const CostVector& c);

}  // namespace cmmi
