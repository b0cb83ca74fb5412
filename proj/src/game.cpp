#include "cmmi/game.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace cmmi {

using nlohmann::json;

std::string to_string(AgentModel m) {
    switch (m) {
        case AgentModel::Atomic: return "atomic";
        case AgentModel::Car: return "car";
        case AgentModel::Intersection: return "intersection";
    }
    return "?";
}

AgentModel agent_model_from_string(const std::string& name) {
    if (name == "atomic") return AgentModel::Atomic;
    if (name == "car") return AgentModel::Car;
    if (name == "intersection") return AgentModel::Intersection;
    throw std::invalid_argument("unknown agent model \"" + name + "\"");
}

VarIndex::VarIndex(const Scenario& s) {
    std::vector<const Trip*> trips(s.trips.size());
    for (size_t n = 0; n < s.trips.size(); ++n) trips[n] = &s.trips[n];
    std::sort(trips.begin(), trips.end(),
              [](const Trip* a, const Trip* b) { return a->id < b->id; });

    for (const Trip* trip : trips) {
        trips_.emplace(trip->id, *trip);
        car_ids_.push_back(trip->id);
        const auto& r = trip->route;
        for (size_t l = 0; l + 1 < r.size(); ++l) {
            VarId v = static_cast<VarId>(vars_.size());
            vars_.push_back(VarKey{r[l], trip->id});
            lookup_[vars_.back()] = v;
            by_car_[trip->id].push_back(v);
            by_intersection_[r[l]].push_back(v);
            pred_.push_back(l == 0 ? -1 : v - 1);
            succ_.push_back(l + 2 < r.size() ? v + 1 : -1);
            len_in_.push_back(l == 0 ? 0 : s.network.edge_len(r[l - 1], r[l]));
            len_out_.push_back(s.network.edge_len(r[l], r[l + 1]));
            next_hop_.push_back(r[l + 1]);
            depart_.push_back(trip->depart);
        }
    }
}

VarId VarIndex::id(IntersectionId i, CarId k) const {
    auto it = lookup_.find(VarKey{i, k});
    if (it == lookup_.end()) {
        throw std::invalid_argument("(" + std::to_string(i) + "," + std::to_string(k) +
                                    ") is not an allocation variable");
    }
    return it->second;
}

const std::vector<VarId>& VarIndex::vars_of_car(CarId k) const {
    auto it = by_car_.find(k);
    return it == by_car_.end() ? empty_ : it->second;
}

const std::vector<VarId>& VarIndex::vars_at(IntersectionId i) const {
    auto it = by_intersection_.find(i);
    return it == by_intersection_.end() ? empty_ : it->second;
}

const Trip& VarIndex::trip_of(CarId k) const {
    auto it = trips_.find(k);
    if (it == trips_.end()) throw std::invalid_argument("unknown car " + std::to_string(k));
    return it->second;
}

bool Allocation::fully_allocated() const {
    for (TimeStep t : slots_) {
        if (t == kUnallocated) return false;
    }
    return true;
}

std::string Allocation::to_json() const {
    json slots = json::array();
    for (VarId v = 0; v < idx_->size(); ++v) {
        const VarKey& key = idx_->key(v);
        json slot = {{"i", key.i}, {"k", key.k}};
        if (slots_[v] == kUnallocated)
            slot["t"] = nullptr;
        else
            slot["t"] = slots_[v];
        slots.push_back(std::move(slot));
    }
    return json{{"slots", slots}}.dump(2) + "\n";
}

Allocation Allocation::from_json(const std::string& text, std::shared_ptr<const VarIndex> idx) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("allocation parse error: ") + e.what());
    }
    Allocation a(std::move(idx));
    for (const json& slot : j.at("slots")) {
        IntersectionId i = slot.at("i").get<IntersectionId>();
        CarId k = slot.at("k").get<CarId>();
        if (slot.at("t").is_null())
            a.set(i, k, kUnallocated);
        else
            a.set(i, k, slot.at("t").get<TimeStep>());
    }
    return a;
}

GameInstance::GameInstance(Scenario scenario, AgentModel model, GameOptions opt)
    : scenario_(std::move(scenario)), model_(model), options_(opt) {
    idx_ = std::make_shared<VarIndex>(scenario_);

    // Route edges and their traversals.
    for (VarId v = 0; v < idx_->size(); ++v) {
        Edge e{idx_->key(v).i, idx_->next_hop(v)};
        if (!edge_ids_.count(e)) {
            edge_ids_[e] = -1;  // assign ids in sorted order below
        }
    }
    for (auto& [e, id] : edge_ids_) {
        id = static_cast<EdgeId>(edge_keys_.size());
        edge_keys_.push_back(e);
    }
    edge_traversals_.resize(edge_keys_.size());
    for (VarId v = 0; v < idx_->size(); ++v) {
        Edge e{idx_->key(v).i, idx_->next_hop(v)};
        edge_traversals_[edge_ids_[e]].push_back({v, idx_->succ(v)});
    }

    // Path conflicts per intersection.
    auto path_of = [&](VarId v) {
        const VarKey& key = idx_->key(v);
        Path p;
        p.to = idx_->next_hop(v);
        if (idx_->is_origin(v)) {
            p.departure = true;
        } else {
            p.from = idx_->key(idx_->pred(v)).i;
        }
        return p;
    };
    for (IntersectionId i : scenario_.network.intersections) {
        const auto& vars = idx_->vars_at(i);
        if (vars.empty()) continue;
        auto cross_it = scenario_.network.crossing.find(i);
        const bool all_crossing = cross_it == scenario_.network.crossing.end();
        std::vector<std::vector<bool>> m(vars.size(), std::vector<bool>(vars.size(), false));
        for (size_t x = 0; x < vars.size(); ++x) {
            Path px = path_of(vars[x]);
            for (size_t y = x + 1; y < vars.size(); ++y) {
                Path py = path_of(vars[y]);
                bool conflict = false;
                if (all_crossing) {
                    conflict = true;
                } else {
                    // Special rule: a departure path crosses any path that
                    // exits onto the same edge.
                    if ((px.departure || py.departure) && px.to == py.to) conflict = true;
                    if (!conflict) {
                        for (const CrossingSet& set : cross_it->second) {
                            bool has_x = std::find(set.begin(), set.end(), px) != set.end();
                            bool has_y = std::find(set.begin(), set.end(), py) != set.end();
                            if (has_x && has_y) {
                                conflict = true;
                                break;
                            }
                        }
                    }
                }
                m[x][y] = m[y][x] = conflict;
            }
        }
        conflict_.emplace(i, std::move(m));
    }

    build_agents();
    build_constraints();
}

void GameInstance::build_agents() {
    agent_of_var_.assign(idx_->size(), -1);
    switch (model_) {
        case AgentModel::Atomic:
            for (VarId v = 0; v < idx_->size(); ++v) {
                agent_of_var_[v] = v;
                agent_vars_.push_back({v});
                agent_public_.push_back(idx_->key(v).k);
            }
            break;
        case AgentModel::Car:
            for (CarId k : idx_->car_ids()) {
                AgentId j = static_cast<AgentId>(agent_vars_.size());
                agent_vars_.push_back(idx_->vars_of_car(k));
                agent_public_.push_back(k);
                for (VarId v : agent_vars_.back()) agent_of_var_[v] = j;
            }
            break;
        case AgentModel::Intersection:
            for (IntersectionId i : scenario_.network.intersections) {
                const auto& vars = idx_->vars_at(i);
                if (vars.empty()) continue;
                AgentId j = static_cast<AgentId>(agent_vars_.size());
                agent_vars_.push_back(vars);
                agent_public_.push_back(i);
                for (VarId v : vars) agent_of_var_[v] = j;
            }
            break;
    }
}

std::string GameInstance::agent_label(AgentId j) const {
    switch (model_) {
        case AgentModel::Atomic: {
            VarId v = agent_vars_[j][0];
            return "atomic:" + std::to_string(idx_->key(v).i) + ":" + std::to_string(idx_->key(v).k);
        }
        case AgentModel::Car: return "car:" + std::to_string(agent_public_[j]);
        case AgentModel::Intersection: return "intersection:" + std::to_string(agent_public_[j]);
    }
    return "?";
}

void GameInstance::add_constraint(Constraint c) {
    std::sort(c.agents.begin(), c.agents.end());
    c.agents.erase(std::unique(c.agents.begin(), c.agents.end()), c.agents.end());
    int32_t cid = static_cast<int32_t>(constraints_.size());
    for (AgentId j : c.agents) by_agent_[j].push_back(cid);
    for (VarId v : c.scope) by_var_[v].push_back(cid);
    constraints_.push_back(std::move(c));
}

void GameInstance::build_constraints() {
    by_agent_.resize(agent_vars_.size());
    by_var_.resize(idx_->size());

    auto agents_of_vars = [&](const std::vector<VarId>& vars) {
        std::vector<AgentId> out;
        for (VarId v : vars) out.push_back(agent_of_var_[v]);
        return out;
    };

    if (model_ == AgentModel::Atomic || model_ == AgentModel::Car) {
        const bool atomic = model_ == AgentModel::Atomic;
        for (CarId k : idx_->car_ids()) {
            const auto& vars = idx_->vars_of_car(k);
            std::vector<VarId> non_origin(vars.begin() + 1, vars.end());
            AgentId car_agent = atomic ? -1 : agent_of_var_[vars[0]];
            if (atomic) {
                for (VarId v : vars) {
                    std::vector<AgentId> nbr = idx_->is_origin(v)
                                                   ? std::vector<AgentId>{agent_of_var_[v]}
                                                   : std::vector<AgentId>{agent_of_var_[idx_->pred(v)],
                                                                          agent_of_var_[v]};
                    add_constraint({ConstraintKind::Delay, {v}, nbr});
                    if (!idx_->is_origin(v)) {
                        add_constraint({ConstraintKind::WaitBound, {v}, nbr});
                        add_constraint({ConstraintKind::Forward, {v}, nbr});
                    }
                    add_constraint({ConstraintKind::Alloc, {v}, {agent_of_var_[v]}});
                }
                add_constraint({ConstraintKind::Departure, {vars.front()}, {agent_of_var_[vars.front()]}});
                add_constraint({ConstraintKind::Arrival, {vars.back()}, {agent_of_var_[vars.back()]}});
            } else {
                add_constraint({ConstraintKind::Delay, vars, {car_agent}});
                if (!non_origin.empty()) {
                    add_constraint({ConstraintKind::WaitBound, non_origin, {car_agent}});
                    add_constraint({ConstraintKind::Forward, non_origin, {car_agent}});
                }
                add_constraint({ConstraintKind::Alloc, vars, {car_agent}});
                add_constraint({ConstraintKind::Departure, {vars.front()}, {car_agent}});
                add_constraint({ConstraintKind::Arrival, {vars.back()}, {car_agent}});
            }
        }
        for (IntersectionId i : scenario_.network.intersections) {
            const auto& vars = idx_->vars_at(i);
            if (vars.empty()) continue;
            Constraint c{ConstraintKind::Collision, vars, agents_of_vars(vars)};
            c.intersection = i;
            add_constraint(std::move(c));
        }
        for (EdgeId e = 0; e < route_edge_count(); ++e) {
            std::vector<VarId> scope;
            for (const auto& [entry, exit] : edge_traversals_[e]) {
                scope.push_back(entry);
                if (exit >= 0) scope.push_back(exit);
            }
            std::vector<AgentId> nbr = agents_of_vars(scope);
            for (TimeStep t = 0; t <= scenario_.horizon; ++t) {
                Constraint c{ConstraintKind::EdgeCapacity, scope, nbr};
                c.edge = e;
                c.t = t;
                add_constraint(std::move(c));
            }
        }
        return;
    }

    // Intersection agents. Per-edge groups carry the quantities measured at
    // the edge's downstream endpoint (w_{j,k}, h_wb, h_fwd of variable
    // (j,k)); this keeps the neighbourhood at {i,j} and covers every
    // variable. Origin delay is attached to the car's first edge.
    auto agent_of_intersection = [&](IntersectionId i) -> AgentId {
        const auto& vars = idx_->vars_at(i);
        return vars.empty() ? -1 : agent_of_var_[vars[0]];
    };

    for (EdgeId e = 0; e < route_edge_count(); ++e) {
        const Edge& key = edge_keys_[e];
        std::vector<AgentId> nbr;
        if (AgentId ju = agent_of_intersection(key.from); ju >= 0) nbr.push_back(ju);
        if (AgentId jv = agent_of_intersection(key.to); jv >= 0) nbr.push_back(jv);

        std::vector<VarId> delay_scope, downstream;
        std::vector<VarId> lcap_scope;
        for (const auto& [entry, exit] : edge_traversals_[e]) {
            lcap_scope.push_back(entry);
            if (exit >= 0) {
                lcap_scope.push_back(exit);
                delay_scope.push_back(exit);
                downstream.push_back(exit);
            }
            if (idx_->is_origin(entry)) delay_scope.push_back(entry);
        }
        if (!delay_scope.empty()) {
            add_constraint({ConstraintKind::Delay, delay_scope, nbr});
        }
        if (!downstream.empty()) {
            add_constraint({ConstraintKind::WaitBound, downstream, nbr});
            add_constraint({ConstraintKind::Forward, downstream, nbr});
        }
        for (TimeStep t = 0; t <= scenario_.horizon; ++t) {
            Constraint c{ConstraintKind::EdgeCapacity, lcap_scope, nbr};
            c.edge = e;
            c.t = t;
            add_constraint(std::move(c));
        }
    }
    for (CarId k : idx_->car_ids()) {
        const auto& vars = idx_->vars_of_car(k);
        add_constraint({ConstraintKind::Departure, {vars.front()}, {agent_of_var_[vars.front()]}});
        add_constraint({ConstraintKind::Arrival, {vars.back()}, {agent_of_var_[vars.back()]}});
    }
    for (IntersectionId i : scenario_.network.intersections) {
        const auto& vars = idx_->vars_at(i);
        if (vars.empty()) continue;
        Constraint col{ConstraintKind::Collision, vars, {agent_of_intersection(i)}};
        col.intersection = i;
        add_constraint(std::move(col));

        // N_alloc^i spans every intersection on the routes of cars passing i.
        std::vector<AgentId> nbr;
        for (VarId v : vars) {
            for (VarId w : idx_->vars_of_car(idx_->key(v).k)) {
                nbr.push_back(agent_of_var_[w]);
            }
        }
        add_constraint({ConstraintKind::Alloc, vars, nbr});
    }
}

int32_t GameInstance::edge_occupancy(const Allocation& a, EdgeId e, TimeStep t) const {
    int32_t count = 0;
    for (const auto& [entry, exit] : edge_traversals_[e]) {
        TimeStep te = a.at(entry);
        if (te != kUnallocated && te <= t) ++count;
        if (exit >= 0) {
            TimeStep tx = a.at(exit);
            if (tx != kUnallocated && tx <= t) --count;
        } else if (options_.release_final_edge && te != kUnallocated &&
                   te + idx_->len_out(entry) <= t) {
            --count;
        }
    }
    return count;
}

int32_t GameInstance::edge_occupancy(const Allocation& a, Edge e, TimeStep t) const {
    auto it = edge_ids_.find(e);
    if (it == edge_ids_.end()) {
        if (!scenario_.network.edges.count(e)) {
            throw std::invalid_argument("no edge (" + std::to_string(e.from) + "," +
                                        std::to_string(e.to) + ")");
        }
        return 0;  // edge exists but no trip traverses it
    }
    return edge_occupancy(a, it->second, t);
}

bool GameInstance::paths_conflict(VarId x, VarId y) const {
    IntersectionId i = idx_->key(x).i;
    if (idx_->key(y).i != i) return false;
    const auto& vars = idx_->vars_at(i);
    auto px = std::find(vars.begin(), vars.end(), x) - vars.begin();
    auto py = std::find(vars.begin(), vars.end(), y) - vars.begin();
    return conflict_.at(i)[px][py];
}

int32_t GameInstance::collision_count(const Allocation& a, IntersectionId i) const {
    if (!scenario_.network.intersections.count(i)) {
        throw std::invalid_argument("unknown intersection " + std::to_string(i));
    }
    const auto& vars = idx_->vars_at(i);
    if (vars.empty()) return 0;
    const auto& m = conflict_.at(i);
    int32_t pairs = 0;
    for (size_t x = 0; x < vars.size(); ++x) {
        TimeStep tx = a.at(vars[x]);
        if (tx == kUnallocated) continue;
        for (size_t y = x + 1; y < vars.size(); ++y) {
            if (m[x][y] && a.at(vars[y]) == tx) ++pairs;
        }
    }
    return 2 * pairs;  // ordered pairs
}

int64_t waiting_time(const GameInstance& g, const Allocation& a, VarId v) {
    const VarIndex& idx = *g.var_index();
    TimeStep t = a.at(v);
    if (t == kUnallocated) return 0;
    if (idx.is_origin(v)) return t - idx.depart(v);
    TimeStep tp = a.at(idx.pred(v));
    if (tp == kUnallocated) return 0;
    return static_cast<int64_t>(t) - tp - idx.len_in(v);
}

int64_t waiting_time(const GameInstance& g, const Allocation& a, IntersectionId i, CarId k) {
    return waiting_time(g, a, g.var_index()->id(i, k));
}

int64_t total_delay(const GameInstance& g, const Allocation& a) {
    int64_t sum = 0;
    for (VarId v = 0; v < g.var_index()->size(); ++v) sum += waiting_time(g, a, v);
    return sum;
}

std::vector<int64_t> per_car_delay(const GameInstance& g, const Allocation& a) {
    const VarIndex& idx = *g.var_index();
    std::vector<int64_t> out;
    for (CarId k : idx.car_ids()) {
        int64_t d = 0;
        for (VarId v : idx.vars_of_car(k)) d += waiting_time(g, a, v);
        out.push_back(d);
    }
    return out;
}

CostVector GameInstance::constraint_cost(const Constraint& c, const Allocation& a) const {
    CostVector cost;
    switch (c.kind) {
        case ConstraintKind::Delay:
            for (VarId v : c.scope) cost.delay += waiting_time(*this, a, v);
            break;
        case ConstraintKind::WaitBound:
            for (VarId v : c.scope) {
                TimeStep t = a.at(v);
                TimeStep tp = a.at(idx_->pred(v));
                if (t == kUnallocated || tp == kUnallocated) continue;
                int64_t w = static_cast<int64_t>(t) - tp - idx_->len_in(v);
                if (w < 0 || w > scenario_.wait_bound) {
                    cost.p1 = 1;
                    break;
                }
            }
            break;
        case ConstraintKind::EdgeCapacity:
            if (edge_occupancy(a, c.edge, c.t) > scenario_.edge_capacity) cost.p1 = 1;
            break;
        case ConstraintKind::Departure: {
            TimeStep t = a.at(c.scope[0]);
            if (t != kUnallocated && t < idx_->depart(c.scope[0])) cost.p2 = 1;
            break;
        }
        case ConstraintKind::Arrival: {
            VarId v = c.scope[0];
            TimeStep t = a.at(v);
            if (t != kUnallocated && t + idx_->len_out(v) > scenario_.horizon) cost.p1 = 1;
            break;
        }
        case ConstraintKind::Collision:
            if (collision_count(a, c.intersection) > 0) cost.col = 1;
            break;
        case ConstraintKind::Forward:
            for (VarId v : c.scope) {
                if (a.at(v) != kUnallocated && a.at(idx_->pred(v)) == kUnallocated) {
                    cost.fwd = 1;
                    break;
                }
            }
            break;
        case ConstraintKind::Alloc:
            for (VarId v : c.scope) {
                if (a.at(v) == kUnallocated) {
                    cost.none = 1;
                    break;
                }
            }
            break;
    }
    return cost;
}

CostVector GameInstance::utility_cost(AgentId j, const Allocation& a) const {
    CostVector sum;
    for (int32_t cid : by_agent_[j]) sum += constraint_cost(constraints_[cid], a);
    return sum;
}

CostVector GameInstance::social_cost(const Allocation& a) const {
    CostVector sum;
    for (const Constraint& c : constraints_) {
        CostVector cost = constraint_cost(c, a);
        for (size_t n = 0; n < c.agents.size(); ++n) sum += cost;
    }
    return sum;
}

bool GameInstance::is_feasible(const Allocation& a) const {
    for (const Constraint& c : constraints_) {
        if (!constraint_cost(c, a).feasible()) return false;
    }
    return true;
}

std::string cost_to_json(const CostVector& c) {
    json j = {{"fwd", c.fwd}, {"col", c.col},   {"none", c.none},
              {"p2", c.p2},   {"p1", c.p1},     {"delay", c.delay}};
    return j.dump();
}

}  // namespace cmmi
