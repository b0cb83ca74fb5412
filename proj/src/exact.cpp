#include "cmmi/exact.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cmmi/solver.hpp"

namespace cmmi {

namespace {

// Shared depth-first enumeration over the variables in car-major order.
// Collision and wait-bound structure is enforced during the descent; edge
// occupancy is tracked incrementally as a lower bound that becomes exact
// on complete assignments (a car holds its edge at least for the edge's
// travel time, and indefinitely on its last edge under paper-literal
// semantics).
class DfsEnumerator {
  public:
    DfsEnumerator(const GameInstance& g, int64_t budget)
        : g_(g), idx_(*g.var_index()), s_(g.scenario()), budget_(budget), a_(g.empty_allocation()) {
        std::vector<CarId> cars = idx_.car_ids();
        std::sort(cars.begin(), cars.end(), [&](CarId x, CarId y) {
            const Trip& tx = idx_.trip_of(x);
            const Trip& ty = idx_.trip_of(y);
            return std::tie(tx.depart, tx.id) < std::tie(ty.depart, ty.id);
        });
        for (CarId k : cars) {
            for (VarId v : idx_.vars_of_car(k)) order_.push_back(v);
        }
        occ_.assign(g.route_edge_count(), std::vector<int32_t>(s_.horizon + 2, 0));
        for (VarId v = 0; v < idx_.size(); ++v) {
            Edge e{idx_.key(v).i, idx_.next_hop(v)};
            edge_of_.push_back(edge_id(e));
        }
    }

    int64_t nodes() const { return nodes_; }
    bool budget_exhausted() const { return exhausted_; }

    // Visits every feasible complete assignment whose per-variable slots
    // lie in the descent windows, in ascending slot order. `origin_window`
    // limits origin slots relative to T_k^o (negative = up to the horizon).
    // `delay_cap` prunes branches whose partial delay already reaches it
    // (use nullptr for no delay pruning).
    template <typename Leaf>
    void run(TimeStep origin_window, const int64_t* delay_cap, Leaf&& leaf) {
        exhausted_ = false;
        descend(0, origin_window, delay_cap, 0, leaf);
    }

  private:
    EdgeId edge_id(Edge e) {
        auto it = edge_lookup_.find(e);
        if (it != edge_lookup_.end()) return it->second;
        for (EdgeId id = 0; id < g_.route_edge_count(); ++id) {
            if (g_.edge_key(id) == e) {
                edge_lookup_[e] = id;
                return id;
            }
        }
        throw std::logic_error("route edge not indexed");
    }

    bool occupy(EdgeId e, TimeStep from, TimeStep to, int32_t delta) {
        // Marks [from, to) and reports whether capacity holds on it.
        bool ok = true;
        for (TimeStep t = std::max<TimeStep>(from, 0); t < to && t <= s_.horizon; ++t) {
            occ_[e][t] += delta;
            if (occ_[e][t] > s_.edge_capacity) ok = false;
        }
        return ok;
    }

    template <typename Leaf>
    bool descend(size_t n, TimeStep origin_window, const int64_t* delay_cap, int64_t partial_delay,
                 Leaf&& leaf) {
        if (exhausted_) return false;
        if (n == order_.size()) {
            return leaf(const_cast<const Allocation&>(a_), partial_delay);
        }
        VarId v = order_[n];
        TimeStep lo, hi;
        if (idx_.is_origin(v)) {
            lo = idx_.depart(v);
            hi = origin_window >= 0 ? std::min<TimeStep>(s_.horizon, lo + origin_window)
                                    : s_.horizon;
        } else {
            TimeStep tp = a_.at(idx_.pred(v));
            lo = tp + idx_.len_in(v);
            hi = std::min<TimeStep>(s_.horizon, lo + s_.wait_bound);
        }
        if (idx_.is_last(v)) hi = std::min<TimeStep>(hi, s_.horizon - idx_.len_out(v));

        const IntersectionId i = idx_.key(v).i;
        const EdgeId e_out = edge_of_[v];
        const EdgeId e_in = idx_.is_origin(v) ? -1 : edge_of_[idx_.pred(v)];

        for (TimeStep t = lo; t <= hi; ++t) {
            if (++nodes_ > budget_) {
                exhausted_ = true;
                return false;
            }
            int64_t w = idx_.is_origin(v) ? t - idx_.depart(v)
                                          : t - a_.at(idx_.pred(v)) - idx_.len_in(v);
            if (delay_cap && partial_delay + w >= *delay_cap) break;  // slots only grow

            bool collide = false;
            for (VarId other : idx_.vars_at(i)) {
                if (other == v || a_.at(other) != t) continue;
                if (g_.paths_conflict(v, other)) {
                    collide = true;
                    break;
                }
            }
            if (collide) continue;

            // Entry claims [t, t+len) of the outgoing edge, or everything
            // onward on a final edge without release; the entry also ends
            // the stay on the incoming edge beyond its minimum.
            TimeStep out_to;
            if (!idx_.is_last(v)) {
                out_to = t + idx_.len_out(v);
            } else if (g_.options().release_final_edge) {
                out_to = t + idx_.len_out(v);
            } else {
                out_to = s_.horizon + 1;
            }
            bool ok = occupy(e_out, t, out_to, +1);
            TimeStep in_from = 0, in_to = 0;
            if (e_in >= 0) {
                in_from = a_.at(idx_.pred(v)) + idx_.len_in(v);
                in_to = t;
                ok = occupy(e_in, in_from, in_to, +1) && ok;
            }
            if (ok) {
                a_.set(v, t);
                bool stop = descend(n + 1, origin_window, delay_cap, partial_delay + w, leaf);
                a_.set(v, kUnallocated);
                if (stop) {
                    occupy(e_out, t, out_to, -1);
                    if (e_in >= 0) occupy(e_in, in_from, in_to, -1);
                    return true;
                }
            }
            occupy(e_out, t, out_to, -1);
            if (e_in >= 0) occupy(e_in, in_from, in_to, -1);
            if (exhausted_) return false;
        }
        return false;
    }

    const GameInstance& g_;
    const VarIndex& idx_;
    const Scenario& s_;
    int64_t budget_;
    int64_t nodes_ = 0;
    bool exhausted_ = false;
    Allocation a_;
    std::vector<VarId> order_;
    std::vector<EdgeId> edge_of_;
    std::map<Edge, EdgeId> edge_lookup_;
    std::vector<std::vector<int32_t>> occ_;
};

}  // namespace

OptimalResult solve_optimal(const Scenario& s, int64_t node_budget, GameOptions opt) {
    GameInstance g(s, AgentModel::Car, opt);
    OptimalResult result;
    if (g.var_index()->size() == 0) {
        result.status = OptimalStatus::Optimal;
        result.allocation = g.empty_allocation();
        result.delay = 0;
        return result;
    }

    DfsEnumerator dfs(g, node_budget);
    int64_t best = INT64_MAX;
    std::optional<Allocation> best_alloc;
    dfs.run(-1, &best, [&](const Allocation& a, int64_t delay) {
        if (delay < best) {
            best = delay;
            best_alloc = a;
        }
        return best == 0;  // a zero-delay schedule cannot be improved
    });
    result.nodes = dfs.nodes();
    if (best_alloc) {
        result.allocation = std::move(best_alloc);
        result.delay = best;
        result.status = dfs.budget_exhausted() ? OptimalStatus::BudgetExceeded
                                               : OptimalStatus::Optimal;
    } else {
        result.status = dfs.budget_exhausted() ? OptimalStatus::BudgetExceeded
                                               : OptimalStatus::Infeasible;
    }
    return result;
}

std::vector<std::pair<Allocation, int64_t>> enumerate_nash(const Scenario& s, AgentModel model,
                                                           int64_t node_budget, GameOptions opt) {
    GameInstance g(s, model, opt);
    std::vector<std::pair<Allocation, int64_t>> out;
    if (g.var_index()->size() == 0) {
        out.push_back({g.empty_allocation(), 0});
        return out;
    }
    DfsEnumerator dfs(g, node_budget);
    dfs.run(s.wait_bound, nullptr, [&](const Allocation& a, int64_t delay) {
        if (g.is_feasible(a) && is_nash(g, a, NashSpace::FullEnumerated, node_budget)) {
            out.push_back({a, delay});
        }
        return false;
    });
    if (dfs.budget_exhausted()) {
        throw std::runtime_error("enumerate_nash: node budget exceeded");
    }
    return out;
}

namespace {

std::string var_name(TimeStep t, CarId k, Edge e) {
    std::ostringstream os;
    os << "y_" << t << "_" << k << "_" << e.from << "_" << e.to;
    return os.str();
}

// Effective crossing sets at i as car-term groups: declared sets (or the
// all-crossing default) plus the departure rule's same-exit groups,
// deduplicated. Each group lists (car, out-edge) pairs.
std::vector<std::vector<std::pair<CarId, Edge>>> collision_groups(const GameInstance& g,
                                                                  IntersectionId i) {
    const VarIndex& idx = *g.var_index();
    const auto& vars = idx.vars_at(i);
    std::vector<std::vector<std::pair<CarId, Edge>>> groups;
    std::vector<std::vector<VarId>> seen;
    auto add_group = [&](std::vector<VarId> members) {
        if (members.size() < 2) return;
        std::sort(members.begin(), members.end());
        if (std::find(seen.begin(), seen.end(), members) != seen.end()) return;
        seen.push_back(members);
        std::vector<std::pair<CarId, Edge>> terms;
        for (VarId v : members) {
            terms.push_back({idx.key(v).k, Edge{i, idx.next_hop(v)}});
        }
        groups.push_back(std::move(terms));
    };

    const auto& crossing = g.scenario().network.crossing;
    auto it = crossing.find(i);
    if (it == crossing.end()) {
        add_group(std::vector<VarId>(vars.begin(), vars.end()));
    } else {
        auto path_of = [&](VarId v) {
            Path p;
            p.to = idx.next_hop(v);
            if (idx.is_origin(v))
                p.departure = true;
            else
                p.from = idx.key(idx.pred(v)).i;
            return p;
        };
        for (const CrossingSet& set : it->second) {
            std::vector<VarId> members;
            for (VarId v : vars) {
                if (std::find(set.begin(), set.end(), path_of(v)) != set.end()) {
                    members.push_back(v);
                }
            }
            add_group(std::move(members));
        }
        // Departure rule: everything exiting onto one edge conflicts when a
        // departure is among it.
        std::map<IntersectionId, std::vector<VarId>> by_exit;
        for (VarId v : vars) by_exit[idx.next_hop(v)].push_back(v);
        for (const auto& [hop, members] : by_exit) {
            (void)hop;
            bool has_dep = false;
            for (VarId v : members) has_dep = has_dep || idx.is_origin(v);
            if (has_dep) add_group(members);
        }
    }
    return groups;
}

}  // namespace

std::string export_lp(const Scenario& s) {
    GameInstance g(s, AgentModel::Car);
    const VarIndex& idx = *g.var_index();
    const TimeStep T = s.horizon;

    std::ostringstream lp;
    lp << "Minimize\n obj:";

    // The per-edge wait terms telescope along each route: only the last
    // edge's slot (+t) and the first edge's slot (-t) survive, plus the
    // constant -sum of intermediate travel times, carried by a fixed
    // variable "one".
    int64_t constant = 0;
    bool any_term = false;
    for (CarId k : idx.car_ids()) {
        const auto& vars = idx.vars_of_car(k);
        VarId first = vars.front(), last = vars.back();
        if (first != last) {
            Edge e_last{idx.key(last).i, idx.next_hop(last)};
            Edge e_first{idx.key(first).i, idx.next_hop(first)};
            for (TimeStep t = 1; t <= T; ++t) {
                lp << " + " << t << " " << var_name(t, k, e_last);
                any_term = true;
            }
            for (TimeStep t = 1; t <= T; ++t) {
                lp << " - " << t << " " << var_name(t, k, e_first);
            }
            for (size_t n = 1; n < vars.size(); ++n) constant -= idx.len_in(vars[n]);
        }
    }
    lp << (constant >= 0 && any_term ? " + " : " ") << (constant >= 0 ? constant : constant)
       << " one\n";

    lp << "Subject To\n";
    // Wait bounds per non-first route edge (Eqs. 11-12): the wait expression
    // sum t*y(out) - sum t*y(in) has its travel-time constant on the RHS.
    for (CarId k : idx.car_ids()) {
        const auto& vars = idx.vars_of_car(k);
        for (size_t n = 1; n < vars.size(); ++n) {
            VarId v = vars[n], p = vars[n - 1];
            Edge e_out{idx.key(v).i, idx.next_hop(v)};
            Edge e_in{idx.key(p).i, idx.next_hop(p)};
            std::ostringstream expr;
            for (TimeStep t = 1; t <= T; ++t) expr << " + " << t << " " << var_name(t, k, e_out);
            for (TimeStep t = 1; t <= T; ++t) expr << " - " << t << " " << var_name(t, k, e_in);
            lp << " h_wb_lo_k" << k << "_e" << e_out.from << "_" << e_out.to << ":" << expr.str()
               << " >= " << idx.len_in(v) << "\n";
            lp << " h_wb_ub_k" << k << "_e" << e_out.from << "_" << e_out.to << ":" << expr.str()
               << " <= " << (s.wait_bound + idx.len_in(v)) << "\n";
        }
    }
    // Capacity (Eq. 13, literal per-slot entries).
    for (EdgeId e = 0; e < g.route_edge_count(); ++e) {
        const Edge& key = g.edge_key(e);
        std::vector<CarId> cars;
        for (CarId k : idx.car_ids()) {
            for (VarId v : idx.vars_of_car(k)) {
                if (idx.key(v).i == key.from && idx.next_hop(v) == key.to) cars.push_back(k);
            }
        }
        for (TimeStep t = 0; t <= T; ++t) {
            lp << " h_lcap_t" << t << "_e" << key.from << "_" << key.to << ":";
            for (CarId k : cars) lp << " + " << var_name(t, k, key);
            lp << " <= " << s.edge_capacity << "\n";
        }
    }
    // Departure fixing (Eq. 14) and arrival cutoff (Eq. 15).
    for (CarId k : idx.car_ids()) {
        const auto& vars = idx.vars_of_car(k);
        VarId first = vars.front(), last = vars.back();
        Edge e_first{idx.key(first).i, idx.next_hop(first)};
        lp << " h_dep_k" << k << ": " << var_name(idx.depart(first), k, e_first) << " = 1\n";
        Edge e_last{idx.key(last).i, idx.next_hop(last)};
        for (TimeStep t = T - idx.len_out(last) + 1; t <= T; ++t) {
            lp << " h_arr_k" << k << "_t" << t << ": " << var_name(t, k, e_last) << " = 0\n";
        }
    }
    // Collision rows per crossing set and slot (Eq. 16).
    for (IntersectionId i : s.network.intersections) {
        auto groups = collision_groups(g, i);
        for (size_t x = 0; x < groups.size(); ++x) {
            for (TimeStep t = 0; t <= T; ++t) {
                lp << " h_col_i" << i << "_x" << x << "_t" << t << ":";
                for (const auto& [k, e] : groups[x]) lp << " + " << var_name(t, k, e);
                lp << " <= 1\n";
            }
        }
    }
    // Exclusivity rows (Eqs. 17-19).
    for (CarId k : idx.car_ids()) {
        for (VarId v : idx.vars_of_car(k)) {
            Edge e{idx.key(v).i, idx.next_hop(v)};
            lp << " h_tex_k" << k << "_e" << e.from << "_" << e.to << ":";
            for (TimeStep t = 0; t <= T; ++t) lp << " + " << var_name(t, k, e);
            lp << " = 1\n";
        }
    }
    for (EdgeId e = 0; e < g.route_edge_count(); ++e) {
        const Edge& key = g.edge_key(e);
        std::vector<CarId> cars;
        for (CarId k : idx.car_ids()) {
            for (VarId v : idx.vars_of_car(k)) {
                if (idx.key(v).i == key.from && idx.next_hop(v) == key.to) cars.push_back(k);
            }
        }
        if (cars.size() < 2) continue;
        for (TimeStep t = 0; t <= T; ++t) {
            lp << " h_vex_t" << t << "_e" << key.from << "_" << key.to << ":";
            for (CarId k : cars) lp << " + " << var_name(t, k, key);
            lp << " <= 1\n";
        }
    }
    for (CarId k : idx.car_ids()) {
        const auto& vars = idx.vars_of_car(k);
        if (vars.size() < 2) continue;
        for (TimeStep t = 0; t <= T; ++t) {
            lp << " h_eex_t" << t << "_k" << k << ":";
            for (VarId v : vars) {
                lp << " + " << var_name(t, k, Edge{idx.key(v).i, idx.next_hop(v)});
            }
            lp << " <= 1\n";
        }
    }
    lp << "Bounds\n one = 1\n";
    lp << "Binary\n";
    for (CarId k : idx.car_ids()) {
        for (VarId v : idx.vars_of_car(k)) {
            Edge e{idx.key(v).i, idx.next_hop(v)};
            for (TimeStep t = 0; t <= T; ++t) lp << " " << var_name(t, k, e) << "\n";
        }
    }
    lp << "End\n";
    return lp.str();
}

MilpCheck check_solution_against_milp(const Scenario& s, const Allocation& a, GameOptions opt) {
    GameInstance g(s, AgentModel::Car, opt);
    const VarIndex& idx = *g.var_index();
    if (!a.fully_allocated()) {
        throw std::invalid_argument("check_solution_against_milp needs a fully allocated input");
    }
    MilpCheck check;
    auto row = [&](const std::string& name) { check.violated_rows.push_back(name); };

    for (CarId k : idx.car_ids()) {
        const auto& vars = idx.vars_of_car(k);
        for (size_t n = 1; n < vars.size(); ++n) {
            VarId v = vars[n];
            Edge e{idx.key(v).i, idx.next_hop(v)};
            int64_t w = waiting_time(g, a, v);
            std::string suffix = "k" + std::to_string(k) + "_e" + std::to_string(e.from) + "_" +
                                 std::to_string(e.to);
            if (w < 0) row("h_wb_lo_" + suffix);
            if (w > s.wait_bound) row("h_wb_ub_" + suffix);
        }
        VarId first = vars.front();
        if (a.at(first) < idx.depart(first)) row("h_dep_k" + std::to_string(k));
        VarId last = vars.back();
        if (a.at(last) + idx.len_out(last) > s.horizon) row("h_arr_k" + std::to_string(k));
    }
    for (EdgeId e = 0; e < g.route_edge_count(); ++e) {
        const Edge& key = g.edge_key(e);
        for (TimeStep t = 0; t <= s.horizon; ++t) {
            if (g.edge_occupancy(a, e, t) > s.edge_capacity) {
                row("h_lcap_t" + std::to_string(t) + "_e" + std::to_string(key.from) + "_" +
                    std::to_string(key.to));
            }
        }
    }
    for (IntersectionId i : s.network.intersections) {
        auto groups = collision_groups(g, i);
        for (size_t x = 0; x < groups.size(); ++x) {
            std::map<TimeStep, int> hits;
            for (const auto& [k, e] : groups[x]) {
                (void)e;
                for (VarId v : idx.vars_of_car(k)) {
                    if (idx.key(v).i == i) ++hits[a.at(v)];
                }
            }
            for (const auto& [t, n] : hits) {
                if (n > 1) {
                    row("h_col_i" + std::to_string(i) + "_x" + std::to_string(x) + "_t" +
                        std::to_string(t));
                }
            }
        }
    }
    for (EdgeId e = 0; e < g.route_edge_count(); ++e) {
        const Edge& key = g.edge_key(e);
        std::map<TimeStep, int> entries;
        for (CarId k : idx.car_ids()) {
            for (VarId v : idx.vars_of_car(k)) {
                if (idx.key(v).i == key.from && idx.next_hop(v) == key.to) ++entries[a.at(v)];
            }
        }
        for (const auto& [t, n] : entries) {
            if (n > 1) {
                row("h_vex_t" + std::to_string(t) + "_e" + std::to_string(key.from) + "_" +
                    std::to_string(key.to));
            }
        }
    }
    for (CarId k : idx.car_ids()) {
        std::map<TimeStep, int> at;
        for (VarId v : idx.vars_of_car(k)) ++at[a.at(v)];
        for (const auto& [t, n] : at) {
            if (n > 1) row("h_eex_t" + std::to_string(t) + "_k" + std::to_string(k));
        }
    }
    return check;
}

}  // namespace cmmi
