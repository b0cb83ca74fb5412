#include "cmmi/solver.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace cmmi {

using nlohmann::json;

namespace {

std::vector<VarId> downstream_vars(const VarIndex& idx, VarId v) {
    std::vector<VarId> out;
    for (VarId w = idx.succ(v); w >= 0; w = idx.succ(w)) out.push_back(w);
    return out;
}

// Earliest slot for v on `work` (v unallocated there) satisfying every
// non-delay, non-alloc constraint touching v: the h_wb window, departure
// and arrival bounds, collisions at v's intersection and capacity of the
// edge v enters. Returns nullopt when no slot <= T qualifies.
std::optional<TimeStep> scan_earliest(const GameInstance& g, const Allocation& work, VarId v,
                                      int64_t* evals) {
    const VarIndex& idx = *g.var_index();
    const Scenario& s = g.scenario();

    TimeStep t_lo, t_hi = s.horizon;
    if (idx.is_origin(v)) {
        t_lo = idx.depart(v);
    } else {
        TimeStep tp = work.at(idx.pred(v));
        if (tp == kUnallocated) return std::nullopt;
        t_lo = tp + idx.len_in(v);
        t_hi = std::min(t_hi, t_lo + s.wait_bound);
    }
    if (idx.is_last(v)) t_hi = std::min(t_hi, s.horizon - idx.len_out(v));
    if (VarId sv = idx.succ(v); sv >= 0 && work.at(sv) != kUnallocated) {
        // Keep the successor's wait within bounds when it stays allocated.
        TimeStep ts = work.at(sv);
        t_lo = std::max(t_lo, ts - idx.len_out(v) - s.wait_bound);
        t_hi = std::min(t_hi, ts - idx.len_out(v));
    }
    if (t_lo > t_hi) return std::nullopt;

    const IntersectionId i = idx.key(v).i;
    std::set<TimeStep> blocked;
    for (VarId other : idx.vars_at(i)) {
        if (other == v) continue;
        TimeStep t = work.at(other);
        if (t != kUnallocated && g.paths_conflict(v, other)) blocked.insert(t);
    }

    // Occupancy of the edge v enters, without v; suffix max covers the
    // paper-literal "never leaves while the next slot is unset" window.
    Edge e_out{i, idx.next_hop(v)};
    std::vector<int32_t> occ(s.horizon + 1, 0);
    for (TimeStep t = 0; t <= s.horizon; ++t) occ[t] = g.edge_occupancy(work, e_out, t);
    std::vector<int32_t> suffix_max(s.horizon + 2, 0);
    suffix_max[s.horizon + 1] = INT32_MIN;
    for (TimeStep t = s.horizon; t >= 0; --t) suffix_max[t] = std::max(suffix_max[t + 1], occ[t]);

    const bool releases = g.options().release_final_edge && idx.is_last(v);
    for (TimeStep t = t_lo; t <= t_hi; ++t) {
        if (evals) ++(*evals);
        if (blocked.count(t)) continue;
        bool cap_ok;
        TimeStep exit = kUnallocated;
        if (VarId sv = idx.succ(v); sv >= 0) exit = work.at(sv);
        if (exit == kUnallocated && releases) exit = t + idx.len_out(v);
        if (exit == kUnallocated) {
            cap_ok = suffix_max[t] + 1 <= s.edge_capacity;
        } else {
            cap_ok = true;
            for (TimeStep u = t; u < exit && u <= s.horizon; ++u) {
                if (occ[u] + 1 > s.edge_capacity) {
                    cap_ok = false;
                    break;
                }
            }
        }
        if (cap_ok) return t;
    }
    return std::nullopt;
}

}  // namespace

Allocation down_reset(const GameInstance& g, AgentId j, const Allocation& a_old,
                      const Allocation& a_new) {
    const VarIndex& idx = *g.var_index();
    const auto& owned = g.owned_vars(j);
    for (VarId v = 0; v < idx.size(); ++v) {
        if (a_new.at(v) != a_old.at(v) &&
            std::find(owned.begin(), owned.end(), v) == owned.end()) {
            throw std::invalid_argument("down_reset: candidate changes variable (" +
                                        std::to_string(idx.key(v).i) + "," +
                                        std::to_string(idx.key(v).k) + ") outside agent " +
                                        g.agent_label(j));
        }
    }

    Allocation out = a_new;
    switch (g.model()) {
        case AgentModel::Atomic: {
            for (VarId w : downstream_vars(idx, owned[0])) out.set(w, kUnallocated);
            break;
        }
        case AgentModel::Car: {
            bool down = false;
            for (VarId v : owned) {
                if (down) out.set(v, kUnallocated);
                if (a_old.at(v) != a_new.at(v)) down = true;
            }
            break;
        }
        case AgentModel::Intersection: {
            for (VarId v : owned) {
                if (a_old.at(v) == a_new.at(v)) continue;
                for (VarId w : downstream_vars(idx, v)) out.set(w, kUnallocated);
            }
            break;
        }
    }
    return out;
}

Allocation pba_init(const GameInstance& g) {
    const VarIndex& idx = *g.var_index();
    Allocation a = g.empty_allocation();
    for (CarId k : idx.car_ids()) {
        TimeStep t = 0;
        for (VarId v : idx.vars_of_car(k)) {
            t = idx.is_origin(v) ? idx.depart(v) : t + idx.len_in(v);
            a.set(v, t);
        }
    }
    return a;
}

Allocation fastest_feasible(const GameInstance& g, AgentId j, const Allocation& a,
                            int64_t* candidate_evals) {
    const VarIndex& idx = *g.var_index();
    const auto& owned = g.owned_vars(j);

    switch (g.model()) {
        case AgentModel::Car: {
            Allocation work = a;
            for (VarId v : owned) work.set(v, kUnallocated);
            for (VarId v : owned) {
                auto t = scan_earliest(g, work, v, candidate_evals);
                if (!t) return a;  // cannot complete; keep the current action
                work.set(v, *t);
            }
            return work;
        }
        case AgentModel::Atomic: {
            VarId v = owned[0];
            Allocation work = a;
            work.set(v, kUnallocated);
            for (VarId w : downstream_vars(idx, v)) work.set(w, kUnallocated);
            auto t = scan_earliest(g, work, v, candidate_evals);
            if (!t) return a;
            Allocation out = a;
            out.set(v, *t);
            return out;
        }
        case AgentModel::Intersection: {
            Allocation work = a;
            for (VarId v : owned) {
                std::vector<VarId> down = downstream_vars(idx, v);
                std::vector<TimeStep> saved;
                for (VarId w : down) {
                    saved.push_back(work.at(w));
                    work.set(w, kUnallocated);
                }
                work.set(v, kUnallocated);
                auto restore = [&] {
                    for (size_t n = 0; n < down.size(); ++n) work.set(down[n], saved[n]);
                };
                if (!idx.is_origin(v) && work.at(idx.pred(v)) == kUnallocated) {
                    // Upstream unset: the car stays unallocated here.
                    if (a.at(v) == kUnallocated) restore();
                    continue;
                }
                auto t = scan_earliest(g, work, v, candidate_evals);
                if (!t) {
                    work.set(v, a.at(v));  // cannot place this car; keep it as is
                    restore();
                    continue;
                }
                work.set(v, *t);
                if (*t == a.at(v)) restore();
            }
            Allocation out = a;
            for (VarId v : owned) out.set(v, work.at(v));
            return out;
        }
    }
    return a;
}

std::vector<AgentId> resolve_agent_order(const GameInstance& g,
                                         const std::vector<int32_t>& public_order) {
    std::vector<AgentId> order;
    std::vector<bool> taken(g.agent_count(), false);
    for (int32_t pid : public_order) {
        for (AgentId j = 0; j < g.agent_count(); ++j) {
            if (!taken[j] && g.agent_public_id(j) == pid) {
                order.push_back(j);
                taken[j] = true;
            }
        }
    }
    for (AgentId j = 0; j < g.agent_count(); ++j) {
        if (!taken[j]) order.push_back(j);
    }
    return order;
}

namespace {

Allocation initial_allocation(const GameInstance& g, const SolverConfig& cfg) {
    switch (cfg.init) {
        case InitMode::Empty: return g.empty_allocation();
        case InitMode::Pba: return pba_init(g);
        case InitMode::Given:
            if (!cfg.given) throw std::invalid_argument("init=Given needs an allocation");
            return *cfg.given;
    }
    return g.empty_allocation();
}

int64_t default_iteration_cap(const GameInstance& g) {
    int64_t T = g.scenario().horizon;
    int64_t I = static_cast<int64_t>(g.scenario().network.intersections.size());
    int64_t K = static_cast<int64_t>(g.scenario().trips.size());
    return std::max<int64_t>(10 * T * std::max<int64_t>(I, 1) * std::max<int64_t>(K, 1), 16);
}

bool candidate_differs(const GameInstance& g, AgentId j, const Allocation& a,
                       const Allocation& cand) {
    for (VarId v : g.owned_vars(j)) {
        if (a.at(v) != cand.at(v)) return true;
    }
    return false;
}

UpdateRecord make_record(const GameInstance& g, int64_t sweep, AgentId j, const Allocation& before,
                         const Allocation& after, const CostVector& cost_before,
                         const CostVector& cost_after) {
    UpdateRecord rec;
    rec.sweep = sweep;
    rec.agent = j;
    rec.agent_label = g.agent_label(j);
    rec.cost_before = cost_before;
    rec.cost_after = cost_after;
    const VarIndex& idx = *g.var_index();
    for (VarId v = 0; v < idx.size(); ++v) {
        if (before.at(v) != after.at(v)) {
            rec.changes.push_back({idx.key(v), before.at(v), after.at(v)});
        }
    }
    return rec;
}

}  // namespace

std::pair<Allocation, SolveTrace> brudr(const GameInstance& g, const SolverConfig& cfg) {
    if (cfg.dsa) throw std::invalid_argument("brudr called with a DSA config; use dsa()");
    Allocation a = initial_allocation(g, cfg);
    SolveTrace trace;
    trace.update_counts.assign(g.agent_count(), 0);
    const std::vector<AgentId> order = resolve_agent_order(g, cfg.agent_order);
    const int64_t cap = cfg.max_iterations > 0 ? cfg.max_iterations : default_iteration_cap(g);

    for (int64_t sweep = 1;; ++sweep) {
        bool improved = false;
        CostVector best_delta;
        std::optional<std::pair<AgentId, Allocation>> best;

        for (AgentId j : order) {
            Allocation cand = fastest_feasible(g, j, a, &trace.candidate_evals);
            if (!candidate_differs(g, j, a, cand)) continue;
            Allocation next = down_reset(g, j, a, cand);
            CostVector before = g.utility_cost(j, a);
            CostVector after = g.utility_cost(j, next);
            if (!(after < before)) continue;
            if (!cfg.best_update) {
                trace.updates.push_back(make_record(g, sweep, j, a, next, before, after));
                ++trace.update_counts[j];
                a = std::move(next);
                improved = true;
            } else {
                CostVector delta = before - after;
                if (!best || best_delta < delta) {
                    best_delta = delta;
                    best = {j, std::move(next)};
                }
            }
        }
        if (cfg.best_update && best) {
            auto& [j, next] = *best;
            trace.updates.push_back(make_record(g, sweep, j, a, next, g.utility_cost(j, a),
                                                g.utility_cost(j, next)));
            ++trace.update_counts[j];
            a = std::move(next);
            improved = true;
        }
        trace.sweeps = sweep;
        if (!improved) {
            trace.termination = Termination::NashReached;
            break;
        }
        if (sweep >= cap) {
            trace.termination = Termination::IterationCap;
            break;
        }
    }
    return {a, trace};
}

std::pair<Allocation, SolveTrace> dsa(const GameInstance& g, const SolverConfig& cfg) {
    if (!cfg.dsa) throw std::invalid_argument("dsa needs cfg.dsa");
    const DsaConfig& dc = *cfg.dsa;
    if (!(dc.p > 0.0 && dc.p <= 1.0)) throw std::invalid_argument("dsa p must be in (0,1]");

    Allocation a = initial_allocation(g, cfg);
    SolveTrace trace;
    trace.update_counts.assign(g.agent_count(), 0);
    std::mt19937_64 rng(dc.seed);
    auto coin = [&rng] { return (rng() >> 11) * 0x1.0p-53; };
    const int64_t cap = dc.max_rounds > 0 ? dc.max_rounds : default_iteration_cap(g);

    for (int64_t round = 1;; ++round) {
        const Allocation snapshot = a;
        bool any_improving = false;
        std::vector<std::pair<AgentId, Allocation>> queued;
        for (AgentId j = 0; j < g.agent_count(); ++j) {
            const bool lucky = coin() < dc.p;
            Allocation cand = fastest_feasible(g, j, snapshot, &trace.candidate_evals);
            if (!candidate_differs(g, j, snapshot, cand)) continue;
            Allocation next = down_reset(g, j, snapshot, cand);
            if (!(g.utility_cost(j, next) < g.utility_cost(j, snapshot))) continue;
            any_improving = true;
            if (lucky) queued.push_back({j, std::move(cand)});
        }
        trace.sweeps = round;
        if (!any_improving) {
            trace.termination = Termination::NashReached;
            break;
        }
        // Serialize the round's commits by agent id; a commit is dropped if
        // an earlier one in the round already removed its improvement.
        for (auto& [j, cand] : queued) {
            Allocation moved = a;
            for (VarId v : g.owned_vars(j)) moved.set(v, cand.at(v));
            if (!candidate_differs(g, j, a, moved)) continue;
            Allocation next = down_reset(g, j, a, moved);
            CostVector before = g.utility_cost(j, a);
            CostVector after = g.utility_cost(j, next);
            if (!(after < before)) continue;
            trace.updates.push_back(make_record(g, round, j, a, next, before, after));
            ++trace.update_counts[j];
            a = std::move(next);
        }
        if (round >= cap) {
            trace.termination = Termination::IterationCap;
            break;
        }
    }
    return {a, trace};
}

namespace {

// Exhaustive unilateral-deviation check for one agent. When the agent's
// current utility carries no penalty, only penalty-free deviations can
// improve, which restricts each variable to its wait-bound window and
// bounds the deviation's delay by the current one.
bool has_improving_deviation(const GameInstance& g, const Allocation& a, AgentId j,
                             int64_t budget, int64_t* used) {
    const VarIndex& idx = *g.var_index();
    const Scenario& s = g.scenario();
    const auto& owned = g.owned_vars(j);
    const CostVector current = g.utility_cost(j, a);
    const bool pruned = current.feasible();

    Allocation work = a;
    int64_t partial_delay = 0;

    // Recurse over owned variables; domains per variable:
    //  - pruned mode: the h_wb window around the (possibly deviating)
    //    predecessor slot, origins capped by the remaining delay budget;
    //  - full mode: {unallocated} plus every slot in {0..T}.
    auto rec = [&](auto&& self, size_t n) -> bool {
        if (*used > budget) {
            throw std::runtime_error("is_nash(FullEnumerated): deviation budget exceeded");
        }
        if (n == owned.size()) {
            ++(*used);
            return g.utility_cost(j, work) < current;
        }
        VarId v = owned[n];
        const TimeStep saved = work.at(v);
        std::vector<TimeStep> domain;
        if (pruned) {
            if (partial_delay >= current.delay && current.delay >= 0) return false;
            TimeStep lo, hi;
            if (idx.is_origin(v)) {
                lo = idx.depart(v);
                hi = std::min<TimeStep>(s.horizon,
                                        lo + static_cast<TimeStep>(current.delay - partial_delay));
            } else {
                TimeStep tp = work.at(idx.pred(v));
                if (tp == kUnallocated) return false;
                lo = tp + idx.len_in(v);
                hi = std::min<TimeStep>(s.horizon, lo + s.wait_bound);
            }
            if (VarId sv = idx.succ(v); sv >= 0) {
                bool sv_owned = std::find(owned.begin(), owned.end(), sv) != owned.end();
                if (!sv_owned && work.at(sv) != kUnallocated) {
                    TimeStep ts = work.at(sv);
                    lo = std::max(lo, ts - idx.len_out(v) - s.wait_bound);
                    hi = std::min(hi, ts - idx.len_out(v));
                }
            }
            if (idx.is_last(v)) hi = std::min(hi, s.horizon - idx.len_out(v));
            for (TimeStep t = lo; t <= hi; ++t) domain.push_back(t);
        } else {
            domain.push_back(kUnallocated);
            for (TimeStep t = 0; t <= s.horizon; ++t) domain.push_back(t);
        }
        for (TimeStep t : domain) {
            work.set(v, t);
            int64_t w = pruned ? waiting_time(g, work, v) : 0;
            partial_delay += w;
            bool found = self(self, n + 1);
            partial_delay -= w;
            if (found) {
                work.set(v, saved);
                return true;
            }
        }
        work.set(v, saved);
        return false;
    };
    return rec(rec, 0);
}

}  // namespace

bool is_nash(const GameInstance& g, const Allocation& a, NashSpace space, int64_t budget) {
    if (space == NashSpace::Restricted) {
        int64_t evals = 0;
        for (AgentId j = 0; j < g.agent_count(); ++j) {
            Allocation cand = fastest_feasible(g, j, a, &evals);
            if (!candidate_differs(g, j, a, cand)) continue;
            Allocation next = down_reset(g, j, a, cand);
            if (g.utility_cost(j, next) < g.utility_cost(j, a)) return false;
        }
        return true;
    }
    int64_t used = 0;
    for (AgentId j = 0; j < g.agent_count(); ++j) {
        if (has_improving_deviation(g, a, j, budget, &used)) return false;
    }
    return true;
}

std::string SolveTrace::to_jsonl() const {
    std::string out;
    auto cost_json = [](const CostVector& c) {
        return json{{"fwd", c.fwd}, {"col", c.col}, {"none", c.none},
                    {"p2", c.p2},   {"p1", c.p1},   {"delay", c.delay}};
    };
    for (const UpdateRecord& rec : updates) {
        json changes = json::array();
        for (const UpdateChange& ch : rec.changes) {
            json c = {{"i", ch.var.i}, {"k", ch.var.k}};
            c["old"] = ch.old_slot == kUnallocated ? json(nullptr) : json(ch.old_slot);
            c["new"] = ch.new_slot == kUnallocated ? json(nullptr) : json(ch.new_slot);
            changes.push_back(std::move(c));
        }
        json line = {{"sweep", rec.sweep},
                     {"agent", rec.agent_label},
                     {"changes", changes},
                     {"cost_before", cost_json(rec.cost_before)},
                     {"cost_after", cost_json(rec.cost_after)}};
        out += line.dump() + "\n";
    }
    json tail = {{"sweeps", sweeps},
                 {"candidate_evals", candidate_evals},
                 {"updates", static_cast<int64_t>(updates.size())},
                 {"termination",
                  termination == Termination::NashReached ? "NashReached" : "IterationCap"}};
    out += tail.dump() + "\n";
    return out;
}

}  // namespace cmmi
