#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cmmi/exact.hpp"
#include "cmmi/metrics.hpp"
#include "cmmi/simgen.hpp"
#include "cmmi/solver.hpp"

namespace py = pybind11;
using namespace cmmi;

namespace {

GameOptions options(bool release_final_edge) { return GameOptions{release_final_edge}; }

py::list allocation_to_list(const Allocation& a) {
    py::list out;
    const VarIndex& idx = a.index();
    for (VarId v = 0; v < idx.size(); ++v) {
        py::dict slot;
        slot["i"] = idx.key(v).i;
        slot["k"] = idx.key(v).k;
        slot["t"] = a.at(v) == kUnallocated ? py::object(py::none()) : py::object(py::int_(a.at(v)));
        out.append(slot);
    }
    return out;
}

Allocation allocation_from_list(const GameInstance& g, const py::iterable& slots) {
    Allocation a = g.empty_allocation();
    for (py::handle h : slots) {
        py::dict slot = py::cast<py::dict>(h);
        auto t = slot["t"];
        a.set(py::cast<IntersectionId>(slot["i"]), py::cast<CarId>(slot["k"]),
              t.is_none() ? kUnallocated : py::cast<TimeStep>(t));
    }
    return a;
}

py::dict solve_py(const Scenario& s, const std::string& agents, const std::string& init,
                  const std::string& mode, double p, uint64_t seed,
                  const std::vector<int32_t>& order, bool release_final_edge) {
    GameInstance g(s, agent_model_from_string(agents), options(release_final_edge));
    SolverConfig cfg;
    cfg.agent_model = g.model();
    if (init == "empty")
        cfg.init = InitMode::Empty;
    else if (init == "pba")
        cfg.init = InitMode::Pba;
    else
        throw std::invalid_argument("init must be empty or pba");
    cfg.best_update = mode == "bru-best";
    if (mode == "dsa") cfg.dsa = DsaConfig{p, 0, seed};
    cfg.agent_order = order;
    auto [a, trace] = cfg.dsa ? dsa(g, cfg) : brudr(g, cfg);

    py::dict out;
    out["feasible"] = g.is_feasible(a);
    out["delay"] = total_delay(g, a);
    out["updates"] = static_cast<int64_t>(trace.updates.size());
    out["evals"] = trace.candidate_evals;
    out["termination"] =
        trace.termination == Termination::NashReached ? "NashReached" : "IterationCap";
    out["allocation"] = allocation_to_list(a);
    out["nash_restricted"] = is_nash(g, a, NashSpace::Restricted);
    return out;
}

py::dict optimal_py(const Scenario& s, int64_t budget, bool release_final_edge) {
    OptimalResult r = solve_optimal(s, budget, options(release_final_edge));
    py::dict out;
    out["status"] = r.status == OptimalStatus::Optimal      ? "Optimal"
                    : r.status == OptimalStatus::Infeasible ? "Infeasible"
                                                            : "BudgetExceeded";
    out["nodes"] = r.nodes;
    if (r.allocation) {
        out["delay"] = r.delay;
        out["allocation"] = allocation_to_list(*r.allocation);
    }
    return out;
}

py::dict poa_py(const Scenario& s, const std::string& agents, int64_t eps_num, int64_t eps_den,
                int64_t budget) {
    PoaResult r = poa_ratio(s, agent_model_from_string(agents), Rational::make(eps_num, eps_den),
                            budget);
    py::dict out;
    out["ratio"] = py::make_tuple(r.ratio.num, r.ratio.den);
    out["optimal"] = r.optimal_delay;
    out["worst_nash"] = r.worst_nash_delay;
    out["nash_count"] = r.nash_count;
    out["optimum_is_nash"] = r.optimum_is_nash;
    return out;
}

double gini_py(const Scenario& s, const py::iterable& slots, bool release_final_edge) {
    GameInstance g(s, AgentModel::Car, options(release_final_edge));
    return gini(g, allocation_from_list(g, slots));
}

py::dict evaluate_py(const Scenario& s, const py::iterable& slots, bool release_final_edge) {
    GameInstance g(s, AgentModel::Car, options(release_final_edge));
    Allocation a = allocation_from_list(g, slots);
    py::dict out;
    out["feasible"] = g.is_feasible(a);
    out["delay"] = total_delay(g, a);
    out["per_car_delay"] = per_car_delay(g, a);
    out["milp_clean"] =
        a.fully_allocated() ? check_solution_against_milp(s, a, options(release_final_edge)).ok()
                            : false;
    return out;
}

std::vector<std::string> validate_py(const Scenario& s) {
    std::vector<std::string> out;
    for (const Violation& v : validate_scenario(s).violations) {
        out.push_back("[" + v.code + "] " + v.message);
    }
    return out;
}

Scenario generate_py(int32_t rows, int32_t cols, TimeStep edge_len, int32_t cars, double lambda,
                     uint64_t seed) {
    Scenario s;
    s.network = grid_network(rows, cols, edge_len, CrossingMode::AllCrossing);
    DemandSpec spec;
    spec.target_cars = cars;
    spec.seed = seed;
    auto id = [cols](int32_t r, int32_t c) { return r * cols + c + 1; };
    for (int32_t r = 0; r < rows && cols >= 2; ++r) {
        std::vector<IntersectionId> fwd;
        for (int32_t c = 0; c < cols; ++c) fwd.push_back(id(r, c));
        spec.routes.push_back({fwd, lambda});
        spec.routes.push_back({{fwd.rbegin(), fwd.rend()}, lambda});
    }
    for (int32_t c = 0; c < cols && rows >= 2; ++c) {
        std::vector<IntersectionId> down;
        for (int32_t r = 0; r < rows; ++r) down.push_back(id(r, c));
        spec.routes.push_back({down, lambda});
        spec.routes.push_back({{down.rbegin(), down.rend()}, lambda});
    }
    s.trips = poisson_demand(s.network, spec);
    TimeStep latest = 0;
    int32_t max_hops = 0;
    for (const Trip& t : s.trips) {
        latest = std::max<TimeStep>(latest,
                                    t.depart + (static_cast<TimeStep>(t.route.size()) - 1) * edge_len);
        max_hops = std::max(max_hops, static_cast<int32_t>(t.route.size()) - 1);
    }
    s.horizon = latest + cars * max_hops + 8;
    s.wait_bound = s.horizon;
    s.edge_capacity = cars;
    return s;
}

}  // namespace

PYBIND11_MODULE(_cmmi, m) {
    m.doc() = "Slot allocation for coordinated multi-intersection management";

    py::class_<Scenario>(m, "Scenario")
        .def_property_readonly("cars",
                               [](const Scenario& s) { return static_cast<int64_t>(s.trips.size()); })
        .def_property_readonly(
            "intersections",
            [](const Scenario& s) { return static_cast<int64_t>(s.network.intersections.size()); })
        .def_readonly("T", &Scenario::horizon)
        .def_readonly("T_UB", &Scenario::wait_bound)
        .def_readonly("K_UB", &Scenario::edge_capacity);

    m.def("fixture", &fixture, py::arg("name"),
          "built-in scenario: fig2, fig2_extended:<N>, appendixH, jsp_small");
    m.def("load_scenario", &load_scenario, py::arg("text"), py::arg("strict") = true);
    m.def("save_scenario", &save_scenario, py::arg("scenario"));
    m.def("validate", &validate_py, py::arg("scenario"), "list of violations, empty when valid");
    m.def("generate", &generate_py, py::arg("rows"), py::arg("cols"), py::arg("edge_len"),
          py::arg("cars"), py::arg("lam"), py::arg("seed"),
          "grid scenario with seeded Poisson demand and non-binding bounds");

    m.def("solve", &solve_py, py::arg("scenario"), py::arg("agents") = "car",
          py::arg("init") = "empty", py::arg("mode") = "bru", py::arg("p") = 0.7,
          py::arg("seed") = 0, py::arg("order") = std::vector<int32_t>{},
          py::arg("release_final_edge") = false, "BRUDR / DSA run; returns a result dict");
    m.def("solve_optimal", &optimal_py, py::arg("scenario"), py::arg("budget") = 50'000'000,
          py::arg("release_final_edge") = false);
    m.def("poa_ratio", &poa_py, py::arg("scenario"), py::arg("agents") = "car",
          py::arg("eps_num") = 1, py::arg("eps_den") = 1, py::arg("budget") = 50'000'000);
    m.def("export_lp", &export_lp, py::arg("scenario"));
    m.def("gini", &gini_py, py::arg("scenario"), py::arg("allocation"),
          py::arg("release_final_edge") = false);
    m.def("evaluate", &evaluate_py, py::arg("scenario"), py::arg("allocation"),
          py::arg("release_final_edge") = false,
          "feasibility, delay and MILP cross-check of an allocation");

    m.attr("__version__") = "0.1.0";
}
