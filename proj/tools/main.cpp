#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cmmi/exact.hpp"
#include "cmmi/metrics.hpp"
#include "cmmi/simgen.hpp"
#include "cmmi/solver.hpp"
#include "json.hpp"

namespace {

using namespace cmmi;
using nlohmann::json;

constexpr const char* kVersion = "cmmi 0.1.0";

uint64_t fnv1a(const std::string& text) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

// First line of every output file: enough to reproduce the run byte for
// byte. Uses '#' for data files; LP files get the same line behind '\'.
std::string manifest_line(const std::string& cmd, const std::string& config,
                          const std::string& scenario_text, uint64_t seed,
                          const std::string& comment = "# ") {
    json m = {{"cmd", cmd},
              {"config", hex64(fnv1a(config))},
              {"scenario", hex64(fnv1a(scenario_text))},
              {"seed", seed},
              {"version", kVersion}};
    return comment + "manifest " + m.dump() + "\n";
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Data files written by this tool start with "# manifest ..." lines.
std::string strip_manifest(const std::string& text) {
    std::string out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0 || line == "#") continue;
        out += line;
        out += "\n";
    }
    return out;
}

Scenario resolve_scenario(const std::string& path, const std::string& fixture_name,
                          std::string* text_out) {
    std::string text;
    if (!fixture_name.empty()) {
        const char* dir = std::getenv("CMMI_FIXTURE_DIR");
        if (dir != nullptr) {
            std::filesystem::path candidate = std::filesystem::path(dir) / (fixture_name + ".json");
            if (std::filesystem::exists(candidate)) {
                text = strip_manifest(read_file(candidate.string()));
            }
        }
        if (text.empty()) text = save_scenario(fixture(fixture_name));
    } else if (!path.empty()) {
        text = strip_manifest(read_file(path));
    } else {
        throw std::runtime_error("need a scenario file or --fixture");
    }
    if (text_out) *text_out = text;
    return load_scenario(text, /*strict=*/true);
}

struct SolveFlags {
    std::string agents = "car";
    std::string init = "empty";
    std::string init_file;
    std::string mode = "bru";
    double p = 0.7;
    uint64_t seed = 0;
    std::string order = "id";
    bool release_final_edge = false;
    int64_t budget = 50'000'000;
};

void add_solve_flags(CLI::App* cmd, SolveFlags& f) {
    cmd->add_option("--agents", f.agents, "agent model: atomic|car|intersection")
        ->check(CLI::IsMember({"atomic", "car", "intersection"}));
    cmd->add_option("--init", f.init, "initial allocation: empty|pba|file")
        ->check(CLI::IsMember({"empty", "pba", "file"}));
    cmd->add_option("--init-file", f.init_file, "allocation JSON for --init file");
    cmd->add_option("--mode", f.mode, "bru|bru-best|dsa")
        ->check(CLI::IsMember({"bru", "bru-best", "dsa"}));
    cmd->add_option("--p", f.p, "DSA commit probability");
    cmd->add_option("--seed", f.seed, "seed for all randomness");
    cmd->add_option("--order", f.order, "agent order: \"id\" or comma list");
    cmd->add_flag("--release-final-edge", f.release_final_edge,
                  "drain a car's destination edge after its travel time");
    cmd->add_option("--budget", f.budget, "node / evaluation budget");
}

std::vector<int32_t> parse_order(const std::string& order) {
    std::vector<int32_t> out;
    if (order == "id" || order.empty()) return out;
    std::istringstream in(order);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::string flags_config_string(const SolveFlags& f) {
    std::ostringstream os;
    os << f.agents << "|" << f.init << "|" << f.mode << "|p=" << f.p << "|order=" << f.order
       << "|rfe=" << f.release_final_edge << "|budget=" << f.budget;
    return os.str();
}

SolverConfig build_config(const SolveFlags& f, const GameInstance& g) {
    SolverConfig cfg;
    cfg.agent_model = agent_model_from_string(f.agents);
    if (f.init == "empty") {
        cfg.init = InitMode::Empty;
    } else if (f.init == "pba") {
        cfg.init = InitMode::Pba;
    } else {
        cfg.init = InitMode::Given;
        cfg.given = Allocation::from_json(strip_manifest(read_file(f.init_file)), g.var_index());
    }
    cfg.best_update = f.mode == "bru-best";
    if (f.mode == "dsa") cfg.dsa = DsaConfig{f.p, 0, f.seed};
    cfg.agent_order = parse_order(f.order);
    return cfg;
}

int cmd_solve(const std::string& scenario_path, const std::string& fixture_name, SolveFlags& f,
              const std::string& alloc_out, const std::string& trace_out,
              const std::string& metrics_out) {
    std::string scenario_text;
    Scenario s = resolve_scenario(scenario_path, fixture_name, &scenario_text);
    GameInstance g(s, agent_model_from_string(f.agents), GameOptions{f.release_final_edge});
    SolverConfig cfg = build_config(f, g);
    auto [a, trace] = cfg.dsa ? dsa(g, cfg) : brudr(g, cfg);

    bool feasible = g.is_feasible(a);
    int64_t delay = total_delay(g, a);
    std::string manifest =
        manifest_line("solve", flags_config_string(f), scenario_text, f.seed);
    if (!alloc_out.empty()) write_file(alloc_out, manifest + a.to_json());
    if (!trace_out.empty()) write_file(trace_out, manifest + trace.to_jsonl());
    if (!metrics_out.empty()) {
        std::ostringstream row;
        row << "scenario,agents,init,mode,seed,feasible,delay,optimal,ratio,gini,updates,evals\n";
        row << hex64(fnv1a(scenario_text)) << "," << f.agents << "," << f.init << "," << f.mode
            << "," << f.seed << "," << (feasible ? 1 : 0) << "," << delay << ",,,"
            << (feasible ? std::to_string(gini(g, a)) : "") << "," << trace.updates.size() << ","
            << trace.candidate_evals << "\n";
        write_file(metrics_out, manifest + row.str());
    }
    std::cout << "feasible=" << (feasible ? 1 : 0) << " delay=" << delay
              << " updates=" << trace.updates.size() << " evals=" << trace.candidate_evals
              << " termination="
              << (trace.termination == Termination::NashReached ? "NashReached" : "IterationCap")
              << "\n";
    return feasible ? 0 : 2;
}

int cmd_optimal(const std::string& scenario_path, const std::string& fixture_name,
                int64_t budget, bool release) {
    Scenario s = resolve_scenario(scenario_path, fixture_name, nullptr);
    OptimalResult r = solve_optimal(s, budget, GameOptions{release});
    switch (r.status) {
        case OptimalStatus::Optimal:
            std::cout << "optimal_delay=" << r.delay << "\n";
            std::cout << "status=Optimal nodes=" << r.nodes << "\n";
            return 0;
        case OptimalStatus::Infeasible:
            std::cout << "status=Infeasible nodes=" << r.nodes << "\n";
            return 2;
        case OptimalStatus::BudgetExceeded:
            std::cout << "status=BudgetExceeded nodes=" << r.nodes;
            if (r.allocation) std::cout << " incumbent=" << r.delay;
            std::cout << "\n";
            return 2;
    }
    return 1;
}

int cmd_export_lp(const std::string& scenario_path, const std::string& fixture_name,
                  const std::string& out) {
    std::string scenario_text;
    Scenario s = resolve_scenario(scenario_path, fixture_name, &scenario_text);
    std::string text = manifest_line("export-lp", "", scenario_text, 0, "\\ ") + export_lp(s);
    if (out.empty())
        std::cout << text;
    else
        write_file(out, text);
    return 0;
}

int cmd_generate(const std::string& grid, const std::string& fixture_name, int32_t cars,
                 uint64_t seed, TimeStep edge_len, double lambda, const std::string& crossing,
                 TimeStep t_ub, int32_t k_ub, const std::string& out) {
    Scenario s;
    std::string config;
    if (!fixture_name.empty()) {
        s = fixture(fixture_name);
        config = "fixture=" + fixture_name;
    } else {
        int32_t rows = 0, cols = 0;
        if (std::sscanf(grid.c_str(), "%dx%d", &rows, &cols) != 2) {
            throw std::runtime_error("--grid needs RxC, e.g. 3x3");
        }
        CrossingMode mode = crossing == "fourway" ? CrossingMode::FourWay : CrossingMode::AllCrossing;
        s.network = grid_network(rows, cols, edge_len, mode);

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
            TimeStep travel = 0;
            for (size_t l = 0; l + 1 < t.route.size(); ++l) {
                travel += s.network.edge_len(t.route[l], t.route[l + 1]);
            }
            latest = std::max(latest, t.depart + travel);
            max_hops = std::max(max_hops, static_cast<int32_t>(t.route.size()) - 1);
        }
        s.horizon = latest + cars * max_hops + 8;
        s.wait_bound = t_ub >= 0 ? t_ub : s.horizon;
        s.edge_capacity = k_ub >= 1 ? k_ub : cars;
        std::ostringstream cs;
        cs << grid << "|K=" << cars << "|len=" << edge_len << "|lambda=" << lambda << "|"
           << crossing << "|T_UB=" << t_ub << "|K_UB=" << k_ub;
        config = cs.str();
    }
    ValidationReport report = validate_scenario(s);
    if (!report.ok()) {
        for (const Violation& v : report.violations) {
            std::cerr << "invalid scenario: [" << v.code << "] " << v.message << "\n";
        }
        return 1;
    }
    std::string text = save_scenario(s);
    std::string content = manifest_line("generate", config, text, seed) + text;
    if (out.empty())
        std::cout << content;
    else
        write_file(out, content);
    return 0;
}

int cmd_compare(const std::string& grid, int32_t cars, int32_t runs, uint64_t seed,
                TimeStep edge_len, double lambda, TimeStep t_ub, int32_t k_ub, int64_t budget,
                int32_t jobs, bool release, const std::string& out) {
    int32_t rows = 0, cols = 0;
    if (std::sscanf(grid.c_str(), "%dx%d", &rows, &cols) != 2) {
        throw std::runtime_error("--grid needs RxC, e.g. 3x3");
    }
    RoadNetwork net = grid_network(rows, cols, edge_len, CrossingMode::AllCrossing);
    auto id = [cols](int32_t r, int32_t c) { return r * cols + c + 1; };
    std::vector<RouteDemand> routes;
    for (int32_t r = 0; r < rows && cols >= 2; ++r) {
        std::vector<IntersectionId> fwd;
        for (int32_t c = 0; c < cols; ++c) fwd.push_back(id(r, c));
        routes.push_back({fwd, lambda});
        routes.push_back({{fwd.rbegin(), fwd.rend()}, lambda});
    }
    for (int32_t c = 0; c < cols && rows >= 2; ++c) {
        std::vector<IntersectionId> down;
        for (int32_t r = 0; r < rows; ++r) down.push_back(id(r, c));
        routes.push_back({down, lambda});
        routes.push_back({{down.rbegin(), down.rend()}, lambda});
    }

    std::vector<std::pair<std::string, Scenario>> scenarios;
    for (int32_t n = 0; n < runs; ++n) {
        Scenario s;
        s.network = net;
        DemandSpec spec{routes, cars, seed + static_cast<uint64_t>(n)};
        s.trips = poisson_demand(s.network, spec);
        TimeStep latest = 0;
        int32_t max_hops = 0;
        for (const Trip& t : s.trips) {
            latest = std::max<TimeStep>(
                latest, t.depart + (static_cast<TimeStep>(t.route.size()) - 1) * edge_len);
            max_hops = std::max(max_hops, static_cast<int32_t>(t.route.size()) - 1);
        }
        s.horizon = latest + cars * max_hops + 8;
        s.wait_bound = t_ub >= 0 ? t_ub : s.horizon;
        s.edge_capacity = k_ub >= 1 ? k_ub : cars;
        scenarios.push_back({"g" + std::to_string(n), std::move(s)});
    }

    std::vector<RunConfig> configs;
    configs.push_back({"car+pba", AgentModel::Car, InitMode::Pba, "bru", 0.7, {}});
    configs.push_back({"car+empty", AgentModel::Car, InitMode::Empty, "bru", 0.7, {}});
    configs.push_back({"atomic+empty", AgentModel::Atomic, InitMode::Empty, "bru", 0.7, {}});

    Report report = compare_experiment(scenarios, configs, seed, budget, GameOptions{release}, jobs);
    std::ostringstream config_str;
    config_str << grid << "|K=" << cars << "|runs=" << runs << "|len=" << edge_len
               << "|lambda=" << lambda << "|T_UB=" << t_ub << "|K_UB=" << k_ub << "|rfe=" << release;
    std::string manifest = manifest_line("compare", config_str.str(), "", seed);
    if (!out.empty()) write_file(out, manifest + report.to_csv());
    for (const Aggregate& agg : report.aggregates) {
        std::cout << agg.label << ": runs=" << agg.runs << " feasible=" << agg.feasible_runs
                  << " ratio_runs=" << agg.ratio_runs << " mean_ratio=" << agg.mean_ratio
                  << " ci95=[" << agg.ci95_low << "," << agg.ci95_high << "]"
                  << " mean_gini=" << agg.mean_gini << "\n";
    }
    return 0;
}

int cmd_metrics(const std::string& scenario_path, const std::string& fixture_name,
                const std::string& alloc_path, bool poa, const std::string& eps,
                int32_t externality_car, SolveFlags& f) {
    std::string scenario_text;
    Scenario s = resolve_scenario(scenario_path, fixture_name, &scenario_text);
    if (poa) {
        int64_t num = 1, den = 1;
        if (std::sscanf(eps.c_str(), "%ld/%ld", &num, &den) != 2) {
            den = 1;
            num = std::stol(eps);
        }
        PoaResult r = poa_ratio(s, agent_model_from_string(f.agents), Rational::make(num, den),
                                f.budget, GameOptions{f.release_final_edge});
        std::cout << "poa=" << r.ratio.num << "/" << r.ratio.den
                  << " optimal=" << r.optimal_delay << " worst_nash=" << r.worst_nash_delay
                  << " nash_count=" << r.nash_count
                  << " optimum_is_nash=" << (r.optimum_is_nash ? 1 : 0) << "\n";
        return 0;
    }
    if (externality_car >= 0) {
        GameInstance g(s, agent_model_from_string(f.agents), GameOptions{f.release_final_edge});
        SolverConfig cfg = build_config(f, g);
        ExternalityResult ex =
            externality(s, externality_car, cfg, GameOptions{f.release_final_edge});
        std::cout << "externality=" << ex.value << " base_feasible=" << ex.base_feasible
                  << " reduced_feasible=" << ex.reduced_feasible << "\n";
        return ex.base_feasible && ex.reduced_feasible ? 0 : 2;
    }
    if (alloc_path.empty()) throw std::runtime_error("metrics needs --allocation, --poa or --externality");
    GameInstance g(s, agent_model_from_string(f.agents), GameOptions{f.release_final_edge});
    Allocation a = Allocation::from_json(strip_manifest(read_file(alloc_path)), g.var_index());
    bool feasible = g.is_feasible(a);
    std::cout << "feasible=" << (feasible ? 1 : 0) << " delay=" << total_delay(g, a);
    if (feasible) std::cout << " gini=" << gini(g, a);
    std::cout << " cost=" << cost_to_json(g.social_cost(a)) << "\n";
    return feasible ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CMMI slot-allocation solver"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string scenario_path, fixture_name, out, alloc_out, trace_out, metrics_out, grid;
    std::string alloc_path, eps = "1";
    SolveFlags flags;
    int32_t cars = 8, runs = 20, jobs = 1, externality_car = -1;
    TimeStep edge_len = 2, t_ub = -1;
    int32_t k_ub = 0;
    double lambda = 0.25;
    bool poa = false;

    CLI::App* solve = app.add_subcommand("solve", "run BRUDR / DSA on a scenario");
    solve->add_option("scenario", scenario_path, "scenario JSON path");
    solve->add_option("--fixture", fixture_name, "built-in fixture name");
    add_solve_flags(solve, flags);
    solve->add_option("--allocation-out", alloc_out);
    solve->add_option("--trace-out", trace_out);
    solve->add_option("--metrics-out", metrics_out);

    CLI::App* optimal = app.add_subcommand("optimal", "exact minimum total delay");
    optimal->add_option("scenario", scenario_path);
    optimal->add_option("--fixture", fixture_name);
    optimal->add_option("--budget", flags.budget);
    optimal->add_flag("--release-final-edge", flags.release_final_edge);

    CLI::App* lp = app.add_subcommand("export-lp", "write the MILP in LP format");
    lp->add_option("scenario", scenario_path);
    lp->add_option("--fixture", fixture_name);
    lp->add_option("-o,--out", out);

    CLI::App* gen = app.add_subcommand("generate", "grid scenario with Poisson demand");
    gen->add_option("--grid", grid, "RxC grid");
    gen->add_option("--fixture", fixture_name, "emit a built-in fixture instead");
    gen->add_option("--K", cars, "number of cars");
    gen->add_option("--seed", flags.seed);
    gen->add_option("--edge-len", edge_len);
    gen->add_option("--lambda", lambda, "per-route Poisson rate");
    std::string crossing = "all";
    gen->add_option("--crossing", crossing)->check(CLI::IsMember({"all", "fourway"}));
    gen->add_option("--T-UB", t_ub, "wait bound (default: horizon, non-binding)");
    gen->add_option("--K-UB", k_ub, "edge capacity (default: K)");
    gen->add_option("-o,--out", out);

    CLI::App* compare = app.add_subcommand("compare", "batch comparison against the oracle");
    compare->add_option("--grid", grid)->required();
    compare->add_option("--K", cars);
    compare->add_option("--runs", runs);
    compare->add_option("--seed", flags.seed);
    compare->add_option("--edge-len", edge_len);
    compare->add_option("--lambda", lambda);
    compare->add_option("--T-UB", t_ub);
    compare->add_option("--K-UB", k_ub);
    compare->add_option("--budget", flags.budget);
    compare->add_option("--jobs", jobs, "parallel independent runs");
    compare->add_flag("--release-final-edge", flags.release_final_edge);
    compare->add_option("-o,--out", out, "CSV output path");

    CLI::App* metrics = app.add_subcommand("metrics", "evaluate an allocation / PoA / externality");
    metrics->add_option("scenario", scenario_path);
    metrics->add_option("--fixture", fixture_name);
    metrics->add_option("--allocation", alloc_path);
    metrics->add_flag("--poa", poa, "enumerate equilibria and report the PoA");
    metrics->add_option("--poa-eps", eps, "epsilon as N or N/D");
    metrics->add_option("--externality", externality_car, "car id to remove");
    add_solve_flags(metrics, flags);

    try {
        app.parse(argc, argv);
        if (solve->parsed()) {
            return cmd_solve(scenario_path, fixture_name, flags, alloc_out, trace_out, metrics_out);
        }
        if (optimal->parsed()) {
            return cmd_optimal(scenario_path, fixture_name, flags.budget,
                               flags.release_final_edge);
        }
        if (lp->parsed()) return cmd_export_lp(scenario_path, fixture_name, out);
        if (gen->parsed()) {
            return cmd_generate(grid, fixture_name, cars, flags.seed, edge_len, lambda, crossing,
                                t_ub, k_ub, out);
        }
        if (compare->parsed()) {
            return cmd_compare(grid, cars, runs, flags.seed, edge_len, lambda, t_ub, k_ub,
                               flags.budget, jobs, flags.release_final_edge, out);
        }
        if (metrics->parsed()) {
            return cmd_metrics(scenario_path, fixture_name, alloc_path, poa, eps, externality_car,
                               flags);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
