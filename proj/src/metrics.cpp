#include "cmmi/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cmmi/exact.hpp"
#include "json.hpp"

namespace cmmi {

using nlohmann::json;

Rational Rational::make(int64_t num, int64_t den) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    return Rational{num, den};
}

double gini(const GameInstance& g, const Allocation& a) {
    if (!g.is_feasible(a)) {
        throw std::invalid_argument("gini needs a feasible allocation");
    }
    std::vector<int64_t> d = per_car_delay(g, a);
    int64_t total = std::accumulate(d.begin(), d.end(), int64_t{0});
    if (total == 0) return 0.0;
    int64_t pair_sum = 0;
    for (int64_t x : d) {
        for (int64_t y : d) pair_sum += std::llabs(x - y);
    }
    return static_cast<double>(pair_sum) /
           (2.0 * static_cast<double>(d.size()) * static_cast<double>(total));
}

namespace {

std::pair<Allocation, SolveTrace> run_solver(const GameInstance& g, const SolverConfig& cfg) {
    return cfg.dsa ? dsa(g, cfg) : brudr(g, cfg);
}

}  // namespace

ExternalityResult externality(const Scenario& s, CarId k, const SolverConfig& cfg,
                              GameOptions opt) {
    Scenario reduced = s;
    auto it = std::find_if(reduced.trips.begin(), reduced.trips.end(),
                           [k](const Trip& t) { return t.id == k; });
    if (it == reduced.trips.end()) {
        throw std::invalid_argument("externality: unknown car " + std::to_string(k));
    }
    reduced.trips.erase(it);

    GameInstance g_base(s, cfg.agent_model, opt);
    GameInstance g_reduced(reduced, cfg.agent_model, opt);
    auto [a_base, t_base] = run_solver(g_base, cfg);
    auto [a_red, t_red] = run_solver(g_reduced, cfg);
    (void)t_base;
    (void)t_red;

    ExternalityResult out;
    out.base_feasible = g_base.is_feasible(a_base);
    out.reduced_feasible = g_reduced.is_feasible(a_red);
    out.value = total_delay(g_base, a_base) - total_delay(g_reduced, a_red);
    return out;
}

PoaResult poa_ratio(const Scenario& s, AgentModel model, Rational eps, int64_t budget,
                    GameOptions opt) {
    if (eps.num <= 0) throw std::invalid_argument("poa_ratio needs eps > 0");
    OptimalResult best = solve_optimal(s, budget, opt);
    if (best.status != OptimalStatus::Optimal) {
        throw std::runtime_error("poa_ratio: oracle did not finish within budget");
    }
    auto equilibria = enumerate_nash(s, model, budget, opt);
    if (equilibria.empty()) {
        throw std::runtime_error("poa_ratio: no feasible Nash equilibrium found");
    }
    PoaResult out;
    out.optimal_delay = best.delay;
    out.nash_count = static_cast<int64_t>(equilibria.size());
    out.worst_nash_delay = 0;
    for (const auto& [a, delay] : equilibria) {
        (void)a;
        out.worst_nash_delay = std::max(out.worst_nash_delay, delay);
        if (delay == best.delay) out.optimum_is_nash = true;
    }
    // (d + eps) / (opt + eps) with eps = n/m gives (d*m + n) / (opt*m + n).
    out.ratio = Rational::make(out.worst_nash_delay * eps.den + eps.num,
                               out.optimal_delay * eps.den + eps.num);
    return out;
}

namespace {

uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b) {
    uint64_t h = base ^ 0x9e3779b97f4a7c15ull;
    for (uint64_t x : {a, b}) {
        h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdull;
        h ^= h >> 33;
    }
    return h;
}

std::string csv_opt(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream os;
    os << *v;
    return os.str();
}

}  // namespace

Report compare_experiment(const std::vector<std::pair<std::string, Scenario>>& scenarios,
                          const std::vector<RunConfig>& configs, uint64_t base_seed,
                          int64_t oracle_budget, GameOptions opt, int32_t jobs) {
    Report report;
    report.records.resize(scenarios.size() * configs.size());

    // The oracle result is shared by every config of one scenario.
    std::vector<std::optional<int64_t>> optimal(scenarios.size());
    auto run_scenario = [&](size_t si) {
        const Scenario& s = scenarios[si].second;
        OptimalResult best = solve_optimal(s, oracle_budget, opt);
        if (best.status == OptimalStatus::Optimal) optimal[si] = best.delay;

        for (size_t ci = 0; ci < configs.size(); ++ci) {
            const RunConfig& rc = configs[ci];
            RunRecord rec;
            rec.scenario_id = scenarios[si].first;
            rec.agents = to_string(rc.agent_model);
            rec.init = rc.init == InitMode::Empty ? "empty" : (rc.init == InitMode::Pba ? "pba" : "given");
            rec.mode = rc.mode;
            rec.seed = mix_seed(base_seed, si, ci);

            GameInstance g(s, rc.agent_model, opt);
            SolverConfig cfg;
            cfg.agent_model = rc.agent_model;
            cfg.init = rc.init;
            cfg.best_update = rc.mode == "bru-best";
            cfg.agent_order = rc.order;
            if (rc.mode == "dsa") cfg.dsa = DsaConfig{rc.p, 0, rec.seed};
            auto [a, trace] = run_solver(g, cfg);

            rec.feasible = g.is_feasible(a);
            rec.delay = total_delay(g, a);
            rec.optimal = optimal[si];
            rec.updates = static_cast<int64_t>(trace.updates.size());
            rec.evals = trace.candidate_evals;
            rec.per_car_delay = per_car_delay(g, a);
            if (rec.feasible) {
                rec.gini = gini(g, a);
                if (rec.optimal && *rec.optimal > 0) {
                    rec.ratio = static_cast<double>(rec.delay) / static_cast<double>(*rec.optimal);
                }
            }
            report.records[si * configs.size() + ci] = std::move(rec);
        }
    };

    if (jobs <= 1) {
        for (size_t si = 0; si < scenarios.size(); ++si) run_scenario(si);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (int32_t w = 0; w < jobs; ++w) {
            pool.emplace_back([&] {
                for (size_t si = next.fetch_add(1); si < scenarios.size();
                     si = next.fetch_add(1)) {
                    run_scenario(si);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    for (size_t ci = 0; ci < configs.size(); ++ci) {
        Aggregate agg;
        agg.label = configs[ci].label;
        std::vector<double> ratios, ginis;
        for (size_t si = 0; si < scenarios.size(); ++si) {
            const RunRecord& rec = report.records[si * configs.size() + ci];
            ++agg.runs;
            if (rec.feasible) ++agg.feasible_runs;
            if (rec.ratio) ratios.push_back(*rec.ratio);
            if (rec.gini) ginis.push_back(*rec.gini);
        }
        agg.ratio_runs = static_cast<int64_t>(ratios.size());
        if (!ratios.empty()) {
            double mean = std::accumulate(ratios.begin(), ratios.end(), 0.0) / ratios.size();
            double var = 0.0;
            for (double r : ratios) var += (r - mean) * (r - mean);
            var = ratios.size() > 1 ? var / (ratios.size() - 1) : 0.0;
            double half = 1.96 * std::sqrt(var / ratios.size());
            agg.mean_ratio = mean;
            agg.ci95_low = mean - half;
            agg.ci95_high = mean + half;
        }
        if (!ginis.empty()) {
            agg.mean_gini = std::accumulate(ginis.begin(), ginis.end(), 0.0) / ginis.size();
        }
        report.aggregates.push_back(std::move(agg));
    }
    return report;
}

std::string Report::to_csv() const {
    std::ostringstream os;
    os << "scenario,agents,init,mode,seed,feasible,delay,optimal,ratio,gini,updates,evals\n";
    for (const RunRecord& r : records) {
        os << r.scenario_id << "," << r.agents << "," << r.init << "," << r.mode << "," << r.seed
           << "," << (r.feasible ? 1 : 0) << "," << r.delay << ","
           << (r.optimal ? std::to_string(*r.optimal) : "") << "," << csv_opt(r.ratio) << ","
           << csv_opt(r.gini) << "," << r.updates << "," << r.evals << "\n";
    }
    return os.str();
}

std::string Report::to_json() const {
    json rows = json::array();
    for (const RunRecord& r : records) {
        json row = {{"scenario", r.scenario_id}, {"agents", r.agents}, {"init", r.init},
                    {"mode", r.mode},            {"seed", r.seed},     {"feasible", r.feasible},
                    {"delay", r.delay},          {"updates", r.updates},
                    {"evals", r.evals}};
        row["optimal"] = r.optimal ? json(*r.optimal) : json(nullptr);
        row["ratio"] = r.ratio ? json(*r.ratio) : json(nullptr);
        row["gini"] = r.gini ? json(*r.gini) : json(nullptr);
        rows.push_back(std::move(row));
    }
    json aggs = json::array();
    for (const Aggregate& a : aggregates) {
        aggs.push_back({{"label", a.label},
                        {"runs", a.runs},
                        {"feasible_runs", a.feasible_runs},
                        {"ratio_runs", a.ratio_runs},
                        {"mean_ratio", a.mean_ratio},
                        {"ci95_low", a.ci95_low},
                        {"ci95_high", a.ci95_high},
                        {"mean_gini", a.mean_gini}});
    }
    return json{{"records", rows}, {"aggregates", aggs}}.dump(2) + "\n";
}

}  // namespace cmmi
