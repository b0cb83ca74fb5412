#include <numeric>
#include <random>
#include <set>

#include "cmmi/solver.hpp"
#include "cmmi/simgen.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cmmi;
using cmmi::testing::fig2_bad_nash;
using cmmi::testing::fig2_optimum;

TEST_CASE("down_reset clears downstream of a change") {
    Scenario s = fixture("fig2");

    SUBCASE("car agent resets after the first changed intersection") {
        GameInstance g(s, AgentModel::Car);
        Allocation a = fig2_optimum(g);
        Allocation b = a;
        b.set(5, 2, 6);  // car 2 (agent index 1) changes at 5 only
        Allocation r = down_reset(g, 1, a, b);
        CHECK(r.at(7, 2) == 0);
        CHECK(r.at(5, 2) == 6);
        CHECK(r.at(2, 2) == kUnallocated);
        CHECK(r.at(5, 1) == a.at(5, 1));  // other cars untouched
    }
    SUBCASE("atomic agent at the last allocatable intersection") {
        GameInstance g(s, AgentModel::Atomic);
        Allocation a = fig2_optimum(g);
        AgentId j = g.var_index()->id(5, 1);  // atomic agents are var-indexed
        Allocation b = a;
        b.set(5, 1, 7);
        Allocation r = down_reset(g, j, a, b);
        CHECK(r.at(5, 1) == 7);  // nothing downstream of (5,1)
        CHECK(r == b);
    }
    SUBCASE("intersection agent with no changed slots is the identity") {
        GameInstance g(s, AgentModel::Intersection);
        Allocation a = fig2_optimum(g);
        AgentId j = 0;
        Allocation r = down_reset(g, j, a, a);
        CHECK(r == a);
    }
    SUBCASE("ownership is enforced") {
        GameInstance g(s, AgentModel::Car);
        Allocation a = fig2_optimum(g);
        Allocation b = a;
        b.set(5, 1, 7);  // car 1's variable
        CHECK_THROWS_AS(down_reset(g, 1, a, b), std::invalid_argument);
    }
}

TEST_CASE("pba_init is the zero-wait schedule") {
    GameInstance g(fixture("fig2"), AgentModel::Car);
    Allocation a = pba_init(g);
    CHECK(a.at(7, 2) == 0);
    CHECK(a.at(5, 2) == 5);
    CHECK(a.at(2, 2) == 10);
    CHECK(total_delay(g, a) == 0);
    // cars 1 and 2 both want slot 5 at intersection 5
    CHECK_FALSE(g.is_feasible(a));
    CHECK(g.collision_count(a, 5) == 2);
}

TEST_CASE("fastest_feasible braking around an occupied slot") {
    GameInstance g(fixture("fig2"), AgentModel::Car);
    Allocation a = g.empty_allocation();
    a.set(7, 2, 0);
    a.set(5, 2, 5);
    a.set(2, 2, 10);
    // car 1 (agent 0) must brake at 5
    Allocation cand = fastest_feasible(g, 0, a);
    CHECK(cand.at(6, 1) == 0);
    CHECK(cand.at(5, 1) == 6);

    SUBCASE("an empty road gives the zero-wait schedule") {
        Allocation lone = fastest_feasible(g, 1, g.empty_allocation());
        CHECK(lone.at(7, 2) == 0);
        CHECK(lone.at(5, 2) == 5);
        CHECK(lone.at(2, 2) == 10);
    }
}

TEST_CASE("fastest_feasible leaves upstream-blocked cars unallocated") {
    GameInstance g(fixture("appendixH"), AgentModel::Intersection);
    Allocation a = g.empty_allocation();
    a.set(1, 2, 0);  // car 2 allocated at its origin only
    // agent of intersection 2 owns (2,1) and (2,2); car 1's upstream (3,1)
    // is unallocated, so (2,1) stays empty
    AgentId j2 = 1;
    REQUIRE(g.agent_public_id(j2) == 2);
    Allocation cand = fastest_feasible(g, j2, a);
    CHECK(cand.at(2, 1) == kUnallocated);
    CHECK(cand.at(2, 2) == 5);
}

TEST_CASE("brudr on fig2: PBA reaches the optimum, empty the cascade") {
    GameInstance g(fixture("fig2"), AgentModel::Car);

    SUBCASE("PBA init, id order") {
        SolverConfig cfg;
        cfg.init = InitMode::Pba;
        auto [a, trace] = brudr(g, cfg);
        CHECK(g.is_feasible(a));
        CHECK(total_delay(g, a) == 1);
        CHECK(trace.termination == Termination::NashReached);
    }
    SUBCASE("empty init, id order reproduces the cascade") {
        SolverConfig cfg;
        auto [a, trace] = brudr(g, cfg);
        CHECK(g.is_feasible(a));
        CHECK(total_delay(g, a) == 3);
        // each car committed exactly once
        for (int32_t n : trace.update_counts) CHECK(n == 1);
    }
    SUBCASE("car 2 first grabs the slot and car 1 brakes") {
        SolverConfig cfg;
        cfg.agent_order = {2, 1, 3, 4};
        auto [a, trace] = brudr(g, cfg);
        CHECK(g.is_feasible(a));
        CHECK(total_delay(g, a) == 1);
    }
    SUBCASE("best-update variant stays feasible") {
        SolverConfig cfg;
        cfg.best_update = true;
        auto [a, trace] = brudr(g, cfg);
        CHECK(g.is_feasible(a));
        CHECK(is_nash(g, a, NashSpace::Restricted));
    }
}

TEST_CASE("brudr single car runs to the zero-wait schedule with one update") {
    Scenario s = fixture("fig2");
    s.trips = {s.trips[1]};  // car 2 alone
    for (AgentModel m : {AgentModel::Atomic, AgentModel::Car, AgentModel::Intersection}) {
        GameInstance g(s, m);
        SolverConfig cfg;
        auto [a, trace] = brudr(g, cfg);
        CHECK(g.is_feasible(a));
        CHECK(total_delay(g, a) == 0);
        int32_t commits = std::accumulate(trace.update_counts.begin(), trace.update_counts.end(), 0);
        if (m == AgentModel::Car) CHECK(commits == 1);
    }
}

TEST_CASE("is_nash on the fig2 equilibria") {
    GameInstance g(fixture("fig2"), AgentModel::Car);
    CHECK(is_nash(g, fig2_optimum(g), NashSpace::FullEnumerated));
    CHECK(is_nash(g, fig2_bad_nash(g), NashSpace::FullEnumerated));

    // a gratuitous extra brake is not an equilibrium
    Allocation worse = fig2_optimum(g);
    worse.set(2, 3, 12);
    worse.set(2, 4, 13);
    REQUIRE(g.is_feasible(worse));
    CHECK_FALSE(is_nash(g, worse, NashSpace::FullEnumerated));
    CHECK_FALSE(is_nash(g, worse, NashSpace::Restricted));
}

TEST_CASE("dsa is deterministic and degenerates to brudr") {
    SUBCASE("p=1 with a single agent equals the brudr step") {
        Scenario s = fixture("fig2");
        s.trips = {s.trips[0]};
        GameInstance g(s, AgentModel::Car);
        SolverConfig cfg;
        cfg.dsa = DsaConfig{1.0, 0, 5};
        auto [a, trace] = dsa(g, cfg);
        SolverConfig plain;
        auto [b, trace2] = brudr(g, plain);
        CHECK(a == b);
    }
    SUBCASE("fig2 with seed 42 lands on a feasible NE with delay 1 or 3") {
        GameInstance g(fixture("fig2"), AgentModel::Car);
        SolverConfig cfg;
        cfg.dsa = DsaConfig{0.7, 0, 42};
        auto [a, trace] = dsa(g, cfg);
        CHECK(g.is_feasible(a));
        CHECK(is_nash(g, a, NashSpace::Restricted));
        int64_t d = total_delay(g, a);
        CHECK((d == 1 || d == 3));

        auto [a2, trace2] = dsa(g, cfg);
        CHECK(a == a2);
        CHECK(trace.to_jsonl() == trace2.to_jsonl());
    }
    SUBCASE("no cars terminates immediately") {
        Scenario s = fixture("fig2");
        s.trips.clear();
        GameInstance g(s, AgentModel::Car);
        SolverConfig cfg;
        cfg.dsa = DsaConfig{0.5, 0, 1};
        auto [a, trace] = dsa(g, cfg);
        CHECK(trace.updates.empty());
        CHECK(trace.termination == Termination::NashReached);
    }
}

TEST_CASE("committed updates strictly improve the committing agent") {
    std::mt19937_64 rng(31);
    for (int round = 0; round < 25; ++round) {
        Scenario s = cmmi::testing::random_scenario(rng);
        for (AgentModel m : {AgentModel::Atomic, AgentModel::Car}) {
            GameInstance g(s, m);
            SolverConfig cfg;
            cfg.init = rng() % 2 ? InitMode::Empty : InitMode::Pba;
            auto [a, trace] = brudr(g, cfg);
            for (const UpdateRecord& rec : trace.updates) {
                CHECK(rec.cost_after < rec.cost_before);
            }
            CHECK(is_nash(g, a, NashSpace::Restricted));
        }
    }
}

TEST_CASE("LEMMA 3 regime: feasible with at most one update per agent") {
    std::mt19937_64 rng(47);
    for (int round = 0; round < 40; ++round) {
        Scenario s = cmmi::testing::random_scenario(rng, 5, /*bind_bounds=*/false);
        for (AgentModel m : {AgentModel::Atomic, AgentModel::Car}) {
            GameInstance g(s, m);
            SolverConfig cfg;
            auto [a, trace] = brudr(g, cfg);
            CHECK(g.is_feasible(a));
            for (int32_t n : trace.update_counts) CHECK(n <= 1);
            CHECK(trace.termination == Termination::NashReached);
        }
    }
}

TEST_CASE("candidate evaluations respect the polynomial bound") {
    std::mt19937_64 rng(53);
    for (int round = 0; round < 15; ++round) {
        Scenario s = cmmi::testing::random_scenario(rng, 5, /*bind_bounds=*/false);
        GameInstance g(s, AgentModel::Car);
        SolverConfig cfg;
        auto [a, trace] = brudr(g, cfg);
        int64_t T = s.horizon;
        int64_t I = static_cast<int64_t>(s.network.intersections.size());
        int64_t K = static_cast<int64_t>(s.trips.size());
        int64_t commits = 0;
        for (int32_t n : trace.update_counts) commits += n;
        CHECK(trace.candidate_evals <= (commits + 1) * (T + 1) * I * K);
    }
}

TEST_CASE("trace serializes one record per line") {
    GameInstance g(fixture("fig2"), AgentModel::Car);
    SolverConfig cfg;
    auto [a, trace] = brudr(g, cfg);
    std::string jsonl = trace.to_jsonl();
    size_t lines = std::count(jsonl.begin(), jsonl.end(), '\n');
    CHECK(lines == trace.updates.size() + 1);  // updates + summary line
    CHECK(jsonl.find("\"agent\":\"car:1\"") != std::string::npos);
    CHECK(jsonl.find("NashReached") != std::string::npos);
}
