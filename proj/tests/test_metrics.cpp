#include <random>

#include "cmmi/exact.hpp"
#include "cmmi/metrics.hpp"
#include "cmmi/simgen.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cmmi;
using cmmi::testing::fig2_optimum;

TEST_CASE("gini of the fig2 optimum") {
    GameInstance g(fixture("fig2"), AgentModel::Car);
    Allocation opt = fig2_optimum(g);
    CHECK(gini(g, opt) == doctest::Approx(0.75));  // D = (1,0,0,0)

    SUBCASE("equal positive delays are perfectly fair") {
        // every car braked once in the bad cascade except car 1
        Scenario s = fixture("fig2");
        s.trips = {s.trips[2], s.trips[3]};  // the platoon alone
        GameInstance g2(s, AgentModel::Car);
        Allocation a = g2.empty_allocation();
        a.set(4, 3, 2);  // both depart one step late
        a.set(1, 3, 7);
        a.set(2, 3, 12);
        a.set(4, 4, 3);
        a.set(1, 4, 8);
        a.set(2, 4, 13);
        REQUIRE(g2.is_feasible(a));
        CHECK(gini(g2, a) == doctest::Approx(0.0));
    }
    SUBCASE("zero total delay is defined as zero") {
        Scenario s = fixture("fig2");
        s.trips = {s.trips[1]};
        GameInstance g2(s, AgentModel::Car);
        Allocation a = pba_init(g2);
        CHECK(gini(g2, a) == doctest::Approx(0.0));
    }
    SUBCASE("infeasible input is an error") {
        CHECK_THROWS_AS(gini(g, g.empty_allocation()), std::invalid_argument);
    }
}

TEST_CASE("gini range bound on random feasible outcomes") {
    std::mt19937_64 rng(61);
    for (int round = 0; round < 30; ++round) {
        Scenario s = cmmi::testing::random_scenario(rng, 5, false);
        GameInstance g(s, AgentModel::Car);
        SolverConfig cfg;
        auto [a, trace] = brudr(g, cfg);
        REQUIRE(g.is_feasible(a));
        double value = gini(g, a);
        double k = static_cast<double>(s.trips.size());
        CHECK(value >= 0.0);
        CHECK(value <= 2.0 * (k - 1.0) / k + 1e-12);
    }
}

TEST_CASE("externality of car 2 under the cascade ordering") {
    Scenario s = fixture("fig2");
    SolverConfig cfg;  // empty init, id order reproduces the cascade
    ExternalityResult ex = externality(s, 2, cfg);
    CHECK(ex.base_feasible);
    CHECK(ex.reduced_feasible);
    CHECK(ex.value == 3);  // D drops from 3 to 0 without car 2

    SUBCASE("externality along the cascade chain") {
        ExternalityResult head = externality(s, 1, cfg);
        // without car 1, car 2 passes free and the platoon never brakes
        CHECK(head.value == 3);
        ExternalityResult tail = externality(fixture("fig2_extended:4"), 4, cfg);
        CHECK(tail.value == 1);  // the last follower only brakes itself
    }
    SUBCASE("single car scenario") {
        Scenario one = s;
        one.trips = {one.trips[1]};
        ExternalityResult ex1 = externality(one, 2, cfg);
        CHECK(ex1.value == 0);
    }
    SUBCASE("unknown car is an error") {
        CHECK_THROWS_AS(externality(s, 9, cfg), std::invalid_argument);
    }
}

TEST_CASE("poa_ratio on the fig2 family") {
    PoaResult poa = poa_ratio(fixture("fig2"), AgentModel::Car, Rational::make(1, 1));
    CHECK(poa.ratio == Rational::make(2, 1));  // (3+1)/(1+1)
    CHECK(poa.optimal_delay == 1);
    CHECK(poa.worst_nash_delay == 3);
    CHECK(poa.optimum_is_nash);

    SUBCASE("single car gives ratio one") {
        Scenario s = fixture("fig2");
        s.trips = {s.trips[0]};
        PoaResult one = poa_ratio(s, AgentModel::Car, Rational::make(1, 1));
        CHECK(one.ratio == Rational::make(1, 1));
    }
    SUBCASE("extended family N=5") {
        PoaResult ext = poa_ratio(fixture("fig2_extended:5"), AgentModel::Car, Rational::make(1, 1));
        CHECK(ext.ratio == Rational::make(5, 2));  // (4+1)/(1+1)
    }
}

TEST_CASE("compare_experiment on fig2 configs") {
    std::vector<std::pair<std::string, Scenario>> scenarios = {{"fig2", fixture("fig2")}};
    std::vector<RunConfig> configs;
    configs.push_back({"car+pba", AgentModel::Car, InitMode::Pba, "bru", 0.7, {}});
    configs.push_back({"car+empty", AgentModel::Car, InitMode::Empty, "bru", 0.7, {}});
    Report report = compare_experiment(scenarios, configs, 11);

    REQUIRE(report.records.size() == 2);
    CHECK(report.records[0].feasible);
    CHECK(report.records[0].ratio == doctest::Approx(1.0));
    CHECK(report.records[1].ratio == doctest::Approx(3.0));
    CHECK(report.records[0].delay == 1);
    CHECK(report.records[1].delay == 3);

    std::string csv = report.to_csv();
    CHECK(csv.rfind("scenario,agents,init,mode,seed,feasible,delay,optimal,ratio,gini,updates,evals\n",
                    0) == 0);
    Report again = compare_experiment(scenarios, configs, 11);
    CHECK(again.to_csv() == csv);
    CHECK(again.to_json() == report.to_json());
}

TEST_CASE("compare_experiment ratios dominate one") {
    std::mt19937_64 rng(67);
    std::vector<std::pair<std::string, Scenario>> scenarios;
    for (int n = 0; n < 6; ++n) {
        scenarios.push_back({"s" + std::to_string(n), cmmi::testing::random_scenario(rng, 4, false)});
    }
    std::vector<RunConfig> configs;
    configs.push_back({"car+pba", AgentModel::Car, InitMode::Pba, "bru", 0.7, {}});
    configs.push_back({"atomic+empty", AgentModel::Atomic, InitMode::Empty, "bru", 0.7, {}});
    Report report = compare_experiment(scenarios, configs, 5);
    for (const RunRecord& rec : report.records) {
        REQUIRE(rec.feasible);
        if (rec.ratio) CHECK(*rec.ratio >= 1.0);
    }
    // a parallel run produces the identical report
    Report parallel = compare_experiment(scenarios, configs, 5, 50'000'000, {}, 3);
    CHECK(parallel.to_csv() == report.to_csv());
}

TEST_CASE("rational arithmetic reduces") {
    CHECK(Rational::make(6, 4) == Rational::make(3, 2));
    CHECK(Rational::make(-6, -4) == Rational::make(3, 2));
    CHECK(Rational::make(1, -2).num == -1);
    CHECK(Rational::make(4, 2) < Rational::make(5, 2));
    CHECK_THROWS_AS(Rational::make(1, 0), std::invalid_argument);
}
