#include "cmmi/network.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cmmi {

using nlohmann::json;

TimeStep RoadNetwork::edge_len(IntersectionId from, IntersectionId to) const {
    auto it = edges.find(Edge{from, to});
    if (it == edges.end()) {
        throw std::invalid_argument("no edge (" + std::to_string(from) + "," +
                                    std::to_string(to) + ")");
    }
    return it->second;
}

std::vector<Edge> RoadNetwork::in_edges(IntersectionId i) const {
    std::vector<Edge> out;
    for (const auto& [e, len] : edges) {
        (void)len;
        if (e.to == i) out.push_back(e);
    }
    return out;
}

std::vector<Edge> RoadNetwork::out_edges(IntersectionId i) const {
    std::vector<Edge> out;
    for (const auto& [e, len] : edges) {
        (void)len;
        if (e.from == i) out.push_back(e);
    }
    return out;
}

IntersectionId predecessor(const Trip& trip, IntersectionId i) {
    auto it = std::find(trip.route.begin(), trip.route.end(), i);
    if (it == trip.route.end()) {
        throw std::invalid_argument("intersection " + std::to_string(i) +
                                    " not on route of car " + std::to_string(trip.id));
    }
    if (it == trip.route.begin()) {
        throw std::invalid_argument("intersection " + std::to_string(i) +
                                    " is the origin of car " + std::to_string(trip.id));
    }
    return *(it - 1);
}

std::vector<Path> paths_at(const RoadNetwork& net, IntersectionId i) {
    std::vector<Path> paths;
    for (const Edge& in : net.in_edges(i)) {
        for (const Edge& out : net.out_edges(i)) {
            paths.push_back(Path{in.from, out.to, false});
        }
    }
    for (const Edge& out : net.out_edges(i)) {
        paths.push_back(Path{-1, out.to, true});
    }
    return paths;
}

namespace {

void check_crossing_sets(const Scenario& s, ValidationReport& report) {
    for (const auto& [i, sets] : s.network.crossing) {
        if (!s.network.intersections.count(i)) {
            report.violations.push_back(
                {"crossing_unknown_intersection",
                 "crossing sets given for undeclared intersection " + std::to_string(i)});
            continue;
        }
        for (const auto& set : sets) {
            for (const Path& p : set) {
                bool ok = p.departure
                              ? s.network.has_edge(i, p.to)
                              : s.network.has_edge(p.from, i) && s.network.has_edge(i, p.to);
                if (!ok) {
                    std::ostringstream msg;
                    msg << "crossing path at " << i << " uses non-incident edges (";
                    if (p.departure)
                        msg << "dep," << p.to;
                    else
                        msg << p.from << "," << p.to;
                    msg << ")";
                    report.violations.push_back({"crossing_bad_path", msg.str()});
                }
            }
        }
    }
}

}  // namespace

ValidationReport validate_scenario(const Scenario& s) {
    ValidationReport report;

    for (const auto& [e, len] : s.network.edges) {
        if (!s.network.intersections.count(e.from) || !s.network.intersections.count(e.to)) {
            report.violations.push_back(
                {"edge_unknown_endpoint", "edge (" + std::to_string(e.from) + "," +
                                              std::to_string(e.to) +
                                              ") has an undeclared endpoint"});
        }
        if (len < 1) {
            report.violations.push_back(
                {"edge_nonpositive_length", "edge (" + std::to_string(e.from) + "," +
                                                std::to_string(e.to) + ") has length " +
                                                std::to_string(len)});
        }
    }

    check_crossing_sets(s, report);

    if (s.wait_bound < 0) {
        report.violations.push_back({"bad_wait_bound", "T_UB must be >= 0"});
    }
    if (s.edge_capacity < 1) {
        report.violations.push_back({"bad_edge_capacity", "K_UB must be >= 1"});
    }

    std::set<CarId> seen;
    for (const Trip& trip : s.trips) {
        const std::string car = "car " + std::to_string(trip.id);
        if (!seen.insert(trip.id).second) {
            report.violations.push_back({"duplicate_car_id", "duplicate " + car});
        }
        if (trip.route.size() < 2) {
            report.violations.push_back({"short_route", car + " route has fewer than 2 intersections"});
            continue;
        }
        std::set<IntersectionId> visited;
        bool simple = true;
        for (IntersectionId i : trip.route) {
            if (!s.network.intersections.count(i)) {
                report.violations.push_back(
                    {"route_unknown_intersection",
                     car + " route visits undeclared intersection " + std::to_string(i)});
            }
            if (!visited.insert(i).second) simple = false;
        }
        if (!simple) {
            report.violations.push_back({"route_revisit", car + " route revisits an intersection"});
        }
        TimeStep travel = 0;
        for (size_t l = 0; l + 1 < trip.route.size(); ++l) {
            Edge e{trip.route[l], trip.route[l + 1]};
            auto it = s.network.edges.find(e);
            if (it == s.network.edges.end()) {
                report.violations.push_back(
                    {"missing_edge", car + " route needs missing edge (" +
                                         std::to_string(e.from) + "," + std::to_string(e.to) + ")"});
            } else {
                travel += it->second;
            }
        }
        if (trip.depart < 0) {
            report.violations.push_back({"negative_departure", car + " departs before t=0"});
        }
        if (trip.depart > s.horizon) {
            report.violations.push_back({"late_departure", car + " departs after the horizon"});
        } else if (trip.depart + travel > s.horizon) {
            report.violations.push_back(
                {"route_exceeds_horizon", car + " route cannot complete by horizon even at zero wait"});
        }
    }
    return report;
}

std::vector<CrossingSet> default_crossing_sets(const RoadNetwork& net, IntersectionId i,
                                               CrossingMode mode) {
    if (!net.intersections.count(i)) {
        throw std::invalid_argument("unknown intersection " + std::to_string(i));
    }
    if (mode == CrossingMode::AllCrossing) {
        return {paths_at(net, i)};
    }

    // FourWay: arms are the neighbours in ascending id, treated as a cyclic
    // (clockwise) arrangement; arm g is opposite arm g+2. Straight from g
    // exits g+2, a left turn exits g+1, a right turn exits g+3. Conflict
    // table: each straight crosses the two perpendicular straights; each
    // left turn crosses the opposing straight and the opposing left.
    std::vector<Edge> in = net.in_edges(i);
    std::vector<Edge> out = net.out_edges(i);
    if (in.size() != 4 || out.size() != 4) {
        throw std::invalid_argument("fourway crossing sets need exactly 4 in and 4 out edges at " +
                                    std::to_string(i));
    }
    std::set<IntersectionId> in_nbr, out_nbr;
    for (const Edge& e : in) in_nbr.insert(e.from);
    for (const Edge& e : out) out_nbr.insert(e.to);
    if (in_nbr != out_nbr) {
        throw std::invalid_argument("fourway crossing sets need matching in/out neighbours at " +
                                    std::to_string(i));
    }
    std::vector<IntersectionId> arm(in_nbr.begin(), in_nbr.end());

    auto straight = [&](int g) { return Path{arm[g], arm[(g + 2) % 4], false}; };
    auto left = [&](int g) { return Path{arm[g], arm[(g + 1) % 4], false}; };

    std::vector<CrossingSet> sets;
    for (int g = 0; g < 4; ++g) {
        sets.push_back({straight(g), straight((g + 1) % 4), straight((g + 3) % 4)});
    }
    for (int g = 0; g < 4; ++g) {
        sets.push_back({left(g), straight((g + 2) % 4), left((g + 2) % 4)});
    }
    return sets;
}

namespace {

json path_to_json(const Path& p) {
    if (p.departure) return json::array({"dep", p.to});
    return json::array({p.from, p.to});
}

Path path_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) {
        throw std::invalid_argument("path must be a 2-element array");
    }
    Path p;
    if (j[0].is_string()) {
        if (j[0].get<std::string>() != "dep") {
            throw std::invalid_argument("path head must be an intersection id or \"dep\"");
        }
        p.departure = true;
    } else {
        p.from = j[0].get<IntersectionId>();
    }
    p.to = j[1].get<IntersectionId>();
    return p;
}

template <typename T>
T require_field(const json& j, const char* key) {
    if (!j.contains(key)) {
        throw std::invalid_argument(std::string("missing field \"") + key + "\"");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("field \"") + key + "\": " + e.what());
    }
}

}  // namespace

Scenario load_scenario(const std::string& text, bool strict) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("scenario parse error: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("scenario must be a JSON object");

    static const std::set<std::string> known = {"intersections", "edges", "crossing",
                                                "trips",         "T",     "T_UB",
                                                "K_UB"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) {
            throw std::invalid_argument("unknown field \"" + it.key() + "\"");
        }
    }

    Scenario s;
    for (IntersectionId i : require_field<std::vector<IntersectionId>>(j, "intersections")) {
        s.network.intersections.insert(i);
    }
    for (const json& je : j.contains("edges") ? j.at("edges") : json::array()) {
        Edge e{require_field<IntersectionId>(je, "from"), require_field<IntersectionId>(je, "to")};
        TimeStep len = require_field<TimeStep>(je, "len");
        if (len < 1) {
            throw std::invalid_argument("edge (" + std::to_string(e.from) + "," +
                                        std::to_string(e.to) + ") has non-positive length");
        }
        s.network.edges[e] = len;
    }
    if (j.contains("crossing")) {
        for (auto it = j.at("crossing").begin(); it != j.at("crossing").end(); ++it) {
            IntersectionId i = 0;
            try {
                i = static_cast<IntersectionId>(std::stol(it.key()));
            } catch (const std::exception&) {
                throw std::invalid_argument("crossing key \"" + it.key() +
                                            "\" is not an intersection id");
            }
            std::vector<CrossingSet> sets;
            for (const json& jset : it.value()) {
                CrossingSet set;
                for (const json& jp : jset) set.push_back(path_from_json(jp));
                sets.push_back(std::move(set));
            }
            s.network.crossing[i] = std::move(sets);
        }
    }
    for (const json& jt : j.contains("trips") ? j.at("trips") : json::array()) {
        Trip t;
        t.id = require_field<CarId>(jt, "id");
        t.route = require_field<std::vector<IntersectionId>>(jt, "route");
        t.depart = require_field<TimeStep>(jt, "depart");
        s.trips.push_back(std::move(t));
    }
    s.horizon = require_field<TimeStep>(j, "T");
    s.wait_bound = require_field<TimeStep>(j, "T_UB");
    s.edge_capacity = require_field<int32_t>(j, "K_UB");

    if (strict) {
        ValidationReport report = validate_scenario(s);
        if (!report.ok()) {
            std::ostringstream msg;
            msg << "invalid scenario:";
            for (const Violation& v : report.violations) msg << " [" << v.code << "] " << v.message;
            throw std::invalid_argument(msg.str());
        }
    }
    return s;
}

std::string save_scenario(const Scenario& s) {
    json j;
    j["intersections"] = std::vector<IntersectionId>(s.network.intersections.begin(),
                                                     s.network.intersections.end());
    json edges = json::array();
    for (const auto& [e, len] : s.network.edges) {
        edges.push_back({{"from", e.from}, {"to", e.to}, {"len", len}});
    }
    j["edges"] = std::move(edges);
    if (!s.network.crossing.empty()) {
        json crossing = json::object();
        for (const auto& [i, sets] : s.network.crossing) {
            json jsets = json::array();
            for (const CrossingSet& set : sets) {
                json jset = json::array();
                for (const Path& p : set) jset.push_back(path_to_json(p));
                jsets.push_back(std::move(jset));
            }
            crossing[std::to_string(i)] = std::move(jsets);
        }
        j["crossing"] = std::move(crossing);
    }
    json trips = json::array();
    for (const Trip& t : s.trips) {
        trips.push_back({{"id", t.id}, {"route", t.route}, {"depart", t.depart}});
    }
    j["trips"] = std::move(trips);
    j["T"] = s.horizon;
    j["T_UB"] = s.wait_bound;
    j["K_UB"] = s.edge_capacity;
    return j.dump(2) + "\n";
}

}  // namespace cmmi
