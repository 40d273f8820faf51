#include <doctest.h>

#include "builders.hpp"
#include "replay_fixture.hpp"

#include "ivf/service/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <thread>

using namespace ivf;
using namespace ivf::service;

namespace {

const std::string token = "s3cret";

request make(std::string method, std::string path, std::string body = {},
             std::map<std::string, std::string> query = {}) {
    return request{std::move(method), std::move(path), std::move(query), std::move(body),
                   "Bearer " + token};
}

json visit_body(const visit_record& v) {
    json j = v;
    j.erase("doctor_decision");
    j.erase("doctor_prescription");
    return j;
}

struct fixture {
    store::cycle_store db;
    advisory_service svc{db, rules::engine{}, token};

    response call(const request& r) { return svc.handle(r); }
    json ok(const request& r, int status) {
        const auto res = call(r);
        REQUIRE_MESSAGE(res.status == status, res.body);
        return json::parse(res.body);
    }
};

}  // namespace

TEST_CASE("authentication and routing") {
    fixture f;
    CHECK(f.call({"GET", "/health", {}, {}, {}}).status == 200);
    CHECK(f.call({"GET", "/export", {}, {}, {}}).status == 401);
    CHECK(f.call({"GET", "/export", {}, {}, "Bearer nope"}).status == 401);
    CHECK(f.call(make("GET", "/export")).status == 200);
    CHECK(f.call(make("GET", "/nowhere")).status == 404);
    CHECK(f.call(make("GET", "/patients/p1/cycles/zero")).status == 400);
}

TEST_CASE("patients and visits") {
    fixture f;
    const auto created = f.ok(make("POST", "/patients", json(test::profile("p1", 35)).dump()), 201);
    CHECK(created.at("patient_id") == "p1");
    CHECK(f.call(make("POST", "/patients", json(test::profile("p1", 35)).dump())).status == 409);
    const auto bad = f.call(make("POST", "/patients", R"({"patient_id":"p2","age":12})"));
    CHECK(bad.status == 400);
    CHECK(json::parse(bad.body).at("violations").size() == 1);
    CHECK(f.call(make("POST", "/patients", "{not json")).status == 400);
    CHECK(f.ok(make("GET", "/patients/p1"), 200).at("age") == 35);
    CHECK(f.call(make("GET", "/patients/ghost")).status == 404);

    const auto v = test::visit("p1", 0, test::panel(8, 4, 30, 0.5), test::exam({{6, 12}}));
    const auto ghost = f.call(make("POST", "/visits", visit_body(test::visit(
        "ghost", 0, test::panel(8, 4, 30, 0.5), test::exam({{6, 12}}))).dump()));
    CHECK(ghost.status == 404);
    CHECK(json::parse(ghost.body).at("error") == "missing-patient");

    auto garbage = visit_body(v);
    garbage["panel"]["fsh"] = "12 apples";
    const auto bad_visit = f.call(make("POST", "/visits", garbage.dump()));
    CHECK(bad_visit.status == 400);
    CHECK(json::parse(bad_visit.body).at("error") == "unparseable");
    CHECK(json::parse(bad_visit.body).at("message").get<std::string>().find("apples") !=
          std::string::npos);

    const auto ids = f.ok(make("POST", "/visits", visit_body(v).dump()), 201);
    CHECK(ids.at("blood_test_id").get<long long>() > 0);
    CHECK(f.call(make("POST", "/visits", visit_body(v).dump())).status == 409);
    CHECK(f.db.list_treatments().empty());  // /visits never runs the engine
}

TEST_CASE("raw lab strings are accepted in visit bodies") {
    const auto v = visit_from_request(json::parse(R"({
        "patient_id": "p1", "visit_date": "2024-03-01",
        "panel": {"fsh": "9,5", "lh": "<2", "e2": "367.1 pmol/L", "p4": 0.4},
        "exam": "15x3, 12x2"})"));
    CHECK(v.panel.fsh == analyte_reading{9.5, analyte_flag::exact});
    CHECK(v.panel.lh == analyte_reading{2.0, analyte_flag::below_detection});
    CHECK(v.panel.e2->value == doctest::Approx(100.0));
    CHECK(v.exam.bins == std::map<int, int>{{15, 3}, {12, 2}});
    CHECK(v.panel.drawn_at == at_time(v.visit_date, 8));
    CHECK(validate_visit(v).empty());
}

TEST_CASE("advice endpoint") {
    fixture f;
    f.ok(make("POST", "/patients", json(test::profile("p1", 35)).dump()), 201);
    const auto first = test::visit("p1", 0, test::panel(16, 4, 30, 0.5), test::exam({{6, 12}}));
    const std::string path = "/patients/p1/cycles/1/advice";

    SUBCASE("dry run is pure") {
        const auto before = f.db.export_json().dump();
        const auto a = f.call(make("POST", path, visit_body(first).dump(), {{"dry_run", "true"}}));
        const auto b = f.call(make("POST", path, visit_body(first).dump(), {{"dry_run", "true"}}));
        CHECK(a.status == 200);
        CHECK(a.body == b.body);
        CHECK(f.db.export_json().dump() == before);
    }

    SUBCASE("first preparation visit failing the table") {
        const auto r = f.ok(make("POST", path, visit_body(first).dump()), 201);
        CHECK(r.at("advice").at("decision").at("kind") == "ContinueOCP");
        const int days = r.at("state").at("next_visit_in_days");
        CHECK(days >= 5);
        CHECK(days <= 9);
        CHECK(r.at("state").at("block") == "B1");
        CHECK(r.at("config_hash") == f.svc.engine().config_hash());
        CHECK(r.at("patient").at("age") == 35);
        REQUIRE(f.db.list_treatments().size() == 1);
        CHECK(json::parse(f.db.list_treatments()[0].advice_json) == r.at("advice"));

        auto earlier = test::visit("p1", -3, test::panel(16, 4, 30, 0.5), test::exam({{6, 12}}));
        const auto stale = f.call(make("POST", path, visit_body(earlier).dump()));
        CHECK(stale.status == 409);
        CHECK(json::parse(stale.body).at("error") == "stale-visit");
        CHECK(f.call(make("POST", path, visit_body(first).dump())).status == 409);
    }

    SUBCASE("unknown patient and mismatched body") {
        auto anonymous = visit_body(first);
        anonymous.erase("patient_id");
        CHECK(f.call(make("POST", "/patients/ghost/cycles/1/advice",
                          anonymous.dump())).status == 404);
        auto other = visit_body(first);
        other["patient_id"] = "p9";
        CHECK(f.call(make("POST", path, other.dump())).status == 400);
    }
}

TEST_CASE("a full cycle through the service, then the terminal state") {
    fixture f;
    const auto fx = test::make_replay_fixture();
    f.ok(make("POST", "/patients", json(fx.profile).dump()), 201);
    const std::string path = "/patients/FX1/cycles/1/advice";
    std::vector<std::string> decisions;
    for (const auto& v : fx.visits) {
        auto body = visit_body(v);
        const auto r = f.ok(make("POST", path, body.dump()), 201);
        decisions.push_back(r.at("advice").at("decision").at("kind").get<std::string>());
        if (decisions.back() == "CycleComplete") break;
    }
    CHECK(decisions.front() == "ContinueOCP");
    CHECK(decisions.back() == "CycleComplete");
    CHECK(std::count(decisions.begin(), decisions.end(), "Trigger") == 1);

    const auto hist = f.ok(make("GET", "/patients/FX1/cycles/1"), 200);
    CHECK(hist.at("visits").size() == decisions.size());
    CHECK(hist.at("state").at("block") == "Done");
    for (std::size_t i = 1; i < hist.at("visits").size(); ++i) {
        CHECK(hist["visits"][i - 1]["visit"]["visit_date"] < hist["visits"][i]["visit"]["visit_date"]);
    }
    CHECK(f.ok(make("GET", "/patients/FX1/cycles/2"), 200).at("visits").empty());

    const auto later = test::visit("FX1", 40, test::panel(8, 4, 30, 0.5), test::exam({{6, 12}}));
    const auto gone = f.call(make("POST", path, visit_body(later).dump()));
    CHECK(gone.status == 410);
}

TEST_CASE("request log replays to identical treatment rows") {
    const auto fx = test::make_replay_fixture();
    std::vector<request> log;
    log.push_back(make("POST", "/patients", json(fx.profile).dump()));
    log.push_back(make("POST", "/patients", json(test::profile("P2", 43)).dump()));
    for (const auto& v : fx.visits) {
        log.push_back(make("POST", "/patients/FX1/cycles/1/advice", visit_body(v).dump(),
                           {{"dry_run", "true"}}));
        log.push_back(make("POST", "/patients/FX1/cycles/1/advice", visit_body(v).dump()));
        auto other = v;
        other.patient_id = "P2";
        log.push_back(make("POST", "/patients/P2/cycles/1/advice", visit_body(other).dump()));
    }
    auto run = [&](store::cycle_store& db) {
        advisory_service svc(db, rules::engine{}, token);
        std::vector<std::string> bodies;
        for (const auto& r : log) bodies.push_back(svc.handle(r).body);
        return bodies;
    };
    store::cycle_store a, b;
    const auto ra = run(a);
    const auto rb = run(b);
    CHECK(ra == rb);
    CHECK(json(a.list_treatments()).dump() == json(b.list_treatments()).dump());
    CHECK(a.export_json().dump() == b.export_json().dump());
    CHECK(a.list_treatments().size() >= 10);
}

TEST_CASE("replay endpoint") {
    fixture f;
    const auto r = f.ok(make("POST", "/replay",
                             R"({"synthetic": {"seed": 3, "patients": 60, "leniency": 0}})"), 200);
    for (const auto& [name, row] : r.at("intra_block").items()) {
        if (row.at("total") > 0) CHECK_MESSAGE(row.at("accuracy") == 1.0, name);
    }
    for (const auto& [name, row] : r.at("transitions").items()) {
        if (row.at("total") > 0) CHECK_MESSAGE(row.at("accuracy") == 1.0, name);
    }
    CHECK(f.call(make("POST", "/replay", R"({"synthetic": {"patients": 0}})")).status == 400);
    CHECK(f.call(make("POST", "/replay", R"({"synthetic": "leniency=7"})")).status == 400);
    CHECK(f.call(make("POST", "/replay", R"({"format": "xml"})")).status == 400);
    const auto table = f.call(make("POST", "/replay", R"({"format": "table"})"));
    CHECK(table.status == 200);
    CHECK(table.content_type == "text/plain");
    CHECK(f.ok(make("POST", "/replay", "{}"), 200).at("cycles") == 0);
}

TEST_CASE("concurrent advice: one winner per visit, independent cycles proceed") {
    fixture f;
    constexpr int patients = 8;
    constexpr int racers = 6;
    for (int i = 0; i < patients; ++i) {
        f.ok(make("POST", "/patients", json(test::profile("c" + std::to_string(i), 33)).dump()), 201);
    }
    std::vector<std::vector<int>> statuses(patients, std::vector<int>(racers));
    std::vector<std::thread> threads;
    for (int i = 0; i < patients; ++i) {
        for (int r = 0; r < racers; ++r) {
            threads.emplace_back([&, i, r] {
                const auto pid = "c" + std::to_string(i);
                const auto body = visit_body(test::visit(pid, 0, test::panel(8, 4, 30, 0.5),
                                                         test::exam({{6, 12}})));
                statuses[i][r] =
                    f.call(make("POST", "/patients/" + pid + "/cycles/1/advice", body.dump())).status;
            });
        }
    }
    for (auto& t : threads) t.join();
    for (int i = 0; i < patients; ++i) {
        const auto& s = statuses[i];
        CHECK(std::count(s.begin(), s.end(), 201) == 1);
        CHECK(std::count(s.begin(), s.end(), 409) == racers - 1);
        const auto hist = f.ok(make("GET", "/patients/c" + std::to_string(i) + "/cycles/1"), 200);
        CHECK(hist.at("visits").size() == 1);
        CHECK(hist.at("visits")[0].at("treatments").size() == 1);
    }
}

TEST_CASE("the same contract over a real socket") {
    store::cycle_store db;
    advisory_service svc(db, rules::engine{}, token);
    http_server server(svc);
    const int port = server.bind("127.0.0.1", 0);
    std::thread loop([&] { server.run(); });

    httplib::Client client("127.0.0.1", port);
    const httplib::Headers auth{{"Authorization", "Bearer " + token}};
    const auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(client.Get("/export")->status == 401);

    const auto created = client.Post("/patients", auth, json(test::profile("p1", 35)).dump(),
                                     "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);

    const auto first = test::visit("p1", 0, test::panel(16, 4, 30, 0.5), test::exam({{6, 12}}));
    const auto body = visit_body(first).dump();
    const auto dry = client.Post("/patients/p1/cycles/1/advice?dry_run=true", auth, body,
                                 "application/json");
    REQUIRE(dry);
    CHECK(dry->status == 200);
    CHECK(dry->body == svc.handle(make("POST", "/patients/p1/cycles/1/advice", body,
                                       {{"dry_run", "true"}})).body);
    const auto real = client.Post("/patients/p1/cycles/1/advice", auth, body, "application/json");
    REQUIRE(real);
    CHECK(real->status == 201);
    CHECK(real->get_header_value("Content-Type") == "application/json");
    CHECK(db.list_treatments().size() == 1);

    server.stop();
    loop.join();
}
