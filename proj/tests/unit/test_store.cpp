#include <doctest.h>

#include "builders.hpp"

#include "ivf/core/error.hpp"
#include "ivf/rules/engine.hpp"
#include "ivf/store/cycle_store.hpp"

#include <algorithm>
#include <filesystem>
#include <random>

using namespace ivf;
using namespace ivf::store;

namespace {

visit_record basic_visit(const std::string& pid, int offset, int cycle = 1) {
    return test::visit(pid, offset, test::panel(8, 5, 40, 0.5), test::exam({{6, 8}}), cycle);
}

errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ivf_error& e) {
        return e.code();
    }
    FAIL("expected an ivf_error");
    return errc::invalid_argument;
}

}  // namespace

TEST_CASE("put_visit writes one blood and one ultrasound row") {
    cycle_store s;
    s.put_patient(test::profile("p1", 35));
    const auto ids = s.put_visit(basic_visit("p1", 0));
    CHECK(ids.blood_id > 0);
    CHECK(ids.ultrasound_id > 0);
    const auto doc = s.export_json();
    CHECK(doc.at("blood_tests").size() == 1);
    CHECK(doc.at("ultrasound_tests").size() == 1);
    CHECK(doc.at("treatments").empty());
}

TEST_CASE("store integrity errors") {
    cycle_store s;
    CHECK(code_of([&] { s.put_visit(basic_visit("ghost", 0)); }) == errc::missing_patient);
    s.put_patient(test::profile("p1", 35));
    CHECK(code_of([&] { s.put_patient(test::profile("p1", 40)); }) == errc::duplicate_row);
    s.put_visit(basic_visit("p1", 0));
    CHECK(code_of([&] { s.put_visit(basic_visit("p1", 0)); }) == errc::duplicate_row);

    auto bad = basic_visit("p1", 1);
    bad.panel.p4.reset();
    CHECK(code_of([&] { s.put_visit(bad); }) == errc::invalid_visit);
    CHECK(code_of([&] { s.put_retrieval({"ghost", 1, test::day(3), 2}); }) ==
          errc::missing_patient);

    // failed writes leave nothing behind
    const auto doc = s.export_json();
    CHECK(doc.at("blood_tests").size() == 1);
    CHECK(doc.at("ultrasound_tests").size() == 1);
}

TEST_CASE("list_cycle is date-ascending regardless of insertion order") {
    cycle_store s;
    s.put_patient(test::profile("p1", 35));
    s.put_patient(test::profile("p2", 30));
    std::vector<int> offsets{7, 2, 9, 0, 5};
    for (const int o : offsets) {
        s.put_visit(basic_visit("p1", o));
        s.put_visit(basic_visit("p2", o + 1));
    }
    s.put_visit(basic_visit("p1", 3, 2));
    const auto cycle = s.list_cycle("p1", 1);
    REQUIRE(cycle.size() == offsets.size());
    for (std::size_t i = 1; i < cycle.size(); ++i) {
        CHECK(cycle[i - 1].visit.visit_date < cycle[i].visit.visit_date);
    }
    CHECK(cycle[0].visit == basic_visit("p1", 0));
    CHECK(s.list_cycle("p1", 2).size() == 1);
    CHECK(s.list_cycle("p1", 7).empty());
    CHECK(s.list_cycle("nobody", 1).empty());
    CHECK(s.list_cycles().size() == 3);
}

TEST_CASE("engine advice and retrieval outcomes") {
    cycle_store s;
    s.put_patient(test::profile("p1", 35));
    const auto v = basic_visit("p1", 0);
    s.put_visit(v);
    const rules::engine eng;
    const auto step = eng.advise(cycle_state::fresh(test::profile("p1", 35)), v);
    s.put_treatment("p1", 1, v.visit_date, step.output);
    CHECK(code_of([&] { s.put_treatment("p1", 1, v.visit_date, step.output); }) ==
          errc::duplicate_row);

    const auto cycle = s.list_cycle("p1", 1);
    REQUIRE(cycle.size() == 1);
    REQUIRE(cycle[0].treatments.size() == 1);
    const auto& t = cycle[0].treatments[0];
    CHECK(t.source == treatment_source::engine);
    CHECK(t.verdict == step.output.verdict);
    CHECK(t.config_hash == eng.config_hash());
    CHECK(json::parse(t.advice_json).get<advice>() == step.output);
    CHECK_FALSE(cycle[0].visit.doctor_decision.has_value());

    advice retrieval;
    retrieval.verdict = decision::of(decision_type::oocyte_retrieval);
    s.put_visit(basic_visit("p1", 12));
    s.put_treatment("p1", 1, test::day(12), retrieval, 7);
    const auto r = s.list_retrievals();
    REQUIRE(r.size() == 1);
    CHECK(r[0] == retrieval_record{"p1", 1, test::day(12), 7});
    CHECK(s.to_dataset().oocytes("p1", 1) == 7);

    // a count on a non-retrieval decision is ignored
    s.put_visit(basic_visit("p1", 13));
    s.put_treatment("p1", 1, test::day(13), step.output, 4);
    CHECK(s.list_retrievals().size() == 1);
}

TEST_CASE("doctor decisions ride along with the visit") {
    cycle_store s;
    s.put_patient(test::profile("p1", 35));
    auto v = basic_visit("p1", 0);
    v.doctor_decision = decision::of(decision_type::md_talk);
    s.put_visit(v);
    const auto cycle = s.list_cycle("p1", 1);
    REQUIRE(cycle.size() == 1);
    CHECK(cycle[0].visit == v);
    REQUIRE(cycle[0].treatments.size() == 1);
    CHECK(cycle[0].treatments[0].source == treatment_source::doctor);
}

TEST_CASE("export and import round-trip, independent of insertion order") {
    std::mt19937 rng(5);
    std::vector<visit_record> visits;
    for (int p = 0; p < 4; ++p) {
        for (int d = 0; d < 6; ++d) {
            auto v = basic_visit("p" + std::to_string(p), d * 2, 1 + d / 4);
            v.panel.e2 = analyte_reading{40.0 + d * 13.37, analyte_flag::exact};
            v.panel.p4 = analyte_reading{0.2, analyte_flag::below_detection};
            if (d == 1) v.doctor_decision = decision::start_stimulation(scheme::mini_ivf);
            visits.push_back(v);
        }
    }
    auto fill = [&](cycle_store& s, std::vector<visit_record> order) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int p = 3; p >= 0; --p) s.put_patient(test::profile("p" + std::to_string(p), 30 + p));
        for (const auto& v : order) s.put_visit(v);
        s.put_retrieval({"p2", 1, test::day(20), 5});
    };
    cycle_store a, b;
    fill(a, visits);
    fill(b, visits);
    const auto exported = a.export_json();
    CHECK(exported.dump() == b.export_json().dump());

    cycle_store c;
    c.import_json(exported);
    CHECK(c.export_json().dump() == exported.dump());
    CHECK(c.to_dataset() == a.to_dataset());

    // importing the same document twice fails atomically
    CHECK(code_of([&] { c.import_json(exported); }) == errc::duplicate_row);
    CHECK(c.export_json().dump() == exported.dump());

    cycle_store d;
    d.import_dataset(a.to_dataset());
    CHECK(d.to_dataset() == a.to_dataset());
}

TEST_CASE("file-backed store persists across connections") {
    const auto path = std::filesystem::temp_directory_path() / "ivf_store_test.sqlite";
    std::filesystem::remove(path);
    {
        cycle_store s(path.string());
        s.put_patient(test::profile("p1", 35));
        s.put_visit(basic_visit("p1", 0));
    }
    {
        cycle_store s(path.string());
        CHECK(s.get_patient("p1") == test::profile("p1", 35));
        CHECK(s.list_cycle("p1", 1).size() == 1);
    }
    std::filesystem::remove(path);
}
