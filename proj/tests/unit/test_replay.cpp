#include <doctest.h>

#include "builders.hpp"
#include "replay_fixture.hpp"

#include "ivf/core/error.hpp"
#include "ivf/replay/replay.hpp"
#include "ivf/replay/synth.hpp"

#include <random>

using namespace ivf;
using namespace ivf::replay;

namespace {

std::vector<std::vector<visit_record>> cycles_of(const dataset& d) {
    std::vector<std::vector<visit_record>> out;
    for (const auto& v : d.visits) {
        if (out.empty() || out.back().front().patient_id != v.patient_id ||
            out.back().front().cycle_number != v.cycle_number) {
            out.emplace_back();
        }
        out.back().push_back(v);
    }
    return out;
}

}  // namespace

TEST_CASE("hand-built fixture yields hand-counted scores") {
    const rules::engine eng;
    const auto f = test::make_replay_fixture();
    const auto outcome = replay_cycle(f.visits, f.profile, eng, f.oocytes);
    CHECK(outcome.aborted.empty());
    REQUIRE(outcome.visits.size() == 10);

    const std::vector<bool> matches{true, true, true, true, true, false, true, true, true, false};
    for (std::size_t i = 0; i < matches.size(); ++i) {
        CHECK_MESSAGE(outcome.visits[i].match == matches[i], "visit " << i + 1);
    }

    const auto r = aggregate({outcome});
    CHECK(r.intra[0] == score_row{1, 0, 0, 0});
    CHECK(r.intra[1] == score_row{3, 1, 0, 0});
    CHECK(r.intra[1].accuracy() == 0.75);
    CHECK(r.intra[2] == score_row{1, 0, 0, 0});
    CHECK(r.intra[3] == score_row{1, 0, 0, 0});
    CHECK(r.transitions[0] == score_row{1, 0, 0, 0});
    CHECK(r.transitions[1] == score_row{1, 1, 1, 0});
    CHECK(r.transitions[2] == score_row{1, 0, 0, 0});
    CHECK(r.transitions[3] == score_row{0, 1, 0, 1});
    CHECK(r.early_triggers == std::map<int, int>{{1, 1}});
    CHECK(r.late_triggers == 0);
    REQUIRE(r.md_talk.count(0) == 1);
    CHECK(r.md_talk.at(0).cycles == 1);
    CHECK(r.md_talk.at(0).mean_oocytes() == 6.0);
    CHECK(r.md_talk.at(0).cancelled == 0);
}

TEST_CASE("replay_cycle preconditions and edge cases") {
    const rules::engine eng;
    CHECK(replay_cycle({}, test::profile("p", 35), eng).visits.empty());

    auto f = test::make_replay_fixture();
    auto swapped = f.visits;
    std::swap(swapped[2], swapped[3]);
    CHECK_THROWS_AS((void)replay_cycle(swapped, f.profile, eng), ivf_error);
    try {
        (void)replay_cycle(swapped, f.profile, eng);
    } catch (const ivf_error& e) {
        CHECK(e.code() == errc::unsorted_input);
    }
    auto mixed = f.visits;
    mixed[4].cycle_number = 2;
    try {
        (void)replay_cycle(mixed, f.profile, eng);
        FAIL("expected mixed-cycle");
    } catch (const ivf_error& e) {
        CHECK(e.code() == errc::mixed_cycle);
    }

    // a doctor decision the block does not allow stops the replay
    auto odd = f.visits;
    odd[0].doctor_decision = decision::of(decision_type::oocyte_retrieval);
    const auto o = replay_cycle(odd, f.profile, eng);
    CHECK_FALSE(o.aborted.empty());
    CHECK(o.visits.size() == 1);
    CHECK(o.cancelled);

    // without ground truth a visit is not scored but the cycle still advances
    auto partial = f.visits;
    partial[2].doctor_decision.reset();
    const auto p = replay_cycle(partial, f.profile, eng, 6);
    CHECK(p.aborted.empty());
    CHECK(p.visits.size() == 9);
}

TEST_CASE("engine says Trigger, doctor continues: state stays in B2") {
    const rules::engine eng;
    const auto f = test::make_replay_fixture();
    replay_options opts;
    opts.record_trajectory = true;
    const auto o = replay_cycle(f.visits, f.profile, eng, f.oocytes, opts);
    REQUIRE(o.trajectory.size() == 10);
    CHECK(o.visits[5].predicted == decision_type::trigger);
    CHECK(o.visits[5].truth == decision_type::continue_stimulation);
    CHECK(o.trajectory[5].block == cycle_block::b2);
    CHECK(o.trajectory[6].block == cycle_block::b3);
    CHECK(o.trajectory[9].block == cycle_block::lps);
}

TEST_CASE("empty report has zero totals and no accuracies") {
    const auto r = aggregate({});
    for (const auto& row : r.intra) {
        CHECK(row.total() == 0);
        CHECK_FALSE(row.accuracy().has_value());
    }
    const json j = r;
    CHECK_FALSE(j.at("intra_block").at("B1").contains("accuracy"));
    CHECK(j.at("early_trigger_histogram").empty());
}

TEST_CASE("synthetic cohort is deterministic") {
    const rules::engine eng;
    synth_config cfg;
    cfg.patients = 10;
    const auto a = synth_cohort(cfg, eng);
    const auto b = synth_cohort(42, 10, synth_config{}, eng);
    CHECK(a == b);
    CHECK(json(a).dump() == json(b).dump());
    cfg.seed = 43;
    CHECK_FALSE(synth_cohort(cfg, eng) == a);
    CHECK(a.patients.size() == 10);
    for (const auto& v : a.visits) CHECK(validate_visit(v).empty());
}

TEST_CASE("synthetic config parsing") {
    const auto c = synth_config_from_string("seed=7,patients=500,leniency=0.25,trigger_delay=1-2");
    CHECK(c.seed == 7);
    CHECK(c.patients == 500);
    CHECK(c.leniency == 0.25);
    CHECK(c.trigger_delay_min == 1);
    CHECK(c.trigger_delay_max == 2);
    CHECK(synth_config_from_string("trigger_delay=1").trigger_delay_max == 1);
    for (const char* bad : {"patients=0", "leniency=2", "trigger_delay=2-1", "colour=blue",
                            "seed", "patients=ten", "age=10-30"}) {
        try {
            (void)synth_config_from_string(bad);
            FAIL("accepted " << bad);
        } catch (const ivf_error& e) {
            CHECK(e.code() == errc::invalid_config);
        }
    }
    const json j = c;
    CHECK(j.get<synth_config>() == c);
}

TEST_CASE("leniency 0 replays to exact accuracy 1.0") {
    const rules::engine eng;
    synth_config cfg;
    cfg.patients = 120;
    const auto data = synth_cohort(cfg, eng);
    const auto r = replay_dataset(data, eng, 4);
    CHECK(r.aborted_cycles == 0);
    CHECK(r.cycles == 120);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(r.intra[i].wrong == 0);
        CHECK(r.transitions[i].wrong == 0);
    }
    CHECK(r.intra[1].total() > 0);
    CHECK(r.early_triggers.empty());
    CHECK(r.late_triggers == 0);
}

TEST_CASE("trigger delay shows up only as early triggers") {
    const rules::engine eng;
    for (int delay = 1; delay <= 2; ++delay) {
        synth_config cfg;
        cfg.patients = 120;
        cfg.trigger_delay_min = cfg.trigger_delay_max = delay;
        const auto r = replay_dataset(synth_cohort(cfg, eng), eng);
        REQUIRE(r.early_triggers.size() == 1);
        CHECK(r.early_triggers.begin()->first == delay);
        CHECK(r.late_triggers == 0);
        CHECK(r.transitions[1].late == 0);
        CHECK(r.transitions[1].early > 0);
    }
}

TEST_CASE("correction soundness: predictions never steer the state") {
    const rules::engine eng;
    synth_config cfg;
    cfg.patients = 40;
    cfg.leniency = 0.3;
    cfg.trigger_delay_max = 2;
    const auto data = synth_cohort(cfg, eng);
    std::mt19937 rng(9);
    replay_options honest;
    honest.record_trajectory = true;
    replay_options scrambled = honest;
    scrambled.predict = [&](const cycle_state&, const visit_record&) {
        return decision::of(all_decision_types[rng() % all_decision_types.size()]);
    };
    for (const auto& cycle : cycles_of(data)) {
        const auto* p = data.find_patient(cycle.front().patient_id);
        REQUIRE(p != nullptr);
        const auto a = replay_cycle(cycle, *p, eng, std::nullopt, honest);
        const auto b = replay_cycle(cycle, *p, eng, std::nullopt, scrambled);
        CHECK(a.trajectory == b.trajectory);
        CHECK(a.md_talk_count == b.md_talk_count);
    }
}

TEST_CASE("report is independent of thread count and merge order") {
    const rules::engine eng;
    synth_config cfg;
    cfg.patients = 80;
    cfg.leniency = 0.2;
    cfg.trigger_delay_max = 2;
    const auto data = synth_cohort(cfg, eng);
    const auto one = replay_dataset(data, eng, 1);
    const auto many = replay_dataset(data, eng, 7);
    CHECK(one == many);
    CHECK(json(one).dump() == json(many).dump());
    CHECK(render(one, report_format::table) == render(many, report_format::table));

    std::vector<replay_outcome> outcomes;
    for (const auto& cycle : cycles_of(data)) {
        outcomes.push_back(replay_cycle(cycle, *data.find_patient(cycle.front().patient_id), eng,
                                        data.oocytes(cycle.front().patient_id, 1)));
    }
    auto reversed = outcomes;
    std::reverse(reversed.begin(), reversed.end());
    auto a = aggregate(outcomes, eng.config_hash());
    CHECK(a == aggregate(reversed, eng.config_hash()));
    CHECK(a == one);

    const std::size_t half = outcomes.size() / 2;
    auto left = aggregate({outcomes.begin(), outcomes.begin() + half});
    const auto right = aggregate({outcomes.begin() + half, outcomes.end()});
    auto right_first = right;
    right_first.merge(left);
    left.merge(right);
    left.config_hash = right_first.config_hash = eng.config_hash();
    CHECK(left == a);
    CHECK(right_first == a);

    for (const auto& row : a.intra) CHECK(row.correct + row.wrong == row.total());
}

TEST_CASE("report renderings") {
    const rules::engine eng;
    const auto f = test::make_replay_fixture();
    const auto r = aggregate({replay_cycle(f.visits, f.profile, eng, f.oocytes)}, eng.config_hash());
    const auto table = render(r, report_format::table);
    CHECK(table.find("Accuracy of Intra-block decisions") != std::string::npos);
    CHECK(table.find("Accuracy of Block transitions") != std::string::npos);
    CHECK(table.find("75.00%") != std::string::npos);
    const auto csv = render(r, report_format::csv);
    CHECK(csv.find("intra_block,B2,1,3,4,0.750000,,") != std::string::npos);
    const auto j = json::parse(render(r, report_format::json));
    CHECK(j.at("intra_block").at("B2").at("accuracy") == 0.75);
    CHECK(j.at("early_trigger_histogram") == json{{"1", 1}});
    CHECK(report_format_from_string("table") == report_format::table);
    CHECK_FALSE(report_format_from_string("xml").has_value());
}

TEST_CASE("synthetic cancellation and MD-talk coupling") {
    const rules::engine eng;
    synth_config cfg;
    cfg.patients = 600;
    const auto data = synth_cohort(cfg, eng);
    const auto r = replay_dataset(data, eng);
    int cycles = 0;
    std::optional<double> previous;
    for (const auto& [talks, row] : r.md_talk) {
        cycles += row.cycles;
        CHECK(row.retrieved_cycles + row.cancelled >= row.cycles);
        if (const auto mean = row.mean_oocytes()) {
            if (previous) CHECK_MESSAGE(*mean <= *previous, "md talks " << talks);
            previous = mean;
        }
    }
    CHECK(cycles == 600);
    // a cycle without a retrieval record is cancelled
    for (const auto& cycle : cycles_of(data)) {
        const auto& pid = cycle.front().patient_id;
        const auto o = replay_cycle(cycle, *data.find_patient(pid), eng, data.oocytes(pid, 1));
        if (!data.oocytes(pid, 1)) CHECK(o.cancelled);
    }
}
