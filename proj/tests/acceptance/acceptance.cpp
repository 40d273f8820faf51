/**
 * @file acceptance.cpp
 * @brief End-to-end acceptance checks, one PASS/FAIL line per criterion
 *
 * Every oracle here is written from the protocol text, not from the engine's
 * config structs, so a wrong default would show up as a disagreement.
 */

#include "builders.hpp"
#include "corpus.hpp"
#include "replay_fixture.hpp"

#include "ivf/core/validate.hpp"
#include "ivf/ingest/parse.hpp"
#include "ivf/replay/replay.hpp"
#include "ivf/replay/synth.hpp"
#include "ivf/rules/engine.hpp"
#include "ivf/rules/evaluators.hpp"
#include "ivf/service/service.hpp"
#include "ivf/store/cycle_store.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace ivf;

namespace {

struct outcome {
    bool pass{true};
    std::string detail;
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what) {
        if (ok) return;
        pass = false;
        if (failures.size() < 8) failures.push_back(what);
    }
};

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

/// The value itself and its nearest representable neighbours.
std::vector<double> around(double b) {
    return {std::nextafter(b, -std::numeric_limits<double>::infinity()), b,
            std::nextafter(b, std::numeric_limits<double>::infinity())};
}

std::vector<double> around(std::initializer_list<double> bounds) {
    std::vector<double> out;
    for (double b : bounds) {
        for (double v : around(b)) out.push_back(v);
    }
    return out;
}

// =============================================================================
// 1. Threshold tables
// =============================================================================

bool eligibility_oracle(int age, double fsh, double lh, double e2, double p4, int count, int largest) {
    const bool older = age >= 42;
    const bool hormones = fsh < 15 && lh < (older ? 6.0 : 8.5) && e2 < (older ? 65.0 : 50.0) &&
                          p4 < 1.5;
    const bool number = older ? (count >= 1 && count <= 6) : count >= 45 - age;
    return hormones && number && largest <= 8;
}

bool maturity_oracle(const std::map<int, int>& bins) {
    int total = 0, at15 = 0, at18 = 0;
    for (const auto& [size, n] : bins) {
        total += n;
        if (size >= 15) at15 += n;
        if (size >= 18) at18 += n;
    }
    return 100 * at15 >= 60 * total || 100 * at18 >= 30 * total;
}

bool stimulation_oracle(bool natural, double fsh, double lh, double e2, double p4, bool growing) {
    if (natural) return fsh >= 5 && fsh <= 25 && lh >= 2 && lh <= 15 && e2 > 80 && p4 < 1 && growing;
    return fsh >= 15 && fsh <= 25 && lh < 15 && e2 > 50 && p4 < 1.2 && growing;
}

outcome table_conformance() {
    outcome out;
    const auto t0 = clock_type::now();
    const rules::rules_config cfg;
    std::array<int, 3> cases{};

    // Block-1 eligibility: both age bands, including each band's edge ages.
    for (int age : {25, 41, 42, 55}) {
        const bool older = age >= 42;
        const std::vector<int> counts =
            older ? std::vector<int>{0, 1, 2, 5, 6, 7} : std::vector<int>{44 - age, 45 - age, 46 - age};
        for (double fsh : around(15.0)) {
            for (double lh : around(older ? 6.0 : 8.5)) {
                for (double e2 : around(older ? 65.0 : 50.0)) {
                    for (double p4 : around(1.5)) {
                        for (int count : counts) {
                            for (int largest : {7, 8, 9}) {
                                follicle_histogram exam;
                                if (count > 0) {
                                    exam.bins[largest] += 1;
                                    if (count > 1) exam.bins[5] += count - 1;
                                }
                                const auto profile = test::profile("T1", age);
                                const auto panel = test::panel(fsh, lh, e2, p4);
                                const bool want =
                                    eligibility_oracle(age, fsh, lh, e2, p4, count, largest);
                                const bool got =
                                    rules::block1_eligible(profile, panel, exam, cfg.block1);
                                const auto verdict =
                                    rules::evaluate_block1(profile, panel, exam, cfg).verdict.type;
                                ++cases[0];
                                out.expect(got == want && (verdict == decision_type::start_stimulation) == want,
                                           fmt("eligibility age %d fsh %.17g lh %.17g e2 %.17g p4 %.17g n %d max %d",
                                               age, fsh, lh, e2, p4, count, largest));
                            }
                        }
                    }
                }
            }
        }
    }

    // Maturity: every histogram over the sizes bracketing 15 and 18 mm.
    const std::array<int, 6> sizes{14, 15, 16, 17, 18, 19};
    for (int code = 1; code < 4096; ++code) {
        std::map<int, int> bins;
        int c = code;
        for (int s : sizes) {
            if (c % 4) bins[s] = c % 4;
            c /= 4;
        }
        follicle_histogram exam;
        exam.bins = bins;
        ++cases[1];
        out.expect(rules::maturity_check(exam, cfg) == maturity_oracle(bins),
                   "maturity " + json(bins).dump());
    }

    // Stimulation windows: both scheme groups; growth from a prior exam two days earlier.
    struct growth_case {
        int size;
        bool growing;
    };
    const std::array<growth_case, 3> growths{{{12, true}, {11, false}, {9, false}}};
    for (scheme s : {scheme::mini_ivf, scheme::ultra_mini_ivf, scheme::natural_ivf}) {
        const bool natural = s == scheme::natural_ivf;
        const auto fshs = around({natural ? 5.0 : 15.0, 25.0});
        const auto lhs = natural ? around({2.0, 15.0}) : around(15.0);
        for (double fsh : fshs) {
            for (double lh : lhs) {
                for (double e2 : around(natural ? 80.0 : 50.0)) {
                    for (double p4 : around(natural ? 1.0 : 1.2)) {
                        for (const auto& g : growths) {
                            auto state = cycle_state::fresh(test::profile("T3", 35));
                            state.block = cycle_block::b2;
                            state.active_scheme = s;
                            state.stim_visit_index = 1;
                            state.current_prescription = rules::initial_prescription(s);
                            state.last_exam = test::exam({{10, 10}});
                            state.last_visit_date = test::day(0);
                            state.last_panel = test::panel(fsh, lh, e2, p4);
                            const auto visit = test::visit("T3", 2, test::panel(fsh, lh, e2, p4),
                                                           test::exam({{g.size, 10}}));
                            const auto verdict = rules::evaluate_block2(state, visit, cfg).verdict.type;
                            const bool want = stimulation_oracle(natural, fsh, lh, e2, p4, g.growing);
                            ++cases[2];
                            out.expect((verdict == decision_type::continue_stimulation) == want,
                                       fmt("stimulation %s fsh %.17g lh %.17g e2 %.17g p4 %.17g size %d",
                                           std::string(to_string(s)).c_str(), fsh, lh, e2, p4, g.size));
                        }
                    }
                }
            }
        }
    }
    const double secs = seconds_since(t0);
    out.expect(secs < 10.0, fmt("took %.2f s", secs));
    out.detail = fmt("eligibility %d, maturity %d, stimulation %d cases in %.2f s", cases[0], cases[1], cases[2], secs);
    return out;
}

// =============================================================================
// 2. Trigger tree
// =============================================================================

trigger_regimen regimen(std::initializer_list<std::pair<trigger_drug, int>> meds) {
    trigger_regimen r;
    for (const auto& [drug, units] : meds) r.push_back(trigger_medication{drug, units});
    return r;
}

std::vector<trigger_regimen> trigger_oracle(double e2, int big) {
    using d = trigger_drug;
    if (e2 < 4000) return {regimen({{d::lupron, 1}})};
    if (big < 6) return {regimen({{d::lupron, 1}}), regimen({{d::ovidrel, 1}})};
    return {regimen({{d::lupron, 2}}), regimen({{d::lupron, 1}, {d::ovidrel, 1}})};
}

outcome trigger_tree() {
    outcome out;
    const rules::rules_config cfg;
    int cases = 0;
    for (double e2 : {3999.0, 4000.0, 4001.0, 5000.0}) {
        for (int big = 0; big <= 8; ++big) {
            ++cases;
            out.expect(rules::trigger_medication(e2, big) == trigger_oracle(e2, big),
                       fmt("medication e2 %.0f big %d", e2, big));

            // Through the planner: follicles "larger than 15mm" are counted from the exam,
            // with 15 mm follicles present as distractors.
            auto state = cycle_state::fresh(test::profile("TT", 35));
            state.block = cycle_block::b2;
            state.active_scheme = scheme::mini_ivf;
            state.last_panel = test::panel(18, 5, e2, 0.6);
            state.last_visit_date = test::day(0);
            std::map<int, int> bins{{15, 3}};
            if (big > 0) bins[16] = big;
            follicle_histogram exam;
            exam.bins = bins;
            const auto visit = test::visit("TT", 1, test::panel(18, 5, e2, 0.6), exam);
            const auto plan = rules::plan_trigger(state, visit, cfg);
            ++cases;
            out.expect(!plan.no_trigger && plan.medications == trigger_oracle(e2, big).front(),
                       fmt("plan e2 %.0f big %d", e2, big));
        }
    }
    for (double lh : {25.0, std::nextafter(25.0, 100.0), 26.0, 40.0, 120.0}) {
        for (double prev : {0.5, 5.0, 12.9, 13.0, 25.0, 60.0, 200.0}) {
            for (int age : {25, 39, 40, 41, 60}) {
                const auto t = rules::trigger_duration(prev, lh, age);
                ++cases;
                if (lh > 25) {
                    out.expect(t.no_trigger && t.duration_hours < 48,
                               fmt("lh %.17g prev %.1f age %d: %d h", lh, prev, age, t.duration_hours));
                } else {
                    out.expect(!t.no_trigger && t.duration_hours < 48,
                               fmt("lh %.17g prev %.1f age %d", lh, prev, age));
                }
                if (lh > 25) {
                    auto state = cycle_state::fresh(test::profile("TT", age));
                    state.block = cycle_block::b2;
                    state.active_scheme = scheme::natural_ivf;
                    state.last_panel = test::panel(8, prev, 300, 0.5);
                    state.last_visit_date = test::day(0);
                    const auto visit = test::visit("TT", 1, test::panel(8, lh, 300, 0.5),
                                                   test::exam({{18, 2}}));
                    const auto plan = rules::plan_trigger(state, visit, cfg);
                    ++cases;
                    out.expect(plan.no_trigger && plan.medications.empty() && plan.duration_hours < 48 &&
                                   plan.scheduled_retrieval - plan.trigger_at ==
                                       std::chrono::hours(plan.duration_hours),
                               fmt("no-trigger plan lh %.17g prev %.1f age %d", lh, prev, age));
                }
            }
        }
    }
    out.detail = fmt("%d cases", cases);
    return out;
}

// =============================================================================
// 3. LPS rule
// =============================================================================

outcome lps_rule() {
    outcome out;
    int cases = 0;
    for (int age : {39, 40, 41}) {
        for (int count : {3, 4, 5}) {
            // Follicles at 18 mm and above must not count.
            for (int big : {0, 4}) {
                std::map<int, int> bins{{17, count}};
                if (big) bins[18] = big;
                follicle_histogram exam;
                exam.bins = bins;
                const bool want = age >= 40 && count > 4;
                ++cases;
                out.expect(rules::lps_check(age, exam) == want,
                           fmt("age %d small %d big %d", age, count, big));
            }
        }
    }
    out.detail = fmt("%d cases", cases);
    return out;
}

// =============================================================================
// 4. FSM safety
// =============================================================================

struct visit_generator {
    std::mt19937_64 rng;

    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }
    bool chance(double p) { return uniform(0, 1) < p; }

    /// A value near one of the protocol thresholds, or anywhere in a wide range.
    double hormone(std::initializer_list<double> marks, double hi) {
        if (chance(0.6)) {
            const double m = *std::next(marks.begin(), integer(0, static_cast<int>(marks.size()) - 1));
            return std::max(0.05, m + uniform(-0.15, 0.15) * m);
        }
        return uniform(0.05, hi);
    }

    hormone_panel panel(calendar_date d) {
        auto p = test::panel(hormone({5, 15, 25}, 40), hormone({2, 6, 8.5, 15, 25}, 60),
                             hormone({50, 65, 80, 4000}, 6000), hormone({1, 1.2, 1.5}, 3));
        p.drawn_at = at_time(d, integer(6, 11), integer(0, 59));
        return p;
    }

    follicle_histogram exam(calendar_date d, double centre) {
        follicle_histogram e;
        const int n = chance(0.05) ? 0 : integer(1, 22);
        for (int i = 0; i < n; ++i) {
            const int size = std::clamp(static_cast<int>(std::lround(centre + uniform(-4, 4))), 2, 30);
            e.bins[size] += 1;
        }
        e.measured_at = at_time(d, integer(7, 20), integer(0, 59));
        return e;
    }
};

bool allowed_edge(cycle_block from, cycle_block to) {
    using b = cycle_block;
    if (to == b::cancelled) return true;
    switch (from) {
        case b::b1: return to == b::b1 || to == b::b2;
        case b::b2: return to == b::b2 || to == b::b3;
        case b::b3: return to == b::b3 || to == b::b4;
        case b::b4: return to == b::b4 || to == b::lps || to == b::done;
        case b::lps: return to == b::lps || to == b::b3;
        default: return false;
    }
}

outcome fsm_safety() {
    outcome out;
    const rules::engine eng;
    visit_generator gen{std::mt19937_64{20240601}};
    long visits = 0, overrides = 0, rejected = 0, risk_checks = 0, plans = 0;
    std::map<std::pair<cycle_block, cycle_block>, long> edges;
    const auto t0 = clock_type::now();

    for (int cycle = 0; visits < 100000; ++cycle) {
        const std::string pid = "F" + std::to_string(cycle);
        auto state = cycle_state::fresh(patient_profile{pid, gen.integer(18, 60), 1, gen.chance(0.1)});
        calendar_date date = test::day(gen.integer(0, 300));
        double centre = gen.uniform(4, 9);
        for (int step = 0; step < 80; ++step) {
            if (state.block == cycle_block::done || state.block == cycle_block::cancelled) break;
            const bool post_trigger = state.block == cycle_block::b3 || state.block == cycle_block::b4;
            date = date + std::chrono::days{post_trigger ? gen.integer(1, 2) : gen.integer(1, 6)};
            centre += gen.uniform(-1.0, 3.0);
            if (state.block == cycle_block::lps && gen.chance(0.1)) centre = gen.uniform(6, 12);
            auto visit = test::visit(pid, 0, gen.panel(date), gen.exam(date, centre));
            visit.visit_date = date;
            ++visits;

            const auto before = state;
            cycle_state next;
            try {
                const auto step_out = eng.advise(state, visit);
                next = step_out.next;

                if ((before.block == cycle_block::b3 || before.block == cycle_block::b4) &&
                    !before.retrieval_done && before.active_trigger_plan &&
                    visit.observed_at() - before.active_trigger_plan->trigger_at >= std::chrono::hours(48)) {
                    ++risk_checks;
                    bool risk = false;
                    for (const auto& a : step_out.output.alerts) risk |= a.kind == alert_kind::ovulation_risk;
                    out.expect(risk, pid + " " + format_date(date) + ": no OvulationRisk at >= 48 h");
                }

                if (gen.chance(0.25)) {
                    // A doctor overriding the engine with an arbitrary decision.
                    const auto type = all_decision_types[gen.integer(0, all_decision_types.size() - 1)];
                    decision d = decision::of(type);
                    if (type == decision_type::start_stimulation || type == decision_type::change_scheme) {
                        d.target_scheme = static_cast<scheme>(gen.integer(0, 2));
                    }
                    ++overrides;
                    try {
                        next = eng.apply(state, visit, d).next;
                    } catch (const ivf_error&) {
                        ++rejected;
                    }
                }
            } catch (const ivf_error& e) {
                out.expect(false, pid + ": engine threw " + e.what());
                break;
            }

            ++edges[{before.block, next.block}];
            out.expect(allowed_edge(before.block, next.block),
                       pid + ": " + std::string(to_string(before.block)) + " -> " +
                           std::string(to_string(next.block)));
            if (next.active_trigger_plan && next.active_trigger_plan != before.active_trigger_plan) {
                ++plans;
                const auto& p = *next.active_trigger_plan;
                out.expect(p.duration_hours < 48 &&
                               p.scheduled_retrieval - p.trigger_at < std::chrono::hours(48),
                           pid + ": trigger plan of " + std::to_string(p.duration_hours) + " h");
            }
            state = next;
        }
    }
    out.expect(plans > 1000 && risk_checks > 100, fmt("thin coverage: %ld plans, %ld risk checks", plans, risk_checks));
    out.detail = fmt("%ld visits, %ld overrides (%ld rejected), %ld trigger plans, %ld ovulation-window checks, %zu edge kinds, %.2f s",
                     visits, overrides, rejected, plans, risk_checks, edges.size(), seconds_since(t0));
    return out;
}

// =============================================================================
// 5/6. Replay identity and direction
// =============================================================================

outcome replay_identity() {
    outcome out;
    const auto t0 = clock_type::now();
    const rules::engine eng;
    replay::synth_config cfg;
    cfg.seed = 2024;
    cfg.patients = 500;
    cfg.leniency = 0.0;
    const auto data = replay::synth_cohort(cfg, eng);
    const auto report = replay::replay_dataset(data, eng);
    int visits = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        for (const auto* row : {&report.intra[i], &report.transitions[i]}) {
            const bool intra = row == &report.intra[i];
            const std::string name = intra ? std::string("intra ") + replay::intra_labels[i]
                                           : std::string("transition ") + replay::transition_labels[i];
            out.expect(row->total() > 0, name + " is empty");
            out.expect(row->accuracy() == 1.0, name + fmt(" accuracy %d/%d", row->correct, row->total()));
            if (intra) visits += row->total();
        }
    }
    out.expect(report.cycles == 500 && report.aborted_cycles == 0,
               fmt("%d cycles, %d aborted", report.cycles, report.aborted_cycles));
    out.expect(report.early_triggers.empty() && report.late_triggers == 0, "trigger timing differs");
    const double secs = seconds_since(t0);
    out.expect(secs < 60.0, fmt("took %.2f s", secs));
    out.detail = fmt("500 patients, %d intra-scored visits, all 8 cells 100%%, %.2f s", visits, secs);
    return out;
}

outcome replay_direction() {
    outcome out;
    const rules::engine eng;
    replay::synth_config cfg;
    cfg.seed = 77;
    cfg.patients = 500;
    cfg.trigger_delay_min = 1;
    cfg.trigger_delay_max = 2;
    const auto report = replay::replay_dataset(replay::synth_cohort(cfg, eng), eng);
    int mass = 0, outside = 0;
    for (const auto& [days, rounds] : report.early_triggers) {
        mass += rounds;
        if (days != 1 && days != 2) outside += rounds;
    }
    const auto& b2b3 = report.transitions[1];
    out.expect(mass > 0, "empty early-trigger histogram");
    out.expect(outside == 0, fmt("%d rounds outside days 1-2", outside));
    out.expect(b2b3.late == 0, fmt("%d late B2-B3 predictions", b2b3.late));
    out.expect(report.late_triggers == 0, fmt("%d late trigger rounds", report.late_triggers));
    out.expect(b2b3.early > 0, "no early B2-B3 predictions");
    out.detail = fmt("early histogram {1: %d, 2: %d}; B2-B3 early %d, late %d", report.early_triggers.count(1) ? report.early_triggers.at(1) : 0,
                     report.early_triggers.count(2) ? report.early_triggers.at(2) : 0, b2b3.early, b2b3.late);
    return out;
}

// =============================================================================
// 7. Evaluation arithmetic
// =============================================================================

outcome evaluation_arithmetic() {
    outcome out;
    const rules::engine eng;
    const auto fx = test::make_replay_fixture();
    const auto r = replay::aggregate({replay::replay_cycle(fx.visits, fx.profile, eng, fx.oocytes)});
    using row = replay::score_row;
    const std::array<row, 4> intra{row{1, 0}, row{3, 1}, row{1, 0}, row{1, 0}};
    const std::array<row, 4> trans{row{1, 0}, row{1, 1, 1, 0}, row{1, 0}, row{0, 1, 0, 1}};
    for (std::size_t i = 0; i < 4; ++i) {
        out.expect(r.intra[i] == intra[i],
                   fmt("intra %s: %d/%d", replay::intra_labels[i], r.intra[i].correct, r.intra[i].total()));
        out.expect(r.transitions[i] == trans[i],
                   fmt("transition %s: %d/%d early %d late %d", replay::transition_labels[i],
                       r.transitions[i].correct, r.transitions[i].total(), r.transitions[i].early,
                       r.transitions[i].late));
    }
    out.expect(r.intra[1].accuracy() == 0.75, "B2 accuracy is not 0.75");
    out.expect(r.early_triggers == std::map<int, int>{{1, 1}} && r.late_triggers == 0, "trigger histogram");
    const bool md_ok = r.md_talk.size() == 1 && r.md_talk.count(0) &&
                       r.md_talk.at(0) == replay::md_talk_row{1, 1, 6, 6, 0};
    out.expect(md_ok, "md-talk row");
    out.expect(r.cycles == 1 && r.aborted_cycles == 0, "cycle counters");
    out.detail = "B2 accuracy 3/4 = 0.75, B2-B3 1 early, B4-LPS 1 late, early histogram {1: 1}";
    return out;
}

// =============================================================================
// 8. Ingest robustness
// =============================================================================

outcome ingest_robustness() {
    outcome out;
    std::mt19937_64 rng(99);
    const std::string alphabet = "0123456789.,<>{}[]:\"x X-+eE mIU/mLpgnm%*;\t\n\\";
    long ok_h = 0, bad_h = 0, ok_f = 0, bad_f = 0, crashes = 0;
    constexpr long n = 1000000;
    const auto t0 = clock_type::now();
    std::string s;
    for (long i = 0; i < n; ++i) {
        const int len = static_cast<int>(rng() % 25);
        s.clear();
        const bool raw = (rng() & 1) != 0;
        for (int k = 0; k < len; ++k) {
            s.push_back(raw ? static_cast<char>(rng() & 0xff) : alphabet[rng() % alphabet.size()]);
        }
        try {
            const auto h = ingest::try_parse_hormone_value(s);
            (h.ok() ? ok_h : bad_h) += 1;
            if (h.ok()) {
                const auto& v = *h.value;
                if (!std::isfinite(v.value) || v.value < 0) {
                    out.expect(false, "accepted a non-finite or negative value from " + json(s).dump(-1, ' ', false, json::error_handler_t::replace));
                }
            }
        } catch (...) {
            ++crashes;
        }
        try {
            const auto f = ingest::try_parse_follicle_map(s);
            (f.ok() ? ok_f : bad_f) += 1;
            if (f.ok()) {
                for (const auto& [size, count] : f.value->bins) {
                    if (size < 2 || size > 30 || count < 0) out.expect(false, "bin out of range");
                }
            }
        } catch (...) {
            ++crashes;
        }
    }
    out.expect(crashes == 0, fmt("%ld exceptions escaped", crashes));
    out.expect(ok_h + bad_h == n && ok_f + bad_f == n, "accounting mismatch");
    const auto corpus = test::check_ingest_corpus(IVF_SOURCE_DIR "/tests/fixtures/ingest_corpus.json");
    for (const auto& f : corpus.failures) out.expect(false, "corpus: " + f);
    out.expect(corpus.cases >= 40, fmt("corpus has only %d cases", corpus.cases));
    out.detail = fmt("1e6 inputs: hormone %ld ok + %ld rejected, follicles %ld ok + %ld rejected, 0 crashes; corpus %d cases; %.2f s",
                     ok_h, bad_h, ok_f, bad_f, corpus.cases, seconds_since(t0));
    return out;
}

// =============================================================================
// 9. Store integrity
// =============================================================================

outcome store_integrity() {
    outcome out;
    std::mt19937_64 rng(4242);
    auto pick = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };
    store::cycle_store db;
    const rules::engine eng;

    std::set<std::string> patients;
    std::map<std::pair<std::string, int>, std::set<calendar_date>> visits;
    std::map<std::tuple<std::string, int, calendar_date>, int> engine_rows;
    std::map<std::string, long> tally;

    auto make_visit = [&](const std::string& pid, int cycle, int day) {
        auto v = test::visit(pid, day, test::panel(8, 4, 30, 0.5), test::exam({{6, pick(1, 15)}}), cycle);
        return v;
    };
    auto check_cycle = [&](const std::string& pid, int cycle) {
        const auto rows = db.list_cycle(pid, cycle);
        const auto& want = visits[{pid, cycle}];
        out.expect(rows.size() == want.size(), "list_cycle size for " + pid);
        auto it = want.begin();
        for (std::size_t i = 0; i < rows.size() && it != want.end(); ++i, ++it) {
            out.expect(rows[i].visit.visit_date == *it, "list_cycle order for " + pid);
            if (i > 0) out.expect(rows[i - 1].visit.visit_date < rows[i].visit.visit_date, "not ascending");
        }
    };
    auto check_all = [&] {
        const auto doc = db.export_json();
        std::set<std::string> known;
        for (const auto& p : doc.at("patients")) known.insert(p.at("patient_id").get<std::string>());
        out.expect(known == patients, "patient table differs from the model");
        for (const char* table : {"blood_tests", "ultrasound_tests", "egg_retrievals", "treatments"}) {
            for (const auto& row : doc.at(table)) {
                out.expect(known.count(row.at("patient_id").get<std::string>()) == 1,
                           std::string("dangling row in ") + table);
            }
        }
        for (const auto& [key, dates] : visits) check_cycle(key.first, key.second);
    };

    constexpr int ops = 12000;
    for (int op = 0; op < ops; ++op) {
        const std::string pid = "P" + std::to_string(pick(0, 39));
        const int cycle = pick(1, 3);
        const int day = pick(0, 59);
        const auto date = test::day(day);
        const int kind = pick(0, 9);
        try {
            if (kind == 0) {
                ++tally["put_patient"];
                const int age = pick(14, 64);
                const bool want = !patients.count(pid) && age >= 18 && age <= 60;
                bool ok = true;
                try {
                    db.put_patient(test::profile(pid, age));
                } catch (const ivf_error&) {
                    ok = false;
                }
                out.expect(ok == want, "put_patient " + pid);
                if (ok) patients.insert(pid);
            } else if (kind <= 4) {
                ++tally["put_visit"];
                auto v = make_visit(pid, cycle, day);
                const bool broken = pick(0, 19) == 0;
                if (broken) v.panel.drawn_at = at_time(test::day(day + 1), 8);
                const bool want = patients.count(pid) && !visits[{pid, cycle}].count(date) && !broken;
                bool ok = true;
                try {
                    (void)db.put_visit(v);
                } catch (const ivf_error&) {
                    ok = false;
                }
                out.expect(ok == want, "put_visit " + pid + " " + format_date(date));
                if (ok) visits[{pid, cycle}].insert(date);
            } else if (kind <= 6) {
                ++tally["put_treatment"];
                advice a;
                a.verdict = decision::of(pick(0, 1) ? decision_type::oocyte_retrieval
                                                    : decision_type::continue_stimulation);
                a.config_hash = eng.config_hash();
                const auto key = std::make_tuple(pid, cycle, date);
                const bool want = patients.count(pid) && !engine_rows.count(key);
                bool ok = true;
                try {
                    (void)db.put_treatment(pid, cycle, date, a, pick(0, 1) ? std::optional<int>(pick(0, 20)) : std::nullopt);
                } catch (const ivf_error&) {
                    ok = false;
                }
                out.expect(ok == want, "put_treatment " + pid);
                if (ok) engine_rows[key] = 1;
            } else if (kind == 7) {
                // Two visits in one transaction where the second always fails.
                ++tally["atomic_pair"];
                const bool full = tally["atomic_pair"] % 100 == 0;
                auto snapshot = [&] {
                    if (full) return db.export_json().dump();
                    return json(db.list_cycle(pid, cycle).size()).dump() +
                           json(db.list_cycle("ghost-" + pid, cycle).size()).dump() +
                           json(db.list_patients().size()).dump();
                };
                const auto before = snapshot();
                bool threw = false;
                try {
                    db.atomically([&] {
                        (void)db.put_visit(make_visit(pid, cycle, day));
                        (void)db.put_visit(make_visit("ghost-" + pid, cycle, day));
                    });
                } catch (const ivf_error&) {
                    threw = true;
                }
                out.expect(threw && snapshot() == before, "partial transaction persisted");
            } else if (kind == 8) {
                // Concurrent-looking import of a small document, all or nothing.
                ++tally["import"];
                auto v = make_visit(pid, cycle, day);
                json doc{{"patients", json::array()},
                         {"blood_tests", json::array({{{"patient_id", pid}, {"cycle_number", cycle},
                                                       {"visit_date", format_date(date)}, {"panel", v.panel}}})},
                         {"ultrasound_tests", json::array({{{"patient_id", pid}, {"cycle_number", cycle},
                                                            {"visit_date", format_date(date)}, {"exam", v.exam}}})},
                         {"egg_retrievals", json::array()},
                         {"treatments", json::array()}};
                const bool want = patients.count(pid) && !visits[{pid, cycle}].count(date);
                bool ok = true;
                try {
                    db.import_json(doc);
                } catch (const ivf_error&) {
                    ok = false;
                }
                out.expect(ok == want, "import " + pid);
                if (ok) visits[{pid, cycle}].insert(date);
            } else {
                ++tally["list_cycle"];
                check_cycle(pid, cycle);
                out.expect(db.list_cycle(pid, cycle + 10).empty(), "unknown cycle not empty");
            }
        } catch (const std::exception& e) {
            out.expect(false, std::string("unexpected exception: ") + e.what());
        }
        if (op % 1000 == 999) check_all();
    }
    check_all();
    long rows = 0;
    for (const auto& [k, d] : visits) rows += static_cast<long>(d.size());
    out.detail = fmt("%d ops (%ld visits, %ld treatments, %ld failed transactions, %ld imports); %ld visits stored for %zu patients",
                     ops, tally["put_visit"], tally["put_treatment"], tally["atomic_pair"], tally["import"], rows,
                     patients.size());
    return out;
}

// =============================================================================
// 10. Service contract
// =============================================================================

outcome service_contract() {
    outcome out;
    using service::request;
    const std::string token = "acceptance";
    const rules::engine eng;
    replay::synth_config cfg;
    cfg.seed = 5;
    cfg.patients = 25;
    const auto cohort = replay::synth_cohort(cfg, eng);

    auto make = [&](std::string method, std::string path, std::string body,
                    std::map<std::string, std::string> query = {}) {
        return request{std::move(method), std::move(path), std::move(query), std::move(body), "Bearer " + token};
    };

    store::cycle_store live;
    service::advisory_service svc(live, eng, token);
    std::vector<request> log;
    std::vector<std::string> bodies;
    auto send = [&](const request& r) {
        log.push_back(r);
        const auto res = svc.handle(r);
        bodies.push_back(res.body);
        return res;
    };

    int dry_runs = 0, advised = 0;
    for (const auto& p : cohort.patients) send(make("POST", "/patients", json(p).dump()));
    for (const auto& v : cohort.visits) {
        json body = v;
        body.erase("doctor_decision");
        body.erase("doctor_prescription");
        if (v.doctor_decision && v.doctor_decision->type == decision_type::oocyte_retrieval) {
            if (const auto n = cohort.oocytes(v.patient_id, v.cycle_number)) body["oocytes"] = *n;
        }
        const std::string path =
            "/patients/" + v.patient_id + "/cycles/" + std::to_string(v.cycle_number) + "/advice";
        if (advised % 3 == 0) {
            // A what-if with an edited E2 value, which must not touch the store.
            json edited = body;
            edited["panel"]["e2"]["value"] = edited["panel"]["e2"]["value"].get<double>() * 1.5;
            const auto before = live.export_json().dump();
            const auto res = send(make("POST", path, edited.dump(), {{"dry_run", "true"}}));
            ++dry_runs;
            out.expect(res.status == 200 || res.status == 410, fmt("dry run status %d", res.status));
            out.expect(live.export_json().dump() == before, "dry run changed the store");
        }
        const auto res = send(make("POST", path, body.dump()));
        ++advised;
        out.expect(res.status == 201 || res.status == 410, fmt("advice status %d: ", res.status) + res.body.substr(0, 120));
    }

    store::cycle_store fresh;
    service::advisory_service again(fresh, eng, token);
    std::vector<std::string> replayed;
    for (const auto& r : log) replayed.push_back(again.handle(r).body);

    const auto live_rows = json(live.list_treatments()).dump();
    const auto fresh_rows = json(fresh.list_treatments()).dump();
    out.expect(live_rows == fresh_rows, "treatment rows differ after replay");
    out.expect(replayed == bodies, "response bodies differ after replay");
    out.expect(live.export_json().dump() == fresh.export_json().dump(), "exports differ after replay");
    const auto n_rows = live.list_treatments().size();
    out.expect(n_rows > 100, fmt("only %zu treatment rows", n_rows));
    out.detail = fmt("%zu logged requests (%d dry runs), %zu treatment rows byte-identical after replay",
                     log.size(), dry_runs, n_rows);
    return out;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<outcome()>>> criteria{
        {"table-conformance", table_conformance},
        {"trigger-tree", trigger_tree},
        {"lps-rule", lps_rule},
        {"fsm-safety", fsm_safety},
        {"replay-identity", replay_identity},
        {"replay-direction", replay_direction},
        {"evaluation-arithmetic", evaluation_arithmetic},
        {"ingest-robustness", ingest_robustness},
        {"store-integrity", store_integrity},
        {"service-contract", service_contract},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        outcome o;
        const auto t0 = clock_type::now();
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.failures.push_back(std::string("threw: ") + e.what());
        }
        std::printf("%s %-22s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                    seconds_since(t0));
        for (const auto& f : o.failures) std::printf("       %s\n", f.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
    return failed == 0 ? 0 : 1;
}
