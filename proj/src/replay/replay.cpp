/**
 * @file replay.cpp
 * @brief Per-cycle replay with ground-truth correction, and dataset fan-out
 */

#include "ivf/replay/replay.hpp"

#include "ivf/core/error.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace ivf::replay {

replay_outcome replay_cycle(const std::vector<visit_record>& visits,
                            const patient_profile& profile, const rules::engine& eng,
                            std::optional<int> retrieved_oocytes, const replay_options& options) {
    replay_outcome out;
    out.retrieved_oocytes = retrieved_oocytes;
    if (visits.empty()) return out;

    out.patient_id = visits.front().patient_id;
    out.cycle_number = visits.front().cycle_number;
    for (std::size_t i = 0; i < visits.size(); ++i) {
        const auto& v = visits[i];
        if (v.patient_id != out.patient_id || v.cycle_number != out.cycle_number) {
            throw ivf_error(errc::mixed_cycle, "visit " + std::to_string(i) + " belongs to " +
                                                   v.patient_id + " cycle " +
                                                   std::to_string(v.cycle_number));
        }
        if (i > 0 && !(visits[i - 1].visit_date < v.visit_date)) {
            throw ivf_error(errc::unsorted_input, "visit dates not strictly ascending at " +
                                                      format_date(v.visit_date));
        }
    }

    auto p = profile;
    p.cycle_number = out.cycle_number;
    auto state = cycle_state::fresh(p);

    for (const auto& v : visits) {
        try {
            const cycle_block block = state.block;
            if (!v.doctor_decision) {
                // Nothing to score against; the engine's own decision carries the history forward.
                state = eng.advise(state, v).next;
            } else {
                const decision predicted =
                    options.predict ? options.predict(state, v) : eng.advise(state, v).output.verdict;
                const decision& truth = *v.doctor_decision;
                out.visits.push_back(visit_outcome{v.visit_date, block, predicted.type, truth.type,
                                                   predicted.type == truth.type});
                state = eng.apply(state, v, truth, v.doctor_prescription).next;
            }
        } catch (const ivf_error& e) {
            out.aborted = std::string(to_string(e.code())) + ": " + e.what();
            break;
        }
        if (options.record_trajectory) out.trajectory.push_back(state);
    }

    out.md_talk_count = state.md_talk_count;
    out.cancelled = !retrieved_oocytes ||
                    state.md_talk_count >= eng.config().escalation.md_talk_cancel_limit ||
                    state.block == cycle_block::cancelled;
    return out;
}

replay_report replay_dataset(const dataset& data, const rules::engine& eng, unsigned threads) {
    struct cycle_slice {
        std::size_t begin;
        std::size_t end;
    };
    std::vector<const visit_record*> sorted;
    sorted.reserve(data.visits.size());
    for (const auto& v : data.visits) sorted.push_back(&v);
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        return std::tie(a->patient_id, a->cycle_number, a->visit_date) <
               std::tie(b->patient_id, b->cycle_number, b->visit_date);
    });
    std::vector<cycle_slice> slices;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i + 1;
        while (j < sorted.size() && sorted[j]->patient_id == sorted[i]->patient_id &&
               sorted[j]->cycle_number == sorted[i]->cycle_number) {
            ++j;
        }
        slices.push_back({i, j});
        i = j;
    }

    auto run_one = [&](const cycle_slice& s, replay_report& acc) {
        const auto& first = *sorted[s.begin];
        const auto* profile = data.find_patient(first.patient_id);
        if (!profile) {
            ++acc.cycles;
            ++acc.aborted_cycles;
            return;
        }
        std::vector<visit_record> visits;
        visits.reserve(s.end - s.begin);
        for (std::size_t k = s.begin; k < s.end; ++k) visits.push_back(*sorted[k]);
        try {
            acc.add(replay_cycle(visits, *profile, eng,
                                 data.oocytes(first.patient_id, first.cycle_number)));
        } catch (const ivf_error&) {
            // duplicate visit dates within a cycle
            ++acc.cycles;
            ++acc.aborted_cycles;
        }
    };

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, slices.size())));

    std::vector<replay_report> partial(threads);
    std::atomic<std::size_t> next{0};
    auto worker = [&](unsigned w) {
        for (std::size_t i = next++; i < slices.size(); i = next++) run_one(slices[i], partial[w]);
    };
    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker, w);
        for (auto& t : pool) t.join();
    }

    replay_report report;
    report.config_hash = eng.config_hash();
    for (const auto& r : partial) report.merge(r);
    return report;
}

}  // namespace ivf::replay
