/**
 * @file replay.hpp
 * @brief Replays recorded cycles through the engine and scores its decisions
 *
 * Each cycle starts from a fresh state. At every visit the engine predicts a
 * decision, the prediction is compared with the doctor's, and the doctor's
 * decision (never the prediction) is then applied, so the state trajectory
 * is the recorded treatment history.
 *
 * Scoring rows:
 *   - intra-block B1..B4: visits whose ground truth does not advance the
 *     block (StartStimulation in B1, Trigger in B2/LPS, StartLPS in B4);
 *     LPS visits count as B2 and every B3 visit is scored here.
 *   - transitions B1-B2, B2-B3, B3-B4, B4-LPS: visits where either side's
 *     decision moves the cycle to the next block. A transition predicted
 *     when the doctor stayed is "early", the reverse is "late".
 */

#pragma once

#include "ivf/core/dataset.hpp"
#include "ivf/core/serialize.hpp"
#include "ivf/core/types.hpp"
#include "ivf/rules/engine.hpp"

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ivf::replay {

struct visit_outcome {
    calendar_date date{};
    cycle_block block{cycle_block::b1};
    decision_type predicted{decision_type::continue_ocp};
    decision_type truth{decision_type::continue_ocp};
    bool match{false};

    friend bool operator==(const visit_outcome&, const visit_outcome&) = default;
};

struct replay_outcome {
    std::string patient_id;
    int cycle_number{1};
    /// One entry per visit that carries a doctor decision.
    std::vector<visit_outcome> visits;
    int md_talk_count{0};
    std::optional<int> retrieved_oocytes;
    bool cancelled{false};
    /// Why replay stopped early (e.g. a doctor decision the block does not allow); empty if it did not.
    std::string aborted;
    /// States after each applied visit, when requested.
    std::vector<cycle_state> trajectory;
};

using predictor = std::function<decision(const cycle_state&, const visit_record&)>;

struct replay_options {
    bool record_trajectory{false};
    /// Replaces the engine's prediction; the applied history is unaffected.
    predictor predict;
};

/**
 * @brief Replays one cycle.
 *
 * Throws unsorted-input unless visit dates strictly ascend and mixed-cycle
 * unless all visits share one patient and cycle. Engine errors on a visit
 * stop the replay and are recorded in `aborted`.
 */
[[nodiscard]] replay_outcome replay_cycle(const std::vector<visit_record>& visits,
                                          const patient_profile& profile,
                                          const rules::engine& eng,
                                          std::optional<int> retrieved_oocytes = std::nullopt,
                                          const replay_options& options = {});

// =============================================================================
// Report
// =============================================================================

struct score_row {
    int correct{0};
    int wrong{0};
    /// Transition rows only: predicted a block change the doctor did not make.
    int early{0};
    /// Transition rows only: missed a block change the doctor made.
    int late{0};

    [[nodiscard]] int total() const noexcept { return correct + wrong; }
    [[nodiscard]] std::optional<double> accuracy() const noexcept {
        if (total() == 0) return std::nullopt;
        return static_cast<double>(correct) / total();
    }
    void merge(const score_row& o) noexcept {
        correct += o.correct;
        wrong += o.wrong;
        early += o.early;
        late += o.late;
    }

    friend bool operator==(const score_row&, const score_row&) = default;
};

struct md_talk_row {
    int cycles{0};
    int retrieved_cycles{0};
    long long oocyte_sum{0};
    int max_oocytes{0};
    int cancelled{0};

    /// Mean over cycles that reached retrieval.
    [[nodiscard]] std::optional<double> mean_oocytes() const noexcept {
        if (retrieved_cycles == 0) return std::nullopt;
        return static_cast<double>(oocyte_sum) / retrieved_cycles;
    }
    [[nodiscard]] double cancellation_rate() const noexcept {
        return cycles == 0 ? 0.0 : static_cast<double>(cancelled) / cycles;
    }

    friend bool operator==(const md_talk_row&, const md_talk_row&) = default;
};

inline constexpr std::array<const char*, 4> intra_labels{"B1", "B2", "B3", "B4"};
inline constexpr std::array<const char*, 4> transition_labels{"B1-B2", "B2-B3", "B3-B4", "B4-LPS"};

/// Counters only, so merging is associative and commutative.
struct replay_report {
    std::string config_hash;
    int cycles{0};
    int aborted_cycles{0};
    std::array<score_row, 4> intra{};
    std::array<score_row, 4> transitions{};
    /// Days the engine's first Trigger preceded the doctor's, per stimulation round.
    std::map<int, int> early_triggers;
    /// Rounds where the doctor triggered before the engine ever predicted it.
    int late_triggers{0};
    std::map<int, md_talk_row> md_talk;

    void add(const replay_outcome& outcome);
    void merge(const replay_report& other);

    friend bool operator==(const replay_report&, const replay_report&) = default;
};

/// Intra-block row index for a block at prediction time (LPS -> B2); nullopt for terminal blocks.
[[nodiscard]] std::optional<std::size_t> intra_row(cycle_block block) noexcept;

[[nodiscard]] replay_report aggregate(const std::vector<replay_outcome>& outcomes,
                                      const std::string& config_hash = {});

void to_json(json& j, const replay_report& r);

enum class report_format { json, csv, table };

[[nodiscard]] std::optional<report_format> report_format_from_string(std::string_view s);

/// Renders a report; the table form prints the intra-block and transition accuracy tables.
[[nodiscard]] std::string render(const replay_report& report, report_format format);

// =============================================================================
// Datasets
// =============================================================================

/**
 * @brief Replays every (patient, cycle) of a dataset, fanning cycles out over
 * `threads` workers (0 = hardware concurrency). The result does not depend on
 * the thread count. Cycles whose patient is unknown count as aborted.
 */
[[nodiscard]] replay_report replay_dataset(const dataset& data, const rules::engine& eng,
                                           unsigned threads = 0);

}  // namespace ivf::replay
