/**
 * @file evaluators.hpp
 * @brief Per-block rule evaluators and the prescription/trigger planners
 *
 * Each evaluator is a pure function of its inputs and the rules config. It
 * returns the decision it reaches together with the rule trace that justifies
 * it; the state transition that applies a decision lives in engine.hpp.
 *
 * Comparators at the table boundaries:
 *   - preparation hormone maxima: strict (FSH < 15 ...)
 *   - preparation follicle size: inclusive (<= 8 mm)
 *   - preparation count: >= 45 - age (younger) / 1..6 inclusive (older)
 *   - maturity: inclusive (>= 60% at 15 mm, >= 30% at 18 mm)
 *   - stimulation ranges "a~b": inclusive; "< x" / "> x": strict
 *   - natural surge: LH > 25 strict; big follicles: size >= 16 mm
 *   - LPS: age >= 40 and count(< 18 mm) > 4
 */

#pragma once

#include "ivf/core/types.hpp"
#include "ivf/rules/config.hpp"

#include <optional>
#include <vector>

namespace ivf::rules {

/// A decision with the rule trace and alerts that produced it.
struct evaluation {
    decision verdict;
    std::vector<rule_citation> trace;
    std::vector<alert> alerts;
};

// =============================================================================
// Block 1
// =============================================================================

/// True iff every preparation condition for the patient's age band holds.
[[nodiscard]] bool block1_eligible(const patient_profile& profile, const hormone_panel& panel,
                                   const follicle_histogram& exam, const block1_thresholds& cfg);

/**
 * @brief Preparation-block decision.
 *
 * StartStimulation(select_scheme(...)) iff every condition holds; otherwise
 * ContinueOCP, or MDTalk once `preparation_streak` previous ineligible visits
 * plus this one reach the escalation limit.
 */
[[nodiscard]] evaluation evaluate_block1(const patient_profile& profile,
                                         const hormone_panel& panel,
                                         const follicle_histogram& exam,
                                         const rules_config& cfg, int preparation_streak = 0);

/**
 * @brief Scheme proposed when preparation ends.
 *
 * NaturalIVF on a medication contraindication; UltraMiniIVF for the older
 * band or a low antral count (1-6); MiniIVF otherwise.
 */
[[nodiscard]] scheme select_scheme(const patient_profile& profile, const hormone_panel& panel,
                                   const follicle_histogram& exam, const block1_thresholds& cfg);

/// Preparation revisit interval in days (default, shortened near a threshold, clamped 5-9).
[[nodiscard]] int preparation_interval(const patient_profile& profile, const hormone_panel& panel,
                                       const rules_config& cfg);

// =============================================================================
// Block 2
// =============================================================================

enum class growth_class { growing, slow, shrinking };

[[nodiscard]] std::string_view to_string(growth_class g) noexcept;

/// Follicle maturity: either maturity rule holds. Throws ivf_error(empty_exam) on an empty exam.
[[nodiscard]] bool maturity_check(const follicle_histogram& exam, const rules_config& cfg);

/// Lead-cohort growth rate in mm/day between two exams.
[[nodiscard]] double lead_growth_rate(const follicle_histogram& prev, const follicle_histogram& curr,
                                      int elapsed_days, const growth_rules& cfg);

/**
 * @brief Classifies follicle growth between two exams by the lead-cohort
 * mean rate: >= 1.0 mm/day growing, (0, 1.0) slow, <= 0 shrinking.
 *
 * Throws ivf_error(empty_exam) if either exam is empty and
 * ivf_error(invalid_argument) if elapsed_days < 1.
 */
[[nodiscard]] growth_class growth_check(const follicle_histogram& prev,
                                        const follicle_histogram& curr, int elapsed_days,
                                        const growth_rules& cfg = {});

/// Days until the next stimulation visit; the pattern's last entry repeats.
[[nodiscard]] int next_interval(int stim_visit_index, const interval_rules& cfg = {});

[[nodiscard]] prescription initial_prescription(scheme s, const dosing_rules& cfg = {},
                                                gonadotropin_agent agent =
                                                    gonadotropin_agent::follistim);

/**
 * @brief One-step dose adjustment.
 *
 * slow -> +75 (cap 450); shrinking -> +75; growing with E2 above e2_high ->
 * -75 (floor 75). With growing follicles, a low FSH or E2 also steps up and a
 * high FSH or LH steps down. Throws ivf_error(adjustment_on_natural_scheme).
 */
[[nodiscard]] prescription adjust_prescription(const cycle_state& state, growth_class growth,
                                               const hormone_panel& panel,
                                               const rules_config& cfg);

/// Growth of this visit's exam relative to the state's last exam, if both exist.
[[nodiscard]] std::optional<growth_class> visit_growth(const cycle_state& state,
                                                       const visit_record& visit,
                                                       const rules_config& cfg);

/// Stimulation-block decision (B2, and the LPS round).
[[nodiscard]] evaluation evaluate_block2(const cycle_state& state, const visit_record& visit,
                                         const rules_config& cfg);

// =============================================================================
// Block 3
// =============================================================================

/// Trigger regimens in order of preference; the engine recommends the first.
[[nodiscard]] std::vector<trigger_regimen> trigger_medication(double e2, int big_follicles,
                                                              const trigger_rules& cfg = {});

struct trigger_timing {
    int duration_hours{36};
    bool no_trigger{false};

    friend bool operator==(const trigger_timing&, const trigger_timing&) = default;
};

/// Trigger-to-retrieval duration from the LH rise and age. Throws ivf_error(nonpositive_lh).
[[nodiscard]] trigger_timing trigger_duration(double lh_prev, double lh_curr, int age,
                                              const trigger_rules& cfg = {});

/// Full trigger plan for a visit at which the engine (or doctor) triggers.
[[nodiscard]] trigger_plan plan_trigger(const cycle_state& state, const visit_record& visit,
                                        const rules_config& cfg,
                                        std::vector<rule_citation>* trace = nullptr);

// =============================================================================
// Blocks 3/4: post-trigger
// =============================================================================

[[nodiscard]] bool lps_check(int age, const follicle_histogram& exam,
                             const post_trigger_rules& cfg = {});

/**
 * @brief Post-trigger decision at time `now`.
 *
 * Before retrieval: FollowPlan while now < scheduled retrieval,
 * OocyteRetrieval from then until the ovulation window closes, MDTalk with an
 * OvulationRisk alert afterwards. After retrieval: StartLPS iff lps_check
 * passes and no LPS round has run yet, else CycleComplete.
 * Throws ivf_error(missing_trigger_plan).
 */
[[nodiscard]] evaluation evaluate_block4(const cycle_state& state, timestamp now,
                                         const patient_profile& profile,
                                         const follicle_histogram& exam,
                                         const rules_config& cfg);

}  // namespace ivf::rules
