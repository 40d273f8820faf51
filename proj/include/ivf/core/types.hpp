/**
 * @file types.hpp
 * @brief Domain value types for one IVF treatment cycle
 *
 * Every type here is an immutable-by-convention value object: copies are
 * cheap enough, comparisons are memberwise, and nothing holds references
 * into shared state. Units are fixed: FSH and LH in mIU/mL, E2 in pg/mL,
 * P4 in ng/mL, follicle sizes in whole millimetres, doses in IU or mg.
 */

#pragma once

#include "ivf/core/time.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ivf {

// =============================================================================
// Blood test
// =============================================================================

enum class analyte { fsh, lh, e2, p4 };

inline constexpr std::array<analyte, 4> all_analytes{analyte::fsh, analyte::lh,
                                                     analyte::e2, analyte::p4};

enum class analyte_flag {
    exact,
    below_detection,  ///< value holds the detection limit
    above_detection,  ///< value holds the upper reporting limit
};

struct analyte_reading {
    double value{0.0};
    analyte_flag flag{analyte_flag::exact};

    friend bool operator==(const analyte_reading&, const analyte_reading&) = default;
};

/**
 * @brief One blood draw. An analyte is std::nullopt only when the source
 * record omitted it; such a panel fails validate_visit().
 */
struct hormone_panel {
    std::optional<analyte_reading> fsh;
    std::optional<analyte_reading> lh;
    std::optional<analyte_reading> e2;
    std::optional<analyte_reading> p4;
    timestamp drawn_at{};

    [[nodiscard]] const std::optional<analyte_reading>& reading(analyte a) const;
    [[nodiscard]] std::optional<analyte_reading>& reading(analyte a);

    /// Value of a present analyte; throws ivf_error(invalid_visit) if missing.
    [[nodiscard]] double value(analyte a) const;

    friend bool operator==(const hormone_panel&, const hormone_panel&) = default;
};

[[nodiscard]] std::string_view to_string(analyte a) noexcept;
[[nodiscard]] std::string_view to_string(analyte_flag f) noexcept;

// =============================================================================
// Ultrasound
// =============================================================================

inline constexpr int min_follicle_mm = 2;
inline constexpr int max_follicle_mm = 30;

/// Follicle size (whole mm) -> count for one ultrasound exam.
struct follicle_histogram {
    std::map<int, int> bins;
    timestamp measured_at{};

    friend bool operator==(const follicle_histogram&, const follicle_histogram&) = default;
};

/**
 * @brief Exact ratio count/total. Kept as integers so threshold checks
 * ("at least 60%") never depend on floating-point rounding.
 */
struct follicle_fraction {
    int count{0};
    int total{0};

    /// count/total, or 0 for an empty exam.
    [[nodiscard]] double value() const noexcept {
        return total > 0 ? static_cast<double>(count) / total : 0.0;
    }
    /// count/total >= percent/100, evaluated in integers; false for an empty exam.
    [[nodiscard]] bool at_least_percent(int percent) const noexcept {
        return total > 0 && static_cast<std::int64_t>(count) * 100 >=
                                static_cast<std::int64_t>(percent) * total;
    }
};

[[nodiscard]] int total(const follicle_histogram& exam) noexcept;

/// Sum of counts over bins with size >= size_mm. Requires 2 <= size_mm <= 30.
[[nodiscard]] int count_at_least(const follicle_histogram& exam, int size_mm);

/// Sum of counts over bins with size < size_mm.
[[nodiscard]] int count_below(const follicle_histogram& exam, int size_mm);

[[nodiscard]] follicle_fraction fraction_at_least(const follicle_histogram& exam, int size_mm);

/// Largest follicle size present, or nullopt for an empty exam.
[[nodiscard]] std::optional<int> largest_follicle(const follicle_histogram& exam) noexcept;

/// Mean size of the `cohort` largest follicles (all of them if fewer). 0 for an empty exam.
[[nodiscard]] double lead_cohort_mean(const follicle_histogram& exam, int cohort = 6);

/// Whole-mm bin for a measured size, rounding half up (15.5 -> 16).
[[nodiscard]] int bin_for_size(double size_mm) noexcept;

// =============================================================================
// Patient and schemes
// =============================================================================

struct patient_profile {
    std::string patient_id;
    int age{0};
    int cycle_number{1};
    /// Stimulation medication is contraindicated; forces Natural IVF.
    bool medication_contraindicated{false};

    friend bool operator==(const patient_profile&, const patient_profile&) = default;
};

enum class scheme { mini_ivf, ultra_mini_ivf, natural_ivf };

[[nodiscard]] std::string_view to_string(scheme s) noexcept;

// =============================================================================
// Medication
// =============================================================================

enum class gonadotropin_agent { follistim, gonal_f };

[[nodiscard]] std::string_view to_string(gonadotropin_agent a) noexcept;

inline constexpr int dose_step_iu = 75;
inline constexpr int min_active_dose_iu = 75;
inline constexpr int max_dose_iu = 450;

struct gonadotropin_order {
    gonadotropin_agent agent{gonadotropin_agent::follistim};
    int dose_iu{0};

    friend bool operator==(const gonadotropin_order&, const gonadotropin_order&) = default;
};

enum class trigger_drug { lupron, ovidrel };

[[nodiscard]] std::string_view to_string(trigger_drug d) noexcept;

struct trigger_medication {
    trigger_drug drug{trigger_drug::lupron};
    int units{1};

    friend bool operator==(const trigger_medication&, const trigger_medication&) = default;
};

using trigger_regimen = std::vector<trigger_medication>;

/// "Lupron 1 + Ovidrel" style rendering; "No Trigger" for an empty regimen.
[[nodiscard]] std::string describe(const trigger_regimen& regimen);

struct prescription {
    gonadotropin_order gonadotropin;
    double clomid_mg{0.0};
    double letrozole_mg{0.0};
    trigger_regimen trigger_meds;

    friend bool operator==(const prescription&, const prescription&) = default;
};

// =============================================================================
// Decisions
// =============================================================================

struct trigger_plan {
    /// Empty together with no_trigger = true for a natural LH surge.
    trigger_regimen medications;
    bool no_trigger{false};
    int duration_hours{36};
    timestamp trigger_at{};
    timestamp scheduled_retrieval{};

    friend bool operator==(const trigger_plan&, const trigger_plan&) = default;
};

enum class decision_type {
    continue_ocp,
    md_talk,
    start_stimulation,
    continue_stimulation,
    adjust_medication,
    change_scheme,
    trigger,
    follow_plan,
    oocyte_retrieval,
    start_lps,
    cycle_complete,
};

inline constexpr std::array<decision_type, 11> all_decision_types{
    decision_type::continue_ocp,         decision_type::md_talk,
    decision_type::start_stimulation,    decision_type::continue_stimulation,
    decision_type::adjust_medication,    decision_type::change_scheme,
    decision_type::trigger,              decision_type::follow_plan,
    decision_type::oocyte_retrieval,     decision_type::start_lps,
    decision_type::cycle_complete,
};

[[nodiscard]] std::string_view to_string(decision_type d) noexcept;

/**
 * @brief A decision kind plus its payload. StartStimulation and ChangeScheme
 * carry a scheme; Trigger carries a plan (optional on ground-truth records,
 * where the engine plans it when replaying).
 */
struct decision {
    decision_type type{decision_type::continue_ocp};
    std::optional<scheme> target_scheme;
    std::optional<trigger_plan> plan;

    [[nodiscard]] static decision of(decision_type t) { return decision{t, {}, {}}; }
    [[nodiscard]] static decision start_stimulation(scheme s) {
        return decision{decision_type::start_stimulation, s, {}};
    }
    [[nodiscard]] static decision change_scheme(scheme s) {
        return decision{decision_type::change_scheme, s, {}};
    }
    [[nodiscard]] static decision trigger(trigger_plan p) {
        return decision{decision_type::trigger, {}, std::move(p)};
    }

    friend bool operator==(const decision&, const decision&) = default;
};

// =============================================================================
// Visits
// =============================================================================

struct visit_record {
    std::string patient_id;
    int cycle_number{1};
    calendar_date visit_date{};
    hormone_panel panel;
    follicle_histogram exam;
    std::optional<decision> doctor_decision;
    std::optional<prescription> doctor_prescription;

    /// Latest of the blood draw and ultrasound times; the engine's "now".
    [[nodiscard]] timestamp observed_at() const noexcept {
        return panel.drawn_at > exam.measured_at ? panel.drawn_at : exam.measured_at;
    }

    friend bool operator==(const visit_record&, const visit_record&) = default;
};

// =============================================================================
// Engine output and memory
// =============================================================================

/// One rule evaluated during a decision: observed value vs threshold.
struct rule_citation {
    std::string rule_id;
    double observed{0.0};
    std::string comparator;  ///< "<", "<=", ">=", ">", "==", "!="
    double threshold{0.0};
    bool satisfied{false};
    /// This rule alone, re-evaluated on the visit, reproduces the decision.
    bool decisive{false};
    std::string note;

    friend bool operator==(const rule_citation&, const rule_citation&) = default;
};

enum class alert_kind { md_talk, ovulation_risk, poor_response };

[[nodiscard]] std::string_view to_string(alert_kind k) noexcept;

struct alert {
    alert_kind kind{alert_kind::md_talk};
    /// MD-talk reason code or the poor-response agent name.
    std::string detail;
    /// Explanation entry that raised the alert.
    std::string rule_id;

    friend bool operator==(const alert&, const alert&) = default;
};

struct advice {
    decision verdict;
    std::vector<rule_citation> explanation;
    prescription orders;
    std::vector<alert> alerts;
    std::optional<int> next_visit_in_days;
    std::string config_hash;

    friend bool operator==(const advice&, const advice&) = default;
};

enum class cycle_block { b1, b2, b3, b4, lps, done, cancelled };

[[nodiscard]] std::string_view to_string(cycle_block b) noexcept;

/// The engine's whole memory for one cycle.
struct cycle_state {
    patient_profile profile;
    cycle_block block{cycle_block::b1};
    std::optional<scheme> active_scheme;
    int stim_visit_index{0};
    std::optional<hormone_panel> last_panel;
    std::optional<follicle_histogram> last_exam;
    std::optional<calendar_date> last_visit_date;
    prescription current_prescription;
    std::set<std::string> poor_response_agents;
    std::optional<trigger_plan> active_trigger_plan;
    int md_talk_count{0};
    int slow_growth_streak{0};
    /// Consecutive preparation visits that failed eligibility.
    int preparation_streak{0};
    bool scheme_changed{false};
    bool retrieval_done{false};
    bool lps_done{false};

    [[nodiscard]] static cycle_state fresh(patient_profile profile) {
        cycle_state s;
        s.profile = std::move(profile);
        return s;
    }

    friend bool operator==(const cycle_state&, const cycle_state&) = default;
};

}  // namespace ivf
