/**
 * @file types.cpp
 * @brief Follicle statistics and display names for the core enumerations
 */

#include "ivf/core/types.hpp"

#include "ivf/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace ivf {

// =============================================================================
// Hormone panel
// =============================================================================

const std::optional<analyte_reading>& hormone_panel::reading(analyte a) const {
    switch (a) {
        case analyte::fsh: return fsh;
        case analyte::lh: return lh;
        case analyte::e2: return e2;
        case analyte::p4: return p4;
    }
    return fsh;
}

std::optional<analyte_reading>& hormone_panel::reading(analyte a) {
    return const_cast<std::optional<analyte_reading>&>(std::as_const(*this).reading(a));
}

double hormone_panel::value(analyte a) const {
    const auto& r = reading(a);
    if (!r) {
        throw ivf_error(errc::invalid_visit,
                        "panel is missing " + std::string(to_string(a)));
    }
    return r->value;
}

std::string_view to_string(analyte a) noexcept {
    switch (a) {
        case analyte::fsh: return "FSH";
        case analyte::lh: return "LH";
        case analyte::e2: return "E2";
        case analyte::p4: return "P4";
    }
    return "?";
}

std::string_view to_string(analyte_flag f) noexcept {
    switch (f) {
        case analyte_flag::exact: return "exact";
        case analyte_flag::below_detection: return "below-detection";
        case analyte_flag::above_detection: return "above-detection";
    }
    return "?";
}

// =============================================================================
// Follicle histogram
// =============================================================================

namespace {

void require_size(int size_mm) {
    if (size_mm < min_follicle_mm || size_mm > max_follicle_mm) {
        throw ivf_error(errc::invalid_argument,
                        "follicle size " + std::to_string(size_mm) + " outside 2-30 mm");
    }
}

}  // namespace

int total(const follicle_histogram& exam) noexcept {
    int sum = 0;
    for (const auto& [size, count] : exam.bins) sum += count;
    return sum;
}

int count_at_least(const follicle_histogram& exam, int size_mm) {
    require_size(size_mm);
    int sum = 0;
    for (auto it = exam.bins.lower_bound(size_mm); it != exam.bins.end(); ++it) {
        sum += it->second;
    }
    return sum;
}

int count_below(const follicle_histogram& exam, int size_mm) {
    int sum = 0;
    for (const auto& [size, count] : exam.bins) {
        if (size >= size_mm) break;
        sum += count;
    }
    return sum;
}

follicle_fraction fraction_at_least(const follicle_histogram& exam, int size_mm) {
    return follicle_fraction{count_at_least(exam, size_mm), total(exam)};
}

std::optional<int> largest_follicle(const follicle_histogram& exam) noexcept {
    for (auto it = exam.bins.rbegin(); it != exam.bins.rend(); ++it) {
        if (it->second > 0) return it->first;
    }
    return std::nullopt;
}

double lead_cohort_mean(const follicle_histogram& exam, int cohort) {
    int taken = 0;
    double sum = 0.0;
    for (auto it = exam.bins.rbegin(); it != exam.bins.rend() && taken < cohort; ++it) {
        const int take = std::min(it->second, cohort - taken);
        if (take <= 0) continue;
        sum += static_cast<double>(it->first) * take;
        taken += take;
    }
    return taken > 0 ? sum / taken : 0.0;
}

int bin_for_size(double size_mm) noexcept {
    return static_cast<int>(std::floor(size_mm + 0.5));
}

// =============================================================================
// Display names
// =============================================================================

std::string_view to_string(scheme s) noexcept {
    switch (s) {
        case scheme::mini_ivf: return "MiniIVF";
        case scheme::ultra_mini_ivf: return "UltraMiniIVF";
        case scheme::natural_ivf: return "NaturalIVF";
    }
    return "?";
}

std::string_view to_string(gonadotropin_agent a) noexcept {
    switch (a) {
        case gonadotropin_agent::follistim: return "Follistim";
        case gonadotropin_agent::gonal_f: return "Gonal-F";
    }
    return "?";
}

std::string_view to_string(trigger_drug d) noexcept {
    switch (d) {
        case trigger_drug::lupron: return "Lupron";
        case trigger_drug::ovidrel: return "Ovidrel";
    }
    return "?";
}

std::string describe(const trigger_regimen& regimen) {
    if (regimen.empty()) return "No Trigger";
    std::string out;
    for (const auto& med : regimen) {
        if (!out.empty()) out += " + ";
        out += to_string(med.drug);
        if (med.drug == trigger_drug::lupron) out += " " + std::to_string(med.units);
    }
    return out;
}

std::string_view to_string(decision_type d) noexcept {
    switch (d) {
        case decision_type::continue_ocp: return "ContinueOCP";
        case decision_type::md_talk: return "MDTalk";
        case decision_type::start_stimulation: return "StartStimulation";
        case decision_type::continue_stimulation: return "ContinueStimulation";
        case decision_type::adjust_medication: return "AdjustMedication";
        case decision_type::change_scheme: return "ChangeScheme";
        case decision_type::trigger: return "Trigger";
        case decision_type::follow_plan: return "FollowPlan";
        case decision_type::oocyte_retrieval: return "OocyteRetrieval";
        case decision_type::start_lps: return "StartLPS";
        case decision_type::cycle_complete: return "CycleComplete";
    }
    return "?";
}

std::string_view to_string(alert_kind k) noexcept {
    switch (k) {
        case alert_kind::md_talk: return "MDTalk";
        case alert_kind::ovulation_risk: return "OvulationRisk";
        case alert_kind::poor_response: return "PoorResponse";
    }
    return "?";
}

std::string_view to_string(cycle_block b) noexcept {
    switch (b) {
        case cycle_block::b1: return "B1";
        case cycle_block::b2: return "B2";
        case cycle_block::b3: return "B3";
        case cycle_block::b4: return "B4";
        case cycle_block::lps: return "LPS";
        case cycle_block::done: return "Done";
        case cycle_block::cancelled: return "Cancelled";
    }
    return "?";
}

}  // namespace ivf
