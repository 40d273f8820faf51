/**
 * @file block1.cpp
 * @brief Preparation block: eligibility, scheme selection, revisit interval
 */

#include "ivf/rules/evaluators.hpp"

#include "citation.hpp"

#include <algorithm>
#include <cmath>

namespace ivf::rules {

using detail::cite;

namespace {

/// Every preparation condition as a citation; the conjunction decides eligibility.
std::vector<rule_citation> block1_conditions(const patient_profile& profile,
                                             const hormone_panel& panel,
                                             const follicle_histogram& exam,
                                             const block1_thresholds& cfg) {
    const auto& band = cfg.band_for(profile.age);
    const double fsh = panel.value(analyte::fsh);
    const double lh = panel.value(analyte::lh);
    const double e2 = panel.value(analyte::e2);
    const double p4 = panel.value(analyte::p4);
    const int count = total(exam);
    const int largest = largest_follicle(exam).value_or(0);

    std::vector<rule_citation> out;
    out.push_back(cite("B1.FSH", fsh, "<", band.fsh_max, fsh < band.fsh_max));
    out.push_back(cite("B1.LH", lh, "<", band.lh_max, lh < band.lh_max));
    out.push_back(cite("B1.E2", e2, "<", band.e2_max, e2 < band.e2_max));
    out.push_back(cite("B1.P4", p4, "<", band.p4_max, p4 < band.p4_max));
    if (profile.age < cfg.age_split) {
        const int need = cfg.count_base - profile.age;
        out.push_back(cite("B1.COUNT", count, ">=", need, count >= need,
                           "antral count >= " + std::to_string(cfg.count_base) + " - age"));
    } else {
        out.push_back(cite("B1.COUNT_MIN", count, ">=", cfg.older_count_min,
                           count >= cfg.older_count_min));
        out.push_back(cite("B1.COUNT_MAX", count, "<=", cfg.older_count_max,
                           count <= cfg.older_count_max));
    }
    out.push_back(cite("B1.SIZE", largest, "<=", cfg.max_follicle_size_mm,
                       largest <= cfg.max_follicle_size_mm, "largest follicle (mm)"));
    return out;
}

}  // namespace

bool block1_eligible(const patient_profile& profile, const hormone_panel& panel,
                     const follicle_histogram& exam, const block1_thresholds& cfg) {
    const auto conditions = block1_conditions(profile, panel, exam, cfg);
    return std::all_of(conditions.begin(), conditions.end(),
                       [](const rule_citation& c) { return c.satisfied; });
}

scheme select_scheme(const patient_profile& profile, const hormone_panel&,
                     const follicle_histogram& exam, const block1_thresholds& cfg) {
    if (profile.medication_contraindicated) return scheme::natural_ivf;
    const int count = total(exam);
    if (profile.age >= cfg.age_split ||
        (count >= cfg.older_count_min && count <= cfg.older_count_max)) {
        return scheme::ultra_mini_ivf;
    }
    return scheme::mini_ivf;
}

int preparation_interval(const patient_profile& profile, const hormone_panel& panel,
                         const rules_config& cfg) {
    const auto& band = cfg.block1.band_for(profile.age);
    const auto& iv = cfg.intervals;
    const std::pair<analyte, double> limits[] = {{analyte::fsh, band.fsh_max},
                                                 {analyte::lh, band.lh_max},
                                                 {analyte::e2, band.e2_max},
                                                 {analyte::p4, band.p4_max}};
    int days = iv.preparation_default_days;
    for (const auto& [a, limit] : limits) {
        const auto& r = panel.reading(a);
        if (r && std::abs(r->value - limit) <= iv.near_threshold_fraction * limit) {
            days = iv.preparation_min_days;
            break;
        }
    }
    return std::clamp(days, iv.preparation_min_days, iv.preparation_max_days);
}

evaluation evaluate_block1(const patient_profile& profile, const hormone_panel& panel,
                           const follicle_histogram& exam, const rules_config& cfg,
                           int preparation_streak) {
    evaluation out;
    out.trace = block1_conditions(profile, panel, exam, cfg.block1);
    const int satisfied = static_cast<int>(std::count_if(
        out.trace.begin(), out.trace.end(), [](const rule_citation& c) { return c.satisfied; }));
    const int required = static_cast<int>(out.trace.size());

    if (satisfied == required) {
        const auto chosen = select_scheme(profile, panel, exam, cfg.block1);
        out.trace.push_back(cite("B1.ELIGIBLE", satisfied, "==", required, true,
                                 "all preparation conditions hold"));
        out.trace.back().decisive = true;
        out.trace.push_back(cite("S1.SCHEME", total(exam), ">=", 0, true,
                                 "proposed " + std::string(to_string(chosen))));
        out.verdict = decision::start_stimulation(chosen);
        return out;
    }

    const int streak = preparation_streak + 1;
    const int limit = cfg.escalation.preparation_md_talk_after;
    auto streak_rule = cite("B1.PREP_STREAK", streak, ">=", limit, streak >= limit,
                            "consecutive ineligible preparation visits");
    if (streak >= limit) {
        streak_rule.decisive = true;
        out.trace.push_back(streak_rule);
        out.verdict = decision::of(decision_type::md_talk);
        out.alerts.push_back(detail::md_talk_alert("preparation-not-responding", "B1.PREP_STREAK"));
        return out;
    }
    for (auto& c : out.trace) {
        if (!c.satisfied) c.decisive = true;
    }
    out.trace.push_back(streak_rule);
    out.verdict = decision::of(decision_type::continue_ocp);
    return out;
}

}  // namespace ivf::rules
