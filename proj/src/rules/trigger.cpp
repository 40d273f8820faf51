/**
 * @file trigger.cpp
 * @brief Trigger medication/duration planning and the post-trigger block
 */

#include "ivf/rules/evaluators.hpp"

#include "ivf/core/error.hpp"

#include "citation.hpp"

#include <algorithm>

namespace ivf::rules {

using detail::cite;

std::vector<trigger_regimen> trigger_medication(double e2, int big_follicles,
                                                const trigger_rules& cfg) {
    const ivf::trigger_medication lupron1{trigger_drug::lupron, 1};
    const ivf::trigger_medication lupron2{trigger_drug::lupron, 2};
    const ivf::trigger_medication ovidrel{trigger_drug::ovidrel, 1};
    if (e2 < cfg.e2_split) return {{lupron1}};
    if (big_follicles < cfg.big_follicle_count) return {{lupron1}, {ovidrel}};
    return {{lupron2}, {lupron1, ovidrel}};
}

trigger_timing trigger_duration(double lh_prev, double lh_curr, int age,
                                const trigger_rules& cfg) {
    if (!(lh_prev > 0.0)) {
        throw ivf_error(errc::nonpositive_lh, "previous LH must be positive to compute its rise");
    }
    if (lh_curr > cfg.lh_no_trigger) return {cfg.no_trigger_hours, true};
    if (lh_curr / lh_prev >= cfg.lh_surge_ratio) return {cfg.surge_hours, false};
    return {age < cfg.age_split ? cfg.default_hours_younger : cfg.default_hours_older, false};
}

trigger_plan plan_trigger(const cycle_state& state, const visit_record& visit,
                          const rules_config& cfg, std::vector<rule_citation>* trace) {
    const auto& t = cfg.trigger;
    const double lh_curr = visit.panel.value(analyte::lh);
    double lh_prev = lh_curr;
    if (state.last_panel && state.last_panel->lh && state.last_panel->lh->value > 0.0) {
        lh_prev = state.last_panel->lh->value;
    }
    if (!(lh_prev > 0.0)) lh_prev = 0.01;  // LH reported as 0: no measurable rise

    const auto timing = trigger_duration(lh_prev, lh_curr, state.profile.age, t);
    const double ratio = lh_curr / lh_prev;
    std::vector<rule_citation> local;
    local.push_back(cite("B3.LH_NO_TRIGGER", lh_curr, ">", t.lh_no_trigger, timing.no_trigger,
                         "natural LH surge replaces the trigger shot"));
    if (!timing.no_trigger) {
        local.push_back(cite("B3.LH_RISE", ratio, ">=", t.lh_surge_ratio,
                             ratio >= t.lh_surge_ratio, "LH rise since previous panel"));
        if (ratio < t.lh_surge_ratio) {
            local.push_back(cite("B3.AGE", state.profile.age, "<", t.age_split,
                                 state.profile.age < t.age_split, "age selects default duration"));
        }
    }

    trigger_plan plan;
    plan.no_trigger = timing.no_trigger;
    plan.duration_hours = timing.duration_hours;
    if (!timing.no_trigger) {
        const double e2 = visit.panel.value(analyte::e2);
        const int big = count_at_least(visit.exam, t.big_follicle_min_mm);
        const auto options = trigger_medication(e2, big, t);
        std::string alternatives;
        for (std::size_t i = 1; i < options.size(); ++i) {
            alternatives += (i > 1 ? " | " : "") + describe(options[i]);
        }
        const std::string note =
            "recommended " + describe(options.front()) +
            (alternatives.empty() ? std::string{} : "; alternatives: " + alternatives);
        local.push_back(cite("B3.E2", e2, "<", t.e2_split, e2 < t.e2_split, note));
        if (e2 >= t.e2_split) {
            local.push_back(cite("B3.BIG_FOLLICLES", big, ">=", t.big_follicle_count,
                                 big >= t.big_follicle_count,
                                 "follicles >= " + std::to_string(t.big_follicle_min_mm) + " mm"));
        }
        plan.medications = options.front();
    }
    plan.trigger_at = std::max(visit.observed_at(), at_time(visit.visit_date, t.trigger_hour));
    plan.scheduled_retrieval = plan.trigger_at + std::chrono::hours{plan.duration_hours};

    if (trace) trace->insert(trace->end(), local.begin(), local.end());
    return plan;
}

bool lps_check(int age, const follicle_histogram& exam, const post_trigger_rules& cfg) {
    return age >= cfg.lps_min_age &&
           count_below(exam, cfg.lps_small_size_mm) > cfg.lps_small_count_exclusive;
}

evaluation evaluate_block4(const cycle_state& state, timestamp now,
                           const patient_profile& profile, const follicle_histogram& exam,
                           const rules_config& cfg) {
    if (!state.active_trigger_plan) {
        throw ivf_error(errc::missing_trigger_plan, "post-trigger evaluation without a trigger plan");
    }
    const auto& plan = *state.active_trigger_plan;
    const auto& pt = cfg.post_trigger;
    evaluation out;

    if (state.retrieval_done) {
        const int small = count_below(exam, pt.lps_small_size_mm);
        out.trace.push_back(cite("B4.LPS_AGE", profile.age, ">=", pt.lps_min_age,
                                 profile.age >= pt.lps_min_age));
        out.trace.push_back(cite("B4.LPS_SMALL_FOLLICLES", small, ">",
                                 pt.lps_small_count_exclusive, small > pt.lps_small_count_exclusive,
                                 "follicles < " + std::to_string(pt.lps_small_size_mm) + " mm"));
        out.trace.push_back(cite("B4.LPS_UNUSED", state.lps_done ? 1 : 0, "==", 0, !state.lps_done,
                                 "one LPS round per cycle"));
        if (lps_check(profile.age, exam, pt) && !state.lps_done) {
            for (auto& c : out.trace) c.decisive = true;
            out.verdict = decision::of(decision_type::start_lps);
        } else {
            for (auto& c : out.trace) c.decisive = !c.satisfied;
            out.verdict = decision::of(decision_type::cycle_complete);
        }
        return out;
    }

    const double hours = hours_between(plan.trigger_at, now);
    const int window = pt.ovulation_window_hours;
    out.trace.push_back(cite("B4.OVULATION_WINDOW", hours, "<", window, hours < window,
                             "hours since trigger"));
    out.trace.push_back(cite("B4.SCHEDULE", hours, ">=", plan.duration_hours,
                             now >= plan.scheduled_retrieval, "scheduled retrieval reached"));
    if (hours >= window) {
        detail::mark_decisive(out.trace, "B4.OVULATION_WINDOW");
        out.verdict = decision::of(decision_type::md_talk);
        out.alerts.push_back(alert{alert_kind::ovulation_risk, "no retrieval within window",
                                   "B4.OVULATION_WINDOW"});
        out.alerts.push_back(detail::md_talk_alert("ovulation-risk", "B4.OVULATION_WINDOW"));
    } else if (now >= plan.scheduled_retrieval) {
        detail::mark_decisive(out.trace, "B4.SCHEDULE");
        out.verdict = decision::of(decision_type::oocyte_retrieval);
    } else {
        detail::mark_decisive(out.trace, "B4.SCHEDULE");
        out.verdict = decision::of(decision_type::follow_plan);
    }
    return out;
}

}  // namespace ivf::rules
