/**
 * @file block2.cpp
 * @brief Stimulation block: maturity, growth, hormone windows, dosing
 */

#include "ivf/rules/evaluators.hpp"

#include "ivf/core/error.hpp"

#include "citation.hpp"

#include <algorithm>

namespace ivf::rules {

using detail::cite;

std::string_view to_string(growth_class g) noexcept {
    switch (g) {
        case growth_class::growing: return "growing";
        case growth_class::slow: return "slow";
        case growth_class::shrinking: return "shrinking";
    }
    return "?";
}

bool maturity_check(const follicle_histogram& exam, const rules_config& cfg) {
    if (total(exam) <= 0) throw ivf_error(errc::empty_exam, "maturity check on an empty exam");
    return std::any_of(cfg.maturity.begin(), cfg.maturity.end(), [&](const maturity_rule& m) {
        return fraction_at_least(exam, m.size_mm).at_least_percent(m.percent);
    });
}

double lead_growth_rate(const follicle_histogram& prev, const follicle_histogram& curr,
                        int elapsed_days, const growth_rules& cfg) {
    if (elapsed_days < 1) {
        throw ivf_error(errc::invalid_argument, "growth check needs elapsed_days >= 1");
    }
    if (total(prev) <= 0 || total(curr) <= 0) {
        throw ivf_error(errc::empty_exam, "growth check on an empty exam");
    }
    return (lead_cohort_mean(curr, cfg.lead_cohort) - lead_cohort_mean(prev, cfg.lead_cohort)) /
           elapsed_days;
}

growth_class growth_check(const follicle_histogram& prev, const follicle_histogram& curr,
                          int elapsed_days, const growth_rules& cfg) {
    const double rate = lead_growth_rate(prev, curr, elapsed_days, cfg);
    if (rate >= cfg.growing_mm_per_day) return growth_class::growing;
    if (rate <= cfg.shrinking_mm_per_day) return growth_class::shrinking;
    return growth_class::slow;
}

int next_interval(int stim_visit_index, const interval_rules& cfg) {
    if (stim_visit_index < 0) {
        throw ivf_error(errc::invalid_argument, "stimulation visit index must be >= 0");
    }
    const auto& pattern = cfg.stimulation_pattern;
    const auto idx = std::min(static_cast<std::size_t>(stim_visit_index), pattern.size() - 1);
    return pattern[idx];
}

prescription initial_prescription(scheme s, const dosing_rules& cfg, gonadotropin_agent agent) {
    prescription rx;
    rx.gonadotropin.agent = agent;
    switch (s) {
        case scheme::mini_ivf:
            rx.gonadotropin.dose_iu = cfg.mini_initial_iu;
            rx.clomid_mg = cfg.clomid_mg;
            rx.letrozole_mg = cfg.letrozole_mg;
            break;
        case scheme::ultra_mini_ivf:
            rx.gonadotropin.dose_iu = cfg.ultra_mini_initial_iu;
            rx.clomid_mg = cfg.clomid_mg;
            rx.letrozole_mg = cfg.letrozole_mg;
            break;
        case scheme::natural_ivf:
            break;
    }
    return rx;
}

prescription adjust_prescription(const cycle_state& state, growth_class growth,
                                 const hormone_panel& panel, const rules_config& cfg) {
    if (!state.active_scheme || *state.active_scheme == scheme::natural_ivf) {
        throw ivf_error(errc::adjustment_on_natural_scheme,
                        "natural IVF uses no medication to adjust");
    }
    const auto& d = cfg.dosing;
    const auto& window = cfg.block2.for_scheme(*state.active_scheme);
    auto rx = state.current_prescription;
    int dose = rx.gonadotropin.dose_iu;
    const auto up = [&] { dose = std::min(std::max(dose + d.step_iu, d.min_iu), d.max_iu); };
    const auto down = [&] { dose = std::max(dose - d.step_iu, d.min_iu); };

    switch (growth) {
        case growth_class::slow:
        case growth_class::shrinking:
            up();
            break;
        case growth_class::growing: {
            const double fsh = panel.value(analyte::fsh);
            const double lh = panel.value(analyte::lh);
            const double e2 = panel.value(analyte::e2);
            if (e2 > d.e2_high) {
                down();
            } else if (!window.fsh.above_lower(fsh) || !window.e2.above_lower(e2)) {
                up();
            } else if (!window.fsh.below_upper(fsh) || !window.lh.below_upper(lh)) {
                down();
            }
            break;
        }
    }
    rx.gonadotropin.dose_iu = dose;
    return rx;
}

std::optional<growth_class> visit_growth(const cycle_state& state, const visit_record& visit,
                                         const rules_config& cfg) {
    if (!state.last_exam || !state.last_visit_date) return std::nullopt;
    if (total(*state.last_exam) <= 0 || total(visit.exam) <= 0) return std::nullopt;
    const int elapsed = days_between(*state.last_visit_date, visit.visit_date);
    if (elapsed < 1) return std::nullopt;
    return growth_check(*state.last_exam, visit.exam, elapsed, cfg.growth);
}

namespace {

std::string rule_name(analyte a, const char* side) {
    return "B2." + std::string(to_string(a)) + side;
}

/// One citation per present window bound.
void cite_windows(const block2_window& window, const hormone_panel& panel,
                  std::vector<rule_citation>& trace) {
    for (const auto a : all_analytes) {
        const auto& w = window.for_analyte(a);
        const double v = panel.value(a);
        if (w.lower) {
            trace.push_back(cite(rule_name(a, "_MIN"), v, w.lower->inclusive ? ">=" : ">",
                                 w.lower->value, w.above_lower(v)));
        }
        if (w.upper) {
            trace.push_back(cite(rule_name(a, "_MAX"), v, w.upper->inclusive ? "<=" : "<",
                                 w.upper->value, w.below_upper(v)));
        }
    }
}

}  // namespace

evaluation evaluate_block2(const cycle_state& state, const visit_record& visit,
                           const rules_config& cfg) {
    evaluation out;
    const scheme active = state.active_scheme.value_or(scheme::mini_ivf);
    const auto& exam = visit.exam;
    const auto& panel = visit.panel;

    if (total(exam) <= 0) {
        out.trace.push_back(cite("B2.EXAM_EMPTY", 0, ">", 0, false, "no follicles measured"));
        out.trace.back().decisive = true;
        out.verdict = decision::of(decision_type::md_talk);
        out.alerts.push_back(detail::md_talk_alert("no-follicles", "B2.EXAM_EMPTY"));
        return out;
    }

    bool mature = false;
    for (std::size_t i = 0; i < cfg.maturity.size(); ++i) {
        const auto& m = cfg.maturity[i];
        const auto f = fraction_at_least(exam, m.size_mm);
        const bool ok = f.at_least_percent(m.percent);
        out.trace.push_back(cite("B2.MATURITY_" + std::to_string(m.size_mm),
                                 f.total > 0 ? f.count * 100.0 / f.total : 0.0,
                                 ">=", m.percent, ok,
                                 std::to_string(f.count) + "/" + std::to_string(f.total) +
                                     " follicles >= " + std::to_string(m.size_mm) + " mm"));
        if (ok) {
            out.trace.back().decisive = true;
            mature = true;
        }
    }
    if (mature) {
        out.verdict = decision::trigger(plan_trigger(state, visit, cfg, &out.trace));
        return out;
    }

    const auto& window = cfg.block2.for_scheme(active);
    cite_windows(window, panel, out.trace);

    if (!window.p4.below_upper(panel.value(analyte::p4))) {
        detail::mark_decisive(out.trace, "B2.P4_MAX");
        out.verdict = decision::of(decision_type::md_talk);
        out.alerts.push_back(detail::md_talk_alert("p4-above-max", "B2.P4_MAX"));
        return out;
    }

    const auto growth = visit_growth(state, visit, cfg);
    const bool bad_growth = growth && *growth != growth_class::growing;
    if (growth) {
        const int elapsed = days_between(*state.last_visit_date, visit.visit_date);
        const double rate = lead_growth_rate(*state.last_exam, exam, elapsed, cfg.growth);
        out.trace.push_back(cite("B2.GROWTH", rate, ">=", cfg.growth.growing_mm_per_day,
                                 !bad_growth,
                                 "lead-cohort growth " + std::string(to_string(*growth)) +
                                     " (mm/day)"));
    } else {
        out.trace.push_back(cite("B2.GROWTH", 0.0, ">=", cfg.growth.growing_mm_per_day, true,
                                 "no comparable prior exam; assumed growing"));
    }
    if (growth == growth_class::shrinking && active != scheme::natural_ivf) {
        out.alerts.push_back(alert{alert_kind::poor_response,
                                   std::string(to_string(state.current_prescription.gonadotropin.agent)),
                                   "B2.GROWTH"});
    }

    std::vector<std::string> violated;
    for (const auto& c : out.trace) {
        const bool hormone_window = c.rule_id.rfind("B2.FSH", 0) == 0 ||
                                    c.rule_id.rfind("B2.LH", 0) == 0 ||
                                    c.rule_id.rfind("B2.E2", 0) == 0;
        if (hormone_window && !c.satisfied) violated.push_back(c.rule_id);
    }

    if (active == scheme::natural_ivf && (bad_growth || !violated.empty())) {
        if (bad_growth) {
            detail::mark_decisive(out.trace, "B2.GROWTH");
        }
        for (const auto& id : violated) detail::mark_decisive(out.trace, id);
        const auto& rule = bad_growth ? std::string("B2.GROWTH") : violated.front();
        out.verdict = decision::of(decision_type::md_talk);
        out.alerts.push_back(detail::md_talk_alert("natural-scheme-cannot-adjust", rule));
        return out;
    }

    const int streak = bad_growth ? state.slow_growth_streak + 1 : 0;
    const int limit = cfg.escalation.slow_streak_limit;
    out.trace.push_back(cite("B2.SLOW_STREAK", streak, ">=", limit, streak >= limit,
                             "consecutive slow or shrinking visits"));

    if (bad_growth && streak >= limit) {
        detail::mark_decisive(out.trace, "B2.SLOW_STREAK");
        if (active == scheme::mini_ivf && !state.scheme_changed) {
            out.verdict = decision::change_scheme(scheme::ultra_mini_ivf);
        } else {
            out.verdict = decision::of(decision_type::md_talk);
            out.alerts.push_back(detail::md_talk_alert("slow-growth-escalation", "B2.SLOW_STREAK"));
        }
        return out;
    }
    if (bad_growth) {
        detail::mark_decisive(out.trace, "B2.GROWTH");
        out.verdict = decision::of(decision_type::adjust_medication);
        return out;
    }
    if (!violated.empty()) {
        for (const auto& id : violated) detail::mark_decisive(out.trace, id);
        out.verdict = decision::of(decision_type::adjust_medication);
        return out;
    }
    const double e2 = panel.value(analyte::e2);
    if (active != scheme::natural_ivf && e2 > cfg.dosing.e2_high) {
        out.trace.push_back(cite("B2.E2_HIGH", e2, ">", cfg.dosing.e2_high, true,
                                 "rapid E2 rise: step dose down"));
        out.trace.back().decisive = true;
        out.verdict = decision::of(decision_type::adjust_medication);
        return out;
    }
    detail::mark_decisive(out.trace, "B2.GROWTH");
    out.verdict = decision::of(decision_type::continue_stimulation);
    return out;
}

}  // namespace ivf::rules
