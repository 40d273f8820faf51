/**
 * @file engine.cpp
 * @brief Block dispatch and the cycle state transition
 */

#include "ivf/rules/engine.hpp"

#include "ivf/core/error.hpp"
#include "ivf/core/validate.hpp"

#include <algorithm>

namespace ivf::rules {

bool permitted(cycle_block block, decision_type type) noexcept {
    using d = decision_type;
    switch (block) {
        case cycle_block::b1:
            return type == d::continue_ocp || type == d::md_talk || type == d::start_stimulation;
        case cycle_block::b2:
        case cycle_block::lps:
            return type == d::continue_stimulation || type == d::adjust_medication ||
                   type == d::change_scheme || type == d::md_talk || type == d::trigger;
        case cycle_block::b3:
            return type == d::follow_plan || type == d::oocyte_retrieval || type == d::md_talk;
        case cycle_block::b4:
            return type == d::follow_plan || type == d::oocyte_retrieval || type == d::md_talk ||
                   type == d::start_lps || type == d::cycle_complete;
        case cycle_block::done:
        case cycle_block::cancelled:
            return false;
    }
    return false;
}

cycle_block successor_block(cycle_block block, decision_type type) noexcept {
    using d = decision_type;
    switch (block) {
        case cycle_block::b1:
            return type == d::start_stimulation ? cycle_block::b2 : block;
        case cycle_block::b2:
        case cycle_block::lps:
            return type == d::trigger ? cycle_block::b3 : block;
        case cycle_block::b3:
            return cycle_block::b4;
        case cycle_block::b4:
            if (type == d::start_lps) return cycle_block::lps;
            if (type == d::cycle_complete) return cycle_block::done;
            return block;
        default:
            return block;
    }
}

int block_rank(cycle_block block) noexcept {
    switch (block) {
        case cycle_block::b1: return 1;
        case cycle_block::b2: return 2;
        case cycle_block::b3: return 3;
        case cycle_block::b4: return 4;
        case cycle_block::lps: return 5;
        case cycle_block::done: return 6;
        case cycle_block::cancelled: return 7;
    }
    return 0;
}

bool is_allowed_edge(cycle_block from, cycle_block to) noexcept {
    if (from == to) return from != cycle_block::done && from != cycle_block::cancelled;
    if (to == cycle_block::cancelled) {
        return from != cycle_block::done && from != cycle_block::cancelled;
    }
    switch (from) {
        case cycle_block::b1: return to == cycle_block::b2;
        case cycle_block::b2: return to == cycle_block::b3;
        case cycle_block::b3: return to == cycle_block::b4;
        case cycle_block::b4: return to == cycle_block::done || to == cycle_block::lps;
        case cycle_block::lps: return to == cycle_block::b3;
        default: return false;
    }
}

void check_visit(const cycle_state& state, const visit_record& visit) {
    if (state.block == cycle_block::done || state.block == cycle_block::cancelled) {
        throw ivf_error(errc::block_mismatch,
                        "cycle is " + std::string(to_string(state.block)) + "; no further visits");
    }
    if (visit.patient_id != state.profile.patient_id ||
        visit.cycle_number != state.profile.cycle_number) {
        throw ivf_error(errc::wrong_cycle, "visit belongs to " + visit.patient_id + " cycle " +
                                               std::to_string(visit.cycle_number));
    }
    const auto violations = validate_visit(visit, state.last_visit_date);
    for (const auto& v : violations) {
        if (v.rule == "non-monotonic-date") {
            throw ivf_error(errc::stale_visit, "visit " + format_date(visit.visit_date) +
                                                   " is not after " +
                                                   format_date(*state.last_visit_date));
        }
    }
    if (!violations.empty()) throw ivf_error(errc::invalid_visit, describe(violations));
}

evaluation evaluate(const cycle_state& state, const visit_record& visit, const rules_config& cfg) {
    switch (state.block) {
        case cycle_block::b1:
            return evaluate_block1(state.profile, visit.panel, visit.exam, cfg,
                                   state.preparation_streak);
        case cycle_block::b2:
        case cycle_block::lps:
            return evaluate_block2(state, visit, cfg);
        case cycle_block::b3:
        case cycle_block::b4:
            return evaluate_block4(state, visit.observed_at(), state.profile, visit.exam, cfg);
        case cycle_block::done:
        case cycle_block::cancelled:
            break;
    }
    throw ivf_error(errc::block_mismatch, "no evaluator for a terminal cycle");
}

namespace {

gonadotropin_agent other_agent(gonadotropin_agent a) {
    return a == gonadotropin_agent::follistim ? gonadotropin_agent::gonal_f
                                              : gonadotropin_agent::follistim;
}

void apply_stimulation(cycle_state& next, const cycle_state& state, const visit_record& visit,
                       const decision& verdict, const rules_config& cfg, prescription& orders) {
    const auto growth = visit_growth(state, visit, cfg);
    const bool bad_growth = growth && *growth != growth_class::growing;
    const bool medicated = state.active_scheme && *state.active_scheme != scheme::natural_ivf;
    if (growth == growth_class::shrinking && medicated) {
        next.poor_response_agents.insert(
            std::string(to_string(state.current_prescription.gonadotropin.agent)));
    }

    switch (verdict.type) {
        case decision_type::trigger: {
            const auto plan = verdict.plan ? *verdict.plan : plan_trigger(state, visit, cfg);
            next.block = cycle_block::b3;
            next.active_trigger_plan = plan;
            orders = prescription{};
            orders.gonadotropin.agent = state.current_prescription.gonadotropin.agent;
            orders.trigger_meds = plan.medications;
            next.slow_growth_streak = 0;
            return;
        }
        case decision_type::continue_stimulation:
            next.slow_growth_streak = 0;
            break;
        case decision_type::adjust_medication:
            orders = adjust_prescription(state, growth.value_or(growth_class::growing),
                                         visit.panel, cfg);
            next.slow_growth_streak = bad_growth ? state.slow_growth_streak + 1 : 0;
            break;
        case decision_type::change_scheme: {
            const scheme target = verdict.target_scheme.value_or(scheme::ultra_mini_ivf);
            next.active_scheme = target;
            next.scheme_changed = true;
            next.slow_growth_streak = 0;
            if (target == scheme::natural_ivf) {
                orders = initial_prescription(scheme::natural_ivf, cfg.dosing);
            } else {
                const auto agent = orders.gonadotropin.agent;
                if (next.poor_response_agents.count(std::string(to_string(agent))) &&
                    !next.poor_response_agents.count(std::string(to_string(other_agent(agent))))) {
                    orders.gonadotropin.agent = other_agent(agent);
                }
            }
            break;
        }
        case decision_type::md_talk:
            ++next.md_talk_count;
            next.slow_growth_streak = bad_growth ? state.slow_growth_streak + 1 : 0;
            break;
        default:
            break;
    }
    ++next.stim_visit_index;
}

}  // namespace

transition_result apply_decision(const cycle_state& state, const visit_record& visit,
                                 const decision& verdict, const rules_config& cfg,
                                 const std::optional<prescription>& orders_override) {
    if (!permitted(state.block, verdict.type)) {
        throw ivf_error(errc::block_mismatch, std::string(to_string(verdict.type)) +
                                                  " is not permitted in block " +
                                                  std::string(to_string(state.block)));
    }
    cycle_state next = state;
    prescription orders = state.current_prescription;

    switch (state.block) {
        case cycle_block::b1:
            if (verdict.type == decision_type::continue_ocp) {
                ++next.preparation_streak;
            } else if (verdict.type == decision_type::md_talk) {
                ++next.md_talk_count;
                next.preparation_streak = 0;
            } else {
                const scheme chosen = verdict.target_scheme.value_or(
                    select_scheme(state.profile, visit.panel, visit.exam, cfg.block1));
                next.block = cycle_block::b2;
                next.active_scheme = chosen;
                next.stim_visit_index = 0;
                next.slow_growth_streak = 0;
                next.preparation_streak = 0;
                orders = initial_prescription(chosen, cfg.dosing);
            }
            break;

        case cycle_block::b2:
        case cycle_block::lps:
            apply_stimulation(next, state, visit, verdict, cfg, orders);
            break;

        case cycle_block::b3:
            next.block = cycle_block::b4;
            orders.trigger_meds.clear();
            if (verdict.type == decision_type::oocyte_retrieval) next.retrieval_done = true;
            if (verdict.type == decision_type::md_talk) ++next.md_talk_count;
            break;

        case cycle_block::b4:
            switch (verdict.type) {
                case decision_type::oocyte_retrieval:
                    next.retrieval_done = true;
                    break;
                case decision_type::md_talk:
                    ++next.md_talk_count;
                    break;
                case decision_type::start_lps: {
                    const scheme active = state.active_scheme.value_or(scheme::ultra_mini_ivf);
                    next.block = cycle_block::lps;
                    next.lps_done = true;
                    next.retrieval_done = false;
                    next.active_trigger_plan.reset();
                    next.stim_visit_index = 0;
                    next.slow_growth_streak = 0;
                    orders = initial_prescription(active, cfg.dosing,
                                                  state.current_prescription.gonadotropin.agent);
                    break;
                }
                case decision_type::cycle_complete:
                    next.block = cycle_block::done;
                    next.active_trigger_plan.reset();
                    break;
                default:
                    break;
            }
            break;

        case cycle_block::done:
        case cycle_block::cancelled:
            break;
    }

    if (orders_override) orders = *orders_override;
    next.current_prescription = orders;
    next.last_panel = visit.panel;
    next.last_exam = visit.exam;
    next.last_visit_date = visit.visit_date;

    const auto& esc = cfg.escalation;
    if (esc.cancel_on_md_talk_limit && next.md_talk_count >= esc.md_talk_cancel_limit &&
        next.block != cycle_block::done) {
        next.block = cycle_block::cancelled;
        next.active_trigger_plan.reset();
    }
    return {std::move(next), std::move(orders)};
}

// =============================================================================
// engine
// =============================================================================

std::optional<int> next_visit_in_days(const cycle_state& before, const visit_record& visit,
                                      decision_type type, const cycle_state& after,
                                      const rules_config& cfg) {
    if (after.block == cycle_block::cancelled) return std::nullopt;
    switch (before.block) {
        case cycle_block::b1:
            return type == decision_type::start_stimulation
                       ? next_interval(0, cfg.intervals)
                       : preparation_interval(before.profile, visit.panel, cfg);
        case cycle_block::b2:
        case cycle_block::lps:
            return type == decision_type::trigger ? 1
                                                  : next_interval(after.stim_visit_index, cfg.intervals);
        case cycle_block::b3:
            return 1;
        case cycle_block::b4:
            if (type == decision_type::start_lps) return next_interval(0, cfg.intervals);
            if (type == decision_type::cycle_complete) return std::nullopt;
            return 1;
        default:
            return std::nullopt;
    }
}

engine::engine(rules_config cfg) : cfg_(std::move(cfg)), hash_(rules::config_hash(cfg_)) {
    cfg_.validate();
}

transition_result engine::apply(const cycle_state& state, const visit_record& visit,
                                const decision& verdict,
                                const std::optional<prescription>& orders_override) const {
    check_visit(state, visit);
    return apply_decision(state, visit, verdict, cfg_, orders_override);
}

step_result engine::advise(const cycle_state& state, const visit_record& visit) const {
    check_visit(state, visit);
    auto eval = evaluate(state, visit, cfg_);
    auto applied = apply_decision(state, visit, eval.verdict, cfg_);

    step_result out;
    out.output.verdict = std::move(eval.verdict);
    out.output.explanation = std::move(eval.trace);
    out.output.alerts = std::move(eval.alerts);
    out.output.orders = applied.orders;
    out.output.config_hash = hash_;

    const auto days = next_visit_in_days(state, visit, out.output.verdict.type, applied.next, cfg_);
    out.output.next_visit_in_days = days;
    out.next = std::move(applied.next);
    return out;
}

}  // namespace ivf::rules
