/**
 * @file serialize.cpp
 * @brief Canonical JSON for the core types
 */

#include "ivf/core/serialize.hpp"

#include "ivf/core/error.hpp"

#include <charconv>

namespace ivf {

namespace {

template <typename Enum, std::size_t N>
Enum enum_from(std::string_view text, const std::array<Enum, N>& values, const char* what) {
    for (const auto v : values) {
        if (to_string(v) == text) return v;
    }
    throw ivf_error(errc::unparseable,
                    std::string("unknown ") + what + " '" + std::string(text) + "'");
}

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& value) {
    if (value) j[key] = *value;
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& out) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) {
        out = it->template get<T>();
    } else {
        out.reset();
    }
}

}  // namespace

// =============================================================================
// Enumerations
// =============================================================================

scheme scheme_from_string(std::string_view s) {
    return enum_from(s, std::array{scheme::mini_ivf, scheme::ultra_mini_ivf, scheme::natural_ivf},
                     "scheme");
}

decision_type decision_type_from_string(std::string_view s) {
    return enum_from(s, all_decision_types, "decision");
}

cycle_block block_from_string(std::string_view s) {
    return enum_from(s,
                     std::array{cycle_block::b1, cycle_block::b2, cycle_block::b3, cycle_block::b4,
                                cycle_block::lps, cycle_block::done, cycle_block::cancelled},
                     "block");
}

analyte_flag analyte_flag_from_string(std::string_view s) {
    return enum_from(s,
                     std::array{analyte_flag::exact, analyte_flag::below_detection,
                                analyte_flag::above_detection},
                     "analyte flag");
}

gonadotropin_agent agent_from_string(std::string_view s) {
    return enum_from(s, std::array{gonadotropin_agent::follistim, gonadotropin_agent::gonal_f},
                     "agent");
}

trigger_drug trigger_drug_from_string(std::string_view s) {
    return enum_from(s, std::array{trigger_drug::lupron, trigger_drug::ovidrel}, "trigger drug");
}

alert_kind alert_kind_from_string(std::string_view s) {
    return enum_from(
        s, std::array{alert_kind::md_talk, alert_kind::ovulation_risk, alert_kind::poor_response},
        "alert");
}

// =============================================================================
// Blood and ultrasound
// =============================================================================

void to_json(json& j, const analyte_reading& r) {
    j = json{{"value", r.value}, {"flag", to_string(r.flag)}};
}

void from_json(const json& j, analyte_reading& r) {
    r.value = j.at("value").get<double>();
    r.flag = j.contains("flag") ? analyte_flag_from_string(j.at("flag").get<std::string>())
                                : analyte_flag::exact;
}

void to_json(json& j, const hormone_panel& p) {
    j = json::object();
    put_optional(j, "fsh", p.fsh);
    put_optional(j, "lh", p.lh);
    put_optional(j, "e2", p.e2);
    put_optional(j, "p4", p.p4);
    j["drawn_at"] = format_timestamp(p.drawn_at);
}

void from_json(const json& j, hormone_panel& p) {
    get_optional(j, "fsh", p.fsh);
    get_optional(j, "lh", p.lh);
    get_optional(j, "e2", p.e2);
    get_optional(j, "p4", p.p4);
    p.drawn_at = parse_timestamp(j.at("drawn_at").get<std::string>());
}

void to_json(json& j, const follicle_histogram& h) {
    json bins = json::object();
    for (const auto& [size, count] : h.bins) bins[std::to_string(size)] = count;
    j = json{{"bins", std::move(bins)}, {"measured_at", format_timestamp(h.measured_at)}};
}

void from_json(const json& j, follicle_histogram& h) {
    h.bins.clear();
    for (const auto& [key, count] : j.at("bins").items()) {
        int size = 0;
        auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), size);
        if (ec != std::errc{} || ptr != key.data() + key.size()) {
            throw ivf_error(errc::unparseable, "follicle bin key '" + key + "' is not an integer");
        }
        h.bins[size] += count.get<int>();
    }
    h.measured_at = parse_timestamp(j.at("measured_at").get<std::string>());
}

// =============================================================================
// Patient and medication
// =============================================================================

void to_json(json& j, const patient_profile& p) {
    j = json{{"patient_id", p.patient_id},
             {"age", p.age},
             {"cycle_number", p.cycle_number},
             {"medication_contraindicated", p.medication_contraindicated}};
}

void from_json(const json& j, patient_profile& p) {
    p.patient_id = j.at("patient_id").get<std::string>();
    p.age = j.at("age").get<int>();
    p.cycle_number = j.value("cycle_number", 1);
    p.medication_contraindicated = j.value("medication_contraindicated", false);
}

void to_json(json& j, const gonadotropin_order& g) {
    j = json{{"agent", to_string(g.agent)}, {"dose_iu", g.dose_iu}};
}

void from_json(const json& j, gonadotropin_order& g) {
    g.agent = agent_from_string(j.at("agent").get<std::string>());
    g.dose_iu = j.at("dose_iu").get<int>();
}

void to_json(json& j, const trigger_medication& m) {
    j = json{{"drug", to_string(m.drug)}, {"units", m.units}};
}

void from_json(const json& j, trigger_medication& m) {
    m.drug = trigger_drug_from_string(j.at("drug").get<std::string>());
    m.units = j.value("units", 1);
}

void to_json(json& j, const prescription& p) {
    j = json{{"gonadotropin", p.gonadotropin},
             {"clomid_mg", p.clomid_mg},
             {"letrozole_mg", p.letrozole_mg},
             {"trigger_meds", p.trigger_meds}};
}

void from_json(const json& j, prescription& p) {
    p.gonadotropin = j.at("gonadotropin").get<gonadotropin_order>();
    p.clomid_mg = j.value("clomid_mg", 0.0);
    p.letrozole_mg = j.value("letrozole_mg", 0.0);
    p.trigger_meds = j.value("trigger_meds", trigger_regimen{});
}

// =============================================================================
// Decisions and visits
// =============================================================================

void to_json(json& j, const trigger_plan& p) {
    j = json{{"medications", p.medications},
             {"no_trigger", p.no_trigger},
             {"duration_hours", p.duration_hours},
             {"trigger_at", format_timestamp(p.trigger_at)},
             {"scheduled_retrieval", format_timestamp(p.scheduled_retrieval)}};
}

void from_json(const json& j, trigger_plan& p) {
    p.medications = j.value("medications", trigger_regimen{});
    p.no_trigger = j.value("no_trigger", false);
    p.duration_hours = j.at("duration_hours").get<int>();
    p.trigger_at = parse_timestamp(j.at("trigger_at").get<std::string>());
    p.scheduled_retrieval = parse_timestamp(j.at("scheduled_retrieval").get<std::string>());
}

void to_json(json& j, const decision& d) {
    j = json{{"kind", to_string(d.type)}};
    if (d.target_scheme) j["scheme"] = to_string(*d.target_scheme);
    put_optional(j, "plan", d.plan);
}

void from_json(const json& j, decision& d) {
    d.type = decision_type_from_string(j.at("kind").get<std::string>());
    if (auto it = j.find("scheme"); it != j.end() && !it->is_null()) {
        d.target_scheme = scheme_from_string(it->get<std::string>());
    } else {
        d.target_scheme.reset();
    }
    get_optional(j, "plan", d.plan);
}

void to_json(json& j, const visit_record& v) {
    j = json{{"patient_id", v.patient_id},
             {"cycle_number", v.cycle_number},
             {"visit_date", format_date(v.visit_date)},
             {"panel", v.panel},
             {"exam", v.exam}};
    put_optional(j, "doctor_decision", v.doctor_decision);
    put_optional(j, "doctor_prescription", v.doctor_prescription);
}

void from_json(const json& j, visit_record& v) {
    v.patient_id = j.at("patient_id").get<std::string>();
    v.cycle_number = j.value("cycle_number", 1);
    v.visit_date = parse_date(j.at("visit_date").get<std::string>());
    v.panel = j.at("panel").get<hormone_panel>();
    v.exam = j.at("exam").get<follicle_histogram>();
    get_optional(j, "doctor_decision", v.doctor_decision);
    get_optional(j, "doctor_prescription", v.doctor_prescription);
}

// =============================================================================
// Advice and state
// =============================================================================

void to_json(json& j, const rule_citation& c) {
    j = json{{"rule_id", c.rule_id},   {"observed", c.observed},   {"comparator", c.comparator},
             {"threshold", c.threshold}, {"satisfied", c.satisfied}, {"decisive", c.decisive}};
    if (!c.note.empty()) j["note"] = c.note;
}

void from_json(const json& j, rule_citation& c) {
    c.rule_id = j.at("rule_id").get<std::string>();
    c.observed = j.at("observed").get<double>();
    c.comparator = j.at("comparator").get<std::string>();
    c.threshold = j.at("threshold").get<double>();
    c.satisfied = j.at("satisfied").get<bool>();
    c.decisive = j.value("decisive", false);
    c.note = j.value("note", std::string{});
}

void to_json(json& j, const alert& a) {
    j = json{{"kind", to_string(a.kind)}, {"detail", a.detail}, {"rule_id", a.rule_id}};
}

void from_json(const json& j, alert& a) {
    a.kind = alert_kind_from_string(j.at("kind").get<std::string>());
    a.detail = j.value("detail", std::string{});
    a.rule_id = j.value("rule_id", std::string{});
}

void to_json(json& j, const advice& a) {
    j = json{{"decision", a.verdict},
             {"explanation", a.explanation},
             {"prescription", a.orders},
             {"alerts", a.alerts},
             {"next_visit_in_days", a.next_visit_in_days ? json(*a.next_visit_in_days) : json()},
             {"config_hash", a.config_hash}};
}

void from_json(const json& j, advice& a) {
    a.verdict = j.at("decision").get<decision>();
    a.explanation = j.at("explanation").get<std::vector<rule_citation>>();
    a.orders = j.at("prescription").get<prescription>();
    a.alerts = j.value("alerts", std::vector<alert>{});
    get_optional(j, "next_visit_in_days", a.next_visit_in_days);
    a.config_hash = j.value("config_hash", std::string{});
}

void to_json(json& j, const cycle_state& s) {
    j = json{{"profile", s.profile},
             {"block", to_string(s.block)},
             {"stim_visit_index", s.stim_visit_index},
             {"current_prescription", s.current_prescription},
             {"poor_response_agents", s.poor_response_agents},
             {"md_talk_count", s.md_talk_count},
             {"slow_growth_streak", s.slow_growth_streak},
             {"preparation_streak", s.preparation_streak},
             {"scheme_changed", s.scheme_changed},
             {"retrieval_done", s.retrieval_done},
             {"lps_done", s.lps_done}};
    if (s.active_scheme) j["scheme"] = to_string(*s.active_scheme);
    put_optional(j, "last_panel", s.last_panel);
    put_optional(j, "last_exam", s.last_exam);
    if (s.last_visit_date) j["last_visit_date"] = format_date(*s.last_visit_date);
    put_optional(j, "trigger_plan", s.active_trigger_plan);
}

void from_json(const json& j, cycle_state& s) {
    s.profile = j.at("profile").get<patient_profile>();
    s.block = block_from_string(j.at("block").get<std::string>());
    s.stim_visit_index = j.value("stim_visit_index", 0);
    s.current_prescription = j.at("current_prescription").get<prescription>();
    s.poor_response_agents = j.value("poor_response_agents", std::set<std::string>{});
    s.md_talk_count = j.value("md_talk_count", 0);
    s.slow_growth_streak = j.value("slow_growth_streak", 0);
    s.preparation_streak = j.value("preparation_streak", 0);
    s.scheme_changed = j.value("scheme_changed", false);
    s.retrieval_done = j.value("retrieval_done", false);
    s.lps_done = j.value("lps_done", false);
    if (auto it = j.find("scheme"); it != j.end() && !it->is_null()) {
        s.active_scheme = scheme_from_string(it->get<std::string>());
    } else {
        s.active_scheme.reset();
    }
    get_optional(j, "last_panel", s.last_panel);
    get_optional(j, "last_exam", s.last_exam);
    if (auto it = j.find("last_visit_date"); it != j.end() && !it->is_null()) {
        s.last_visit_date = parse_date(it->get<std::string>());
    } else {
        s.last_visit_date.reset();
    }
    get_optional(j, "trigger_plan", s.active_trigger_plan);
}

void to_json(json& j, const violation& v) {
    j = json{{"field", v.field}, {"rule", v.rule}};
}

void from_json(const json& j, violation& v) {
    v.field = j.at("field").get<std::string>();
    v.rule = j.at("rule").get<std::string>();
}

}  // namespace ivf
