/**
 * @file serialize.hpp
 * @brief Canonical JSON form of every core type
 *
 * Field names are fixed and documented in schema/ivf.schema.json. Follicle
 * bins serialize as an object of string(size) -> integer(count). Enumerations
 * serialize as their display names ("MiniIVF", "Trigger", "below-detection").
 */

#pragma once

#include "ivf/core/types.hpp"
#include "ivf/core/validate.hpp"

#include <json.hpp>

#include <string>

namespace ivf {

using json = nlohmann::json;

void to_json(json& j, const analyte_reading& r);
void from_json(const json& j, analyte_reading& r);
void to_json(json& j, const hormone_panel& p);
void from_json(const json& j, hormone_panel& p);
void to_json(json& j, const follicle_histogram& h);
void from_json(const json& j, follicle_histogram& h);
void to_json(json& j, const patient_profile& p);
void from_json(const json& j, patient_profile& p);
void to_json(json& j, const gonadotropin_order& g);
void from_json(const json& j, gonadotropin_order& g);
void to_json(json& j, const trigger_medication& m);
void from_json(const json& j, trigger_medication& m);
void to_json(json& j, const prescription& p);
void from_json(const json& j, prescription& p);
void to_json(json& j, const trigger_plan& p);
void from_json(const json& j, trigger_plan& p);
void to_json(json& j, const decision& d);
void from_json(const json& j, decision& d);
void to_json(json& j, const visit_record& v);
void from_json(const json& j, visit_record& v);
void to_json(json& j, const rule_citation& c);
void from_json(const json& j, rule_citation& c);
void to_json(json& j, const alert& a);
void from_json(const json& j, alert& a);
void to_json(json& j, const advice& a);
void from_json(const json& j, advice& a);
void to_json(json& j, const cycle_state& s);
void from_json(const json& j, cycle_state& s);
void to_json(json& j, const violation& v);
void from_json(const json& j, violation& v);

// Enumerations; from_string throws ivf_error(unparseable) on unknown names.
[[nodiscard]] scheme scheme_from_string(std::string_view s);
[[nodiscard]] decision_type decision_type_from_string(std::string_view s);
[[nodiscard]] cycle_block block_from_string(std::string_view s);
[[nodiscard]] analyte_flag analyte_flag_from_string(std::string_view s);
[[nodiscard]] gonadotropin_agent agent_from_string(std::string_view s);
[[nodiscard]] trigger_drug trigger_drug_from_string(std::string_view s);
[[nodiscard]] alert_kind alert_kind_from_string(std::string_view s);

/// Serialize -> text in the canonical (compact, key-sorted) form.
template <typename T>
[[nodiscard]] std::string to_canonical(const T& value) {
    return json(value).dump();
}

}  // namespace ivf
