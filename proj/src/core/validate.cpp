/**
 * @file validate.cpp
 * @brief VisitRecord, Prescription and PatientProfile invariant checks
 */

#include "ivf/core/validate.hpp"

#include <cctype>
#include <cmath>
#include <string>

namespace ivf {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

std::vector<violation> validate_visit(const visit_record& visit,
                                      std::optional<calendar_date> previous_visit_date) {
    std::vector<violation> out;
    if (visit.patient_id.empty()) out.push_back({"patient_id", "empty"});
    if (visit.cycle_number < 1) out.push_back({"cycle_number", "below-1"});

    for (const auto a : all_analytes) {
        const auto field = "panel." + lower(to_string(a));
        const auto& r = visit.panel.reading(a);
        if (!r) {
            out.push_back({field, "missing-analyte(" + std::string(to_string(a)) + ")"});
        } else if (!std::isfinite(r->value) || r->value < 0.0) {
            out.push_back({field, "negative-or-nonfinite"});
        }
    }
    if (date_of(visit.panel.drawn_at) != visit.visit_date) {
        out.push_back({"panel.drawn_at", "not-on-visit-date"});
    }
    if (date_of(visit.exam.measured_at) != visit.visit_date) {
        out.push_back({"exam.measured_at", "not-on-visit-date"});
    }
    for (const auto& [size, count] : visit.exam.bins) {
        const auto field = "exam.bins." + std::to_string(size);
        if (size < min_follicle_mm || size > max_follicle_mm) {
            out.push_back({field, "size-out-of-range"});
        }
        if (count < 0) out.push_back({field, "negative-count"});
    }
    if (previous_visit_date && visit.visit_date <= *previous_visit_date) {
        out.push_back({"visit_date", "non-monotonic-date"});
    }
    return out;
}

std::vector<violation> validate_prescription(const prescription& rx,
                                             std::optional<scheme> active_scheme,
                                             cycle_block block) {
    std::vector<violation> out;
    const int dose = rx.gonadotropin.dose_iu;
    if (dose != 0 && (dose < min_active_dose_iu || dose > max_dose_iu || dose % dose_step_iu != 0)) {
        out.push_back({"gonadotropin.dose_iu", "off-dose-grid"});
    }
    if (rx.clomid_mg != 0.0 && rx.clomid_mg != 50.0) {
        out.push_back({"clomid_mg", "not-0-or-50"});
    }
    if (rx.letrozole_mg != 0.0 && rx.letrozole_mg != 2.5) {
        out.push_back({"letrozole_mg", "not-0-or-2.5"});
    }
    if (active_scheme == scheme::natural_ivf &&
        (dose != 0 || rx.clomid_mg != 0.0 || rx.letrozole_mg != 0.0)) {
        out.push_back({"prescription", "medication-on-natural-scheme"});
    }
    if (!rx.trigger_meds.empty() && block != cycle_block::b3) {
        out.push_back({"trigger_meds", "outside-trigger-block"});
    }
    for (const auto& med : rx.trigger_meds) {
        const bool ok = med.drug == trigger_drug::lupron ? (med.units == 1 || med.units == 2)
                                                         : med.units == 1;
        if (!ok) out.push_back({"trigger_meds", "invalid-units"});
    }
    return out;
}

std::vector<violation> validate_profile(const patient_profile& profile) {
    std::vector<violation> out;
    if (profile.patient_id.empty()) out.push_back({"patient_id", "empty"});
    if (profile.age < 18 || profile.age > 60) out.push_back({"age", "outside-18-60"});
    if (profile.cycle_number < 1) out.push_back({"cycle_number", "below-1"});
    return out;
}

std::string describe(const std::vector<violation>& violations) {
    std::string out;
    for (const auto& v : violations) {
        if (!out.empty()) out += "; ";
        out += v.field + ": " + v.rule;
    }
    return out;
}

}  // namespace ivf
