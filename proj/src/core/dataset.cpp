/**
 * @file dataset.cpp
 */

#include "ivf/core/dataset.hpp"

#include "ivf/core/error.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>

namespace ivf {

const patient_profile* dataset::find_patient(const std::string& patient_id) const {
    const auto it = std::find_if(patients.begin(), patients.end(),
                                 [&](const patient_profile& p) { return p.patient_id == patient_id; });
    return it == patients.end() ? nullptr : &*it;
}

std::optional<int> dataset::oocytes(const std::string& patient_id, int cycle) const {
    std::optional<int> out;
    for (const auto& r : retrievals) {
        if (r.patient_id == patient_id && r.cycle_number == cycle) out = out.value_or(0) + r.oocytes;
    }
    return out;
}

void dataset::sort() {
    std::sort(patients.begin(), patients.end(), [](const auto& a, const auto& b) {
        return std::tie(a.patient_id, a.cycle_number) < std::tie(b.patient_id, b.cycle_number);
    });
    std::stable_sort(visits.begin(), visits.end(), [](const auto& a, const auto& b) {
        return std::tie(a.patient_id, a.cycle_number, a.visit_date) <
               std::tie(b.patient_id, b.cycle_number, b.visit_date);
    });
    std::stable_sort(retrievals.begin(), retrievals.end(), [](const auto& a, const auto& b) {
        return std::tie(a.patient_id, a.cycle_number, a.date) <
               std::tie(b.patient_id, b.cycle_number, b.date);
    });
}

void to_json(json& j, const retrieval_record& r) {
    j = json{{"patient_id", r.patient_id},
             {"cycle_number", r.cycle_number},
             {"date", format_date(r.date)},
             {"oocytes", r.oocytes}};
}

void from_json(const json& j, retrieval_record& r) {
    r.patient_id = j.at("patient_id").get<std::string>();
    r.cycle_number = j.value("cycle_number", 1);
    r.date = parse_date(j.at("date").get<std::string>());
    r.oocytes = j.at("oocytes").get<int>();
    if (r.oocytes < 0) throw ivf_error(errc::negative_count, "oocytes must be >= 0");
}

void to_json(json& j, const dataset& d) {
    j = json{{"patients", d.patients}, {"visits", d.visits}, {"retrievals", d.retrievals}};
}

void from_json(const json& j, dataset& d) {
    d.patients = j.value("patients", std::vector<patient_profile>{});
    d.visits = j.value("visits", std::vector<visit_record>{});
    d.retrievals = j.value("retrievals", std::vector<retrieval_record>{});
}

dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ivf_error(errc::io_failure, "cannot open dataset " + path);
    try {
        return json::parse(in).get<dataset>();
    } catch (const json::exception& e) {
        throw ivf_error(errc::unparseable, "dataset " + path + ": " + e.what());
    }
}

void save_dataset(const dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ivf_error(errc::io_failure, "cannot write dataset " + path);
    out << json(d).dump() << '\n';
    if (!out) throw ivf_error(errc::io_failure, "write failed for " + path);
}

}  // namespace ivf
