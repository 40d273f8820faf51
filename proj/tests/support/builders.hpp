/**
 * @file builders.hpp
 * @brief Small constructors for visits, panels and exams used across tests
 */

#pragma once

#include "ivf/core/time.hpp"
#include "ivf/core/types.hpp"

#include <initializer_list>
#include <string>
#include <utility>

namespace ivf::test {

inline calendar_date day(int offset) {
    return std::chrono::sys_days{std::chrono::year{2024} / 3 / 1} + std::chrono::days{offset};
}

inline hormone_panel panel(double fsh, double lh, double e2, double p4, timestamp drawn = {}) {
    hormone_panel p;
    p.fsh = analyte_reading{fsh};
    p.lh = analyte_reading{lh};
    p.e2 = analyte_reading{e2};
    p.p4 = analyte_reading{p4};
    p.drawn_at = drawn;
    return p;
}

inline follicle_histogram exam(std::initializer_list<std::pair<const int, int>> bins,
                               timestamp at = {}) {
    follicle_histogram h;
    h.bins = bins;
    h.measured_at = at;
    return h;
}

/// Visit on day `offset` with blood drawn at 08:00 and ultrasound at 09:00 unless overridden.
inline visit_record visit(const std::string& pid, int offset, hormone_panel p,
                          follicle_histogram e, int cycle = 1) {
    visit_record v;
    v.patient_id = pid;
    v.cycle_number = cycle;
    v.visit_date = day(offset);
    v.panel = std::move(p);
    v.exam = std::move(e);
    if (v.panel.drawn_at == timestamp{}) v.panel.drawn_at = at_time(v.visit_date, 8);
    if (v.exam.measured_at == timestamp{}) v.exam.measured_at = at_time(v.visit_date, 9);
    return v;
}

inline patient_profile profile(const std::string& pid, int age, bool contraindicated = false) {
    return patient_profile{pid, age, 1, contraindicated};
}

}  // namespace ivf::test
