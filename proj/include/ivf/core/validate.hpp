/**
 * @file validate.hpp
 * @brief Invariant checks for visits and prescriptions; violations are data, not failures
 */

#pragma once

#include "ivf/core/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ivf {

struct violation {
    std::string field;  ///< e.g. "panel.p4"
    std::string rule;   ///< e.g. "missing-analyte"

    friend bool operator==(const violation&, const violation&) = default;
};

/**
 * @brief Checks every VisitRecord invariant.
 *
 * @param previous_visit_date date of the preceding visit in the same cycle,
 *        when known; an equal or later visit_date there is non-monotonic.
 * @return empty iff the visit is well formed
 */
[[nodiscard]] std::vector<violation> validate_visit(
    const visit_record& visit, std::optional<calendar_date> previous_visit_date = std::nullopt);

/// Prescription type invariants (dose grid, scheme and trigger rules).
[[nodiscard]] std::vector<violation> validate_prescription(const prescription& rx,
                                                           std::optional<scheme> active_scheme,
                                                           cycle_block block);

[[nodiscard]] std::vector<violation> validate_profile(const patient_profile& profile);

[[nodiscard]] std::string describe(const std::vector<violation>& violations);

}  // namespace ivf
