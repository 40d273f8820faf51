/**
 * @file error.cpp
 * @brief Reason codes for ivf::errc
 */

#include "ivf/core/error.hpp"

namespace ivf {

std::string_view to_string(errc code) noexcept {
    switch (code) {
        case errc::invalid_argument: return "invalid-argument";
        case errc::invalid_visit: return "invalid-visit";
        case errc::stale_visit: return "stale-visit";
        case errc::block_mismatch: return "block-mismatch";
        case errc::wrong_cycle: return "wrong-cycle";
        case errc::empty_exam: return "empty-exam";
        case errc::missing_trigger_plan: return "missing-trigger-plan";
        case errc::adjustment_on_natural_scheme: return "adjustment-on-natural-scheme";
        case errc::nonpositive_lh: return "nonpositive-lh";
        case errc::unparseable: return "unparseable";
        case errc::negative_count: return "negative-count";
        case errc::missing_patient: return "missing-patient";
        case errc::duplicate_row: return "duplicate-row";
        case errc::unsorted_input: return "unsorted-input";
        case errc::mixed_cycle: return "mixed-cycle";
        case errc::invalid_config: return "invalid-config";
        case errc::io_failure: return "io-failure";
    }
    return "unknown";
}

}  // namespace ivf
