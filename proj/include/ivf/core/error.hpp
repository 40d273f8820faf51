/**
 * @file error.hpp
 * @brief Error codes and the exception type shared by every ivf module
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ivf {

enum class errc {
    invalid_argument,
    invalid_visit,
    stale_visit,
    block_mismatch,
    wrong_cycle,
    empty_exam,
    missing_trigger_plan,
    adjustment_on_natural_scheme,
    nonpositive_lh,
    unparseable,
    negative_count,
    missing_patient,
    duplicate_row,
    unsorted_input,
    mixed_cycle,
    invalid_config,
    io_failure,
};

/// Stable machine-readable reason code, e.g. "stale-visit".
[[nodiscard]] std::string_view to_string(errc code) noexcept;

class ivf_error : public std::runtime_error {
public:
    ivf_error(errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] errc code() const noexcept { return code_; }

private:
    errc code_;
};

}  // namespace ivf
