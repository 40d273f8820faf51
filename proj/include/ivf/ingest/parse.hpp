/**
 * @file parse.hpp
 * @brief Tolerant parsers for EMR-exported hormone values and follicle maps
 *
 * Hormone value grammar (surrounding whitespace ignored):
 *
 *     value   := [marker] ws* ['+'] number ws* [unit]
 *     marker  := "<" | "<=" | ">" | ">="         (detection limit; value = limit)
 *     number  := digits with '.' or ',' as decimal mark; thousands separators
 *                are recognised in "1,234.5", "1.234,5" and "1,234" forms
 *     unit    := mIU/mL | IU/L | mU/mL | U/L      (FSH, LH)
 *              | pg/mL | pmol/L                  (E2; pmol/L converted)
 *              | ng/mL | nmol/L                  (P4; nmol/L converted)
 *
 * A lone comma followed by exactly three digits with a non-zero integer part
 * ("1,234") is read as a thousands separator; otherwise a lone comma is the
 * decimal mark ("12,3", "0,125").
 *
 * Follicle map grammar: the canonical JSON object {"15": 3, ...}, or a
 * list of items separated by ',' or ';' where an item is `size[mm]` optionally
 * followed by one of x X * : and a count ("15x3, 12x2", "15mm:3", "15, 12").
 * The empty string, "none" and "-" denote an exam with no follicles. Sizes
 * round half-up to whole millimetres and clamp to 2..30 with a warning.
 */

#pragma once

#include "ivf/core/error.hpp"
#include "ivf/core/types.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ivf::ingest {

/// Outcome of a non-throwing parse: either a value or an error with the offending text.
template <typename T>
struct parse_result {
    std::optional<T> value;
    errc code{errc::unparseable};
    std::string reason;
    std::string offending;
    std::vector<std::string> warnings;

    [[nodiscard]] bool ok() const noexcept { return value.has_value(); }
    [[nodiscard]] std::string message() const;
};

template <typename T>
std::string parse_result<T>::message() const {
    return reason + (offending.empty() ? std::string{} : ": '" + offending + "'");
}

[[nodiscard]] parse_result<analyte_reading> try_parse_hormone_value(
    std::string_view raw, std::optional<analyte> target = std::nullopt);

/// Throws ivf_error(unparseable) carrying the offending substring.
[[nodiscard]] analyte_reading parse_hormone_value(std::string_view raw,
                                                  std::optional<analyte> target = std::nullopt);

/// Canonical text for a reading: "<5", ">200" or the shortest round-trip decimal.
[[nodiscard]] std::string format_hormone_value(const analyte_reading& reading);

/// The histogram's `measured_at` is left at its default; callers set it.
[[nodiscard]] parse_result<follicle_histogram> try_parse_follicle_map(std::string_view raw);

/// Throws ivf_error(unparseable | negative_count). Clamp warnings go to `warnings` if given.
[[nodiscard]] follicle_histogram parse_follicle_map(std::string_view raw,
                                                    std::vector<std::string>* warnings = nullptr);

/// Canonical text for a histogram's bins (the JSON object form).
[[nodiscard]] std::string format_follicle_map(const follicle_histogram& exam);

/// Accepts canonical decision names and spaced/underscored variants ("MD Talk", "continue_ocp").
[[nodiscard]] std::optional<decision_type> parse_decision_name(std::string_view raw);

[[nodiscard]] std::optional<scheme> parse_scheme_name(std::string_view raw);

}  // namespace ivf::ingest
