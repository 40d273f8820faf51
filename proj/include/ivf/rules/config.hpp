/**
 * @file config.hpp
 * @brief Rule thresholds, defaulting to the published protocol tables
 *
 * A rules_config is loaded from one versioned JSON document. Any value that
 * differs from the built-in default is recorded in `overrides` together with
 * the document's provenance string, and every Advice carries the SHA-256 of
 * the canonical config dump.
 */

#pragma once

#include "ivf/core/serialize.hpp"
#include "ivf/core/types.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace ivf::rules {

// =============================================================================
// Block 1: preparation eligibility
// =============================================================================

/// Hormone maxima for one age band. Every bound is strict (value < max).
struct block1_band {
    double fsh_max{15.0};
    double lh_max{8.5};
    double e2_max{50.0};
    double p4_max{1.5};

    friend bool operator==(const block1_band&, const block1_band&) = default;
};

struct block1_thresholds {
    /// Younger band is age < age_split.
    int age_split{42};
    block1_band younger{15.0, 8.5, 50.0, 1.5};
    block1_band older{15.0, 6.0, 65.0, 1.5};
    /// Younger band needs antral count >= count_base - age.
    int count_base{45};
    /// Older band needs count_min <= antral count <= count_max.
    int older_count_min{1};
    int older_count_max{6};
    /// Every follicle must be <= this size.
    int max_follicle_size_mm{8};

    [[nodiscard]] const block1_band& band_for(int age) const {
        return age < age_split ? younger : older;
    }

    friend bool operator==(const block1_thresholds&, const block1_thresholds&) = default;
};

// =============================================================================
// Block 2: stimulation windows and maturity
// =============================================================================

struct bound {
    double value{0.0};
    bool inclusive{false};

    friend bool operator==(const bound&, const bound&) = default;
};

/// Optional lower/upper bound pair; absent sides are unbounded.
struct analyte_window {
    std::optional<bound> lower;
    std::optional<bound> upper;

    [[nodiscard]] bool above_lower(double v) const {
        return !lower || (lower->inclusive ? v >= lower->value : v > lower->value);
    }
    [[nodiscard]] bool below_upper(double v) const {
        return !upper || (upper->inclusive ? v <= upper->value : v < upper->value);
    }
    [[nodiscard]] bool contains(double v) const { return above_lower(v) && below_upper(v); }

    friend bool operator==(const analyte_window&, const analyte_window&) = default;
};

struct block2_window {
    analyte_window fsh;
    analyte_window lh;
    analyte_window e2;
    analyte_window p4;
    bool growth_required{true};

    [[nodiscard]] const analyte_window& for_analyte(analyte a) const;

    friend bool operator==(const block2_window&, const block2_window&) = default;
};

struct block2_windows {
    /// Mini and Ultra-mini IVF.
    block2_window medicated{
        {bound{15.0, true}, bound{25.0, true}},
        {std::nullopt, bound{15.0, false}},
        {bound{50.0, false}, std::nullopt},
        {std::nullopt, bound{1.2, false}},
        true,
    };
    block2_window natural{
        {bound{5.0, true}, bound{25.0, true}},
        {bound{2.0, true}, bound{15.0, true}},
        {bound{80.0, false}, std::nullopt},
        {std::nullopt, bound{1.0, false}},
        true,
    };

    [[nodiscard]] const block2_window& for_scheme(scheme s) const {
        return s == scheme::natural_ivf ? natural : medicated;
    }

    friend bool operator==(const block2_windows&, const block2_windows&) = default;
};

/// fraction_at_least(size_mm) >= percent/100 (inclusive).
struct maturity_rule {
    int size_mm{15};
    int percent{60};

    friend bool operator==(const maturity_rule&, const maturity_rule&) = default;
};

struct growth_rules {
    int lead_cohort{6};
    /// mm/day at or above which the lead cohort is "growing".
    double growing_mm_per_day{1.0};
    /// mm/day at or below which it is "shrinking".
    double shrinking_mm_per_day{0.0};

    friend bool operator==(const growth_rules&, const growth_rules&) = default;
};

struct dosing_rules {
    int mini_initial_iu{150};
    int ultra_mini_initial_iu{75};
    double clomid_mg{50.0};
    double letrozole_mg{2.5};
    int step_iu{dose_step_iu};
    int min_iu{min_active_dose_iu};
    int max_iu{max_dose_iu};
    /// Growing follicles with E2 above this get one step down.
    double e2_high{4000.0};

    friend bool operator==(const dosing_rules&, const dosing_rules&) = default;
};

struct escalation_rules {
    /// Consecutive slow/shrinking stimulation visits that trigger escalation.
    int slow_streak_limit{2};
    /// Consecutive ineligible preparation visits that raise an MD talk.
    int preparation_md_talk_after{3};
    /// MD talks at which replay statistics mark a cycle cancelled.
    int md_talk_cancel_limit{3};
    /// When set, the engine itself moves the cycle to Cancelled at the limit.
    bool cancel_on_md_talk_limit{false};

    friend bool operator==(const escalation_rules&, const escalation_rules&) = default;
};

struct interval_rules {
    std::vector<int> stimulation_pattern{5, 3, 1, 1, 1};
    int preparation_default_days{7};
    int preparation_min_days{5};
    int preparation_max_days{9};
    /// A hormone within this fraction of its threshold shortens the revisit.
    double near_threshold_fraction{0.10};

    friend bool operator==(const interval_rules&, const interval_rules&) = default;
};

struct trigger_rules {
    double e2_split{4000.0};
    /// "Follicles larger than 15 mm" under whole-mm binning: size >= 16.
    int big_follicle_min_mm{16};
    int big_follicle_count{6};
    /// LH strictly above this is a natural surge: no trigger medication.
    double lh_no_trigger{25.0};
    double lh_surge_ratio{2.0};
    int no_trigger_hours{24};
    int surge_hours{30};
    int default_hours_younger{36};
    int default_hours_older{34};
    int age_split{40};
    /// Trigger shot hour on the decision day (local clinic time, stored as UTC).
    int trigger_hour{21};

    friend bool operator==(const trigger_rules&, const trigger_rules&) = default;
};

struct post_trigger_rules {
    /// Retrieval must happen strictly before trigger + this many hours.
    int ovulation_window_hours{48};
    int lps_min_age{40};
    int lps_small_size_mm{18};
    /// Follicles smaller than lps_small_size_mm must exceed this count.
    int lps_small_count_exclusive{4};

    friend bool operator==(const post_trigger_rules&, const post_trigger_rules&) = default;
};

struct rules_config {
    int version{1};
    std::string provenance{"built-in defaults"};
    block1_thresholds block1;
    block2_windows block2;
    std::array<maturity_rule, 2> maturity{maturity_rule{15, 60}, maturity_rule{18, 30}};
    growth_rules growth;
    dosing_rules dosing;
    escalation_rules escalation;
    interval_rules intervals;
    trigger_rules trigger;
    post_trigger_rules post_trigger;
    /// Dotted paths of values that differ from the defaults (not hashed).
    std::vector<std::string> overrides;

    /// Throws ivf_error(invalid_config) on internally inconsistent values.
    void validate() const;
};

void to_json(json& j, const rules_config& cfg);

/// Reads a (possibly partial) document on top of the defaults.
[[nodiscard]] rules_config rules_config_from_json(const json& doc);

/// Loads and validates; logs each override with the document's provenance to std::clog.
[[nodiscard]] rules_config load_rules_config(const std::string& path);

/// Lower-case hex SHA-256 of the canonical dump (excluding the overrides list).
[[nodiscard]] std::string config_hash(const rules_config& cfg);

}  // namespace ivf::rules
