/**
 * @file synth.hpp
 * @brief Deterministic synthetic cohorts with recorded "doctor" decisions
 *
 * Each patient gets a latent condition severity in [0, 1] that lowers their
 * antral count, slows follicle growth and reduces oocyte yield. The doctor
 * follows the engine, except that with probability `leniency` the doctor
 * relaxes a preparation or dosing decision (or skips LPS), and each trigger
 * is delayed by a uniformly drawn number of days in [trigger_delay_min,
 * trigger_delay_max]. With leniency 0 and no delay the doctor is the engine.
 */

#pragma once

#include "ivf/core/dataset.hpp"
#include "ivf/core/serialize.hpp"
#include "ivf/rules/engine.hpp"

#include <cstdint>
#include <string>

namespace ivf::replay {

struct synth_config {
    std::uint64_t seed{42};
    int patients{100};
    double leniency{0.0};
    int trigger_delay_min{0};
    int trigger_delay_max{0};
    /// Fraction of cycles with a spontaneous LH surge near maturity.
    double lh_surge_fraction{0.15};
    /// Scales how strongly severity acts on the physiology (0 = none).
    double severity_coupling{1.0};
    int age_min{25};
    int age_max{45};
    /// Hard cap on visits per cycle; a cycle that hits it ends without retrieval.
    int max_visits{60};

    /// Throws ivf_error(invalid_config).
    void validate() const;

    friend bool operator==(const synth_config&, const synth_config&) = default;
};

void to_json(json& j, const synth_config& c);
/// Reads a partial document on top of the defaults.
void from_json(const json& j, synth_config& c);

/**
 * @brief Parses "seed=7,patients=500,leniency=0.1,trigger_delay=1-2,...".
 * Keys: seed, patients, leniency, trigger_delay (N or A-B), lh_surge,
 * severity, age (A-B), max_visits. Throws ivf_error(invalid_config).
 */
[[nodiscard]] synth_config synth_config_from_string(std::string_view spec);

/// Same seed and config give the same dataset on every run and platform.
[[nodiscard]] dataset synth_cohort(const synth_config& cfg, const rules::engine& eng);

[[nodiscard]] dataset synth_cohort(std::uint64_t seed, int n_patients, synth_config cfg,
                                   const rules::engine& eng);

}  // namespace ivf::replay
