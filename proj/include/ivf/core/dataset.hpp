/**
 * @file dataset.hpp
 * @brief A self-contained bundle of patients, visits and retrieval outcomes
 *
 * This is the interchange form between ingestion, the synthetic cohort
 * generator, the store export and replay.
 */

#pragma once

#include "ivf/core/serialize.hpp"
#include "ivf/core/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ivf {

struct retrieval_record {
    std::string patient_id;
    int cycle_number{1};
    calendar_date date{};
    int oocytes{0};

    friend bool operator==(const retrieval_record&, const retrieval_record&) = default;
};

struct dataset {
    std::vector<patient_profile> patients;
    /// Sorted by (patient_id, cycle_number, visit_date).
    std::vector<visit_record> visits;
    std::vector<retrieval_record> retrievals;

    [[nodiscard]] const patient_profile* find_patient(const std::string& patient_id) const;
    [[nodiscard]] std::optional<int> oocytes(const std::string& patient_id, int cycle) const;

    /// Sorts visits and retrievals into canonical order.
    void sort();

    friend bool operator==(const dataset&, const dataset&) = default;
};

void to_json(json& j, const retrieval_record& r);
void from_json(const json& j, retrieval_record& r);
void to_json(json& j, const dataset& d);
void from_json(const json& j, dataset& d);

[[nodiscard]] dataset load_dataset(const std::string& path);
void save_dataset(const dataset& d, const std::string& path);

}  // namespace ivf
