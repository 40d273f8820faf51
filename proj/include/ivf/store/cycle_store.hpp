/**
 * @file cycle_store.hpp
 * @brief Five-table persistent store: patients, blood tests, ultrasounds,
 *        egg retrievals and treatments
 *
 * Backed by an embedded SQLite database (a file path or ":memory:"). Every
 * non-patient row references an existing patient, and each of blood test,
 * ultrasound, retrieval and treatment is unique per (patient, cycle, date),
 * treatments additionally per source (engine advice or doctor decision).
 *
 * One connection serves all callers; a recursive mutex serializes access, so
 * a visit's blood and ultrasound rows are never observed half-written.
 */

#pragma once

#include "ivf/core/dataset.hpp"
#include "ivf/core/serialize.hpp"
#include "ivf/core/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ivf::store {

enum class treatment_source { engine, doctor };

[[nodiscard]] std::string_view to_string(treatment_source s) noexcept;

/// One Treatment row as stored.
struct treatment_record {
    std::string patient_id;
    int cycle_number{1};
    calendar_date date{};
    treatment_source source{treatment_source::engine};
    decision verdict;
    std::optional<prescription> orders;
    /// Canonical Advice JSON for engine rows; empty for doctor rows.
    std::string advice_json;
    std::string config_hash;

    friend bool operator==(const treatment_record&, const treatment_record&) = default;
};

void to_json(json& j, const treatment_record& t);
void from_json(const json& j, treatment_record& t);

struct cycle_entry {
    /// Carries the doctor's decision and prescription when a doctor row exists.
    visit_record visit;
    std::vector<treatment_record> treatments;
};

struct visit_ids {
    std::int64_t blood_id{0};
    std::int64_t ultrasound_id{0};
};

class cycle_store {
public:
    explicit cycle_store(const std::string& path = ":memory:");
    ~cycle_store();
    cycle_store(const cycle_store&) = delete;
    cycle_store& operator=(const cycle_store&) = delete;

    /// Throws duplicate_row if the patient exists, invalid_argument on a bad profile.
    void put_patient(const patient_profile& profile);
    [[nodiscard]] std::optional<patient_profile> get_patient(const std::string& patient_id) const;
    [[nodiscard]] std::vector<patient_profile> list_patients() const;

    /**
     * @brief Writes the visit's blood and ultrasound rows atomically, plus a
     * doctor Treatment row when the visit carries a doctor decision.
     * Throws missing_patient, duplicate_row or invalid_visit.
     */
    visit_ids put_visit(const visit_record& visit);

    /// Persists engine advice; an OocyteRetrieval with a count also writes an EggRetrieval row.
    std::int64_t put_treatment(const std::string& patient_id, int cycle_number, calendar_date date,
                               const advice& output, std::optional<int> oocytes = std::nullopt);

    /// Low-level form used by import and doctor decisions.
    std::int64_t put_treatment_record(const treatment_record& record);

    std::int64_t put_retrieval(const retrieval_record& retrieval);

    /// Date-ascending visits of one cycle with their treatment rows; empty for an unknown cycle.
    [[nodiscard]] std::vector<cycle_entry> list_cycle(const std::string& patient_id,
                                                      int cycle_number) const;

    /// Every (patient, cycle) that has at least one visit, in key order.
    [[nodiscard]] std::vector<std::pair<std::string, int>> list_cycles() const;

    [[nodiscard]] std::vector<treatment_record> list_treatments() const;
    [[nodiscard]] std::vector<retrieval_record> list_retrievals() const;

    /// Whole-store canonical JSON, rows in key order (independent of insertion order).
    [[nodiscard]] json export_json() const;
    /// Loads an export into this store in one transaction.
    void import_json(const json& doc);

    [[nodiscard]] dataset to_dataset() const;
    void import_dataset(const dataset& data);

    /// Runs `fn` inside one transaction; any exception rolls everything back.
    void atomically(const std::function<void()>& fn);

private:
    struct impl;
    std::unique_ptr<impl> impl_;
    mutable std::recursive_mutex mutex_;
};

}  // namespace ivf::store
