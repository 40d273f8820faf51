/**
 * @file normalize.hpp
 * @brief Raw EMR rows -> visits, patients and retrieval outcomes
 *
 * Readers turn delimited text or JSON lines into raw_records whose field
 * names are already mapped to the canonical column names below. A row that
 * cannot even be read (bad quoting, wrong column count, malformed JSON) still
 * becomes a raw_record carrying a `defect`, so that every input row is
 * accounted for in the ingest_report.
 *
 * Canonical columns: patient_id, cycle_number, date, time, age,
 * contraindicated, fsh, lh, e2, p4, follicles, oocytes, decision, scheme.
 */

#pragma once

#include "ivf/core/dataset.hpp"
#include "ivf/core/serialize.hpp"

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ivf::ingest {

enum class record_kind { patient, blood, ultrasound, retrieval, treatment };

[[nodiscard]] std::string_view to_string(record_kind k) noexcept;
[[nodiscard]] std::optional<record_kind> record_kind_from_string(std::string_view s);

struct raw_record {
    std::optional<record_kind> kind;
    std::map<std::string, std::string> fields;
    int source_line{1};
    /// Set when the row itself could not be read; the record is then rejected.
    std::string defect;

    friend bool operator==(const raw_record&, const raw_record&) = default;
};

struct rejection {
    int source_line{0};
    std::string reason;

    friend bool operator==(const rejection&, const rejection&) = default;
};

struct ingest_report {
    int accepted{0};
    int rejected{0};
    std::vector<rejection> rejections;
    std::vector<std::string> warnings;

    /// Folds another report in (line numbers are kept as-is).
    void merge(const ingest_report& other);
};

void to_json(json& j, const ingest_report& r);
void from_json(const json& j, ingest_report& r);

/// Column-name mapping and reader options, loaded from a JSON document.
struct column_mapping {
    /// Source column -> canonical column (matched case-insensitively).
    std::map<std::string, std::string> columns;
    /// Column whose value names the record kind; empty disables it.
    std::string kind_column{"record_type"};
    /// Source kind value -> kind (matched case-insensitively), on top of the canonical names.
    std::map<std::string, record_kind> kind_values;
    /// Kind used when a row has no kind column value; otherwise inferred from its fields.
    std::optional<record_kind> default_kind;
    /// 0 for the field delimiter to be inferred from the header line.
    char delimiter{0};
    /// Blood/ultrasound pairing window in calendar days (0 = same day, at most 1).
    int pairing_window_days{0};
    /// Times of day assumed when a row carries only a date.
    int blood_hour{8};
    int ultrasound_hour{9};

    [[nodiscard]] std::string canonical_column(const std::string& source) const;
    [[nodiscard]] std::optional<record_kind> kind_for(const std::string& value) const;
};

[[nodiscard]] column_mapping mapping_from_json(const json& doc);
[[nodiscard]] column_mapping load_mapping(const std::string& path);

/// CSV/TSV with a header line. Quoted fields follow the usual doubled-quote escaping.
[[nodiscard]] std::vector<raw_record> read_delimited(std::istream& in, const column_mapping& mapping);

/// One JSON object per line; nested values (e.g. a follicle object) are kept as JSON text.
[[nodiscard]] std::vector<raw_record> read_jsonl(std::istream& in, const column_mapping& mapping);

/// Picks the reader from the extension (.jsonl/.ndjson -> JSON lines, otherwise delimited).
[[nodiscard]] std::vector<raw_record> read_records(const std::string& path,
                                                   const column_mapping& mapping);

struct normalized_batch {
    dataset data;
    ingest_report report;
};

/**
 * @brief Parses, pairs and sorts a batch.
 *
 * Blood and ultrasound rows of one patient and cycle pair on the same date
 * (or within the mapping's window; the visit then takes the ultrasound's
 * date). Treatment rows attach the doctor's decision to the visit on their
 * date. Rows that parse but do not pair produce warnings. Every record is
 * counted exactly once as accepted or rejected.
 */
[[nodiscard]] normalized_batch normalize_batch(const std::vector<raw_record>& records,
                                               const column_mapping& mapping = {});

/// Canonical raw rows for a dataset; normalize_batch of the result reproduces it.
[[nodiscard]] std::vector<raw_record> to_raw_records(const dataset& data);

}  // namespace ivf::ingest
