/**
 * @file normalize.cpp
 * @brief Readers, column mapping and batch normalization
 */

#include "ivf/ingest/normalize.hpp"

#include "ivf/core/error.hpp"
#include "ivf/core/validate.hpp"
#include "ivf/ingest/parse.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace ivf::ingest {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trimmed(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

constexpr std::array<std::pair<record_kind, std::string_view>, 5> kind_names{{
    {record_kind::patient, "patient"},
    {record_kind::blood, "blood"},
    {record_kind::ultrasound, "ultrasound"},
    {record_kind::retrieval, "retrieval"},
    {record_kind::treatment, "treatment"},
}};

}  // namespace

std::string_view to_string(record_kind k) noexcept {
    for (const auto& [kind, name] : kind_names) {
        if (kind == k) return name;
    }
    return "?";
}

std::optional<record_kind> record_kind_from_string(std::string_view s) {
    const auto key = lower(trimmed(s));
    for (const auto& [kind, name] : kind_names) {
        if (name == key) return kind;
    }
    return std::nullopt;
}

// =============================================================================
// Report
// =============================================================================

void ingest_report::merge(const ingest_report& other) {
    accepted += other.accepted;
    rejected += other.rejected;
    rejections.insert(rejections.end(), other.rejections.begin(), other.rejections.end());
    warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

void to_json(json& j, const ingest_report& r) {
    json rej = json::array();
    for (const auto& x : r.rejections) {
        rej.push_back({{"source_line", x.source_line}, {"reason", x.reason}});
    }
    j = json{{"accepted", r.accepted},
             {"rejected", r.rejected},
             {"rejections", rej},
             {"warnings", r.warnings}};
}

void from_json(const json& j, ingest_report& r) {
    r.accepted = j.at("accepted").get<int>();
    r.rejected = j.at("rejected").get<int>();
    r.rejections.clear();
    for (const auto& x : j.value("rejections", json::array())) {
        r.rejections.push_back({x.at("source_line").get<int>(), x.at("reason").get<std::string>()});
    }
    r.warnings = j.value("warnings", std::vector<std::string>{});
}

// =============================================================================
// Mapping
// =============================================================================

std::string column_mapping::canonical_column(const std::string& source) const {
    const auto key = lower(trimmed(source));
    for (const auto& [from, to] : columns) {
        if (lower(trimmed(from)) == key) return to;
    }
    return key;
}

std::optional<record_kind> column_mapping::kind_for(const std::string& value) const {
    const auto key = lower(trimmed(value));
    for (const auto& [from, kind] : kind_values) {
        if (lower(trimmed(from)) == key) return kind;
    }
    return record_kind_from_string(key);
}

column_mapping mapping_from_json(const json& doc) {
    column_mapping m;
    try {
        if (doc.contains("columns")) {
            m.columns = doc.at("columns").get<std::map<std::string, std::string>>();
        }
        m.kind_column = doc.value("kind_column", m.kind_column);
        const json kinds = doc.value("kind_values", json::object());
        for (const auto& [from, to] : kinds.items()) {
            const auto kind = record_kind_from_string(to.get<std::string>());
            if (!kind) throw ivf_error(errc::invalid_config, "unknown record kind " + to.dump());
            m.kind_values[from] = *kind;
        }
        if (doc.contains("default_kind") && !doc.at("default_kind").is_null()) {
            m.default_kind = record_kind_from_string(doc.at("default_kind").get<std::string>());
            if (!m.default_kind) throw ivf_error(errc::invalid_config, "unknown default_kind");
        }
        if (doc.contains("delimiter")) {
            const auto d = doc.at("delimiter").get<std::string>();
            if (d == "\\t" || d == "tab") {
                m.delimiter = '\t';
            } else if (d.size() == 1) {
                m.delimiter = d[0];
            } else {
                throw ivf_error(errc::invalid_config, "delimiter must be one character");
            }
        }
        m.pairing_window_days = doc.value("pairing_window_days", 0);
        m.blood_hour = doc.value("blood_hour", m.blood_hour);
        m.ultrasound_hour = doc.value("ultrasound_hour", m.ultrasound_hour);
    } catch (const json::exception& e) {
        throw ivf_error(errc::invalid_config, std::string("mapping: ") + e.what());
    }
    if (m.pairing_window_days < 0 || m.pairing_window_days > 1) {
        throw ivf_error(errc::invalid_config, "pairing_window_days must be 0 or 1");
    }
    if (m.blood_hour < 0 || m.blood_hour > 23 || m.ultrasound_hour < 0 || m.ultrasound_hour > 23) {
        throw ivf_error(errc::invalid_config, "default hours must be 0-23");
    }
    return m;
}

column_mapping load_mapping(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ivf_error(errc::io_failure, "cannot open mapping " + path);
    const auto doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ivf_error(errc::invalid_config, "mapping " + path + " is not JSON");
    return mapping_from_json(doc);
}

// =============================================================================
// Readers
// =============================================================================

namespace {

struct text_row {
    std::vector<std::string> cells;
    int line{1};
    bool unterminated{false};
};

/// Splits delimited text into rows, honouring quotes that span lines.
std::vector<text_row> split_rows(const std::string& text, char delimiter) {
    std::vector<text_row> rows;
    int line = 1;
    std::size_t i = 0;
    while (i < text.size()) {
        text_row row;
        row.line = line;
        std::string cell;
        bool quoted = false;
        bool in_quotes = false;
        bool done = false;
        while (i < text.size() && !done) {
            const char c = text[i];
            if (in_quotes) {
                if (c == '"') {
                    if (i + 1 < text.size() && text[i + 1] == '"') {
                        cell.push_back('"');
                        ++i;
                    } else {
                        in_quotes = false;
                    }
                } else {
                    if (c == '\n') ++line;
                    cell.push_back(c);
                }
            } else if (c == '"' && trimmed(cell).empty() && !quoted) {
                cell.clear();
                quoted = in_quotes = true;
            } else if (c == delimiter) {
                row.cells.push_back(std::move(cell));
                cell.clear();
                quoted = false;
            } else if (c == '\n') {
                ++line;
                done = true;
            } else if (c != '\r') {
                cell.push_back(c);
            }
            ++i;
        }
        row.unterminated = in_quotes;
        row.cells.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

char infer_delimiter(const std::string& text) {
    const auto first = text.substr(0, text.find('\n'));
    const auto tabs = std::count(first.begin(), first.end(), '\t');
    const auto commas = std::count(first.begin(), first.end(), ',');
    const auto semis = std::count(first.begin(), first.end(), ';');
    if (tabs > 0 && tabs >= commas) return '\t';
    if (semis > commas) return ';';
    return ',';
}

bool blank(const text_row& row) {
    return std::all_of(row.cells.begin(), row.cells.end(),
                       [](const std::string& c) { return trimmed(c).empty(); });
}

/// Resolves the record kind from the kind column, if the mapping names one.
void assign_kind(raw_record& rec, const std::string& kind_value, const column_mapping& mapping) {
    if (trimmed(kind_value).empty()) {
        rec.kind = mapping.default_kind;
        return;
    }
    rec.kind = mapping.kind_for(kind_value);
    if (!rec.kind && rec.defect.empty()) {
        rec.defect = "unknown record kind '" + trimmed(kind_value).substr(0, 40) + "'";
    }
}

}  // namespace

std::vector<raw_record> read_delimited(std::istream& in, const column_mapping& mapping) {
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();
    if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);
    const char delimiter = mapping.delimiter ? mapping.delimiter : infer_delimiter(text);

    std::vector<raw_record> out;
    const auto rows = split_rows(text, delimiter);
    std::vector<std::string> header;
    bool have_header = false;
    for (const auto& row : rows) {
        if (blank(row)) continue;
        if (!have_header) {
            for (const auto& c : row.cells) header.push_back(trimmed(c));
            have_header = true;
            continue;
        }
        raw_record rec;
        rec.source_line = row.line;
        if (row.unterminated) {
            rec.defect = "unterminated quoted field";
        } else if (row.cells.size() != header.size()) {
            rec.defect = "expected " + std::to_string(header.size()) + " fields, found " +
                         std::to_string(row.cells.size());
        }
        std::string kind_value;
        for (std::size_t k = 0; k < header.size() && k < row.cells.size(); ++k) {
            if (!mapping.kind_column.empty() && lower(header[k]) == lower(mapping.kind_column)) {
                kind_value = row.cells[k];
                continue;
            }
            rec.fields[mapping.canonical_column(header[k])] = trimmed(row.cells[k]);
        }
        assign_kind(rec, kind_value, mapping);
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<raw_record> read_jsonl(std::istream& in, const column_mapping& mapping) {
    std::vector<raw_record> out;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (trimmed(line).empty()) continue;
        raw_record rec;
        rec.source_line = number;
        const auto doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            rec.defect = "line is not a JSON object";
            out.push_back(std::move(rec));
            continue;
        }
        std::string kind_value;
        for (const auto& [key, value] : doc.items()) {
            if (value.is_null()) continue;
            const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
            if (!mapping.kind_column.empty() && lower(key) == lower(mapping.kind_column)) {
                kind_value = text;
                continue;
            }
            rec.fields[mapping.canonical_column(key)] = trimmed(text);
        }
        assign_kind(rec, kind_value, mapping);
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<raw_record> read_records(const std::string& path, const column_mapping& mapping) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ivf_error(errc::io_failure, "cannot open input " + path);
    const auto ext = lower(path.substr(path.find_last_of('.') == std::string::npos
                                           ? path.size()
                                           : path.find_last_of('.')));
    if (ext == ".jsonl" || ext == ".ndjson") return read_jsonl(in, mapping);
    auto m = mapping;
    if (!m.delimiter && ext == ".tsv") m.delimiter = '\t';
    return read_delimited(in, m);
}

// =============================================================================
// Normalization
// =============================================================================

namespace {

struct row_error {
    std::string reason;
};

using cycle_key = std::tuple<std::string, int>;
using row_key = std::tuple<std::string, int, calendar_date>;

struct blood_row {
    row_key key;
    hormone_panel panel;
    int line;
    bool paired{false};
};

struct ultrasound_row {
    row_key key;
    follicle_histogram exam;
    int line;
};

struct treatment_row {
    row_key key;
    decision verdict;
    int line;
};

const std::string* find(const raw_record& rec, const char* name) {
    const auto it = rec.fields.find(name);
    return it == rec.fields.end() ? nullptr : &it->second;
}

const std::string& require(const raw_record& rec, const char* name) {
    const auto* v = find(rec, name);
    if (!v || v->empty()) throw row_error{std::string("missing ") + name};
    return *v;
}

int parse_int(const std::string& text, const char* name) {
    int v = 0;
    const auto t = trimmed(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
        throw row_error{std::string("invalid ") + name + " '" + t.substr(0, 40) + "'"};
    }
    return v;
}

std::string patient_of(const raw_record& rec) {
    const auto id = trimmed(require(rec, "patient_id"));
    if (id.empty()) throw row_error{"missing patient_id"};
    return id;
}

int cycle_of(const raw_record& rec) {
    const auto* v = find(rec, "cycle_number");
    if (!v || v->empty()) return 1;
    const int c = parse_int(*v, "cycle_number");
    if (c < 1) throw row_error{"cycle_number below 1"};
    return c;
}

/// Row timestamp from the date column (and an optional time column).
timestamp time_of(const raw_record& rec, int default_hour) {
    const auto& date_text = require(rec, "date");
    const auto* time_text = find(rec, "time");
    if (time_text && !time_text->empty()) {
        const auto ts = try_parse_timestamp(trimmed(date_text).substr(0, 10) + "T" + trimmed(*time_text));
        if (!ts) throw row_error{"invalid date/time '" + date_text + " " + *time_text + "'"};
        return *ts;
    }
    const auto t = trimmed(date_text);
    if (t.size() <= 10) {
        const auto d = try_parse_date(t);
        if (!d) throw row_error{"invalid date '" + t.substr(0, 40) + "'"};
        return at_time(*d, default_hour);
    }
    const auto ts = try_parse_timestamp(t);
    if (!ts) throw row_error{"invalid date '" + t.substr(0, 40) + "'"};
    return *ts;
}

bool parse_bool(const std::string& text) {
    const auto k = lower(trimmed(text));
    if (k.empty() || k == "0" || k == "false" || k == "no" || k == "n") return false;
    if (k == "1" || k == "true" || k == "yes" || k == "y") return true;
    throw row_error{"invalid flag '" + text.substr(0, 40) + "'"};
}

std::optional<record_kind> infer_kind(const raw_record& rec) {
    const auto has = [&](const char* name) {
        const auto* v = find(rec, name);
        return v != nullptr && !v->empty();
    };
    const bool blood = has("fsh") || has("lh") || has("e2") || has("p4");
    const bool ultrasound = rec.fields.count("follicles") > 0;
    std::vector<record_kind> kinds;
    if (blood) kinds.push_back(record_kind::blood);
    if (ultrasound) kinds.push_back(record_kind::ultrasound);
    if (has("oocytes")) kinds.push_back(record_kind::retrieval);
    if (has("decision")) kinds.push_back(record_kind::treatment);
    if (kinds.empty() && has("age")) kinds.push_back(record_kind::patient);
    if (kinds.size() == 1) return kinds.front();
    return std::nullopt;
}

std::string at_line(int line, const std::string& text) {
    return "line " + std::to_string(line) + ": " + text;
}

}  // namespace

normalized_batch normalize_batch(const std::vector<raw_record>& records,
                                 const column_mapping& mapping) {
    normalized_batch out;
    auto& report = out.report;
    std::vector<blood_row> bloods;
    std::vector<ultrasound_row> scans;
    std::vector<treatment_row> treatments;
    std::set<std::string> patient_ids;
    std::set<std::tuple<int, std::string, int, calendar_date>> seen;

    for (const auto& rec : records) {
        const auto reject = [&](const std::string& reason) {
            ++report.rejected;
            report.rejections.push_back({rec.source_line, reason});
        };
        if (!rec.defect.empty()) {
            reject(rec.defect);
            continue;
        }
        const auto kind = rec.kind ? rec.kind : infer_kind(rec);
        if (!kind) {
            reject("cannot determine record kind; add a record_type column");
            continue;
        }
        try {
            std::vector<std::string> warnings;
            const auto pid = patient_of(rec);
            const int cycle = cycle_of(rec);
            const auto claim = [&](calendar_date date) {
                if (!seen.emplace(static_cast<int>(*kind), pid, cycle, date).second) {
                    throw row_error{"duplicate-row: " + std::string(to_string(*kind)) + " for " +
                                    pid + " cycle " + std::to_string(cycle) + " on " +
                                    format_date(date)};
                }
            };
            switch (*kind) {
                case record_kind::patient: {
                    patient_profile p;
                    p.patient_id = pid;
                    p.cycle_number = cycle;
                    p.age = parse_int(require(rec, "age"), "age");
                    if (const auto* f = find(rec, "contraindicated")) p.medication_contraindicated = parse_bool(*f);
                    if (const auto v = validate_profile(p); !v.empty()) throw row_error{describe(v)};
                    if (!patient_ids.insert(pid).second) throw row_error{"duplicate-row: patient " + pid};
                    out.data.patients.push_back(std::move(p));
                    break;
                }
                case record_kind::blood: {
                    const auto drawn = time_of(rec, mapping.blood_hour);
                    hormone_panel panel;
                    panel.drawn_at = drawn;
                    for (const auto a : all_analytes) {
                        const auto* v = find(rec, lower(to_string(a)).c_str());
                        if (!v || v->empty()) {
                            throw row_error{"missing-analyte(" + std::string(to_string(a)) + ")"};
                        }
                        const auto r = try_parse_hormone_value(*v, a);
                        if (!r.ok()) throw row_error{std::string(to_string(a)) + ": " + r.message()};
                        panel.reading(a) = *r.value;
                    }
                    claim(date_of(drawn));
                    bloods.push_back({{pid, cycle, date_of(drawn)}, std::move(panel), rec.source_line});
                    break;
                }
                case record_kind::ultrasound: {
                    const auto measured = time_of(rec, mapping.ultrasound_hour);
                    const auto* text = find(rec, "follicles");
                    if (!text) throw row_error{"missing follicles"};
                    auto r = try_parse_follicle_map(*text);
                    if (!r.ok()) {
                        throw row_error{(r.code == errc::negative_count ? "negative-count: " : "follicles: ") +
                                        r.message()};
                    }
                    warnings = std::move(r.warnings);
                    r.value->measured_at = measured;
                    claim(date_of(measured));
                    scans.push_back({{pid, cycle, date_of(measured)}, std::move(*r.value), rec.source_line});
                    break;
                }
                case record_kind::retrieval: {
                    const auto date = date_of(time_of(rec, 0));
                    const int oocytes = parse_int(require(rec, "oocytes"), "oocytes");
                    if (oocytes < 0) throw row_error{"negative-count: oocytes"};
                    claim(date);
                    out.data.retrievals.push_back({pid, cycle, date, oocytes});
                    break;
                }
                case record_kind::treatment: {
                    const auto date = date_of(time_of(rec, 0));
                    const auto& name = require(rec, "decision");
                    const auto type = parse_decision_name(name);
                    if (!type) throw row_error{"unknown decision '" + name.substr(0, 40) + "'"};
                    decision d = decision::of(*type);
                    if (const auto* s = find(rec, "scheme"); s && !s->empty()) {
                        const auto sc = parse_scheme_name(*s);
                        if (!sc) throw row_error{"unknown scheme '" + s->substr(0, 40) + "'"};
                        if (*type == decision_type::start_stimulation ||
                            *type == decision_type::change_scheme) {
                            d.target_scheme = sc;
                        }
                    }
                    claim(date);
                    treatments.push_back({{pid, cycle, date}, std::move(d), rec.source_line});
                    break;
                }
            }
            ++report.accepted;
            for (const auto& w : warnings) report.warnings.push_back(at_line(rec.source_line, w));
        } catch (const row_error& e) {
            reject(e.reason);
        } catch (const ivf_error& e) {
            reject(e.what());
        }
    }

    // Pair each ultrasound with a blood test of the same patient and cycle.
    std::map<cycle_key, std::vector<std::size_t>> blood_index;
    for (std::size_t i = 0; i < bloods.size(); ++i) {
        const auto& [pid, cycle, date] = bloods[i].key;
        blood_index[{pid, cycle}].push_back(i);
    }
    for (auto& scan : scans) {
        const auto& [pid, cycle, date] = scan.key;
        auto it = blood_index.find({pid, cycle});
        blood_row* match = nullptr;
        if (it != blood_index.end()) {
            for (const int offset : {0, -1, 1}) {
                if (std::abs(offset) > mapping.pairing_window_days) continue;
                for (const auto idx : it->second) {
                    auto& b = bloods[idx];
                    if (!b.paired && std::get<2>(b.key) == date + std::chrono::days{offset}) {
                        match = &b;
                        break;
                    }
                }
                if (match) break;
            }
        }
        if (!match) {
            report.warnings.push_back(at_line(scan.line, "ultrasound for " + pid + " on " +
                                                             format_date(date) +
                                                             " has no paired blood test"));
            continue;
        }
        match->paired = true;
        visit_record v;
        v.patient_id = pid;
        v.cycle_number = cycle;
        v.visit_date = date;
        v.panel = match->panel;
        v.exam = scan.exam;
        if (std::get<2>(match->key) != date) {
            const auto time_of_day = v.panel.drawn_at - timestamp{std::get<2>(match->key)};
            v.panel.drawn_at = timestamp{date} + time_of_day;
            report.warnings.push_back(at_line(match->line, "blood test paired with ultrasound on " +
                                                               format_date(date)));
        }
        out.data.visits.push_back(std::move(v));
    }
    for (const auto& b : bloods) {
        if (!b.paired) {
            report.warnings.push_back(at_line(b.line, "blood test for " + std::get<0>(b.key) + " on " +
                                                          format_date(std::get<2>(b.key)) +
                                                          " has no paired ultrasound"));
        }
    }

    out.data.sort();

    // Attach the doctor's decisions.
    for (const auto& t : treatments) {
        const auto& [pid, cycle, date] = t.key;
        auto it = std::find_if(out.data.visits.begin(), out.data.visits.end(), [&](const visit_record& v) {
            return v.patient_id == pid && v.cycle_number == cycle && v.visit_date == date;
        });
        if (it == out.data.visits.end()) {
            report.warnings.push_back(at_line(t.line, "treatment for " + pid + " on " +
                                                          format_date(date) + " has no visit"));
            continue;
        }
        it->doctor_decision = t.verdict;
    }

    std::set<std::string> missing;
    for (const auto& v : out.data.visits) {
        if (!patient_ids.count(v.patient_id)) missing.insert(v.patient_id);
    }
    for (const auto& pid : missing) {
        report.warnings.push_back("no patient row for " + pid);
    }
    return out;
}

std::vector<raw_record> to_raw_records(const dataset& data) {
    std::vector<raw_record> out;
    int line = 1;
    const auto push = [&](record_kind kind, std::map<std::string, std::string> fields) {
        raw_record r;
        r.kind = kind;
        r.fields = std::move(fields);
        r.source_line = ++line;
        out.push_back(std::move(r));
    };
    for (const auto& p : data.patients) {
        push(record_kind::patient, {{"patient_id", p.patient_id},
                                    {"cycle_number", std::to_string(p.cycle_number)},
                                    {"age", std::to_string(p.age)},
                                    {"contraindicated", p.medication_contraindicated ? "true" : "false"}});
    }
    for (const auto& v : data.visits) {
        std::map<std::string, std::string> blood{{"patient_id", v.patient_id},
                                                 {"cycle_number", std::to_string(v.cycle_number)},
                                                 {"date", format_timestamp(v.panel.drawn_at)}};
        for (const auto a : all_analytes) {
            if (const auto& r = v.panel.reading(a)) blood[lower(to_string(a))] = format_hormone_value(*r);
        }
        push(record_kind::blood, std::move(blood));
        push(record_kind::ultrasound, {{"patient_id", v.patient_id},
                                       {"cycle_number", std::to_string(v.cycle_number)},
                                       {"date", format_timestamp(v.exam.measured_at)},
                                       {"follicles", format_follicle_map(v.exam)}});
        if (v.doctor_decision) {
            std::map<std::string, std::string> t{{"patient_id", v.patient_id},
                                                 {"cycle_number", std::to_string(v.cycle_number)},
                                                 {"date", format_date(v.visit_date)},
                                                 {"decision", std::string(to_string(v.doctor_decision->type))}};
            if (v.doctor_decision->target_scheme) {
                t["scheme"] = std::string(to_string(*v.doctor_decision->target_scheme));
            }
            push(record_kind::treatment, std::move(t));
        }
    }
    for (const auto& r : data.retrievals) {
        push(record_kind::retrieval, {{"patient_id", r.patient_id},
                                      {"cycle_number", std::to_string(r.cycle_number)},
                                      {"date", format_date(r.date)},
                                      {"oocytes", std::to_string(r.oocytes)}});
    }
    return out;
}

}  // namespace ivf::ingest
