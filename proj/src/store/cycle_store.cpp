/**
 * @file cycle_store.cpp
 * @brief SQLite implementation of the cycle store
 */

#include "ivf/store/cycle_store.hpp"

#include "ivf/core/error.hpp"
#include "ivf/core/validate.hpp"

#include <sqlite3.h>

#include <map>
#include <tuple>

namespace ivf::store {

std::string_view to_string(treatment_source s) noexcept {
    return s == treatment_source::engine ? "engine" : "doctor";
}

namespace {

treatment_source source_from_string(std::string_view s) {
    if (s == "engine") return treatment_source::engine;
    if (s == "doctor") return treatment_source::doctor;
    throw ivf_error(errc::unparseable, "unknown treatment source '" + std::string(s) + "'");
}

constexpr const char* schema_sql = R"sql(
PRAGMA foreign_keys = ON;
CREATE TABLE IF NOT EXISTS patient (
    patient_id TEXT PRIMARY KEY NOT NULL CHECK (length(patient_id) > 0),
    age INTEGER NOT NULL CHECK (age BETWEEN 18 AND 60),
    cycle_number INTEGER NOT NULL DEFAULT 1 CHECK (cycle_number >= 1),
    medication_contraindicated INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS blood_test (
    id INTEGER PRIMARY KEY,
    patient_id TEXT NOT NULL REFERENCES patient(patient_id),
    cycle_number INTEGER NOT NULL CHECK (cycle_number >= 1),
    visit_date TEXT NOT NULL,
    drawn_at TEXT NOT NULL,
    fsh REAL, fsh_flag TEXT,
    lh REAL, lh_flag TEXT,
    e2 REAL, e2_flag TEXT,
    p4 REAL, p4_flag TEXT,
    UNIQUE (patient_id, cycle_number, visit_date)
);
CREATE TABLE IF NOT EXISTS ultrasound_test (
    id INTEGER PRIMARY KEY,
    patient_id TEXT NOT NULL REFERENCES patient(patient_id),
    cycle_number INTEGER NOT NULL CHECK (cycle_number >= 1),
    visit_date TEXT NOT NULL,
    measured_at TEXT NOT NULL,
    follicles TEXT NOT NULL,
    follicle_total INTEGER NOT NULL CHECK (follicle_total >= 0),
    UNIQUE (patient_id, cycle_number, visit_date)
);
CREATE TABLE IF NOT EXISTS egg_retrieval (
    id INTEGER PRIMARY KEY,
    patient_id TEXT NOT NULL REFERENCES patient(patient_id),
    cycle_number INTEGER NOT NULL CHECK (cycle_number >= 1),
    retrieval_date TEXT NOT NULL,
    oocytes INTEGER NOT NULL CHECK (oocytes >= 0),
    UNIQUE (patient_id, cycle_number, retrieval_date)
);
CREATE TABLE IF NOT EXISTS treatment (
    id INTEGER PRIMARY KEY,
    patient_id TEXT NOT NULL REFERENCES patient(patient_id),
    cycle_number INTEGER NOT NULL CHECK (cycle_number >= 1),
    visit_date TEXT NOT NULL,
    source TEXT NOT NULL CHECK (source IN ('engine', 'doctor')),
    decision TEXT NOT NULL,
    prescription TEXT,
    advice TEXT,
    config_hash TEXT NOT NULL DEFAULT '',
    UNIQUE (patient_id, cycle_number, visit_date, source)
);
)sql";

class statement {
public:
    statement(sqlite3* db, const char* sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
            throw ivf_error(errc::io_failure, std::string("sqlite prepare: ") + sqlite3_errmsg(db));
        }
    }
    ~statement() { sqlite3_finalize(stmt_); }
    statement(const statement&) = delete;
    statement& operator=(const statement&) = delete;

    statement& bind(int i, const std::string& v) {
        sqlite3_bind_text(stmt_, i, v.c_str(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
        return *this;
    }
    statement& bind(int i, std::int64_t v) {
        sqlite3_bind_int64(stmt_, i, v);
        return *this;
    }
    statement& bind(int i, int v) { return bind(i, static_cast<std::int64_t>(v)); }
    statement& bind(int i, double v) {
        sqlite3_bind_double(stmt_, i, v);
        return *this;
    }
    statement& bind_null(int i) {
        sqlite3_bind_null(stmt_, i);
        return *this;
    }

    /// True while a row is available.
    bool step() {
        const int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        const int ext = sqlite3_extended_errcode(db_);
        const std::string msg = sqlite3_errmsg(db_);
        if (ext == SQLITE_CONSTRAINT_UNIQUE || ext == SQLITE_CONSTRAINT_PRIMARYKEY) {
            throw ivf_error(errc::duplicate_row, msg);
        }
        if (ext == SQLITE_CONSTRAINT_FOREIGNKEY) throw ivf_error(errc::missing_patient, msg);
        if (rc == SQLITE_CONSTRAINT) throw ivf_error(errc::invalid_argument, msg);
        throw ivf_error(errc::io_failure, "sqlite: " + msg);
    }

    [[nodiscard]] std::string text(int col) const {
        const auto* p = sqlite3_column_text(stmt_, col);
        return p ? std::string(reinterpret_cast<const char*>(p),
                               static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
                 : std::string{};
    }
    [[nodiscard]] std::int64_t int64(int col) const { return sqlite3_column_int64(stmt_, col); }
    [[nodiscard]] int integer(int col) const { return sqlite3_column_int(stmt_, col); }
    [[nodiscard]] double real(int col) const { return sqlite3_column_double(stmt_, col); }
    [[nodiscard]] bool is_null(int col) const {
        return sqlite3_column_type(stmt_, col) == SQLITE_NULL;
    }

private:
    sqlite3* db_;
    sqlite3_stmt* stmt_{nullptr};
};

void exec(sqlite3* db, const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
        const std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw ivf_error(errc::io_failure, "sqlite: " + msg);
    }
}

}  // namespace

// =============================================================================
// treatment_record serialization
// =============================================================================

void to_json(json& j, const treatment_record& t) {
    j = json{{"patient_id", t.patient_id},
             {"cycle_number", t.cycle_number},
             {"date", format_date(t.date)},
             {"source", to_string(t.source)},
             {"decision", t.verdict},
             {"config_hash", t.config_hash}};
    if (t.orders) j["prescription"] = *t.orders;
    if (!t.advice_json.empty()) j["advice"] = json::parse(t.advice_json);
}

void from_json(const json& j, treatment_record& t) {
    t.patient_id = j.at("patient_id").get<std::string>();
    t.cycle_number = j.value("cycle_number", 1);
    t.date = parse_date(j.at("date").get<std::string>());
    t.source = source_from_string(j.at("source").get<std::string>());
    t.verdict = j.at("decision").get<decision>();
    t.config_hash = j.value("config_hash", std::string{});
    if (j.contains("prescription")) {
        t.orders = j.at("prescription").get<prescription>();
    } else {
        t.orders.reset();
    }
    t.advice_json = j.contains("advice") ? j.at("advice").dump() : std::string{};
}

// =============================================================================
// cycle_store
// =============================================================================

struct cycle_store::impl {
    sqlite3* db{nullptr};
    int savepoint_depth{0};

    ~impl() {
        if (db) sqlite3_close(db);
    }
};

cycle_store::cycle_store(const std::string& path) : impl_(std::make_unique<impl>()) {
    const int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX;
    if (sqlite3_open_v2(path.c_str(), &impl_->db, flags, nullptr) != SQLITE_OK) {
        const std::string msg = impl_->db ? sqlite3_errmsg(impl_->db) : "out of memory";
        throw ivf_error(errc::io_failure, "cannot open store " + path + ": " + msg);
    }
    sqlite3_busy_timeout(impl_->db, 5000);
    exec(impl_->db, schema_sql);
}

cycle_store::~cycle_store() = default;

void cycle_store::atomically(const std::function<void()>& fn) {
    std::lock_guard lock(mutex_);
    const std::string name = "sp" + std::to_string(impl_->savepoint_depth++);
    exec(impl_->db, ("SAVEPOINT " + name).c_str());
    try {
        fn();
        exec(impl_->db, ("RELEASE " + name).c_str());
        --impl_->savepoint_depth;
    } catch (...) {
        exec(impl_->db, ("ROLLBACK TO " + name).c_str());
        exec(impl_->db, ("RELEASE " + name).c_str());
        --impl_->savepoint_depth;
        throw;
    }
}

void cycle_store::put_patient(const patient_profile& profile) {
    if (const auto v = validate_profile(profile); !v.empty()) {
        throw ivf_error(errc::invalid_argument, describe(v));
    }
    std::lock_guard lock(mutex_);
    statement s(impl_->db,
                "INSERT INTO patient (patient_id, age, cycle_number, medication_contraindicated) "
                "VALUES (?, ?, ?, ?)");
    s.bind(1, profile.patient_id)
        .bind(2, profile.age)
        .bind(3, profile.cycle_number)
        .bind(4, profile.medication_contraindicated ? 1 : 0);
    s.step();
}

std::optional<patient_profile> cycle_store::get_patient(const std::string& patient_id) const {
    std::lock_guard lock(mutex_);
    statement s(impl_->db,
                "SELECT patient_id, age, cycle_number, medication_contraindicated FROM patient "
                "WHERE patient_id = ?");
    s.bind(1, patient_id);
    if (!s.step()) return std::nullopt;
    return patient_profile{s.text(0), s.integer(1), s.integer(2), s.integer(3) != 0};
}

std::vector<patient_profile> cycle_store::list_patients() const {
    std::lock_guard lock(mutex_);
    statement s(impl_->db,
                "SELECT patient_id, age, cycle_number, medication_contraindicated FROM patient "
                "ORDER BY patient_id");
    std::vector<patient_profile> out;
    while (s.step()) out.push_back({s.text(0), s.integer(1), s.integer(2), s.integer(3) != 0});
    return out;
}

visit_ids cycle_store::put_visit(const visit_record& visit) {
    if (const auto v = validate_visit(visit); !v.empty()) {
        throw ivf_error(errc::invalid_visit, describe(v));
    }
    visit_ids ids;
    atomically([&] {
        if (!get_patient(visit.patient_id)) {
            throw ivf_error(errc::missing_patient, "unknown patient " + visit.patient_id);
        }
        const auto date = format_date(visit.visit_date);
        statement b(impl_->db,
                    "INSERT INTO blood_test (patient_id, cycle_number, visit_date, drawn_at, fsh, "
                    "fsh_flag, lh, lh_flag, e2, e2_flag, p4, p4_flag) "
                    "VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)");
        b.bind(1, visit.patient_id)
            .bind(2, visit.cycle_number)
            .bind(3, date)
            .bind(4, format_timestamp(visit.panel.drawn_at));
        int col = 5;
        for (const auto a : all_analytes) {
            if (const auto& r = visit.panel.reading(a)) {
                b.bind(col, r->value).bind(col + 1, std::string(to_string(r->flag)));
            } else {
                b.bind_null(col).bind_null(col + 1);
            }
            col += 2;
        }
        try {
            b.step();
        } catch (const ivf_error& e) {
            if (e.code() != errc::duplicate_row) throw;
            throw ivf_error(errc::duplicate_row, "visit for " + visit.patient_id + " cycle " +
                                                     std::to_string(visit.cycle_number) + " on " +
                                                     date + " already stored");
        }
        ids.blood_id = sqlite3_last_insert_rowid(impl_->db);

        statement u(impl_->db,
                    "INSERT INTO ultrasound_test (patient_id, cycle_number, visit_date, "
                    "measured_at, follicles, follicle_total) VALUES (?, ?, ?, ?, ?, ?)");
        u.bind(1, visit.patient_id)
            .bind(2, visit.cycle_number)
            .bind(3, date)
            .bind(4, format_timestamp(visit.exam.measured_at))
            .bind(5, json(visit.exam).at("bins").dump())
            .bind(6, total(visit.exam));
        u.step();
        ids.ultrasound_id = sqlite3_last_insert_rowid(impl_->db);

        if (visit.doctor_decision) {
            treatment_record t;
            t.patient_id = visit.patient_id;
            t.cycle_number = visit.cycle_number;
            t.date = visit.visit_date;
            t.source = treatment_source::doctor;
            t.verdict = *visit.doctor_decision;
            t.orders = visit.doctor_prescription;
            put_treatment_record(t);
        }
    });
    return ids;
}

std::int64_t cycle_store::put_treatment_record(const treatment_record& t) {
    std::lock_guard lock(mutex_);
    if (!get_patient(t.patient_id)) {
        throw ivf_error(errc::missing_patient, "unknown patient " + t.patient_id);
    }
    statement s(impl_->db,
                "INSERT INTO treatment (patient_id, cycle_number, visit_date, source, decision, "
                "prescription, advice, config_hash) VALUES (?, ?, ?, ?, ?, ?, ?, ?)");
    s.bind(1, t.patient_id)
        .bind(2, t.cycle_number)
        .bind(3, format_date(t.date))
        .bind(4, std::string(to_string(t.source)))
        .bind(5, to_canonical(t.verdict));
    if (t.orders) {
        s.bind(6, to_canonical(*t.orders));
    } else {
        s.bind_null(6);
    }
    if (!t.advice_json.empty()) {
        s.bind(7, t.advice_json);
    } else {
        s.bind_null(7);
    }
    s.bind(8, t.config_hash);
    s.step();
    return sqlite3_last_insert_rowid(impl_->db);
}

std::int64_t cycle_store::put_treatment(const std::string& patient_id, int cycle_number,
                                        calendar_date date, const advice& output,
                                        std::optional<int> oocytes) {
    std::int64_t id = 0;
    atomically([&] {
        treatment_record t;
        t.patient_id = patient_id;
        t.cycle_number = cycle_number;
        t.date = date;
        t.source = treatment_source::engine;
        t.verdict = output.verdict;
        t.orders = output.orders;
        t.advice_json = to_canonical(output);
        t.config_hash = output.config_hash;
        id = put_treatment_record(t);
        if (oocytes && output.verdict.type == decision_type::oocyte_retrieval) {
            put_retrieval({patient_id, cycle_number, date, *oocytes});
        }
    });
    return id;
}

std::int64_t cycle_store::put_retrieval(const retrieval_record& r) {
    std::lock_guard lock(mutex_);
    if (!get_patient(r.patient_id)) {
        throw ivf_error(errc::missing_patient, "unknown patient " + r.patient_id);
    }
    if (r.oocytes < 0) throw ivf_error(errc::negative_count, "oocytes must be >= 0");
    statement s(impl_->db,
                "INSERT INTO egg_retrieval (patient_id, cycle_number, retrieval_date, oocytes) "
                "VALUES (?, ?, ?, ?)");
    s.bind(1, r.patient_id).bind(2, r.cycle_number).bind(3, format_date(r.date)).bind(4, r.oocytes);
    s.step();
    return sqlite3_last_insert_rowid(impl_->db);
}

namespace {

treatment_record read_treatment(const statement& s) {
    treatment_record t;
    t.patient_id = s.text(0);
    t.cycle_number = s.integer(1);
    t.date = parse_date(s.text(2));
    t.source = source_from_string(s.text(3));
    t.verdict = json::parse(s.text(4)).get<decision>();
    if (!s.is_null(5)) t.orders = json::parse(s.text(5)).get<prescription>();
    if (!s.is_null(6)) t.advice_json = s.text(6);
    t.config_hash = s.text(7);
    return t;
}

constexpr const char* treatment_columns =
    "patient_id, cycle_number, visit_date, source, decision, prescription, advice, config_hash";

hormone_panel read_panel(const statement& s, int first_col) {
    hormone_panel p;
    p.drawn_at = parse_timestamp(s.text(first_col));
    int col = first_col + 1;
    for (const auto a : all_analytes) {
        if (!s.is_null(col)) {
            p.reading(a) = analyte_reading{s.real(col), analyte_flag_from_string(s.text(col + 1))};
        }
        col += 2;
    }
    return p;
}

follicle_histogram read_exam(const statement& s, int first_col) {
    json doc = json::object();
    doc["bins"] = json::parse(s.text(first_col + 1));
    doc["measured_at"] = s.text(first_col);
    return doc.get<follicle_histogram>();
}

}  // namespace

std::vector<cycle_entry> cycle_store::list_cycle(const std::string& patient_id,
                                                 int cycle_number) const {
    std::lock_guard lock(mutex_);
    std::vector<cycle_entry> out;
    std::map<std::string, std::size_t> by_date;
    {
        statement s(impl_->db,
                    "SELECT b.visit_date, b.drawn_at, b.fsh, b.fsh_flag, b.lh, b.lh_flag, b.e2, "
                    "b.e2_flag, b.p4, b.p4_flag, u.measured_at, u.follicles "
                    "FROM blood_test b JOIN ultrasound_test u ON b.patient_id = u.patient_id AND "
                    "b.cycle_number = u.cycle_number AND b.visit_date = u.visit_date "
                    "WHERE b.patient_id = ? AND b.cycle_number = ? ORDER BY b.visit_date");
        s.bind(1, patient_id).bind(2, cycle_number);
        while (s.step()) {
            cycle_entry e;
            e.visit.patient_id = patient_id;
            e.visit.cycle_number = cycle_number;
            e.visit.visit_date = parse_date(s.text(0));
            e.visit.panel = read_panel(s, 1);
            e.visit.exam = read_exam(s, 10);
            by_date[s.text(0)] = out.size();
            out.push_back(std::move(e));
        }
    }
    statement t(impl_->db, (std::string("SELECT ") + treatment_columns +
                            " FROM treatment WHERE patient_id = ? AND cycle_number = ? "
                            "ORDER BY visit_date, source")
                               .c_str());
    t.bind(1, patient_id).bind(2, cycle_number);
    while (t.step()) {
        auto rec = read_treatment(t);
        const auto it = by_date.find(format_date(rec.date));
        if (it == by_date.end()) continue;
        auto& entry = out[it->second];
        if (rec.source == treatment_source::doctor) {
            entry.visit.doctor_decision = rec.verdict;
            entry.visit.doctor_prescription = rec.orders;
        }
        entry.treatments.push_back(std::move(rec));
    }
    return out;
}

std::vector<std::pair<std::string, int>> cycle_store::list_cycles() const {
    std::lock_guard lock(mutex_);
    statement s(impl_->db,
                "SELECT DISTINCT patient_id, cycle_number FROM blood_test "
                "ORDER BY patient_id, cycle_number");
    std::vector<std::pair<std::string, int>> out;
    while (s.step()) out.emplace_back(s.text(0), s.integer(1));
    return out;
}

std::vector<treatment_record> cycle_store::list_treatments() const {
    std::lock_guard lock(mutex_);
    statement s(impl_->db, (std::string("SELECT ") + treatment_columns +
                            " FROM treatment ORDER BY patient_id, cycle_number, visit_date, source")
                               .c_str());
    std::vector<treatment_record> out;
    while (s.step()) out.push_back(read_treatment(s));
    return out;
}

std::vector<retrieval_record> cycle_store::list_retrievals() const {
    std::lock_guard lock(mutex_);
    statement s(impl_->db,
                "SELECT patient_id, cycle_number, retrieval_date, oocytes FROM egg_retrieval "
                "ORDER BY patient_id, cycle_number, retrieval_date");
    std::vector<retrieval_record> out;
    while (s.step()) out.push_back({s.text(0), s.integer(1), parse_date(s.text(2)), s.integer(3)});
    return out;
}

json cycle_store::export_json() const {
    std::lock_guard lock(mutex_);
    json blood = json::array();
    {
        statement s(impl_->db,
                    "SELECT patient_id, cycle_number, visit_date, drawn_at, fsh, fsh_flag, lh, "
                    "lh_flag, e2, e2_flag, p4, p4_flag FROM blood_test "
                    "ORDER BY patient_id, cycle_number, visit_date");
        while (s.step()) {
            blood.push_back({{"patient_id", s.text(0)},
                             {"cycle_number", s.integer(1)},
                             {"visit_date", s.text(2)},
                             {"panel", read_panel(s, 3)}});
        }
    }
    json scans = json::array();
    {
        statement s(impl_->db,
                    "SELECT patient_id, cycle_number, visit_date, measured_at, follicles "
                    "FROM ultrasound_test ORDER BY patient_id, cycle_number, visit_date");
        while (s.step()) {
            scans.push_back({{"patient_id", s.text(0)},
                             {"cycle_number", s.integer(1)},
                             {"visit_date", s.text(2)},
                             {"exam", read_exam(s, 3)}});
        }
    }
    return json{{"patients", list_patients()},
                {"blood_tests", blood},
                {"ultrasound_tests", scans},
                {"egg_retrievals", list_retrievals()},
                {"treatments", list_treatments()}};
}

void cycle_store::import_json(const json& doc) {
    atomically([&] {
        try {
            for (const auto& p : doc.value("patients", json::array())) {
                put_patient(p.get<patient_profile>());
            }
            // Pair blood and ultrasound rows back into visits; lone rows are inserted directly.
            std::map<std::tuple<std::string, int, std::string>, json> scans;
            for (const auto& u : doc.value("ultrasound_tests", json::array())) {
                scans[{u.at("patient_id").get<std::string>(), u.at("cycle_number").get<int>(),
                       u.at("visit_date").get<std::string>()}] = u;
            }
            for (const auto& b : doc.value("blood_tests", json::array())) {
                const std::tuple key{b.at("patient_id").get<std::string>(),
                                     b.at("cycle_number").get<int>(),
                                     b.at("visit_date").get<std::string>()};
                const auto it = scans.find(key);
                if (it == scans.end()) {
                    throw ivf_error(errc::invalid_argument,
                                    "blood test without ultrasound on " + std::get<2>(key));
                }
                visit_record v;
                v.patient_id = std::get<0>(key);
                v.cycle_number = std::get<1>(key);
                v.visit_date = parse_date(std::get<2>(key));
                v.panel = b.at("panel").get<hormone_panel>();
                v.exam = it->second.at("exam").get<follicle_histogram>();
                put_visit(v);
                scans.erase(it);
            }
            if (!scans.empty()) {
                throw ivf_error(errc::invalid_argument, "ultrasound test without blood test");
            }
            for (const auto& r : doc.value("egg_retrievals", json::array())) {
                put_retrieval(r.get<retrieval_record>());
            }
            for (const auto& t : doc.value("treatments", json::array())) {
                put_treatment_record(t.get<treatment_record>());
            }
        } catch (const json::exception& e) {
            throw ivf_error(errc::unparseable, std::string("store import: ") + e.what());
        }
    });
}

dataset cycle_store::to_dataset() const {
    std::lock_guard lock(mutex_);
    dataset d;
    d.patients = list_patients();
    for (const auto& [pid, cycle] : list_cycles()) {
        for (auto& e : list_cycle(pid, cycle)) d.visits.push_back(std::move(e.visit));
    }
    d.retrievals = list_retrievals();
    d.sort();
    return d;
}

void cycle_store::import_dataset(const dataset& data) {
    atomically([&] {
        for (const auto& p : data.patients) put_patient(p);
        for (const auto& v : data.visits) put_visit(v);
        for (const auto& r : data.retrievals) put_retrieval(r);
    });
}

}  // namespace ivf::store
