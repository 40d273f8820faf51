/**
 * @file service.cpp
 * @brief Request routing and handlers for the advisory service
 */

#include "ivf/service/service.hpp"

#include "ivf/core/error.hpp"
#include "ivf/core/validate.hpp"
#include "ivf/ingest/parse.hpp"
#include "ivf/replay/replay.hpp"
#include "ivf/replay/synth.hpp"

#include <charconv>
#include <vector>

namespace ivf::service {

namespace {

response json_response(int status, const json& body) {
    return response{status, body.dump(), "application/json"};
}

response error_response(errc code, const std::string& message,
                        const std::vector<violation>& violations = {}) {
    json body{{"error", to_string(code)}, {"message", message}};
    if (!violations.empty()) body["violations"] = violations;
    return json_response(status_for(code), body);
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        while (i < path.size() && path[i] == '/') ++i;
        const auto j = path.find('/', i);
        const auto end = j == std::string::npos ? path.size() : j;
        if (end > i) parts.push_back(path.substr(i, end - i));
        i = end;
    }
    return parts;
}

std::optional<int> parse_int(const std::string& s) {
    int v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

json parse_body(const std::string& body) {
    auto doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw ivf_error(errc::unparseable, "request body is not valid JSON");
    return doc;
}

json state_summary(const cycle_state& s) {
    json j{{"block", to_string(s.block)},
           {"stim_visit_index", s.stim_visit_index},
           {"md_talk_count", s.md_talk_count}};
    if (s.active_scheme) j["scheme"] = to_string(*s.active_scheme);
    return j;
}

bool truthy(const std::map<std::string, std::string>& query, const std::string& key) {
    const auto it = query.find(key);
    return it != query.end() && (it->second == "true" || it->second == "1" || it->second.empty());
}

}  // namespace

int status_for(errc code) noexcept {
    switch (code) {
        case errc::missing_patient: return 404;
        case errc::stale_visit:
        case errc::duplicate_row:
        case errc::missing_trigger_plan:
        case errc::adjustment_on_natural_scheme: return 409;
        case errc::block_mismatch: return 410;
        case errc::io_failure: return 500;
        default: return 400;
    }
}

visit_record visit_from_request(const json& body) {
    if (!body.is_object()) throw ivf_error(errc::unparseable, "visit must be a JSON object");
    json doc = body;
    try {
        const auto date = parse_date(doc.at("visit_date").get<std::string>());
        auto& panel = doc["panel"];
        if (!panel.is_object()) throw ivf_error(errc::unparseable, "panel must be an object");
        for (const auto a : all_analytes) {
            const std::string key(a == analyte::fsh   ? "fsh"
                                  : a == analyte::lh  ? "lh"
                                  : a == analyte::e2  ? "e2"
                                                      : "p4");
            auto it = panel.find(key);
            if (it == panel.end() || it->is_null() || it->is_object()) continue;
            const std::string raw = it->is_string() ? it->get<std::string>() : it->dump();
            auto parsed = ingest::try_parse_hormone_value(raw, a);
            if (!parsed.ok()) throw ivf_error(parsed.code, key + ": " + parsed.message());
            *it = *parsed.value;
        }
        if (!panel.contains("drawn_at")) panel["drawn_at"] = format_timestamp(at_time(date, 8));

        auto& exam = doc["exam"];
        if (exam.is_string()) {
            auto parsed = ingest::try_parse_follicle_map(exam.get<std::string>());
            if (!parsed.ok()) throw ivf_error(parsed.code, "exam: " + parsed.message());
            exam = json{{"bins", json(*parsed.value).at("bins")}};
        } else if (exam.is_object() && !exam.contains("bins")) {
            exam = json{{"bins", exam}};
        }
        if (!exam.is_object()) throw ivf_error(errc::unparseable, "exam must be an object");
        if (!exam.contains("measured_at")) exam["measured_at"] = format_timestamp(at_time(date, 9));
        return doc.get<visit_record>();
    } catch (const json::exception& e) {
        throw ivf_error(errc::unparseable, std::string("visit: ") + e.what());
    }
}

advisory_service::advisory_service(store::cycle_store& store, rules::engine eng, std::string token)
    : store_(store), engine_(std::move(eng)), token_(std::move(token)) {}

std::mutex& advisory_service::cycle_lock(const std::string& id, int cycle) {
    std::lock_guard guard(locks_guard_);
    auto& slot = cycle_locks_[{id, cycle}];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

response advisory_service::handle(const request& req) {
    const auto parts = split_path(req.path);
    try {
        if (req.method == "GET" && parts.size() == 1 && parts[0] == "health") {
            return json_response(200, {{"status", "ok"}, {"config_hash", engine_.config_hash()}});
        }
        if (!token_.empty() && req.authorization != "Bearer " + token_) {
            return json_response(401, {{"error", "unauthorized"},
                                       {"message", "missing or wrong bearer token"}});
        }

        if (parts.size() == 1 && parts[0] == "patients" && req.method == "POST") {
            return create_patient(req);
        }
        if (parts.size() == 1 && parts[0] == "visits" && req.method == "POST") {
            return create_visit(req);
        }
        if (parts.size() == 1 && parts[0] == "replay" && req.method == "POST") return replay(req);
        if (parts.size() == 1 && parts[0] == "export" && req.method == "GET") {
            return json_response(200, store_.export_json());
        }
        if (parts.size() == 2 && parts[0] == "patients" && req.method == "GET") {
            return get_patient(parts[1]);
        }
        if (parts.size() >= 4 && parts.size() <= 5 && parts[0] == "patients" &&
            parts[2] == "cycles") {
            const auto cycle = parse_int(parts[3]);
            if (!cycle || *cycle < 1) {
                return error_response(errc::invalid_argument, "cycle number must be a positive integer");
            }
            if (parts.size() == 4 && req.method == "GET") return history(parts[1], *cycle);
            if (parts.size() == 5 && parts[4] == "advice" && req.method == "POST") {
                return advise(req, parts[1], *cycle);
            }
        }
        return json_response(404, {{"error", "not-found"},
                                   {"message", req.method + " " + req.path + " is not a route"}});
    } catch (const ivf_error& e) {
        return error_response(e.code(), e.what());
    } catch (const std::exception& e) {
        return json_response(500, {{"error", "internal"}, {"message", e.what()}});
    }
}

response advisory_service::create_patient(const request& req) {
    patient_profile p;
    try {
        p = parse_body(req.body).get<patient_profile>();
    } catch (const json::exception& e) {
        return error_response(errc::unparseable, std::string("patient: ") + e.what());
    }
    if (const auto v = validate_profile(p); !v.empty()) {
        return error_response(errc::invalid_argument, describe(v), v);
    }
    store_.put_patient(p);
    return json_response(201, {{"patient_id", p.patient_id}});
}

response advisory_service::get_patient(const std::string& id) {
    const auto p = store_.get_patient(id);
    if (!p) return error_response(errc::missing_patient, "unknown patient " + id);
    return json_response(200, *p);
}

response advisory_service::create_visit(const request& req) {
    const auto visit = visit_from_request(parse_body(req.body));
    if (const auto v = validate_visit(visit); !v.empty()) {
        return error_response(errc::invalid_visit, describe(v), v);
    }
    const auto ids = store_.put_visit(visit);
    return json_response(201, {{"blood_test_id", ids.blood_id},
                               {"ultrasound_test_id", ids.ultrasound_id},
                               {"visit_id", ids.ultrasound_id}});
}

cycle_state advisory_service::current_state(const patient_profile& profile, int cycle) const {
    auto p = profile;
    p.cycle_number = cycle;
    auto state = cycle_state::fresh(p);
    for (const auto& entry : store_.list_cycle(profile.patient_id, cycle)) {
        const auto& v = entry.visit;
        if (v.doctor_decision) {
            state = engine_.apply(state, v, *v.doctor_decision, v.doctor_prescription).next;
            continue;
        }
        const store::treatment_record* engine_row = nullptr;
        for (const auto& t : entry.treatments) {
            if (t.source == store::treatment_source::engine) engine_row = &t;
        }
        state = engine_row ? engine_.apply(state, v, engine_row->verdict, engine_row->orders).next
                           : engine_.advise(state, v).next;
    }
    return state;
}

response advisory_service::advise(const request& req, const std::string& id, int cycle) {
    const json body = parse_body(req.body);
    if (!body.is_object()) return error_response(errc::unparseable, "visit must be a JSON object");
    json visit_doc = body;
    if (!visit_doc.contains("patient_id")) visit_doc["patient_id"] = id;
    if (!visit_doc.contains("cycle_number")) visit_doc["cycle_number"] = cycle;
    std::optional<int> oocytes;
    if (const auto it = visit_doc.find("oocytes"); it != visit_doc.end()) {
        if (!it->is_number_integer() || it->get<int>() < 0) {
            return error_response(errc::negative_count, "oocytes must be a non-negative integer");
        }
        oocytes = it->get<int>();
        visit_doc.erase(it);
    }
    const auto visit = visit_from_request(visit_doc);
    if (visit.patient_id != id || visit.cycle_number != cycle) {
        return error_response(errc::wrong_cycle, "visit body names " + visit.patient_id +
                                                     " cycle " + std::to_string(visit.cycle_number));
    }
    if (const auto v = validate_visit(visit); !v.empty()) {
        return error_response(errc::invalid_visit, describe(v), v);
    }
    const bool dry_run = truthy(req.query, "dry_run");

    std::lock_guard lock(cycle_lock(id, cycle));
    const auto profile = store_.get_patient(id);
    if (!profile) return error_response(errc::missing_patient, "unknown patient " + id);

    const auto state = current_state(*profile, cycle);
    const auto step = engine_.advise(state, visit);
    if (!dry_run) {
        store_.atomically([&] {
            store_.put_visit(visit);
            store_.put_treatment(id, cycle, visit.visit_date, step.output, oocytes);
        });
    }

    auto summary = state_summary(step.next);
    summary["next_visit_in_days"] =
        step.output.next_visit_in_days ? json(*step.output.next_visit_in_days) : json(nullptr);
    json visit_echo{{"visit_date", format_date(visit.visit_date)},
                    {"panel", visit.panel},
                    {"exam", visit.exam}};
    return json_response(dry_run ? 200 : 201,
                         {{"patient", {{"patient_id", profile->patient_id},
                                       {"age", profile->age},
                                       {"cycle_number", cycle}}},
                          {"visit", std::move(visit_echo)},
                          {"advice", step.output},
                          {"state", std::move(summary)},
                          {"config_hash", engine_.config_hash()},
                          {"dry_run", dry_run}});
}

response advisory_service::history(const std::string& id, int cycle) {
    const auto profile = store_.get_patient(id);
    if (!profile) return error_response(errc::missing_patient, "unknown patient " + id);
    json visits = json::array();
    for (const auto& e : store_.list_cycle(id, cycle)) {
        visits.push_back({{"visit", e.visit}, {"treatments", e.treatments}});
    }
    std::lock_guard lock(cycle_lock(id, cycle));
    return json_response(200, {{"patient", *profile},
                               {"cycle_number", cycle},
                               {"visits", std::move(visits)},
                               {"state", state_summary(current_state(*profile, cycle))}});
}

response advisory_service::replay(const request& req) {
    const json body = req.body.empty() ? json::object() : parse_body(req.body);
    if (!body.is_object()) return error_response(errc::invalid_config, "replay body must be an object");

    auto format = replay::report_format::json;
    if (const auto it = body.find("format"); it != body.end()) {
        const auto f = it->is_string() ? replay::report_format_from_string(it->get<std::string>())
                                       : std::nullopt;
        if (!f) return error_response(errc::invalid_config, "format must be json, csv or table");
        format = *f;
    }

    dataset data;
    if (const auto it = body.find("synthetic"); it != body.end()) {
        const auto cfg = it->is_string() ? replay::synth_config_from_string(it->get<std::string>())
                                         : it->get<replay::synth_config>();
        data = replay::synth_cohort(cfg, engine_);
    } else if (const auto d = body.find("dataset"); d != body.end()) {
        try {
            data = d->get<dataset>();
        } catch (const json::exception& e) {
            return error_response(errc::invalid_config, std::string("dataset: ") + e.what());
        }
        data.sort();
    } else {
        data = store_.to_dataset();
    }

    const auto report = replay::replay_dataset(data, engine_);
    if (format == replay::report_format::json) return json_response(200, report);
    return response{200, replay::render(report, format),
                    format == replay::report_format::csv ? "text/csv" : "text/plain"};
}

}  // namespace ivf::service
