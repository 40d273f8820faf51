/**
 * @file service.hpp
 * @brief HTTP facade over the store, the engine and replay
 *
 * Routing lives in advisory_service::handle(), a plain function from request
 * to response, so tests drive it without sockets; serve() only adapts it to
 * cpp-httplib.
 *
 * Routes (all but /health need "Authorization: Bearer <token>" when a token is set):
 *   GET  /health
 *   POST /patients                                 profile            -> 201
 *   GET  /patients/{id}
 *   POST /visits                                   visit              -> 201, engine not run
 *   POST /patients/{id}/cycles/{n}/advice[?dry_run=true]  visit       -> AdviceResponse
 *   GET  /patients/{id}/cycles/{n}                 cycle history
 *   POST /replay                                   {synthetic|dataset|format}
 *   GET  /export                                   whole-store export
 *
 * Errors are {"error": "<reason-code>", "message": "...", ["violations": [...]]}.
 */

#pragma once

#include "ivf/core/error.hpp"
#include "ivf/rules/engine.hpp"
#include "ivf/store/cycle_store.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

namespace ivf::service {

struct request {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
    /// Raw Authorization header value.
    std::string authorization;
};

struct response {
    int status{200};
    std::string body;
    std::string content_type{"application/json"};
};

class advisory_service {
public:
    /// An empty token disables authentication.
    advisory_service(store::cycle_store& store, rules::engine eng, std::string token = {});

    [[nodiscard]] response handle(const request& req);

    [[nodiscard]] const rules::engine& engine() const noexcept { return engine_; }

private:
    response create_patient(const request& req);
    response get_patient(const std::string& id);
    response create_visit(const request& req);
    response advise(const request& req, const std::string& id, int cycle);
    response history(const std::string& id, int cycle);
    response replay(const request& req);

    /// State reached by folding the stored history of a cycle.
    [[nodiscard]] cycle_state current_state(const patient_profile& profile, int cycle) const;
    std::mutex& cycle_lock(const std::string& id, int cycle);

    store::cycle_store& store_;
    rules::engine engine_;
    std::string token_;
    std::mutex locks_guard_;
    std::map<std::pair<std::string, int>, std::unique_ptr<std::mutex>> cycle_locks_;
};

/// Visit JSON as accepted over HTTP: analytes may be raw strings ("<0.2", "12,3 mIU/mL"),
/// the exam may be a follicle-map string, and missing times default to 08:00 / 09:00.
[[nodiscard]] visit_record visit_from_request(const json& body);

/// HTTP status for an error code.
[[nodiscard]] int status_for(errc code) noexcept;

/// cpp-httplib server bound to an advisory_service.
class http_server {
public:
    explicit http_server(advisory_service& service);
    ~http_server();
    http_server(const http_server&) = delete;
    http_server& operator=(const http_server&) = delete;

    /// Binds host:port (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void run();
    void stop();

private:
    struct impl;
    std::unique_ptr<impl> impl_;
};

/// Blocks serving HTTP/1.1 on host:port until the process is stopped.
void serve(advisory_service& service, const std::string& host, int port);

}  // namespace ivf::service
