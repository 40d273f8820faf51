/**
 * @file http.cpp
 * @brief cpp-httplib adapter for advisory_service
 */

#include "ivf/service/service.hpp"

#include "ivf/core/error.hpp"

#include <httplib.h>

#include <iostream>

namespace ivf::service {

struct http_server::impl {
    httplib::Server server;
};

http_server::http_server(advisory_service& service) : impl_(std::make_unique<impl>()) {
    auto adapt = [&service](const httplib::Request& in, httplib::Response& out) {
        request req;
        req.method = in.method;
        req.path = in.path;
        for (const auto& [k, v] : in.params) req.query.emplace(k, v);
        req.body = in.body;
        req.authorization = in.get_header_value("Authorization");
        const auto res = service.handle(req);
        out.status = res.status;
        out.set_content(res.body, res.content_type);
    };
    impl_->server.Get(R"(/.*)", adapt);
    impl_->server.Post(R"(/.*)", adapt);
}

http_server::~http_server() = default;

int http_server::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                                : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound <= 0) {
        throw ivf_error(errc::io_failure, "cannot listen on " + host + ":" + std::to_string(port));
    }
    return bound;
}

void http_server::run() {
    if (!impl_->server.listen_after_bind()) throw ivf_error(errc::io_failure, "server stopped abnormally");
}

void http_server::stop() { impl_->server.stop(); }

void serve(advisory_service& service, const std::string& host, int port) {
    http_server server(service);
    const int bound = server.bind(host, port);
    std::clog << "ivf: listening on " << host << ':' << bound << '\n';
    server.run();
}

}  // namespace ivf::service
