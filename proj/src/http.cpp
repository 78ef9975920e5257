#include "ptwin/http.h"

#include <sstream>
#include <thread>

#include <httplib.h>

namespace ptwin {

std::optional<std::string> HttpRequest::query_value(const std::string& key) const {
    auto it = query.find(key);
    if (it == query.end()) return std::nullopt;
    return it->second;
}

HttpResponse json_response(const nlohmann::json& body, int status) {
    return {status, body.dump(), "application/json"};
}

HttpResponse error_response(ErrorCode code, const std::string& message) {
    return json_response({{"code", to_string(code)}, {"message", message}}, http_status(code));
}

HttpResponse error_response(const Error& error) { return error_response(error.code(), error.what()); }

HttpResponse guarded(const Handler& handler, const HttpRequest& request) {
    try {
        return handler(request);
    } catch (const Error& e) {
        return error_response(e);
    } catch (const nlohmann::json::exception& e) {
        return error_response(ErrorCode::MalformedRequest, e.what());
    }
}

std::vector<std::string> path_segments(const std::string& path) {
    std::vector<std::string> out;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '/')) {
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

nlohmann::json parse_json_body(const HttpRequest& request) {
    auto j = nlohmann::json::parse(request.body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedRequest, "request body is not valid JSON");
    return j;
}

HttpResponse InMemoryTransport::send(const HttpRequest& request) { return guarded(handler_, request); }

std::pair<std::string, int> parse_endpoint(const std::string& endpoint) {
    std::string rest = endpoint;
    if (auto pos = rest.find("://"); pos != std::string::npos) rest = rest.substr(pos + 3);
    while (!rest.empty() && rest.back() == '/') rest.pop_back();
    auto colon = rest.rfind(':');
    if (colon == std::string::npos) return {rest, 80};
    return {rest.substr(0, colon), std::stoi(rest.substr(colon + 1))};
}

struct HttpClientTransport::Impl {
    httplib::Client client;
    Impl(const std::string& host, int port) : client(host, port) {}
};

HttpClientTransport::HttpClientTransport(std::string host, int port, double timeout_s)
    : impl_(std::make_unique<Impl>(host, port)) {
    auto usec = static_cast<long>(timeout_s * 1e6);
    impl_->client.set_connection_timeout(usec / 1000000, usec % 1000000);
    impl_->client.set_read_timeout(usec / 1000000, usec % 1000000);
    impl_->client.set_keep_alive(false);
}

HttpClientTransport::~HttpClientTransport() = default;

HttpResponse HttpClientTransport::send(const HttpRequest& request) {
    httplib::Params params(request.query.begin(), request.query.end());
    std::string target = params.empty()
                             ? request.path
                             : httplib::append_query_params(request.path, params);
    httplib::Headers headers;
    if (!request.accept.empty()) headers.emplace("Accept", request.accept);

    httplib::Result result;
    if (request.method == "GET") {
        result = impl_->client.Get(target, headers);
    } else if (request.method == "DELETE") {
        result = impl_->client.Delete(target, headers);
    } else if (!request.form.empty()) {
        httplib::MultipartFormDataItems items;
        for (const auto& [name, content] : request.form) {
            bool json = name == "metadata";
            items.push_back({name, content, json ? "" : name,
                             json ? "application/json" : "application/octet-stream"});
        }
        result = impl_->client.Post(target, headers, items);
    } else {
        result = impl_->client.Post(target, headers, request.body, request.content_type);
    }
    if (!result) {
        throw TransportError("transport failure: " + httplib::to_string(result.error()));
    }
    HttpResponse out;
    out.status = result->status;
    out.body = result->body;
    out.content_type = result->get_header_value("Content-Type");
    return out;
}

struct HttpService::Impl {
    Handler handler;
    httplib::Server server;
    std::thread thread;
    int port = -1;
};

HttpService::HttpService(Handler handler) : impl_(std::make_unique<Impl>()) {
    impl_->handler = std::move(handler);
    auto bridge = [this](const httplib::Request& req, httplib::Response& res) {
        HttpRequest r;
        r.method = req.method;
        r.path = req.path;
        for (const auto& [k, v] : req.params) r.query[k] = v;
        r.body = req.body;
        r.content_type = req.get_header_value("Content-Type");
        r.accept = req.get_header_value("Accept");
        for (const auto& [name, file] : req.files) r.form[name] = file.content;
        HttpResponse out = guarded(impl_->handler, r);
        res.status = out.status;
        res.set_content(out.body, out.content_type);
    };
    // SO_REUSEADDR only, so a busy port is reported.
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    impl_->server.Get(".*", bridge);
    impl_->server.Post(".*", bridge);
    impl_->server.Delete(".*", bridge);
}

HttpService::~HttpService() { stop(); }

void HttpService::bind(const std::string& host, int port) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else if (impl_->server.bind_to_port(host, port)) {
        impl_->port = port;
    } else {
        impl_->port = -1;
    }
    if (impl_->port < 0) {
        throw Error(ErrorCode::PortInUse, "cannot bind " + host + ":" + std::to_string(port));
    }
}

void HttpService::start() {
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void HttpService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int HttpService::port() const { return impl_->port; }

}  // namespace ptwin
