#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ptwin/error.h"

namespace ptwin {

struct HttpRequest {
    std::string method = "GET";
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
    std::string content_type = "application/json";
    std::string accept;
    // Multipart form parts by name.
    std::map<std::string, std::string> form;

    std::optional<std::string> query_value(const std::string& key) const;
};

struct HttpResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";

    bool ok() const { return status >= 200 && status < 300; }
};

using Handler = std::function<HttpResponse(const HttpRequest&)>;

HttpResponse json_response(const nlohmann::json& body, int status = 200);
// Error object {code, message} with the code's mapped status.
HttpResponse error_response(const Error& error);
HttpResponse error_response(ErrorCode code, const std::string& message);

// Runs the handler and maps any Error or JSON failure to an error response.
HttpResponse guarded(const Handler& handler, const HttpRequest& request);

// Splits "/v1/a/b" into {"v1", "a", "b"}.
std::vector<std::string> path_segments(const std::string& path);

nlohmann::json parse_json_body(const HttpRequest& request);

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Client side of a wire hop. send() throws TransportError when the request
// never produced a response.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse send(const HttpRequest& request) = 0;
};

// Delivers requests straight to a handler in this process.
class InMemoryTransport : public Transport {
public:
    explicit InMemoryTransport(Handler handler) : handler_(std::move(handler)) {}
    HttpResponse send(const HttpRequest& request) override;

private:
    Handler handler_;
};

// Real socket client.
class HttpClientTransport : public Transport {
public:
    HttpClientTransport(std::string host, int port, double timeout_s = 5.0);
    ~HttpClientTransport() override;
    HttpResponse send(const HttpRequest& request) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Parses "host:port" or "http://host:port".
std::pair<std::string, int> parse_endpoint(const std::string& endpoint);

// Serves a handler over HTTP on a background thread.
class HttpService {
public:
    explicit HttpService(Handler handler);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    // Binds immediately; throws Error(PortInUse). Port 0 picks a free port.
    void bind(const std::string& host, int port);
    void start();
    void stop();
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ptwin
