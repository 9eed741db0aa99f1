// SPDX-License-Identifier: Apache-2.0
#include "biasaudit/net.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <chrono>
#include <mutex>

#include "biasaudit/error.hpp"

namespace biasaudit::net {

HttpResponse RefusingHttpClient::post(const HttpRequest& req) {
  ++attempts_;
  throw Error(Errc::NetworkError, fmt::format("network access refused (POST {})", req.url));
}

namespace {

class HttplibClient final : public HttpClient {
 public:
  HttpResponse post(const HttpRequest& req) override {
    // Split "scheme://host[:port]" from the path.
    const auto scheme_end = req.url.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::NetworkError, fmt::format("bad URL '{}'", req.url));
    const auto path_start = req.url.find('/', scheme_end + 3);
    const std::string origin = req.url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : req.url.substr(path_start);

    httplib::Client cli(origin);
    if (!cli.is_valid()) throw Error(Errc::NetworkError, fmt::format("unsupported endpoint '{}'", origin));
    const auto timeout = std::chrono::milliseconds(static_cast<long>(req.timeout_s * 1000));
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : req.headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        headers.emplace(k, v);
      }
    }
    auto res = cli.Post(path, headers, req.body, content_type);
    if (!res) {
      throw Error(Errc::NetworkError, fmt::format("POST {} failed: {}", req.url, httplib::to_string(res.error())));
    }
    return HttpResponse{res->status, res->body};
  }
};

std::mutex override_mutex;
std::shared_ptr<HttpClient> override_client;

}  // namespace

std::shared_ptr<HttpClient> make_http_client() { return std::make_shared<HttplibClient>(); }

void set_client_override(std::shared_ptr<HttpClient> client) {
  std::lock_guard lock(override_mutex);
  override_client = std::move(client);
}

std::shared_ptr<HttpClient> default_client() {
  std::lock_guard lock(override_mutex);
  if (override_client) return override_client;
  return make_http_client();
}

}  // namespace biasaudit::net
