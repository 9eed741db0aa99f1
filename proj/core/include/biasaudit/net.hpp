// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal HTTP seam. Everything that talks to a remote endpoint goes through
// an HttpClient, so tests can substitute a fake or a refusing client.

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <string>

namespace biasaudit::net {

struct HttpRequest {
  std::string url;
  std::map<std::string, std::string> headers;
  std::string body;
  double timeout_s = 30;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

class HttpClient {
 public:
  virtual ~HttpClient() = default;
  /// Throws NetworkError on transport failure or timeout. Non-2xx statuses
  /// are returned, not thrown.
  virtual HttpResponse post(const HttpRequest& req) = 0;
};

/// Fails every request with NetworkError and counts the attempts.
class RefusingHttpClient final : public HttpClient {
 public:
  HttpResponse post(const HttpRequest& req) override;
  std::size_t attempts() const noexcept { return attempts_.load(); }

 private:
  std::atomic<std::size_t> attempts_{0};
};

/// Blocking client over cpp-httplib. https needs the library built with
/// OpenSSL; otherwise such URLs fail with NetworkError.
std::shared_ptr<HttpClient> make_http_client();

/// Process-wide override consulted by default_client(). Installing a
/// RefusingHttpClient here makes any network attempt fail loudly.
void set_client_override(std::shared_ptr<HttpClient> client);
/// The override when set, else a fresh make_http_client().
std::shared_ptr<HttpClient> default_client();

}  // namespace biasaudit::net
