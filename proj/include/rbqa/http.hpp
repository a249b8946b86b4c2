#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <string>

namespace rbqa {

using HttpHeaders = std::multimap<std::string, std::string>;

struct HttpReply {
  enum class Failure { None, Timeout, Connection };

  int status = 0;  // 0 when the request never produced a response
  std::string body;
  Failure failure = Failure::None;
};

/// Minimal request/response transport so clients can be exercised against stubs.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpReply get(const std::string& path_and_query, const HttpHeaders& headers) = 0;
  virtual HttpReply post(const std::string& path, const std::string& body, const std::string& content_type,
                         const HttpHeaders& headers) = 0;
};

/// cpp-httplib backed transport for `scheme://host[:port]` base URLs.
class HttplibTransport final : public HttpTransport {
 public:
  HttplibTransport(std::string base_url, std::chrono::milliseconds timeout);
  ~HttplibTransport() override;

  HttpReply get(const std::string& path_and_query, const HttpHeaders& headers) override;
  HttpReply post(const std::string& path, const std::string& body, const std::string& content_type,
                 const HttpHeaders& headers) override;

  /// Process-wide count of requests sent through any instance.
  static std::uint64_t requests_issued() { return requests_issued_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  static inline std::atomic<std::uint64_t> requests_issued_{0};
};

/// Splits `http://host:port/base/path` into the client part and the path prefix.
struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always starts with '/'
};
UrlParts split_url(const std::string& url);

/// application/x-www-form-urlencoded component encoding.
std::string url_encode(const std::string& s);

}  // namespace rbqa
