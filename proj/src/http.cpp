#include "rbqa/http.hpp"

#include <httplib.h>

#include "rbqa/error.hpp"

namespace rbqa {

struct HttplibTransport::Impl {
  httplib::Client client;
  explicit Impl(const std::string& base) : client(base) {}
};

HttplibTransport::HttplibTransport(std::string base_url, std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>(base_url)) {
  if (!impl_->client.is_valid()) fail(ErrorCode::InvalidArgument, "unsupported URL: " + base_url);
  const auto secs = static_cast<time_t>(timeout.count() / 1000);
  const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
  impl_->client.set_connection_timeout(secs, usecs);
  impl_->client.set_read_timeout(secs, usecs);
  impl_->client.set_write_timeout(secs, usecs);
}

HttplibTransport::~HttplibTransport() = default;

namespace {

HttpReply to_reply(const httplib::Result& res) {
  HttpReply reply;
  if (res) {
    reply.status = res->status;
    reply.body = res->body;
    return reply;
  }
  reply.failure = res.error() == httplib::Error::Read || res.error() == httplib::Error::Write ||
                          res.error() == httplib::Error::ConnectionTimeout
                      ? HttpReply::Failure::Timeout
                      : HttpReply::Failure::Connection;
  return reply;
}

httplib::Headers to_headers(const HttpHeaders& h) { return httplib::Headers(h.begin(), h.end()); }

}  // namespace

HttpReply HttplibTransport::get(const std::string& path_and_query, const HttpHeaders& headers) {
  ++requests_issued_;
  return to_reply(impl_->client.Get(path_and_query, to_headers(headers)));
}

HttpReply HttplibTransport::post(const std::string& path, const std::string& body, const std::string& content_type,
                                 const HttpHeaders& headers) {
  ++requests_issued_;
  return to_reply(impl_->client.Post(path, to_headers(headers), body, content_type));
}

UrlParts split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) fail(ErrorCode::InvalidArgument, "URL lacks a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

std::string url_encode(const std::string& s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
        c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 15];
    }
  }
  return out;
}

}  // namespace rbqa
