#pragma once

#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include "rbqa/http.hpp"

namespace rbqa::testkit {

/// Returns scripted replies in order (the last one repeats) and records requests.
class StubTransport final : public HttpTransport {
 public:
  struct Request {
    std::string method;
    std::string path;
    std::string body;
    HttpHeaders headers;
  };

  explicit StubTransport(std::vector<HttpReply> replies) : replies_(replies.begin(), replies.end()) {}

  HttpReply get(const std::string& path, const HttpHeaders& headers) override { return next({"GET", path, "", headers}); }
  HttpReply post(const std::string& path, const std::string& body, const std::string&,
                 const HttpHeaders& headers) override {
    return next({"POST", path, body, headers});
  }

  std::vector<Request> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  HttpReply next(Request r) {
    std::lock_guard lock(mutex_);
    requests_.push_back(std::move(r));
    HttpReply reply = replies_.front();
    if (replies_.size() > 1) replies_.pop_front();
    return reply;
  }

  mutable std::mutex mutex_;
  std::deque<HttpReply> replies_;
  std::vector<Request> requests_;
};

inline HttpReply ok(std::string body) { return HttpReply{200, std::move(body), HttpReply::Failure::None}; }
inline HttpReply status(int code, std::string body = "") {
  return HttpReply{code, std::move(body), HttpReply::Failure::None};
}
inline HttpReply timeout() { return HttpReply{0, "", HttpReply::Failure::Timeout}; }

}  // namespace rbqa::testkit
