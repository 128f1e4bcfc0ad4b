// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/chat_client.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <regex>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "polarkit/errors.hpp"

namespace polarkit {

using json = nlohmann::json;

void AttemptLog::add(AttemptRecord record) {
  std::lock_guard lock(mutex_);
  records_.push_back(std::move(record));
}

std::vector<AttemptRecord> AttemptLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t AttemptLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string complete_with_retry(ChatClient& client, const ChatRequest& request,
                                const RetryPolicy& policy, AttemptLog* log, const Sleeper& sleep) {
  require(policy.max_attempts >= 1, ErrorKind::usage, "retry policy needs at least one attempt");
  auto delay = policy.base_delay;
  std::string last_error;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    try {
      std::string text = client.complete(request);
      if (log) log->add({request.key, attempt, true, {}});
      if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        fail(ErrorKind::generation, "empty response for " + request.key);
      }
      return text;
    } catch (const TransientFailure& e) {
      last_error = e.what();
      if (log) log->add({request.key, attempt, false, last_error});
    }
    if (attempt < policy.max_attempts) {
      sleep(delay);
      delay = std::chrono::milliseconds(
          static_cast<std::chrono::milliseconds::rep>(double(delay.count()) * policy.multiplier));
    }
  }
  fail(ErrorKind::transport, "request " + request.key + " failed after " +
                                 std::to_string(policy.max_attempts) + " attempt(s): " + last_error);
}

std::string chat_request_body(const ChatRequest& request) {
  json body;
  body["model"] = request.model;
  body["temperature"] = request.temperature;
  body["messages"] = json::array();
  for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  return body.dump();
}

std::string parse_chat_response(const std::string& body) {
  try {
    const json doc = json::parse(body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::generation, std::string("malformed chat-completion response: ") + e.what());
  }
}

HttpChatClient::HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  require(std::regex_match(config_.endpoint, m, url_re), ErrorKind::usage,
          "endpoint must be an http(s) URL: " + config_.endpoint);
  const std::string origin = m[1];
  const std::string path = m[2].matched ? std::string(m[2]) : "/";

  httplib::Client client(origin);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(path, headers, chat_request_body(request), "application/json");
  if (!res) throw TransientFailure("connection error: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransientFailure("HTTP " + std::to_string(res->status));
  }
  require(res->status == 200, ErrorKind::transport,
          "HTTP " + std::to_string(res->status) + " from " + config_.endpoint);
  return parse_chat_response(res->body);
}

void run_bounded(std::size_t count, std::size_t limit, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  limit = std::max<std::size_t>(1, std::min(limit, count));
  if (limit == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < limit; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace polarkit
