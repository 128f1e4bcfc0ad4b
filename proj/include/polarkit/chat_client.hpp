// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_CHAT_CLIENT_HPP
#define POLARKIT_CHAT_CLIENT_HPP

#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace polarkit {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

struct ChatRequest {
  std::string model;
  double temperature = 0.0;
  std::vector<ChatMessage> messages;
  /// Idempotency key, e.g. "<scene>/<template>". Attempt numbers are appended in logs.
  std::string key;
  /// Side-channel for in-process clients; never serialized onto the wire.
  std::map<std::string, std::string> metadata;
};

/// Thrown by clients for failures worth retrying (timeouts, 429, 5xx).
class TransientFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the assistant message text. Throws TransientFailure or polarkit::Error.
  virtual std::string complete(const ChatRequest& request) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{250};
  double multiplier = 2.0;
};

struct AttemptRecord {
  std::string key;
  int attempt = 0;
  bool ok = false;
  std::string detail;
};

/// Thread-safe append-only record of client attempts.
class AttemptLog {
 public:
  void add(AttemptRecord record);
  std::vector<AttemptRecord> records() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<AttemptRecord> records_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Default sleeper: std::this_thread::sleep_for.
Sleeper real_sleeper();

/// Calls the client up to policy.max_attempts times with exponential backoff
/// between transient failures. Throws transport after the last attempt and
/// generation on an empty response.
std::string complete_with_retry(ChatClient& client, const ChatRequest& request,
                                const RetryPolicy& policy, AttemptLog* log = nullptr,
                                const Sleeper& sleep = real_sleeper());

struct HttpClientConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "POLARKIT_API_KEY";
  std::chrono::seconds timeout{60};
};

/// Chat-completion client over HTTP(S). Only model, temperature and messages are sent.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientConfig config);
  std::string complete(const ChatRequest& request) override;

 private:
  HttpClientConfig config_;
  std::string api_key_;
};

/// Request body sent to a chat-completion endpoint.
std::string chat_request_body(const ChatRequest& request);
/// Extracts choices[0].message.content; throws generation on a malformed body.
std::string parse_chat_response(const std::string& body);

/// Runs fn(i) for i in [0, count) on at most `limit` threads.
void run_bounded(std::size_t count, std::size_t limit, const std::function<void(std::size_t)>& fn);

}  // namespace polarkit

#endif  // POLARKIT_CHAT_CLIENT_HPP
