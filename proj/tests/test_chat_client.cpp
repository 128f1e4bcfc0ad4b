// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

// Must match the library's httplib configuration.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <set>
#include <thread>

#include "polarkit/chat_client.hpp"
#include "support.hpp"

using namespace polarkit;
using polarkit::testing::throws_kind;
using nlohmann::json;

namespace {

// Local chat endpoint whose status codes follow a script, one per request.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
      bodies.push_back(req.body);
      auth = req.get_header_value("Authorization");
      const std::size_t k = calls++;
      res.status = k < statuses_.size() ? statuses_[k] : 200;
      if (res.status == 200) {
        const json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "Score: 8"}}}}}}};
        res.set_content(reply.dump(), "application/json");
      } else {
        res.set_content("{}", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat"; }

  std::vector<std::string> bodies;
  std::string auth;
  std::atomic<std::size_t> calls{0};

 private:
  std::vector<int> statuses_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

ChatRequest request() {
  ChatRequest r;
  r.model = "toy";
  r.messages = {{"system", "Judge."}, {"user", "Rate it."}};
  r.key = "item/0";
  r.metadata = {{"reference", "secret"}};
  return r;
}

HttpClientConfig config_for(const FakeEndpoint& e) {
  HttpClientConfig c;
  c.endpoint = e.url();
  c.api_key_env = "POLARKIT_TEST_KEY";
  c.timeout = std::chrono::seconds(5);
  return c;
}

}  // namespace

TEST_CASE("request bodies carry only model, temperature and messages") {
  const json body = json::parse(chat_request_body(request()));
  CHECK(body.at("model") == "toy");
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("messages").size() == 2);
  CHECK(body.at("messages")[1].at("content") == "Rate it.");
  CHECK(!body.contains("metadata"));
  CHECK(body.dump().find("secret") == std::string::npos);

  CHECK(parse_chat_response(R"({"choices":[{"message":{"content":"hi"}}]})") == "hi");
  CHECK(throws_kind([] { parse_chat_response("{}"); }, ErrorKind::generation));
  CHECK(throws_kind([] { parse_chat_response("not json"); }, ErrorKind::generation));
}

TEST_CASE("http client against a local endpoint") {
  ::setenv("POLARKIT_TEST_KEY", "k123", 1);
  {
    FakeEndpoint endpoint({200});
    HttpChatClient client(config_for(endpoint));
    CHECK(client.complete(request()) == "Score: 8");
    CHECK(endpoint.auth == "Bearer k123");
    CHECK(json::parse(endpoint.bodies.at(0)).at("model") == "toy");
  }
  {
    FakeEndpoint endpoint({503, 429});
    HttpChatClient client(config_for(endpoint));
    CHECK_THROWS_AS(client.complete(request()), TransientFailure);
    CHECK_THROWS_AS(client.complete(request()), TransientFailure);
    CHECK(client.complete(request()) == "Score: 8");
  }
  {
    FakeEndpoint endpoint({401});
    HttpChatClient client(config_for(endpoint));
    CHECK(throws_kind([&] { client.complete(request()); }, ErrorKind::transport));
  }
  {
    FakeEndpoint endpoint({503, 503});
    HttpChatClient client(config_for(endpoint));
    std::vector<std::chrono::milliseconds> waits;
    AttemptLog log;
    RetryPolicy policy;
    CHECK(complete_with_retry(client, request(), policy, &log, [&](auto d) { waits.push_back(d); }) == "Score: 8");
    CHECK(log.size() == 3);
    CHECK(waits == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(250), std::chrono::milliseconds(500)});
  }
  ::unsetenv("POLARKIT_TEST_KEY");

  HttpClientConfig bad;
  bad.endpoint = "ftp://example";
  CHECK(throws_kind([&] { HttpChatClient(bad).complete(request()); }, ErrorKind::usage));
}

TEST_CASE("unreachable endpoints are transient") {
  HttpClientConfig c;
  c.endpoint = "http://127.0.0.1:1/v1/chat";
  c.timeout = std::chrono::seconds(1);
  HttpChatClient client(c);
  CHECK_THROWS_AS(client.complete(request()), TransientFailure);
}

namespace {

class ScriptClient : public ChatClient {
 public:
  explicit ScriptClient(std::vector<std::string> script) : script_(std::move(script)) {}
  std::string complete(const ChatRequest&) override {
    const std::string s = script_.at(calls_++);
    if (s == "!") throw TransientFailure("boom");
    return s;
  }

 private:
  std::vector<std::string> script_;
  std::size_t calls_ = 0;
};

}  // namespace

TEST_CASE("retry policy") {
  std::vector<std::chrono::milliseconds> waits;
  auto sleeper = [&](std::chrono::milliseconds d) { waits.push_back(d); };
  RetryPolicy policy{4, std::chrono::milliseconds(10), 3.0};

  ScriptClient eventually({"!", "!", "ok"});
  AttemptLog log;
  CHECK(complete_with_retry(eventually, request(), policy, &log, sleeper) == "ok");
  CHECK(waits == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(10), std::chrono::milliseconds(30)});
  const auto records = log.records();
  REQUIRE(records.size() == 3);
  CHECK(!records[0].ok);
  CHECK(records[2].ok);
  CHECK(records[2].attempt == 3);

  waits.clear();
  ScriptClient never({"!", "!", "!", "!"});
  CHECK(throws_kind([&] { complete_with_retry(never, request(), policy, nullptr, sleeper); }, ErrorKind::transport));
  CHECK(waits.size() == 3);

  ScriptClient blank({"  \n"});
  CHECK(throws_kind([&] { complete_with_retry(blank, request(), policy, nullptr, sleeper); }, ErrorKind::generation));
  policy.max_attempts = 0;
  CHECK(throws_kind([&] { complete_with_retry(blank, request(), policy, nullptr, sleeper); }, ErrorKind::usage));
}

TEST_CASE("bounded concurrency") {
  std::atomic<int> active{0}, peak{0};
  std::vector<int> seen(50, 0);
  run_bounded(50, 4, [&](std::size_t i) {
    const int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {}
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
    seen[i] += 1;
    --active;
  });
  CHECK(peak.load() <= 4);
  CHECK(std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; }));

  CHECK_THROWS_AS(run_bounded(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }), std::runtime_error);
  CHECK_NOTHROW(run_bounded(0, 3, [](std::size_t) { throw std::runtime_error("never"); }));
}
