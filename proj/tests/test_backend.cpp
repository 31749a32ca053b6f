#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "beliefsim/backend.hpp"
#include "beliefsim/error.hpp"

using namespace beliefsim;

namespace {

std::vector<ChatMessage> hello() {
  return {{Role::system, "You are terse."}, {Role::user, "Say hi."}};
}

// In-process chat-completions server on an ephemeral port.
class FakeServer {
 public:
  explicit FakeServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    server_.Post("/proxy/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"via prefix"}}]})",
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

BackendConfig config_for(const std::string& url) {
  BackendConfig config;
  config.base_url = url;
  config.model_name = "test-model";
  config.timeout = std::chrono::milliseconds(2000);
  config.initial_backoff = std::chrono::milliseconds(1);
  return config;
}

void reply(httplib::Response& res, const std::string& content) {
  nlohmann::json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
  res.set_content(body.dump(), "application/json");
}

}  // namespace

TEST_CASE("scripted queue replays responses") {
  ScriptedBackend backend({"Yes"});
  CHECK(backend.complete(hello()) == "Yes");
  CHECK_THROWS_AS(backend.complete(hello()), BackendError);
  CHECK(backend.calls() == 1);
}

TEST_CASE("message preconditions") {
  ScriptedBackend backend({"x", "y"});
  CHECK_THROWS_AS(backend.complete({}), DomainError);
  CHECK_THROWS_AS(backend.complete({{Role::user, "a"}, {Role::system, "b"}}), DomainError);
  CHECK_THROWS_AS(backend.complete({{Role::user, ""}}), DomainError);
  CHECK(backend.calls() == 0);
}

TEST_CASE("scripted function of agent and round") {
  ScriptedBackend backend([](const CallTag& tag, const std::vector<ChatMessage>&) {
    return "strength " + std::to_string(5 - tag.round);
  });
  CallTag tag{"d1", "Target agent", "reassess", 3, 0, {}};
  CHECK(backend.complete(hello(), tag) == "strength 2");
}

TEST_CASE("per-agent queues are consumed independently") {
  ScriptedBackend backend;
  backend.push("a", "a1");
  backend.push("a", "a2");
  backend.push("b", "b1");
  backend.push("b", "b2");
  CHECK(backend.complete(hello(), {"d", "a", "speak", 1, 0, {}}) == "a1");
  CHECK(backend.complete(hello(), {"d", "b", "speak", 1, 0, {}}) == "b1");
  CHECK(backend.complete(hello(), {"d", "b", "speak", 2, 0, {}}) == "b2");
  CHECK(backend.complete(hello(), {"d", "a", "speak", 2, 0, {}}) == "a2");
  CHECK_THROWS_AS(backend.complete(hello(), {"d", "a", "speak", 3, 0, {}}), BackendError);
}

TEST_CASE("rule scripts") {
  const auto script = nlohmann::json::parse(R"({
    "seed": 11,
    "rules": [
      {"kind": "reassess", "agent": "Target agent", "by_round": ["5", "4", "3", "2"]},
      {"kind": "speak", "attributes": {"group_size": {"min": 3}, "final": true},
       "response": "I now choose ({opposing_letter})."},
      {"kind": "speak", "response": "I keep ({held_letter}) in round {round}."},
      {"kind": "coin", "random": ["heads", "tails"]}
    ]})");
  auto backend = ScriptedBackend::from_rules(script);
  CHECK(backend->complete(hello(), {"d", "Target agent", "reassess", 2, 0, {}}) == "4");
  CHECK(backend->complete(hello(), {"d", "Target agent", "reassess", 9, 0, {}}) == "2");
  const std::map<std::string, std::string> attrs = {
      {"group_size", "3"}, {"final", "true"}, {"held_letter", "B"}, {"opposing_letter", "C"}};
  CHECK(backend->complete(hello(), {"d", "x", "speak", 4, 0, attrs}) == "I now choose (C).");
  auto small = attrs;
  small["group_size"] = "2";
  CHECK(backend->complete(hello(), {"d", "x", "speak", 4, 0, small}) == "I keep (B) in round 4.");
  CHECK_THROWS_AS(backend->complete(hello(), {"d", "x", "unknown", 1, 0, {}}), BackendError);

  // Seeded random choices depend only on the tag, not on call order.
  auto again = ScriptedBackend::from_rules(script);
  std::vector<std::string> first, second;
  for (int i = 0; i < 20; ++i) first.push_back(backend->complete(hello(), {"d" + std::to_string(i), "x", "coin", 1, 0, {}}));
  for (int i = 19; i >= 0; --i) second.insert(second.begin(), again->complete(hello(), {"d" + std::to_string(i), "x", "coin", 1, 0, {}}));
  CHECK(first == second);
  CHECK(std::count(first.begin(), first.end(), "heads") > 0);
  CHECK(std::count(first.begin(), first.end(), "tails") > 0);

  CHECK_THROWS_AS(ScriptedBackend::from_rules(nlohmann::json::parse(R"({"rules":[{"kind":"x"}]})")),
                  ConfigError);
  CHECK_THROWS_AS(ScriptedBackend::from_rules(nlohmann::json::parse(R"({"rules":[{"random":[]}]})")),
                  ConfigError);
}

TEST_CASE("identical scripts give identical request logs") {
  const auto run = [] {
    ScriptedBackend backend([](const CallTag& tag, const std::vector<ChatMessage>& messages) {
      return tag.agent + ":" + std::to_string(messages.back().content.size());
    });
    for (int round = 1; round <= 4; ++round) {
      for (const char* agent : {"a", "b"}) {
        backend.complete({{Role::user, "round " + std::to_string(round)}}, {"d", agent, "speak", round, 0, {}});
      }
    }
    return backend.log();
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == 8);
  REQUIRE(b.size() == 8);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].messages == b[i].messages);
    CHECK(a[i].response == b[i].response);
    CHECK(a[i].tag.agent == b[i].tag.agent);
  }
}

TEST_CASE("http backend sends the chat-completions request") {
  nlohmann::json seen;
  std::string auth;
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    auth = req.get_header_value("Authorization");
    reply(res, "Hello there.");
  });
  auto config = config_for(server.url());
  config.api_key = "secret";
  HttpChatBackend backend(config);
  CHECK(backend.complete(hello()) == "Hello there.");
  CHECK(seen["model"] == "test-model");
  CHECK(seen["temperature"] == 0.7);
  CHECK(seen["messages"].size() == 2);
  CHECK(seen["messages"][0]["role"] == "system");
  CHECK(seen["messages"][1]["content"] == "Say hi.");
  CHECK(auth == "Bearer secret");

  HttpChatBackend prefixed(config_for(server.url() + "/proxy/"));
  CHECK(prefixed.complete(hello()) == "via prefix");
}

TEST_CASE("http backend retries 5xx but not 4xx") {
  std::atomic<int> hits{0};
  FakeServer flaky([&](const httplib::Request&, httplib::Response& res) {
    if (++hits <= 2) {
      res.status = 503;
      return;
    }
    reply(res, "recovered");
  });
  HttpChatBackend backend(config_for(flaky.url()));
  CHECK(backend.complete(hello()) == "recovered");
  CHECK(hits == 3);

  std::atomic<int> bad_hits{0};
  FakeServer rejecting([&](const httplib::Request&, httplib::Response& res) {
    ++bad_hits;
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  HttpChatBackend strict(config_for(rejecting.url()));
  CHECK_THROWS_AS(strict.complete(hello()), BackendError);
  CHECK(bad_hits == 1);

  std::atomic<int> down_hits{0};
  FakeServer down([&](const httplib::Request&, httplib::Response& res) {
    ++down_hits;
    res.status = 500;
  });
  auto config = config_for(down.url());
  config.max_retries = 2;
  HttpChatBackend exhausted(config);
  CHECK_THROWS_WITH_AS(exhausted.complete(hello()), doctest::Contains("after 3 attempts"), BackendError);
  CHECK(down_hits == 3);
}

TEST_CASE("http backend transport errors and malformed replies") {
  auto config = config_for("http://127.0.0.1:1");
  config.max_retries = 1;
  config.timeout = std::chrono::milliseconds(300);
  CHECK_THROWS_AS(HttpChatBackend(config).complete(hello()), BackendError);

  FakeServer garbage([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  CHECK_THROWS_AS(HttpChatBackend(config_for(garbage.url())).complete(hello()), BackendError);

  CHECK_THROWS_AS(HttpChatBackend{config_for("ftp://host")}, ConfigError);
  auto no_model = config_for("http://localhost");
  no_model.model_name.clear();
  CHECK_THROWS_AS(HttpChatBackend{no_model}, ConfigError);
}
