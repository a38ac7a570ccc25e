#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "nlohmann/json.hpp"
#include "promptgrid/client.hpp"

using namespace promptgrid;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() : path(std::filesystem::temp_directory_path() / "promptgrid_client_test") {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

CompletionRequest request_for(const std::string& prompt) {
  return CompletionRequest{"test-model", prompt, DecodingParams{}};
}

// Local completions server whose handler the test scripts per scenario.
struct ScriptedServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};

  explicit ScriptedServer(std::function<void(const httplib::Request&, httplib::Response&, int)> fn) {
    server.Post("/v1/completions", [this, fn](const httplib::Request& req, httplib::Response& res) {
      fn(req, res, ++hits);
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~ScriptedServer() {
    server.stop();
    thread.join();
  }
  ModelEndpoint endpoint() const {
    ModelEndpoint e;
    e.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    e.model_name = "test-model";
    e.max_attempts = 4;
    return e;
  }
};

void reply_text(httplib::Response& res, const std::string& text) {
  nlohmann::json body{{"choices", {{{"text", text}}}}};
  res.set_content(body.dump(), "application/json");
}

struct CountingBackend : CompletionBackend {
  std::atomic<int> calls{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};

  std::string complete(const CompletionRequest& request) override {
    ++calls;
    int now = ++in_flight;
    int seen = max_in_flight.load();
    while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    --in_flight;
    return "echo:" + request.digest().substr(0, 8);
  }
};

struct PoisonBackend : CompletionBackend {
  std::string complete(const CompletionRequest&) override {
    FAIL("backend must not be reached");
    return "";
  }
};

}  // namespace

TEST_CASE("digest is a pure function of model, prompt and decoding") {
  CompletionRequest a = request_for("What is 2+2?");
  CHECK(a.digest() == request_for("What is 2+2?").digest());
  CHECK(a.digest().size() == 64);

  CHECK(a.digest() != request_for("What is 2+3?").digest());

  CompletionRequest hotter = a;
  hotter.decoding.temperature = 0.7;
  CHECK(a.digest() != hotter.digest());

  CompletionRequest other_model = a;
  other_model.model = "another";
  CHECK(a.digest() != other_model.digest());

  CompletionRequest other_stops = a;
  other_stops.decoding.stop_sequences = {"</s>"};
  CHECK(a.digest() != other_stops.digest());
}

TEST_CASE("stop sequences clip at the first occurrence") {
  CHECK(truncate_at_stop("one</s>two\n---three", {"</s>", "\n---"}) == "one");
  CHECK(truncate_at_stop("one\n---two</s>three", {"</s>", "\n---"}) == "one");
  CHECK(truncate_at_stop("untouched", {"</s>"}) == "untouched");
  CHECK(truncate_at_stop("abc", {}) == "abc");
}

TEST_CASE("replay backend serves scripted completions only") {
  CompletionRequest request = request_for("p");
  ReplayBackend replay;
  replay.add(request.digest(), "Answer: 14</s>");
  CHECK(replay.complete(request) == "Answer: 14</s>");
  CHECK_THROWS_AS(replay.complete(request_for("other")), TransportError);

  TempDir tmp;
  replay.save(tmp.path / "replay.jsonl");
  ReplayBackend loaded = ReplayBackend::load(tmp.path / "replay.jsonl");
  CHECK(loaded.complete(request) == "Answer: 14</s>");
  CHECK_THROWS_AS(ReplayBackend::load(tmp.path / "missing.jsonl"), TransportError);
}

TEST_CASE("cache round-trips, persists and detects tampering") {
  TempDir tmp;
  const auto cache_file = tmp.path / "cache.jsonl";
  CompletionRequest request = request_for("math question");

  {
    CompletionCache cache(cache_file);
    CHECK_FALSE(cache.lookup(request.digest()));
    cache.insert(CompletionRecord{request.digest(), request.model, request.prompt,
                                  request.decoding, "Answer: 7</s>", 12.5,
                                  "2026-01-01T00:00:00Z"});
    CHECK(cache.lookup(request.digest()) == "Answer: 7</s>");
    CHECK(cache.size() == 1);
  }
  {
    CompletionCache reopened(cache_file);
    CHECK(reopened.lookup(request.digest()) == "Answer: 7</s>");
  }

  SUBCASE("a flipped digest byte refuses to load") {
    std::string content;
    {
      std::ifstream in(cache_file);
      std::getline(in, content);
    }
    std::size_t at = content.find("\"digest\":\"") + 10;
    content[at] = content[at] == 'a' ? 'b' : 'a';
    std::ofstream(cache_file, std::ios::trunc) << content << "\n";
    CHECK_THROWS_AS(CompletionCache{cache_file}, CacheCorruptionError);
  }

  SUBCASE("a damaged interior line refuses to load") {
    std::ofstream out(cache_file, std::ios::app);
    out << "{broken\n";
    out << "also not json\n";
    out.close();
    CHECK_THROWS_AS(CompletionCache{cache_file}, CacheCorruptionError);
  }

  SUBCASE("a torn, unterminated tail is dropped as a crash remnant") {
    std::ofstream out(cache_file, std::ios::app);
    out << "{\"digest\": \"abc";  // no newline
    out.close();
    CompletionCache survived(cache_file);
    CHECK(survived.size() == 1);
    CHECK(survived.lookup(request.digest()) == "Answer: 7</s>");
  }
}

TEST_CASE("caching client: hits never touch the backend") {
  TempDir tmp;
  CompletionCache cache(tmp.path / "cache.jsonl");
  CountingBackend backend;
  CachingClient client(backend, cache);
  CompletionRequest request = request_for("q1");

  const std::string first = client.complete(request);
  CHECK(backend.calls == 1);
  CHECK(client.complete(request) == first);
  CHECK(backend.calls == 1);

  CompletionRequest hotter = request;
  hotter.decoding.temperature = 0.5;
  client.complete(hotter);  // distinct digest: miss
  CHECK(backend.calls == 2);

  SUBCASE("a warm cache serves a poisoned backend zero requests") {
    CompletionCache warm(tmp.path / "cache.jsonl");
    PoisonBackend poison;
    CachingClient offline(poison, warm);
    CHECK(offline.complete(request) == first);
    CHECK(offline.backend_calls() == 0);
  }
}

TEST_CASE("http backend: success, truncation and auth header") {
  setenv("PROMPTGRID_TEST_TOKEN", "sekrit", 1);
  std::string seen_auth;
  ScriptedServer server([&](const httplib::Request& req, httplib::Response& res, int) {
    seen_auth = req.get_header_value("Authorization");
    nlohmann::json body = nlohmann::json::parse(req.body);
    CHECK(body["model"] == "test-model");
    CHECK(body["max_tokens"] == 512);
    reply_text(res, " 42</s>junk after stop");
  });

  ModelEndpoint endpoint = server.endpoint();
  endpoint.auth_env = "PROMPTGRID_TEST_TOKEN";
  HttpBackend backend(endpoint);
  CHECK(backend.complete(request_for("q")) == " 42");
  CHECK(seen_auth == "Bearer sekrit");
  CHECK(backend.last_attempt_count() == 1);
}

TEST_CASE("http backend: two 429s then success takes three attempts") {
  ScriptedServer server([](const httplib::Request&, httplib::Response& res, int hit) {
    if (hit <= 2) {
      res.status = 429;
      return;
    }
    reply_text(res, "Answer: 9</s>");
  });
  HttpBackend backend(server.endpoint());
  backend.set_sleeper([](std::chrono::milliseconds) {});
  CHECK(backend.complete(request_for("q")) == "Answer: 9");
  CHECK(backend.last_attempt_count() == 3);
  CHECK(server.hits == 3);
}

TEST_CASE("http backend: persistent 500 exhausts the attempt budget") {
  ScriptedServer server([](const httplib::Request&, httplib::Response& res, int) {
    res.status = 500;
  });
  HttpBackend backend(server.endpoint());
  backend.set_sleeper([](std::chrono::milliseconds) {});
  CHECK_THROWS_AS(backend.complete(request_for("q")), TransportError);
  CHECK(server.hits == 4);  // max_attempts
}

TEST_CASE("http backend: auth failures are distinct and immediate") {
  ScriptedServer server([](const httplib::Request&, httplib::Response& res, int) {
    res.status = 401;
  });
  HttpBackend backend(server.endpoint());
  CHECK_THROWS_AS(backend.complete(request_for("q")), AuthError);
  CHECK(server.hits == 1);
}

TEST_CASE("http backend: malformed bodies are surfaced, not retried") {
  ScriptedServer server([](const httplib::Request&, httplib::Response& res, int) {
    res.set_content("{\"unexpected\": true}", "application/json");
  });
  HttpBackend backend(server.endpoint());
  CHECK_THROWS_AS(backend.complete(request_for("q")), MalformedResponseError);
  CHECK(server.hits == 1);
}

TEST_CASE("parallel_for honors the concurrency bound and propagates errors") {
  TempDir tmp;
  CompletionCache cache(tmp.path / "cache.jsonl");
  CountingBackend backend;
  CachingClient client(backend, cache);

  parallel_for(50, 4, [&](std::size_t i) {
    client.complete(request_for("prompt " + std::to_string(i)));
  });
  CHECK(backend.calls == 50);
  CHECK(backend.max_in_flight <= 4);
  CHECK(backend.max_in_flight >= 1);
  CHECK(cache.size() == 50);

  CHECK_THROWS_AS(parallel_for(8, 3,
                               [](std::size_t i) {
                                 if (i == 5) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
