#include "promptgrid/client.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "nlohmann/json.hpp"
#include "promptgrid/digest.hpp"

namespace promptgrid {
namespace {

nlohmann::json decoding_to_json(const DecodingParams& d) {
  return nlohmann::json{{"max_new_tokens", d.max_new_tokens},
                        {"stop", d.stop_sequences},
                        {"temperature", d.temperature}};
}

DecodingParams decoding_from_json(const nlohmann::json& j) {
  DecodingParams d;
  d.max_new_tokens = j.at("max_new_tokens").get<int>();
  d.stop_sequences = j.at("stop").get<std::vector<std::string>>();
  d.temperature = j.at("temperature").get<double>();
  return d;
}

std::string utc_now_iso8601() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// "http://host:8000/v1" -> ("http://host:8000", "/v1")
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  std::size_t scheme = base_url.find("://");
  std::size_t path = base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path), prefix};
}

}  // namespace

void ModelEndpoint::validate() const {
  if (base_url.empty()) throw std::invalid_argument("endpoint: base_url is empty");
  if (model_name.empty()) throw std::invalid_argument("endpoint: model_name is empty");
  if (decoding.temperature < 0) throw std::invalid_argument("endpoint: temperature < 0");
  if (decoding.max_new_tokens <= 0) throw std::invalid_argument("endpoint: max_new_tokens <= 0");
  if (max_attempts < 1) throw std::invalid_argument("endpoint: max_attempts < 1");
}

std::string CompletionRequest::digest() const {
  nlohmann::json j{{"model", model}, {"prompt", prompt}, {"params", decoding_to_json(decoding)}};
  return sha256_hex(j.dump());
}

std::string truncate_at_stop(std::string text, const std::vector<std::string>& stops) {
  std::size_t cut = std::string::npos;
  for (const std::string& stop : stops) {
    if (stop.empty()) continue;
    std::size_t at = text.find(stop);
    if (at < cut) cut = at;
  }
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

HttpBackend::HttpBackend(ModelEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  endpoint_.validate();
  sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void HttpBackend::set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) {
  sleeper_ = std::move(sleeper);
}

std::string HttpBackend::complete(const CompletionRequest& request) {
  auto [host, prefix] = split_base_url(endpoint_.base_url);
  httplib::Client client(host);
  client.set_read_timeout(300, 0);
  client.set_connection_timeout(10, 0);

  httplib::Headers headers;
  if (!endpoint_.auth_env.empty()) {
    if (const char* token = std::getenv(endpoint_.auth_env.c_str()); token && *token)
      headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  nlohmann::json body{{"model", request.model},
                      {"prompt", request.prompt},
                      {"temperature", request.decoding.temperature},
                      {"max_tokens", request.decoding.max_new_tokens},
                      {"stop", request.decoding.stop_sequences}};
  const std::string payload = body.dump();
  const std::string path = prefix + "/completions";

  std::string last_failure;
  for (int attempt = 1; attempt <= endpoint_.max_attempts; ++attempt) {
    last_attempts_ = attempt;
    if (attempt > 1) {
      auto delay = endpoint_.backoff_base * (1 << (attempt - 2));
      sleeper_(std::min(delay, std::chrono::duration_cast<std::chrono::milliseconds>(
                                   endpoint_.backoff_cap)));
    }

    httplib::Result res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_failure = "connection failed (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw AuthError("authentication failed (HTTP " + std::to_string(res->status) + ") for " +
                      endpoint_.base_url);
    if (res->status == 429 || res->status >= 500) {
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw TransportError("HTTP " + std::to_string(res->status) + " from " + path + ": " +
                           res->body.substr(0, 200));

    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty() || !parsed["choices"][0].contains("text") ||
        !parsed["choices"][0]["text"].is_string())
      throw MalformedResponseError("completions response has no choices[0].text: " +
                                   res->body.substr(0, 200));
    return truncate_at_stop(parsed["choices"][0]["text"].get<std::string>(),
                            request.decoding.stop_sequences);
  }
  throw TransportError("request failed after " + std::to_string(endpoint_.max_attempts) +
                       " attempts; last: " + last_failure);
}

ReplayBackend ReplayBackend::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw TransportError("replay: cannot open " + file.string());
  ReplayBackend backend;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("digest") || !j.contains("completion"))
      throw TransportError("replay: bad record at " + file.string() + ":" +
                           std::to_string(line_no));
    backend.completions_[j["digest"].get<std::string>()] = j["completion"].get<std::string>();
  }
  return backend;
}

void ReplayBackend::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw TransportError("replay: cannot write " + file.string());
  for (const auto& [digest, completion] : completions_) {
    nlohmann::json j{{"digest", digest}, {"completion", completion}};
    out << j.dump() << "\n";
  }
}

void ReplayBackend::add(const std::string& digest, std::string completion) {
  completions_[digest] = std::move(completion);
}

std::string ReplayBackend::complete(const CompletionRequest& request) {
  auto it = completions_.find(request.digest());
  if (it == completions_.end())
    throw TransportError("replay: no scripted completion for digest " + request.digest());
  return it->second;
}

CompletionCache::CompletionCache(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(file_, std::ios::binary);
  if (!in) return;  // fresh cache

  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const bool ends_with_newline = !content.empty() && content.back() == '\n';

  std::size_t start = 0;
  int line_no = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    const bool last_and_unterminated = end == std::string::npos;
    std::string line = content.substr(start, last_and_unterminated ? std::string::npos
                                                                   : end - start);
    start = last_and_unterminated ? content.size() : end + 1;
    ++line_no;
    if (line.empty()) continue;

    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      // A torn final line without a newline is a crash remnant, not damage.
      if (last_and_unterminated && !ends_with_newline) break;
      throw CacheCorruptionError("cache: unparseable record at " + file_.string() + ":" +
                                 std::to_string(line_no));
    }
    CompletionRecord record;
    try {
      record.digest = j.at("digest").get<std::string>();
      record.model = j.at("model").get<std::string>();
      record.prompt = j.at("prompt").get<std::string>();
      record.decoding = decoding_from_json(j.at("params"));
      record.completion = j.at("completion").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw CacheCorruptionError("cache: incomplete record at " + file_.string() + ":" +
                                 std::to_string(line_no) + " (" + e.what() + ")");
    }
    std::string expected =
        CompletionRequest{record.model, record.prompt, record.decoding}.digest();
    if (expected != record.digest)
      throw CacheCorruptionError("cache: digest mismatch at " + file_.string() + ":" +
                                 std::to_string(line_no) + " (stored " + record.digest +
                                 ", recomputed " + expected + ")");
    by_digest_[record.digest] = record.completion;
  }
}

std::optional<std::string> CompletionCache::lookup(const std::string& digest) const {
  std::shared_lock lock(mutex_);
  auto it = by_digest_.find(digest);
  if (it == by_digest_.end()) return std::nullopt;
  return it->second;
}

void CompletionCache::insert(const CompletionRecord& record) {
  std::unique_lock lock(mutex_);
  if (by_digest_.contains(record.digest)) return;  // concurrent miss on one digest

  nlohmann::json j{{"digest", record.digest},
                   {"model", record.model},
                   {"prompt", record.prompt},
                   {"params", decoding_to_json(record.decoding)},
                   {"completion", record.completion},
                   {"latency_ms", record.latency_ms},
                   {"ts", record.timestamp}};
  std::ofstream out(file_, std::ios::app | std::ios::binary);
  if (!out) throw ClientError("cache: cannot append to " + file_.string());
  out << j.dump() << "\n";
  out.flush();
  if (!out) throw ClientError("cache: write failed for " + file_.string());
  by_digest_[record.digest] = record.completion;
}

std::size_t CompletionCache::size() const {
  std::shared_lock lock(mutex_);
  return by_digest_.size();
}

std::string CachingClient::complete(const CompletionRequest& request) {
  const std::string digest = request.digest();
  if (std::optional<std::string> hit = cache_.lookup(digest)) return *hit;

  backend_calls_.fetch_add(1);
  auto started = std::chrono::steady_clock::now();
  std::string completion = backend_.complete(request);
  auto elapsed = std::chrono::duration<double, std::milli>(
      std::chrono::steady_clock::now() - started);

  cache_.insert(CompletionRecord{digest, request.model, request.prompt, request.decoding,
                                 completion, elapsed.count(), utc_now_iso8601()});
  return completion;
}

void parallel_for(std::size_t n, int bound, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(std::max(bound, 1), n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace promptgrid
