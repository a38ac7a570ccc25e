#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace promptgrid {

struct DecodingParams {
  double temperature = 0.0;
  int max_new_tokens = 512;
  std::vector<std::string> stop_sequences = {"</s>", "\n---"};
};

struct ModelEndpoint {
  std::string base_url;    // e.g. http://localhost:8000/v1
  std::string model_name;
  DecodingParams decoding;
  std::string auth_env = "PROMPTGRID_API_TOKEN";  // bearer token source
  int max_attempts = 5;
  std::chrono::milliseconds backoff_base{250};
  std::chrono::milliseconds backoff_cap{4000};

  void validate() const;
};

struct CompletionRequest {
  std::string model;
  std::string prompt;
  DecodingParams decoding;

  /// Stable cache key: SHA-256 over a canonical serialization of
  /// (model, prompt, decoding). Completions are deliberately excluded so a
  /// record's digest can be recomputed from its request alone.
  std::string digest() const;
};

struct ClientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TransportError : ClientError {
  using ClientError::ClientError;
};
struct AuthError : ClientError {
  using ClientError::ClientError;
};
struct MalformedResponseError : ClientError {
  using ClientError::ClientError;
};
struct CacheCorruptionError : ClientError {
  using ClientError::ClientError;
};

/// Anything that can turn a request into a completion: the HTTP endpoint in
/// production, a scripted replay source in tests.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

/// Clips the text at the first occurrence of any stop sequence.
std::string truncate_at_stop(std::string text, const std::vector<std::string>& stops);

/// OpenAI-compatible completions client (POST {base_url}/completions with
/// model/prompt/temperature/max_tokens/stop). HTTP 429 and 5xx are retried
/// with capped exponential backoff up to `max_attempts`; 401/403 raise
/// AuthError immediately; an unparseable body raises MalformedResponseError.
class HttpBackend : public CompletionBackend {
 public:
  explicit HttpBackend(ModelEndpoint endpoint);

  std::string complete(const CompletionRequest& request) override;

  int last_attempt_count() const { return last_attempts_.load(); }

  /// Test hook: replaces the inter-attempt sleep.
  void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper);

 private:
  ModelEndpoint endpoint_;
  std::function<void(std::chrono::milliseconds)> sleeper_;
  std::atomic<int> last_attempts_{0};
};

/// Deterministic scripted backend: a digest -> completion map. Unknown
/// digests raise TransportError, which keeps accidental live traffic out of
/// replayed runs.
class ReplayBackend : public CompletionBackend {
 public:
  ReplayBackend() = default;
  static ReplayBackend load(const std::filesystem::path& file);
  void save(const std::filesystem::path& file) const;

  void add(const std::string& digest, std::string completion);
  std::string complete(const CompletionRequest& request) override;
  std::size_t size() const { return completions_.size(); }

 private:
  std::map<std::string, std::string> completions_;
};

struct CompletionRecord {
  std::string digest;
  std::string model;
  std::string prompt;
  DecodingParams decoding;
  std::string completion;
  double latency_ms = 0.0;
  std::string timestamp;  // ISO-8601 UTC
};

/// Append-only completion store, one JSON record per line. On open, every
/// line's digest is recomputed from its request fields; any mismatch or
/// unparseable line raises CacheCorruptionError naming the file, line and
/// digest rather than serving doubtful data. Writes are serialized and
/// flushed per record; reads may run concurrently.
class CompletionCache {
 public:
  explicit CompletionCache(std::filesystem::path file);

  std::optional<std::string> lookup(const std::string& digest) const;
  void insert(const CompletionRecord& record);
  std::size_t size() const;
  const std::filesystem::path& path() const { return file_; }

 private:
  std::filesystem::path file_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::string> by_digest_;
};

/// Cache-through completion: hits never touch the backend, misses delegate
/// and persist the record.
class CachingClient {
 public:
  CachingClient(CompletionBackend& backend, CompletionCache& cache)
      : backend_(backend), cache_(cache) {}

  std::string complete(const CompletionRequest& request);

  /// Number of requests that reached the backend (misses).
  std::size_t backend_calls() const { return backend_calls_.load(); }

 private:
  CompletionBackend& backend_;
  CompletionCache& cache_;
  std::atomic<std::size_t> backend_calls_{0};
};

/// Runs fn(0..n-1) on up to `bound` worker threads. The first exception is
/// rethrown after all workers finish.
void parallel_for(std::size_t n, int bound, const std::function<void(std::size_t)>& fn);

}  // namespace promptgrid
