#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "promptgrid/client.hpp"
#include "promptgrid/report.hpp"
#include "promptgrid/scoring.hpp"

namespace promptgrid {

struct RunConfig {
  ModelEndpoint endpoint;
  std::filesystem::path dataset_path;
  std::filesystem::path snippet_config;  // empty: stock grid
  std::filesystem::path template_dir = "data/templates";
  std::filesystem::path cache_path = "promptgrid_cache.jsonl";
  std::filesystem::path output_dir = "out";
  std::filesystem::path replay_path;  // non-empty: replay backend instead of HTTP
  std::vector<int> eval_sizes = {10, 25, 50, 100};
  std::vector<bool> cot_modes = {false, true};
  int parallelism = 4;

  /// Fails fast on unreadable paths and nonsense sizes, before any network
  /// or cache activity.
  void validate() const;
};

/// Self-contained record of one grid run: re-rendering every report needs
/// nothing but this. Completion text lives in the cache; the ledger keeps
/// the digests. No wall-clock data, so identical runs serialize to
/// identical bytes.
struct OutcomeRecord {
  int question = 0;  // dataset index
  std::string digest;
  bool matched = false;
  std::string span;
  std::optional<std::string> value;
  std::string failure;  // "", "no-answer" or "non-numeric"
};

struct VariantRecord {
  std::string id;
  std::string label;
  std::vector<OutcomeRecord> outcomes;  // over the largest requested subset
};

struct ModeRecord {
  bool cot = false;
  std::vector<VariantRecord> variants;  // enumeration order
};

struct LedgerGroup {
  bool cot = false;
  int questions = 0;
  std::vector<Fraction> variant_ems;  // enumeration order; baseline is entry 0
  GroupStats stats;
};

struct RunLedger {
  std::string model;
  nlohmann::json config_snapshot;
  std::vector<ModeRecord> modes;
  std::vector<LedgerGroup> groups;
};

/// Scores every variant over each requested subset size, sharing
/// completions through the cache.
RunLedger run_grid(const RunConfig& config, CompletionBackend& backend, CompletionCache& cache);

void save_ledger(const RunLedger& ledger, const std::filesystem::path& path);
RunLedger load_ledger(const std::filesystem::path& path);

/// Writes stats.md / stats.csv and one ranked list per group into out_dir.
void render_grid_reports(const RunLedger& ledger, const std::filesystem::path& out_dir);

// --- command entry points (exit-code style) ---

int cmd_grid(const RunConfig& config);
int cmd_verify_stats(const std::filesystem::path& fixtures_dir);
int cmd_report(const std::filesystem::path& ledger_path, const std::filesystem::path& out_dir,
               const std::filesystem::path& publisher_csv);

struct OptimizeCmdConfig {
  RunConfig run;
  int questions = 100;  // optimization/evaluation subset size
  int budget = 16;
  int batch_k = 8;
  bool cot = true;
  std::filesystem::path grid_ledger;  // source of the "positive thinking" row
  bool resume = false;
};

int cmd_optimize(const OptimizeCmdConfig& config);

}  // namespace promptgrid
