#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "promptgrid/runner.hpp"

namespace {

void add_run_options(CLI::App* cmd, promptgrid::RunConfig& config) {
  cmd->add_option("--dataset", config.dataset_path, "GSM8K-format jsonl file")->required();
  cmd->add_option("--base-url", config.endpoint.base_url,
                  "OpenAI-compatible endpoint, e.g. http://host:8000/v1");
  cmd->add_option("--model", config.endpoint.model_name, "model name sent with each request")
      ->required();
  cmd->add_option("--auth-env", config.endpoint.auth_env,
                  "environment variable holding the bearer token");
  cmd->add_option("--temperature", config.endpoint.decoding.temperature, "sampling temperature");
  cmd->add_option("--max-tokens", config.endpoint.decoding.max_new_tokens,
                  "max new tokens per completion");
  cmd->add_option("--stop", config.endpoint.decoding.stop_sequences, "stop sequences");
  cmd->add_option("--max-attempts", config.endpoint.max_attempts, "retry budget per request");
  cmd->add_option("--snippets", config.snippet_config, "snippet grid config (JSON)");
  cmd->add_option("--templates", config.template_dir, "directory with prompt scaffolds");
  cmd->add_option("--cache", config.cache_path, "completion cache file");
  cmd->add_option("--out", config.output_dir, "output directory");
  cmd->add_option("--replay", config.replay_path,
                  "replay completions from this file instead of any network call");
  cmd->add_option("--parallelism", config.parallelism, "max in-flight requests");
}

std::vector<bool> parse_cot_modes(const std::string& mode) {
  if (mode == "no") return {false};
  if (mode == "yes") return {true};
  if (mode == "both") return {false, true};
  throw CLI::ValidationError("--cot must be one of no|yes|both");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"system-message grid evaluation and prompt optimization for exact-match math QA"};
  app.require_subcommand(1);

  promptgrid::RunConfig grid_config;
  std::string grid_cot = "both";
  CLI::App* grid = app.add_subcommand("grid", "score every snippet combination on eval subsets");
  add_run_options(grid, grid_config);
  grid->add_option("--sizes", grid_config.eval_sizes, "question subset sizes");
  grid->add_option("--cot", grid_cot, "chain-of-thought modes: no|yes|both");

  std::string fixtures_dir = "data/fixtures";
  CLI::App* verify = app.add_subcommand(
      "verify-stats", "recompute group statistics from bundled ranked lists and check them");
  verify->add_option("--fixtures", fixtures_dir, "fixtures directory");

  promptgrid::OptimizeCmdConfig opt_config;
  CLI::App* optimize =
      app.add_subcommand("optimize", "propose and select prompt candidates, then report "
                                     "optimization-set vs evaluation-set generalization");
  add_run_options(optimize, opt_config.run);
  optimize->add_option("--questions", opt_config.questions, "subset size for both sets");
  optimize->add_option("--budget", opt_config.budget, "max candidate evaluations");
  optimize->add_option("--batch", opt_config.batch_k, "proposals requested per round");
  optimize->add_flag("!--no-cot", opt_config.cot, "disable chain-of-thought prompting");
  optimize->add_option("--grid-ledger", opt_config.grid_ledger,
                       "grid ledger supplying the \"positive thinking\" comparison row");
  optimize->add_flag("--resume", opt_config.resume, "continue from an existing optimization ledger");

  std::filesystem::path report_ledger, report_out = "out", publisher_csv;
  CLI::App* report = app.add_subcommand("report", "re-render reports from a saved ledger");
  report->add_option("--ledger", report_ledger, "ledger.json from a grid run")->required();
  report->add_option("--out", report_out, "output directory");
  report->add_option("--publisher-scores", publisher_csv,
                     "CSV (model,reported,ours) for the publisher-score table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (grid->parsed()) {
      grid_config.cot_modes = parse_cot_modes(grid_cot);
      return promptgrid::cmd_grid(grid_config);
    }
    if (verify->parsed()) return promptgrid::cmd_verify_stats(fixtures_dir);
    if (optimize->parsed()) return promptgrid::cmd_optimize(opt_config);
    if (report->parsed()) return promptgrid::cmd_report(report_ledger, report_out, publisher_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
