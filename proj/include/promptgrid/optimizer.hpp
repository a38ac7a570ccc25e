#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "promptgrid/client.hpp"
#include "promptgrid/dataset.hpp"
#include "promptgrid/fraction.hpp"
#include "promptgrid/templates.hpp"

namespace promptgrid {

/// A proposed (system message, answer prefix) pair. The system message text
/// is the bare content, wrapped in <<SYS>>...<</SYS>> only at render time;
/// the empty string is the explicit empty baseline.
struct PromptCandidate {
  std::string system_message;
  std::optional<std::string> answer_prefix;
  std::string provenance;  // "seed" or "round-<k>"

  friend bool operator==(const PromptCandidate& a, const PromptCandidate& b) {
    return a.system_message == b.system_message && a.answer_prefix == b.answer_prefix;
  }
};

/// "System Message:" / "Answer Prefix:" block, the same record shape the
/// optimization ledger stores. parse_candidates(render_candidate(c))
/// round-trips any candidate whose text has no line equal to a section
/// header.
std::string render_candidate(const PromptCandidate& candidate);

/// Extracts every well-formed candidate block from a completion. Unparseable
/// text yields an empty vector.
std::vector<PromptCandidate> parse_candidates(std::string_view completion);

struct ScoredCandidate {
  PromptCandidate candidate;
  Fraction os_em;
  int round = 0;
};

/// Proposal source for new candidates. The production proposer asks the
/// model being optimized; tests script it.
class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual std::vector<PromptCandidate> propose(std::span<const ScoredCandidate> history, int k,
                                               int round) = 0;
};

/// Builds a meta-prompt from a scaffold (slots {k} and {history}), asks the
/// backend for k new candidates and parses them. An unparseable batch is
/// retried once with a corrective note appended, then surfaced as
/// MalformedResponseError.
class LlmProposer : public Proposer {
 public:
  LlmProposer(CachingClient& client, ModelEndpoint endpoint, std::string meta_scaffold);

  std::vector<PromptCandidate> propose(std::span<const ScoredCandidate> history, int k,
                                       int round) override;

 private:
  CachingClient& client_;
  ModelEndpoint endpoint_;
  std::string meta_scaffold_;
};

/// Scores one candidate over a question set with the standard pipeline
/// (render, complete, extract, match). Tests may substitute a synthetic
/// scorer.
class CandidateEvaluator {
 public:
  virtual ~CandidateEvaluator() = default;
  virtual Fraction score(const PromptCandidate& candidate, std::span<const QAItem> items) = 0;
};

class PipelineEvaluator : public CandidateEvaluator {
 public:
  PipelineEvaluator(CachingClient& client, ModelEndpoint endpoint, PromptTemplate tmpl,
                    int parallelism = 1);

  Fraction score(const PromptCandidate& candidate, std::span<const QAItem> items) override;

 private:
  CachingClient& client_;
  ModelEndpoint endpoint_;
  PromptTemplate template_;
  int parallelism_;
};

struct OptimizationReport {
  Fraction os_em;   // best candidate's EM on the optimization set
  Fraction es_em;   // same candidate, evaluation set (computed once, at the end)
  Fraction avg_em;  // (os + es) / 2
  Fraction delta;   // |os - es|
  PromptCandidate best;
  std::vector<ScoredCandidate> history;
};

struct OptimizeOptions {
  int budget = 16;   // max candidate evaluations on the optimization set
  int batch_k = 8;   // proposals requested per round
  std::filesystem::path ledger_path;  // empty: keep history in memory only
  bool resume = false;                // reload an existing ledger and continue
};

/// Seeds are evaluated first (round 0), then proposal rounds run until the
/// budget is spent or a round contributes nothing new. Candidates are
/// deduplicated by exact text. The best candidate is the OS-EM argmax with
/// ties broken by earliest evaluation; only that candidate is scored on the
/// evaluation set. Every evaluation is appended to the ledger as it
/// happens, so an interrupted run resumes to an identical report.
OptimizationReport optimize(CandidateEvaluator& evaluator, Proposer& proposer,
                            std::span<const QAItem> opt_set, std::span<const QAItem> eval_set,
                            std::span<const PromptCandidate> seeds,
                            const OptimizeOptions& options);

/// Loads ledger records, dropping a torn trailing line.
std::vector<ScoredCandidate> load_optimization_ledger(const std::filesystem::path& path);

/// One side of the grid-vs-optimizer comparison.
struct ComparisonRow {
  int questions = 0;
  Fraction os;
  Fraction es;

  Fraction avg() const { return (os + es) / Fraction(2, 1); }
  Fraction delta() const { return (os - es).abs(); }
};

enum class ComparisonFlag { kNone, kPositiveThinking, kOptimizer };

struct GridComparison {
  ComparisonRow positive_thinking;
  ComparisonRow optimizer;
  ComparisonFlag higher_avg = ComparisonFlag::kNone;  // bold marker
  ComparisonFlag lower_delta = ComparisonFlag::kNone; // underline marker
};

/// Flags the higher average EM and the lower OS/ES delta; exact ties flag
/// neither side. Throws when the rows were computed at different question
/// counts.
GridComparison compare_against_grid(const ComparisonRow& positive_thinking,
                                    const ComparisonRow& optimizer);

}  // namespace promptgrid
