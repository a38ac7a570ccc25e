#include "promptgrid/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>

#include "nlohmann/json.hpp"
#include "promptgrid/extraction.hpp"
#include "promptgrid/snippets.hpp"

namespace promptgrid {
namespace {

constexpr std::string_view kSystemHeader = "System Message:";
constexpr std::string_view kPrefixHeader = "Answer Prefix:";

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.emplace_back(text.substr(start));
      break;
    }
    lines.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::string join_trimmed(const std::vector<std::string>& lines, std::size_t from, std::size_t to) {
  while (from < to && lines[from].empty()) ++from;
  while (to > from && lines[to - 1].empty()) --to;
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (i > from) out += '\n';
    out += lines[i];
  }
  return out;
}

std::string utc_now_iso8601() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void append_ledger_record(const std::filesystem::path& path, const ScoredCandidate& scored) {
  if (path.empty()) return;
  nlohmann::json j{{"round", scored.round},
                   {"provenance", scored.candidate.provenance},
                   {"system_message", scored.candidate.system_message},
                   {"os_matched", scored.os_em.num()},
                   {"os_total", scored.os_em.den()},
                   {"ts", utc_now_iso8601()}};
  j["answer_prefix"] = scored.candidate.answer_prefix
                           ? nlohmann::json(*scored.candidate.answer_prefix)
                           : nlohmann::json(nullptr);
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw ClientError("optimizer ledger: cannot append to " + path.string());
  out << j.dump() << "\n";
  out.flush();
}

using CandidateKey = std::pair<std::string, std::optional<std::string>>;

CandidateKey key_of(const PromptCandidate& c) { return {c.system_message, c.answer_prefix}; }

}  // namespace

std::string render_candidate(const PromptCandidate& candidate) {
  std::string out = std::string(kSystemHeader) + "\n" + candidate.system_message;
  if (candidate.answer_prefix)
    out += "\n" + std::string(kPrefixHeader) + "\n" + *candidate.answer_prefix;
  return out;
}

std::vector<PromptCandidate> parse_candidates(std::string_view completion) {
  std::vector<std::string> lines = split_lines(completion);
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (lines[i] == kSystemHeader) starts.push_back(i);

  std::vector<PromptCandidate> out;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    std::size_t begin = starts[s] + 1;
    std::size_t end = s + 1 < starts.size() ? starts[s + 1] : lines.size();
    std::size_t prefix_at = end;
    for (std::size_t i = begin; i < end; ++i) {
      if (lines[i] == kPrefixHeader) {
        prefix_at = i;
        break;
      }
    }
    PromptCandidate candidate;
    candidate.system_message = join_trimmed(lines, begin, prefix_at);
    if (prefix_at < end) candidate.answer_prefix = join_trimmed(lines, prefix_at + 1, end);
    if (candidate.system_message.empty() && !candidate.answer_prefix) continue;
    out.push_back(std::move(candidate));
  }
  return out;
}

LlmProposer::LlmProposer(CachingClient& client, ModelEndpoint endpoint, std::string meta_scaffold)
    : client_(client), endpoint_(std::move(endpoint)), meta_scaffold_(std::move(meta_scaffold)) {
  if (meta_scaffold_.find("{k}") == std::string::npos ||
      meta_scaffold_.find("{history}") == std::string::npos)
    throw std::invalid_argument("meta scaffold: needs {k} and {history} slots");
}

std::vector<PromptCandidate> LlmProposer::propose(std::span<const ScoredCandidate> history, int k,
                                                  int /*round*/) {
  std::string rendered_history;
  for (const ScoredCandidate& scored : history) {
    rendered_history += render_candidate(scored.candidate);
    rendered_history += "\nScore: " + scored.os_em.to_decimal(4) + "\n\n";
  }
  if (rendered_history.empty()) rendered_history = "(none yet)\n";

  std::string prompt = meta_scaffold_;
  auto fill = [&prompt](std::string_view slot, const std::string& value) {
    std::size_t at = prompt.find(slot);
    prompt = prompt.substr(0, at) + value + prompt.substr(at + slot.size());
  };
  fill("{k}", std::to_string(k));
  fill("{history}", rendered_history);

  // Meta requests use a generous token limit and no template stops; the
  // proposal format has no terminator of its own.
  DecodingParams decoding = endpoint_.decoding;
  decoding.stop_sequences.clear();

  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string request_prompt = prompt;
    if (attempt == 1)
      request_prompt +=
          "\n\nYour previous reply could not be parsed. Reply with candidates in exactly the "
          "requested format and nothing else.";
    std::string completion =
        client_.complete(CompletionRequest{endpoint_.model_name, request_prompt, decoding});
    std::vector<PromptCandidate> parsed = parse_candidates(completion);
    if (parsed.empty()) continue;

    // Drop proposals that repeat history or each other; the batch may come
    // back smaller than k.
    std::vector<PromptCandidate> fresh;
    auto known = [&](const PromptCandidate& c) {
      for (const ScoredCandidate& s : history)
        if (s.candidate == c) return true;
      for (const PromptCandidate& f : fresh)
        if (f == c) return true;
      return false;
    };
    for (PromptCandidate& candidate : parsed) {
      if (static_cast<int>(fresh.size()) == k) break;
      if (!known(candidate)) fresh.push_back(std::move(candidate));
    }
    return fresh;
  }
  throw MalformedResponseError("proposal batch unparseable after retry");
}

PipelineEvaluator::PipelineEvaluator(CachingClient& client, ModelEndpoint endpoint,
                                     PromptTemplate tmpl, int parallelism)
    : client_(client),
      endpoint_(std::move(endpoint)),
      template_(std::move(tmpl)),
      parallelism_(parallelism) {}

Fraction PipelineEvaluator::score(const PromptCandidate& candidate,
                                  std::span<const QAItem> items) {
  if (items.empty()) throw std::invalid_argument("evaluator: empty question set");
  SystemMessage system = wrap_system_text(candidate.system_message);
  std::optional<std::string_view> prefix;
  if (candidate.answer_prefix) prefix = *candidate.answer_prefix;

  std::atomic<std::int64_t> matched{0};
  parallel_for(items.size(), parallelism_, [&](std::size_t i) {
    RenderedPrompt prompt = render_prompt(system, template_, items[i].question, prefix,
                                          "candidate", items[i].index);
    std::string completion =
        client_.complete(CompletionRequest{endpoint_.model_name, prompt.text, endpoint_.decoding});
    ExtractionResult extracted = extract_answer(completion, template_.cot);
    if (extracted.ok() && exact_match(*extracted.value, items[i].gold)) matched.fetch_add(1);
  });
  return Fraction::from_counts(matched.load(), static_cast<std::int64_t>(items.size()));
}

std::vector<ScoredCandidate> load_optimization_ledger(const std::filesystem::path& path) {
  std::vector<ScoredCandidate> history;
  std::ifstream in(path, std::ios::binary);
  if (!in) return history;

  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    const bool unterminated = end == std::string::npos;
    std::string line =
        content.substr(start, unterminated ? std::string::npos : end - start);
    start = unterminated ? content.size() : end + 1;
    if (line.empty()) continue;

    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("system_message") || !j.contains("os_matched") ||
        !j.contains("os_total") || !j.contains("round")) {
      if (unterminated) break;  // torn tail from an interrupted run
      throw ClientError("optimizer ledger: unparseable record in " + path.string());
    }
    ScoredCandidate scored;
    scored.candidate.system_message = j["system_message"].get<std::string>();
    if (j.contains("answer_prefix") && !j["answer_prefix"].is_null())
      scored.candidate.answer_prefix = j["answer_prefix"].get<std::string>();
    scored.candidate.provenance = j.value("provenance", "");
    scored.round = j["round"].get<int>();
    scored.os_em = Fraction::from_counts(j["os_matched"].get<std::int64_t>(),
                                         j["os_total"].get<std::int64_t>());
    history.push_back(std::move(scored));
  }
  return history;
}

OptimizationReport optimize(CandidateEvaluator& evaluator, Proposer& proposer,
                            std::span<const QAItem> opt_set, std::span<const QAItem> eval_set,
                            std::span<const PromptCandidate> seeds,
                            const OptimizeOptions& options) {
  if (options.budget < 1) throw std::invalid_argument("optimize: budget must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("optimize: need at least one seed");
  if (opt_set.empty() || eval_set.empty())
    throw std::invalid_argument("optimize: question sets must be non-empty");
  {
    std::set<int> opt_ids;
    for (const QAItem& q : opt_set) opt_ids.insert(q.index);
    for (const QAItem& q : eval_set)
      if (opt_ids.contains(q.index))
        throw std::invalid_argument("optimize: optimization and evaluation sets overlap at item " +
                                    std::to_string(q.index));
  }

  std::vector<ScoredCandidate> history;
  std::set<CandidateKey> evaluated;
  if (options.resume && !options.ledger_path.empty()) {
    history = load_optimization_ledger(options.ledger_path);
    if (static_cast<int>(history.size()) > options.budget)
      throw std::invalid_argument("optimize: ledger already exceeds budget");
    for (const ScoredCandidate& s : history) evaluated.insert(key_of(s.candidate));
  } else if (!options.ledger_path.empty()) {
    std::ofstream truncate(options.ledger_path, std::ios::trunc);  // fresh run, fresh ledger
  }

  int evals = static_cast<int>(history.size());
  // Proposals for round r depend only on rounds < r, which is what makes a
  // resumed run regenerate identical batches.
  auto history_before = [&history](int round) {
    std::vector<ScoredCandidate> before;
    for (const ScoredCandidate& s : history)
      if (s.round < round) before.push_back(s);
    return before;
  };

  for (int round = 0; evals < options.budget; ++round) {
    std::vector<PromptCandidate> batch;
    if (round == 0) {
      batch.assign(seeds.begin(), seeds.end());
      for (PromptCandidate& c : batch) c.provenance = "seed";
    } else {
      std::vector<ScoredCandidate> context = history_before(round);
      batch = proposer.propose(context, options.batch_k, round);
      for (PromptCandidate& c : batch) c.provenance = "round-" + std::to_string(round);
    }

    std::set<CandidateKey> seen_in_batch;
    for (PromptCandidate& candidate : batch) {
      if (evals >= options.budget) break;
      CandidateKey key = key_of(candidate);
      if (!seen_in_batch.insert(key).second) continue;  // duplicate within the batch
      if (evaluated.contains(key)) continue;            // scored earlier (or pre-truncation)

      ScoredCandidate scored{candidate, evaluator.score(candidate, opt_set), round};
      append_ledger_record(options.ledger_path, scored);
      history.push_back(std::move(scored));
      evaluated.insert(key);
      ++evals;
    }
    // A round is productive if anything in history belongs to it, whether
    // evaluated just now or reloaded from a resumed ledger; a proposer that
    // only repeats known candidates ends the run instead of spinning.
    int in_round = 0;
    for (const ScoredCandidate& s : history)
      if (s.round == round) ++in_round;
    if (round > 0 && in_round == 0 && evals < options.budget) break;
  }

  if (history.empty()) throw std::invalid_argument("optimize: nothing was evaluated");

  std::size_t best_at = 0;
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[best_at].os_em < history[i].os_em) best_at = i;

  OptimizationReport report;
  report.best = history[best_at].candidate;
  report.os_em = history[best_at].os_em;
  report.es_em = evaluator.score(report.best, eval_set);
  report.avg_em = (report.os_em + report.es_em) / Fraction(2, 1);
  report.delta = (report.os_em - report.es_em).abs();
  report.history = std::move(history);
  return report;
}

GridComparison compare_against_grid(const ComparisonRow& positive_thinking,
                                    const ComparisonRow& optimizer) {
  if (positive_thinking.questions != optimizer.questions)
    throw std::invalid_argument("comparison: rows use different question counts (" +
                                std::to_string(positive_thinking.questions) + " vs " +
                                std::to_string(optimizer.questions) + ")");
  GridComparison cmp;
  cmp.positive_thinking = positive_thinking;
  cmp.optimizer = optimizer;

  Fraction pt_avg = positive_thinking.avg(), opt_avg = optimizer.avg();
  if (pt_avg < opt_avg)
    cmp.higher_avg = ComparisonFlag::kOptimizer;
  else if (opt_avg < pt_avg)
    cmp.higher_avg = ComparisonFlag::kPositiveThinking;

  Fraction pt_delta = positive_thinking.delta(), opt_delta = optimizer.delta();
  if (opt_delta < pt_delta)
    cmp.lower_delta = ComparisonFlag::kOptimizer;
  else if (pt_delta < opt_delta)
    cmp.lower_delta = ComparisonFlag::kPositiveThinking;
  return cmp;
}

}  // namespace promptgrid
