#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "promptgrid/extraction.hpp"
#include "promptgrid/fraction.hpp"
#include "promptgrid/snippets.hpp"

namespace promptgrid {

/// One scored question for one variant. A failed extraction is simply an
/// unmatched outcome.
struct EvalOutcome {
  PromptVariant variant;
  int question_index = -1;
  bool matched = false;
  ExtractionResult extracted;
  std::string completion_digest;  // cache key of the completion that produced this
};

/// matched-count / total over outcomes that must all share one variant.
Fraction em_for_variant(std::span<const EvalOutcome> outcomes);

/// Per-group statistics over the per-variant EMs of one
/// (model, CoT, question-count) group. The mean includes the baseline
/// variant; the standard deviation is the sample deviation (n-1 divisor).
struct GroupStats {
  Fraction baseline_em;
  Fraction mean;
  double stddev = 0.0;
  Fraction min;
  Fraction max;
  int n_variants = 0;
};

GroupStats group_stats(std::span<const Fraction> variant_ems, int baseline_index);

/// One line of a ranked "EM - Prompt" list.
struct RankedEntry {
  Fraction em;
  std::string prompt_label;
};

/// Parses a ranked-list file: an "EM - Prompt" header, blank lines ignored,
/// then one "<em> - <prompt>" entry per line.
std::vector<RankedEntry> load_ranked_list(const std::filesystem::path& file);

/// Stats over a ranked list; the baseline is the entry labeled
/// "None. None. None.". Throws when the baseline is missing or duplicated.
GroupStats stats_from_ranked(std::span<const RankedEntry> entries);

}  // namespace promptgrid
