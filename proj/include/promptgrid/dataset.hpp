#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "promptgrid/extraction.hpp"

namespace promptgrid {

struct QAItem {
  int index = 0;  // 0-based position in the source file
  std::string question;
  std::string gold_raw;  // full rationale text from the answer field
  CanonicalNumber gold;
};

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reads line-delimited records with "question" and "answer" fields (the
/// GSM8K test-file layout). The gold value is the text after the final
/// "####" marker, canonicalized. Malformed lines, a missing marker or a
/// non-numeric gold raise DatasetError naming the line number.
std::vector<QAItem> load_dataset(const std::filesystem::path& path);

/// Evaluation / in-context / optimization splits: eval is the first
/// `eval_n` items, the in-context block is the last 4, and the optimization
/// set is the `opt_n` items immediately before the in-context block. The
/// three index sets are pairwise disjoint by construction.
struct SplitPlan {
  std::vector<QAItem> eval;
  std::vector<QAItem> icl;  // always 4 items
  std::vector<QAItem> opt;
};

SplitPlan make_splits(std::span<const QAItem> items, int eval_n, int opt_n);

}  // namespace promptgrid
