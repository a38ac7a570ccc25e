#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "promptgrid/optimizer.hpp"
#include "promptgrid/scoring.hpp"

namespace promptgrid {

/// One row of the statistics table.
struct StatsRow {
  std::string model;
  int questions = 0;
  bool cot = false;
  GroupStats stats;
};

std::string render_stats_markdown(std::span<const StatsRow> rows);
std::string render_stats_csv(std::span<const StatsRow> rows);

/// Ascending "EM - Prompt" list; ties keep the given (enumeration) order.
std::string render_ranked_list(std::span<const RankedEntry> entries);

/// Verdict for one transcribed group checked against its expected stats row.
struct VerifyOutcome {
  std::string name;
  bool pass = false;
  std::string detail;  // empty on pass, mismatch description otherwise
};

/// Recomputes baseline/mean/std/min/max from every ranked list named by
/// `expected_csv` (columns model,questions,cot,baseline,mean,std,min,max;
/// list files live in `fixtures_dir`/ranked) and compares each statistic
/// at 4-decimal rounding. A list whose entry count differs from
/// `expected_variants` fails with a count error.
std::vector<VerifyOutcome> verify_stats(const std::filesystem::path& fixtures_dir,
                                        int expected_variants = 60);

/// Two-row grid-vs-optimizer table with bold/underline flags rendered as
/// markdown ("**" and "_") and a CSV twin.
std::string render_comparison_markdown(const GridComparison& comparison);
std::string render_comparison_csv(const GridComparison& comparison);

/// Publisher-score comparison: static reported scores joined with our best
/// average EM; purely a rendering of configured numbers.
struct PublisherRow {
  std::string model;
  Fraction reported;
  Fraction ours;
};
std::string render_publisher_markdown(std::span<const PublisherRow> rows);

}  // namespace promptgrid
