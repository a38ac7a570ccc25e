#include "promptgrid/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace promptgrid {
namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::int64_t scaled4(double v) { return std::llround(v * 10000.0); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

std::string render_stats_markdown(std::span<const StatsRow> rows) {
  std::string out =
      "| Model | Questions | Chain of Thought | EM Baseline | EM Mean | EM Std Dev | EM Min | EM "
      "Max |\n|---|---|---|---|---|---|---|---|\n";
  for (const StatsRow& row : rows) {
    out += "| " + row.model + " | " + std::to_string(row.questions) + " | " +
           (row.cot ? "Yes" : "No") + " | " + row.stats.baseline_em.to_decimal(2) + " | " +
           row.stats.mean.to_decimal(4) + " | " + fixed4(row.stats.stddev) + " | " +
           row.stats.min.to_decimal(2) + " | " + row.stats.max.to_decimal(2) + " |\n";
  }
  return out;
}

std::string render_stats_csv(std::span<const StatsRow> rows) {
  std::string out = "model,questions,cot,baseline,mean,std,min,max\n";
  for (const StatsRow& row : rows) {
    out += row.model + "," + std::to_string(row.questions) + "," + (row.cot ? "yes" : "no") + "," +
           row.stats.baseline_em.to_decimal(2) + "," + row.stats.mean.to_decimal(4) + "," +
           fixed4(row.stats.stddev) + "," + row.stats.min.to_decimal(2) + "," +
           row.stats.max.to_decimal(2) + "\n";
  }
  return out;
}

std::string render_ranked_list(std::span<const RankedEntry> entries) {
  std::vector<const RankedEntry*> order;
  order.reserve(entries.size());
  for (const RankedEntry& e : entries) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(),
                   [](const RankedEntry* a, const RankedEntry* b) { return a->em < b->em; });

  std::string out = "EM - Prompt\n\n";
  for (const RankedEntry* e : order)
    out += e->em.to_decimal_trimmed() + " - " + e->prompt_label + "\n";
  return out;
}

std::vector<VerifyOutcome> verify_stats(const std::filesystem::path& fixtures_dir,
                                        int expected_variants) {
  const std::filesystem::path expected_csv = fixtures_dir / "expected_stats.csv";
  std::ifstream in(expected_csv);
  if (!in) throw std::invalid_argument("verify: cannot open " + expected_csv.string());

  std::vector<VerifyOutcome> outcomes;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 8)
      throw std::invalid_argument("verify: bad row in " + expected_csv.string() + ": " + line);
    const std::string &model = f[0], &questions = f[1], &cot = f[2];

    VerifyOutcome verdict;
    verdict.name = model + " cot=" + cot + " q=" + questions;
    const std::filesystem::path list_file =
        fixtures_dir / "ranked" / (model + "_cot=" + cot + "_q=" + questions + ".txt");
    try {
      std::vector<RankedEntry> entries = load_ranked_list(list_file);
      if (static_cast<int>(entries.size()) != expected_variants)
        throw std::invalid_argument("entry count " + std::to_string(entries.size()) +
                                    " != " + std::to_string(expected_variants));
      GroupStats stats = stats_from_ranked(entries);

      auto expect = [](const std::string& s) { return Fraction::parse_decimal(s).scaled_round(4); };
      struct Check {
        const char* what;
        std::int64_t got, want;
      };
      const Check checks[] = {
          {"baseline", stats.baseline_em.scaled_round(4), expect(f[3])},
          {"mean", stats.mean.scaled_round(4), expect(f[4])},
          {"std", scaled4(stats.stddev), expect(f[5])},
          {"min", stats.min.scaled_round(4), expect(f[6])},
          {"max", stats.max.scaled_round(4), expect(f[7])},
      };
      std::string detail;
      for (const Check& c : checks) {
        if (c.got != c.want) {
          if (!detail.empty()) detail += "; ";
          detail += std::string(c.what) + " recomputed " + fixed4(c.got / 10000.0) +
                    " expected " + fixed4(c.want / 10000.0);
        }
      }
      verdict.pass = detail.empty();
      verdict.detail = detail;
    } catch (const std::exception& e) {
      verdict.pass = false;
      verdict.detail = e.what();
    }
    outcomes.push_back(std::move(verdict));
  }
  return outcomes;
}

namespace {

std::string comparison_cells(const ComparisonRow& row, bool bold_avg, bool underline_delta) {
  std::string avg = row.avg().to_decimal(3);
  std::string delta = row.delta().to_decimal(2);
  if (bold_avg) avg = "**" + avg + "**";
  if (underline_delta) delta = "_" + delta + "_";
  return std::to_string(row.questions) + " | " + row.os.to_decimal(2) + " | " +
         row.es.to_decimal(2) + " | " + avg + " | " + delta + " |";
}

}  // namespace

std::string render_comparison_markdown(const GridComparison& cmp) {
  std::string out =
      "| Prompt source | Questions | OS EM | ES EM | Avg EM | EM Delta |\n"
      "|---|---|---|---|---|---|\n";
  out += "| \"positive thinking\" | " +
         comparison_cells(cmp.positive_thinking,
                          cmp.higher_avg == ComparisonFlag::kPositiveThinking,
                          cmp.lower_delta == ComparisonFlag::kPositiveThinking) +
         "\n";
  out += "| automatic optimizer | " +
         comparison_cells(cmp.optimizer, cmp.higher_avg == ComparisonFlag::kOptimizer,
                          cmp.lower_delta == ComparisonFlag::kOptimizer) +
         "\n";
  return out;
}

std::string render_comparison_csv(const GridComparison& cmp) {
  auto flag = [](ComparisonFlag f) {
    switch (f) {
      case ComparisonFlag::kPositiveThinking: return "positive_thinking";
      case ComparisonFlag::kOptimizer: return "optimizer";
      default: return "none";
    }
  };
  std::string out = "source,questions,os_em,es_em,avg_em,em_delta,higher_avg,lower_delta\n";
  auto row = [&](const char* name, const ComparisonRow& r) {
    out += std::string(name) + "," + std::to_string(r.questions) + "," + r.os.to_decimal(2) + "," +
           r.es.to_decimal(2) + "," + r.avg().to_decimal(3) + "," + r.delta().to_decimal(2) + "," +
           flag(cmp.higher_avg) + "," + flag(cmp.lower_delta) + "\n";
  };
  row("positive_thinking", cmp.positive_thinking);
  row("optimizer", cmp.optimizer);
  return out;
}

std::string render_publisher_markdown(std::span<const PublisherRow> rows) {
  std::string out = "| Model | Reported EM | Our EM | Delta |\n|---|---|---|---|\n";
  for (const PublisherRow& row : rows) {
    Fraction delta = row.ours - row.reported;
    std::string sign = delta.num() >= 0 ? "+" : "";
    out += "| " + row.model + " | " + row.reported.to_decimal(2) + " | " + row.ours.to_decimal(2) +
           " | " + sign + delta.to_decimal(2) + " |\n";
  }
  return out;
}

}  // namespace promptgrid
