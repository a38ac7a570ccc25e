#include "promptgrid/scoring.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace promptgrid {

Fraction em_for_variant(std::span<const EvalOutcome> outcomes) {
  if (outcomes.empty()) throw std::invalid_argument("em_for_variant: no outcomes");
  std::int64_t matched = 0;
  for (const EvalOutcome& o : outcomes) {
    if (!(o.variant == outcomes.front().variant))
      throw std::invalid_argument("em_for_variant: outcomes mix variants " +
                                  o.variant.id() + " and " + outcomes.front().variant.id());
    if (o.matched) ++matched;
  }
  return Fraction::from_counts(matched, static_cast<std::int64_t>(outcomes.size()));
}

GroupStats group_stats(std::span<const Fraction> variant_ems, int baseline_index) {
  const int n = static_cast<int>(variant_ems.size());
  if (n < 2) throw std::invalid_argument("group_stats: need >= 2 variants for a deviation");
  if (baseline_index < 0 || baseline_index >= n)
    throw std::invalid_argument("group_stats: baseline index out of range");

  Fraction sum;
  for (const Fraction& em : variant_ems) sum = sum + em;
  Fraction mean = sum / Fraction(n, 1);

  // Sum of squared deviations stays exact; only the final sqrt is floating.
  Fraction sq_sum;
  Fraction min = variant_ems[0], max = variant_ems[0];
  for (const Fraction& em : variant_ems) {
    Fraction d = em - mean;
    sq_sum = sq_sum + d * d;
    if (em < min) min = em;
    if (max < em) max = em;
  }
  double variance = (sq_sum / Fraction(n - 1, 1)).value();

  GroupStats stats;
  stats.baseline_em = variant_ems[baseline_index];
  stats.mean = mean;
  stats.stddev = std::sqrt(variance);
  stats.min = min;
  stats.max = max;
  stats.n_variants = n;
  return stats;
}

std::vector<RankedEntry> load_ranked_list(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("ranked list: cannot open " + file.string());

  std::vector<RankedEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == "EM - Prompt") continue;
    std::size_t sep = line.find(" - ");
    if (sep == std::string::npos)
      throw std::invalid_argument("ranked list: bad entry at " + file.string() + ":" +
                                  std::to_string(line_no));
    entries.push_back(RankedEntry{Fraction::parse_decimal(line.substr(0, sep)),
                                  line.substr(sep + 3)});
  }
  return entries;
}

GroupStats stats_from_ranked(std::span<const RankedEntry> entries) {
  std::vector<Fraction> ems;
  ems.reserve(entries.size());
  int baseline = -1;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ems.push_back(entries[i].em);
    if (entries[i].prompt_label == "None. None. None.") {
      if (baseline >= 0)
        throw std::invalid_argument("ranked list: duplicate baseline entry");
      baseline = static_cast<int>(i);
    }
  }
  if (baseline < 0) throw std::invalid_argument("ranked list: no baseline (None. None. None.) entry");
  return group_stats(ems, baseline);
}

}  // namespace promptgrid
