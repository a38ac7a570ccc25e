#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "promptgrid/scoring.hpp"

using namespace promptgrid;

namespace {

const std::filesystem::path kData = PROMPTGRID_DATA_DIR;

std::vector<EvalOutcome> outcomes_for(const PromptVariant& variant, int total, int matched) {
  std::vector<EvalOutcome> outcomes(total);
  for (int i = 0; i < total; ++i) {
    outcomes[i].variant = variant;
    outcomes[i].question_index = i;
    outcomes[i].matched = i < matched;
  }
  return outcomes;
}

// EM multiset as (value, count) pairs, matching the bundled ranked lists.
std::vector<Fraction> distribution(std::initializer_list<std::pair<const char*, int>> spec) {
  std::vector<Fraction> ems;
  for (const auto& [value, count] : spec)
    for (int i = 0; i < count; ++i) ems.push_back(Fraction::parse_decimal(value));
  return ems;
}

}  // namespace

TEST_CASE("fraction parses, rounds and renders exactly") {
  CHECK(Fraction::parse_decimal("0.08") == Fraction(2, 25));
  CHECK(Fraction::parse_decimal("0.1") == Fraction(1, 10));
  CHECK(Fraction(19, 50).to_decimal(4) == "0.3800");
  CHECK(Fraction(1, 10).to_decimal_trimmed() == "0.1");
  CHECK(Fraction(2, 25).to_decimal_trimmed() == "0.08");
  CHECK(Fraction(1, 2).to_decimal_trimmed() == "0.5");
  CHECK(Fraction(0, 5).to_decimal_trimmed() == "0");
  CHECK(Fraction(605, 1000).to_decimal(3) == "0.605");
  CHECK(Fraction(1, 3).scaled_round(4) == 3333);
  CHECK(Fraction(2, 3).scaled_round(4) == 6667);
  CHECK(Fraction(1, 2).scaled_round(0) == 1);  // half away from zero
  CHECK(Fraction(-1, 2).scaled_round(0) == -1);
  CHECK_THROWS_AS(Fraction::parse_decimal("abc"), std::invalid_argument);
  CHECK_THROWS_AS(Fraction(1, 0), std::invalid_argument);
}

TEST_CASE("per-variant EM is matched over total") {
  const PromptVariant v{1, 2, 3, true};
  CHECK(em_for_variant(outcomes_for(v, 10, 6)) == Fraction(3, 5));
  CHECK(em_for_variant(outcomes_for(v, 50, 34)) == Fraction::parse_decimal("0.68"));
  CHECK(em_for_variant(outcomes_for(v, 8, 0)) == Fraction(0, 1));

  CHECK_THROWS_AS(em_for_variant({}), std::invalid_argument);

  auto mixed = outcomes_for(v, 4, 2);
  mixed[3].variant = PromptVariant{0, 0, 0, true};
  CHECK_THROWS_AS(em_for_variant(mixed), std::invalid_argument);
}

TEST_CASE("group statistics reproduce the two reconstructed rows") {
  SUBCASE("10-question CoT group") {
    auto ems = distribution({{"0.2", 2}, {"0.3", 14}, {"0.4", 38}, {"0.5", 6}});
    REQUIRE(ems.size() == 60);
    GroupStats stats = group_stats(ems, 0);
    CHECK(stats.mean == Fraction(19, 50));
    CHECK(stats.mean.to_decimal(4) == "0.3800");
    CHECK(std::llround(stats.stddev * 10000) == 659);  // n-1 divisor; n would give 653
    CHECK(stats.min == Fraction(1, 5));
    CHECK(stats.max == Fraction(1, 2));
    CHECK(stats.baseline_em == Fraction(1, 5));
    CHECK(stats.n_variants == 60);
  }

  SUBCASE("25-question no-CoT group") {
    auto ems = distribution({{"0.08", 52}, {"0.12", 8}});
    GroupStats stats = group_stats(ems, 0);
    CHECK(stats.mean.scaled_round(4) == 853);
    CHECK(std::llround(stats.stddev * 10000) == 137);
  }

  SUBCASE("all-equal distribution") {
    auto ems = distribution({{"0.1", 60}});
    GroupStats stats = group_stats(ems, 59);
    CHECK(stats.stddev == 0.0);
    CHECK(stats.mean == stats.min);
    CHECK(stats.mean == stats.max);
    CHECK(stats.baseline_em == Fraction(1, 10));
  }
}

TEST_CASE("group statistics preconditions") {
  auto ems = distribution({{"0.1", 1}});
  CHECK_THROWS_AS(group_stats(ems, 0), std::invalid_argument);
  auto two = distribution({{"0.1", 2}});
  CHECK_THROWS_AS(group_stats(two, 2), std::invalid_argument);
  CHECK_THROWS_AS(group_stats(two, -1), std::invalid_argument);
}

TEST_CASE("statistics are permutation-invariant and scale linearly") {
  auto ems = distribution({{"0.2", 2}, {"0.3", 14}, {"0.4", 38}, {"0.5", 6}});
  GroupStats original = group_stats(ems, 0);

  std::mt19937 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    auto shuffled = ems;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    // keep the baseline value pinned to index of an equal value
    auto at = std::find(shuffled.begin(), shuffled.end(), original.baseline_em);
    GroupStats stats = group_stats(shuffled, static_cast<int>(at - shuffled.begin()));
    CHECK(stats.mean == original.mean);
    CHECK(stats.stddev == doctest::Approx(original.stddev).epsilon(1e-12));
    CHECK(stats.min == original.min);
    CHECK(stats.max == original.max);
  }

  std::vector<Fraction> halved;
  for (const Fraction& em : ems) halved.push_back(em * Fraction(1, 2));
  GroupStats half = group_stats(halved, 0);
  CHECK(half.mean == original.mean * Fraction(1, 2));
  CHECK(half.min == original.min * Fraction(1, 2));
  CHECK(half.max == original.max * Fraction(1, 2));
  CHECK(half.stddev == doctest::Approx(original.stddev / 2).epsilon(1e-12));
}

TEST_CASE("ranked lists parse and locate the baseline") {
  const auto dir = std::filesystem::temp_directory_path() / "promptgrid_scoring_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "list.txt");
    out << "EM - Prompt\n\n0.1 - None. None. None.\n0.2 - A. None. None.\n";
  }
  auto entries = load_ranked_list(dir / "list.txt");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].em == Fraction(1, 10));
  CHECK(entries[0].prompt_label == "None. None. None.");

  GroupStats stats = stats_from_ranked(entries);
  CHECK(stats.baseline_em == Fraction(1, 10));
  CHECK(stats.max == Fraction(1, 5));

  {
    std::ofstream out(dir / "no_baseline.txt");
    out << "EM - Prompt\n\n0.1 - A. B. C.\n0.2 - D. E. F.\n";
  }
  CHECK_THROWS_AS(stats_from_ranked(load_ranked_list(dir / "no_baseline.txt")),
                  std::invalid_argument);

  {
    std::ofstream out(dir / "garbled.txt");
    out << "EM - Prompt\n\nnot an entry\n";
  }
  CHECK_THROWS_AS(load_ranked_list(dir / "garbled.txt"), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

TEST_CASE("bundled fixture recomputes to the published row") {
  auto entries = load_ranked_list(kData / "fixtures" / "ranked" / "mistral-7b_cot=yes_q=10.txt");
  REQUIRE(entries.size() == 60);
  GroupStats stats = stats_from_ranked(entries);
  CHECK(stats.baseline_em == Fraction(1, 5));
  CHECK(stats.mean.to_decimal(4) == "0.3800");
  CHECK(std::llround(stats.stddev * 10000) == 659);
  CHECK(stats.min.to_decimal(2) == "0.20");
  CHECK(stats.max.to_decimal(2) == "0.50");
}
