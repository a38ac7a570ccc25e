#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace promptgrid {

/// A number reduced to a formatting-insensitive canonical form: sign plus
/// exact decimal digits with trailing fractional zeros removed. "30000",
/// "30,000" and "30000.00" all canonicalize to the same value; "-0" equals
/// "0". Equality is value equality.
class CanonicalNumber {
 public:
  CanonicalNumber() = default;
  CanonicalNumber(bool negative, std::string integer_digits, std::string fraction_digits);

  bool negative() const { return negative_; }
  const std::string& integer_digits() const { return integer_digits_; }
  const std::string& fraction_digits() const { return fraction_digits_; }

  /// Canonical rendering, e.g. "-0.5", "230", "30000".
  std::string str() const;

  friend bool operator==(const CanonicalNumber& a, const CanonicalNumber& b) {
    return a.negative_ == b.negative_ && a.integer_digits_ == b.integer_digits_ &&
           a.fraction_digits_ == b.fraction_digits_;
  }

 private:
  bool negative_ = false;
  std::string integer_digits_ = "0";
  std::string fraction_digits_;
};

/// Canonicalizes a numeric string: strips surrounding whitespace, one
/// leading '$', thousands-separator commas and a trailing '.' or '%', then
/// parses an optional sign, integer part and fractional part. Percent signs
/// are dropped without rescaling, so "80%" matches a gold of 80. Scientific
/// notation and anything else non-numeric yields nullopt.
std::optional<CanonicalNumber> normalize(std::string_view span);

enum class ExtractionFailure {
  kNoAnswerLabelOrNumber,
  kNonNumeric,
};

struct ExtractionResult {
  std::string candidate_span;
  std::optional<CanonicalNumber> value;
  std::optional<ExtractionFailure> failure;

  bool ok() const { return value.has_value(); }
};

/// Pulls the answer span out of a completion: the text after the last
/// "Answer:" label, clipped at "</s>" and at the end of its line. Without a
/// label, falls back to the last numeric token in the completion. Returns
/// nullopt when neither exists.
std::optional<std::string> extract_candidate(std::string_view completion, bool cot);

/// extract_candidate + normalize, with the failure cause recorded.
ExtractionResult extract_answer(std::string_view completion, bool cot);

/// Exact Match: value equality of two canonical numbers, no partial credit.
inline bool exact_match(const CanonicalNumber& pred, const CanonicalNumber& gold) {
  return pred == gold;
}

}  // namespace promptgrid
