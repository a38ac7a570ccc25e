#include "promptgrid/extraction.hpp"

#include <algorithm>
#include <cctype>

namespace promptgrid {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Longest numeric-looking token starting at `i`, or npos length 0 if none.
// A token is sign? digits (with optional comma groups) and an optional
// fractional part; "$" may prefix it. Used only for the label-less fallback.
std::size_t numeric_token_end(std::string_view text, std::size_t i) {
  std::size_t j = i;
  if (j < text.size() && text[j] == '$') ++j;
  if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
  std::size_t digits_start = j;
  while (j < text.size() && (is_digit(text[j]) || text[j] == ',')) ++j;
  if (j == digits_start && !(j < text.size() && text[j] == '.')) return i;
  if (j < text.size() && text[j] == '.') {
    std::size_t k = j + 1;
    while (k < text.size() && is_digit(text[k])) ++k;
    if (k > j + 1) j = k;
    // a bare trailing '.' stays out of the token; normalize would strip it anyway
  }
  bool any_digit = false;
  for (std::size_t k = i; k < j; ++k) any_digit |= is_digit(text[k]);
  return any_digit ? j : i;
}

}  // namespace

CanonicalNumber::CanonicalNumber(bool negative, std::string integer_digits,
                                 std::string fraction_digits)
    : negative_(negative),
      integer_digits_(std::move(integer_digits)),
      fraction_digits_(std::move(fraction_digits)) {
  // strip leading integer zeros and trailing fractional zeros
  std::size_t nz = integer_digits_.find_first_not_of('0');
  integer_digits_ = nz == std::string::npos ? "0" : integer_digits_.substr(nz);
  while (!fraction_digits_.empty() && fraction_digits_.back() == '0') fraction_digits_.pop_back();
  if (integer_digits_ == "0" && fraction_digits_.empty()) negative_ = false;
}

std::string CanonicalNumber::str() const {
  std::string out = negative_ ? "-" : "";
  out += integer_digits_;
  if (!fraction_digits_.empty()) {
    out += '.';
    out += fraction_digits_;
  }
  return out;
}

std::optional<CanonicalNumber> normalize(std::string_view span) {
  std::string_view s = trim(span);
  if (!s.empty() && s.back() == '%') s.remove_suffix(1);
  if (!s.empty() && s.back() == '.') s.remove_suffix(1);
  if (!s.empty() && s.front() == '$') s.remove_prefix(1);
  s = trim(s);
  if (s.empty()) return std::nullopt;

  std::size_t i = 0;
  bool negative = false;
  if (s[i] == '+' || s[i] == '-') negative = s[i++] == '-';

  std::string integer_digits, fraction_digits;
  bool any_digit = false;
  for (; i < s.size() && (is_digit(s[i]) || s[i] == ','); ++i) {
    if (s[i] == ',') continue;  // thousands separator
    integer_digits += s[i];
    any_digit = true;
  }
  if (i < s.size() && s[i] == '.') {
    for (++i; i < s.size() && is_digit(s[i]); ++i) {
      fraction_digits += s[i];
      any_digit = true;
    }
  }
  if (!any_digit || i != s.size()) return std::nullopt;
  return CanonicalNumber(negative, std::move(integer_digits), std::move(fraction_digits));
}

std::optional<std::string> extract_candidate(std::string_view completion, bool /*cot*/) {
  static constexpr std::string_view kLabel = "Answer:";
  std::size_t pos = completion.rfind(kLabel);
  if (pos != std::string_view::npos) {
    std::string_view span = completion.substr(pos + kLabel.size());
    if (std::size_t eos = span.find("</s>"); eos != std::string_view::npos)
      span = span.substr(0, eos);
    if (std::size_t nl = span.find('\n'); nl != std::string_view::npos)
      span = span.substr(0, nl);
    return std::string(trim(span));
  }

  // No label: take the last numeric token anywhere in the completion.
  std::optional<std::string> last;
  for (std::size_t i = 0; i < completion.size();) {
    std::size_t end = numeric_token_end(completion, i);
    if (end > i) {
      last = std::string(completion.substr(i, end - i));
      i = end;
    } else {
      ++i;
    }
  }
  return last;
}

ExtractionResult extract_answer(std::string_view completion, bool cot) {
  ExtractionResult result;
  std::optional<std::string> span = extract_candidate(completion, cot);
  if (!span) {
    result.failure = ExtractionFailure::kNoAnswerLabelOrNumber;
    return result;
  }
  result.candidate_span = *span;
  result.value = normalize(*span);
  if (!result.value) result.failure = ExtractionFailure::kNonNumeric;
  return result;
}

}  // namespace promptgrid
