#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace promptgrid {

/// Exact rational used for EM scores and their aggregates. Scores are kept
/// as counts (matched/total) and only rounded when a report is rendered, so
/// fixture comparisons never drift through binary floating point.
class Fraction {
 public:
  Fraction() = default;
  Fraction(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
    if (den_ == 0) throw std::invalid_argument("Fraction: zero denominator");
    reduce();
  }

  static Fraction from_counts(std::int64_t matched, std::int64_t total) {
    if (total <= 0) throw std::invalid_argument("Fraction: total must be > 0");
    return Fraction(matched, total);
  }

  /// Parses a plain decimal like "0.08", "-1.5" or "12". Anything else throws.
  static Fraction parse_decimal(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("Fraction: empty decimal");
    std::size_t i = 0;
    bool neg = false;
    if (text[i] == '+' || text[i] == '-') neg = text[i++] == '-';
    std::int64_t num = 0, den = 1;
    bool digits = false, frac = false;
    for (; i < text.size(); ++i) {
      char c = text[i];
      if (c == '.') {
        if (frac) throw std::invalid_argument("Fraction: bad decimal " + text);
        frac = true;
        continue;
      }
      if (c < '0' || c > '9')
        throw std::invalid_argument("Fraction: bad decimal " + text);
      num = num * 10 + (c - '0');
      if (frac) den *= 10;
      digits = true;
    }
    if (!digits) throw std::invalid_argument("Fraction: bad decimal " + text);
    return Fraction(neg ? -num : num, den);
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  Fraction operator+(const Fraction& o) const {
    return make(wide(num_) * o.den_ + wide(o.num_) * den_, wide(den_) * o.den_);
  }
  Fraction operator-(const Fraction& o) const {
    return make(wide(num_) * o.den_ - wide(o.num_) * den_, wide(den_) * o.den_);
  }
  Fraction operator*(const Fraction& o) const {
    return make(wide(num_) * o.num_, wide(den_) * o.den_);
  }
  Fraction operator/(const Fraction& o) const {
    if (o.num_ == 0) throw std::invalid_argument("Fraction: division by zero");
    return make(wide(num_) * o.den_, wide(den_) * o.num_);
  }
  Fraction abs() const { return Fraction(num_ < 0 ? -num_ : num_, den_); }

  friend bool operator==(const Fraction& a, const Fraction& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend auto operator<=>(const Fraction& a, const Fraction& b) {
    return a.num_ * b.den_ <=> b.num_ * a.den_;
  }

  /// Rounds to `digits` decimal places, half away from zero, returning the
  /// scaled integer (e.g. 22.8/60 with digits=4 gives 3800).
  std::int64_t scaled_round(int digits) const {
    std::int64_t scale = 1;
    for (int i = 0; i < digits; ++i) scale *= 10;
    __int128 n = static_cast<__int128>(num_) * scale;
    __int128 q = n / den_, r = n % den_;
    if (r < 0) r = -r;
    if (2 * r >= den_) q += (num_ >= 0) ? 1 : -1;
    return static_cast<std::int64_t>(q);
  }

  /// Fixed-point rendering with `digits` decimals ("0.0853" for 16/188...).
  std::string to_decimal(int digits) const {
    std::int64_t scaled = scaled_round(digits);
    bool neg = scaled < 0;
    if (neg) scaled = -scaled;
    std::int64_t scale = 1;
    for (int i = 0; i < digits; ++i) scale *= 10;
    std::string out = std::to_string(scaled / scale);
    if (digits > 0) {
      std::string tail = std::to_string(scaled % scale);
      out += "." + std::string(digits - tail.size(), '0') + tail;
    }
    return neg ? "-" + out : out;
  }

  /// Shortest decimal that is exact when the value terminates within six
  /// places (all grid EMs do), otherwise six rounded places. Matches the
  /// ranked-list rendering, where 1/10 prints as "0.1" and 2/25 as "0.08".
  std::string to_decimal_trimmed() const {
    std::string out = to_decimal(6);
    if (out.find('.') != std::string::npos) {
      while (out.back() == '0') out.pop_back();
      if (out.back() == '.') out.pop_back();
    }
    return out;
  }

 private:
  using wide = __int128;

  // Reduces in 128-bit then narrows, so chained sums of squared deviations
  // cannot silently wrap.
  static Fraction make(wide num, wide den) {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    wide a = num < 0 ? -num : num, b = den;
    while (b != 0) {
      wide t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      num /= a;
      den /= a;
    }
    constexpr wide kMax = INT64_MAX;
    if (num > kMax || num < -kMax || den > kMax)
      throw std::overflow_error("Fraction: value out of range");
    Fraction f;
    f.num_ = static_cast<std::int64_t>(num);
    f.den_ = static_cast<std::int64_t>(den);
    return f;
  }

  void reduce() {
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace promptgrid
