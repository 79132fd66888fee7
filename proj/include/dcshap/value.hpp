#ifndef DCSHAP_VALUE_HPP
#define DCSHAP_VALUE_HPP

#include <compare>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace dcshap {

// An exact decimal number. Keeps the lexeme it was parsed from for output,
// and compares on the normalized digits so that "1.50" == "1.5" and
// "-0" == "0". No exponent notation.
class Decimal {
 public:
  // Accepts [+-]?(digits[.digits*] | .digits). Returns nullopt otherwise.
  static std::optional<Decimal> parse(std::string_view text) {
    std::size_t pos = 0;
    bool negative = false;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
      negative = text[pos] == '-';
      ++pos;
    }
    std::size_t int_begin = pos;
    while (pos < text.size() && is_digit(text[pos])) ++pos;
    std::string_view int_part = text.substr(int_begin, pos - int_begin);
    std::string_view frac_part;
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      std::size_t frac_begin = pos;
      while (pos < text.size() && is_digit(text[pos])) ++pos;
      frac_part = text.substr(frac_begin, pos - frac_begin);
    }
    if (pos != text.size() || (int_part.empty() && frac_part.empty())) {
      return std::nullopt;
    }

    Decimal d;
    d.lexeme_ = std::string(text);
    std::size_t first = int_part.find_first_not_of('0');
    d.int_digits_ =
        first == std::string_view::npos ? "" : std::string(int_part.substr(first));
    std::size_t last = frac_part.find_last_not_of('0');
    d.frac_digits_ = last == std::string_view::npos
                         ? ""
                         : std::string(frac_part.substr(0, last + 1));
    d.negative_ = negative && !d.is_zero();
    return d;
  }

  const std::string& text() const { return lexeme_; }
  bool negative() const { return negative_; }
  bool is_zero() const { return int_digits_.empty() && frac_digits_.empty(); }
  bool is_integer() const { return frac_digits_.empty(); }

  // Canonical rendering: no redundant zeros, "-" only for nonzero negatives.
  std::string normalized() const {
    std::string out = negative_ ? "-" : "";
    out += int_digits_.empty() ? "0" : int_digits_;
    if (!frac_digits_.empty()) out += "." + frac_digits_;
    return out;
  }

  friend bool operator==(const Decimal& a, const Decimal& b) {
    return a.negative_ == b.negative_ && a.int_digits_ == b.int_digits_ &&
           a.frac_digits_ == b.frac_digits_;
  }

  friend std::strong_ordering operator<=>(const Decimal& a, const Decimal& b) {
    if (a.negative_ != b.negative_) {
      return a.negative_ ? std::strong_ordering::less
                         : std::strong_ordering::greater;
    }
    std::strong_ordering magnitude = compare_magnitude(a, b);
    if (a.negative_) return 0 <=> magnitude;
    return magnitude;
  }

 private:
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }

  static std::strong_ordering compare_magnitude(const Decimal& a,
                                                const Decimal& b) {
    if (a.int_digits_.size() != b.int_digits_.size()) {
      return a.int_digits_.size() <=> b.int_digits_.size();
    }
    if (auto c = a.int_digits_.compare(b.int_digits_); c != 0) return c <=> 0;
    // Fraction digits compare lexicographically once trailing zeros are gone.
    if (auto c = a.frac_digits_.compare(b.frac_digits_); c != 0) return c <=> 0;
    return std::strong_ordering::equal;
  }

  bool negative_ = false;
  std::string int_digits_;   // no leading zeros
  std::string frac_digits_;  // no trailing zeros
  std::string lexeme_;
};

// A table cell value: null, exact number, or text.
//
// operator== and operator<=> are structural (null equals null) and define the
// canonical order null < number < text, numbers by value, text by bytes. Use
// them for containers, AST equality and tie-breaking. Predicate semantics,
// where null compares false against everything, live in dc.hpp.
class Value {
 public:
  enum class Kind { kNull = 0, kNumber = 1, kText = 2 };

  Value() = default;

  static Value null() { return Value(); }
  static Value text(std::string s) {
    Value v;
    v.data_ = std::move(s);
    return v;
  }
  static Value number(Decimal d) {
    Value v;
    v.data_ = std::move(d);
    return v;
  }
  // Throws std::invalid_argument if `lexeme` is not a decimal.
  static Value number(std::string_view lexeme) {
    auto d = Decimal::parse(lexeme);
    if (!d) throw std::invalid_argument("not a decimal: " + std::string(lexeme));
    return number(std::move(*d));
  }
  // Unquoted CSV field rule: empty -> null, decimal -> number, else text.
  static Value from_field(std::string_view field) {
    if (field.empty()) return null();
    if (auto d = Decimal::parse(field)) return number(std::move(*d));
    return text(std::string(field));
  }

  Kind kind() const { return static_cast<Kind>(data_.index()); }
  bool is_null() const { return kind() == Kind::kNull; }
  bool is_number() const { return kind() == Kind::kNumber; }
  bool is_text() const { return kind() == Kind::kText; }

  const Decimal& as_number() const { return std::get<Decimal>(data_); }
  const std::string& as_text() const { return std::get<std::string>(data_); }

  // Human rendering: "null" for null, lexeme for numbers, raw text.
  std::string to_string() const {
    switch (kind()) {
      case Kind::kNull:
        return "null";
      case Kind::kNumber:
        return as_number().text();
      case Kind::kText:
        return as_text();
    }
    return {};
  }

  friend bool operator==(const Value& a, const Value& b) {
    return a.data_ == b.data_;
  }
  friend std::strong_ordering operator<=>(const Value& a, const Value& b) {
    if (a.data_.index() != b.data_.index()) {
      return a.data_.index() <=> b.data_.index();
    }
    switch (a.kind()) {
      case Kind::kNull:
        return std::strong_ordering::equal;
      case Kind::kNumber:
        return a.as_number() <=> b.as_number();
      case Kind::kText:
        return a.as_text().compare(b.as_text()) <=> 0;
    }
    return std::strong_ordering::equal;
  }

  friend std::ostream& operator<<(std::ostream& os, const Value& v) {
    if (v.is_text()) return os << '"' << v.as_text() << '"';
    return os << v.to_string();
  }

 private:
  std::variant<std::monostate, Decimal, std::string> data_;
};

}  // namespace dcshap

#endif  // DCSHAP_VALUE_HPP
