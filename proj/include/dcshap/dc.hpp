#ifndef DCSHAP_DC_HPP
#define DCSHAP_DC_HPP

// Denial constraints: AST, text grammar, binding to a schema, predicate
// evaluation and violation detection.
//
//   dc    := label ":" "!(" pred { "&" pred } ")"
//   pred  := term op term
//   term  := ("t1" | "t2") "." attr | string-literal | number
//   op    := "=" | "!=" | "<" | "<=" | ">" | ">="
//
// One constraint per line in files, '#' starts a comment.

#include <cstddef>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dcshap/errors.hpp"
#include "dcshap/table.hpp"
#include "dcshap/value.hpp"

namespace dcshap {

enum class CompareOp { kEq, kNeq, kLt, kLeq, kGt, kGeq };

inline std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::kEq: return "=";
    case CompareOp::kNeq: return "!=";
    case CompareOp::kLt: return "<";
    case CompareOp::kLeq: return "<=";
    case CompareOp::kGt: return ">";
    case CompareOp::kGeq: return ">=";
  }
  return "?";
}

inline bool is_order_op(CompareOp op) {
  return op != CompareOp::kEq && op != CompareOp::kNeq;
}

// t1.attr or t2.attr.
struct TupleAttr {
  int tuple = 1;
  std::string attr;
  friend bool operator==(const TupleAttr&, const TupleAttr&) = default;
};

using Term = std::variant<TupleAttr, Value>;

struct Predicate {
  Term left;
  CompareOp op = CompareOp::kEq;
  Term right;
  friend bool operator==(const Predicate&, const Predicate&) = default;
};

// Reads as: for all t1, t2. not (p_1 and ... and p_k).
struct DenialConstraint {
  std::string id;
  std::vector<Predicate> predicates;
  friend bool operator==(const DenialConstraint&, const DenialConstraint&) = default;
};

struct Violation {
  std::string dc_id;
  std::size_t i = 0;
  std::size_t j = 0;
  friend bool operator==(const Violation&, const Violation&) = default;
};

// Predicate semantics: any comparison involving null is false; numbers never
// equal text; order operators across kinds throw TypeError.
inline bool compare_values(const Value& a, CompareOp op, const Value& b) {
  if (a.is_null() || b.is_null()) return false;
  switch (op) {
    case CompareOp::kEq: return a == b;
    case CompareOp::kNeq: return !(a == b);
    default: break;
  }
  if (a.kind() != b.kind()) {
    throw TypeError("order comparison between " + a.to_string() + " and " +
                    b.to_string() + " of different kinds");
  }
  auto c = a <=> b;
  switch (op) {
    case CompareOp::kLt: return c < 0;
    case CompareOp::kLeq: return c <= 0;
    case CompareOp::kGt: return c > 0;
    case CompareOp::kGeq: return c >= 0;
    default: return false;
  }
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline void print_term(std::string& out, const Term& term) {
  if (const auto* ta = std::get_if<TupleAttr>(&term)) {
    out += "t" + std::to_string(ta->tuple) + "." + ta->attr;
    return;
  }
  const Value& v = std::get<Value>(term);
  if (v.is_number()) {
    out += v.as_number().text();
    return;
  }
  out += '"';
  for (char c : v.as_text()) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
}

}  // namespace detail

inline std::string print_dc(const DenialConstraint& dc) {
  std::string out = dc.id + ": !(";
  for (std::size_t i = 0; i < dc.predicates.size(); ++i) {
    if (i) out += " & ";
    const auto& p = dc.predicates[i];
    detail::print_term(out, p.left);
    out += ' ';
    out += to_string(p.op);
    out += ' ';
    detail::print_term(out, p.right);
  }
  out += ')';
  return out;
}

inline std::ostream& operator<<(std::ostream& os, const DenialConstraint& dc) {
  return os << print_dc(dc);
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class DcParser {
 public:
  DcParser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  DenialConstraint parse() {
    DenialConstraint dc;
    skip_ws();
    dc.id = word("constraint label");
    skip_ws();
    expect(':');
    skip_ws();
    expect('!');
    skip_ws();
    expect('(');
    dc.predicates.push_back(predicate());
    skip_ws();
    while (peek() == '&') {
      ++pos_;
      dc.predicates.push_back(predicate());
      skip_ws();
    }
    expect(')');
    skip_ws();
    if (peek() == '#') pos_ = text_.size();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return dc;
  }

 private:
  Predicate predicate() {
    skip_ws();
    std::size_t start = pos_;
    Predicate p;
    p.left = term();
    skip_ws();
    p.op = op();
    skip_ws();
    p.right = term();
    if (!std::holds_alternative<TupleAttr>(p.left) &&
        !std::holds_alternative<TupleAttr>(p.right)) {
      fail_at(start, "predicate compares two constants");
    }
    return p;
  }

  Term term() {
    char c = peek();
    if (c == '"') return Value::text(string_literal());
    if (c == '+' || c == '-' || c == '.' || is_digit(c)) return number();
    if (c == 't' && pos_ + 1 < text_.size() &&
        (text_[pos_ + 1] == '1' || text_[pos_ + 1] == '2')) {
      std::size_t start = pos_;
      int tuple = text_[pos_ + 1] - '0';
      pos_ += 2;
      skip_ws();
      if (peek() != '.') fail_at(start, "expected t1.<attr> or t2.<attr>");
      ++pos_;
      skip_ws();
      return TupleAttr{tuple, word("attribute name")};
    }
    fail("expected a term (t1.<attr>, t2.<attr>, string or number)");
  }

  CompareOp op() {
    std::size_t start = pos_;
    char c = peek();
    char n = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
    if (c == '=') {
      ++pos_;
      return CompareOp::kEq;
    }
    if (c == '!' && n == '=') {
      pos_ += 2;
      return CompareOp::kNeq;
    }
    if (c == '<' || c == '>') {
      bool eq = n == '=';
      pos_ += eq ? 2 : 1;
      if (c == '<') return eq ? CompareOp::kLeq : CompareOp::kLt;
      return eq ? CompareOp::kGeq : CompareOp::kGt;
    }
    fail_at(start, "unknown operator");
  }

  std::string string_literal() {
    std::size_t start = pos_;
    ++pos_;
    std::string out;
    while (pos_ < text_.size()) {
      char c = text_[pos_++];
      if (c == '"') return out;
      if (c == '\\') {
        if (pos_ >= text_.size()) break;
        out += text_[pos_++];
        continue;
      }
      out += c;
    }
    fail_at(start, "unterminated string literal");
  }

  Value number() {
    std::size_t start = pos_;
    if (peek() == '+' || peek() == '-') ++pos_;
    while (is_digit(peek()) || peek() == '.') ++pos_;
    auto d = Decimal::parse(text_.substr(start, pos_ - start));
    if (!d) fail_at(start, "malformed number");
    return Value::number(std::move(*d));
  }

  std::string word(const char* what) {
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_word_char(text_[pos_])) ++pos_;
    if (pos_ == start) fail(std::string("expected ") + what);
    return std::string(text_.substr(start, pos_ - start));
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_word_char(char c) {
    return is_digit(c) || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }

  [[noreturn]] void fail(const std::string& message) const { fail_at(pos_, message); }
  [[noreturn]] void fail_at(std::size_t pos, const std::string& message) const {
    throw ParseError(line_, pos + 1, message);
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Parses a single constraint. `line` is only used in error positions.
inline DenialConstraint parse_dc(std::string_view text, std::size_t line = 1) {
  return detail::DcParser(text, line).parse();
}

// Parses a constraint file: one constraint per line, blank lines and
// '#' comment lines skipped. Labels must be unique.
inline std::vector<DenialConstraint> parse_constraints(std::string_view text) {
  std::vector<DenialConstraint> out;
  std::set<std::string, std::less<>> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first != std::string_view::npos && line[first] != '#') {
      auto dc = parse_dc(line, line_no);
      if (!ids.insert(dc.id).second) {
        throw ParseError(line_no, first + 1, "duplicate constraint label '" + dc.id + "'");
      }
      out.push_back(std::move(dc));
    }
    pos = end + 1;
  }
  return out;
}

inline std::string print_constraints(std::span<const DenialConstraint> dcs) {
  std::string out;
  for (const auto& dc : dcs) out += print_dc(dc) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Binding and evaluation

struct BoundTerm {
  int tuple = 0;  // 0 for constants
  std::size_t column = 0;
  Value constant;
};

struct BoundPredicate {
  BoundTerm left;
  CompareOp op = CompareOp::kEq;
  BoundTerm right;
};

// A constraint with attribute names resolved to column positions.
// Constraints that reference only one tuple variable are checked per row.
struct BoundConstraint {
  std::string id;
  std::vector<BoundPredicate> predicates;
  bool single_tuple = false;
};

inline BoundConstraint bind(const DenialConstraint& dc,
                            std::span<const std::string> schema) {
  BoundConstraint out{dc.id, {}, false};
  bool uses[3] = {false, false, false};
  auto bind_term = [&](const Term& term) {
    BoundTerm bt;
    if (const auto* ta = std::get_if<TupleAttr>(&term)) {
      auto it = std::find(schema.begin(), schema.end(), ta->attr);
      if (it == schema.end()) {
        throw BindError("constraint " + dc.id + " references unknown attribute '" +
                        ta->attr + "'");
      }
      bt.tuple = ta->tuple;
      bt.column = static_cast<std::size_t>(it - schema.begin());
      uses[ta->tuple] = true;
    } else {
      bt.constant = std::get<Value>(term);
    }
    return bt;
  };
  for (const auto& p : dc.predicates) {
    out.predicates.push_back({bind_term(p.left), p.op, bind_term(p.right)});
  }
  out.single_tuple = !(uses[1] && uses[2]);
  return out;
}

inline BoundConstraint bind(const DenialConstraint& dc, const Table& table) {
  return bind(dc, std::span<const std::string>(table.schema()));
}

// True iff every predicate holds for (t1 := first, t2 := second), i.e. the
// pair breaches the constraint.
inline bool holds_violated(const BoundConstraint& dc, std::span<const Value> first,
                           std::span<const Value> second) {
  auto resolve = [&](const BoundTerm& t) -> const Value& {
    if (t.tuple == 1) return first[t.column];
    if (t.tuple == 2) return second[t.column];
    return t.constant;
  };
  for (const auto& p : dc.predicates) {
    if (!compare_values(resolve(p.left), p.op, resolve(p.right))) return false;
  }
  return true;
}

inline bool holds_violated(const DenialConstraint& dc, const Table& table,
                           std::size_t i, std::size_t j) {
  return holds_violated(bind(dc, table), table.row(i), table.row(j));
}

// All violating ordered pairs (i, j), i != j, sorted. A single-tuple
// constraint reports a violating row i as the pair (i, i).
inline std::vector<Violation> violations(const DenialConstraint& dc, const Table& table) {
  BoundConstraint bound = bind(dc, table);
  std::vector<Violation> out;
  for (std::size_t i = 1; i <= table.row_count(); ++i) {
    if (bound.single_tuple) {
      if (holds_violated(bound, table.row(i), table.row(i))) out.push_back({dc.id, i, i});
      continue;
    }
    for (std::size_t j = 1; j <= table.row_count(); ++j) {
      if (i != j && holds_violated(bound, table.row(i), table.row(j))) {
        out.push_back({dc.id, i, j});
      }
    }
  }
  return out;
}

}  // namespace dcshap

#endif  // DCSHAP_DC_HPP
