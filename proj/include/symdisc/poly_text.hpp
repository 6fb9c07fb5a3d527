#pragma once

// Text format for polynomials: a sum of `coeff*x1^a*x2^b` terms, e.g.
//
//   2*x1^4 - 2*x1^2*x2^2 + 1*x2^4
//
// Coefficients are written with 17 significant digits so that parse(format(p))
// reproduces every coefficient bit for bit. The zero polynomial is "0".
// The parser also accepts hand-written input such as "x1*x2 - 0.5" or "3x1^2".

#include <cctype>
#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>

#include "symdisc/poly.hpp"

namespace symdisc {

inline std::string format_coefficient(double c) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", c);
  return buf;
}

inline std::string to_string(const Polynomial& p) {
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    double mag = c;
    if (first) {
      if (c < 0) {
        out += "-";
        mag = -c;
      }
    } else {
      out += c < 0 ? " - " : " + ";
      mag = std::abs(c);
    }
    first = false;
    out += format_coefficient(mag);
    for (std::size_t i = 0; i < m.dimension(); ++i) {
      if (m[i] == 0) continue;
      out += "*x" + std::to_string(i + 1);
      if (m[i] > 1) out += "^" + std::to_string(m[i]);
    }
  }
  return out;
}

namespace detail {

class PolyParser {
 public:
  PolyParser(std::string_view text, std::size_t dimension, int cap)
      : s_(text), dim_(dimension), result_(dimension, cap) {}

  Polynomial parse() {
    skip_ws();
    if (at_end()) fail("empty polynomial text");
    bool first = true;
    while (true) {
      skip_ws();
      if (at_end()) break;
      double sign = 1.0;
      if (peek() == '+' || peek() == '-') {
        sign = peek() == '-' ? -1.0 : 1.0;
        ++pos_;
        skip_ws();
      } else if (!first) {
        fail("expected '+' or '-' between terms");
      }
      parse_term(sign);
      first = false;
    }
    return result_;
  }

 private:
  void parse_term(double sign) {
    double coeff = 1.0;
    std::vector<int> e(dim_, 0);
    bool have_factor = false;
    bool pending_star = false;
    while (true) {
      skip_ws();
      if (at_end()) break;
      const char ch = peek();
      if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
        coeff *= parse_number();
        have_factor = true;
      } else if (ch == 'x') {
        ++pos_;
        const long idx = parse_int();
        if (idx < 1 || static_cast<std::size_t>(idx) > dim_) {
          fail("variable x" + std::to_string(idx) + " out of range for dimension " + std::to_string(dim_));
        }
        long power = 1;
        skip_ws();
        if (!at_end() && peek() == '^') {
          ++pos_;
          skip_ws();
          power = parse_int();
        }
        e[static_cast<std::size_t>(idx - 1)] += static_cast<int>(power);
        have_factor = true;
      } else {
        break;
      }
      pending_star = false;
      skip_ws();
      if (!at_end() && peek() == '*') {
        ++pos_;
        pending_star = true;
        continue;
      }
      // Implicit multiplication such as "3x1" is accepted.
      if (!at_end() && (peek() == 'x')) continue;
      break;
    }
    if (!have_factor) fail("expected a term");
    if (pending_star) fail("expected a factor after '*'");
    result_.add_term(Monomial(std::move(e)), sign * coeff);
  }

  double parse_number() {
    double v = 0.0;
    const char* begin = s_.data() + pos_;
    const char* end = s_.data() + s_.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr == begin) fail("malformed number");
    if (!std::isfinite(v)) fail("non-finite coefficient");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return v;
  }

  long parse_int() {
    long v = 0;
    const char* begin = s_.data() + pos_;
    const char* end = s_.data() + s_.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr == begin) fail("expected an integer");
    if (v < 0) fail("negative exponent");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return v;
  }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("polynomial text, column " + std::to_string(pos_ + 1) + ": " + what);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t dim_;
  Polynomial result_;
};

}  // namespace detail

/// Parses the polynomial text format; variables are x1..x{dimension}.
inline Polynomial parse_polynomial(std::string_view text, std::size_t dimension,
                                   int degree_cap = kDefaultDegreeCap) {
  return detail::PolyParser(text, dimension, degree_cap).parse();
}

}  // namespace symdisc
