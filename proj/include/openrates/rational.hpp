#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace openrates {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// Exact conversion; every finite double is a dyadic rational.
inline Rational rational_from_double(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("rational_from_double: non-finite input");
  int exp = 0;
  double m = std::frexp(x, &exp);   // x = m * 2^exp, |m| in [0.5,1)
  for (int i = 0; i < 64 && m != std::floor(m); ++i) { m *= 2.0; --exp; }
  Rational r(BigInt(static_cast<long long>(m)));
  if (exp > 0)
    r *= Rational(BigInt(1) << exp);
  else if (exp < 0)
    r /= Rational(BigInt(1) << (-exp));
  return r;
}

/// Accepts "p/q", decimal strings, or plain integers.
/// Decimal integer parse; cpp_int's own string constructor would read
/// a leading zero as an octal prefix.
inline BigInt parse_integer(std::string s) {
  if (s.empty()) throw std::invalid_argument("parse_integer: empty string");
  bool neg = s[0] == '-';
  if (s[0] == '-' || s[0] == '+') s.erase(0, 1);
  size_t nz = s.find_first_not_of('0');
  s = nz == std::string::npos ? "0" : s.substr(nz);
  for (char c : s)
    if (c < '0' || c > '9') throw std::invalid_argument("parse_integer: bad digit in '" + s + "'");
  BigInt v(s);
  return neg ? -v : v;
}

inline Rational parse_rational(const std::string& s) {
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    BigInt p = parse_integer(s.substr(0, slash)), q = parse_integer(s.substr(slash + 1));
    if (q == 0) throw std::invalid_argument("parse_rational: zero denominator in '" + s + "'");
    return Rational(p, q);
  }
  auto dot = s.find('.');
  if (dot != std::string::npos) {
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    size_t frac_len = s.size() - dot - 1;
    BigInt q = 1;
    for (size_t i = 0; i < frac_len; ++i) q *= 10;
    return Rational(parse_integer(digits), q);
  }
  return Rational(parse_integer(s));
}

inline BigInt lcm_big(const BigInt& a, const BigInt& b) {
  using boost::multiprecision::gcd;
  if (a == 0 || b == 0) return 0;
  return a / gcd(a, b) * b;
}

}  // namespace openrates
