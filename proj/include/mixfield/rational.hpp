#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>
#include <string_view>

#include "mixfield/errors.hpp"

namespace mixfield {

// Exact rational arithmetic on 64-bit integers.  Values are always kept in
// lowest terms with a positive denominator, so bitwise equality of (num, den)
// is value equality.  Intermediate products run through 128-bit integers and
// any result that cannot be represented after reduction throws Error rather
// than silently wrapping.
class Rational {
 public:
  constexpr Rational() : num_(0), den_(1) {}
  constexpr Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT(google-explicit-constructor)
  Rational(std::int64_t n, std::int64_t d) { assign(n, d); }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  bool is_zero() const { return num_ == 0; }
  // true when the value lies in [0, 1]
  bool is_probability() const { return num_ >= 0 && num_ <= den_; }

  friend Rational operator+(const Rational& a, const Rational& b) {
    __int128 n = i128(a.num_) * b.den_ + i128(b.num_) * a.den_;
    return make_reduced(n, i128(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    __int128 n = i128(a.num_) * b.den_ - i128(b.num_) * a.den_;
    return make_reduced(n, i128(a.den_) * b.den_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return make_reduced(i128(a.num_) * b.num_, i128(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw Error("rational division by zero");
    return make_reduced(i128(a.num_) * b.den_, i128(a.den_) * b.num_);
  }
  Rational operator-() const {
    Rational r;
    r.num_ = -num_;  // num_ > INT64_MIN is guaranteed by construction
    r.den_ = den_;
    return r;
  }
  Rational& operator+=(const Rational& b) { return *this = *this + b; }
  Rational& operator-=(const Rational& b) { return *this = *this - b; }
  Rational& operator*=(const Rational& b) { return *this = *this * b; }
  Rational& operator/=(const Rational& b) { return *this = *this / b; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
  friend bool operator<(const Rational& a, const Rational& b) {
    return i128(a.num_) * b.den_ < i128(b.num_) * a.den_;
  }
  friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
  friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
  friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }

  Rational abs() const { return num_ < 0 ? -*this : *this; }

  double to_double() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }

  // "p/q", or just "p" for integers
  std::string str() const {
    std::string s = std::to_string(num_);
    if (den_ != 1) {
      s += '/';
      s += std::to_string(den_);
    }
    return s;
  }

  // Accepts "p" or "p/q" with an optional leading sign on p.  Decimal points,
  // exponents and whitespace are rejected: exact inputs only.
  static Rational parse(std::string_view s) {
    auto fail = [&] { throw ParseError("not a rational: '" + std::string(s) + "'"); };
    if (s.empty()) fail();
    std::size_t slash = s.find('/');
    std::string_view ns = s.substr(0, slash);
    std::string_view ds = slash == std::string_view::npos ? std::string_view("1")
                                                          : s.substr(slash + 1);
    auto to_i64 = [&](std::string_view t, bool allow_sign) -> std::int64_t {
      if (t.empty()) fail();
      std::size_t i = 0;
      bool neg = false;
      if (allow_sign && (t[0] == '-' || t[0] == '+')) {
        neg = t[0] == '-';
        i = 1;
        if (i == t.size()) fail();
      }
      __int128 v = 0;
      for (; i < t.size(); ++i) {
        if (t[i] < '0' || t[i] > '9') fail();
        v = v * 10 + (t[i] - '0');
        if (v > (i128(1) << 70)) fail();  // way out of range already
      }
      return check_range(neg ? -v : v);
    };
    return Rational(to_i64(ns, true), to_i64(ds, false));
  }

 private:
  using i128 = __int128;

  static std::int64_t check_range(i128 v) {
    if (v > INT64_MAX || v <= INT64_MIN) throw Error("rational overflow");
    return static_cast<std::int64_t>(v);
  }

  static i128 gcd128(i128 a, i128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
      i128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  static Rational make_reduced(i128 n, i128 d) {
    if (d == 0) throw Error("rational denominator is zero");
    if (d < 0) {
      n = -n;
      d = -d;
    }
    i128 g = gcd128(n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    Rational r;
    r.num_ = check_range(n);
    r.den_ = check_range(d);
    return r;
  }

  void assign(std::int64_t n, std::int64_t d) {
    *this = make_reduced(n, d);
  }

  std::int64_t num_;
  std::int64_t den_;
};

}  // namespace mixfield
