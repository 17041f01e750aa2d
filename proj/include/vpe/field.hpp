#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>

#include "vpe/error.hpp"

namespace vpe {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

inline constexpr u64 kMersenne61 = (u64{1} << 61) - 1;

/* -------------------------------------------------------------------- *
 *  Operation counters                                                   *
 *                                                                       *
 *  Every field multiplication / addition / inversion performed through  *
 *  this header is charged to the counter installed by the innermost     *
 *  live CountScope on the current thread. With no scope, nothing is     *
 *  counted.                                                             *
 * -------------------------------------------------------------------- */
struct OpCounts {
  u64 mul = 0;
  u64 add = 0;
  u64 inv = 0;

  u64 total() const { return mul + add + inv; }

  OpCounts& operator+=(const OpCounts& o) {
    mul += o.mul;
    add += o.add;
    inv += o.inv;
    return *this;
  }
  friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

namespace detail {
inline thread_local OpCounts* active_counts = nullptr;
}  // namespace detail

class CountScope {
 public:
  explicit CountScope(OpCounts& sink) : prev_(detail::active_counts) {
    detail::active_counts = &sink;
  }
  ~CountScope() { detail::active_counts = prev_; }
  CountScope(const CountScope&) = delete;
  CountScope& operator=(const CountScope&) = delete;

 private:
  OpCounts* prev_;
};

// Suspends counting for its lifetime (work attributed to nobody).
class UncountedScope {
 public:
  UncountedScope() : prev_(detail::active_counts) { detail::active_counts = nullptr; }
  ~UncountedScope() { detail::active_counts = prev_; }
  UncountedScope(const UncountedScope&) = delete;
  UncountedScope& operator=(const UncountedScope&) = delete;

 private:
  OpCounts* prev_;
};

/* -------------------------------------------------------------------- *
 *  Raw residue arithmetic on canonical values in [0, p)                 *
 * -------------------------------------------------------------------- */
namespace arith {

inline u64 add(u64 a, u64 b, u64 p) {
  if (auto* c = detail::active_counts) ++c->add;
  u64 s = a + b;  // p < 2^64 and a, b < p: compare against p handles the carry
  if (s < a || s >= p) s -= p;
  return s;
}

inline u64 sub(u64 a, u64 b, u64 p) {
  if (auto* c = detail::active_counts) ++c->add;
  return a >= b ? a - b : a + (p - b);
}

inline u64 neg(u64 a, u64 p) { return a == 0 ? 0 : p - a; }

inline u64 reduce(u128 x, u64 p) {
  if (p == kMersenne61) {
    u64 lo = static_cast<u64>(x & kMersenne61);
    u64 hi = static_cast<u64>(x >> 61);
    u64 s = lo + (hi & kMersenne61) + static_cast<u64>(hi >> 61);
    s = (s & kMersenne61) + (s >> 61);
    return s >= kMersenne61 ? s - kMersenne61 : s;
  }
  return static_cast<u64>(x % p);
}

inline u64 mul(u64 a, u64 b, u64 p) {
  if (auto* c = detail::active_counts) ++c->mul;
  return reduce(static_cast<u128>(a) * b, p);
}

// Square-and-multiply; 0^0 = 1.
inline u64 pow(u64 a, u64 e, u64 p) {
  u64 result = 1 % p;
  u64 base = a;
  while (e != 0) {
    if (e & 1) result = mul(result, base, p);
    e >>= 1;
    if (e != 0) base = mul(base, base, p);
  }
  return result;
}

// Extended Euclid; charged as a single inversion.
inline u64 inv(u64 a, u64 p) {
  if (a == 0) throw NotInvertible();
  if (auto* c = detail::active_counts) ++c->inv;
  __int128 t = 0, new_t = 1;
  u64 r = p, new_r = a;
  while (new_r != 0) {
    u64 q = r / new_r;
    __int128 tmp_t = t - static_cast<__int128>(q) * new_t;
    t = new_t;
    new_t = tmp_t;
    u64 tmp_r = r - q * new_r;
    r = new_r;
    new_r = tmp_r;
  }
  return t < 0 ? p - static_cast<u64>(-t) : static_cast<u64>(t);
}

}  // namespace arith

inline u64 mulmod_uncounted(u64 a, u64 b, u64 p) {
  return arith::reduce(static_cast<u128>(a) * b, p);
}

// Deterministic Miller-Rabin for all 64-bit inputs.
inline bool is_prime(u64 n) {
  if (n < 2) return false;
  constexpr std::array<u64, 12> bases = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  for (u64 q : bases) {
    if (n % q == 0) return n == q;
  }
  u64 d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  auto powmod = [n](u64 a, u64 e) {
    u64 r = 1;
    while (e) {
      if (e & 1) r = static_cast<u64>(static_cast<u128>(r) * a % n);
      a = static_cast<u64>(static_cast<u128>(a) * a % n);
      e >>= 1;
    }
    return r;
  };
  for (u64 a : bases) {
    u64 x = powmod(a, d);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < s; ++i) {
      x = static_cast<u64>(static_cast<u128>(x) * x % n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

class PrimeModulus {
 public:
  explicit PrimeModulus(u64 p = kMersenne61) : p_(p) {
    if (p < 3 || !is_prime(p)) {
      throw ValidationError("modulus " + std::to_string(p) + " is not an odd prime");
    }
  }

  u64 value() const { return p_; }
  friend bool operator==(const PrimeModulus&, const PrimeModulus&) = default;

 private:
  struct Trusted {};
  PrimeModulus(Trusted, u64 p) : p_(p) {}
  friend class FieldElement;

  u64 p_;
};

class FieldElement {
 public:
  FieldElement(u64 value, const PrimeModulus& m) : v_(value % m.value()), p_(m.value()) {}

  static FieldElement zero(const PrimeModulus& m) { return {0, m}; }
  static FieldElement one(const PrimeModulus& m) { return {1, m}; }

  u64 value() const { return v_; }
  PrimeModulus modulus() const { return PrimeModulus(PrimeModulus::Trusted{}, p_); }
  u64 modulus_value() const { return p_; }
  bool is_zero() const { return v_ == 0; }

  FieldElement operator+(const FieldElement& o) const {
    check(o);
    return raw(arith::add(v_, o.v_, p_), p_);
  }
  FieldElement operator-(const FieldElement& o) const {
    check(o);
    return raw(arith::sub(v_, o.v_, p_), p_);
  }
  FieldElement operator-() const { return raw(arith::neg(v_, p_), p_); }
  FieldElement operator*(const FieldElement& o) const {
    check(o);
    return raw(arith::mul(v_, o.v_, p_), p_);
  }
  FieldElement& operator+=(const FieldElement& o) { return *this = *this + o; }
  FieldElement& operator-=(const FieldElement& o) { return *this = *this - o; }
  FieldElement& operator*=(const FieldElement& o) { return *this = *this * o; }

  FieldElement inv() const { return raw(arith::inv(v_, p_), p_); }
  FieldElement pow(u64 e) const { return raw(arith::pow(v_, e, p_), p_); }

  friend bool operator==(const FieldElement& a, const FieldElement& b) {
    a.check(b);
    return a.v_ == b.v_;
  }

  friend std::ostream& operator<<(std::ostream& os, const FieldElement& e) { return os << e.v_; }

  // Wraps an already-canonical residue without re-validating the modulus.
  static FieldElement raw(u64 v, u64 p) { return FieldElement(v, p, Unchecked{}); }

 private:
  struct Unchecked {};
  FieldElement(u64 v, u64 p, Unchecked) : v_(v), p_(p) {}

  void check(const FieldElement& o) const {
    if (p_ != o.p_) throw ModulusMismatch();
  }

  u64 v_;
  u64 p_;
};

inline FieldElement add(const FieldElement& a, const FieldElement& b) { return a + b; }
inline FieldElement mul(const FieldElement& a, const FieldElement& b) { return a * b; }
inline FieldElement inv(const FieldElement& a) { return a.inv(); }
inline FieldElement pow(const FieldElement& a, u64 e) { return a.pow(e); }

}  // namespace vpe
