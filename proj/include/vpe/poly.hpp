#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpe/error.hpp"
#include "vpe/field.hpp"
#include "vpe/params.hpp"
#include "vpe/text.hpp"

namespace vpe {

/// Dense univariate polynomial, coefficient of x^0 first.
class Polynomial {
 public:
  Polynomial(const PrimeModulus& m, std::vector<u64> coeffs) : mod_(m), coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) throw ValidationError("polynomial needs at least one coefficient");
    for (auto& c : coeffs_) c %= mod_.value();
  }

  static Polynomial from_elements(std::span<const FieldElement> elems) {
    if (elems.empty()) throw ValidationError("polynomial needs at least one coefficient");
    PrimeModulus m = elems.front().modulus();
    std::vector<u64> raw;
    raw.reserve(elems.size());
    for (const auto& e : elems) {
      if (e.modulus_value() != m.value()) throw ModulusMismatch();
      raw.push_back(e.value());
    }
    return Polynomial(m, std::move(raw));
  }

  static Polynomial zero(const PrimeModulus& m, std::size_t len) {
    return Polynomial(m, std::vector<u64>(len, 0));
  }

  const PrimeModulus& modulus() const { return mod_; }
  u64 p() const { return mod_.value(); }
  std::size_t size() const { return coeffs_.size(); }
  FieldElement coeff(std::size_t i) const { return FieldElement::raw(coeffs_.at(i), mod_.value()); }
  std::span<const u64> raw() const { return coeffs_; }

  bool is_zero() const {
    for (u64 c : coeffs_)
      if (c != 0) return false;
    return true;
  }

  friend bool operator==(const Polynomial&, const Polynomial&) = default;

 private:
  PrimeModulus mod_;
  std::vector<u64> coeffs_;
};

// Zero-pads high-order coefficients up to eta^r. f must not be longer than that.
inline Polynomial pad_to(const Polynomial& f, const ProtocolParams& params) {
  if (f.modulus() != params.modulus()) throw ValidationError("polynomial/params modulus mismatch");
  if (f.size() > params.padded_length()) {
    throw ValidationError("polynomial has more coefficients than eta^r");
  }
  std::vector<u64> c(f.raw().begin(), f.raw().end());
  c.resize(params.padded_length(), 0);
  return Polynomial(f.modulus(), std::move(c));
}

// Horner: exactly len-1 multiplications and len-1 additions.
inline u64 horner(std::span<const u64> coeffs, u64 x, u64 p) {
  u64 acc = coeffs.back();
  for (std::size_t i = coeffs.size() - 1; i-- > 0;) {
    acc = arith::add(arith::mul(acc, x, p), coeffs[i], p);
  }
  return acc;
}

// Strided Horner over coeffs[offset], coeffs[offset+stride], ...
inline u64 horner_strided(std::span<const u64> coeffs, std::size_t offset, std::size_t stride, u64 x,
                          u64 p) {
  std::size_t count = (coeffs.size() - offset + stride - 1) / stride;
  std::size_t i = offset + (count - 1) * stride;
  u64 acc = coeffs[i];
  while (i >= offset + stride) {
    i -= stride;
    acc = arith::add(arith::mul(acc, x, p), coeffs[i], p);
  }
  return acc;
}

inline FieldElement evaluate(const Polynomial& f, const FieldElement& x) {
  if (x.modulus_value() != f.p()) throw ModulusMismatch();
  return FieldElement::raw(horner(f.raw(), x.value(), f.p()), f.p());
}

/// z[i][j] = Z_i(alpha_j): the degree-(eta-1) Lagrange basis over H = {alpha_0..alpha_{eta-1}}
/// evaluated at every point of L.
class ZTable {
 public:
  ZTable(u64 eta, u64 c_eta, u64 p, std::vector<u64> z)
      : eta_(eta), c_eta_(c_eta), p_(p), z_(std::move(z)) {}

  u64 eta() const { return eta_; }
  u64 c_eta() const { return c_eta_; }
  u64 p() const { return p_; }

  u64 raw(std::size_t i, std::size_t j) const { return z_[i * c_eta_ + j]; }
  FieldElement at(std::size_t i, std::size_t j) const {
    if (i >= eta_ || j >= c_eta_) throw std::out_of_range("ZTable index");
    return FieldElement::raw(raw(i, j), p_);
  }

 private:
  u64 eta_;
  u64 c_eta_;
  u64 p_;
  std::vector<u64> z_;  // row-major eta x c_eta
};

// Direct product form; O(c_eta * eta^2).
inline ZTable lagrange_table(const ProtocolParams& params) {
  const u64 eta = params.eta(), ceta = params.c_eta(), p = params.p();
  std::vector<u64> z(eta * ceta);
  for (u64 i = 0; i < eta; ++i) {
    u64 denom = 1;
    for (u64 k = 0; k < eta; ++k) {
      if (k != i) denom = arith::mul(denom, arith::sub(i, k, p), p);
    }
    u64 denom_inv = arith::inv(denom, p);
    for (u64 j = 0; j < ceta; ++j) {
      u64 num = 1;
      for (u64 k = 0; k < eta; ++k) {
        if (k != i) num = arith::mul(num, arith::sub(j, k, p), p);
      }
      z[i * ceta + j] = arith::mul(num, denom_inv, p);
    }
  }
  return ZTable(eta, ceta, p, std::move(z));
}

inline Polynomial stripe(const Polynomial& f, std::size_t s, u64 eta) {
  if (eta == 0 || f.size() % eta != 0) throw ValidationError("stripe: length not divisible by eta");
  if (s >= eta) throw ValidationError("stripe: offset out of range");
  std::vector<u64> out(f.size() / eta);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.raw()[s + i * eta];
  return Polynomial(f.modulus(), std::move(out));
}

inline Polynomial stripe(const Polynomial& f, std::size_t s, const ProtocolParams& params) {
  return stripe(f, s, params.eta());
}

namespace detail {

// out[i] = sum_j in[j + i*eta] * z[j][b]; eta multiplications per output coefficient.
inline void fold_into(std::span<const u64> in, std::size_t b, const ZTable& z, std::span<u64> out) {
  const u64 eta = z.eta(), p = z.p();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const u64* block = in.data() + i * eta;
    u64 acc = arith::mul(block[0], z.raw(0, b), p);
    for (u64 j = 1; j < eta; ++j) acc = arith::add(acc, arith::mul(block[j], z.raw(j, b), p), p);
    out[i] = acc;
  }
}

}  // namespace detail

/// One folding step: replaces f by sum_j Z_j(alpha_b) * stripe_j(f).
inline Polynomial fold(const Polynomial& f, std::size_t b, const ZTable& z) {
  if (f.p() != z.p()) throw ModulusMismatch();
  if (f.size() % z.eta() != 0) throw ValidationError("fold: length not divisible by eta");
  if (b >= z.c_eta()) throw ValidationError("fold: challenge index out of range");
  std::vector<u64> out(f.size() / z.eta());
  detail::fold_into(f.raw(), b, z, out);
  return Polynomial(f.modulus(), std::move(out));
}

/// Evaluates at alpha_b the degree-(eta-1) interpolant through (alpha_s, values[s]).
inline FieldElement interpolate_eval(std::span<const FieldElement> values, std::size_t b, const ZTable& z) {
  if (values.size() != z.eta()) throw ValidationError("interpolate_eval: expected eta values");
  if (b >= z.c_eta()) throw ValidationError("interpolate_eval: challenge index out of range");
  const u64 p = z.p();
  u64 acc = 0;
  for (std::size_t s = 0; s < values.size(); ++s) {
    if (values[s].modulus_value() != p) throw ModulusMismatch();
    u64 term = arith::mul(z.raw(s, b), values[s].value(), p);
    acc = s == 0 ? term : arith::add(acc, term, p);
  }
  return FieldElement::raw(acc, p);
}

/* -------------------------------------------------------------------- *
 *  Polynomial file                                                      *
 * -------------------------------------------------------------------- */

inline std::string serialize_poly(const Polynomial& f) {
  std::string out = "VPE-POLY v1 modulus=" + std::to_string(f.p()) + " d=" + std::to_string(f.size()) + "\n";
  for (u64 c : f.raw()) {
    out += std::to_string(c);
    out += '\n';
  }
  return out;
}

inline Polynomial parse_poly(std::string_view body) {
  auto ls = text::lines(body);
  if (ls.empty()) throw ParseError("poly file: empty");
  auto head = text::split(ls[0]);
  if (head.size() != 4 || head[0] != "VPE-POLY" || head[1] != "v1") {
    throw ParseError("poly file: expected 'VPE-POLY v1 modulus=<dec> d=<dec>'");
  }
  u64 modulus = text::keyed_decimal(head[2], "modulus");
  u64 d = text::keyed_decimal(head[3], "d");
  if (d == 0) throw ParseError("poly file: d must be positive");
  if (ls.size() != d + 1) throw ParseError("poly file: expected " + std::to_string(d) + " coefficient lines");
  PrimeModulus m(modulus);
  std::vector<u64> coeffs;
  coeffs.reserve(d);
  for (std::size_t i = 1; i < ls.size(); ++i) {
    u64 c = text::require_decimal(ls[i], "poly coefficient");
    if (c >= modulus) throw ParseError("poly file: coefficient not reduced modulo p");
    coeffs.push_back(c);
  }
  return Polynomial(m, std::move(coeffs));
}

}  // namespace vpe
