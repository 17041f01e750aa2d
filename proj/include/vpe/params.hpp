#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vpe/digest.hpp"
#include "vpe/error.hpp"
#include "vpe/field.hpp"
#include "vpe/text.hpp"

namespace vpe {

class ProtocolParams;
ProtocolParams derive_params(const PrimeModulus& modulus, u64 d_input, u64 eta, u64 c_eta);

/// Public parameterization shared by prover, verifier and the table builder.
///
/// L is the canonical embedding {0, 1, ..., c_eta - 1} of the field and H is
/// its prefix of length eta. The padded coefficient count is eta^r >= d.
class ProtocolParams {
 public:
  const PrimeModulus& modulus() const { return modulus_; }
  u64 p() const { return modulus_.value(); }
  u64 d_input() const { return d_input_; }
  u64 eta() const { return eta_; }
  u64 c_eta() const { return c_eta_; }
  u64 r() const { return r_; }
  u64 m() const { return m_; }

  // eta^r
  u64 padded_length() const { return padded_; }

  // (c_eta)^r, saturating at u64 max.
  u64 table_size() const { return table_size_; }

  double c() const { return static_cast<double>(c_eta_) / static_cast<double>(eta_); }

  FieldElement alpha(u64 j) const { return FieldElement(j, modulus_); }

  std::vector<FieldElement> L() const {
    std::vector<FieldElement> out;
    for (u64 j = 0; j < c_eta_; ++j) out.push_back(alpha(j));
    return out;
  }
  std::vector<FieldElement> H() const {
    std::vector<FieldElement> out;
    for (u64 j = 0; j < eta_; ++j) out.push_back(alpha(j));
    return out;
  }

  // 1 - (1 - 1/c)^r: the per-experiment escape bound.
  double soundness_bound() const {
    return 1.0 - std::pow(1.0 - 1.0 / c(), static_cast<double>(r_));
  }
  // bound^m.
  double amplified_bound() const {
    return std::pow(soundness_bound(), static_cast<double>(m_));
  }

  friend bool operator==(const ProtocolParams&, const ProtocolParams&) = default;

 private:
  ProtocolParams(PrimeModulus modulus) : modulus_(modulus) {}

  PrimeModulus modulus_;
  u64 d_input_ = 0;
  u64 eta_ = 0;
  u64 c_eta_ = 0;
  u64 r_ = 0;
  u64 m_ = 0;
  u64 padded_ = 0;
  u64 table_size_ = 0;

  friend ProtocolParams derive_params(const PrimeModulus&, u64, u64, u64);
};

namespace detail {

inline bool checked_mul(u64 a, u64 b, u64& out) { return !__builtin_mul_overflow(a, b, &out); }

// ceil((num/den)^r) for num > den > 0. Exact while num^r fits in 128 bits.
inline u64 ceil_ratio_power(u64 num, u64 den, u64 r) {
  u128 n = 1, d = 1;
  bool exact = true;
  for (u64 i = 0; i < r && exact; ++i) {
    if (n > std::numeric_limits<u128>::max() / num) {
      exact = false;
      break;
    }
    n *= num;
    d *= den;
  }
  if (exact) {
    u128 q = (n + d - 1) / d;
    if (q > (u128{1} << 62)) throw ValidationError("amplification count m overflows");
    return static_cast<u64>(q);
  }
  long double v = std::pow(static_cast<long double>(num) / den, static_cast<long double>(r));
  if (!(v < static_cast<long double>(u64{1} << 62))) {
    throw ValidationError("amplification count m overflows");
  }
  return static_cast<u64>(std::ceil(v));
}

}  // namespace detail

/// Builds and validates the parameterization. r is the least r >= 1 with
/// eta^r >= d_input; m = ceil((c/(c-1))^r) with c = c_eta / eta.
inline ProtocolParams derive_params(const PrimeModulus& modulus, u64 d_input, u64 eta, u64 c_eta) {
  if (d_input < 1) throw ValidationError("d must be at least 1");
  if (eta < 2) throw ValidationError("eta must be at least 2");
  if (c_eta <= eta) throw ValidationError("c_eta must exceed eta (c > 1)");
  if (c_eta >= modulus.value()) throw ValidationError("c_eta must be smaller than the modulus");

  ProtocolParams params(modulus);
  params.d_input_ = d_input;
  params.eta_ = eta;
  params.c_eta_ = c_eta;

  u64 r = 1;
  u64 padded = eta;
  while (padded < d_input) {
    if (!detail::checked_mul(padded, eta, padded)) {
      throw ValidationError("eta^r overflows 64 bits");
    }
    ++r;
  }
  params.r_ = r;
  params.padded_ = padded;

  u64 lambda = 1;
  for (u64 i = 0; i < r; ++i) {
    if (!detail::checked_mul(lambda, c_eta, lambda)) {
      lambda = std::numeric_limits<u64>::max();
      break;
    }
  }
  params.table_size_ = lambda;
  params.m_ = detail::ceil_ratio_power(c_eta, c_eta - eta, r);

  // Amplified escape probability must be below one half.
  long double esc = 1.0L - std::pow(1.0L - static_cast<long double>(eta) / c_eta,
                                    static_cast<long double>(r));
  long double amplified = std::exp(static_cast<long double>(params.m_) * std::log(esc));
  if (!(amplified < 0.5L)) {
    throw ValidationError("amplification check failed: p^m >= 1/2");
  }
  return params;
}

/* -------------------------------------------------------------------- *
 *  Params file                                                          *
 * -------------------------------------------------------------------- */

inline std::string serialize_params(const ProtocolParams& p) {
  std::string out = "VPE-PARAMS v1\n";
  out += "modulus=" + std::to_string(p.p()) + "\n";
  out += "d=" + std::to_string(p.d_input()) + "\n";
  out += "eta=" + std::to_string(p.eta()) + "\n";
  out += "ceta=" + std::to_string(p.c_eta()) + "\n";
  out += "r=" + std::to_string(p.r()) + "\n";
  out += "m=" + std::to_string(p.m()) + "\n";
  return out;
}

inline std::string params_digest(const ProtocolParams& p) { return sha256_hex(serialize_params(p)); }

inline ProtocolParams parse_params(std::string_view body) {
  auto ls = text::lines(body);
  if (ls.size() != 7 || ls[0] != "VPE-PARAMS v1") {
    throw ParseError("params file: expected 'VPE-PARAMS v1' header and 6 fields");
  }
  u64 modulus = text::keyed_decimal(ls[1], "modulus");
  u64 d = text::keyed_decimal(ls[2], "d");
  u64 eta = text::keyed_decimal(ls[3], "eta");
  u64 ceta = text::keyed_decimal(ls[4], "ceta");
  u64 r = text::keyed_decimal(ls[5], "r");
  u64 m = text::keyed_decimal(ls[6], "m");
  ProtocolParams params = derive_params(PrimeModulus(modulus), d, eta, ceta);
  if (params.r() != r || params.m() != m) {
    throw ParseError("params file: r/m inconsistent with d, eta, ceta");
  }
  return params;
}

/* -------------------------------------------------------------------- *
 *  Parameter selection: eta = (log2 d)^omega, c_eta / eta >= c          *
 * -------------------------------------------------------------------- */

struct Ratio {
  u64 num = 2;
  u64 den = 1;
};

struct ParamSelector {
  double omega = 1.0;
  Ratio c_target;
};

inline std::pair<u64, u64> select_eta(u64 d_input, const ParamSelector& sel) {
  if (!(sel.omega > 0)) throw ValidationError("omega must be positive");
  if (sel.c_target.den == 0 || sel.c_target.num <= sel.c_target.den) {
    throw ValidationError("c must be a ratio greater than 1");
  }
  if (d_input < 4) throw ValidationError("select_eta needs d >= 4");
  double lg = std::log2(static_cast<double>(d_input));
  double raw = std::round(std::pow(lg, sel.omega));
  u64 eta = raw < 2.0 ? 2 : static_cast<u64>(raw);
  // smallest c_eta > eta with c_eta * den >= num * eta
  u128 need = static_cast<u128>(sel.c_target.num) * eta;
  u64 c_eta = static_cast<u64>((need + sel.c_target.den - 1) / sel.c_target.den);
  if (c_eta <= eta) c_eta = eta + 1;
  return {eta, c_eta};
}

}  // namespace vpe
