#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpe/error.hpp"
#include "vpe/field.hpp"
#include "vpe/lookup.hpp"
#include "vpe/params.hpp"
#include "vpe/poly.hpp"
#include "vpe/protocol.hpp"
#include "vpe/text.hpp"

namespace vpe {

// Desk-scale ceiling on (c_eta)^(n*r) for multivariate tables.
inline constexpr u64 kMaxMvTableEntries = u64{1} << 20;

namespace detail {

inline u64 checked_power(u64 base, u64 exp, const char* what) {
  u64 out = 1;
  for (u64 i = 0; i < exp; ++i) {
    if (!checked_mul(out, base, out)) throw ValidationError(std::string(what) + " overflows 64 bits");
  }
  return out;
}

// Nested Horner over a dense array whose k-th axis has sizes[k] entries,
// axis 0 fastest-varying; points[k] is substituted for axis k.
inline u64 nested_horner(std::span<const u64> coeffs, std::span<const u64> sizes, std::span<const u64> points,
                         u64 p) {
  std::vector<u64> cur(coeffs.begin(), coeffs.end());
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const std::size_t w = sizes[k];
    std::vector<u64> next(cur.size() / w);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = horner({cur.data() + i * w, w}, points[k], p);
    cur = std::move(next);
  }
  return cur[0];
}

}  // namespace detail

/// Dense n-variate polynomial with d terms per variable; a_{i1..in} at
/// i1 + i2*d + ... + in*d^(n-1).
class MultiPoly {
 public:
  MultiPoly(const PrimeModulus& m, u64 n, u64 d, std::vector<u64> coeffs)
      : mod_(m), n_(n), d_(d), coeffs_(std::move(coeffs)) {
    if (n_ == 0) throw ValidationError("multivariate polynomial needs n >= 1");
    if (d_ == 0) throw ValidationError("multivariate polynomial needs d >= 1");
    if (coeffs_.size() != detail::checked_power(d_, n_, "d^n")) {
      throw ValidationError("multivariate polynomial must hold d^n coefficients");
    }
    for (auto& c : coeffs_) c %= mod_.value();
  }

  const PrimeModulus& modulus() const { return mod_; }
  u64 p() const { return mod_.value(); }
  u64 n() const { return n_; }
  u64 d() const { return d_; }
  std::span<const u64> raw() const { return coeffs_; }

  FieldElement coeff(std::span<const u64> index) const {
    if (index.size() != n_) throw ValidationError("multi-index must have n components");
    std::size_t flat = 0;
    for (std::size_t k = index.size(); k-- > 0;) {
      if (index[k] >= d_) throw std::out_of_range("multi-index component");
      flat = flat * d_ + index[k];
    }
    return FieldElement::raw(coeffs_[flat], p());
  }

  friend bool operator==(const MultiPoly&, const MultiPoly&) = default;

 private:
  PrimeModulus mod_;
  u64 n_, d_;
  std::vector<u64> coeffs_;
};

inline FieldElement mv_evaluate(const MultiPoly& f, std::span<const FieldElement> point) {
  if (point.size() != f.n()) throw ValidationError("point must have n coordinates");
  std::vector<u64> xs;
  for (const auto& x : point) {
    if (x.modulus_value() != f.p()) throw ModulusMismatch();
    xs.push_back(x.value());
  }
  std::vector<u64> sizes(f.n(), f.d());
  return FieldElement::raw(detail::nested_horner(f.raw(), sizes, xs, f.p()), f.p());
}

// g(x) = f(x, x^d, ..., x^(d^(n-1))): the coefficient array read as univariate.
inline Polynomial univariate_embed(const MultiPoly& f) {
  return Polynomial(f.modulus(), std::vector<u64>(f.raw().begin(), f.raw().end()));
}

// Zero-pads every variable from d to `d_pad` terms.
inline MultiPoly pad_variables(const MultiPoly& f, u64 d_pad) {
  if (d_pad < f.d()) throw ValidationError("cannot pad to fewer terms per variable");
  if (d_pad == f.d()) return f;
  std::vector<u64> out(detail::checked_power(d_pad, f.n(), "d_pad^n"), 0);
  const u64 total = f.raw().size();
  for (u64 flat = 0; flat < total; ++flat) {
    u64 rest = flat, target = 0, scale = 1;
    for (u64 k = 0; k < f.n(); ++k) {
      target += (rest % f.d()) * scale;
      rest /= f.d();
      scale *= d_pad;
    }
    out[target] = f.raw()[flat];
  }
  return MultiPoly(f.modulus(), f.n(), d_pad, std::move(out));
}

/// Per-variable r, and the univariate parameters of the padded embedding
/// (degree bound eta^(n*r), so r_total = n*r and m uses exponent n*r).
class MvParams {
 public:
  MvParams(const PrimeModulus& m, u64 n, u64 d, u64 eta, u64 c_eta, u64 max_entries = kMaxMvTableEntries)
      : n_(n), d_(d), var_(derive_params(m, d, eta, c_eta)), total_(derive_total(m, n, eta, c_eta, var_.r())) {
    if (n == 0) throw ValidationError("multivariate params need n >= 1");
    if (total_.table_size() > max_entries) {
      throw ValidationError("multivariate table (c_eta)^(n*r) = " + std::to_string(total_.table_size()) +
                            " exceeds the limit of " + std::to_string(max_entries));
    }
  }

  u64 n() const { return n_; }
  u64 d_input() const { return d_; }
  u64 r_var() const { return var_.r(); }
  u64 d_pad() const { return var_.padded_length(); }
  const ProtocolParams& total() const { return total_; }

 private:
  static ProtocolParams derive_total(const PrimeModulus& m, u64 n, u64 eta, u64 c_eta, u64 r) {
    if (n == 0) throw ValidationError("multivariate params need n >= 1");
    return derive_params(m, detail::checked_power(eta, n * r, "eta^(n*r)"), eta, c_eta);
  }

  u64 n_, d_;
  ProtocolParams var_;
  ProtocolParams total_;
};

// The (c_eta)^(n*r) table, built from the padded embedding. Folding the
// low base-eta digits of the flat index first reduces x1, then x2, ...
inline LookupTable mv_build_table(const MultiPoly& f, const MvParams& mp, const BuildOptions& opts = {}) {
  if (f.n() != mp.n() || f.d() != mp.d_input()) throw ValidationError("multivariate polynomial/params mismatch");
  return build_table(univariate_embed(pad_variables(f, mp.d_pad())), mp.total(), opts);
}

// Weight points for the verifier: x_j^(eta^t) for j = 1..n, t = 0..r-1.
inline std::vector<FieldElement> mv_schedule(const MvParams& mp, std::span<const FieldElement> point) {
  if (point.size() != mp.n()) throw ValidationError("point must have n coordinates");
  const u64 eta = mp.total().eta();
  std::vector<FieldElement> out;
  for (const auto& x : point) {
    if (x.modulus_value() != mp.total().p()) throw ModulusMismatch();
    FieldElement y = x;
    for (u64 t = 0; t < mp.r_var(); ++t) {
      out.push_back(y);
      y = y.pow(eta);
    }
  }
  return out;
}

/// Honest prover for the sequential variable reduction. Its coefficient
/// vector is the univariate one; only the evaluation points differ.
class MvHonestProver : public Prover {
 public:
  MvHonestProver(const MultiPoly& f, const MvParams& mp, std::span<const FieldElement> point)
      : mp_(mp),
        z_(lagrange_table(mp.total())),
        base_(pad_variables(f, mp.d_pad())),
        point_(point.begin(), point.end()),
        schedule_(mv_schedule(mp, point)),
        claim_(mv_evaluate(base_, point_)) {
    if (f.n() != mp.n() || f.d() != mp.d_input()) throw ValidationError("multivariate polynomial/params mismatch");
    rewind();
  }

  FieldElement claim() const override { return claim_; }
  FieldElement round_point() const override { return schedule_.at(level_); }

  std::vector<FieldElement> round() override {
    const ProtocolParams& tp = mp_.total();
    if (level_ >= tp.r()) throw ProtocolError("prover: no rounds left in this experiment");
    const u64 p = tp.p(), eta = tp.eta(), r = mp_.r_var();
    const u64 var = level_ / r, t = level_ % r;

    // Stripes keep x_var with eta^(r-t-1) terms; later variables are untouched.
    std::vector<u64> sizes{detail::checked_power(eta, r - t - 1, "stripe width")};
    std::vector<u64> pts{schedule_[level_].pow(eta).value()};
    for (u64 k = var + 1; k < mp_.n(); ++k) {
      sizes.push_back(mp_.d_pad());
      pts.push_back(point_[k].value());
    }
    std::vector<FieldElement> values;
    std::vector<u64> part(current_.size() / eta);
    for (u64 s = 0; s < eta; ++s) {
      for (std::size_t i = 0; i < part.size(); ++i) part[i] = current_[s + i * eta];
      values.push_back(FieldElement::raw(detail::nested_horner(part, sizes, pts, p), p));
    }
    return values;
  }

  void accept_challenge(std::size_t b) override {
    const ProtocolParams& tp = mp_.total();
    if (b >= tp.c_eta()) throw ProtocolError("prover: challenge out of range");
    if (level_ >= tp.r()) throw ProtocolError("prover: challenge past the last level");
    std::vector<u64> next(current_.size() / tp.eta());
    detail::fold_into(current_, b, z_, next);
    current_ = std::move(next);
    ++level_;
  }

  FieldElement final_value() override {
    if (level_ != mp_.total().r()) throw ProtocolError("prover: experiment not complete");
    FieldElement v = FieldElement::raw(current_[0], mp_.total().p());
    rewind();
    return v;
  }

 private:
  void rewind() {
    level_ = 0;
    current_.assign(base_.raw().begin(), base_.raw().end());
  }

  MvParams mp_;
  ZTable z_;
  MultiPoly base_;
  std::vector<FieldElement> point_;
  std::vector<FieldElement> schedule_;
  FieldElement claim_;
  std::vector<u64> current_;
  std::size_t level_ = 0;
};

inline std::unique_ptr<Prover> make_mv_prover(const AdversaryStrategy& strategy, const MultiPoly& f,
                                              const MvParams& mp, std::span<const FieldElement> point) {
  auto honest = std::make_unique<MvHonestProver>(f, mp, point);
  if (auto* w = std::get_if<WrongClaim>(&strategy)) {
    return std::make_unique<AdversarialProver>(std::move(honest), lagrange_table(mp.total()), *w);
  }
  return honest;
}

/// n*r challenge rounds per experiment, final constant checked against the
/// (c_eta)^(n*r) table.
inline SessionResult mv_run_protocol(const MultiPoly& f, const MvParams& mp, std::span<const FieldElement> point,
                                     const AdversaryStrategy& strategy, u64 seed, const TableSource& table,
                                     SessionCounters* counters = nullptr) {
  auto prover = make_mv_prover(strategy, f, mp, point);
  SeededChallenges coins(seed);
  Verifier verifier(mp.total(), table, coins);
  verifier.set_schedule(mv_schedule(mp, point));
  return run_session(*prover, verifier, counters);
}

/* -------------------------------------------------------------------- *
 *  MultiPoly file                                                       *
 * -------------------------------------------------------------------- */

inline std::string serialize_mpoly(const MultiPoly& f) {
  std::string out = "VPE-MPOLY v1 modulus=" + std::to_string(f.p()) + " n=" + std::to_string(f.n()) +
                    " d=" + std::to_string(f.d()) + "\n";
  for (u64 c : f.raw()) {
    out += std::to_string(c);
    out += '\n';
  }
  return out;
}

inline MultiPoly parse_mpoly(std::string_view body) {
  auto ls = text::lines(body);
  if (ls.empty()) throw ParseError("mpoly file: empty");
  auto head = text::split(ls[0]);
  if (head.size() != 5 || head[0] != "VPE-MPOLY" || head[1] != "v1") {
    throw ParseError("mpoly file: expected 'VPE-MPOLY v1 modulus=<dec> n=<dec> d=<dec>'");
  }
  u64 modulus = text::keyed_decimal(head[2], "modulus");
  u64 n = text::keyed_decimal(head[3], "n");
  u64 d = text::keyed_decimal(head[4], "d");
  if (n == 0 || d == 0) throw ParseError("mpoly file: n and d must be positive");
  u64 count = 1;
  for (u64 i = 0; i < n; ++i) {
    if (!detail::checked_mul(count, d, count) || count > kMaxTableEntries) {
      throw ParseError("mpoly file: d^n too large");
    }
  }
  if (ls.size() != count + 1) throw ParseError("mpoly file: expected " + std::to_string(count) + " coefficients");
  PrimeModulus m(modulus);
  std::vector<u64> coeffs;
  coeffs.reserve(count);
  for (std::size_t i = 1; i < ls.size(); ++i) {
    u64 c = text::require_decimal(ls[i], "mpoly coefficient");
    if (c >= modulus) throw ParseError("mpoly file: coefficient not reduced modulo p");
    coeffs.push_back(c);
  }
  return MultiPoly(m, n, d, std::move(coeffs));
}

}  // namespace vpe
