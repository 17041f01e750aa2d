#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "vpe/error.hpp"
#include "vpe/field.hpp"
#include "vpe/params.hpp"
#include "vpe/poly.hpp"
#include "vpe/text.hpp"

namespace vpe {

// Default ceiling on (c_eta)^r for anything that materializes a table.
inline constexpr u64 kMaxTableEntries = u64{1} << 24;

// Anything the verifier can consult for h(b_1, ..., b_r).
class TableSource {
 public:
  virtual ~TableSource() = default;
  virtual FieldElement entry(std::span<const std::size_t> path) const = 0;
  virtual const std::string& digest() const = 0;
};

/// The look-up table h, entries in lexicographic path order with b_1 most significant.
class LookupTable : public TableSource {
 public:
  LookupTable(const ProtocolParams& params, std::vector<u64> entries)
      : LookupTable(params.p(), params.d_input(), params.eta(), params.c_eta(), params.r(),
                    params_digest(params), std::move(entries)) {}

  LookupTable(u64 p, u64 d, u64 eta, u64 c_eta, u64 r, std::string digest, std::vector<u64> entries)
      : p_(p), d_(d), eta_(eta), c_eta_(c_eta), r_(r), digest_(std::move(digest)), entries_(std::move(entries)) {
    u64 expected = 1;
    for (u64 i = 0; i < r_; ++i) expected *= c_eta_;
    if (entries_.size() != expected) throw ValidationError("lookup table must hold (c_eta)^r entries");
  }

  u64 p() const { return p_; }
  u64 d_input() const { return d_; }
  u64 eta() const { return eta_; }
  u64 c_eta() const { return c_eta_; }
  u64 r() const { return r_; }
  std::size_t size() const { return entries_.size(); }
  const std::string& digest() const override { return digest_; }
  std::span<const u64> raw() const { return entries_; }

  std::size_t index_of(std::span<const std::size_t> path) const {
    if (path.size() != r_) throw std::out_of_range("lookup path must have r components");
    std::size_t idx = 0;
    for (std::size_t b : path) {
      if (b >= c_eta_) throw std::out_of_range("lookup path component out of range");
      idx = idx * c_eta_ + b;
    }
    return idx;
  }

  FieldElement entry(std::span<const std::size_t> path) const override {
    return FieldElement::raw(entries_[index_of(path)], p_);
  }
  FieldElement at(std::size_t index) const { return FieldElement::raw(entries_.at(index), p_); }

  // For tests that need a corrupted table.
  void overwrite(std::size_t index, u64 value) { entries_.at(index) = value % p_; }

  friend bool operator==(const LookupTable& a, const LookupTable& b) {
    return a.p_ == b.p_ && a.d_ == b.d_ && a.eta_ == b.eta_ && a.c_eta_ == b.c_eta_ && a.r_ == b.r_ &&
           a.digest_ == b.digest_ && a.entries_ == b.entries_;
  }

 private:
  u64 p_, d_, eta_, c_eta_, r_;
  std::string digest_;
  std::vector<u64> entries_;
};

// Throws DigestMismatch unless `table` was built for exactly `params`.
inline void check_binding(const TableSource& table, const ProtocolParams& params) {
  if (table.digest() != params_digest(params)) {
    throw DigestMismatch("lookup table was built for different parameters");
  }
}

struct BuildStats {
  OpCounts ops;
  std::size_t peak_live_coefficients = 0;
  std::size_t widest_level = 0;
};

struct BuildOptions {
  unsigned threads = 1;
  u64 max_entries = kMaxTableEntries;
  BuildStats* stats = nullptr;
};

namespace detail {

inline void check_poly_params(const Polynomial& f, const ProtocolParams& params) {
  if (f.modulus() != params.modulus()) throw ValidationError("polynomial/params modulus mismatch");
  if (f.size() > params.padded_length()) throw ValidationError("polynomial longer than eta^r");
}

// Expands one level: parent holds `nodes` blocks of `width` coefficients.
inline std::vector<u64> expand_level(const std::vector<u64>& parent, std::size_t nodes, std::size_t width,
                                     const ZTable& z, unsigned threads) {
  const std::size_t ceta = z.c_eta();
  const std::size_t child_width = width / z.eta();
  std::vector<u64> child(nodes * ceta * child_width);

  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t n = lo; n < hi; ++n) {
      std::span<const u64> block(parent.data() + n * width, width);
      for (std::size_t b = 0; b < ceta; ++b) {
        std::span<u64> out(child.data() + (n * ceta + b) * child_width, child_width);
        fold_into(block, b, z, out);
      }
    }
  };

  if (threads <= 1 || nodes < 2) {
    work(0, nodes);
    return child;
  }

  const unsigned t = static_cast<unsigned>(std::min<std::size_t>(threads, nodes));
  std::vector<OpCounts> local(t);
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (unsigned k = 0; k < t; ++k) {
    std::size_t lo = nodes * k / t, hi = nodes * (k + 1) / t;
    pool.emplace_back([&, lo, hi, k] {
      CountScope scope(local[k]);
      work(lo, hi);
    });
  }
  for (auto& th : pool) th.join();
  if (auto* sink = active_counts) {
    for (const auto& c : local) *sink += c;
  }
  return child;
}

}  // namespace detail

/// Initialization phase: breadth-first expansion of the coefficient tree,
/// keeping only the previous level alive. Leaves become the table entries.
inline LookupTable build_table(const Polynomial& f, const ProtocolParams& params, const BuildOptions& opts = {}) {
  detail::check_poly_params(f, params);
  if (params.table_size() > opts.max_entries) {
    throw ValidationError("table size (c_eta)^r = " + std::to_string(params.table_size()) +
                          " exceeds the limit of " + std::to_string(opts.max_entries));
  }

  BuildStats local_stats;
  OpCounts* outer = detail::active_counts;
  CountScope scope(local_stats.ops);

  ZTable z = lagrange_table(params);
  std::vector<u64> level(f.raw().begin(), f.raw().end());
  level.resize(params.padded_length(), 0);

  std::size_t nodes = 1;
  std::size_t width = level.size();
  local_stats.peak_live_coefficients = level.size();
  local_stats.widest_level = level.size();
  for (u64 l = 1; l <= params.r(); ++l) {
    std::vector<u64> next = detail::expand_level(level, nodes, width, z, opts.threads);
    local_stats.peak_live_coefficients = std::max(local_stats.peak_live_coefficients, level.size() + next.size());
    local_stats.widest_level = std::max(local_stats.widest_level, next.size());
    level = std::move(next);
    nodes *= params.c_eta();
    width /= params.eta();
  }

  if (opts.stats) *opts.stats = local_stats;
  if (outer) *outer += local_stats.ops;
  return LookupTable(params, std::move(level));
}

namespace detail {

// Z_s(beta) straight from the product formula over H.
inline FieldElement lagrange_weight(const ProtocolParams& params, u64 s, const FieldElement& beta) {
  FieldElement num = FieldElement::one(params.modulus());
  FieldElement den = FieldElement::one(params.modulus());
  for (u64 k = 0; k < params.eta(); ++k) {
    if (k == s) continue;
    num *= beta - params.alpha(k);
    den *= params.alpha(s) - params.alpha(k);
  }
  return num * den.inv();
}

}  // namespace detail

/// Independent oracle for a single entry. Applies the definition level by
/// level: f^(..,b) = sum_s Z_s(alpha_b) * stripe_s(f^(..)), without the
/// table builder's kernel or Z table.
inline FieldElement naive_entry(const Polynomial& f, const ProtocolParams& params,
                                std::span<const std::size_t> path) {
  if (path.size() != params.r()) throw ValidationError("naive_entry: path must have r components");
  for (std::size_t b : path) {
    if (b >= params.c_eta()) throw ValidationError("naive_entry: path component out of range");
  }
  Polynomial cur = pad_to(f, params);
  for (std::size_t b : path) {
    std::vector<FieldElement> next(cur.size() / params.eta(), FieldElement::zero(params.modulus()));
    for (u64 s = 0; s < params.eta(); ++s) {
      FieldElement w = detail::lagrange_weight(params, s, params.alpha(b));
      Polynomial part = stripe(cur, s, params);
      for (std::size_t i = 0; i < next.size(); ++i) next[i] += w * part.coeff(i);
    }
    cur = Polynomial::from_elements(next);
  }
  return cur.coeff(0);
}

/// naive_entry for every path at once, sharing prefixes depth-first. Same
/// arithmetic as naive_entry; only the repeated prefix work is skipped.
inline std::vector<u64> naive_table(const Polynomial& f, const ProtocolParams& params,
                                    u64 max_entries = kMaxTableEntries) {
  if (params.table_size() > max_entries) throw ValidationError("naive_table: table exceeds size limit");
  const u64 eta = params.eta(), ceta = params.c_eta();
  std::vector<std::vector<FieldElement>> w(eta);
  for (u64 s = 0; s < eta; ++s)
    for (u64 b = 0; b < ceta; ++b) w[s].push_back(detail::lagrange_weight(params, s, params.alpha(b)));

  std::vector<u64> out;
  out.reserve(params.table_size());
  auto descend = [&](auto&& self, const Polynomial& cur, u64 level) -> void {
    if (level == params.r()) {
      out.push_back(cur.coeff(0).value());
      return;
    }
    std::vector<Polynomial> stripes;
    for (u64 s = 0; s < eta; ++s) stripes.push_back(stripe(cur, s, params));
    for (u64 b = 0; b < ceta; ++b) {
      std::vector<FieldElement> next(cur.size() / eta, FieldElement::zero(params.modulus()));
      for (u64 s = 0; s < eta; ++s)
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += w[s][b] * stripes[s].coeff(i);
      self(self, Polynomial::from_elements(next), level + 1);
    }
  };
  descend(descend, pad_to(f, params), 0);
  return out;
}

/// The full tree of folded coefficient vectors, every level retained. Lets an
/// honest prover skip the folding work during the evaluation phase.
class CoefficientTree {
 public:
  CoefficientTree(const Polynomial& f, const ProtocolParams& params, const ZTable& z,
                  u64 max_entries = kMaxTableEntries)
      : eta_(params.eta()), c_eta_(params.c_eta()), p_(params.p()) {
    detail::check_poly_params(f, params);
    if (params.table_size() > max_entries) throw ValidationError("coefficient tree exceeds size limit");
    std::vector<u64> level(f.raw().begin(), f.raw().end());
    level.resize(params.padded_length(), 0);
    std::size_t nodes = 1, width = level.size();
    levels_.push_back(level);
    widths_.push_back(width);
    for (u64 l = 1; l <= params.r(); ++l) {
      levels_.push_back(detail::expand_level(levels_.back(), nodes, width, z, 1));
      nodes *= c_eta_;
      width /= eta_;
      widths_.push_back(width);
    }
  }

  std::size_t depth() const { return levels_.size() - 1; }
  std::size_t width(std::size_t level) const { return widths_.at(level); }

  // Coefficients a^(b_1..b_l) for the node with lexicographic index `node` at `level`.
  std::span<const u64> node(std::size_t level, std::size_t node) const {
    const auto& lv = levels_.at(level);
    std::size_t w = widths_[level];
    if ((node + 1) * w > lv.size()) throw std::out_of_range("coefficient tree node");
    return {lv.data() + node * w, w};
  }

  u64 p() const { return p_; }
  u64 c_eta() const { return c_eta_; }

 private:
  u64 eta_, c_eta_, p_;
  std::vector<std::vector<u64>> levels_;
  std::vector<std::size_t> widths_;
};

/* -------------------------------------------------------------------- *
 *  Table file                                                           *
 * -------------------------------------------------------------------- */

inline std::string serialize_table(const LookupTable& t) {
  std::string out = "VPE-TABLE v1 modulus=" + std::to_string(t.p()) + " d=" + std::to_string(t.d_input()) +
                    " eta=" + std::to_string(t.eta()) + " ceta=" + std::to_string(t.c_eta()) +
                    " r=" + std::to_string(t.r()) + " digest=" + t.digest() + "\n";
  out.reserve(out.size() + t.size() * 12);
  for (u64 v : t.raw()) {
    out += std::to_string(v);
    out += '\n';
  }
  return out;
}

inline LookupTable parse_table(std::string_view body) {
  auto ls = text::lines(body);
  if (ls.empty()) throw ParseError("table file: empty");
  auto head = text::split(ls[0]);
  if (head.size() != 8 || head[0] != "VPE-TABLE" || head[1] != "v1") {
    throw ParseError("table file: malformed header");
  }
  u64 p = text::keyed_decimal(head[2], "modulus");
  u64 d = text::keyed_decimal(head[3], "d");
  u64 eta = text::keyed_decimal(head[4], "eta");
  u64 ceta = text::keyed_decimal(head[5], "ceta");
  u64 r = text::keyed_decimal(head[6], "r");
  if (head[7].substr(0, 7) != "digest=" || !is_digest_hex(head[7].substr(7))) {
    throw ParseError("table file: malformed digest");
  }
  std::string digest(head[7].substr(7));
  if (ceta < 2 || r == 0) throw ParseError("table file: invalid ceta/r");
  u64 lambda = 1;
  for (u64 i = 0; i < r; ++i) {
    if (!detail::checked_mul(lambda, ceta, lambda) || lambda > kMaxTableEntries) {
      throw ParseError("table file: declared size too large");
    }
  }
  if (ls.size() != lambda + 1) throw ParseError("table file: expected " + std::to_string(lambda) + " entries");
  std::vector<u64> entries;
  entries.reserve(lambda);
  for (std::size_t i = 1; i < ls.size(); ++i) {
    u64 v = text::require_decimal(ls[i], "table entry");
    if (v >= p) throw ParseError("table file: entry not reduced modulo p");
    entries.push_back(v);
  }
  return LookupTable(p, d, eta, ceta, r, std::move(digest), std::move(entries));
}

// Parses and checks the digest against `params`.
inline LookupTable parse_table(std::string_view body, const ProtocolParams& params) {
  LookupTable t = parse_table(body);
  check_binding(t, params);
  return t;
}

}  // namespace vpe
