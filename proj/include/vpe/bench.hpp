#pragma once

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "vpe/error.hpp"
#include "vpe/lookup.hpp"
#include "vpe/params.hpp"
#include "vpe/poly.hpp"
#include "vpe/protocol.hpp"
#include "vpe/random.hpp"

namespace vpe {

struct BenchRow {
  u64 degree = 0, r = 0, m = 0, table_size = 0;
  OpCounts init, prover, verifier;
  bool accepted = false;

  // Verifier work per challenge round and per value read.
  double verifier_per_round() const {
    return static_cast<double>(verifier.mul + verifier.add) / static_cast<double>(m * r);
  }
};

struct OpCountReport {
  u64 eta = 0, c_eta = 0, modulus = 0, seed = 0;
  std::vector<BenchRow> rows;

  static double ratio(u64 a, u64 b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; }

  std::string to_text() const {
    std::string out;
    char buf[512];
    std::snprintf(buf, sizeof buf, "eta=%llu ceta=%llu modulus=%llu seed=%llu\n", ull(eta), ull(c_eta), ull(modulus),
                  ull(seed));
    out += buf;
    std::snprintf(buf, sizeof buf, "%8s %3s %5s %10s | %12s %12s | %11s %11s | %8s %8s %9s | %6s %6s\n", "d", "r",
                  "m", "lambda", "init.mul", "init.add", "prover.mul", "prover.add", "ver.mul", "ver.add",
                  "ver/(m*r)", "x.init", "x.prov");
    out += buf;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const BenchRow& r = rows[i];
      std::string ri = "-", rp = "-";
      if (i > 0) {
        char tmp[32];
        std::snprintf(tmp, sizeof tmp, "%.2f", ratio(r.init.mul, rows[i - 1].init.mul));
        ri = tmp;
        std::snprintf(tmp, sizeof tmp, "%.2f", ratio(r.prover.mul, rows[i - 1].prover.mul));
        rp = tmp;
      }
      std::snprintf(buf, sizeof buf, "%8llu %3llu %5llu %10llu | %12llu %12llu | %11llu %11llu | %8llu %8llu %9.2f | %6s %6s\n",
                    ull(r.degree), ull(r.r), ull(r.m), ull(r.table_size), ull(r.init.mul), ull(r.init.add),
                    ull(r.prover.mul), ull(r.prover.add), ull(r.verifier.mul), ull(r.verifier.add),
                    r.verifier_per_round(), ri.c_str(), rp.c_str());
      out += buf;
    }
    return out;
  }

 private:
  static unsigned long long ull(u64 v) { return v; }
};

/// Counted field operations of initialization, an honest prover and the
/// verifier for each degree (which must be a power of eta).
inline OpCountReport bench(const std::vector<u64>& degrees, u64 eta, u64 c_eta, u64 seed,
                           u64 modulus = kMersenne61, u64 max_entries = kMaxTableEntries) {
  PrimeModulus mod(modulus);
  OpCountReport rep;
  rep.eta = eta;
  rep.c_eta = c_eta;
  rep.modulus = modulus;
  rep.seed = seed;
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    const u64 d = degrees[i];
    auto params = derive_params(mod, d, eta, c_eta);
    if (params.padded_length() != d) {
      throw ValidationError("bench: degree " + std::to_string(d) + " is not a power of eta");
    }
    if (params.table_size() > max_entries) {
      throw ValidationError("bench: table size " + std::to_string(params.table_size()) + " exceeds the limit of " +
                            std::to_string(max_entries));
    }
    std::mt19937_64 rng(derive_seed(seed, i));
    Polynomial f(mod, random_residues(rng, mod.value(), d));
    FieldElement x(uniform_below(rng, mod.value()), mod);

    BenchRow row;
    row.degree = d;
    row.r = params.r();
    row.m = params.m();
    row.table_size = params.table_size();
    LookupTable table = [&] {
      CountScope s(row.init);
      return build_table(f, params);
    }();
    SessionCounters counters;
    auto res = run_protocol(f, params, x, HonestStrategy{}, derive_seed(seed, 1000 + i), table, &counters);
    row.prover = counters.prover;
    row.verifier = counters.verifier;
    row.accepted = res.verdict.accepted;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace vpe
