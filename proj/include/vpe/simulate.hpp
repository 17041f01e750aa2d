#pragma once

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "vpe/error.hpp"
#include "vpe/lookup.hpp"
#include "vpe/params.hpp"
#include "vpe/poly.hpp"
#include "vpe/protocol.hpp"
#include "vpe/random.hpp"

namespace vpe {

inline constexpr u64 kMaxSimulationTable = u64{1} << 20;

struct SimulationConfig {
  u64 degree = 4;
  u64 eta = 2;
  u64 c_eta = 4;
  AdversaryStrategy strategy = WrongClaim{};
  u64 trials = 20000;
  u64 seed = 0;
  u64 modulus = kMersenne61;
  unsigned threads = 1;
};

struct SimulationReport {
  std::string strategy;
  u64 degree = 0, eta = 0, c_eta = 0, r = 0, m = 0, modulus = 0;
  u64 trials = 0;
  u64 seed = 0;
  u64 experiments = 0;      // trials * m
  u64 experiment_accepts = 0;
  u64 protocol_accepts = 0;  // trials with all m experiments accepted

  double experiment_rate() const { return ratio(experiment_accepts, experiments); }
  double experiment_sigma() const { return sigma(experiment_rate(), experiments); }
  double protocol_rate() const { return ratio(protocol_accepts, trials); }
  double protocol_sigma() const { return sigma(protocol_rate(), trials); }

  // 1 - (1 - 1/c)^r
  double soundness_bound() const { return 1.0 - std::pow(1.0 - static_cast<double>(eta) / c_eta, r); }
  double amplified_bound() const { return std::pow(soundness_bound(), static_cast<double>(m)); }
  // 1 - (1 - (eta-1)/c_eta)^r: what the single-corruption adversary achieves.
  double tight_bound() const { return 1.0 - std::pow(1.0 - static_cast<double>(eta - 1) / c_eta, r); }
  double tight_amplified() const { return std::pow(tight_bound(), static_cast<double>(m)); }

  std::string to_text() const {
    char buf[1024];
    std::snprintf(buf, sizeof buf,
                  "strategy            %s\n"
                  "params              d=%llu eta=%llu ceta=%llu r=%llu m=%llu modulus=%llu\n"
                  "trials              %llu (seed %llu)\n"
                  "per-experiment      %.5f +- %.5f  (%llu/%llu)\n"
                  "full protocol       %.5f +- %.5f  (%llu/%llu)\n"
                  "soundness bound     %.5f  amplified %.5f\n"
                  "single-corruption   %.5f  amplified %.5f\n",
                  strategy.c_str(), ull(degree), ull(eta), ull(c_eta), ull(r), ull(m), ull(modulus), ull(trials),
                  ull(seed), experiment_rate(), experiment_sigma(), ull(experiment_accepts), ull(experiments),
                  protocol_rate(), protocol_sigma(), ull(protocol_accepts), ull(trials), soundness_bound(),
                  amplified_bound(), tight_bound(), tight_amplified());
    return buf;
  }

 private:
  static unsigned long long ull(u64 v) { return v; }
  static double ratio(u64 a, u64 b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; }
  static double sigma(double p, u64 n) { return n ? std::sqrt(p * (1 - p) / static_cast<double>(n)) : 0.0; }
};

namespace detail {

struct TrialTally {
  u64 experiment_accepts = 0;
  u64 protocol_accepts = 0;
};

// All m experiments of one trial, none skipped after a reject.
inline TrialTally run_trial(const Polynomial& f, const ProtocolParams& params, const FieldElement& x,
                            const AdversaryStrategy& strategy, const LookupTable& table, u64 trial_seed) {
  SeededChallenges coins(trial_seed);
  Verifier verifier(params, table, coins);
  verifier.set_point(x);
  TrialTally t;
  bool all = true;
  for (u64 e = 0; e < params.m(); ++e) {
    AdversaryStrategy s = strategy;
    if (auto* w = std::get_if<WrongClaim>(&s)) w->seed = derive_seed(trial_seed, e + 1);
    auto prover = make_prover(s, f, params, x);
    if (e == 0) verifier.start(prover->claim());
    bool ok = run_experiment(*prover, verifier).accepted;
    t.experiment_accepts += ok;
    all = all && ok;
  }
  t.protocol_accepts = all;
  return t;
}

}  // namespace detail

/// Monte-Carlo soundness experiment: one random f and x drawn from the seed,
/// a fixed claim, fresh verifier coins per trial.
inline SimulationReport simulate(const SimulationConfig& cfg) {
  if (cfg.trials == 0) throw ValidationError("simulate: trials must be positive");
  PrimeModulus mod(cfg.modulus);
  auto params = derive_params(mod, cfg.degree, cfg.eta, cfg.c_eta);
  if (params.table_size() > kMaxSimulationTable) {
    throw ValidationError("simulate: table size " + std::to_string(params.table_size()) + " exceeds the limit of " +
                          std::to_string(kMaxSimulationTable));
  }
  std::mt19937_64 rng(derive_seed(cfg.seed, 0));
  Polynomial f(mod, random_residues(rng, mod.value(), cfg.degree));
  FieldElement x(uniform_below(rng, mod.value()), mod);
  LookupTable table = build_table(f, params);

  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.trials)));
  std::vector<detail::TrialTally> tallies(threads);
  auto work = [&](unsigned k) {
    for (u64 t = k; t < cfg.trials; t += threads) {
      auto one = detail::run_trial(f, params, x, cfg.strategy, table, derive_seed(cfg.seed, t + 1));
      tallies[k].experiment_accepts += one.experiment_accepts;
      tallies[k].protocol_accepts += one.protocol_accepts;
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(work, k);
    for (auto& th : pool) th.join();
  }

  SimulationReport rep;
  rep.strategy = strategy_name(cfg.strategy);
  rep.degree = cfg.degree;
  rep.eta = params.eta();
  rep.c_eta = params.c_eta();
  rep.r = params.r();
  rep.m = params.m();
  rep.modulus = mod.value();
  rep.trials = cfg.trials;
  rep.seed = cfg.seed;
  rep.experiments = cfg.trials * params.m();
  for (const auto& t : tallies) {
    rep.experiment_accepts += t.experiment_accepts;
    rep.protocol_accepts += t.protocol_accepts;
  }
  return rep;
}

}  // namespace vpe
