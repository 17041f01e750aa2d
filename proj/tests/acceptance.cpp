// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "vpe/bench.hpp"
#include "vpe/lookup.hpp"
#include "vpe/multivar.hpp"
#include "vpe/protocol.hpp"
#include "vpe/simulate.hpp"
#include "vpe/wire.hpp"

using namespace vpe;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& why) {
    if (!ok && pass) {
      pass = false;
      detail = why;
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<std::size_t> path_of(std::size_t index, u64 ceta, u64 r) {
  std::vector<std::size_t> path(r);
  for (std::size_t k = r; k-- > 0;) {
    path[k] = index % ceta;
    index /= ceta;
  }
  return path;
}

const PrimeModulus kBig(kMersenne61);

// Every completed experiment in the transcript carries exactly `per` challenges.
bool challenges_per_experiment(const Transcript& t, u64 experiments, u64 per) {
  for (u64 e = 0; e < experiments; ++e) {
    if (t.challenges_in(e) != per) return false;
  }
  return true;
}

/* 1 */
Outcome oracle_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::size_t polys = 0, combos = 0, entries = 0, direct = 0;
  for (u64 d : {4, 16, 64, 256})
    for (u64 eta : {2, 4})
      for (u64 ceta : {3, 4, 8}) {
        if (ceta <= eta) continue;
        ++combos;
        auto params = derive_params(kBig, d, eta, ceta);
        const bool huge = params.table_size() > (u64{1} << 20);
        const int count = huge ? 2 : 7;
        for (int t = 0; t < count; ++t) {
          Polynomial f(kBig, random_residues(rng, kBig.value(), d));
          auto table = build_table(f, params);
          ++polys;
          if (table.size() <= 4096) {
            for (std::size_t i = 0; i < table.size(); ++i) {
              if (table.at(i) != naive_entry(f, params, path_of(i, ceta, params.r()))) {
                o.require(false, fmt("d=%llu eta=%llu ceta=%llu index %zu", (unsigned long long)d,
                                     (unsigned long long)eta, (unsigned long long)ceta, i));
              }
              ++direct;
            }
          } else {
            auto all = naive_table(f, params);
            for (std::size_t i = 0; i < table.size(); ++i) {
              if (table.at(i).value() != all[i]) o.require(false, fmt("naive_table differs at %zu", i));
            }
            for (int s = 0; s < 256; ++s) {
              std::size_t i = uniform_below(rng, table.size());
              if (table.at(i) != naive_entry(f, params, path_of(i, ceta, params.r()))) {
                o.require(false, fmt("sampled index %zu", i));
              }
              ++direct;
            }
          }
          entries += table.size();
        }
      }
  const double secs = seconds_since(t0);
  o.require(combos == 16, fmt("%zu parameter combinations, expected 16", combos));
  o.require(polys >= 100, fmt("only %zu polynomials", polys));
  o.require(secs < 60, fmt("took %.1f s", secs));
  if (o.pass) {
    o.detail = fmt("%zu combos, %zu polynomials, %zu entries (%zu via naive_entry), %.1f s", combos, polys, entries,
                   direct, secs);
  }
  return o;
}

/* 2 */
Outcome folding_identity() {
  Outcome o;
  std::mt19937_64 rng(102);
  std::size_t cases = 0, sets = 0;
  for (u64 p : {u64{97}, kMersenne61}) {
    PrimeModulus m(p);
    for (u64 len : {4, 16, 64, 256})
      for (u64 eta : {2, 4}) {
        ++sets;
        for (int t = 0; t < 1000; ++t) {
          Polynomial f(m, random_residues(rng, p, len));
          FieldElement x(t == 0 ? 0 : t == 1 ? 1 : uniform_below(rng, p), m);
          FieldElement xe = x.pow(eta), acc = FieldElement::zero(m);
          for (u64 s = 0; s < eta; ++s) acc += x.pow(s) * evaluate(stripe(f, s, eta), xe);
          if (acc != evaluate(f, x)) o.require(false, fmt("p=%llu len=%llu eta=%llu", (unsigned long long)p,
                                                          (unsigned long long)len, (unsigned long long)eta));
          ++cases;
        }
      }
  }
  if (o.pass) o.detail = fmt("%zu parameter sets, %zu cases", sets, cases);
  return o;
}

/* 3 */
Outcome completeness() {
  Outcome o;
  std::mt19937_64 rng(103);
  int accepted = 0;
  for (int t = 0; t < 1000; ++t) {
    u64 d = 1 + uniform_below(rng, 256);
    u64 eta = 2 + uniform_below(rng, 3);
    u64 ceta = eta + 1 + uniform_below(rng, eta);
    auto params = derive_params(kBig, d, eta, ceta);
    Polynomial f(kBig, random_residues(rng, kBig.value(), d));
    FieldElement x(uniform_below(rng, kBig.value()), kBig);
    auto table = build_table(f, params);
    auto res = run_protocol(f, params, x, HonestStrategy{}, rng(), table);
    bool ok = res.verdict.accepted &&
              std::get<msg::Claim>(res.transcript.records.front()).value == evaluate(f, x).value();
    if (!ok) o.require(false, "rejected: " + res.verdict.reason);
    accepted += ok;
  }
  o.detail = fmt("%d/1000 accepted", accepted);
  o.require(accepted == 1000, o.detail);
  return o;
}

// Shared by 4 and 5: eta=2, ceta=4, d=4, corrupt-min, 2*10^4 trials.
const SimulationReport& corrupt_min_report() {
  static const SimulationReport rep = [] {
    SimulationConfig cfg;
    cfg.degree = 4;
    cfg.eta = 2;
    cfg.c_eta = 4;
    cfg.strategy = WrongClaim{1, Policy::CorruptMin, 0};
    cfg.trials = 20000;
    cfg.seed = 104;
    return simulate(cfg);
  }();
  return rep;
}

/* 4 */
Outcome per_experiment_soundness() {
  Outcome o;
  const auto& rep = corrupt_min_report();
  o.require(rep.r == 2 && rep.m == 4, "unexpected r or m");
  const double rate = rep.experiment_rate();
  o.require(std::abs(rate - 0.4375) <= 0.02, fmt("per-experiment %.4f outside 0.4375 +- 0.02", rate));
  o.require(rate <= rep.soundness_bound(),
            fmt("per-experiment %.4f above soundness bound %.4f", rate, rep.soundness_bound()));

  // Exhaustive over every challenge pair at p=97.
  PrimeModulus m(97);
  auto params = derive_params(m, 4, 2, 4);
  Polynomial f(m, {1, 2, 3, 4});
  auto table = build_table(f, params);
  FieldElement x(2, m);
  int escapes = 0;
  for (std::size_t b1 = 0; b1 < 4; ++b1)
    for (std::size_t b2 = 0; b2 < 4; ++b2) {
      auto prover = make_prover(WrongClaim{1, Policy::CorruptMin, 0}, f, params, x);
      ScriptedChallenges coins({b1, b2});
      Verifier v(params, table, coins);
      v.set_point(x);
      v.start(prover->claim());
      escapes += run_experiment(*prover, v).accepted;
    }
  o.require(escapes == 7, fmt("exhaustive enumeration gives %d/16 escapes", escapes));
  if (o.pass) {
    o.detail = fmt("%.4f +- %.4f over %llu experiments, exhaustive %d/16, soundness bound %.2f", rate,
                   rep.experiment_sigma(), (unsigned long long)rep.experiments, escapes, rep.soundness_bound());
  }
  return o;
}

/* 5 */
Outcome amplified_soundness() {
  Outcome o;
  const auto& rep = corrupt_min_report();
  const double rate = rep.protocol_rate(), sigma = rep.protocol_sigma();
  o.require(rate <= 0.05, fmt("full-protocol acceptance %.4f > 0.05", rate));
  const double margin = (1.0 - rate - 0.5) / std::max(sigma, 1e-12);
  o.require(margin >= 5, fmt("rejection margin %.1f sigma", margin));

  // Same setting over TCP.
  PrimeModulus m(97);
  auto params = derive_params(m, 4, 2, 4);
  Polynomial f(m, {1, 2, 3, 4});
  auto table = build_table(f, params);
  auto ctx = std::make_shared<ProverContext>(f, params, WrongClaim{1, Policy::CorruptMin, 0});
  ProverServer server(ctx, parse_endpoint("127.0.0.1:0"));
  server.start();
  const int runs = 200;
  int rejects = 0;
  for (int i = 0; i < runs; ++i) {
    auto res = connect_verifier(params, table, FieldElement(2, m), Endpoint{"127.0.0.1", server.port()},
                                derive_seed(105, i));
    rejects += !res.verdict.accepted;
  }
  server.stop();
  const double wire_sigma = std::sqrt(0.25 / runs);
  const double reject_rate = static_cast<double>(rejects) / runs;
  o.require(rejects >= 70, fmt("%d/%d rejections over TCP", rejects, runs));
  o.require(reject_rate >= 0.5 - 3 * wire_sigma, fmt("TCP rejection rate %.3f below %.3f", reject_rate,
                                                     0.5 - 3 * wire_sigma));
  if (o.pass) {
    o.detail = fmt("acceptance %.4f +- %.4f (expected %.4f), rejection margin %.0f sigma; TCP %d/%d rejected", rate,
                   sigma, rep.tight_amplified(), margin, rejects, runs);
  }
  return o;
}

/* 6 */
Outcome round_complexity() {
  Outcome o;
  std::mt19937_64 rng(106);
  auto params = derive_params(kBig, u64{1} << 16, 16, 32);
  o.require(params.r() == 4, fmt("eta=16, d=2^16 gives r=%llu", (unsigned long long)params.r()));
  Polynomial f(kBig, random_residues(rng, kBig.value(), u64{1} << 16));
  auto table = build_table(f, params);
  FieldElement x(uniform_below(rng, kBig.value()), kBig);
  auto res = run_protocol(f, params, x, HonestStrategy{}, 1, table);
  o.require(res.verdict.accepted, "honest run at eta=16 rejected");
  o.require(challenges_per_experiment(res.transcript, params.m(), params.r()), "eta=16 challenge count");
  o.require(res.transcript.count<msg::Chal>() == params.m() * params.r(), "eta=16 total challenges");

  std::size_t transcripts = 1;
  for (int t = 0; t < 200; ++t) {
    u64 d = 1 + uniform_below(rng, 300);
    u64 eta = 2 + uniform_below(rng, 4);
    auto p = derive_params(kBig, d, eta, 2 * eta);
    Polynomial g(kBig, random_residues(rng, kBig.value(), d));
    auto tab = build_table(g, p);
    auto r = run_protocol(g, p, FieldElement(rng() % kBig.value(), kBig), HonestStrategy{}, rng(), tab);
    o.require(challenges_per_experiment(r.transcript, p.m(), p.r()), fmt("d=%llu eta=%llu", (unsigned long long)d,
                                                                         (unsigned long long)eta));
    ++transcripts;
  }
  if (o.pass) o.detail = fmt("eta=16 d=2^16: r=4, m=%llu; %zu transcripts checked", (unsigned long long)params.m(),
                             transcripts);
  return o;
}

/* 7 */
Outcome verifier_efficiency() {
  Outcome o;
  std::mt19937_64 rng(107);
  std::vector<double> normalized;
  std::string cols;
  for (u64 d : {16, 256, 4096}) {
    auto params = derive_params(kBig, d, 2, 4);
    Polynomial f(kBig, random_residues(rng, kBig.value(), d));
    auto table = build_table(f, params);
    FieldElement x(uniform_below(rng, kBig.value()), kBig);
    SessionCounters counters;
    auto res = run_protocol(f, params, x, HonestStrategy{}, rng(), table, &counters);
    o.require(res.verdict.accepted, "honest run rejected");
    for (const auto& rec : res.transcript.records) {
      if (auto* round = std::get_if<msg::Round>(&rec)) {
        o.require(round->values.size() <= params.eta(), "a round carried more than eta values");
      }
    }
    double per = static_cast<double>(counters.verifier.total()) / static_cast<double>(params.m() * params.r());
    normalized.push_back(per);
    cols += fmt(" d=%llu:%.2f", (unsigned long long)d, per);
  }
  auto [lo, hi] = std::minmax_element(normalized.begin(), normalized.end());
  o.require(*hi < 2 * *lo, "normalized verifier ops vary by 2x or more:" + cols);
  if (o.pass) o.detail = fmt("ops/(m*r)%s, spread %.2fx", cols.c_str(), *hi / *lo);
  return o;
}

/* 8 */
Outcome init_scaling() {
  Outcome o;
  std::mt19937_64 rng(108);
  double prev = 0;
  std::string cols;
  for (u64 r = 2; r <= 6; ++r) {
    u64 d = u64{1} << r;
    auto params = derive_params(kBig, d, 2, 4);
    BuildStats stats;
    build_table(Polynomial(kBig, random_residues(rng, kBig.value(), d)), params, {.stats = &stats});
    double cur = static_cast<double>(stats.ops.total());
    if (prev > 0) {
      double ratio = cur / prev;
      cols += fmt(" %.2f", ratio);
      o.require(std::abs(ratio - 4.0) <= 4.0 * 0.3, fmt("ratio %.2f at r=%llu", ratio, (unsigned long long)r));
    }
    prev = cur;
  }
  if (o.pass) o.detail = "consecutive ratios" + cols + " (target 4 +- 30%)";
  return o;
}

/* 9 */
Outcome multivariate() {
  Outcome o;
  std::mt19937_64 rng(109);
  std::size_t cases = 0, transcripts = 0;
  for (u64 n : {2, 3})
    for (u64 d : {2, 4}) {
      for (int t = 0; t < 250; ++t) {
        u64 len = 1;
        for (u64 k = 0; k < n; ++k) len *= d;
        MultiPoly f(kBig, n, d, random_residues(rng, kBig.value(), len));
        FieldElement x(t == 0 ? 0 : t == 1 ? 1 : uniform_below(rng, kBig.value()), kBig);
        std::vector<FieldElement> pt{x};
        for (u64 k = 1; k < n; ++k) pt.push_back(pt.back().pow(d));
        if (evaluate(univariate_embed(f), x) != mv_evaluate(f, pt)) o.require(false, "embedding mismatch");
        ++cases;
      }
      MvParams mp(kBig, n, d, 2, 4);
      for (int t = 0; t < 10; ++t) {
        u64 len = 1;
        for (u64 k = 0; k < n; ++k) len *= d;
        MultiPoly f(kBig, n, d, random_residues(rng, kBig.value(), len));
        std::vector<FieldElement> pt;
        for (u64 k = 0; k < n; ++k) pt.emplace_back(uniform_below(rng, kBig.value()), kBig);
        auto table = mv_build_table(f, mp);
        auto res = mv_run_protocol(f, mp, pt, HonestStrategy{}, rng(), table);
        o.require(res.verdict.accepted, "multivariate honest run rejected");
        o.require(challenges_per_experiment(res.transcript, mp.total().m(), n * mp.r_var()),
                  fmt("n=%llu d=%llu: challenge count is not n*r", (unsigned long long)n, (unsigned long long)d));
        ++transcripts;
      }
    }
  if (o.pass) o.detail = fmt("%zu evaluations, %zu transcripts with n*r challenges", cases, transcripts);
  return o;
}

/* 10 */
Outcome transport() {
  Outcome o;
  PrimeModulus m(97);
  std::mt19937_64 rng(110);
  auto params = derive_params(m, 16, 2, 3);
  Polynomial f(m, random_residues(rng, 97, 16));
  auto table = build_table(f, params);

  int identical = 0;
  for (u64 seed = 0; seed < 100; ++seed) {
    AdversaryStrategy strategy = HonestStrategy{};
    if (seed % 3 == 1) strategy = WrongClaim{1 + seed % 96, Policy::CorruptMin, seed};
    if (seed % 3 == 2) strategy = WrongClaim{1 + seed % 96, Policy::RandomConsistent, seed};
    auto ctx = std::make_shared<ProverContext>(f, params, strategy);
    FieldElement x(seed * 13 % 97, m);
    auto [a, b] = memory_pair();
    std::thread server([&, ch = b.get()] { serve_channel(ctx, *ch); });
    auto remote = connect_verifier(params, table, x, *a, seed);
    server.join();
    auto local = run_protocol(f, params, x, strategy, seed, table);
    identical += remote.transcript.to_text() == local.transcript.to_text() &&
                 remote.verdict.accepted == local.verdict.accepted && remote.verdict.reason == local.verdict.reason;
  }
  o.require(identical == 100, fmt("%d/100 loopback transcripts identical", identical));

  // Malformed input: never anything but a single ERROR line.
  auto ctx = std::make_shared<ProverContext>(f, params);
  const std::string hello = encode(msg::Hello{"v1", params_digest(params)});
  const char* verbs[] = {"HELLO", "EVAL", "CLAIM", "ROUND", "CHAL", "FINAL", "VERDICT", "ERROR", "", "X"};
  const std::string alphabet = "0123456789 abcdefvHELOCAR-\t\r\x01\xff";
  auto fuzz_line = [&] {
    std::string line;
    if (rng() % 2) {
      line = verbs[rng() % 10];
      for (std::size_t k = rng() % 5; k-- > 0;) {
        line += ' ';
        if (rng() % 4 == 0) {
          for (std::size_t j = rng() % 25; j-- > 0;) line += alphabet[rng() % alphabet.size()];
        } else {
          line += std::to_string(rng() >> (rng() % 64));
        }
      }
    } else {
      for (std::size_t j = rng() % 80; j-- > 0;) line += alphabet[rng() % alphabet.size()];
    }
    return line;
  };
  // A line is malformed unless it is the expected next step or a polite hang-up.
  auto malformed = [](const std::string& line, bool midway) {
    try {
      Message msg = decode(line);
      if (std::holds_alternative<msg::Error>(msg)) return false;
      if (midway && (std::holds_alternative<msg::Chal>(msg) || std::holds_alternative<msg::Verdict>(msg))) {
        return false;
      }
      return true;
    } catch (const DecodeError&) {
      return true;
    }
  };

  const auto t0 = Clock::now();
  std::size_t fed = 0, errors = 0;
  while (fed < 100000) {
    std::string line = fuzz_line();
    bool midway = rng() % 2;
    if (!malformed(line, midway)) continue;
    ProverSession s(ctx);
    if (midway) {
      s.on_line(hello);
      s.on_line("EVAL 2\n");
    }
    auto r = s.on_line(line);
    bool only_error = r.close && r.lines.size() == 1 && r.lines[0].rfind("ERROR ", 0) == 0;
    if (only_error) {
      try {
        only_error = std::holds_alternative<msg::Error>(decode(r.lines[0]));
      } catch (const DecodeError&) {
        only_error = false;
      }
    }
    errors += only_error;
    ++fed;
  }
  // A slice of them through real channels, to catch a hang in the serving loop.
  std::size_t channel_errors = 0;
  for (int i = 0; i < 2000; ++i) {
    std::string line;
    do line = fuzz_line();
    while (!malformed(line, false));
    auto [a, b] = memory_pair();
    std::thread server([&, ch = b.get()] { serve_channel(ctx, *ch); });
    a->send(line.empty() || line.back() != '\n' ? line + "\n" : line);
    auto reply = a->receive();
    channel_errors += reply && reply->rfind("ERROR ", 0) == 0;
    a->close();
    server.join();
  }
  const double secs = seconds_since(t0);
  o.require(errors == fed, fmt("%zu/%zu fuzzed lines answered with a lone ERROR", errors, fed));
  o.require(channel_errors == 2000, fmt("%zu/2000 channel sessions answered with ERROR", channel_errors));
  o.require(secs < 10, fmt("fuzzing took %.1f s", secs));
  if (o.pass) {
    o.detail = fmt("100/100 loopback transcripts identical; %zu malformed lines -> ERROR in %.1f s", fed + 2000, secs);
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "oracle equivalence", oracle_equivalence},
      {2, "folding identity", folding_identity},
      {3, "completeness", completeness},
      {4, "per-experiment soundness", per_experiment_soundness},
      {5, "amplified soundness", amplified_soundness},
      {6, "round complexity", round_complexity},
      {7, "verifier efficiency", verifier_efficiency},
      {8, "initialization scaling", init_scaling},
      {9, "multivariate equivalence", multivariate},
      {10, "transport transparency", transport},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s %2d %-26s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
