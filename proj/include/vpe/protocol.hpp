#pragma once

#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vpe/error.hpp"
#include "vpe/field.hpp"
#include "vpe/lookup.hpp"
#include "vpe/message.hpp"
#include "vpe/params.hpp"
#include "vpe/poly.hpp"
#include "vpe/random.hpp"

namespace vpe {

struct Verdict {
  bool accepted = false;
  std::string reason;  // ok | check | final | final-mismatch
  std::optional<u64> experiment;
  std::optional<u64> level;  // 1-based round for "check"

  msg::Verdict message() const { return {accepted, reason}; }
};

/* -------------------------------------------------------------------- *
 *  Provers                                                              *
 * -------------------------------------------------------------------- */

/// The prover side of one session. An experiment is r calls of round() /
/// accept_challenge() followed by final_value(), which rewinds to level 0.
class Prover {
 public:
  virtual ~Prover() = default;
  virtual FieldElement claim() const = 0;
  // Point whose powers weight this round's values in the verifier's check.
  virtual FieldElement round_point() const = 0;
  virtual std::vector<FieldElement> round() = 0;
  virtual void accept_challenge(std::size_t b) = 0;
  virtual FieldElement final_value() = 0;
};

class HonestProver : public Prover {
 public:
  HonestProver(const Polynomial& f, const ProtocolParams& params, const FieldElement& x,
               std::shared_ptr<const CoefficientTree> tree = nullptr)
      : params_(params),
        z_(lagrange_table(params)),
        base_(pad_to(f, params)),
        x_(x),
        tree_(std::move(tree)) {
    if (x.modulus_value() != params.p()) throw ModulusMismatch();
    claim_ = evaluate(base_, x_);
    rewind();
  }

  FieldElement claim() const override { return claim_; }
  FieldElement round_point() const override { return point_; }
  std::size_t level() const { return level_; }

  // Coefficients of f^(b_1..b_l) for the current level.
  std::span<const u64> current() const {
    return tree_ ? tree_->node(level_, node_) : std::span<const u64>(current_);
  }

  std::vector<FieldElement> round() override {
    if (level_ >= params_.r()) throw ProtocolError("prover: no rounds left in this experiment");
    const u64 p = params_.p(), eta = params_.eta();
    next_point_ = arith::pow(point_.value(), eta, p);
    auto coeffs = current();
    std::vector<FieldElement> values;
    values.reserve(eta);
    for (u64 s = 0; s < eta; ++s) {
      values.push_back(FieldElement::raw(horner_strided(coeffs, s, eta, next_point_, p), p));
    }
    have_next_point_ = true;
    return values;
  }

  void accept_challenge(std::size_t b) override {
    if (b >= params_.c_eta()) throw ProtocolError("prover: challenge out of range");
    if (level_ >= params_.r()) throw ProtocolError("prover: challenge past the last level");
    if (tree_) {
      node_ = node_ * params_.c_eta() + b;
    } else {
      std::vector<u64> next(current_.size() / params_.eta());
      detail::fold_into(current_, b, z_, next);
      current_ = std::move(next);
    }
    if (!have_next_point_) next_point_ = arith::pow(point_.value(), params_.eta(), params_.p());
    point_ = FieldElement::raw(next_point_, params_.p());
    have_next_point_ = false;
    ++level_;
  }

  FieldElement final_value() override {
    if (level_ != params_.r()) throw ProtocolError("prover: experiment not complete");
    FieldElement v = FieldElement::raw(current()[0], params_.p());
    rewind();
    return v;
  }

 private:
  void rewind() {
    level_ = 0;
    node_ = 0;
    point_ = x_;
    have_next_point_ = false;
    if (!tree_) current_.assign(base_.raw().begin(), base_.raw().end());
  }

  ProtocolParams params_;
  ZTable z_;
  Polynomial base_;
  FieldElement x_;
  FieldElement claim_ = x_;
  FieldElement point_ = x_;
  u64 next_point_ = 0;
  bool have_next_point_ = false;
  std::shared_ptr<const CoefficientTree> tree_;
  std::vector<u64> current_;
  std::size_t node_ = 0;
  std::size_t level_ = 0;
};

enum class Policy {
  CorruptMin,        // shift stripe 0 by the running error; error dies only on alpha_1..alpha_{eta-1}
  RandomConsistent,  // random values for stripes 1.., stripe 0 solves the check
};

struct HonestStrategy {};
struct WrongClaim {
  u64 delta = 1;
  Policy policy = Policy::CorruptMin;
  u64 seed = 0;
};
using AdversaryStrategy = std::variant<HonestStrategy, WrongClaim>;

inline std::string strategy_name(const AdversaryStrategy& s) {
  if (std::holds_alternative<HonestStrategy>(s)) return "honest";
  return std::get<WrongClaim>(s).policy == Policy::CorruptMin ? "corrupt-min" : "random-consistent";
}

/// Claims f(x) + delta and afterwards answers every round so that the
/// verifier's linear check passes. It tracks the difference `error_` between
/// the verifier's running reference and the truth; once a challenge lands on
/// a point where the two interpolants agree the error is gone and it plays
/// honestly for the rest of the experiment.
class AdversarialProver : public Prover {
 public:
  AdversarialProver(std::unique_ptr<Prover> honest, const ZTable& z, const WrongClaim& cfg)
      : honest_(std::move(honest)), z_(z), cfg_(cfg), rng_(cfg.seed) {
    const u64 p = z_.p();
    if (cfg.delta % p == 0) throw ValidationError("adversary delta must be nonzero in the field");
    delta_ = cfg.delta % p;
    error_ = delta_;
  }

  FieldElement claim() const override {
    FieldElement c = honest_->claim();
    return c + FieldElement::raw(delta_, c.modulus_value());
  }
  FieldElement round_point() const override { return honest_->round_point(); }

  std::vector<FieldElement> round() override {
    const u64 p = z_.p();
    FieldElement x = honest_->round_point();
    std::vector<FieldElement> truth = honest_->round();
    std::vector<FieldElement> sent = truth;
    if (error_ != 0) {
      if (cfg_.policy == Policy::CorruptMin) {
        sent[0] = truth[0] + FieldElement::raw(error_, p);
      } else {
        // sum_s x^s (sent_s - truth_s) must equal error_
        u64 shift = 0, xs = 1;
        for (std::size_t s = 1; s < sent.size(); ++s) {
          xs = arith::mul(xs, x.value(), p);
          sent[s] = FieldElement::raw(uniform_below(rng_, p), p);
          shift = arith::add(shift, arith::mul(xs, arith::sub(sent[s].value(), truth[s].value(), p), p), p);
        }
        sent[0] = truth[0] + FieldElement::raw(arith::sub(error_, shift, p), p);
      }
    }
    diff_.resize(sent.size());
    for (std::size_t s = 0; s < sent.size(); ++s) diff_[s] = arith::sub(sent[s].value(), truth[s].value(), p);
    return sent;
  }

  void accept_challenge(std::size_t b) override {
    const u64 p = z_.p();
    if (b >= z_.c_eta()) throw ProtocolError("prover: challenge out of range");
    u64 e = 0;
    for (std::size_t s = 0; s < diff_.size(); ++s) e = arith::add(e, arith::mul(z_.raw(s, b), diff_[s], p), p);
    error_ = e;
    honest_->accept_challenge(b);
  }

  FieldElement final_value() override {
    FieldElement v = honest_->final_value() + FieldElement::raw(error_, z_.p());
    error_ = delta_;
    return v;
  }

 private:
  std::unique_ptr<Prover> honest_;
  ZTable z_;
  WrongClaim cfg_;
  std::mt19937_64 rng_;
  u64 delta_ = 0;
  u64 error_ = 0;
  std::vector<u64> diff_;
};

inline std::unique_ptr<Prover> make_prover(const AdversaryStrategy& strategy, const Polynomial& f,
                                           const ProtocolParams& params, const FieldElement& x,
                                           std::shared_ptr<const CoefficientTree> tree = nullptr) {
  auto honest = std::make_unique<HonestProver>(f, params, x, std::move(tree));
  if (auto* w = std::get_if<WrongClaim>(&strategy)) {
    return std::make_unique<AdversarialProver>(std::move(honest), lagrange_table(params), *w);
  }
  return honest;
}

/* -------------------------------------------------------------------- *
 *  Verifier                                                             *
 * -------------------------------------------------------------------- */

/// Verifier state machine for m experiments against a single claim.
/// An experiment ends on the first failed check (reject) or after the final
/// comparison with the look-up table.
class Verifier {
 public:
  Verifier(const ProtocolParams& params, const TableSource& table, ChallengeSource& coins)
      : params_(params), z_(lagrange_table(params)), table_(table), coins_(coins) {
    check_binding(table, params);
  }

  // Univariate schedule: the weight point at level l is x^(eta^l).
  void set_point(const FieldElement& x) {
    if (x.modulus_value() != params_.p()) throw ModulusMismatch();
    schedule_.clear();
    schedule_.push_back(x);
    for (u64 l = 1; l < params_.r(); ++l) schedule_.push_back(schedule_.back().pow(params_.eta()));
  }

  // Arbitrary schedule of r weight points (used for multivariate reduction).
  void set_schedule(std::vector<FieldElement> points) {
    if (points.size() != params_.r()) throw ValidationError("schedule must have r points");
    for (const auto& pt : points)
      if (pt.modulus_value() != params_.p()) throw ModulusMismatch();
    schedule_ = std::move(points);
  }

  void start(const FieldElement& claim) {
    if (schedule_.empty()) throw ValidationError("verifier: evaluation point not set");
    if (claim.modulus_value() != params_.p()) throw ModulusMismatch();
    claim_ = claim;
    experiment_ = 0;
    started_ = true;
    reset_experiment();
  }

  /// Linear check of one round. Returns the challenge b_l, or a reject verdict.
  std::variant<std::size_t, Verdict> check_round(std::span<const FieldElement> values) {
    require_active();
    if (level_ >= params_.r()) throw ProtocolError("verifier: all rounds of this experiment are done");
    if (values.size() != params_.eta()) throw ProtocolError("verifier: expected exactly eta values");
    const u64 p = params_.p();
    for (const auto& v : values)
      if (v.modulus_value() != p) throw ModulusMismatch();
    values_read_ += values.size();

    const u64 x = schedule_[level_].value();
    u64 acc = values.back().value();
    for (std::size_t s = values.size() - 1; s-- > 0;) acc = arith::add(arith::mul(acc, x, p), values[s].value(), p);
    if (acc != reference_.value()) {
      Verdict v{false, "check", experiment_, level_ + 1};
      close_experiment();
      return v;
    }

    std::size_t b = coins_.draw(params_.c_eta());
    reference_ = interpolate_eval(values, b, z_);
    path_.push_back(b);
    ++level_;
    return b;
  }

  /// Compares the prover's final constant with the running reference and the
  /// stored table entry.
  Verdict finalize(const FieldElement& prover_final) {
    require_active();
    if (level_ != params_.r()) throw ProtocolError("verifier: experiment has rounds left");
    if (prover_final.modulus_value() != params_.p()) throw ModulusMismatch();
    Verdict v{true, "ok", experiment_, std::nullopt};
    if (prover_final.value() != reference_.value()) {
      v = {false, "final-mismatch", experiment_, std::nullopt};
    } else if (table_.entry(path_).value() != reference_.value()) {
      v = {false, "final", experiment_, std::nullopt};
    }
    close_experiment();
    return v;
  }

  bool finished() const { return started_ && experiment_ >= params_.m(); }
  u64 experiment() const { return experiment_; }
  u64 level() const { return level_; }
  const std::vector<std::size_t>& path() const { return path_; }
  const FieldElement& reference() const { return reference_; }
  std::size_t values_read() const { return values_read_; }
  const ProtocolParams& params() const { return params_; }

 private:
  void require_active() const {
    if (!started_) throw ValidationError("verifier: start() not called");
    if (finished()) throw ProtocolError("verifier: all experiments done");
  }
  void reset_experiment() {
    level_ = 0;
    path_.clear();
    reference_ = claim_;
  }
  void close_experiment() {
    ++experiment_;
    reset_experiment();
  }

  ProtocolParams params_;
  ZTable z_;
  const TableSource& table_;
  ChallengeSource& coins_;
  std::vector<FieldElement> schedule_;
  FieldElement claim_ = FieldElement::zero(params_.modulus());
  FieldElement reference_ = claim_;
  std::vector<std::size_t> path_;
  u64 experiment_ = 0;
  u64 level_ = 0;
  bool started_ = false;
  std::size_t values_read_ = 0;
};

/* -------------------------------------------------------------------- *
 *  In-process sessions                                                  *
 * -------------------------------------------------------------------- */

struct SessionCounters {
  OpCounts prover;
  OpCounts verifier;
};

struct SessionResult {
  Verdict verdict;
  Transcript transcript;
};

namespace detail {

inline std::vector<u64> raw_values(std::span<const FieldElement> v) {
  std::vector<u64> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(e.value());
  return out;
}

}  // namespace detail

/// Runs the verifier's current experiment to completion against `prover`.
inline Verdict run_experiment(Prover& prover, Verifier& verifier, Transcript* log = nullptr,
                              SessionCounters* counters = nullptr) {
  OpCounts scratch_p, scratch_v;
  OpCounts& pc = counters ? counters->prover : scratch_p;
  OpCounts& vc = counters ? counters->verifier : scratch_v;
  const u64 e = verifier.experiment();
  const u64 r = verifier.params().r();
  for (u64 l = 1; l <= r; ++l) {
    std::vector<FieldElement> values;
    {
      CountScope s(pc);
      values = prover.round();
    }
    if (log) log->add(msg::Round{e, l, detail::raw_values(values)});
    std::variant<std::size_t, Verdict> out;
    {
      CountScope s(vc);
      out = verifier.check_round(values);
    }
    if (auto* v = std::get_if<Verdict>(&out)) return *v;
    std::size_t b = std::get<std::size_t>(out);
    if (log) log->add(msg::Chal{e, l, b});
    CountScope s(pc);
    prover.accept_challenge(b);
  }
  FieldElement fin = [&] {
    CountScope s(pc);
    return prover.final_value();
  }();
  if (log) log->add(msg::Final{e, fin.value()});
  CountScope s(vc);
  return verifier.finalize(fin);
}

/// Claim, then up to m experiments; stops at the first rejection.
inline SessionResult run_session(Prover& prover, Verifier& verifier, SessionCounters* counters = nullptr) {
  SessionResult res;
  FieldElement claim = prover.claim();
  res.transcript.add(msg::Claim{claim.value()});
  {
    OpCounts scratch;
    CountScope s(counters ? counters->verifier : scratch);
    verifier.start(claim);
  }
  res.verdict = {true, "ok", std::nullopt, std::nullopt};
  while (!verifier.finished()) {
    Verdict v = run_experiment(prover, verifier, &res.transcript, counters);
    if (!v.accepted) {
      res.verdict = v;
      break;
    }
  }
  res.transcript.add(res.verdict.message());
  return res;
}

/// Full evaluation phase for f at x. The prover (honest or adversarial) is
/// constructed inside; challenges come from a generator seeded with `seed`.
inline SessionResult run_protocol(const Polynomial& f, const ProtocolParams& params, const FieldElement& x,
                                  const AdversaryStrategy& strategy, u64 seed, const TableSource& table,
                                  SessionCounters* counters = nullptr,
                                  std::shared_ptr<const CoefficientTree> tree = nullptr) {
  std::unique_ptr<Prover> prover;
  {
    OpCounts scratch;
    CountScope s(counters ? counters->prover : scratch);
    prover = make_prover(strategy, f, params, x, std::move(tree));
  }
  SeededChallenges coins(seed);
  Verifier verifier(params, table, coins);
  {
    OpCounts scratch;
    CountScope s(counters ? counters->verifier : scratch);
    verifier.set_point(x);
  }
  return run_session(*prover, verifier, counters);
}

inline SessionResult run_protocol(const Polynomial& f, const ProtocolParams& params, const FieldElement& x,
                                  const AdversaryStrategy& strategy, u64 seed) {
  LookupTable table = build_table(f, params);
  return run_protocol(f, params, x, strategy, seed, table);
}

}  // namespace vpe
