#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "vpe/error.hpp"
#include "vpe/field.hpp"

namespace vpe {

inline u64 splitmix64(u64 x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent sub-seed for stream `index` of a master seed.
inline u64 derive_seed(u64 master, u64 index) { return splitmix64(splitmix64(master) ^ splitmix64(~index)); }

// Unbiased draw in [0, bound) by rejection. Portable across standard libraries,
// unlike std::uniform_int_distribution.
inline u64 uniform_below(std::mt19937_64& rng, u64 bound) {
  if (bound == 0) throw ValidationError("uniform_below: empty range");
  const u64 limit = ~u64{0} - (~u64{0} % bound + 1) % bound;
  u64 v;
  do {
    v = rng();
  } while (v > limit);
  return v % bound;
}

inline std::vector<u64> random_residues(std::mt19937_64& rng, u64 p, std::size_t n) {
  std::vector<u64> out(n);
  for (auto& v : out) v = uniform_below(rng, p);
  return out;
}

/// Source of the verifier's public coins.
class ChallengeSource {
 public:
  virtual ~ChallengeSource() = default;
  virtual std::size_t draw(std::size_t bound) = 0;
};

class SeededChallenges : public ChallengeSource {
 public:
  explicit SeededChallenges(u64 seed) : rng_(seed) {}
  std::size_t draw(std::size_t bound) override { return static_cast<std::size_t>(uniform_below(rng_, bound)); }

 private:
  std::mt19937_64 rng_;
};

// Seeded from the OS entropy source.
class EntropyChallenges : public ChallengeSource {
 public:
  EntropyChallenges() {
    std::random_device rd;
    rng_.seed((static_cast<u64>(rd()) << 32) ^ rd());
  }
  std::size_t draw(std::size_t bound) override { return static_cast<std::size_t>(uniform_below(rng_, bound)); }

 private:
  std::mt19937_64 rng_;
};

// Replays a fixed list; used to enumerate challenge paths exhaustively.
class ScriptedChallenges : public ChallengeSource {
 public:
  explicit ScriptedChallenges(std::vector<std::size_t> script) : script_(std::move(script)) {}
  std::size_t draw(std::size_t bound) override {
    if (pos_ >= script_.size()) throw Error("scripted challenges exhausted");
    std::size_t b = script_[pos_++];
    if (b >= bound) throw Error("scripted challenge out of range");
    return b;
  }

 private:
  std::vector<std::size_t> script_;
  std::size_t pos_ = 0;
};

}  // namespace vpe
