#pragma once

#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "vpe/digest.hpp"
#include "vpe/error.hpp"
#include "vpe/field.hpp"
#include "vpe/text.hpp"

namespace vpe {

// One line of the text protocol, newline included, may not exceed this.
inline constexpr std::size_t kMaxLineBytes = 64 * 1024;

namespace msg {

struct Hello {
  std::string version;
  std::string digest;
  friend bool operator==(const Hello&, const Hello&) = default;
};
struct Eval {
  u64 x = 0;
  friend bool operator==(const Eval&, const Eval&) = default;
};
struct Claim {
  u64 value = 0;
  friend bool operator==(const Claim&, const Claim&) = default;
};
struct Round {
  u64 experiment = 0;
  u64 level = 0;
  std::vector<u64> values;
  friend bool operator==(const Round&, const Round&) = default;
};
struct Chal {
  u64 experiment = 0;
  u64 level = 0;
  u64 b = 0;
  friend bool operator==(const Chal&, const Chal&) = default;
};
struct Final {
  u64 experiment = 0;
  u64 value = 0;
  friend bool operator==(const Final&, const Final&) = default;
};
struct Verdict {
  bool accept = false;
  std::string reason;
  friend bool operator==(const Verdict&, const Verdict&) = default;
};
struct Error {
  std::string reason;
  friend bool operator==(const Error&, const Error&) = default;
};

}  // namespace msg

using Message = std::variant<msg::Hello, msg::Eval, msg::Claim, msg::Round, msg::Chal, msg::Final,
                             msg::Verdict, msg::Error>;

enum class DecodeFailure { Oversize, NonDecimal, Arity, UnknownVerb, Malformed };

struct DecodeError : ProtocolError {
  DecodeError(DecodeFailure kind, const std::string& what) : ProtocolError(what), kind(kind) {}
  DecodeFailure kind;
};

// Reason / version tokens: 1..64 chars of [a-z0-9-].
inline bool is_token(std::string_view s) {
  if (s.empty() || s.size() > 64) return false;
  for (char ch : s) {
    if (!((ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '-')) return false;
  }
  return true;
}

inline std::string encode(const Message& m) {
  std::string out;
  auto num = [&out](u64 v) {
    out += ' ';
    out += std::to_string(v);
  };
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, msg::Hello>) {
          out = "HELLO " + v.version + " " + v.digest;
        } else if constexpr (std::is_same_v<T, msg::Eval>) {
          out = "EVAL";
          num(v.x);
        } else if constexpr (std::is_same_v<T, msg::Claim>) {
          out = "CLAIM";
          num(v.value);
        } else if constexpr (std::is_same_v<T, msg::Round>) {
          out = "ROUND";
          num(v.experiment);
          num(v.level);
          for (u64 x : v.values) num(x);
        } else if constexpr (std::is_same_v<T, msg::Chal>) {
          out = "CHAL";
          num(v.experiment);
          num(v.level);
          num(v.b);
        } else if constexpr (std::is_same_v<T, msg::Final>) {
          out = "FINAL";
          num(v.experiment);
          num(v.value);
        } else if constexpr (std::is_same_v<T, msg::Verdict>) {
          out = std::string("VERDICT ") + (v.accept ? "accept" : "reject") + " " + v.reason;
        } else {
          out = "ERROR " + v.reason;
        }
      },
      m);
  out += '\n';
  if (out.size() > kMaxLineBytes) throw DecodeError(DecodeFailure::Oversize, "oversize: message exceeds 64 KiB");
  return out;
}

/// Parses one line; a single trailing '\n' is accepted. Anything that is not
/// exactly a well-formed message is a DecodeError.
inline Message decode(std::string_view line) {
  if (line.size() > kMaxLineBytes) throw DecodeError(DecodeFailure::Oversize, "oversize: line exceeds 64 KiB");
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (line.find('\n') != std::string_view::npos) throw DecodeError(DecodeFailure::Malformed, "malformed: embedded newline");
  auto tok = text::split(line);
  const std::string_view verb = tok[0];
  const std::size_t nargs = tok.size() - 1;
  for (std::size_t i = 1; i < tok.size(); ++i) {
    if (tok[i].empty()) throw DecodeError(DecodeFailure::Malformed, "malformed: empty argument");
  }

  auto arity = [&](std::size_t want) {
    if (nargs != want) {
      throw DecodeError(DecodeFailure::Arity, "arity: " + std::string(verb) + " takes " + std::to_string(want) +
                                                  " arguments, got " + std::to_string(nargs));
    }
  };
  auto dec = [&](std::size_t i) {
    auto v = text::parse_decimal(tok[i]);
    if (!v) throw DecodeError(DecodeFailure::NonDecimal, "non-decimal argument '" + std::string(tok[i]) + "'");
    return *v;
  };
  auto token = [&](std::size_t i) {
    if (!is_token(tok[i])) throw DecodeError(DecodeFailure::Malformed, "malformed token '" + std::string(tok[i]) + "'");
    return std::string(tok[i]);
  };

  if (verb == "HELLO") {
    arity(2);
    std::string version = token(1);
    if (!is_digest_hex(tok[2])) throw DecodeError(DecodeFailure::Malformed, "malformed digest");
    return msg::Hello{version, std::string(tok[2])};
  }
  if (verb == "EVAL") {
    arity(1);
    return msg::Eval{dec(1)};
  }
  if (verb == "CLAIM") {
    arity(1);
    return msg::Claim{dec(1)};
  }
  if (verb == "ROUND") {
    if (nargs < 3) throw DecodeError(DecodeFailure::Arity, "arity: ROUND takes at least 3 arguments");
    msg::Round r{dec(1), dec(2), {}};
    r.values.reserve(nargs - 2);
    for (std::size_t i = 3; i < tok.size(); ++i) r.values.push_back(dec(i));
    return r;
  }
  if (verb == "CHAL") {
    arity(3);
    return msg::Chal{dec(1), dec(2), dec(3)};
  }
  if (verb == "FINAL") {
    arity(2);
    return msg::Final{dec(1), dec(2)};
  }
  if (verb == "VERDICT") {
    arity(2);
    if (tok[1] != "accept" && tok[1] != "reject") {
      throw DecodeError(DecodeFailure::Malformed, "malformed: verdict must be accept or reject");
    }
    return msg::Verdict{tok[1] == "accept", token(2)};
  }
  if (verb == "ERROR") {
    arity(1);
    return msg::Error{token(1)};
  }
  throw DecodeError(DecodeFailure::UnknownVerb, "unknown verb '" + std::string(verb.substr(0, 32)) + "'");
}

/// Ordered log of one session: CLAIM, then per experiment alternating
/// ROUND/CHAL records and a FINAL, then one VERDICT.
struct Transcript {
  std::vector<Message> records;

  void add(Message m) { records.push_back(std::move(m)); }

  std::string to_text() const {
    std::string out;
    for (const auto& m : records) out += encode(m);
    return out;
  }

  static Transcript from_text(std::string_view body) {
    Transcript t;
    for (auto line : text::lines(body)) t.add(decode(line));
    return t;
  }

  template <class T>
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& m : records) n += std::holds_alternative<T>(m);
    return n;
  }

  std::size_t challenges_in(u64 experiment) const {
    std::size_t n = 0;
    for (const auto& m : records) {
      if (auto* c = std::get_if<msg::Chal>(&m); c && c->experiment == experiment) ++n;
    }
    return n;
  }

  std::vector<std::size_t> challenge_path(u64 experiment) const {
    std::vector<std::size_t> out;
    for (const auto& m : records) {
      if (auto* c = std::get_if<msg::Chal>(&m); c && c->experiment == experiment) out.push_back(c->b);
    }
    return out;
  }

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

}  // namespace vpe
