#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "vpe/error.hpp"
#include "vpe/lookup.hpp"
#include "vpe/message.hpp"
#include "vpe/params.hpp"
#include "vpe/poly.hpp"
#include "vpe/protocol.hpp"
#include "vpe/random.hpp"

namespace vpe {

inline constexpr std::string_view kWireVersion = "v1";

/* -------------------------------------------------------------------- *
 *  Line framing                                                         *
 * -------------------------------------------------------------------- */

/// A reliable byte stream cut into '\n'-terminated lines.
class LineChannel {
 public:
  virtual ~LineChannel() = default;

  // `line` must already carry its terminating newline.
  void send(std::string_view line) { write_all(line); }

  /// Next line without its newline, or nullopt on a clean end of stream.
  /// Throws DecodeError for lines over kMaxLineBytes and TransportError when
  /// the stream ends mid-line or fails.
  std::optional<std::string> receive() {
    for (;;) {
      if (auto nl = buf_.find('\n', scanned_); nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        scanned_ = 0;
        return line;
      }
      scanned_ = buf_.size();
      if (buf_.size() >= kMaxLineBytes) {
        buf_.clear();
        scanned_ = 0;
        throw DecodeError(DecodeFailure::Oversize, "oversize: line exceeds 64 KiB");
      }
      char tmp[4096];
      std::size_t n = read_some(tmp, sizeof tmp);
      if (n == 0) {
        if (buf_.empty()) return std::nullopt;
        throw TransportError("stream closed in the middle of a line");
      }
      buf_.append(tmp, n);
    }
  }

  virtual void close() = 0;

 protected:
  // 0 means end of stream.
  virtual std::size_t read_some(char* dst, std::size_t cap) = 0;
  virtual void write_all(std::string_view bytes) = 0;

 private:
  std::string buf_;
  std::size_t scanned_ = 0;
};

namespace detail {

struct MemoryPipe {
  std::mutex mu;
  std::condition_variable cv;
  std::string data;
  bool closed = false;
};

}  // namespace detail

/// One end of an in-process loopback.
class MemoryChannel : public LineChannel {
 public:
  MemoryChannel(std::shared_ptr<detail::MemoryPipe> in, std::shared_ptr<detail::MemoryPipe> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~MemoryChannel() override { close(); }

  void close() override {
    for (auto* p : {in_.get(), out_.get()}) {
      std::lock_guard lock(p->mu);
      p->closed = true;
      p->cv.notify_all();
    }
  }

 protected:
  std::size_t read_some(char* dst, std::size_t cap) override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [&] { return !in_->data.empty() || in_->closed; });
    std::size_t n = std::min(cap, in_->data.size());
    std::memcpy(dst, in_->data.data(), n);
    in_->data.erase(0, n);
    return n;
  }

  void write_all(std::string_view bytes) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw TransportError("loopback peer closed");
    out_->data.append(bytes);
    out_->cv.notify_all();
  }

 private:
  std::shared_ptr<detail::MemoryPipe> in_, out_;
};

inline std::pair<std::unique_ptr<LineChannel>, std::unique_ptr<LineChannel>> memory_pair() {
  auto ab = std::make_shared<detail::MemoryPipe>();
  auto ba = std::make_shared<detail::MemoryPipe>();
  return {std::make_unique<MemoryChannel>(ba, ab), std::make_unique<MemoryChannel>(ab, ba)};
}

/// Socket or pipe file descriptors. `timeout_ms` < 0 waits forever.
class FdChannel : public LineChannel {
 public:
  FdChannel(int in_fd, int out_fd, bool owns, int timeout_ms = -1)
      : in_(in_fd), out_(out_fd), owns_(owns), timeout_ms_(timeout_ms) {}
  explicit FdChannel(int socket_fd, int timeout_ms = -1) : FdChannel(socket_fd, socket_fd, true, timeout_ms) {}
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;
  ~FdChannel() override { close(); }

  void close() override {
    if (!owns_ || in_ < 0) return;
    ::shutdown(in_, SHUT_RDWR);
    ::close(in_);
    if (out_ != in_) ::close(out_);
    in_ = out_ = -1;
  }

 protected:
  std::size_t read_some(char* dst, std::size_t cap) override {
    if (in_ < 0) return 0;
    if (timeout_ms_ >= 0) {
      pollfd pfd{in_, POLLIN, 0};
      int rc;
      do {
        rc = ::poll(&pfd, 1, timeout_ms_);
      } while (rc < 0 && errno == EINTR);
      if (rc == 0) throw TransportError("timed out waiting for peer");
      if (rc < 0) throw TransportError(std::string("poll: ") + std::strerror(errno));
    }
    for (;;) {
      ssize_t n = ::read(in_, dst, cap);
      if (n >= 0) return static_cast<std::size_t>(n);
      if (errno == EINTR) continue;
      if (errno == ECONNRESET) return 0;
      throw TransportError(std::string("read: ") + std::strerror(errno));
    }
  }

  void write_all(std::string_view bytes) override {
    if (out_ < 0) throw TransportError("channel closed");
    while (!bytes.empty()) {
      ssize_t n = ::send(out_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
      if (n < 0 && errno == ENOTSOCK) n = ::write(out_, bytes.data(), bytes.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("write: ") + std::strerror(errno));
      }
      bytes.remove_prefix(static_cast<std::size_t>(n));
    }
  }

 private:
  int in_, out_;
  bool owns_;
  int timeout_ms_;
};

/* -------------------------------------------------------------------- *
 *  Prover side                                                          *
 * -------------------------------------------------------------------- */

/// Everything a prover service needs; shared read-only across sessions.
struct ProverContext {
  ProverContext(Polynomial f_, ProtocolParams params_, AdversaryStrategy strategy_ = HonestStrategy{},
                std::shared_ptr<const CoefficientTree> tree_ = nullptr)
      : f(pad_to(f_, params_)),
        params(std::move(params_)),
        digest(params_digest(params)),
        strategy(std::move(strategy_)),
        tree(std::move(tree_)) {}

  Polynomial f;
  ProtocolParams params;
  std::string digest;
  AdversaryStrategy strategy;
  std::shared_ptr<const CoefficientTree> tree;
};

/// Server half of one connection as a pure state machine: feed it a line,
/// get back the lines to send and whether to hang up. Never throws.
class ProverSession {
 public:
  struct Reply {
    std::vector<std::string> lines;
    bool close = false;
  };

  explicit ProverSession(std::shared_ptr<const ProverContext> ctx) : ctx_(std::move(ctx)) {}

  bool closed() const { return state_ == State::Closed; }

  Reply on_line(std::string_view line) {
    if (state_ == State::Closed) return {{}, true};
    try {
      return dispatch(decode(line));
    } catch (const DecodeError& e) {
      return fail(e.kind == DecodeFailure::Oversize ? "oversize" : "decode");
    } catch (const std::exception&) {
      return fail("internal");
    }
  }

  // The transport gave up on the peer (oversize line, broken stream).
  Reply on_transport_error(std::string_view reason) { return fail(reason); }

 private:
  enum class State { AwaitHello, AwaitEval, AwaitChal, AwaitVerdict, Closed };

  Reply fail(std::string_view reason) {
    state_ = State::Closed;
    return {{encode(msg::Error{std::string(reason)})}, true};
  }

  std::string next_round() {
    auto values = prover_->round();
    return encode(msg::Round{experiment_, level_ + 1, detail::raw_values(values)});
  }

  Reply dispatch(const Message& m) {
    const ProtocolParams& params = ctx_->params;
    if (std::holds_alternative<msg::Error>(m)) {
      state_ = State::Closed;
      return {{}, true};
    }
    if (std::holds_alternative<msg::Verdict>(m)) {
      if (state_ == State::AwaitChal || state_ == State::AwaitVerdict) {
        state_ = State::Closed;
        return {{}, true};
      }
      return fail(state_ == State::AwaitHello ? "handshake" : "unexpected");
    }

    switch (state_) {
      case State::AwaitHello: {
        auto* h = std::get_if<msg::Hello>(&m);
        if (!h) return fail("handshake");
        if (h->version != kWireVersion) return fail("version");
        if (h->digest != ctx_->digest) return fail("digest");
        state_ = State::AwaitEval;
        return {{encode(msg::Hello{std::string(kWireVersion), ctx_->digest})}, false};
      }
      case State::AwaitEval: {
        auto* e = std::get_if<msg::Eval>(&m);
        if (!e) return fail("unexpected");
        if (e->x >= params.p()) return fail("range");
        prover_ = make_prover(ctx_->strategy, ctx_->f, params, FieldElement(e->x, params.modulus()), ctx_->tree);
        state_ = State::AwaitChal;
        experiment_ = 0;
        level_ = 0;
        return {{encode(msg::Claim{prover_->claim().value()}), next_round()}, false};
      }
      case State::AwaitChal: {
        auto* c = std::get_if<msg::Chal>(&m);
        if (!c) return fail("unexpected");
        if (c->experiment != experiment_ || c->level != level_ + 1) return fail("sequence");
        if (c->b >= params.c_eta()) return fail("range");
        prover_->accept_challenge(static_cast<std::size_t>(c->b));
        ++level_;
        Reply out;
        if (level_ < params.r()) {
          out.lines.push_back(next_round());
          return out;
        }
        out.lines.push_back(encode(msg::Final{experiment_, prover_->final_value().value()}));
        ++experiment_;
        level_ = 0;
        if (experiment_ < params.m()) {
          out.lines.push_back(next_round());
        } else {
          state_ = State::AwaitVerdict;
        }
        return out;
      }
      case State::AwaitVerdict:
        return fail("unexpected");
      case State::Closed:
        break;
    }
    return {{}, true};
  }

  std::shared_ptr<const ProverContext> ctx_;
  State state_ = State::AwaitHello;
  std::unique_ptr<Prover> prover_;
  u64 experiment_ = 0;
  u64 level_ = 0;
};

/// Drives one session over `ch` until either side hangs up.
inline void serve_channel(std::shared_ptr<const ProverContext> ctx, LineChannel& ch) {
  ProverSession session(std::move(ctx));
  try {
    while (!session.closed()) {
      std::optional<std::string> line;
      ProverSession::Reply reply;
      try {
        line = ch.receive();
        if (!line) break;
        reply = session.on_line(*line);
      } catch (const DecodeError&) {
        reply = session.on_transport_error("oversize");
      }
      for (const auto& out : reply.lines) ch.send(out);
      if (reply.close) break;
    }
  } catch (const TransportError&) {
  }
  ch.close();
}

/* -------------------------------------------------------------------- *
 *  Verifier side                                                        *
 * -------------------------------------------------------------------- */

namespace detail {

inline Message expect_message(LineChannel& ch) {
  auto line = ch.receive();
  if (!line) throw TransportError("prover closed the connection");
  Message m = decode(*line);
  if (auto* e = std::get_if<msg::Error>(&m)) {
    if (e->reason == "digest") throw DigestMismatch("prover was initialized with different parameters");
    throw ProtocolError("prover reported error: " + e->reason);
  }
  return m;
}

template <class T>
T expect(LineChannel& ch, const char* what) {
  Message m = expect_message(ch);
  if (auto* v = std::get_if<T>(&m)) return *v;
  throw ProtocolError(std::string("expected ") + what + ", got: " + encode(m).substr(0, 64));
}

inline std::vector<FieldElement> to_elements(const std::vector<u64>& raw, const PrimeModulus& m) {
  std::vector<FieldElement> out;
  out.reserve(raw.size());
  for (u64 v : raw) {
    if (v >= m.value()) throw ProtocolError("prover sent a non-canonical field element");
    out.push_back(FieldElement(v, m));
  }
  return out;
}

}  // namespace detail

/// Verifier side of the protocol over a channel. Produces the same verdict and
/// transcript as run_protocol with the same coins. Transport failures,
/// digest mismatches and protocol violations are thrown, never turned into
/// a reject.
inline SessionResult connect_verifier(const ProtocolParams& params, const TableSource& table, const FieldElement& x,
                                      LineChannel& ch, ChallengeSource& coins, SessionCounters* counters = nullptr) {
  Verifier verifier(params, table, coins);
  OpCounts scratch;
  OpCounts& vc = counters ? counters->verifier : scratch;
  {
    CountScope s(vc);
    verifier.set_point(x);
  }
  const std::string digest = params_digest(params);
  const PrimeModulus& mod = params.modulus();

  ch.send(encode(msg::Hello{std::string(kWireVersion), digest}));
  auto hello = detail::expect<msg::Hello>(ch, "HELLO");
  if (hello.version != kWireVersion) throw ProtocolError("prover speaks protocol " + hello.version);
  if (hello.digest != digest) throw DigestMismatch("prover was initialized with different parameters");

  ch.send(encode(msg::Eval{x.value()}));
  auto claim = detail::expect<msg::Claim>(ch, "CLAIM");
  if (claim.value >= mod.value()) throw ProtocolError("prover sent a non-canonical claim");

  SessionResult res;
  res.transcript.add(claim);
  {
    CountScope s(vc);
    verifier.start(FieldElement(claim.value, mod));
  }
  res.verdict = {true, "ok", std::nullopt, std::nullopt};

  auto conclude = [&](const Verdict& v) {
    res.verdict = v;
    res.transcript.add(v.message());
    try {
      ch.send(encode(v.message()));
    } catch (const TransportError&) {
    }
    ch.close();
    return res;
  };

  while (!verifier.finished()) {
    const u64 e = verifier.experiment();
    for (u64 l = 1; l <= params.r(); ++l) {
      auto round = detail::expect<msg::Round>(ch, "ROUND");
      if (round.experiment != e || round.level != l) throw ProtocolError("ROUND out of sequence");
      if (round.values.size() != params.eta()) throw ProtocolError("ROUND must carry exactly eta values");
      auto values = detail::to_elements(round.values, mod);
      res.transcript.add(round);
      std::variant<std::size_t, Verdict> out;
      {
        CountScope s(vc);
        out = verifier.check_round(values);
      }
      if (auto* v = std::get_if<Verdict>(&out)) return conclude(*v);
      msg::Chal chal{e, l, std::get<std::size_t>(out)};
      res.transcript.add(chal);
      ch.send(encode(chal));
    }
    auto fin = detail::expect<msg::Final>(ch, "FINAL");
    if (fin.experiment != e) throw ProtocolError("FINAL out of sequence");
    if (fin.value >= mod.value()) throw ProtocolError("prover sent a non-canonical final value");
    res.transcript.add(fin);
    Verdict v;
    {
      CountScope s(vc);
      v = verifier.finalize(FieldElement(fin.value, mod));
    }
    if (!v.accepted) return conclude(v);
  }
  return conclude(res.verdict);
}

inline SessionResult connect_verifier(const ProtocolParams& params, const TableSource& table, const FieldElement& x,
                                      LineChannel& ch, u64 seed, SessionCounters* counters = nullptr) {
  SeededChallenges coins(seed);
  return connect_verifier(params, table, x, ch, coins, counters);
}

/* -------------------------------------------------------------------- *
 *  TCP                                                                  *
 * -------------------------------------------------------------------- */

struct Endpoint {
  std::string host;
  uint16_t port = 0;
};

// "host:port"; the port may be 0 when listening.
inline Endpoint parse_endpoint(std::string_view s) {
  auto colon = s.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw ValidationError("endpoint must be host:port");
  auto port = text::parse_decimal(s.substr(colon + 1));
  if (!port || *port > 65535) throw ValidationError("endpoint port must be 0..65535");
  return {std::string(s.substr(0, colon)), static_cast<uint16_t>(*port)};
}

namespace detail {

struct AddrInfo {
  addrinfo* head = nullptr;
  ~AddrInfo() {
    if (head) ::freeaddrinfo(head);
  }
};

inline AddrInfo resolve(const Endpoint& ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  AddrInfo out;
  std::string port = std::to_string(ep.port);
  int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &out.head);
  if (rc != 0) throw TransportError("cannot resolve " + ep.host + ": " + ::gai_strerror(rc));
  return out;
}

}  // namespace detail

inline std::unique_ptr<FdChannel> tcp_connect(const Endpoint& ep, int timeout_ms = -1) {
  auto ai = detail::resolve(ep, false);
  std::string last = "no addresses";
  for (addrinfo* a = ai.head; a; a = a->ai_next) {
    int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) {
      last = std::strerror(errno);
      continue;
    }
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return std::make_unique<FdChannel>(fd, timeout_ms);
    }
    last = std::strerror(errno);
    ::close(fd);
  }
  throw TransportError("cannot connect to " + ep.host + ":" + std::to_string(ep.port) + ": " + last);
}

inline SessionResult connect_verifier(const ProtocolParams& params, const TableSource& table, const FieldElement& x,
                                      const Endpoint& ep, u64 seed, int timeout_ms = 30000,
                                      SessionCounters* counters = nullptr) {
  check_binding(table, params);
  auto ch = tcp_connect(ep, timeout_ms);
  return connect_verifier(params, table, x, *ch, seed, counters);
}

/// Listens on a TCP endpoint and serves every connection on its own thread.
class ProverServer {
 public:
  ProverServer(std::shared_ptr<const ProverContext> ctx, const Endpoint& ep) : ctx_(std::move(ctx)) {
    auto ai = detail::resolve(ep, true);
    std::string last = "no addresses";
    for (addrinfo* a = ai.head; a && fd_ < 0; a = a->ai_next) {
      int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
      if (fd < 0) continue;
      int one = 1;
      ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
      if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
        fd_ = fd;
      } else {
        last = std::strerror(errno);
        ::close(fd);
      }
    }
    if (fd_ < 0) throw TransportError("cannot listen on " + ep.host + ":" + std::to_string(ep.port) + ": " + last);
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port
                                              : reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  }

  ProverServer(const ProverServer&) = delete;
  ProverServer& operator=(const ProverServer&) = delete;
  ~ProverServer() {
    stop();
    if (fd_ >= 0) ::close(fd_);
  }

  uint16_t port() const { return port_; }

  /// Accept loop. Returns after `max_sessions` connections have finished
  /// (0: only when stop() is called).
  void serve(std::size_t max_sessions = 0) {
    std::size_t accepted = 0;
    while (!stopping_ && (max_sessions == 0 || accepted < max_sessions)) {
      pollfd pfd{fd_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, 100);
      if (rc <= 0) continue;
      int conn = ::accept(fd_, nullptr, nullptr);
      if (conn < 0) continue;
      int one = 1;
      ::setsockopt(conn, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      ++accepted;
      std::lock_guard lock(mu_);
      reap_locked();
      auto& w = workers_.emplace_back();
      w.fd = conn;
      w.done = std::make_shared<std::atomic<bool>>(false);
      w.thread = std::thread([ctx = ctx_, conn, done = w.done] {
        FdChannel ch(conn, conn, false);
        serve_channel(ctx, ch);
        done->store(true);
      });
    }
    join_all(stopping_);
  }

  void start() {
    bg_ = std::thread([this] { serve(); });
  }

  /// Stops accepting, hangs up on live connections and joins everything.
  void stop() {
    stopping_ = true;
    if (bg_.joinable()) bg_.join();
    join_all(true);
  }

 private:
  struct Worker {
    int fd = -1;
    std::shared_ptr<std::atomic<bool>> done;
    std::thread thread;
  };

  void reap_locked() {
    for (auto it = workers_.begin(); it != workers_.end();) {
      if (it->done->load()) {
        it->thread.join();
        ::close(it->fd);
        it = workers_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void join_all(bool hang_up) {
    std::list<Worker> ws;
    {
      std::lock_guard lock(mu_);
      ws.swap(workers_);
    }
    for (auto& w : ws) {
      if (hang_up) ::shutdown(w.fd, SHUT_RDWR);
      w.thread.join();
      ::close(w.fd);
    }
  }

  std::shared_ptr<const ProverContext> ctx_;
  int fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread bg_;
  std::mutex mu_;
  std::list<Worker> workers_;
};

}  // namespace vpe
