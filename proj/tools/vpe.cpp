// vpe: command-line front end for verifiable polynomial evaluation.
//
//   vpe gen-poly --degree 4 --seed 7 --modulus 97 --out f.poly
//   vpe init --poly f.poly --eta 2 --ceta 4 --out-table f.table --out-params f.params
//   vpe prove --poly f.poly --params f.params --listen 127.0.0.1:7000
//   vpe verify --params f.params --table f.table --x 2 --connect 127.0.0.1:7000 --seed 1
//   vpe simulate --eta 2 --ceta 4 --degree 4 --strategy corrupt-min --trials 20000 --seed 1
//   vpe bench --degrees 16,32,64 --eta 2 --ceta 4 --seed 1
//
// Exit status: 0 accept / success, 1 reject, 2 usage, I/O, transport or protocol error.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "vpe/bench.hpp"
#include "vpe/lookup.hpp"
#include "vpe/params.hpp"
#include "vpe/poly.hpp"
#include "vpe/protocol.hpp"
#include "vpe/simulate.hpp"
#include "vpe/wire.hpp"

namespace fs = std::filesystem;
using namespace vpe;

namespace {

constexpr int kExitAccept = 0;
constexpr int kExitReject = 1;
constexpr int kExitError = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes next to the target and renames, so readers never see half a file.
class AtomicFile {
 public:
  AtomicFile(std::string path, const std::string& body) : path_(std::move(path)) {
    tmp_ = path_ + ".tmp." + std::to_string(::getpid());
    std::ofstream out(tmp_, std::ios::binary | std::ios::trunc);
    out << body;
    out.close();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp_, ec);
      throw Error("cannot write " + path_);
    }
  }
  AtomicFile(const AtomicFile&) = delete;
  ~AtomicFile() {
    if (!committed_) {
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }
  void commit() {
    std::error_code ec;
    fs::rename(tmp_, path_, ec);
    if (ec) throw Error("cannot write " + path_ + ": " + ec.message());
    committed_ = true;
  }

 private:
  std::string path_, tmp_;
  bool committed_ = false;
};

void write_file(const std::string& path, const std::string& body) { AtomicFile(path, body).commit(); }

std::optional<u64> env_seed() {
  const char* s = std::getenv("VPE_SEED");
  if (!s) return std::nullopt;
  auto v = text::parse_decimal(s);
  if (!v) throw ValidationError("VPE_SEED must be a decimal integer");
  return v;
}

// --seed, else VPE_SEED, else `fallback`.
std::optional<u64> pick_seed(const std::optional<u64>& flag, std::optional<u64> fallback = std::nullopt) {
  if (flag) return flag;
  if (auto e = env_seed()) return e;
  return fallback;
}

AdversaryStrategy parse_strategy(const std::string& name, u64 delta, u64 seed) {
  if (name == "honest") return HonestStrategy{};
  if (name == "corrupt-min" || name == "wrong-claim") return WrongClaim{delta, Policy::CorruptMin, seed};
  if (name == "random-consistent") return WrongClaim{delta, Policy::RandomConsistent, seed};
  throw ValidationError("unknown strategy '" + name + "' (honest, corrupt-min, wrong-claim, random-consistent)");
}

void require_match(const Polynomial& f, const ProtocolParams& params) {
  if (f.p() != params.p()) throw ValidationError("polynomial and params use different moduli");
  if (f.size() != params.d_input()) {
    throw ValidationError("polynomial has " + std::to_string(f.size()) + " coefficients, params expect " +
                          std::to_string(params.d_input()));
  }
}

std::string counts(const OpCounts& c) {
  return "mul=" + std::to_string(c.mul) + " add=" + std::to_string(c.add) + " inv=" + std::to_string(c.inv);
}

/* ---------------------------------------------------------------- */

struct GenPolyArgs {
  u64 degree = 0;
  std::optional<u64> seed;
  u64 modulus = kMersenne61;
  std::string out;
};

int cmd_gen_poly(const GenPolyArgs& a) {
  PrimeModulus m(a.modulus);
  u64 seed = *pick_seed(a.seed, 0);
  std::mt19937_64 rng(seed);
  Polynomial f(m, random_residues(rng, m.value(), a.degree));
  write_file(a.out, serialize_poly(f));
  std::cout << "wrote " << a.out << ": d=" << a.degree << " modulus=" << m.value() << " seed=" << seed << "\n";
  return kExitAccept;
}

struct InitArgs {
  std::string poly, out_table, out_params;
  std::optional<u64> eta, c_eta;
  double omega = 1.0;
  u64 c_num = 2, c_den = 1;
  unsigned threads = 1;
};

int cmd_init(const InitArgs& a) {
  Polynomial f = parse_poly(read_file(a.poly));
  u64 eta, c_eta;
  if (a.eta) {
    eta = *a.eta;
    c_eta = a.c_eta ? *a.c_eta : 2 * eta;
  } else {
    std::tie(eta, c_eta) = select_eta(f.size(), ParamSelector{a.omega, Ratio{a.c_num, a.c_den}});
    if (a.c_eta) c_eta = *a.c_eta;
  }
  auto params = derive_params(f.modulus(), f.size(), eta, c_eta);
  BuildStats stats;
  LookupTable table = build_table(f, params, {.threads = a.threads, .stats = &stats});

  AtomicFile params_file(a.out_params, serialize_params(params));
  AtomicFile table_file(a.out_table, serialize_table(table));
  params_file.commit();
  table_file.commit();

  std::cout << "params   d=" << params.d_input() << " eta=" << eta << " ceta=" << c_eta << " r=" << params.r()
            << " m=" << params.m() << " modulus=" << params.p() << "\n"
            << "lambda   " << table.size() << "\n"
            << "init     " << counts(stats.ops) << "\n"
            << "digest   " << params_digest(params) << "\n";
  return kExitAccept;
}

struct ProveArgs {
  std::string poly, params, listen;
  bool stdio = false;
  std::string adversary = "honest";
  u64 delta = 1;
  std::optional<u64> seed;
  u64 max_sessions = 0;
  bool precompute = false;
};

int cmd_prove(const ProveArgs& a) {
  Polynomial f = parse_poly(read_file(a.poly));
  auto params = parse_params(read_file(a.params));
  require_match(f, params);
  auto strategy = parse_strategy(a.adversary, a.delta, *pick_seed(a.seed, 0));
  std::shared_ptr<const CoefficientTree> tree;
  if (a.precompute) tree = std::make_shared<CoefficientTree>(f, params, lagrange_table(params), u64{1} << 20);
  auto ctx = std::make_shared<ProverContext>(f, params, strategy, tree);

  if (a.stdio) {
    FdChannel ch(STDIN_FILENO, STDOUT_FILENO, false);
    serve_channel(ctx, ch);
    return kExitAccept;
  }
  ProverServer server(ctx, parse_endpoint(a.listen));
  std::cerr << "vpe prove: listening on " << parse_endpoint(a.listen).host << ":" << server.port() << " ("
            << strategy_name(strategy) << ")" << std::endl;
  server.serve(a.max_sessions);
  return kExitAccept;
}

struct VerifyArgs {
  std::string params, table, x, connect, transcript;
  bool stdio = false;
  std::optional<u64> seed;
  int timeout_ms = 30000;
};

int cmd_verify(const VerifyArgs& a) {
  std::ostream& out = a.stdio ? std::cerr : std::cout;
  auto params = parse_params(read_file(a.params));
  LookupTable table = parse_table(read_file(a.table), params);

  auto x_raw = text::parse_decimal(a.x);
  if (!x_raw) throw ValidationError("--x must be a decimal integer");
  if (*x_raw >= params.p()) {
    std::cerr << "vpe verify: warning: --x " << *x_raw << " reduced modulo " << params.p() << " to "
              << *x_raw % params.p() << "\n";
  }
  FieldElement x(*x_raw, params.modulus());

  std::optional<u64> seed = pick_seed(a.seed);
  std::unique_ptr<ChallengeSource> coins;
  if (seed) {
    coins = std::make_unique<SeededChallenges>(*seed);
  } else {
    coins = std::make_unique<EntropyChallenges>();
  }

  std::unique_ptr<LineChannel> ch;
  if (a.stdio) {
    ch = std::make_unique<FdChannel>(STDIN_FILENO, STDOUT_FILENO, false, a.timeout_ms);
  } else {
    ch = tcp_connect(parse_endpoint(a.connect), a.timeout_ms);
  }
  SessionResult res = connect_verifier(params, table, x, *ch, *coins);

  if (!a.transcript.empty()) write_file(a.transcript, res.transcript.to_text());
  const Verdict& v = res.verdict;
  if (v.accepted) {
    out << "verdict     accept\n"
        << "value       " << std::get<msg::Claim>(res.transcript.records.front()).value << "\n";
  } else {
    out << "verdict     reject (" << v.reason;
    if (v.experiment) out << ", experiment " << *v.experiment;
    if (v.level) out << ", round " << *v.level;
    out << ")\n";
  }
  out << "experiments " << res.transcript.count<msg::Final>() << "/" << params.m() << ", "
      << res.transcript.count<msg::Chal>() << " challenges\n";
  if (seed) out << "seed        " << *seed << "\n";
  if (!a.transcript.empty()) out << "transcript  " << a.transcript << "\n";
  return v.accepted ? kExitAccept : kExitReject;
}

struct SimulateArgs {
  u64 eta = 2, c_eta = 4, degree = 4, trials = 20000, delta = 1, modulus = kMersenne61;
  std::string strategy = "corrupt-min";
  std::optional<u64> seed;
  unsigned threads = 1;
};

int cmd_simulate(const SimulateArgs& a) {
  SimulationConfig cfg;
  cfg.degree = a.degree;
  cfg.eta = a.eta;
  cfg.c_eta = a.c_eta;
  cfg.trials = a.trials;
  cfg.seed = *pick_seed(a.seed, 0);
  cfg.modulus = a.modulus;
  cfg.threads = a.threads;
  cfg.strategy = parse_strategy(a.strategy, a.delta, 0);
  if (a.trials < 1000) std::cerr << "vpe simulate: warning: fewer than 1000 trials, sigma is unreliable\n";
  auto rep = simulate(cfg);
  std::cout << rep.to_text();
  return kExitAccept;
}

struct BenchArgs {
  std::vector<u64> degrees{16, 32, 64, 128, 256};
  u64 eta = 2, c_eta = 4, modulus = kMersenne61;
  std::optional<u64> seed;
};

int cmd_bench(const BenchArgs& a) {
  auto rep = bench(a.degrees, a.eta, a.c_eta, *pick_seed(a.seed, 0), a.modulus);
  std::cout << rep.to_text();
  for (const auto& row : rep.rows) {
    if (!row.accepted) {
      std::cerr << "vpe bench: honest run rejected at d=" << row.degree << "\n";
      return kExitError;
    }
  }
  return kExitAccept;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);

  CLI::App app{"Verifiable polynomial evaluation: initialization, prover, verifier, simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vpe 1.0 (wire v1)");

  GenPolyArgs gp;
  auto* gen = app.add_subcommand("gen-poly", "Write a seeded uniform-random polynomial file");
  gen->add_option("--degree", gp.degree, "Number of coefficients")->required()->check(CLI::Range(u64{1}, u64{1} << 26));
  gen->add_option("--seed", gp.seed, "RNG seed (default: $VPE_SEED, else 0)");
  gen->add_option("--modulus", gp.modulus, "Prime modulus")->capture_default_str();
  gen->add_option("--out", gp.out, "Output VPE-POLY file")->required();

  InitArgs in;
  auto* init = app.add_subcommand("init", "Build the look-up table and params file");
  init->add_option("--poly", in.poly, "Input VPE-POLY file")->required()->check(CLI::ExistingFile);
  init->add_option("--eta", in.eta, "eta (default: rounded (log2 d)^omega)");
  init->add_option("--ceta", in.c_eta, "|L| = c*eta (default: ceil(c*eta))");
  init->add_option("--omega", in.omega, "Exponent omega when --eta is omitted")->capture_default_str();
  init->add_option("--c-num", in.c_num, "Numerator of c when --ceta is omitted")->capture_default_str();
  init->add_option("--c-den", in.c_den, "Denominator of c when --ceta is omitted")->capture_default_str();
  init->add_option("--threads", in.threads, "Build threads")->capture_default_str()->check(CLI::Range(1u, 256u));
  init->add_option("--out-table", in.out_table, "Output VPE-TABLE file")->required();
  init->add_option("--out-params", in.out_params, "Output VPE-PARAMS file")->required();

  ProveArgs pa;
  auto* prove = app.add_subcommand("prove", "Serve the prover over TCP or stdio");
  prove->add_option("--poly", pa.poly, "VPE-POLY file")->required()->check(CLI::ExistingFile);
  prove->add_option("--params", pa.params, "VPE-PARAMS file")->required()->check(CLI::ExistingFile);
  auto* listen = prove->add_option("--listen", pa.listen, "host:port (port 0 picks one)");
  auto* pstdio = prove->add_flag("--stdio", pa.stdio, "Speak the wire protocol on stdin/stdout");
  listen->excludes(pstdio);
  prove->add_option("--adversary", pa.adversary, "honest | corrupt-min | wrong-claim | random-consistent")
      ->capture_default_str();
  prove->add_option("--delta", pa.delta, "Offset added to the true value")->capture_default_str();
  prove->add_option("--seed", pa.seed, "Seed for random-consistent");
  prove->add_option("--max-sessions", pa.max_sessions, "Exit after this many connections (0: never)")
      ->capture_default_str();
  prove->add_flag("--precompute", pa.precompute, "Keep the whole coefficient tree in memory");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run the verifier against a prover");
  verify->add_option("--params", va.params, "VPE-PARAMS file")->required()->check(CLI::ExistingFile);
  verify->add_option("--table", va.table, "VPE-TABLE file")->required()->check(CLI::ExistingFile);
  verify->add_option("--x", va.x, "Evaluation point (decimal)")->required();
  auto* connect = verify->add_option("--connect", va.connect, "host:port of the prover");
  auto* vstdio = verify->add_flag("--stdio", va.stdio, "Speak the wire protocol on stdin/stdout");
  connect->excludes(vstdio);
  verify->add_option("--seed", va.seed, "Challenge seed (default: $VPE_SEED, else OS entropy)");
  verify->add_option("--transcript", va.transcript, "Write the transcript here");
  verify->add_option("--timeout", va.timeout_ms, "Milliseconds to wait for each prover message")
      ->capture_default_str();

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo soundness experiment");
  sim->add_option("--eta", sa.eta)->capture_default_str();
  sim->add_option("--ceta", sa.c_eta)->capture_default_str();
  sim->add_option("--degree", sa.degree)->capture_default_str();
  sim->add_option("--strategy", sa.strategy, "honest | corrupt-min | random-consistent")->capture_default_str();
  sim->add_option("--delta", sa.delta)->capture_default_str();
  sim->add_option("--trials", sa.trials)->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--seed", sa.seed, "Master seed (default: $VPE_SEED, else 0)");
  sim->add_option("--modulus", sa.modulus)->capture_default_str();
  sim->add_option("--threads", sa.threads)->capture_default_str()->check(CLI::Range(1u, 256u));

  BenchArgs ba;
  auto* bn = app.add_subcommand("bench", "Counted field operations per phase");
  bn->add_option("--degrees", ba.degrees, "Comma-separated powers of eta")->delimiter(',')->capture_default_str();
  bn->add_option("--eta", ba.eta)->capture_default_str();
  bn->add_option("--ceta", ba.c_eta)->capture_default_str();
  bn->add_option("--seed", ba.seed, "Seed (default: $VPE_SEED, else 0)");
  bn->add_option("--modulus", ba.modulus)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    if (*gen) return cmd_gen_poly(gp);
    if (*init) return cmd_init(in);
    if (*prove) {
      if (pa.listen.empty() && !pa.stdio) throw ValidationError("prove needs --listen or --stdio");
      return cmd_prove(pa);
    }
    if (*verify) {
      if (va.connect.empty() && !va.stdio) throw ValidationError("verify needs --connect or --stdio");
      return cmd_verify(va);
    }
    if (*sim) return cmd_simulate(sa);
    if (*bn) return cmd_bench(ba);
  } catch (const DigestMismatch& e) {
    std::cerr << "vpe: digest mismatch: " << e.what() << "\n";
  } catch (const TransportError& e) {
    std::cerr << "vpe: transport failure: " << e.what() << "\n";
  } catch (const ProtocolError& e) {
    std::cerr << "vpe: protocol violation: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "vpe: error: " << e.what() << "\n";
  }
  return kExitError;
}
