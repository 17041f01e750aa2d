#include "vpe/lookup.hpp"

#include <random>

#include "gtest/gtest.h"
#include "vpe/random.hpp"

namespace vpe {
namespace {

const PrimeModulus kP97(97);

FieldElement F(u64 v) { return FieldElement(v, kP97); }

std::vector<std::size_t> path_of(std::size_t index, u64 ceta, u64 r) {
  std::vector<std::size_t> path(r);
  for (std::size_t k = r; k-- > 0;) {
    path[k] = index % ceta;
    index /= ceta;
  }
  return path;
}

TEST(LookupTest, UnitConstantByHand) {
  auto params = derive_params(kP97, 4, 2, 4);
  auto table = build_table(Polynomial(kP97, {1, 0, 0, 0}), params);
  ASSERT_EQ(table.size(), 16u);
  using P = std::vector<std::size_t>;
  EXPECT_EQ(table.entry(P{0, 0}), F(1));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(table.entry(P{1, j}), F(0));
  EXPECT_EQ(table.entry(P{2, 2}), F(1));
  EXPECT_EQ(table.entry(P{3, 3}), F(4));
  EXPECT_EQ(table.entry(P{2, 3}), F(2));
  // Z_0(beta) = 1 - beta, so h(b1, b2) = (1 - b1)(1 - b2).
  for (std::size_t b1 = 0; b1 < 4; ++b1)
    for (std::size_t b2 = 0; b2 < 4; ++b2)
      EXPECT_EQ(table.entry(P{b1, b2}), (F(1) - F(b1)) * (F(1) - F(b2)));
}

TEST(LookupTest, ZeroPolynomialGivesZeroTable) {
  auto params = derive_params(kP97, 16, 2, 3);
  auto table = build_table(Polynomial::zero(kP97, 16), params);
  for (u64 v : table.raw()) EXPECT_EQ(v, 0u);
}

TEST(LookupTest, PathsInsideHSelectSingleCoefficients) {
  std::mt19937_64 rng(31);
  auto params = derive_params(kP97, 27, 3, 4);
  Polynomial f(kP97, random_residues(rng, 97, 27));
  auto table = build_table(f, params);
  for (std::size_t b1 = 0; b1 < 3; ++b1)
    for (std::size_t b2 = 0; b2 < 3; ++b2)
      for (std::size_t b3 = 0; b3 < 3; ++b3) {
        std::vector<std::size_t> path{b1, b2, b3};
        EXPECT_EQ(table.entry(path), f.coeff(b1 + 3 * b2 + 9 * b3));
      }
}

TEST(LookupTest, NaiveEntryBasics) {
  auto params = derive_params(kP97, 8, 2, 4);
  ZTable z = lagrange_table(params);
  std::vector<std::size_t> zeros{0, 0, 0};
  EXPECT_EQ(naive_entry(Polynomial(kP97, {1, 0, 0, 0, 0, 0, 0, 0}), params, zeros), F(1));
  Polynomial c0(kP97, {42});
  for (std::size_t idx = 0; idx < params.table_size(); ++idx) {
    auto path = path_of(idx, 4, 3);
    FieldElement expect = F(42);
    for (std::size_t b : path) expect *= z.at(0, b);
    EXPECT_EQ(naive_entry(c0, params, path), expect);
  }
  EXPECT_THROW(naive_entry(c0, params, std::vector<std::size_t>{0, 0}), ValidationError);
  EXPECT_THROW(naive_entry(c0, params, std::vector<std::size_t>{0, 4, 0}), ValidationError);
}

struct Shape {
  u64 d, eta, ceta;
};

void PrintTo(const Shape& s, std::ostream* os) { *os << "d" << s.d << "_eta" << s.eta << "_ceta" << s.ceta; }

class OracleEquivalence : public ::testing::TestWithParam<Shape> {};

TEST_P(OracleEquivalence, BuildTableMatchesNaiveEntryEverywhere) {
  const auto [d, eta, ceta] = GetParam();
  PrimeModulus m(kMersenne61);
  auto params = derive_params(m, d, eta, ceta);
  std::mt19937_64 rng(d * 1000 + eta * 10 + ceta);
  for (int t = 0; t < 3; ++t) {
    Polynomial f(m, random_residues(rng, m.value(), d));
    auto table = build_table(f, params);
    ASSERT_EQ(table.size(), params.table_size());
    for (std::size_t idx = 0; idx < table.size(); ++idx) {
      auto path = path_of(idx, ceta, params.r());
      ASSERT_EQ(table.index_of(path), idx);
      ASSERT_EQ(table.entry(path), naive_entry(f, params, path)) << "index " << idx;
    }
  }
}

TEST_P(OracleEquivalence, NaiveTableMatchesNaiveEntry) {
  const auto [d, eta, ceta] = GetParam();
  auto params = derive_params(kP97, d, eta, ceta);
  std::mt19937_64 rng(d + eta + ceta);
  Polynomial f(kP97, random_residues(rng, 97, d));
  auto all = naive_table(f, params);
  ASSERT_EQ(all.size(), params.table_size());
  for (std::size_t idx = 0; idx < all.size(); ++idx) {
    ASSERT_EQ(all[idx], naive_entry(f, params, path_of(idx, ceta, params.r())).value());
  }
}

INSTANTIATE_TEST_SUITE_P(Shapes, OracleEquivalence,
                         ::testing::Values(Shape{4, 2, 3}, Shape{4, 2, 4}, Shape{5, 2, 4}, Shape{16, 2, 3},
                                           Shape{16, 4, 8}, Shape{64, 4, 8}, Shape{27, 3, 5}, Shape{10, 3, 4}));

TEST(LookupTest, IndexExtremesAndBounds) {
  auto params = derive_params(kP97, 8, 2, 3);
  auto table = build_table(Polynomial(kP97, {1, 2, 3}), params);
  EXPECT_EQ(table.index_of(std::vector<std::size_t>{0, 0, 0}), 0u);
  EXPECT_EQ(table.index_of(std::vector<std::size_t>{2, 2, 2}), 26u);
  EXPECT_EQ(table.index_of(std::vector<std::size_t>{1, 0, 0}), 9u);
  EXPECT_THROW(table.index_of(std::vector<std::size_t>{3, 0, 0}), std::out_of_range);
  EXPECT_THROW(table.index_of(std::vector<std::size_t>{0, 0}), std::out_of_range);
}

TEST(LookupTest, FileRoundTripAndBinding) {
  std::mt19937_64 rng(32);
  auto params = derive_params(kP97, 16, 2, 3);
  Polynomial f(kP97, random_residues(rng, 97, 16));
  auto table = build_table(f, params);
  std::string body = serialize_table(table);
  EXPECT_EQ(body.substr(0, body.find('\n')),
            "VPE-TABLE v1 modulus=97 d=16 eta=2 ceta=3 r=4 digest=" + params_digest(params));
  auto back = parse_table(body, params);
  EXPECT_EQ(back, table);

  auto other = derive_params(kP97, 16, 2, 4);
  EXPECT_THROW(parse_table(body, other), DigestMismatch);
  EXPECT_THROW(check_binding(table, other), DigestMismatch);

  std::string truncated = body.substr(0, body.rfind('\n', body.size() - 2) + 1);
  EXPECT_THROW(parse_table(truncated), ParseError);
  EXPECT_THROW(parse_table("VPE-TABLE v1 modulus=97\n"), ParseError);
}

TEST(LookupTest, PeakMemoryAtMostTwiceWidestLevel) {
  std::mt19937_64 rng(33);
  for (Shape s : {Shape{64, 2, 4}, Shape{256, 4, 8}, Shape{81, 3, 4}}) {
    auto params = derive_params(kP97, s.d, s.eta, s.ceta);
    BuildStats stats;
    build_table(Polynomial(kP97, random_residues(rng, 97, s.d)), params, {.stats = &stats});
    EXPECT_EQ(stats.widest_level, params.table_size());
    EXPECT_LE(stats.peak_live_coefficients, 2 * stats.widest_level);
  }
}

TEST(LookupTest, MultiplicationCountWithinBound) {
  std::mt19937_64 rng(34);
  for (Shape s : {Shape{16, 2, 3}, Shape{64, 2, 4}, Shape{256, 4, 8}, Shape{81, 3, 5}}) {
    auto params = derive_params(kP97, s.d, s.eta, s.ceta);
    BuildStats stats;
    build_table(Polynomial(kP97, random_residues(rng, 97, s.d)), params, {.stats = &stats});
    const double c = params.c();
    const double bound = static_cast<double>(params.table_size()) * s.eta * c / (c - 1);
    EXPECT_LE(static_cast<double>(stats.ops.mul), 2.0 * bound) << s.d << " " << s.eta << " " << s.ceta;
  }
}

TEST(LookupTest, CountGrowsByCetaPerLevel) {
  std::mt19937_64 rng(35);
  double prev = 0;
  for (u64 r = 2; r <= 7; ++r) {
    u64 d = u64{1} << r;
    auto params = derive_params(kP97, d, 2, 4);
    BuildStats stats;
    build_table(Polynomial(kP97, random_residues(rng, 97, d)), params, {.stats = &stats});
    double cur = static_cast<double>(stats.ops.mul);
    if (prev > 0) {
      EXPECT_NEAR(cur / prev, 4.0, 4.0 * 0.3) << "r=" << r;
    }
    prev = cur;
  }
}

TEST(LookupTest, ParallelBuildIsBitIdentical) {
  std::mt19937_64 rng(36);
  auto params = derive_params(PrimeModulus(kMersenne61), 256, 2, 4);
  Polynomial f(params.modulus(), random_residues(rng, params.p(), 256));
  BuildStats seq_stats, par_stats;
  auto seq = build_table(f, params, {.threads = 1, .stats = &seq_stats});
  auto par = build_table(f, params, {.threads = 4, .stats = &par_stats});
  EXPECT_EQ(seq, par);
  EXPECT_EQ(seq_stats.ops, par_stats.ops);
}

TEST(LookupTest, OuterScopeSeesBuildCost) {
  auto params = derive_params(kP97, 16, 2, 4);
  OpCounts outer;
  BuildStats stats;
  {
    CountScope s(outer);
    build_table(Polynomial(kP97, {1, 2, 3}), params, {.stats = &stats});
  }
  EXPECT_EQ(outer, stats.ops);
  EXPECT_GT(outer.mul, 0u);
}

TEST(LookupTest, RejectsMismatchAndOversize) {
  auto params = derive_params(kP97, 4, 2, 4);
  EXPECT_THROW(build_table(Polynomial(PrimeModulus(101), {1}), params), ValidationError);
  EXPECT_THROW(build_table(Polynomial(kP97, {1, 2, 3, 4, 5}), params), ValidationError);
  auto big = derive_params(kP97, 1 << 10, 2, 4);
  EXPECT_THROW(build_table(Polynomial(kP97, {1}), big, {.max_entries = 1 << 16}), ValidationError);
}

TEST(LookupTest, CoefficientTreeNodesAreFoldChains) {
  std::mt19937_64 rng(37);
  auto params = derive_params(kP97, 16, 2, 3);
  ZTable z = lagrange_table(params);
  Polynomial f(kP97, random_residues(rng, 97, 16));
  CoefficientTree tree(f, params, z);
  ASSERT_EQ(tree.depth(), 4u);
  for (std::size_t b1 = 0; b1 < 3; ++b1)
    for (std::size_t b2 = 0; b2 < 3; ++b2) {
      Polynomial g = fold(fold(f, b1, z), b2, z);
      auto node = tree.node(2, b1 * 3 + b2);
      ASSERT_EQ(std::vector<u64>(node.begin(), node.end()), std::vector<u64>(g.raw().begin(), g.raw().end()));
    }
}

}  // namespace
}  // namespace vpe
