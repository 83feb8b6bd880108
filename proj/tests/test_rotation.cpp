#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "dylab/rotation.hpp"

using namespace dylab;

namespace {

// Oracle: plain floor/reciprocal continued fraction on a 100-digit float.
std::vector<BigInt> naive_quotients(BigFloat x, int count) {
  std::vector<BigInt> out;
  for (int i = 0; i < count; ++i) {
    x = 1 / x;
    BigFloat f = boost::multiprecision::floor(x);
    out.emplace_back(f);
    x -= f;
  }
  return out;
}

}  // namespace

TEST(Convergents, GoldenMeanGivesFibonacciPairs) {
  const auto c = RotationNumber::golden().convergents(6);
  const int expected[6][2] = {{0, 1}, {1, 1}, {1, 2}, {2, 3}, {3, 5}, {5, 8}};
  for (int n = 0; n < 6; ++n) {
    EXPECT_EQ(c[n].p, expected[n][0]) << n;
    EXPECT_EQ(c[n].q, expected[n][1]) << n;
  }
}

TEST(Convergents, PiMinusThree) {
  const BigFloat pi3 = boost::math::constants::pi<BigFloat>() - 3;
  const auto a = naive_quotients(pi3, 3);
  ASSERT_EQ(a[0], 7);
  ASSERT_EQ(a[1], 15);
  ASSERT_EQ(a[2], 1);
  const auto alpha = RotationNumber::from_decimal("0.14159265358979323846264338327950288");
  const auto c = alpha.convergents(4);
  EXPECT_EQ(c[1].p, 1);
  EXPECT_EQ(c[1].q, 7);
  EXPECT_EQ(c[2].p, 15);
  EXPECT_EQ(c[2].q, 106);
  EXPECT_EQ(c[3].p, 16);
  EXPECT_EQ(c[3].q, 113);
}

TEST(Convergents, DeterminantAtFirstIndex) {
  for (const auto& alpha : {RotationNumber::golden(), RotationNumber::surd(0, 1, 1, 2),
                            parse_rotation_number("[0;3,(1,2)]")}) {
    const auto c = alpha.convergents(2);
    EXPECT_EQ(c[1].q * c[0].p - c[1].p * c[0].q, -1);
  }
}

TEST(Convergents, RationalInputIsRejected) {
  const auto alpha = RotationNumber::from_quotients({BigInt(2), BigInt(3)});
  EXPECT_NO_THROW(alpha.convergents(3));
  EXPECT_THROW(alpha.convergents(4), RationalityError);
  EXPECT_THROW(RotationNumber::surd(1, 1, 3, 4), RationalityError);
}

TEST(Convergents, FloatSeedReportsLastTrustedIndex) {
  const auto alpha = RotationNumber::from_decimal("0.6180339887");
  try {
    alpha.convergents(60);
    FAIL() << "expected a precision error";
  } catch (const PrecisionError& e) {
    // Ten digits pin roughly 23 Fibonacci quotients.
    EXPECT_GT(e.last_trusted(), 15u);
    EXPECT_LT(e.last_trusted(), 30u);
    EXPECT_NO_THROW(alpha.convergents(e.last_trusted() + 1));
  }
}

TEST(Convergents, SurdQuotientsMatchNaiveExpansion) {
  const auto alpha = RotationNumber::surd(3, 2, 7, 11);  // (3 + 2 sqrt 11)/7 mod 1
  const auto a = naive_quotients(alpha.value_big(), 40);
  for (int i = 0; i < 40; ++i) EXPECT_EQ(alpha.quotient(i + 1), a[i]) << i;
}

TEST(SignedError, GoldenValues) {
  const auto g = RotationNumber::golden();
  EXPECT_NEAR(g.signed_error(3), -0.1458980337503155, 1e-15);
  EXPECT_NEAR(g.signed_error(4), 0.0901699437494742, 1e-15);
  EXPECT_DOUBLE_EQ(g.signed_error(0), g.value());
}

TEST(SignedError, SurdExactAgreesWithBinary64Route) {
  // Exact surd arithmetic versus the continued fraction evaluated in binary64:
  // e_n = (-1)^n / (q_n x_{n+1} + q_{n-1}) with the tail x_{n+1} summed backward.
  for (const auto& alpha : {RotationNumber::golden(), RotationNumber::surd(0, 1, 1, 2),
                            RotationNumber::surd(1, 1, 3, 7)}) {
    const auto cs = alpha.convergents(60);
    for (std::size_t n = 0; n + 1 < cs.size(); ++n) {
      if (cs[n + 1].q >= 10'000'000) break;
      double tail = static_cast<double>(alpha.quotient(n + 40));
      for (std::size_t i = n + 40; i-- > n + 1;) tail = static_cast<double>(alpha.quotient(i)) + 1.0 / tail;
      const double qm1 = n ? static_cast<double>(cs[n - 1].q) : 0.0;
      const double binary64 = (n % 2 ? -1.0 : 1.0) / (static_cast<double>(cs[n].q) * tail + qm1);
      EXPECT_NEAR(static_cast<double>(alpha.signed_error_exact(n).to_big()), binary64, 1e-10);
      EXPECT_NEAR(alpha.signed_error(n), binary64, 1e-10);
      // The naive product only holds to the rounding of alpha times q_n.
      const double naive = static_cast<double>(cs[n].q) * alpha.value() - static_cast<double>(cs[n].p);
      EXPECT_NEAR(alpha.signed_error(n), naive, 2e-16 * static_cast<double>(cs[n].q) + 1e-16);
    }
  }
}

TEST(SignedError, FloatSeedPrecisionExhaustion) {
  const auto alpha = RotationNumber::from_decimal("0.41421356237309504880");
  EXPECT_NEAR(alpha.signed_error(3), 12 * 0.41421356237309504880 - 5, 1e-12);
  EXPECT_THROW(alpha.signed_error(40), PrecisionError);
}

TEST(Brjuno, GoldenPartialSum) {
  const auto s = RotationNumber::golden().brjuno_partial_sum(10);
  EXPECT_NEAR(s.value, 3.172870480444557, 1e-12);
  EXPECT_FALSE(s.lower_bound_only);
}

TEST(Brjuno, FirstTermVanishesWhenFirstQuotientIsOne) {
  EXPECT_EQ(RotationNumber::golden().brjuno_partial_sum(0).value, 0.0);
  EXPECT_EQ(parse_rotation_number("[0;1,5,(2)]").brjuno_partial_sum(0).value, 0.0);
}

TEST(Brjuno, ExpGrowthStreamExceedsForty) {
  const auto alpha = RotationNumber::exp_growth(10.0);
  EXPECT_EQ(alpha.quotient(1), 22027);
  const auto s = alpha.brjuno_partial_sum(4);
  EXPECT_TRUE(s.lower_bound_only);
  EXPECT_EQ(s.exact_terms, 1u);
  EXPECT_GT(s.value, 40.0);
  EXPECT_NEAR(alpha.value(), 1.0 / 22027.0, 1e-18);
  EXPECT_THROW(alpha.convergents(4), PrecisionError);
}

TEST(Brjuno, BigIntegerDenominatorsDoNotWrap) {
  // q_n passes 2^64 around n = 18 for a_n = 10.
  const auto alpha = liouville_stream([](std::size_t) { return BigInt(10); });
  const auto c = alpha.convergents(30);
  EXPECT_GT(c[29].q, BigInt(std::numeric_limits<std::uint64_t>::max()));
  const auto s = alpha.brjuno_partial_sum(28);
  EXPECT_TRUE(std::isfinite(s.value));
}

TEST(Brjuno, NonDecreasingInN) {
  const auto alpha = RotationNumber::exp_growth(1.0);
  double prev = -1;
  for (std::size_t N = 0; N < 6; ++N) {
    const double v = alpha.brjuno_partial_sum(N).value;
    EXPECT_GE(v, prev);
    prev = v;
  }
  const auto g = RotationNumber::surd(1, 1, 3, 7);
  prev = -1;
  for (std::size_t N = 0; N < 30; ++N) {
    const double v = g.brjuno_partial_sum(N).value;
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(LiouvilleStream, ConstantGrowthGivesKnownValues) {
  EXPECT_NEAR(liouville_stream([](std::size_t) { return BigInt(1); }).value(), 0.6180339887498949, 1e-15);
  EXPECT_NEAR(liouville_stream([](std::size_t) { return BigInt(2); }).value(), 0.4142135623730950, 1e-15);
  const auto fast = liouville_stream([](std::size_t n) {
    return BigInt(boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(n)));
  });
  const auto c = fast.convergents(3);
  EXPECT_EQ(c[1].p, 1);
  EXPECT_EQ(c[1].q, 10);
  EXPECT_EQ(c[2].q, 1001);
}

TEST(Parse, AllSyntaxes) {
  EXPECT_NEAR(parse_rotation_number("(-1+sqrt(5))/2").value(), 0.6180339887498949, 1e-15);
  EXPECT_NEAR(parse_rotation_number("(1+1*sqrt(2))/1").value(), 0.4142135623730950, 1e-15);
  EXPECT_NEAR(parse_rotation_number("[0;(2)]").value(), 0.4142135623730950, 1e-15);
  EXPECT_NEAR(parse_rotation_number("0.25000001").value(), 0.25000001, 1e-15);
  EXPECT_EQ(parse_rotation_number("exp-growth:1").quotient(2), 7);
  EXPECT_THROW(parse_rotation_number("hello"), DomainError);
}

// Property: for surd-backed numbers the recursion, determinant identity, the
// exact bound |q_n a - p_n| < 1/q_{n+1} and sign alternation all hold.
TEST(Property, SurdInvariantsHoldExactly) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> small(-20, 20), pos(1, 30), rad(2, 200);
  int checked = 0;
  while (checked < 60) {
    const int d = rad(rng);
    const int s = static_cast<int>(std::sqrt(d));
    if (s * s == d || (s + 1) * (s + 1) == d) continue;
    int b = small(rng);
    if (b == 0) continue;
    const auto alpha = RotationNumber::surd(small(rng), b, pos(rng), d);
    const auto c = alpha.convergents(30);
    for (std::size_t n = 1; n + 1 < c.size(); ++n) {
      const BigInt a = alpha.quotient(n);
      ASSERT_GE(a, 1);
      ASSERT_EQ(c[n].q, a * c[n - 1].q + (n >= 2 ? c[n - 2].q : BigInt(0)));
      ASSERT_EQ(c[n].p, a * c[n - 1].p + (n >= 2 ? c[n - 2].p : BigInt(1)));
      ASSERT_EQ(c[n].q * c[n - 1].p - c[n].p * c[n - 1].q, (n % 2 == 0) ? 1 : -1);
      const SurdValue e = alpha.signed_error_exact(n);
      ASSERT_EQ(e.sign(), (n % 2 == 0) ? 1 : -1);
      ASSERT_TRUE(e.abs_scaled_less(c[n + 1].q, 1));
    }
    ++checked;
  }
}

TEST(Property, SurdQuotientsAreEventuallyPeriodic) {
  const auto alpha = RotationNumber::surd(2, 3, 5, 13);
  std::vector<BigInt> a;
  for (std::size_t i = 1; i <= 120; ++i) a.push_back(alpha.quotient(i));
  bool found = false;
  for (std::size_t period = 1; period < 40 && !found; ++period) {
    bool ok = true;
    for (std::size_t i = 60; i + period < a.size(); ++i) ok = ok && a[i] == a[i + period];
    found = ok;
  }
  EXPECT_TRUE(found);
}

TEST(Concurrency, SharedMemoizationIsThreadSafe) {
  const auto alpha = RotationNumber::surd(0, 1, 1, 3);
  std::vector<std::thread> pool;
  std::vector<BigInt> last(4);
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&, t] { last[t] = alpha.convergents(200 + 10 * t).back().q; });
  for (auto& th : pool) th.join();
  EXPECT_EQ(alpha.convergents(200).back().q, alpha.convergents(230)[199].q);
}
