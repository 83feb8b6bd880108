#pragma once

// Continued-fraction machinery for irrational rotation numbers.
//
// A RotationNumber is defined by its partial-quotient stream a_1, a_2, ...
// (a_0 = 0, the value lies in (0,1)). The stream is the source of truth: the
// real value, the convergents p_n/q_n and the signed errors q_n*alpha - p_n
// are all derived from it. Quotients are generated lazily and memoized behind
// a mutex, so one RotationNumber may be shared between threads.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "dylab/errors.hpp"

namespace dylab {

using BigInt = boost::multiprecision::cpp_int;
using BigFloat = boost::multiprecision::cpp_bin_float_100;

struct Convergent {
  BigInt p;
  BigInt q;
};

/// Exact value (x + y*sqrt(d)) / den with integer parts, d > 0 non-square.
struct SurdValue {
  BigInt x, y, den, d;

  /// Sign of the numerator x + y*sqrt(d), decided in integer arithmetic.
  static int numerator_sign(const BigInt& x, const BigInt& y, const BigInt& d) {
    const int sx = x.sign();
    const int sy = y.sign();
    if (sy == 0) return sx;
    if (sx == 0 || sx == sy) return sy;
    // Opposite signs: compare x^2 against y^2 d.
    const BigInt lhs = x * x;
    const BigInt rhs = y * y * d;
    if (lhs == rhs) return 0;
    return lhs > rhs ? sx : sy;
  }

  int sign() const { return numerator_sign(x, y, d) * den.sign(); }

  /// Exact test |value| * factor < bound for non-negative integer factor/bound.
  bool abs_scaled_less(const BigInt& factor, const BigInt& bound) const {
    const int s = numerator_sign(x, y, d);
    // |x + y sqrt d| * factor < bound * |den|
    const BigInt abs_den = den.sign() < 0 ? BigInt(-den) : den;
    return numerator_sign(bound * abs_den - s * factor * x, -s * factor * y, d) > 0;
  }

  BigFloat to_big() const {
    return (BigFloat(x) + BigFloat(y) * boost::multiprecision::sqrt(BigFloat(d))) / BigFloat(den);
  }
};

/// Result of a Brjuno partial sum. When the stream contains quotients too
/// large to materialize, the affected terms contribute their certified lower
/// bound and `lower_bound_only` is set.
struct BrjunoSum {
  double value = 0.0;
  bool lower_bound_only = false;
  std::size_t exact_terms = 0;
};

/// Precision policy shared by the operations that round to binary64.
/// `digits` is the number of significant decimal digits that must be
/// certified for a float-seeded rotation number.
struct PrecisionPolicy {
  int digits = 10;
};

namespace detail {

inline BigInt floor_div(const BigInt& a, const BigInt& b) {
  BigInt q = a / b;
  BigInt r = a % b;
  if (r != 0 && ((r.sign() < 0) != (b.sign() < 0))) --q;
  return q;
}

/// One term of a quotient stream.
struct QuotientTerm {
  enum class Status { exact, terminated, untrusted, unbounded };
  Status status = Status::exact;
  BigInt value;
  // For unbounded terms: certified lower bounds on log(a_i) and on the Brjuno
  // term log(q_i) / q_{i-1}.
  double log_quotient_lower = 0.0;
  double brjuno_term_lower = 0.0;
};

/// Produces a_i given i >= 1 and the convergent denominators q_0..q_{i-1}.
using QuotientGenerator = std::function<QuotientTerm(std::size_t, const std::vector<BigInt>&)>;

}  // namespace detail

class RotationNumber {
 public:
  enum class Kind { quadratic_surd, quotient_list, float_seed, stream };

  /// alpha = (a + b*sqrt(d)) / c, reduced mod 1 into (0,1).
  static RotationNumber surd(BigInt a, BigInt b, BigInt c, BigInt d) {
    if (c == 0) throw DomainError("surd denominator must be non-zero");
    if (d <= 0) throw DomainError("surd radicand must be positive");
    const BigInt s = boost::multiprecision::sqrt(d);
    if (b == 0 || s * s == d) throw RationalityError(0);
    if (c < 0) {
      a = -a;
      b = -b;
      c = -c;
    }
    // Reduce into (0,1): a -= floor(alpha) * c.
    const BigFloat approx = SurdValue{a, b, c, d}.to_big();
    BigInt fl(boost::multiprecision::floor(approx));
    a -= fl * c;
    // Guard against the float floor being off by one near an integer.
    while (SurdValue{a, b, c, d}.sign() < 0) a += c;
    while (SurdValue{a - c, b, c, d}.sign() > 0) a -= c;

    auto st = std::make_shared<State>(Kind::quadratic_surd);
    st->surd = SurdValue{a, b, c, d};
    // Complete quotient x_1 = 1/alpha written as (P + sqrt(D)) / Q with Q | D - P^2.
    BigInt P = b > 0 ? a : BigInt(-a);
    BigInt Q = b > 0 ? c : BigInt(-c);
    BigInt D = b * b * d;
    if ((D - P * P) % Q != 0) {
      const BigInt aq = Q < 0 ? BigInt(-Q) : Q;
      P *= aq;
      D *= Q * Q;
      Q *= aq;
    }
    // x_0 = alpha has a_0 = 0; step to x_1 = 1/(x_0 - 0).
    BigInt P1 = -P;
    BigInt Q1 = (D - P1 * P1) / Q;
    st->radicand = D;
    st->isqrt_radicand = boost::multiprecision::sqrt(D);
    st->complete.push_back({0, 0});  // index 0 unused
    st->complete.push_back({P1, Q1});
    std::weak_ptr<State> weak = st;
    st->generator = [weak](std::size_t i, const std::vector<BigInt>&) {
      auto self = weak.lock();
      detail::QuotientTerm t;
      auto [Pi, Qi] = self->complete[i];
      const BigInt& s = self->isqrt_radicand;
      BigInt ai = Qi > 0 ? detail::floor_div(Pi + s, Qi)
                         : BigInt(-detail::floor_div(Pi + s, BigInt(-Qi)) - 1);
      BigInt Pn = ai * Qi - Pi;
      BigInt Qn = (self->radicand - Pn * Pn) / Qi;
      self->complete.push_back({Pn, Qn});
      t.value = ai;
      return t;
    };
    return RotationNumber(std::move(st));
  }

  static RotationNumber golden() { return surd(-1, 1, 2, 5); }

  /// Quotients a_1..a_k of `prefix`, followed by `period` repeated forever.
  /// An empty period describes a rational number.
  static RotationNumber from_quotients(std::vector<BigInt> prefix, std::vector<BigInt> period = {}) {
    for (const auto& v : prefix)
      if (v < 1) throw DomainError("partial quotients must be >= 1");
    for (const auto& v : period)
      if (v < 1) throw DomainError("partial quotients must be >= 1");
    auto st = std::make_shared<State>(Kind::quotient_list);
    st->generator = [prefix = std::move(prefix), period = std::move(period)](
                        std::size_t i, const std::vector<BigInt>&) {
      detail::QuotientTerm t;
      if (i <= prefix.size()) {
        t.value = prefix[i - 1];
      } else if (!period.empty()) {
        t.value = period[(i - 1 - prefix.size()) % period.size()];
      } else {
        t.status = detail::QuotientTerm::Status::terminated;
      }
      return t;
    };
    return RotationNumber(std::move(st));
  }

  /// A decimal approximation "0.1415926..." of an irrational number. The
  /// quotients are trusted only while both ends of the rounding interval
  /// agree on them.
  static RotationNumber from_decimal(const std::string& text, PrecisionPolicy policy = {}) {
    static const std::regex re(R"(^\s*(\d*)\.(\d+)\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, re)) throw DomainError("not a decimal number: " + text);
    const std::string ip = m[1].str().empty() ? "0" : m[1].str();
    const std::string fp = m[2].str();
    BigInt scale = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(fp.size()));
    BigInt num = BigInt(ip) * scale + BigInt(fp);
    num %= scale;  // reduce mod 1
    if (num == 0) throw RationalityError(0);
    auto st = std::make_shared<State>(Kind::float_seed);
    st->policy = policy;
    st->seed_num = num;
    st->seed_den = scale;
    // Rounding interval [num - 1/2, num + 1/2] / scale.
    st->lo = {2 * num - 1, 2 * scale};
    st->hi = {2 * num + 1, 2 * scale};
    std::weak_ptr<State> weak = st;
    st->generator = [weak](std::size_t, const std::vector<BigInt>&) {
      auto self = weak.lock();
      detail::QuotientTerm t;
      auto step = [](std::pair<BigInt, BigInt>& r) -> std::optional<BigInt> {
        // r = num/den in (0,1): next quotient of 1/r.
        if (r.first == 0) return std::nullopt;
        BigInt a = r.second / r.first;
        BigInt rem = r.second % r.first;
        r = {rem, r.first};
        return a;
      };
      auto a_lo = step(self->lo);
      auto a_hi = step(self->hi);
      if (!a_lo || !a_hi || *a_lo != *a_hi) {
        t.status = detail::QuotientTerm::Status::untrusted;
        return t;
      }
      t.value = *a_lo;
      return t;
    };
    return RotationNumber(std::move(st));
  }

  /// a_n = growth(n) for n >= 1.
  static RotationNumber from_stream(std::function<BigInt(std::size_t)> growth) {
    auto st = std::make_shared<State>(Kind::stream);
    st->generator = [growth = std::move(growth)](std::size_t i, const std::vector<BigInt>&) {
      detail::QuotientTerm t;
      t.value = growth(i);
      if (t.value < 1) throw DomainError("growth(n) must be >= 1");
      return t;
    };
    return RotationNumber(std::move(st));
  }

  /// Quotients chosen so that q_{n+1} >= exp(rate * q_n) for every n, which
  /// makes every Brjuno term at least `rate`. Quotients whose size would
  /// exceed `bit_budget` bits are not materialized: they are known only
  /// through these certified bounds.
  static RotationNumber exp_growth(double rate, unsigned bit_budget = 1024) {
    if (!(rate > 0)) throw DomainError("growth rate must be positive");
    auto st = std::make_shared<State>(Kind::stream);
    st->generator = [rate, bit_budget](std::size_t i, const std::vector<BigInt>& q) {
      detail::QuotientTerm t;
      const BigInt& q_prev = q[i - 1];
      const BigInt q_prev2 = i >= 2 ? q[i - 2] : BigInt(0);
      const BigFloat exponent = BigFloat(rate) * BigFloat(q_prev);
      if (exponent > BigFloat(bit_budget) * boost::multiprecision::log(BigFloat(2))) {
        t.status = detail::QuotientTerm::Status::unbounded;
        t.brjuno_term_lower = rate;
        const double lq = static_cast<double>(boost::multiprecision::log(BigFloat(q_prev)));
        t.log_quotient_lower = rate * static_cast<double>(q_prev) - lq;
        return t;
      }
      // a = ceil((e^{rate q} - q_{n-1}) / q_n), inflated to stay an upper bound.
      BigFloat target = boost::multiprecision::exp(exponent) * (1 + BigFloat("1e-80"));
      BigFloat a = (target - BigFloat(q_prev2)) / BigFloat(q_prev);
      BigInt ai(boost::multiprecision::ceil(a));
      if (ai < 1) ai = 1;
      t.value = ai;
      return t;
    };
    return RotationNumber(std::move(st));
  }

  Kind kind() const { return state_->kind; }

  /// Partial quotient a_i, i >= 1 (a_0 = 0).
  BigInt quotient(std::size_t i) const {
    if (i == 0) return 0;
    std::lock_guard lock(state_->mutex);
    ensure_locked(i);
    return state_->a[i];
  }

  /// Convergents (p_0,q_0) .. (p_{count-1}, q_{count-1}).
  std::vector<Convergent> convergents(std::size_t count) const {
    if (count == 0) throw DomainError("count must be >= 1");
    std::lock_guard lock(state_->mutex);
    ensure_locked(count - 1);
    std::vector<Convergent> out;
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) out.push_back({state_->p[n], state_->q[n]});
    return out;
  }

  Convergent convergent(std::size_t n) const {
    std::lock_guard lock(state_->mutex);
    ensure_locked(n);
    return {state_->p[n], state_->q[n]};
  }

  /// q_n * alpha - p_n, computed as (-1)^n / (q_n x_{n+1} + q_{n-1}) from the
  /// complete quotient x_{n+1}, so no cancellation occurs for large q_n.
  BigFloat signed_error_big(std::size_t n) const {
    std::lock_guard lock(state_->mutex);
    return signed_error_locked(n);
  }

  double signed_error(std::size_t n) const {
    const BigFloat e = signed_error_big(n);
    const double v = static_cast<double>(e);
    if (v == 0.0 || !std::isfinite(v))
      throw PrecisionError("signed error underflows binary64", n == 0 ? 0 : n - 1);
    return v;
  }

  /// Exact q_n*alpha - p_n for surd-backed numbers.
  SurdValue signed_error_exact(std::size_t n) const {
    if (state_->kind != Kind::quadratic_surd)
      throw DomainError("exact signed error needs a quadratic surd");
    const Convergent c = convergent(n);
    const SurdValue& s = state_->surd;
    return SurdValue{c.q * s.x - c.p * s.den, c.q * s.y, s.den, s.d};
  }

  BigFloat value_big() const {
    if (state_->kind == Kind::float_seed) return BigFloat(state_->seed_num) / BigFloat(state_->seed_den);
    return signed_error_big(0);
  }
  double value() const { return static_cast<double>(value_big()); }

  /// Sum_{n=0}^{N} log(q_{n+1}) / q_n.
  BrjunoSum brjuno_partial_sum(std::size_t N) const {
    std::lock_guard lock(state_->mutex);
    BrjunoSum out;
    BigFloat sum = 0;
    double bound_part = 0.0;
    for (std::size_t n = 0; n <= N; ++n) {
      generate_locked(n + 1);
      const auto& term = state_->terms[n + 1];
      if (term.status == detail::QuotientTerm::Status::exact && n + 1 < state_->q.size()) {
        sum += boost::multiprecision::log(BigFloat(state_->q[n + 1])) / BigFloat(state_->q[n]);
        ++out.exact_terms;
      } else if (term.status == detail::QuotientTerm::Status::unbounded) {
        // Once one quotient is unbounded every later one is as well.
        for (std::size_t k = n; k <= N; ++k) {
          generate_locked(k + 1);
          const auto& tk = state_->terms[k + 1];
          if (tk.status != detail::QuotientTerm::Status::unbounded)
            throw PrecisionError("mixed exact and unbounded quotients", n);
          bound_part += tk.brjuno_term_lower;
        }
        out.lower_bound_only = true;
        break;
      } else {
        raise_for_term(n + 1);
      }
    }
    out.value = static_cast<double>(sum) + bound_part;
    return out;
  }

  /// Number of quotients that can be materialized exactly (stops at the
  /// first non-exact term, or at `limit`).
  std::size_t exact_depth(std::size_t limit) const {
    std::lock_guard lock(state_->mutex);
    for (std::size_t i = 1; i <= limit; ++i) {
      generate_locked(i);
      if (state_->terms[i].status != detail::QuotientTerm::Status::exact) return i - 1;
    }
    return limit;
  }

 private:
  struct State {
    explicit State(Kind k) : kind(k) {
      a.push_back(0);
      terms.emplace_back();
      p = {0};
      q = {1};
    }
    Kind kind;
    std::mutex mutex;
    detail::QuotientGenerator generator;
    std::vector<BigInt> a;                    // a[0] = 0, then a_1..
    std::vector<detail::QuotientTerm> terms;  // terms[i] for i >= 1
    std::vector<BigInt> p, q;                 // convergents for exact prefix
    // surd data
    SurdValue surd;
    BigInt radicand, isqrt_radicand;
    std::vector<std::pair<BigInt, BigInt>> complete;  // (P_i, Q_i) of x_i
    // float seed data
    PrecisionPolicy policy;
    BigInt seed_num, seed_den;
    std::pair<BigInt, BigInt> lo, hi;
  };

  explicit RotationNumber(std::shared_ptr<State> st) : state_(std::move(st)) {}

  // Generates stream terms up to index i (does not throw on non-exact terms).
  void generate_locked(std::size_t i) const {
    State& s = *state_;
    while (s.terms.size() <= i) {
      const std::size_t k = s.terms.size();
      // A non-exact term ends the stream; later terms inherit its status.
      const auto& last = s.terms.back();
      if (k > 1 && last.status != detail::QuotientTerm::Status::exact) {
        s.terms.push_back(last);
        continue;
      }
      detail::QuotientTerm t = s.generator(k, s.q);
      if (t.status == detail::QuotientTerm::Status::exact) {
        s.a.push_back(t.value);
        s.p.push_back(t.value * s.p[k - 1] + (k >= 2 ? s.p[k - 2] : BigInt(1)));
        s.q.push_back(t.value * s.q[k - 1] + (k >= 2 ? s.q[k - 2] : BigInt(0)));
      }
      s.terms.push_back(std::move(t));
    }
  }

  [[noreturn]] void raise_for_term(std::size_t i) const {
    const auto& t = state_->terms[i];
    switch (t.status) {
      case detail::QuotientTerm::Status::terminated:
        throw RationalityError(i - 1);
      case detail::QuotientTerm::Status::untrusted:
        throw PrecisionError("float seed cannot certify partial quotient " + std::to_string(i),
                             i - 1);
      case detail::QuotientTerm::Status::unbounded:
        throw PrecisionError("partial quotient " + std::to_string(i) + " is too large to represent",
                             i - 1);
      default:
        throw Error("internal: exact term reported as failure");
    }
  }

  void ensure_locked(std::size_t i) const {
    generate_locked(i);
    for (std::size_t k = 1; k <= i; ++k)
      if (state_->terms[k].status != detail::QuotientTerm::Status::exact) raise_for_term(k);
  }

  // Complete quotient x_k = [a_k; a_{k+1}, ...] at 100-digit precision.
  BigFloat complete_quotient_locked(std::size_t k) const {
    State& s = *state_;
    if (s.kind == Kind::quadratic_surd) {
      ensure_locked(k);
      auto [P, Q] = s.complete[k];
      return (BigFloat(P) + boost::multiprecision::sqrt(BigFloat(s.radicand))) / BigFloat(Q);
    }
    ensure_locked(k);
    // Backward evaluation of the tail, doubling its depth until stable. A huge
    // unbounded quotient ends the tail: its contribution is below 1e-100.
    auto tail_value = [&](std::size_t depth) -> std::pair<BigFloat, bool> {
      generate_locked(k + depth);
      std::size_t last = k + depth;
      bool ended = false;
      for (std::size_t i = k + 1; i <= k + depth; ++i) {
        const auto& term = s.terms[i];
        if (term.status == detail::QuotientTerm::Status::exact) continue;
        if (term.status == detail::QuotientTerm::Status::unbounded && term.log_quotient_lower > 240.0) {
          last = i - 1;
          ended = true;
          break;
        }
        raise_for_term(i);
      }
      BigFloat t = BigFloat(s.a[last]);
      for (std::size_t i = last; i-- > k;) t = BigFloat(s.a[i]) + 1 / t;
      return {t, ended};
    };
    std::size_t depth = 32;
    auto [prev, ended] = tail_value(depth);
    if (ended) return prev;
    for (int iter = 0; iter < 12; ++iter) {
      depth *= 2;
      auto [next, next_ended] = tail_value(depth);
      if (next_ended ||
          boost::multiprecision::abs(next - prev) <= BigFloat("1e-95") * boost::multiprecision::abs(next))
        return next;
      prev = next;
    }
    return prev;
  }

  BigFloat signed_error_locked(std::size_t n) const {
    State& s = *state_;
    if (s.kind == Kind::float_seed) {
      // Evaluate from the seed itself and certify against its rounding radius.
      ensure_locked(n + 1);
      const BigFloat mid = BigFloat(s.seed_num) / BigFloat(s.seed_den);
      const BigFloat radius = BigFloat(0.5) / BigFloat(s.seed_den);
      const BigFloat e = BigFloat(s.q[n]) * mid - BigFloat(s.p[n]);
      const BigFloat err = BigFloat(s.q[n]) * radius;
      const BigFloat rel = boost::multiprecision::pow(BigFloat(10), -s.policy.digits);
      if (err > rel * boost::multiprecision::abs(e))
        throw PrecisionError("float seed cannot certify q_n*alpha - p_n at index " + std::to_string(n),
                             n == 0 ? 0 : n - 1);
      return e;
    }
    ensure_locked(n);
    const BigFloat x = complete_quotient_locked(n + 1);
    const BigFloat qm1 = n >= 1 ? BigFloat(s.q[n - 1]) : BigFloat(0);
    const BigFloat sgn = (n % 2 == 0) ? 1 : -1;
    return sgn / (BigFloat(s.q[n]) * x + qm1);
  }

  std::shared_ptr<State> state_;
};

// Free-function forms.

inline std::vector<Convergent> convergents(const RotationNumber& alpha, std::size_t count) {
  return alpha.convergents(count);
}

inline double signed_error(const RotationNumber& alpha, std::size_t n) { return alpha.signed_error(n); }

inline BrjunoSum brjuno_partial_sum(const RotationNumber& alpha, std::size_t N) {
  return alpha.brjuno_partial_sum(N);
}

inline RotationNumber liouville_stream(std::function<BigInt(std::size_t)> growth) {
  return RotationNumber::from_stream(std::move(growth));
}

/// Parses "golden", "(a+b*sqrt(d))/c", "[0;a1,a2,(p1,p2)]" or a decimal.
inline RotationNumber parse_rotation_number(const std::string& text, PrecisionPolicy policy = {}) {
  static const std::regex surd_re(
      R"(^\s*\(\s*(-?\d+)\s*([+-])\s*(?:(\d+)\s*\*\s*)?sqrt\(\s*(\d+)\s*\)\s*\)\s*/\s*(-?\d+)\s*$)");
  static const std::regex list_re(R"(^\s*\[\s*0\s*;([^\]]*)\]\s*$)");
  static const std::regex exp_re(R"(^\s*exp-growth:\s*([0-9.eE+-]+)\s*$)");
  std::smatch m;
  if (text == "golden") return RotationNumber::golden();
  if (std::regex_match(text, m, surd_re)) {
    BigInt b = m[3].matched ? BigInt(m[3].str()) : BigInt(1);
    if (m[2].str() == "-") b = -b;
    return RotationNumber::surd(BigInt(m[1].str()), b, BigInt(m[5].str()), BigInt(m[4].str()));
  }
  if (std::regex_match(text, m, exp_re)) return RotationNumber::exp_growth(std::stod(m[1].str()));
  if (std::regex_match(text, m, list_re)) {
    std::string body = m[1].str();
    std::vector<BigInt> prefix, period;
    const auto open = body.find('(');
    std::string head = body.substr(0, open);
    auto split = [](const std::string& s, std::vector<BigInt>& out) {
      static const std::regex num(R"(\d+)");
      for (auto it = std::sregex_iterator(s.begin(), s.end(), num); it != std::sregex_iterator(); ++it)
        out.emplace_back(it->str());
    };
    split(head, prefix);
    if (open != std::string::npos) {
      const auto close = body.find(')', open);
      if (close == std::string::npos) throw DomainError("unterminated period in " + text);
      split(body.substr(open + 1, close - open - 1), period);
      if (period.empty()) throw DomainError("empty period in " + text);
    }
    return RotationNumber::from_quotients(std::move(prefix), std::move(period));
  }
  return RotationNumber::from_decimal(text, policy);
}

}  // namespace dylab
