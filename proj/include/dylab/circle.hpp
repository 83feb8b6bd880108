#pragma once

// Rotation numbers of lifts, parameter tuning, and the real estimates at
// renormalization level n (m_n, M_n, interval combinatorics, Schwarzian and
// non-linearity bounds for iterates).

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "dylab/circle_lift.hpp"
#include "dylab/errors.hpp"
#include "dylab/report.hpp"
#include "dylab/rotation.hpp"

namespace dylab {

/// Certified bracket lower <= rho(g) <= upper.
struct RotationEstimate {
  double value = 0;
  double lower = 0;
  double upper = 0;
  bool rational = false;
  std::int64_t p = 0;
  std::uint64_t q = 1;
  std::size_t orbit_length = 0;
};

struct RotationOptions {
  std::size_t budget = std::size_t{1} << 22;
  std::size_t start = 1024;
  /// Stop early once the bracket excludes this value.
  std::optional<double> target;
};

namespace detail {

/// Convergents p/q of a double with q <= qmax.
inline std::vector<std::pair<std::int64_t, std::uint64_t>> double_convergents(double x, std::uint64_t qmax) {
  std::vector<std::pair<std::int64_t, std::uint64_t>> out;
  const double a0 = std::floor(x);
  std::int64_t pm = 1, p = static_cast<std::int64_t>(a0);
  std::uint64_t qm = 0, q = 1;
  out.emplace_back(p, q);
  long double r = static_cast<long double>(x) - a0;
  for (int i = 0; i < 64 && r > 1e-30L; ++i) {
    const long double inv = 1.0L / r;
    const long double a = std::floor(inv);
    r = inv - a;
    if (a > 1e15L) break;
    const auto ai = static_cast<std::uint64_t>(a);
    const std::uint64_t qn = ai * q + qm;
    if (qn > qmax) break;
    const std::int64_t pn = static_cast<std::int64_t>(ai) * p + pm;
    pm = p;
    p = pn;
    qm = q;
    q = qn;
    out.emplace_back(p, q);
  }
  return out;
}

inline std::uint64_t to_u64(const BigInt& v, std::uint64_t cap, const char* what) {
  if (v > cap) throw BudgetError(std::string(what) + " exceeds the iteration cap", 0, static_cast<double>(cap));
  return static_cast<std::uint64_t>(v);
}

}  // namespace detail

/// Rotation number of g from one long orbit of 0.
///
/// For each candidate denominator q (closest-return times of the orbit), the
/// displacement phi(x) = g^q(x) - x is known at the sorted orbit points; its
/// inf and sup over the circle are bracketed by monotonicity of g^q between
/// neighbouring samples, and q*rho lies in [inf phi, sup phi]. A sign change
/// of phi - p certifies a periodic orbit and rho = p/q exactly.
inline RotationEstimate rotation_number(const CircleLift& g, double tol, const RotationOptions& opt = {}) {
  if (!(tol > 0)) throw DomainError("tolerance must be positive");
  if (g.is_translation()) {
    const double w = g.translation_amount();
    return {w, w, w, false, 0, 1, 0};
  }
  std::vector<LiftPoint> orbit{make_lift_point(0.0)};
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t> order;
  std::vector<double> phi;
  for (std::size_t L = std::max<std::size_t>(opt.start, 16);; L *= 2) {
    if (L > opt.budget) throw BudgetError("rotation number not certified within the iteration budget", lo, hi);
    orbit.reserve(L + 1);
    while (orbit.size() <= L) orbit.push_back(step(g, orbit.back()));
        const std::size_t K = L / 2;
    order.resize(K);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return orbit[a].frac < orbit[b].frac || (orbit[a].frac == orbit[b].frac && a < b);
    });
    // Candidate denominators are the last closest-return times of the orbit
    // of 0, which for an irrational rotation number are its convergent
    // denominators.
    std::vector<std::pair<std::int64_t, std::uint64_t>> cands;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= K; ++k) {
      const double d = orbit[k] - orbit[0];
      const double r = std::abs(d - std::round(d));
      if (r < best) {
        best = r;
        cands.emplace_back(static_cast<std::int64_t>(std::llround(d)), k);
      }
    }
    if (cands.size() > 3) cands.erase(cands.begin(), cands.end() - 3);
    for (const auto& [p, q] : cands) {
      const double eta = 1e-14 + 1e-15 * static_cast<double>(q);
      phi.resize(K);
      double mn = std::numeric_limits<double>::infinity(), mx = -mn;
      for (std::size_t k = 0; k < K; ++k) {
        phi[k] = orbit[k + q] - orbit[k];
        mn = std::min(mn, phi[k]);
        mx = std::max(mx, phi[k]);
      }
      const double pd = static_cast<double>(p);
      if (q <= 100000) {
        for (int i = 0; i < 16; ++i) {
          const double d = displacement(g, (i + 0.5) / 16.0, q, 0);
          mn = std::min(mn, d);
          mx = std::max(mx, d);
        }
      }
      if (mn < pd - eta && mx > pd + eta) {
        const double r = pd / static_cast<double>(q);
        return {r, r, r, true, p, q, L};
      }
      double lower = std::numeric_limits<double>::infinity(), upper = -lower;
      for (std::size_t i = 0; i < K; ++i) {
        const std::uint32_t a = order[i];
        const std::uint32_t b = order[(i + 1) % K];
        double gap = orbit[b].frac - orbit[a].frac;
        if (i + 1 == K) gap += 1.0;
        lower = std::min(lower, phi[a] - gap);
        upper = std::max(upper, phi[b] + gap);
      }
      lo = std::max(lo, (lower - eta) / static_cast<double>(q));
      hi = std::min(hi, (upper + eta) / static_cast<double>(q));
    }
    if (hi - lo <= 2 * tol) return {0.5 * (lo + hi), lo, hi, false, 0, 1, L};
    if (opt.target && (hi < *opt.target || lo > *opt.target)) return {0.5 * (lo + hi), lo, hi, false, 0, 1, L};
  }
}

struct TunedLift {
  CircleLift lift;
  double shift = 0;  // the omega added to the base lift
  RotationEstimate rho;
};

/// Finds delta such that rho(T_delta o base) is within tol of alpha, by
/// bisection in delta (rho is non-decreasing in delta).
inline TunedLift tune_parameter(const CircleLift& base, const RotationNumber& alpha, double tol,
                                const RotationOptions& opt = {}) {
  const double a = alpha.value();  // rejects rational targets
  if (base.is_translation()) {
    const double d = a - base.translation_amount();
    CircleLift g = base.shifted(d);
    return {g, d, rotation_number(g, tol, opt)};
  }
  double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
  for (int i = 0; i < 4096; ++i) {
    const double x = i / 4096.0;
    const double d = base(x) - x;
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  double lo = a - dmax - 0.01, hi = a - dmin + 0.01;
  RotationOptions o = opt;
  o.target = a;
  // Some split points have rotation numbers that no affordable orbit can
  // bracket to tol (a huge partial quotient right after agreement with alpha);
  // those are skipped by splitting elsewhere.
  static constexpr double splits[] = {0.5, 0.4, 0.6, 0.3, 0.7};
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    std::optional<RotationEstimate> found;
    for (std::size_t k = 0; !found; ++k) {
      mid = lo + splits[k] * (hi - lo);
      try {
        found = rotation_number(base.shifted(mid), 0.5 * tol, o);
      } catch (const BudgetError&) {
        if (k + 1 == std::size(splits)) throw;
      }
    }
    CircleLift g = base.shifted(mid);
    const RotationEstimate r = *found;
    if (r.rational) {
      (r.value < a ? lo : hi) = mid;
    } else if (r.upper < a) {
      lo = mid;
    } else if (r.lower > a) {
      hi = mid;
    } else {
      return {g, mid, r};
    }
    if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid)))
      throw BudgetError("bisection collapsed before the target rotation number was certified", lo, hi);
  }
  throw BudgetError("bisection did not converge", lo, hi);
}

/// Index data of level n: q_n, p_n, q_{n+1}, p_{n+1} and q_n alpha - p_n.
struct LevelIndex {
  std::size_t n = 0;
  std::uint64_t q = 1, q_next = 1;
  std::int64_t p = 0, p_next = 0;
  double signed_error = 0;
};

inline LevelIndex level_index(const RotationNumber& alpha, std::size_t n, std::uint64_t cap = 1'000'000) {
  const auto c = alpha.convergents(n + 2);
  LevelIndex li;
  li.n = n;
  li.q = detail::to_u64(c[n].q, cap, "q_n");
  li.q_next = detail::to_u64(c[n + 1].q, 4 * cap, "q_{n+1}");
  li.p = static_cast<std::int64_t>(c[n].p);
  li.p_next = static_cast<std::int64_t>(c[n + 1].p);
  li.signed_error = alpha.signed_error(n);
  return li;
}

/// m_n(x) = g^{q_n}(x) - x - p_n sampled on a uniform grid of [0,1).
struct RenormData {
  LevelIndex level;
  std::size_t grid = 0;
  int sign = 1;
  std::vector<double> x, m, dgn;
  double M_raw = 0, m_min_raw = 0;
  double M = 0, m_min = 0;  // grid extrema corrected by the Lipschitz bound
  double dgn_minus_one_sup = 0;
  double log_dgn_sup = 0;
  double lipschitz = 0;
};

inline RenormData renorm_data(const CircleLift& g, const RotationNumber& alpha, std::size_t n, std::size_t grid,
                              std::uint64_t cap = 1'000'000) {
  RenormData rd;
  rd.level = level_index(alpha, n, cap);
  const std::uint64_t q = rd.level.q;
  if (grid < 2 * q) throw DomainError("grid must be at least 2 q_n");
  rd.grid = grid;
  rd.sign = rd.level.signed_error > 0 ? 1 : -1;
  rd.x.resize(grid);
  rd.m.resize(grid);
  rd.dgn.resize(grid);
  rd.M_raw = 0;
  rd.m_min_raw = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(grid);
    LiftPoint pt = make_lift_point(x);
    double logd = 0;
    for (std::uint64_t l = 0; l < q; ++l) {
      logd += std::log(g.derivative(pt.frac));
      pt = step(g, pt);
    }
    const double m = static_cast<double>(pt.whole - rd.level.p) + (pt.frac - x);
    if (!(m * rd.sign > 0))
      throw RotationMismatchError("m_n has the wrong sign at x=" + std::to_string(x) + " (level " +
                                  std::to_string(n) + "): the rotation number of g is not alpha");
    rd.x[i] = x;
    rd.m[i] = m;
    rd.dgn[i] = std::exp(logd);
    rd.M_raw = std::max(rd.M_raw, std::abs(m));
    rd.m_min_raw = std::min(rd.m_min_raw, std::abs(m));
    rd.dgn_minus_one_sup = std::max(rd.dgn_minus_one_sup, std::abs(rd.dgn[i] - 1));
    rd.log_dgn_sup = std::max(rd.log_dgn_sup, std::abs(logd));
  }
  // |m_n'| = |Dg_n - 1|; between grid points a sample sits at most h/2 away.
  rd.lipschitz = 1.25 * rd.dgn_minus_one_sup;
  const double corr = 0.5 * rd.lipschitz / static_cast<double>(grid);
  rd.M = rd.M_raw + corr;
  rd.m_min = std::max(0.0, rd.m_min_raw - corr);
  return rd;
}

struct RefinementOptions {
  std::size_t start = 4096;
  std::size_t max = std::size_t{1} << 20;
  double rel_tol = 1e-10;
};

namespace detail {

template <class F>
double refine_until_stable(F estimate_at, const RefinementOptions& opt, const char* what) {
  double prev = estimate_at(opt.start);
  for (std::size_t N = 2 * opt.start; N <= opt.max; N *= 2) {
    const double cur = estimate_at(N);
    if (std::abs(cur - prev) <= opt.rel_tol * std::max(1.0, std::abs(cur))) return cur;
    prev = cur;
    if (N * 2 > opt.max) throw RefinementError(std::string(what) + " did not converge", prev, cur);
  }
  throw RefinementError(std::string(what) + " did not converge", prev, prev);
}

}  // namespace detail

/// Total variation of log Dg over one period: the sum of |jumps| of log Dg
/// between consecutive zeros of D log Dg.
inline double variation_log_derivative(const CircleLift& g, const RefinementOptions& opt = {}) {
  if (g.is_translation()) return 0.0;
  auto at = [&](std::size_t N) {
    std::vector<double> psi(N + 1);
    for (std::size_t i = 0; i <= N; ++i) psi[i] = g.log_derivative_slope(static_cast<double>(i) / N);
    std::vector<double> zeros;
    for (std::size_t i = 0; i < N; ++i) {
      const double a = static_cast<double>(i) / N, b = static_cast<double>(i + 1) / N;
      if (psi[i] == 0.0) {
        zeros.push_back(a);
      } else if (psi[i] * psi[i + 1] < 0) {
        std::uintmax_t iters = 100;
        const auto r = boost::math::tools::toms748_solve([&](double x) { return g.log_derivative_slope(x); }, a, b,
                                                         psi[i], psi[i + 1],
                                                         boost::math::tools::eps_tolerance<double>(50), iters);
        zeros.push_back(0.5 * (r.first + r.second));
      }
    }
    if (zeros.size() < 2) return 0.0;
    double V = 0;
    for (std::size_t i = 0; i < zeros.size(); ++i) {
      const double a = zeros[i];
      const double b = i + 1 < zeros.size() ? zeros[i + 1] : zeros[0] + 1.0;
      V += std::abs(std::log(g.derivative(b)) - std::log(g.derivative(a)));
    }
    return V;
  };
  return detail::refine_until_stable(at, opt, "variation of log Dg");
}

/// sup over the circle of |Sg|, from grid local maxima polished by Brent's
/// method.
inline double schwarzian_sup(const CircleLift& g, const RefinementOptions& opt = {}) {
  if (g.is_translation()) return 0.0;
  auto absS = [&](double x) { return std::abs(schwarzian(g.jet(x))); };
  auto at = [&](std::size_t N) {
    std::vector<double> v(N);
    for (std::size_t i = 0; i < N; ++i) v[i] = absS(static_cast<double>(i) / N);
    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < N; ++i)
      if (v[i] >= v[(i + N - 1) % N] && v[i] >= v[(i + 1) % N]) peaks.push_back(i);
    std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    if (peaks.size() > 16) peaks.resize(16);
    double best = *std::max_element(v.begin(), v.end());
    for (const std::size_t i : peaks) {
      const double x = static_cast<double>(i) / N, h = 1.0 / N;
      const auto r = boost::math::tools::brent_find_minima([&](double t) { return -absS(t); }, x - h, x + h, 50);
      best = std::max(best, -r.second);
    }
    return best;
  };
  return detail::refine_until_stable(at, opt, "sup of the Schwarzian");
}

/// Inputs shared by the level-n checks.
struct EstimateInputs {
  RenormData rd;
  double V = 0;
  double S = 0;
};

inline EstimateInputs estimate_inputs(const CircleLift& g, const RotationNumber& alpha, std::size_t n,
                                      std::size_t grid = 0, std::uint64_t cap = 1'000'000) {
  const LevelIndex li = level_index(alpha, n, cap);
  if (grid == 0) grid = std::max<std::size_t>(256, 4 * li.q);
  return {renorm_data(g, alpha, n, grid, cap), variation_log_derivative(g), schwarzian_sup(g)};
}

struct CombinatoricsReport {
  std::size_t n = 0;
  std::uint64_t count = 0;  // q_{n+1}
  double x = 0;
  double max_overlap = 0;
  std::size_t pair_a = 0, pair_b = 0;  // iterate indices realizing max_overlap
  /// Measure of [0,1) covered by the J_n images exactly k times, k = 0,1,2,>=3.
  std::array<double, 4> multiplicity{};
  bool disjoint = true;
  bool cover_ok = true;
};

/// Lemma-3.1 style check: the images g^j(I_n(x)), 0 <= j < q_{n+1}, have
/// disjoint interiors mod 1, and the images of J_n(x) cover the circle at
/// least once and at most twice.
inline CombinatoricsReport check_interval_combinatorics(const CircleLift& g, const RotationNumber& alpha,
                                                        std::size_t n, double x, std::uint64_t cap = 1'000'000) {
  const LevelIndex li = level_index(alpha, n, cap);
  CombinatoricsReport rep;
  rep.n = n;
  rep.count = li.q_next;
  rep.x = x;
  const double tol = 1e-11;

  auto gn = [&](LiftPoint pt) {
    pt = iterate(g, pt, li.q);
    pt.whole -= li.p;
    return pt;
  };
  const LiftPoint x0 = make_lift_point(x);
  const LiftPoint xr = gn(x0);
  // g_n^{-1}(x): g_n(y) - x is increasing in y and changes sign on [x-1, x+1].
  std::uintmax_t iters = 200;
  const auto root = boost::math::tools::toms748_solve(
      [&](double y) { return (gn(make_lift_point(y)) - x0); }, x - 1.0, x + 1.0,
      boost::math::tools::eps_tolerance<double>(52), iters);
  const LiftPoint xl = make_lift_point(0.5 * (root.first + root.second));

  struct Arc {
    double left, len;
    std::size_t j;
  };
  auto images = [&](LiftPoint a, LiftPoint b) {
    std::vector<Arc> arcs;
    arcs.reserve(li.q_next);
    for (std::uint64_t j = 0; j < li.q_next; ++j) {
      const double len = b - a;
      const LiftPoint& lo = len >= 0 ? a : b;
      arcs.push_back({lo.frac, std::abs(len), j});
      a = step(g, a);
      b = step(g, b);
    }
    return arcs;
  };

  auto I = images(x0, xr);
  std::sort(I.begin(), I.end(), [](const Arc& a, const Arc& b) { return a.left < b.left; });
  rep.max_overlap = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < I.size(); ++i) {
    const Arc& a = I[i];
    const Arc& b = I[(i + 1) % I.size()];
    const double next_left = b.left + (i + 1 == I.size() ? 1.0 : 0.0);
    const double overlap = a.left + a.len - next_left;
    if (overlap > rep.max_overlap) {
      rep.max_overlap = overlap;
      rep.pair_a = a.j;
      rep.pair_b = b.j;
    }
  }
  rep.disjoint = rep.max_overlap <= tol;

  auto J = images(xl, xr);
  std::vector<std::pair<double, int>> ev;
  for (const Arc& a : J) {
    const double r = a.left + a.len;
    if (r <= 1.0) {
      ev.emplace_back(a.left, +1);
      ev.emplace_back(r, -1);
    } else {
      ev.emplace_back(a.left, +1);
      ev.emplace_back(1.0, -1);
      ev.emplace_back(0.0, +1);
      ev.emplace_back(r - 1.0, -1);
    }
  }
  std::sort(ev.begin(), ev.end());
  int depth = 0;
  double pos = 0;
  for (const auto& [t, d] : ev) {
    rep.multiplicity[std::min(depth, 3)] += t - pos;
    pos = t;
    depth += d;
  }
  rep.multiplicity[std::min(depth, 3)] += 1.0 - pos;
  rep.cover_ok = rep.multiplicity[0] <= tol * static_cast<double>(li.q_next) &&
                 rep.multiplicity[3] <= tol * static_cast<double>(li.q_next);

  if (!rep.disjoint)
    throw CombinatoricsError("images " + std::to_string(rep.pair_a) + " and " + std::to_string(rep.pair_b) +
                             " of I_n overlap by " + std::to_string(rep.max_overlap));
  if (!rep.cover_ok)
    throw CombinatoricsError("J_n images: uncovered measure " + std::to_string(rep.multiplicity[0]) +
                             ", triple-covered measure " + std::to_string(rep.multiplicity[3]));
  return rep;
}

namespace detail {

inline void finish_report(CheckReport& rep) {
  rep.ratio = safe_ratio(rep.lhs_max, rep.rhs);
  if (rep.status == Status::skipped_gate) return;
  rep.status = rep.ratio <= 1.0 ? Status::pass : Status::fail;
  if (rep.status == Status::fail) throw EstimateViolation(rep);
}

inline std::vector<double> sample_points(std::size_t samples) {
  std::vector<double> xs(samples);
  for (std::size_t s = 0; s < samples; ++s) xs[s] = (static_cast<double>(s) + 0.5) / static_cast<double>(samples);
  return xs;
}

}  // namespace detail

/// |Sg^j(x)| <= M_n e^{2V} S / |I_n(x)|^2 for 0 <= j <= q_{n+1}. The reported
/// ratio is the worst lhs/rhs over samples; lhs_max and rhs belong to that
/// worst sample.
inline CheckReport check_schwarzian_estimate(const CircleLift& g, const EstimateInputs& in, std::size_t samples) {
  CheckReport rep;
  rep.check = "schwarzian";
  rep.n = in.rd.level.n;
  const auto& li = in.rd.level;
  double worst = -1;
  for (const double x : detail::sample_points(samples)) {
    const double m = displacement(g, x, li.q, li.p);
    const double rhs = in.rd.M * std::exp(2 * in.V) * in.S / (m * m);
    LiftPoint pt = make_lift_point(x);
    double Sj = 0, Dj = 1, lhs = 0;
    std::size_t jmax = 0;
    for (std::uint64_t j = 1; j <= li.q_next; ++j) {
      const Jet3<double> jt = g.jet(pt.frac);
      Sj += schwarzian(jt) * Dj * Dj;
      Dj *= jt.d1;
      pt = step(g, pt);
      if (std::abs(Sj) > lhs) {
        lhs = std::abs(Sj);
        jmax = j;
      }
    }
    const double r = safe_ratio(lhs, rhs);
    if (r > worst) {
      worst = r;
      rep.lhs_max = lhs;
      rep.rhs = rhs;
      rep.witnesses = {{x, jmax, lhs, rhs}};
    }
  }
  rep.extras = {{"M_n", in.rd.M}, {"V", in.V}, {"S", in.S}};
  detail::finish_report(rep);
  return rep;
}

/// ||D log Dg^j|| <= c M_n^{1/2} / min|m_n| with c = sqrt(2S) e^V, for
/// 0 <= j <= 2 q_{n+1}.
inline CheckReport check_iterate_nonlinearity(const CircleLift& g, const EstimateInputs& in, std::size_t samples) {
  CheckReport rep;
  rep.check = "nonlin";
  const auto& li = in.rd.level;
  rep.n = li.n;
  const double c = std::sqrt(2 * in.S) * std::exp(in.V);
  rep.rhs = in.rd.m_min > 0 ? c * std::sqrt(in.rd.M) / in.rd.m_min : std::numeric_limits<double>::infinity();
  for (const double x : detail::sample_points(samples)) {
    LiftPoint pt = make_lift_point(x);
    double N = 0, D = 1;
    for (std::uint64_t j = 1; j <= 2 * li.q_next; ++j) {
      const Jet3<double> jt = g.jet(pt.frac);
      N += jt.d2 / jt.d1 * D;
      D *= jt.d1;
      pt = step(g, pt);
      if (std::abs(N) > rep.lhs_max) {
        rep.lhs_max = std::abs(N);
        rep.witnesses = {{x, static_cast<std::size_t>(j), rep.lhs_max, rep.rhs}};
      }
    }
  }
  rep.extras = {{"c", c}, {"M_n", in.rd.M}, {"m_n_min", in.rd.m_min}};
  detail::finish_report(rep);
  return rep;
}

/// sup|log Dg_n|, sup|Dg_n - 1| and the spread of m_n(y)/m_n(x) over
/// y in I_n(x). The ratio bound 1 +- eps with eps = 1.5 sup|Dg_n - 1| is only
/// asserted once n >= 1 and sup|log Dg_n| < 1/2; before that the report is
/// skipped(gate).
inline CheckReport check_gn_estimates(const CircleLift& g, const EstimateInputs& in, std::size_t samples = 64) {
  CheckReport rep;
  rep.check = "gn";
  const auto& rd = in.rd;
  const auto& li = rd.level;
  rep.n = li.n;
  const double eps = 1.5 * rd.dgn_minus_one_sup;
  double rmin = std::numeric_limits<double>::infinity(), rmax = -rmin;
  for (const double x : detail::sample_points(samples)) {
    const double mx = displacement(g, x, li.q, li.p);
    for (int k = 1; k <= 8; ++k) {
      const double y = x + mx * k / 8.0;
      const double r = displacement(g, y, li.q, li.p) / mx;
      const double dev = std::abs(r - 1);
      if (dev > rep.lhs_max) {
        rep.lhs_max = dev;
        rep.witnesses = {{x, static_cast<std::size_t>(k), r, eps}};
      }
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }
  }
  rep.rhs = eps;
  const double c = std::sqrt(2 * in.S) * std::exp(in.V);
  const double prop34_rhs = rd.m_min > 0 ? 0.5 * c * std::sqrt(rd.M) / rd.m_min : 0.0;
  rep.extras = {{"log_dgn_sup", rd.log_dgn_sup},
                {"dgn_minus_one_sup", rd.dgn_minus_one_sup},
                {"ratio_min", rmin},
                {"ratio_max", rmax},
                {"eps", eps},
                {"log_dgn_bound", prop34_rhs}};
  if (!(li.n >= 1 && rd.log_dgn_sup < 0.5)) {
    rep.status = Status::skipped_gate;
    rep.note = "premise n >= 1 and sup|log Dg_n| < 1/2 not met";
  }
  detail::finish_report(rep);
  return rep;
}

inline CheckReport check_schwarzian_estimate(const CircleLift& g, const RotationNumber& alpha, std::size_t n,
                                             std::size_t samples) {
  return check_schwarzian_estimate(g, estimate_inputs(g, alpha, n), samples);
}
inline CheckReport check_iterate_nonlinearity(const CircleLift& g, const RotationNumber& alpha, std::size_t n,
                                              std::size_t samples = 64) {
  return check_iterate_nonlinearity(g, estimate_inputs(g, alpha, n), samples);
}
inline CheckReport check_gn_estimates(const CircleLift& g, const RotationNumber& alpha, std::size_t n) {
  return check_gn_estimates(g, estimate_inputs(g, alpha, n));
}

/// Sample of h^{-1}, where h^{-1} o g o h = T_alpha: the orbit point
/// g^j(x_0) is sent to x_0's image plus j alpha, monotone-interpolated.
class ConjugacySample {
 public:
  ConjugacySample(std::vector<double> s, std::vector<double> v, double x0) : s_(std::move(s)), v_(std::move(v)), x0_(x0) {}

  /// h^{-1}(x), a degree-one non-decreasing map with h^{-1}(x_0) = 0.
  double operator()(double x) const {
    const double t = x - x0_;
    const double k = std::floor(t);
    const double f = t - k;
    const std::size_t N = s_.size();
    const auto it = std::upper_bound(s_.begin(), s_.end(), f);
    const std::size_t i = static_cast<std::size_t>(it - s_.begin()) - 1;  // s_[0] = 0 <= f
    const double sa = s_[i], va = v_[i];
    const double sb = i + 1 < N ? s_[i + 1] : 1.0;
    const double vb = i + 1 < N ? v_[i + 1] : 1.0;
    const double w = sb > sa ? (f - sa) / (sb - sa) : 0.0;
    return k + va + w * (vb - va);
  }

  const std::vector<double>& positions() const { return s_; }
  const std::vector<double>& values() const { return v_; }

  /// Largest gap between consecutive sampled values of h^{-1}.
  double max_gap() const {
    double gap = 1.0 - v_.back();
    for (std::size_t i = 0; i + 1 < v_.size(); ++i) gap = std::max(gap, v_[i + 1] - v_[i]);
    return gap;
  }

 private:
  std::vector<double> s_, v_;
  double x0_;
};

inline ConjugacySample denjoy_conjugacy(const CircleLift& g, const RotationNumber& alpha, std::size_t orbit_length,
                                        double x0 = 0.0) {
  if (orbit_length == 0) throw DomainError("orbit_length must be positive");
  const double a = alpha.value();
  const auto orbit = real_orbit(g, x0, orbit_length);
  std::vector<std::pair<double, double>> pts(orbit_length);
  const LiftPoint base = orbit[0];
  for (std::size_t j = 0; j < orbit_length; ++j) {
    double s = orbit[j] - base;
    s -= std::floor(s);
    double v = std::fmod(static_cast<double>(j) * a, 1.0);
    pts[j] = {s, v};
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> s(orbit_length), v(orbit_length);
  for (std::size_t i = 0; i < orbit_length; ++i) {
    s[i] = pts[i].first;
    v[i] = pts[i].second;
    if (i > 0 && !(v[i] > v[i - 1]))
      throw PrecisionError("assembled conjugacy sample is not monotone", i - 1);
  }
  return ConjugacySample(std::move(s), std::move(v), x0);
}

}  // namespace dylab
