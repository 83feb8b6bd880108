#pragma once

// Complex orbits of a lift inside the band B_Delta = {|Im z| < Delta}, in the
// normalized heights y_j defined by z_j = x_j + i m_n(x_j) y_j.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "dylab/circle.hpp"
#include "dylab/hyperbolic.hpp"

namespace dylab {

/// sup of |D log Dg| over the closed band |Im z| <= Delta, read off the two
/// boundary lines (maximum principle). Sampling is refined until neighbouring
/// samples differ by less than 10% of the running max, and the grid max is
/// inflated by h/2 times the sampled sup of the derivative of D log Dg.
inline double band_nonlinearity(const CircleLift& g, double delta, std::size_t boundary_samples = 1024) {
  if (!(delta > 0)) throw DomainError("band half-width must be positive");
  if (g.is_translation()) return 0.0;
  if (g.band_halfwidth() > 0 && delta > g.band_halfwidth() * (1 + 1e-12))
    throw DomainError("band exceeds the half-width on which the lift is univalent");
  // Re Dg > 0 on the convex band also gives univalence there.
  for (double t : {-1.0, -0.5, 0.0, 0.5, 1.0})
    for (std::size_t i = 0; i < std::max<std::size_t>(boundary_samples, 256); ++i) {
      const cplx z(static_cast<double>(i) / std::max<std::size_t>(boundary_samples, 256), t * delta);
      if (!(g.jet(z).d1.real() > 0)) throw BranchError("Re Dg <= 0 in the band: log Dg is not univalued");
    }
  std::size_t N = std::max<std::size_t>(boundary_samples, 16);
  for (;; N *= 2) {
    if (N > (std::size_t{1} << 24)) throw RefinementError("boundary sampling did not settle", 0, 0);
    double gmax = 0, jump = 0, slope = 0;
    for (double side : {-1.0, 1.0}) {
      double prev = -1, first = -1;
      for (std::size_t i = 0; i < N; ++i) {
        const cplx z(static_cast<double>(i) / N, side * delta);
        const Jet3<cplx> j = g.jet(z);
        const cplx r = j.d2 / j.d1;
        const double v = std::abs(r);
        slope = std::max(slope, std::abs(j.d3 / j.d1 - r * r));
        gmax = std::max(gmax, v);
        if (prev >= 0) jump = std::max(jump, std::abs(v - prev));
        if (first < 0) first = v;
        prev = v;
      }
      jump = std::max(jump, std::abs(prev - first));
    }
    if (jump < 0.1 * gmax) return gmax + 0.5 * 1.25 * slope / static_cast<double>(N);
  }
}

/// Measured premises of the Denjoy-Yoccoz lemma at level n.
struct BandGates {
  double delta = 0.25;
  double tau = 0;
  double M_n = 0;
  bool tau_ok = false;
  bool M_ok = false;
  bool ok() const { return tau_ok && M_ok; }
  std::string reason() const {
    std::string r;
    if (!tau_ok) r = "tau >= 1/9";
    if (!M_ok) r += std::string(r.empty() ? "" : "; ") + "M_n >= Delta/2";
    return r;
  }
};

inline BandGates band_gates(double delta, double tau, double M_n) {
  return {delta, tau, M_n, tau < 1.0 / 9.0, M_n < delta / 2};
}

struct BandOrbit {
  std::size_t n = 0;
  double x0 = 0, y0 = 0;
  std::size_t J = 0;
  std::vector<double> x;  // g^j(x_0), j = 0..J
  std::vector<cplx> z;    // g^j(z_0)
  std::vector<cplx> y;    // normalized heights
  std::vector<double> m;  // m_n(x_j)
  double max_deviation = 0;  // max_j |y_j - y_0|
  std::size_t worst_j = 0;
  bool re_positive = true;
  bool within_three_quarters = true;  // max_j |y_j - y_0| <= 3/4 y_0
  bool within_eleven_24 = true;       // the sharper intermediate bound, report only
  /// max_j of the half-plane distance between g^j(z_0) (reflected to the
  /// upper half-plane when m_n < 0) and x_j + i |m_n(x_j)| y_0.
  double max_hyperbolic = 0;
  std::size_t worst_hyperbolic_j = 0;
};

/// Tracks z_j = g^j(z_0), z_0 = x_0 + i m_n(x_0) y_0, for j <= J (J = 0 means
/// q_{n+1}).
inline BandOrbit track_dy_orbit(const CircleLift& g, const LevelIndex& li, const BandGates& gates, double x0,
                                double y0, std::size_t J = 0) {
  if (!gates.ok()) throw GateError("Denjoy-Yoccoz premises not met: " + gates.reason());
  if (!(y0 > 0 && y0 <= 1)) throw DomainError("y0 must lie in (0, 1]");
  if (J == 0) J = li.q_next;
  BandOrbit o;
  o.n = li.n;
  o.x0 = x0;
  o.y0 = y0;
  o.J = J;
  const std::vector<LiftPoint> real = real_orbit(g, x0, J + li.q + 1);
  auto m_at = [&](std::size_t j) {
    return static_cast<double>(real[j + li.q].whole - real[j].whole - li.p) + (real[j + li.q].frac - real[j].frac);
  };
  o.x.resize(J + 1);
  o.z.resize(J + 1);
  o.y.resize(J + 1);
  o.m.resize(J + 1);
  const int sign = li.signed_error > 0 ? 1 : -1;
  cplx zf = cplx(real[0].frac, m_at(0) * y0);  // z_j minus the integer part of x_j
  for (std::size_t j = 0; j <= J; ++j) {
    const double m = m_at(j);
    if (!(m * sign > 0)) throw RotationMismatchError("m_n changes sign along the orbit at j=" + std::to_string(j));
    if (!(std::abs(zf.imag()) < gates.delta)) throw BandEscapeError("orbit left the band", j);
    const cplx yj = (zf - real[j].frac) / cplx(0, m);
    o.x[j] = real[j].value();
    o.z[j] = zf + static_cast<double>(real[j].whole);
    o.y[j] = yj;
    o.m[j] = m;
    if (!(yj.real() > 0)) o.re_positive = false;
    const double dev = std::abs(yj - y0);
    if (dev > o.max_deviation) {
      o.max_deviation = dev;
      o.worst_j = j;
    }
    const cplx up = zf.imag() > 0 ? zf : std::conj(zf);
    if (up.imag() > 0) {
      const double d = dist_halfplane(up, cplx(real[j].frac, std::abs(m) * y0));
      if (d > o.max_hyperbolic) {
        o.max_hyperbolic = d;
        o.worst_hyperbolic_j = j;
      }
    }
    if (j < J) zf = g(zf) - static_cast<double>(real[j + 1].whole - real[j].whole);
  }
  o.within_three_quarters = o.re_positive && o.max_deviation <= 0.75 * y0;
  o.within_eleven_24 = o.re_positive && o.max_deviation <= 11.0 / 24.0 * y0;
  return o;
}

/// sum_{l < L} |m_n(x_l)| over the recorded orbit, L = min(J, q_{n+1}) (the
/// single-point orbit J = 0 counts x_0). Disjointness of the I_n images forces
/// the full sum below 1.
inline double sum_interval_lengths(const BandOrbit& o) {
  const std::size_t L = std::max<std::size_t>(o.J, 1);
  double s = 0;
  for (std::size_t l = 0; l < L && l < o.m.size(); ++l) s += std::abs(o.m[l]);
  if (!(s < 1)) throw CombinatoricsError("sum of |m_n(x_l)| reached " + std::to_string(s));
  return s;
}

}  // namespace dylab
