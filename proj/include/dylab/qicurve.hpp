#pragma once

// Flow-line curves z = x + i |m_{n-1}(x)| y_0 and their quasi-invariance
// under the iterates g^j, 0 <= j <= q_n.

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <string>
#include <vector>

#include "dylab/band.hpp"
#include "dylab/hyperbolic.hpp"
#include "dylab/report.hpp"

namespace dylab {

/// Graph of x -> x + i |m_{n-1}(x)| y_0 over [0,1), sampled at x_k = k/R,
/// together with its values at the midpoints (k + 1/2)/R.
struct QICurve {
  std::size_t n = 0;
  double y0 = 0.75;
  LevelIndex level;  // level n-1: q = q_{n-1}, q_next = q_n
  std::string lift;
  std::size_t resolution = 0;
  std::vector<double> x;
  std::vector<cplx> z, mid;
  double height_min = 0, height_max = 0;
};

inline constexpr std::size_t min_curve_resolution = 16;

inline std::size_t default_curve_resolution(const LevelIndex& level) {
  return std::max<std::size_t>(256, 32 * level.q_next);
}

inline QICurve build_curve(const CircleLift& g, const RotationNumber& alpha, std::size_t n, double y0 = 0.75,
                           std::size_t resolution = 0) {
  if (n < 1) throw DomainError("curve level must be >= 1");
  if (!(y0 > 0.5 && y0 <= 1)) throw DomainError("y0 must lie in (1/2, 1]");
  QICurve c;
  c.n = n;
  c.y0 = y0;
  c.level = level_index(alpha, n - 1);
  c.lift = g.spec();
  if (resolution == 0) resolution = default_curve_resolution(c.level);
  if (resolution < min_curve_resolution)
    throw DomainError("curve resolution " + std::to_string(resolution) + " below the minimum " +
                      std::to_string(min_curve_resolution));
  c.resolution = resolution;
  const int sign = c.level.signed_error > 0 ? 1 : -1;
  auto point = [&](double x) {
    const double m = displacement(g, x, c.level.q, c.level.p);
    if (!(m * sign > 0))
      throw RotationMismatchError("m_{n-1} has the wrong sign at x=" + std::to_string(x) +
                                  ": the rotation number of g is not alpha");
    return cplx(x, std::abs(m) * y0);
  };
  c.x.resize(resolution);
  c.z.resize(resolution);
  c.mid.resize(resolution);
  c.height_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < resolution; ++k) {
    const double R = static_cast<double>(resolution);
    c.x[k] = static_cast<double>(k) / R;
    c.z[k] = point(c.x[k]);
    c.mid[k] = point((static_cast<double>(k) + 0.5) / R);
    for (const cplx w : {c.z[k], c.mid[k]}) {
      c.height_min = std::min(c.height_min, w.imag());
      c.height_max = std::max(c.height_max, w.imag());
    }
  }
  return c;
}

/// Threshold policy: pass at or below the threshold, warn within the relative
/// slack above it, fail beyond.
inline Status slack_status(double lhs, double threshold, double slack = 0.05) {
  if (lhs <= threshold) return Status::pass;
  if (lhs <= threshold * (1 + slack)) return Status::warn;
  return Status::fail;
}

namespace detail {

/// Largest distance from the midpoint images to the chords of a periodic
/// polyline, inflated by 1.25: the sampling correction of the polyline.
inline double chord_deviation(const std::vector<cplx>& pts, const std::vector<cplx>& mid) {
  double worst = 0;
  for (std::size_t s = 0; s < pts.size(); ++s) {
    const cplx a = pts[s], b = s + 1 < pts.size() ? pts[s + 1] : pts[0] + 1.0;
    worst = std::max(worst, segment_proxy(mid[s], a, b));
  }
  return 1.25 * proxy_to_distance(worst);
}

/// Subtracts floor(Re w[0]) from every point.
inline void renormalize(std::vector<cplx>& w, std::vector<cplx>& wm) {
  const double s = std::floor(w[0].real());
  if (s == 0) return;
  for (cplx& v : w) v -= s;
  for (cplx& v : wm) v -= s;
}

}  // namespace detail

struct InvarianceReport {
  std::vector<HausdorffDistance> per_j;  // j = 0..j_max
  std::size_t worst_j = 0;
  CheckReport check;
};

/// D_P(g^j(gamma), gamma) for 0 <= j <= j_max (0 means q_n) in the half-plane
/// chart. Asserted against 2 C_0 = 6 with the slack policy.
inline InvarianceReport verify_quasi_invariance(const CircleLift& g, const QICurve& curve, const BandGates& gates,
                                                std::size_t j_max = 0, double threshold = 6.0, double slack = 0.05) {
  if (!gates.ok()) throw GateError("band premises not met at level n-1: " + gates.reason());
  if (j_max == 0) j_max = curve.level.q_next;
  InvarianceReport rep;
  rep.check.check = "quasi_invariance";
  rep.check.n = curve.n;
  rep.check.rhs = threshold;
  const PolylineIndex base(curve.z, 1.0);
  const double base_dev = detail::chord_deviation(curve.z, curve.mid);
  std::vector<cplx> w = curve.z, wm = curve.mid;
  rep.per_j.reserve(j_max + 1);
  for (std::size_t j = 0; j <= j_max; ++j) {
    if (j > 0) {
      for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = g(w[k]);
        wm[k] = g(wm[k]);
        if (!(std::abs(w[k].imag()) < gates.delta) || !(std::abs(wm[k].imag()) < gates.delta))
          throw BandEscapeError("curve image left the band", j);
        if (!(w[k].imag() > 0) || !(wm[k].imag() > 0))
          throw BandEscapeError("curve image crossed the real axis", j);
      }
      detail::renormalize(w, wm);
    }
    HausdorffDistance h;
    if (j == 0) {
      h.correction = 2 * base_dev;
    } else {
      const PolylineIndex image(w, 1.0);
      for (const cplx& p : w) h.raw = std::max(h.raw, base.distance(p));
      for (const cplx& p : curve.z) h.raw = std::max(h.raw, image.distance(p));
      h.correction = base_dev + detail::chord_deviation(w, wm);
    }
    h.bound = h.raw + h.correction;
    if (h.bound > rep.check.lhs_max || j == 0) {
      rep.check.lhs_max = h.bound;
      rep.worst_j = j;
    }
    rep.per_j.push_back(h);
  }
  rep.check.witnesses = {{0.0, rep.worst_j, rep.check.lhs_max, threshold}};
  rep.check.ratio = safe_ratio(rep.check.lhs_max, threshold);
  rep.check.status = slack_status(rep.check.lhs_max, threshold, slack);
  rep.check.extras = {{"max_raw", 0.0}, {"j_max", static_cast<double>(j_max)}};
  for (const auto& h : rep.per_j) rep.check.extras["max_raw"] = std::max(rep.check.extras["max_raw"], h.raw);
  return rep;
}

/// Half-plane distance of an upper-half-plane point to its image, both
/// clipped to H; used by the return check.
inline double return_distance(const CircleLift& g, cplx z, std::uint64_t q, std::int64_t p) {
  cplx w = z;
  for (std::uint64_t i = 0; i < q; ++i) w = g(w);
  w -= static_cast<double>(p);
  if (!(w.imag() > 0)) throw BandEscapeError("return image crossed the real axis", q);
  return dist_halfplane(z, w);
}

struct ReturnReport {
  double displacement = 0;     // sup_z d_P(g^{q_{n-1}}(z) - p_{n-1}, z) over the curve
  double displacement_qn = 0;  // same with q_n, p_n
  double rigid_value = 0;      // arccosh(1 + 1/(2 y_0^2))
  CheckReport check;
};

/// Return displacement along the curve. The asserted quantity uses the return
/// map of the curve's own level, g^{q_{n-1}} - p_{n-1}, which moves each point
/// by m_{n-1}; the q_n return is reported alongside.
inline ReturnReport verify_return_displacement(const CircleLift& g, const QICurve& curve, double threshold = 3.0,
                                               double slack = 0.05) {
  ReturnReport rep;
  rep.rigid_value = std::acosh(1 + 1 / (2 * curve.y0 * curve.y0));
  rep.check.check = "return_displacement";
  rep.check.n = curve.n;
  rep.check.rhs = std::max(threshold, rep.rigid_value);
  const auto& li = curve.level;
  for (std::size_t k = 0; k < curve.z.size(); ++k) {
    const double d = return_distance(g, curve.z[k], li.q, li.p);
    if (d > rep.displacement || k == 0) {
      rep.displacement = d;
      rep.check.witnesses = {{curve.x[k], li.q, d, rep.check.rhs}};
    }
    rep.displacement_qn = std::max(rep.displacement_qn, return_distance(g, curve.z[k], li.q_next, li.p_next));
  }
  rep.check.lhs_max = rep.displacement;
  rep.check.ratio = safe_ratio(rep.displacement, rep.check.rhs);
  rep.check.status = slack_status(rep.displacement, rep.check.rhs, slack);
  rep.check.extras = {{"displacement_qn", rep.displacement_qn}, {"rigid_value", rep.rigid_value}};
  return rep;
}

/// Poincare length of the piece of x -> x + i |m_n(x)| y_0 over I_n(x),
/// against 2 (1 + eps_0)/(1 - eps_0) with eps_0 = 1.5 sup|Dg_n - 1|. Gated on
/// n >= 1 and sup|log Dg_n| < 1/2.
inline CheckReport piece_diameter(const CircleLift& g, const RenormData& rd, double x, double y0) {
  const auto& li = rd.level;
  CheckReport rep;
  rep.check = "piece_diameter";
  rep.n = li.n;
  const double eps0 = 1.5 * rd.dgn_minus_one_sup;
  rep.rhs = eps0 < 1 ? 2 * (1 + eps0) / (1 - eps0) : std::numeric_limits<double>::infinity();
  auto density = [&](double t) {
    const LiftPoint start = make_lift_point(t);
    LiftPoint pt = start;
    double logd = 0;
    for (std::uint64_t l = 0; l < li.q; ++l) {
      logd += std::log(g.derivative(pt.frac));
      pt = step(g, pt);
    }
    const double m = static_cast<double>(pt.whole - start.whole - li.p) + (pt.frac - start.frac);
    const double slope = y0 * (std::exp(logd) - 1);
    return std::sqrt(1 + slope * slope) / (std::abs(m) * y0);
  };
  const double m = displacement(g, x, li.q, li.p);
  const double a = std::min(x, x + m), b = std::max(x, x + m);
  double err = 0;
  rep.lhs_max = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(density, a, b, 8, 1e-11, &err);
  rep.witnesses = {{x, 0, rep.lhs_max, rep.rhs}};
  rep.extras = {{"eps0", eps0}, {"quadrature_error", err}, {"rigid_value", 1 / y0}};
  rep.ratio = safe_ratio(rep.lhs_max, rep.rhs);
  if (!(li.n >= 1 && rd.log_dgn_sup < 0.5)) {
    rep.status = Status::skipped_gate;
    rep.note = "premise n >= 1 and sup|log Dg_n| < 1/2 not met";
  } else {
    rep.status = rep.ratio <= 1 ? Status::pass : Status::fail;
  }
  return rep;
}

inline CheckReport piece_diameter(const CircleLift& g, const RotationNumber& alpha, std::size_t n, double x,
                                  double y0) {
  const auto li = level_index(alpha, n);
  return piece_diameter(g, renorm_data(g, alpha, n, std::max<std::size_t>(256, 4 * li.q)), x, y0);
}

struct CoverReport {
  double radius = 3;
  double coverage = 0;  // fraction of curve samples (vertices and midpoints) within radius of the orbit
  double max_gap = 0;   // sup over samples of the distance to the orbit
  double worst_x = 0;
  double H = 0;  // 2 max Im of the curve
  bool separation_ok = false;
  double max_link = 0;  // largest distance between cyclically consecutive orbit points
  double max_apex = 0;  // highest point of the geodesic links
  double visit_fraction = 0;
  std::size_t seeds = 0;
  CheckReport check;
};

namespace detail {

/// Orbit points sorted by real part in [0,1), with nearest-point queries
/// modulo 1.
class OrbitIndex {
 public:
  explicit OrbitIndex(std::vector<cplx> pts) {
    for (cplx& p : pts) p -= std::floor(p.real());
    std::vector<std::size_t> order(pts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return pts[a].real() < pts[b].real(); });
    for (std::size_t i : order) {
      pts_.push_back(pts[i]);
      ids_.push_back(i);
      ymax_ = std::max(ymax_, pts[i].imag());
    }
  }

  /// Calls f(orbit id, proxy) for every orbit point (with its deck shifts)
  /// whose proxy to p is below `limit`, and returns the smallest proxy seen.
  template <class F>
  double scan(cplx p, double limit, F&& f) const {
    p -= std::floor(p.real());
    const std::size_t N = pts_.size();
    const auto it = std::lower_bound(pts_.begin(), pts_.end(), p.real(),
                                     [](const cplx& a, double v) { return a.real() < v; });
    const long start = static_cast<long>(it - pts_.begin());
    double best = std::numeric_limits<double>::infinity();
    for (int dir : {1, -1}) {
      for (long step = 0; step < 2 * static_cast<long>(N) + 2; ++step) {
        const long i = dir > 0 ? start + step : start - 1 - step;
        const long nl = static_cast<long>(N);
        const long r = ((i % nl) + nl) % nl;
        const double shift = std::floor(static_cast<double>(i) / static_cast<double>(N));
        const cplx o = pts_[static_cast<std::size_t>(r)] + shift;
        const double dx = o.real() - p.real();
        if (dx * dx / (p.imag() * ymax_) > std::max(best, limit)) break;
        const double f_ = halfplane_proxy(p, o);
        best = std::min(best, f_);
        if (f_ < limit) f(ids_[static_cast<std::size_t>(r)], f_);
      }
    }
    return best;
  }

  const std::vector<cplx>& sorted() const { return pts_; }

 private:
  std::vector<cplx> pts_;
  std::vector<std::size_t> ids_;
  double ymax_ = 0;
};

/// Highest point of the half-plane geodesic from a to b.
inline double geodesic_apex(cplx a, cplx b) {
  if (std::abs(a.real() - b.real()) < 1e-300) return std::max(a.imag(), b.imag());
  const double c = (std::norm(b) - std::norm(a)) / (2 * (b.real() - a.real()));
  const double r = std::abs(a - c);
  const bool between = (c - a.real()) * (c - b.real()) <= 0;
  return between ? r : std::max(a.imag(), b.imag());
}

}  // namespace detail

/// Cover of the curve by the Poincare balls B(g^j(z_0) + k, radius),
/// 0 <= j < q_n, z_0 the curve point over x0; separation of R from
/// {Im z > H} by the chain of consecutive balls; and a sampled visit check for
/// orbits started near the curve.
inline CoverReport osculating_cover_check(const CircleLift& g, const QICurve& curve, double x0 = 0.0,
                                          double radius = 3.0, double slack = 0.05, std::size_t seeds = 8) {
  CoverReport rep;
  rep.radius = radius;
  const auto& li = curve.level;
  const std::uint64_t qn = li.q_next;
  const cplx z0(x0, std::abs(displacement(g, x0, li.q, li.p)) * curve.y0);
  std::vector<cplx> orbit;
  orbit.reserve(qn);
  cplx w = z0;
  for (std::uint64_t j = 0; j < qn; ++j) {
    if (!(w.imag() > 0)) throw BandEscapeError("orbit crossed the real axis", j);
    orbit.push_back(w);
    w = g(w);
    w -= std::floor(w.real());
  }
  const detail::OrbitIndex idx(orbit);
  const double limit = detail::distance_to_proxy(radius);
  std::size_t covered = 0, total = 0;
  for (const auto* set : {&curve.z, &curve.mid})
    for (const cplx& p : *set) {
      const double d = detail::proxy_to_distance(idx.scan(p, 0.0, [](std::size_t, double) {}));
      ++total;
      if (d <= radius) ++covered;
      if (d > rep.max_gap) {
        rep.max_gap = d;
        rep.worst_x = p.real();
      }
    }
  rep.coverage = static_cast<double>(covered) / static_cast<double>(total);
  rep.H = 2 * curve.height_max;
  const auto& s = idx.sorted();
  rep.separation_ok = true;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const cplx a = s[i], b = i + 1 < s.size() ? s[i + 1] : s[0] + 1.0;
    rep.max_link = std::max(rep.max_link, dist_halfplane(a, b));
    rep.max_apex = std::max(rep.max_apex, detail::geodesic_apex(a, b));
  }
  rep.separation_ok = rep.max_link < 2 * radius && rep.max_apex < rep.H;
  // Visit check: seeds at 0.6 and 1.4 times the curve height; each must, within
  // q_n forward iterates, enter the balls of every orbit index j.
  std::size_t good = 0;
  rep.seeds = 2 * seeds;
  for (std::size_t sidx = 0; sidx < seeds; ++sidx) {
    const std::size_t k = (sidx * curve.z.size()) / seeds;
    for (double f : {0.6, 1.4}) {
      cplx v(curve.z[k].real(), curve.z[k].imag() * f);
      std::vector<char> hit(qn, 0);
      std::size_t hits = 0;
      for (std::uint64_t i = 0; i <= qn; ++i) {
        if (!(v.imag() > 0)) break;
        idx.scan(v, limit, [&](std::size_t id, double) {
          if (!hit[id]) {
            hit[id] = 1;
            ++hits;
          }
        });
        v = g(v);
        v -= std::floor(v.real());
      }
      if (hits == qn) ++good;
    }
  }
  rep.visit_fraction = rep.seeds ? static_cast<double>(good) / static_cast<double>(rep.seeds) : 0.0;
  rep.check.check = "osculating_cover";
  rep.check.n = curve.n;
  rep.check.lhs_max = rep.max_gap;
  rep.check.rhs = radius;
  rep.check.ratio = safe_ratio(rep.max_gap, radius);
  rep.check.status = slack_status(rep.max_gap, radius, slack);
  rep.check.witnesses = {{rep.worst_x, 0, rep.max_gap, radius}};
  rep.check.extras = {{"coverage", rep.coverage},         {"H", rep.H},
                      {"separation_ok", rep.separation_ok}, {"max_link", rep.max_link},
                      {"max_apex", rep.max_apex},           {"visit_fraction", rep.visit_fraction}};
  return rep;
}

/// Everything the qicurve command reports for one curve.
struct CurveReport {
  InvarianceReport invariance;
  ReturnReport ret;
  CoverReport cover;
  std::vector<CheckReport> pieces;  // piece diameters over I_{n-1}(x) at a few x
  Status status = Status::pass;
};

struct QIOptions {
  double invariance_threshold = 6.0;
  double return_threshold = 3.0;
  double radius = 3.0;
  double slack = 0.05;
  double x0 = 0.0;
  std::size_t pieces = 4;
};

inline CurveReport curve_report(const CircleLift& g, const RotationNumber& alpha, const QICurve& curve,
                                const BandGates& gates, const QIOptions& opt = {}) {
  CurveReport r;
  r.invariance = verify_quasi_invariance(g, curve, gates, 0, opt.invariance_threshold, opt.slack);
  r.ret = verify_return_displacement(g, curve, opt.return_threshold, opt.slack);
  r.cover = osculating_cover_check(g, curve, opt.x0, opt.radius, opt.slack);
  const auto li = curve.level;
  const auto rd = renorm_data(g, alpha, li.n, std::max<std::size_t>(256, 4 * li.q));
  for (std::size_t i = 0; i < opt.pieces; ++i)
    r.pieces.push_back(piece_diameter(g, rd, (static_cast<double>(i) + 0.5) / static_cast<double>(opt.pieces),
                                      curve.y0));
  r.status = worst(worst(r.invariance.check.status, r.ret.check.status), r.cover.check.status);
  for (const auto& p : r.pieces) r.status = worst(r.status, p.status);
  return r;
}

}  // namespace dylab
