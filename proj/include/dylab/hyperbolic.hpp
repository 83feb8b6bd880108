#pragma once

// Poincare metrics on the upper half-plane H and on the exterior of the
// closed unit disk, curve lengths, and Hausdorff distances between sampled
// curves.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "dylab/errors.hpp"

namespace dylab {

using cplx = std::complex<double>;

enum class Chart { halfplane, exterior };

namespace detail {

/// |z1 - z2|^2 / (Im z1 Im z2), the monotone proxy of the half-plane
/// distance: d = 2 asinh(sqrt(f)/2).
inline double halfplane_proxy(cplx z1, cplx z2) { return std::norm(z1 - z2) / (z1.imag() * z2.imag()); }

inline double proxy_to_distance(double f) { return 2.0 * std::asinh(0.5 * std::sqrt(std::max(f, 0.0))); }

inline double distance_to_proxy(double d) {
  const double s = 2.0 * std::sinh(0.5 * d);
  return s * s;
}

}  // namespace detail

/// arccosh(1 + |z1-z2|^2 / (2 Im z1 Im z2)), evaluated as 2 asinh(...) to
/// keep small distances accurate.
inline double dist_halfplane(cplx z1, cplx z2) {
  if (!(z1.imag() > 0) || !(z2.imag() > 0)) throw DomainError("point not in the upper half-plane");
  return 2.0 * std::asinh(std::abs(z1 - z2) / (2.0 * std::sqrt(z1.imag() * z2.imag())));
}

/// Exterior of the closed disk -> H through w = 1/zeta = e^{2 pi i u}.
inline cplx exterior_to_halfplane(cplx zeta) {
  if (!(std::abs(zeta) > 1)) throw DomainError("point not outside the closed unit disk");
  const cplx w = 1.0 / zeta;
  return cplx(std::arg(w), -std::log(std::abs(w))) / (2 * std::numbers::pi);
}

/// Inverse of exterior_to_halfplane (any deck translate gives the same zeta).
inline cplx halfplane_to_exterior(cplx u) {
  if (!(u.imag() > 0)) throw DomainError("point not in the upper half-plane");
  return std::exp(cplx(0, -2 * std::numbers::pi) * u);
}

/// E(x) = e^{2 pi i x}: the band picture to the punctured-disk picture.
inline cplx band_to_disk(cplx z) { return std::exp(cplx(0, 2 * std::numbers::pi) * z); }

struct ExteriorDistance {
  double value = 0;
  long deck_shift = 0;
};

/// Distance in the complete hyperbolic metric |d zeta| / (|zeta| log|zeta|)
/// of C minus the closed unit disk: minimum over deck shifts k of
/// d_H(u1, u2 + k). d_H(u1, u2 + k) grows with |Re(u2 + k - u1)|, so the
/// search walks outward from the nearest shift until both sides increase.
inline ExteriorDistance dist_exterior_detail(cplx z1, cplx z2, long k_max = 64) {
  const cplx u1 = exterior_to_halfplane(z1), u2 = exterior_to_halfplane(z2);
  const long k0 = std::lround((u1 - u2).real());
  ExteriorDistance best{dist_halfplane(u1, u2 + static_cast<double>(k0)), k0};
  bool left = true, right = true;
  for (long s = 1; s <= k_max && (left || right); ++s) {
    if (left) {
      const double d = dist_halfplane(u1, u2 + static_cast<double>(k0 - s));
      if (d < best.value) best = {d, k0 - s};
      else left = false;
    }
    if (right) {
      const double d = dist_halfplane(u1, u2 + static_cast<double>(k0 + s));
      if (d < best.value) best = {d, k0 + s};
      else right = false;
    }
  }
  if (left || right) throw DomainError("deck search did not stabilize within k_max shifts");
  return best;
}

inline double dist_exterior(cplx z1, cplx z2, long k_max = 64) { return dist_exterior_detail(z1, z2, k_max).value; }

inline double dist_P(cplx z1, cplx z2, Chart chart) {
  return chart == Chart::halfplane ? dist_halfplane(z1, z2) : dist_exterior(z1, z2);
}

inline double density_P(cplx z, Chart chart) {
  if (chart == Chart::halfplane) {
    if (!(z.imag() > 0)) throw DomainError("point not in the upper half-plane");
    return 1.0 / z.imag();
  }
  const double r = std::abs(z);
  if (!(r > 1)) throw DomainError("point not outside the closed unit disk");
  return 1.0 / (r * std::log(r));
}

/// Poincare length of a polyline: midpoint rule on every segment, halving
/// the step until the total changes by less than rel_tol.
inline double curve_length_P(const std::vector<cplx>& poly, Chart chart, double rel_tol = 1e-6,
                             std::size_t max_pieces = std::size_t{1} << 16) {
  if (poly.size() < 2) return 0.0;
  for (const cplx& z : poly) density_P(z, chart);
  auto total = [&](std::size_t pieces) {
    double s = 0;
    for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
      const cplx d = poly[i + 1] - poly[i];
      const double len = std::abs(d) / static_cast<double>(pieces);
      for (std::size_t k = 0; k < pieces; ++k)
        s += len * density_P(poly[i] + d * ((static_cast<double>(k) + 0.5) / static_cast<double>(pieces)), chart);
    }
    return s;
  };
  double prev = total(1);
  for (std::size_t pieces = 2; pieces <= max_pieces; pieces *= 2) {
    const double cur = total(pieces);
    if (std::abs(cur - prev) <= rel_tol * std::abs(cur)) return cur;
    prev = cur;
  }
  throw RefinementError("curve length did not converge", prev, prev);
}

/// Smallest proxy |p - s|^2 / (Im p Im s) over s on the Euclidean segment
/// [a, b] in H. Along the segment the proxy is a quadratic over a positive
/// linear function, which is convex, so the minimizer is a root of
/// A l1 t^2 + 2 A l0 t + B l0 - C l1 or an endpoint.
inline double segment_proxy(cplx p, cplx a, cplx b) {
  const cplx D = b - a, e = p - a;
  const double A = std::norm(D);
  const double B = -2.0 * (std::conj(D) * e).real();
  const double C = std::norm(e);
  const double l0 = a.imag(), l1 = D.imag();
  // Residual formed directly: the expanded quadratic cancels near the line.
  auto f = [&](double t) { return std::norm(e - t * D) / ((l0 + l1 * t) * p.imag()); };
  double best = std::min(f(0.0), f(1.0));
  const double qa = A * l1, qb = 2 * A * l0, qc = B * l0 - C * l1;
  auto consider = [&](double t) {
    if (t > 0 && t < 1) best = std::min(best, f(t));
  };
  if (std::abs(qa) <= 1e-14 * std::abs(qb)) {
    if (qb != 0) consider(-qc / qb);
  } else {
    const double disc = qb * qb - 4 * qa * qc;
    if (disc >= 0) {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (qb + std::copysign(sq, qb));
      consider(q / qa);
      if (q != 0) consider(qc / q);
    }
  }
  return best;
}

/// Bucketed half-plane polyline for nearest-distance queries. With
/// period > 0 the polyline is one period of a curve invariant under
/// z -> z + period, closed by the segment from the last vertex to the first
/// vertex plus period.
class PolylineIndex {
 public:
  PolylineIndex(std::vector<cplx> pts, double period = 0.0) : pts_(std::move(pts)), period_(period) {
    if (pts_.empty()) throw DomainError("empty polyline");
    for (const cplx& z : pts_)
      if (!(z.imag() > 0)) throw DomainError("polyline vertex not in the upper half-plane");
    nseg_ = period_ > 0 ? pts_.size() : pts_.size() - 1;
    double lo = pts_[0].real(), hi = lo;
    for (const cplx& z : pts_) {
      lo = std::min(lo, z.real());
      hi = std::max(hi, z.real());
    }
    if (period_ > 0) {
      lo_ = lo;
      span_ = period_;
    } else {
      lo_ = lo;
      span_ = std::max(hi - lo, 1e-12);
    }
    nb_ = std::max<std::size_t>(1, std::min<std::size_t>(nseg_ / 2 + 1, 1 << 20));
    width_ = span_ / static_cast<double>(nb_);
    buckets_.assign(nb_, {});
    for (std::size_t s = 0; s < std::max<std::size_t>(nseg_, 1); ++s) {
      const auto [a, b] = segment(s);
      const double x0 = std::min(a.real(), b.real()), x1 = std::max(a.real(), b.real());
      const long b0 = bucket_of(x0), b1 = bucket_of(x1);
      for (long k = b0; k <= b1; ++k) {
        if (period_ > 0) {
          const long nb = static_cast<long>(nb_);
          const long r = ((k % nb) + nb) % nb;
          buckets_[static_cast<std::size_t>(r)].push_back({s, static_cast<long>(std::floor(static_cast<double>(k) / nb))});
        } else {
          buckets_[static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(nb_) - 1))].push_back({s, 0});
        }
      }
    }
  }

  /// Half-plane distance from p to the polyline.
  double distance(cplx p) const {
    if (!(p.imag() > 0)) throw DomainError("query point not in the upper half-plane");
    double best = std::numeric_limits<double>::infinity();
    const long nb = static_cast<long>(nb_);
    // Off-range queries start at the nearest end bucket; the ring lower bound
    // only gets more conservative.
    const long home = period_ > 0 ? bucket_of(p.real()) : std::clamp(bucket_of(p.real()), 0L, nb - 1);
    for (long ring = 0;; ++ring) {
      // Points at horizontal offset >= delta have proxy >= 2(sqrt(y^2+delta^2) - y)/y.
      const double delta = std::max(0.0, (static_cast<double>(ring) - 1.0) * width_);
      const double y = p.imag();
      if (2 * (std::hypot(y, delta) - y) / y > best) break;
      bool any = false;
      for (const long k : {home - ring, home + ring}) {
        if (ring == 0 && k != home) continue;
        if (period_ <= 0 && (k < 0 || k >= nb)) continue;
        any = true;
        const long r = period_ > 0 ? ((k % nb) + nb) % nb : k;
        const double shift = period_ > 0 ? period_ * std::floor(static_cast<double>(k) / nb) : 0.0;
        for (const auto& [s, wrap] : buckets_[static_cast<std::size_t>(r)]) {
          auto [a, b] = segment(s);
          const double sh = shift - period_ * static_cast<double>(wrap);
          best = std::min(best, segment_proxy(p, a + sh, b + sh));
        }
        if (ring == 0) break;
      }
      if (!any && period_ <= 0) break;
    }
    return detail::proxy_to_distance(best);
  }

  /// Largest half-plane distance between consecutive vertices.
  double max_gap() const {
    double g = 0;
    for (std::size_t s = 0; s < nseg_; ++s) {
      const auto [a, b] = segment(s);
      g = std::max(g, dist_halfplane(a, b));
    }
    return g;
  }

  const std::vector<cplx>& points() const { return pts_; }

 private:
  struct Entry {
    std::size_t seg;
    long wrap;
  };

  std::pair<cplx, cplx> segment(std::size_t s) const {
    if (pts_.size() == 1) return {pts_[0], pts_[0]};
    if (s + 1 < pts_.size()) return {pts_[s], pts_[s + 1]};
    return {pts_[s], pts_[0] + period_};
  }

  long bucket_of(double x) const { return static_cast<long>(std::floor((x - lo_) / width_)); }

  std::vector<cplx> pts_;
  double period_;
  std::size_t nseg_ = 0, nb_ = 1;
  double lo_ = 0, span_ = 1, width_ = 1;
  std::vector<std::vector<Entry>> buckets_;
};

struct HausdorffDistance {
  double raw = 0;         // max of the two directed vertex-to-polyline distances
  double correction = 0;  // largest sample gap of either curve, in the metric
  double bound = 0;       // raw + correction
};

/// Hausdorff distance between two sampled curves. Vertices of one curve are
/// compared with the polyline through the other (exact point-to-segment
/// distance in H); the sampling correction makes `bound` an upper bound for
/// the curves the samples come from.
inline HausdorffDistance hausdorff_dist_P(const std::vector<cplx>& A, const std::vector<cplx>& B, Chart chart,
                                          double period = 0.0) {
  HausdorffDistance h;
  if (A.empty() || B.empty()) return h;
  if (chart == Chart::halfplane) {
    const PolylineIndex ia(A, period), ib(B, period);
    for (const cplx& a : A) h.raw = std::max(h.raw, ib.distance(a));
    for (const cplx& b : B) h.raw = std::max(h.raw, ia.distance(b));
    h.correction = std::max(ia.max_gap(), ib.max_gap());
  } else {
    // Exterior chart: segments subdivided eightfold, vertex-to-point.
    auto dense = [](const std::vector<cplx>& P) {
      std::vector<cplx> out;
      for (std::size_t i = 0; i + 1 < P.size(); ++i)
        for (int k = 0; k < 8; ++k) out.push_back(P[i] + (P[i + 1] - P[i]) * (k / 8.0));
      out.push_back(P.back());
      return out;
    };
    const auto DA = dense(A), DB = dense(B);
    auto directed = [](const std::vector<cplx>& X, const std::vector<cplx>& Y) {
      double worst = 0;
      for (const cplx& x : X) {
        double best = std::numeric_limits<double>::infinity();
        for (const cplx& y : Y) best = std::min(best, dist_exterior(x, y));
        worst = std::max(worst, best);
      }
      return worst;
    };
    h.raw = std::max(directed(A, DB), directed(B, DA));
    auto gap = [](const std::vector<cplx>& P) {
      double g = 0;
      for (std::size_t i = 0; i + 1 < P.size(); ++i) g = std::max(g, dist_exterior(P[i], P[i + 1]) / 8.0);
      return g;
    };
    h.correction = std::max(gap(A), gap(B));
  }
  h.bound = h.raw + h.correction;
  return h;
}

}  // namespace dylab
