#pragma once

// Indifferent germs f(z) = e^{2 pi i alpha} z + sum_{k>=2} c_k z^k on a disk
// D_{r_0}, and a grid stand-in for the local hedgehog K_0.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "dylab/errors.hpp"
#include "dylab/report.hpp"
#include "dylab/rotation.hpp"

namespace dylab {

using cplx = std::complex<double>;

class Germ {
 public:
  /// coeffs[k-2] = c_k.
  Germ(double alpha, std::vector<cplx> coeffs, double r0, std::string alpha_spec = {})
      : alpha_(alpha), coeffs_(std::move(coeffs)), r0_(r0), alpha_spec_(std::move(alpha_spec)) {
    if (!(r0 > 0)) throw DomainError("working radius must be positive");
    while (!coeffs_.empty() && coeffs_.back() == cplx(0, 0)) coeffs_.pop_back();
    lambda_ = std::polar(1.0, 2 * std::numbers::pi * alpha_);
    lambda_inv_ = std::conj(lambda_);
    // sup_{|z|<=r0} |f'(z) - lambda| <= sum k |c_k| r0^{k-1}.
    double rk = 1;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
      rk *= r0_;
      nonlinearity_bound_ += static_cast<double>(i + 2) * std::abs(coeffs_[i]) * rk;
    }
    if (!(nonlinearity_bound_ < 1))
      throw DomainError("f is not certified invertible on D_r0: sup|f' - lambda| bound " +
                        std::to_string(nonlinearity_bound_));
  }

  static Germ linear(double alpha, double r0) { return Germ(alpha, {}, r0); }
  static Germ quadratic(double alpha, double r0, cplx c2 = 1.0) { return Germ(alpha, {c2}, r0); }

  double alpha() const { return alpha_; }
  const std::string& alpha_spec() const { return alpha_spec_; }
  cplx lambda() const { return lambda_; }
  const std::vector<cplx>& coeffs() const { return coeffs_; }
  double r0() const { return r0_; }
  bool is_linear() const { return coeffs_.empty(); }
  double nonlinearity_bound() const { return nonlinearity_bound_; }
  /// sup |f'| on the closed disk.
  double derivative_bound() const { return 1 + nonlinearity_bound_; }

  cplx operator()(cplx z) const {
    cplx acc = 0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = (acc + *it) * z;
    return (acc + lambda_) * z;
  }

  cplx derivative(cplx z) const {
    cplx acc = 0;
    for (std::size_t i = coeffs_.size(); i-- > 0;) acc = acc * z + static_cast<double>(i + 2) * coeffs_[i];
    return acc * z + lambda_;
  }

  /// f^{-1}(z): Newton on f(w) = z from the second-order inverse series
  /// w = mu z - mu c_2 (mu z)^2, mu = 1/lambda, accepted once the residual is
  /// below 1e-13.
  cplx inverse(cplx z) const {
    const cplx mz = z * lambda_inv_;
    if (is_linear()) return mz;
    const double tol = 1e-26 * std::max(1.0, std::norm(z));
    cplx w = mz - lambda_inv_ * coeffs_[0] * mz * mz;
    for (int it = 0; it < 50; ++it) {
      const cplx r = (*this)(w)-z;
      if (std::norm(r) < tol) return w;
      const cplx d = derivative(w);
      w -= r * std::conj(d) / std::norm(d);
    }
    throw InverseError("Newton inverse did not converge at z=(" + std::to_string(z.real()) + "," +
                       std::to_string(z.imag()) + ")");
  }

  cplx step(cplx z, int direction) const { return direction > 0 ? (*this)(z) : inverse(z); }

 private:
  double alpha_;
  std::vector<cplx> coeffs_;
  double r0_;
  std::string alpha_spec_;
  cplx lambda_, lambda_inv_;
  double nonlinearity_bound_ = 0;
};

/// A closed-disk test with a relative slack for rounding: the linear germ
/// must not push |z| = r_0 out of the disk.
inline bool in_closed_disk(cplx z, double r) { return std::norm(z) <= r * r * (1 + 2e-12); }

struct GermOrbit {
  cplx z;                              // last point inside the disk
  std::optional<std::size_t> escape;  // first index j with |f^j(z)| > r_0
};

inline GermOrbit iterate_germ(const Germ& f, cplx z, std::size_t j, int direction) {
  if (!in_closed_disk(z, f.r0())) throw DomainError("start point outside D_r0");
  if (direction != 1 && direction != -1) throw DomainError("direction must be +1 or -1");
  for (std::size_t i = 1; i <= j; ++i) {
    const cplx w = f.step(z, direction);
    if (!in_closed_disk(w, f.r0())) return {z, i};
    z = w;
  }
  return {z, std::nullopt};
}

/// Grid approximation of K_0: grid points of the closed disk whose forward and
/// backward orbits stay in it for N steps, then the 4-connected component of 0.
struct HedgehogApprox {
  std::size_t resolution = 0;  // grid points per diameter (odd)
  double h = 0;
  std::size_t N = 0;
  double r0 = 0;
  std::vector<std::uint8_t> in_disk, retained, component;
  std::vector<cplx> component_points, boundary;
  std::size_t disk_count = 0, retained_count = 0, component_count = 0;
  double retained_fraction = 0;
  bool touches = false;  // component reaches |z| >= r_0 - 2h
  double inradius = 0;   // distance from 0 to the nearest disk grid point outside the component
  double invariance_defect = 0;  // fraction of component points whose image misses the retained set

  cplx point(std::size_t i, std::size_t j) const {
    const double m = static_cast<double>(resolution - 1);
    return {r0 * (2.0 * static_cast<double>(i) - m) / m, r0 * (2.0 * static_cast<double>(j) - m) / m};
  }
  std::size_t index(std::size_t i, std::size_t j) const { return j * resolution + i; }
  /// Grid cell nearest to z, or nullopt outside the grid square.
  std::optional<std::pair<long, long>> cell_of(cplx z) const {
    const long i = std::lround((z.real() + r0) / h), j = std::lround((z.imag() + r0) / h);
    const long R = static_cast<long>(resolution);
    if (i < 0 || j < 0 || i >= R || j >= R) return std::nullopt;
    return std::make_pair(i, j);
  }
  bool in_component(cplx z) const {
    const auto c = cell_of(z);
    return c && component[index(static_cast<std::size_t>(c->first), static_cast<std::size_t>(c->second))];
  }
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned char> rank_;
};

inline bool stays(const Germ& f, cplx z, std::size_t N, int direction) {
  return !iterate_germ(f, z, N, direction).escape.has_value();
}

}  // namespace detail

inline HedgehogApprox hedgehog_approx(const Germ& f, std::size_t N, std::size_t resolution) {
  if (resolution < 256) throw DomainError("resolution must be >= 256 points per diameter");
  if (N < 1000) throw DomainError("N must be >= 1000");
  HedgehogApprox K;
  K.resolution = resolution % 2 == 1 ? resolution : resolution + 1;
  K.r0 = f.r0();
  K.N = N;
  const std::size_t R = K.resolution;
  K.h = 2 * K.r0 / static_cast<double>(R - 1);
  K.in_disk.assign(R * R, 0);
  K.retained.assign(R * R, 0);
  K.component.assign(R * R, 0);
  for (std::size_t j = 0; j < R; ++j)
    for (std::size_t i = 0; i < R; ++i) {
      const cplx z = K.point(i, j);
      if (!in_closed_disk(z, K.r0)) continue;
      K.in_disk[K.index(i, j)] = 1;
      ++K.disk_count;
      if (detail::stays(f, z, N, 1) && detail::stays(f, z, N, -1)) {
        K.retained[K.index(i, j)] = 1;
        ++K.retained_count;
      }
    }
  K.retained_fraction = static_cast<double>(K.retained_count) / static_cast<double>(K.disk_count);
  detail::UnionFind uf(R * R);
  for (std::size_t j = 0; j < R; ++j)
    for (std::size_t i = 0; i < R; ++i) {
      if (!K.retained[K.index(i, j)]) continue;
      if (i + 1 < R && K.retained[K.index(i + 1, j)]) uf.unite(K.index(i, j), K.index(i + 1, j));
      if (j + 1 < R && K.retained[K.index(i, j + 1)]) uf.unite(K.index(i, j), K.index(i, j + 1));
    }
  const std::size_t c0 = K.index(R / 2, R / 2);
  if (!K.retained[c0]) throw ModelError("the fixed point 0 was not retained");
  const std::size_t root = uf.find(c0);
  K.inradius = K.r0;
  for (std::size_t j = 0; j < R; ++j)
    for (std::size_t i = 0; i < R; ++i) {
      const std::size_t k = K.index(i, j);
      if (K.retained[k] && uf.find(k) == root) {
        K.component[k] = 1;
        ++K.component_count;
        K.component_points.push_back(K.point(i, j));
        if (std::abs(K.point(i, j)) >= K.r0 - 2 * K.h) K.touches = true;
      } else if (K.in_disk[k]) {
        K.inradius = std::min(K.inradius, std::abs(K.point(i, j)));
      }
    }
  for (std::size_t j = 0; j < R; ++j)
    for (std::size_t i = 0; i < R; ++i) {
      if (!K.component[K.index(i, j)]) continue;
      const bool edge = i == 0 || j == 0 || i + 1 == R || j + 1 == R || !K.component[K.index(i - 1, j)] ||
                        !K.component[K.index(i + 1, j)] || !K.component[K.index(i, j - 1)] ||
                        !K.component[K.index(i, j + 1)];
      if (edge) K.boundary.push_back(K.point(i, j));
    }
  // f(z) must land within h (1 + sup|f'|) of the retained set.
  const long reach = static_cast<long>(std::ceil(1 + f.derivative_bound()));
  std::size_t misses = 0;
  for (const cplx& z : K.component_points) {
    for (int dir : {1, -1}) {
      const cplx w = f.step(z, dir);
      const auto c = K.cell_of(w);
      bool found = false;
      if (c)
        for (long dj = -reach; dj <= reach && !found; ++dj)
          for (long di = -reach; di <= reach && !found; ++di) {
            const long a = c->first + di, b = c->second + dj;
            if (a < 0 || b < 0 || a >= static_cast<long>(R) || b >= static_cast<long>(R)) continue;
            found = K.retained[K.index(static_cast<std::size_t>(a), static_cast<std::size_t>(b))];
          }
      if (!found) {
        ++misses;
        break;
      }
    }
  }
  K.invariance_defect =
      K.component_points.empty() ? 0.0 : static_cast<double>(misses) / static_cast<double>(K.component_points.size());
  return K;
}

struct RecurrenceRow {
  std::size_t n = 0;
  std::uint64_t q = 0;
  double sup_forward = 0, sup_backward = 0, sup = 0;
  std::size_t excluded = 0;  // component points whose orbit left D_r0 first
  std::size_t sampled = 0;
  double shadow_divergence = 0;  // max |f^{q_n}(z + 1e-12) - f^{q_n}(z)| over shadow seeds
  bool precision_ok = true;      // shadow divergence below 1e-6
};

struct RecurrenceProfile {
  std::vector<RecurrenceRow> rows;
  /// Largest ratio profile(n+1)/profile(n); values up to 1.1 satisfy the
  /// decreasing-with-10%-slack test.
  double worst_step_ratio = 0;
  bool decreasing = true;
  Status status = Status::pass;
};

/// sup_{z in K} |f^{+-q_n}(z) - z| for n in [n_lo, n_hi], over at most
/// max_points component points (evenly strided).
inline RecurrenceProfile recurrence_profile(const Germ& f, const HedgehogApprox& K, const RotationNumber& alpha,
                                            std::size_t n_lo, std::size_t n_hi, std::size_t max_points = 0,
                                            double slack = 0.10) {
  if (n_hi < n_lo) throw DomainError("empty level range");
  RecurrenceProfile prof;
  const auto conv = alpha.convergents(n_hi + 1);
  const std::size_t total = K.component_points.size();
  const std::size_t stride = max_points == 0 || max_points >= total ? 1 : (total + max_points - 1) / max_points;
  for (std::size_t n = n_lo; n <= n_hi; ++n) {
    RecurrenceRow row;
    row.n = n;
    if (conv[n].q > BigInt(100'000'000)) throw BudgetError("q_n too large to iterate", 0, 0);
    row.q = static_cast<std::uint64_t>(conv[n].q);
    std::vector<std::pair<double, cplx>> worst;
    for (std::size_t k = 0; k < total; k += stride) {
      const cplx z = K.component_points[k];
      ++row.sampled;
      bool excluded = false;
      for (int dir : {1, -1}) {
        const auto o = iterate_germ(f, z, row.q, dir);
        if (o.escape) {
          excluded = true;
          continue;
        }
        const double d = std::abs(o.z - z);
        (dir > 0 ? row.sup_forward : row.sup_backward) = std::max(dir > 0 ? row.sup_forward : row.sup_backward, d);
        worst.push_back({d, z});
      }
      if (excluded) ++row.excluded;
    }
    row.sup = std::max(row.sup_forward, row.sup_backward);
    // Shadow runs from the eight worst points, offset by 1e-12.
    std::partial_sort(worst.begin(), worst.begin() + std::min<std::size_t>(8, worst.size()), worst.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t s = 0; s < std::min<std::size_t>(8, worst.size()); ++s) {
      const cplx z = worst[s].second;
      cplx a = z, b = z + cplx(1e-12, 1e-12) / std::sqrt(2.0);
      for (std::uint64_t i = 0; i < row.q; ++i) {
        a = f(a);
        b = f(b);
      }
      row.shadow_divergence = std::max(row.shadow_divergence, std::abs(a - b));
    }
    row.precision_ok = row.shadow_divergence < 1e-6;
    prof.rows.push_back(row);
  }
  for (std::size_t i = 1; i < prof.rows.size(); ++i) {
    const double r = safe_ratio(prof.rows[i].sup, prof.rows[i - 1].sup);
    prof.worst_step_ratio = std::max(prof.worst_step_ratio, r);
    if (r > 1 + slack) prof.decreasing = false;
  }
  prof.status = prof.decreasing ? Status::pass : Status::fail;
  return prof;
}

namespace detail {

/// Uniform hash grid over points with cell size `cell`.
class PointHash {
 public:
  PointHash(const std::vector<cplx>& pts, double cell) : pts_(pts), cell_(cell) {
    for (std::size_t i = 0; i < pts_.size(); ++i) cells_[key(cell_index(pts_[i]))].push_back(i);
  }

  /// Calls f(i) for every point within eps of z (eps <= cell).
  template <class F>
  void near(cplx z, double eps, F&& f) const {
    const auto [ci, cj] = cell_index(z);
    for (long dj = -1; dj <= 1; ++dj)
      for (long di = -1; di <= 1; ++di) {
        const auto it = cells_.find(key({ci + di, cj + dj}));
        if (it == cells_.end()) continue;
        for (std::size_t i : it->second)
          if (std::abs(pts_[i] - z) <= eps) f(i);
      }
  }

  bool any_within(cplx z, double eps) const {
    bool hit = false;
    near(z, eps, [&](std::size_t) { hit = true; });
    return hit;
  }

 private:
  std::pair<long, long> cell_index(cplx z) const {
    return {static_cast<long>(std::floor(z.real() / cell_)), static_cast<long>(std::floor(z.imag() / cell_))};
  }
  static std::int64_t key(std::pair<long, long> c) {
    return (static_cast<std::int64_t>(c.first) << 32) ^ static_cast<std::int64_t>(static_cast<std::uint32_t>(c.second));
  }

  std::vector<cplx> pts_;
  double cell_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;
};

}  // namespace detail

struct SeedAccumulation {
  cplx seed;
  bool inside = false;   // seed lies in the component (boundary targets only): excluded
  bool tracked = false;  // came within delta of the component
  double coverage = 0;   // fraction of targets approached within eps
  std::size_t steps = 0;
};

struct AccumulationReport {
  std::vector<SeedAccumulation> seeds;
  std::size_t tracked = 0;
  double min_coverage = 0;
  double delta = 0, eps = 0;
  std::size_t N = 0;
};

/// For each seed, the fraction of the target points (by default the boundary
/// sample of K) that the forward orbit f^j(seed), j < N, approaches within eps.
/// Seeds whose orbit never comes within delta of the component are excluded,
/// and so are seeds in the component when the targets are K's boundary.
/// Orbits are followed while |z| <= 4 r_0.
inline AccumulationReport accumulation_scan(const Germ& f, const HedgehogApprox& K, const std::vector<cplx>& seeds,
                                            std::size_t N, double delta, double eps,
                                            const std::vector<cplx>* targets = nullptr) {
  if (!(eps > 0 && delta > 0)) throw DomainError("delta and eps must be positive");
  const std::vector<cplx>& T = targets ? *targets : K.boundary;
  AccumulationReport rep;
  rep.delta = delta;
  rep.eps = eps;
  rep.N = N;
  const detail::PointHash thash(T, eps);
  const detail::PointHash chash(K.component_points, std::max(delta, K.h));
  rep.min_coverage = 1.0;
  for (const cplx& s : seeds) {
    SeedAccumulation a;
    a.seed = s;
    if (!targets && K.in_component(s)) {
      a.inside = true;
      rep.seeds.push_back(a);
      continue;
    }
    std::vector<std::uint8_t> hit(T.size(), 0);
    std::size_t hits = 0;
    cplx z = s;
    for (std::size_t j = 0; j < N; ++j) {
      if (!(std::abs(z) <= 4 * f.r0())) break;
      if (!a.tracked && chash.any_within(z, delta)) a.tracked = true;
      thash.near(z, eps, [&](std::size_t i) {
        if (!hit[i]) {
          hit[i] = 1;
          ++hits;
        }
      });
      z = f(z);
      a.steps = j + 1;
    }
    a.coverage = T.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(T.size());
    if (a.tracked) {
      ++rep.tracked;
      rep.min_coverage = std::min(rep.min_coverage, a.coverage);
    }
    rep.seeds.push_back(a);
  }
  if (rep.tracked == 0) rep.min_coverage = 0;
  return rep;
}

/// n points of the circle |z| = r.
inline std::vector<cplx> circle_samples(double r, std::size_t n) {
  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = std::polar(r, 2 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  return out;
}

/// Deterministic seeds uniform in the annulus r_lo <= |z| <= r_hi (area
/// measure), from the raw 64-bit output of mt19937_64.
inline std::vector<cplx> annulus_seeds(std::size_t count, double r_lo, double r_hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<cplx> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = unit(), v = unit();
    const double r = std::sqrt(r_lo * r_lo + u * (r_hi * r_hi - r_lo * r_lo));
    out.push_back(std::polar(r, 2 * std::numbers::pi * v));
  }
  return out;
}

struct ProbeSuspect {
  cplx seed;
  int direction = 1;
  std::size_t entered_at = 0;
  double min_modulus = 0;
  std::vector<double> min_modulus_trace;  // running minimum at 16 checkpoints
};

struct ProbeReport {
  std::size_t seeds = 0, N = 0;
  double inner = 0, outer = 0;
  std::size_t entries = 0;  // entries into D_inner from outside, all orbits
  std::size_t exits = 0;    // of those, the ones that came back out
  std::size_t late = 0;     // still inside at the end after entering in the second half of the budget
  std::size_t escapes = 0;  // orbit-directions that left D_r0
  std::vector<ProbeSuspect> suspects;
  Status status = Status::pass;
};

/// For every seed and direction: once the orbit enters D_inner from outside,
/// it must come back to |z| >= min(outer, 0.9 * the largest modulus seen
/// before entry) within the budget. Orbits that never do are suspects. An
/// entry in the second half of the budget has too little room to be judged
/// and is counted as late instead.
inline ProbeReport convergence_probe(const Germ& f, const std::vector<cplx>& seeds, std::size_t N, double inner = -1,
                                     double outer = -1) {
  if (inner < 0) inner = 0.1 * f.r0();
  if (outer < 0) outer = 0.5 * f.r0();
  ProbeReport rep;
  rep.seeds = seeds.size();
  rep.N = N;
  rep.inner = inner;
  rep.outer = outer;
  for (const cplx& s : seeds) {
    if (s == cplx(0, 0)) throw DomainError("probe seeds must be nonzero");
    for (int dir : {1, -1}) {
      cplx z = s;
      double pre_max = std::abs(z);
      bool inside = std::abs(z) < inner, entered = false;
      double target = 0, running_min = std::abs(z);
      std::size_t entered_at = 0;
      std::vector<double> trace;
      for (std::size_t j = 1; j <= N; ++j) {
        if (!in_closed_disk(z, f.r0())) {
          ++rep.escapes;
          break;
        }
        try {
          z = f.step(z, dir);
        } catch (const InverseError&) {
          ++rep.escapes;
          break;
        }
        const double m = std::abs(z);
        running_min = std::min(running_min, m);
        if (!entered) {
          if (m < inner && !inside) {
            entered = true;
            entered_at = j;
            target = std::min(outer, 0.9 * pre_max);
            ++rep.entries;
          } else {
            inside = m < inner;
            pre_max = std::max(pre_max, m);
          }
        } else if (m >= target) {
          ++rep.exits;
          entered = false;
          inside = m < inner;
          pre_max = m;
        }
        if (j % std::max<std::size_t>(1, N / 16) == 0) trace.push_back(running_min);
      }
      if (entered && 2 * entered_at <= N)
        rep.suspects.push_back({s, dir, entered_at, running_min, trace});
      else if (entered)
        ++rep.late;
    }
  }
  rep.status = rep.suspects.empty() ? Status::pass : Status::fail;
  return rep;
}

}  // namespace dylab
