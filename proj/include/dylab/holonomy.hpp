#pragma once

// Holonomy of  alpha y (1 + P) dx + x (1 + Q) dy = 0  around x = 0, computed
// by following leaves over the circle x = x0 e^{-2 pi i theta}.

#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "dylab/errors.hpp"
#include "dylab/germ.hpp"

namespace dylab {

struct Monomial {
  int j = 0;  // power of x
  int k = 0;  // power of y
  cplx coeff;
};

class FoliationGerm {
 public:
  FoliationGerm(double alpha, std::vector<Monomial> P, std::vector<Monomial> Q, double x0_abs, double leaf_radius)
      : alpha_(alpha), P_(std::move(P)), Q_(std::move(Q)), x0_(x0_abs), R_(leaf_radius) {
    if (!(alpha > 0) || !std::isfinite(alpha)) throw DomainError("foliation: alpha must be a positive real");
    if (!(x0_abs > 0) || !(leaf_radius > 0)) throw DomainError("foliation: radii must be positive");
    for (const auto* terms : {&P_, &Q_})
      for (const auto& m : *terms) {
        if (m.j < 0 || m.k < 0) throw DomainError("foliation: negative exponent");
        if (m.j == 0 && m.k == 0) throw DomainError("foliation: P and Q must vanish at the origin");
      }
    if (tube_bound(P_) >= 0.5 || tube_bound(Q_) >= 0.5)
      throw DomainError("foliation: |P| or |Q| reaches 1/2 on the tube; shrink x0 or the leaf radius");
  }

  static FoliationGerm linear(double alpha, double x0_abs = 0.05, double leaf_radius = 0.05) {
    return FoliationGerm(alpha, {}, {}, x0_abs, leaf_radius);
  }

  double alpha() const { return alpha_; }
  double x0_abs() const { return x0_; }
  double leaf_radius() const { return R_; }
  const std::vector<Monomial>& P() const { return P_; }
  const std::vector<Monomial>& Q() const { return Q_; }
  bool is_linear() const { return P_.empty() && Q_.empty(); }

  /// sup over |x| <= x0, |y| <= R of sum |e_jk| |x|^j |y|^k.
  double tube_bound(const std::vector<Monomial>& terms) const {
    double s = 0;
    for (const auto& m : terms) s += std::abs(m.coeff) * std::pow(x0_, m.j) * std::pow(R_, m.k);
    return s;
  }

  static cplx eval(const std::vector<Monomial>& terms, cplx x, cplx y) {
    cplx s = 0;
    for (const auto& m : terms) s += m.coeff * ipow(x, m.j) * ipow(y, m.k);
    return s;
  }

  /// dy/dtheta along x(theta) = x0 e^{-2 pi i theta}. From dy/dx = -alpha y (1+P) / (x (1+Q))
  /// and dx/dtheta = -2 pi i x.
  cplx rhs(double theta, cplx y) const {
    const cplx x = std::polar(x0_, -2 * std::numbers::pi * theta);
    const cplx num = 1.0 + eval(P_, x, y), den = 1.0 + eval(Q_, x, y);
    return cplx(0, 2 * std::numbers::pi * alpha_) * y * num / den;
  }

 private:
  static cplx ipow(cplx z, int e) {
    cplx r = 1;
    for (int i = 0; i < e; ++i) r *= z;
    return r;
  }

  double alpha_;
  std::vector<Monomial> P_, Q_;
  double x0_, R_;
};

struct TransportStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double min_step = 0;
};

/// Follows the leaf through y_start from theta_from to theta_to (either direction).
inline cplx transport(const FoliationGerm& F, cplx y_start, double tol, double theta_from, double theta_to,
                      TransportStats* stats = nullptr) {
  namespace ode = boost::numeric::odeint;
  using state = std::array<double, 2>;
  if (!(tol > 0)) throw DomainError("holonomy: tol must be positive");
  if (std::abs(y_start) > F.leaf_radius()) throw DomainError("holonomy: |y_start| exceeds the leaf radius");
  if (y_start == 0.0) return 0.0;

  auto sys = [&F](const state& s, state& ds, double t) {
    const cplx d = F.rhs(t, cplx(s[0], s[1]));
    ds = {d.real(), d.imag()};
  };
  // Absolute floor scaled to the start so the local test is relative even
  // when one component passes through zero.
  auto stepper = ode::make_controlled<ode::runge_kutta_dopri5<state>>(tol * std::abs(y_start), tol);

  state s = {y_start.real(), y_start.imag()};
  const double span = theta_to - theta_from, dir = span >= 0 ? 1.0 : -1.0;
  double t = theta_from, dt = dir * std::min(0.01, std::abs(span));
  double min_step = std::abs(span);
  std::size_t accepted = 0, rejected = 0;
  constexpr double underflow = 1e-14;
  constexpr std::size_t max_steps = 10'000'000;

  while (dir * (theta_to - t) > 0) {
    if (dir * (t + dt - theta_to) > 0) dt = theta_to - t;
    const double t_before = t;
    const double tried = dt;
    if (stepper.try_step(sys, s, t, dt) == ode::success) {
      ++accepted;
      min_step = std::min(min_step, std::abs(t - t_before));
      if (std::hypot(s[0], s[1]) > F.leaf_radius()) throw LeafEscapeError("holonomy: leaf left the domain", t);
    } else {
      ++rejected;
      if (std::abs(dt) < underflow || std::abs(tried) < underflow)
        throw StiffnessError("holonomy: step size underflow at theta=" + std::to_string(t));
    }
    if (accepted + rejected > max_steps) throw StiffnessError("holonomy: step budget exhausted");
    // Land exactly on the endpoint instead of leaving a rounding sliver.
    if (std::abs(theta_to - t) < 1e-15) t = theta_to;
  }
  if (stats) *stats = {accepted, rejected, min_step};
  return {s[0], s[1]};
}

inline cplx holonomy_map(const FoliationGerm& F, cplx y_start, double tol, TransportStats* stats = nullptr) {
  return transport(F, y_start, tol, 0.0, 1.0, stats);
}

struct MultiplierEstimate {
  cplx value;
  double h = 0;
  std::array<cplx, 3> ratios{};  // H(y)/y at h, h/2, h/4
  double modulus_defect = 0;
};

/// Richardson extrapolation of H(y)/y = f'(0) + a y + b y^2 + ... to y = 0.
inline MultiplierEstimate estimate_multiplier(const FoliationGerm& F, double tol, double h = 0) {
  if (h <= 0) h = F.leaf_radius() / 8;
  if (h > F.leaf_radius()) throw DomainError("holonomy: extrapolation step exceeds the leaf radius");
  MultiplierEstimate e;
  e.h = h;
  for (int i = 0; i < 3; ++i) {
    const double y = h / (1 << i);
    e.ratios[i] = holonomy_map(F, y, tol) / y;
  }
  e.value = (8.0 * e.ratios[2] - 6.0 * e.ratios[1] + e.ratios[0]) / 3.0;
  e.modulus_defect = std::abs(std::abs(e.value) - 1);
  return e;
}

inline cplx holonomy_multiplier(const FoliationGerm& F, double tol, double h = 0) {
  const auto e = estimate_multiplier(F, tol, h);
  if (e.modulus_defect > 10 * tol)
    throw ModelError("holonomy: |multiplier| - 1 = " + std::to_string(e.modulus_defect) +
                     " exceeds 10*tol; the perturbation or the domain is too large");
  return e.value;
}

struct HolonomyFit {
  Germ germ;
  std::vector<cplx> coeffs;  // a_1 .. a_degree
  double alpha_recovered = 0;
  double multiplier_modulus = 0;
  double residual = 0;  // max |H(y) - fit(y)| / sample_radius over the samples
  std::size_t samples = 0;
};

inline HolonomyFit germ_from_holonomy(const FoliationGerm& F, double sample_radius, std::size_t degree,
                                      double tol = 1e-12, double residual_threshold = 1e-8,
                                      std::size_t samples = 0) {
  if (degree < 1) throw DomainError("holonomy fit: degree must be at least 1");
  if (!(sample_radius > 0) || sample_radius > F.leaf_radius())
    throw DomainError("holonomy fit: sample radius must lie in (0, leaf radius]");
  if (samples == 0) samples = std::max<std::size_t>(64, 4 * degree);
  if (samples <= degree) throw DomainError("holonomy fit: need more samples than the degree");

  const std::size_t M = samples;
  std::vector<cplx> y(M), H(M);
  for (std::size_t m = 0; m < M; ++m) {
    y[m] = std::polar(sample_radius, 2 * std::numbers::pi * double(m) / double(M));
    H[m] = holonomy_map(F, y[m], tol);
  }
  // Powers y^k are orthogonal on equispaced circle samples for k < M, so the
  // least-squares coefficients are the discrete Fourier projections.
  std::vector<cplx> a(degree);
  for (std::size_t k = 1; k <= degree; ++k) {
    cplx s = 0;
    for (std::size_t m = 0; m < M; ++m) s += H[m] * std::pow(std::conj(y[m]) / sample_radius, double(k));
    a[k - 1] = s / (double(M) * std::pow(sample_radius, double(k)));
  }
  double res = 0;
  for (std::size_t m = 0; m < M; ++m) {
    cplx fit = 0;
    for (std::size_t k = degree; k >= 1; --k) fit = (fit + a[k - 1]) * y[m];
    res = std::max(res, std::abs(H[m] - fit));
  }
  res /= sample_radius;
  if (res > residual_threshold)
    throw FitError("holonomy fit: residual " + std::to_string(res) + " above threshold; raise the degree or shrink the radius");

  double alpha = std::arg(a[0]) / (2 * std::numbers::pi);
  alpha -= std::floor(alpha);
  std::vector<cplx> higher(a.begin() + 1, a.end());
  return HolonomyFit{Germ(alpha, higher, sample_radius, "holonomy"), a, alpha, std::abs(a[0]), res, M};
}

}  // namespace dylab
