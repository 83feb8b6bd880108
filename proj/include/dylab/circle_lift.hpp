#pragma once

// Analytic lifts g: R -> R with g(x+1) = g(x) + 1, evaluable on real and
// complex arguments together with their first three derivatives.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <regex>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "dylab/errors.hpp"

namespace dylab {

using cplx = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Value and first three derivatives of a function at a point.
template <class T>
struct Jet3 {
  T v, d1, d2, d3;
};

/// Chain rule up to third order: jet of outer(inner(x)) given the jet of
/// `outer` at inner.v and the jet of `inner` at x.
template <class T>
Jet3<T> chain(const Jet3<T>& outer, const Jet3<T>& inner) {
  const T a = inner.d1;
  return {outer.v, outer.d1 * a, outer.d2 * a * a + outer.d1 * inner.d2,
          outer.d3 * a * a * a + T(3) * outer.d2 * a * inner.d2 + outer.d1 * inner.d3};
}

/// Schwarzian derivative D3/D1 - 3/2 (D2/D1)^2 from a jet.
template <class T>
T schwarzian(const Jet3<T>& j) {
  const T r = j.d2 / j.d1;
  return j.d3 / j.d1 - T(1.5) * r * r;
}

class CircleLift {
 public:
  struct Translation {
    double omega = 0.0;
  };
  /// x + omega + sum_k c_k sin(2 pi k x) + d_k cos(2 pi k x).
  struct Trigonometric {
    double omega = 0.0;
    std::vector<double> c;  // sine coefficients, k = 1..K
    std::vector<double> d;  // cosine coefficients
  };
  /// Lift of the disk automorphism z -> (z + a)/(1 + conj(a) z) on the unit
  /// circle, followed by a translation by omega.
  struct Blaschke {
    cplx a;
    double omega = 0.0;
  };
  using Stage = std::variant<Translation, Trigonometric, Blaschke>;

  static CircleLift translation(double omega) { return CircleLift({Translation{omega}}, 0.0); }

  /// x + omega + (eps / 2 pi) sin(2 pi x).
  static CircleLift arnold(double omega, double eps, double band_halfwidth = 0.0) {
    return trigonometric(omega, {eps / two_pi}, {}, band_halfwidth);
  }

  /// Enforces the sufficient univalence condition on B_Delta when
  /// band_halfwidth > 0, and Dg > 0 on the real line in any case.
  static CircleLift trigonometric(double omega, std::vector<double> c, std::vector<double> d,
                                  double band_halfwidth = 0.0) {
    const std::size_t K = std::max(c.size(), d.size());
    c.resize(K, 0.0);
    d.resize(K, 0.0);
    double real_bound = 0.0, band_bound = 0.0;
    for (std::size_t k = 1; k <= K; ++k) {
      const double w = two_pi * static_cast<double>(k) * (std::abs(c[k - 1]) + std::abs(d[k - 1]));
      real_bound += w;
      band_bound += w * std::exp(two_pi * static_cast<double>(k) * band_halfwidth);
    }
    if (!(real_bound < 1.0)) throw DomainError("trigonometric lift is not a diffeomorphism (Dg may vanish)");
    if (band_halfwidth > 0.0 && !(band_bound < 1.0))
      throw DomainError("trigonometric lift is not certified univalent on the requested band");
    return CircleLift({Trigonometric{omega, std::move(c), std::move(d)}}, band_halfwidth);
  }

  static CircleLift mobius(cplx a, double omega = 0.0) {
    if (!(std::abs(a) < 1.0)) throw DomainError("Blaschke parameter must lie in the unit disk");
    // The logarithms stay on their principal branch while |a| e^{2 pi |Im z|} < 1.
    const double band = std::abs(a) > 0 ? -std::log(std::abs(a)) / two_pi : 1.0;
    return CircleLift({Blaschke{a, omega}}, 0.5 * band);
  }

  /// outer o inner.
  friend CircleLift compose(const CircleLift& outer, const CircleLift& inner) {
    std::vector<Stage> stages = inner.stages_;
    stages.insert(stages.end(), outer.stages_.begin(), outer.stages_.end());
    return CircleLift(std::move(stages), std::min(outer.band_, inner.band_));
  }

  /// T_delta o g.
  CircleLift shifted(double delta) const {
    CircleLift out = *this;
    std::visit([delta](auto& s) { s.omega += delta; }, out.stages_.back());
    return out;
  }

  double band_halfwidth() const { return band_; }
  const std::vector<Stage>& stages() const { return stages_; }

  /// True for a pure translation (every stage is one).
  bool is_translation() const {
    for (const auto& s : stages_)
      if (!std::holds_alternative<Translation>(s)) return false;
    return true;
  }

  /// Total translation amount when is_translation().
  double translation_amount() const {
    double w = 0;
    for (const auto& s : stages_) w += std::get<Translation>(s).omega;
    return w;
  }

  template <class T>
  T operator()(T x) const {
    for (const auto& s : stages_) x = std::visit([&](const auto& st) { return value(st, x); }, s);
    return x;
  }

  template <class T>
  Jet3<T> jet(T x) const {
    Jet3<T> acc{x, T(1), T(0), T(0)};
    for (const auto& s : stages_) {
      const Jet3<T> outer = std::visit([&](const auto& st) { return stage_jet(st, acc.v); }, s);
      acc = chain(outer, acc);
    }
    return acc;
  }

  template <class T>
  T derivative(T x) const {
    return jet(x).d1;
  }

  /// D log Dg = D^2 g / Dg.
  template <class T>
  T log_derivative_slope(T x) const {
    const Jet3<T> j = jet(x);
    return j.d2 / j.d1;
  }

  /// Round-trippable text form, see parse().
  std::string spec() const {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      if (i) os << '|';
      std::visit(
          [&](const auto& st) {
            using S = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<S, Translation>) {
              os << "translation:" << st.omega;
            } else if constexpr (std::is_same_v<S, Trigonometric>) {
              os << "trig:" << st.omega << ';';
              for (std::size_t k = 0; k < st.c.size(); ++k) os << (k ? "," : "") << st.c[k];
              os << ';';
              for (std::size_t k = 0; k < st.d.size(); ++k) os << (k ? "," : "") << st.d[k];
            } else {
              os << "mobius:" << st.a.real() << ',' << st.a.imag() << ',' << st.omega;
            }
          },
          stages_[i]);
    }
    if (band_ > 0) os << "@band=" << band_;
    return os.str();
  }

  /// Parses "translation:w", "arnold:w,eps", "trig:w;c1,c2;d1,d2",
  /// "mobius:re,im,w", stages joined by '|' (applied left to right), with an
  /// optional "@band=Delta" suffix.
  static CircleLift parse(const std::string& text) {
    std::string body = text;
    double band = 0.0;
    if (const auto at = body.find("@band="); at != std::string::npos) {
      band = std::stod(body.substr(at + 6));
      body = body.substr(0, at);
    }
    std::vector<double> nums;
    auto numbers = [&](const std::string& s) {
      std::vector<double> out;
      static const std::regex num(R"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)");
      for (auto it = std::sregex_iterator(s.begin(), s.end(), num); it != std::sregex_iterator(); ++it)
        out.push_back(std::stod(it->str()));
      return out;
    };
    std::vector<CircleLift> parts;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, '|')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw DomainError("bad map spec: " + item);
      const std::string kind = item.substr(0, colon);
      const std::string args = item.substr(colon + 1);
      if (kind == "translation") {
        const auto v = numbers(args);
        if (v.size() != 1) throw DomainError("translation needs one number");
        parts.push_back(translation(v[0]));
      } else if (kind == "arnold") {
        const auto v = numbers(args);
        if (v.size() != 2) throw DomainError("arnold needs omega,eps");
        parts.push_back(arnold(v[0], v[1], band));
      } else if (kind == "trig") {
        std::vector<std::string> fields;
        std::stringstream fs(args);
        std::string f;
        while (std::getline(fs, f, ';')) fields.push_back(f);
        if (fields.empty()) throw DomainError("trig needs omega");
        const auto w = numbers(fields[0]);
        if (w.size() != 1) throw DomainError("trig needs one omega");
        parts.push_back(trigonometric(w[0], fields.size() > 1 ? numbers(fields[1]) : std::vector<double>{},
                                      fields.size() > 2 ? numbers(fields[2]) : std::vector<double>{}, band));
      } else if (kind == "mobius") {
        const auto v = numbers(args);
        if (v.size() < 2) throw DomainError("mobius needs re,im[,omega]");
        parts.push_back(mobius({v[0], v[1]}, v.size() > 2 ? v[2] : 0.0));
      } else {
        throw DomainError("unknown map family: " + kind);
      }
    }
    if (parts.empty()) throw DomainError("empty map spec");
    CircleLift g = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) g = compose(parts[i], g);
    if (band > 0) g.band_ = band;
    return g;
  }

 private:
  CircleLift(std::vector<Stage> stages, double band) : stages_(std::move(stages)), band_(band) {}

  template <class T>
  static T value(const Translation& s, T x) {
    return x + s.omega;
  }
  template <class T>
  static T value(const Trigonometric& s, T x) {
    T y = x + s.omega;
    for (std::size_t k = 1; k <= s.c.size(); ++k) {
      const T a = two_pi * static_cast<double>(k) * x;
      y += s.c[k - 1] * std::sin(a) + s.d[k - 1] * std::cos(a);
    }
    return y;
  }
  template <class T>
  static T value(const Blaschke& s, T x) {
    using C = cplx;
    const C I(0, 1);
    const C zx = C(x);
    const C l1 = std::log(1.0 + s.a * std::exp(-I * two_pi * zx));
    const C l2 = std::log(1.0 + std::conj(s.a) * std::exp(I * two_pi * zx));
    const C y = zx + s.omega + (l1 - l2) / (I * two_pi);
    if constexpr (std::is_same_v<T, double>) {
      return y.real();
    } else {
      return y;
    }
  }

  template <class T>
  static Jet3<T> stage_jet(const Translation& s, T x) {
    return {x + s.omega, T(1), T(0), T(0)};
  }
  template <class T>
  static Jet3<T> stage_jet(const Trigonometric& s, T x) {
    Jet3<T> j{x + s.omega, T(1), T(0), T(0)};
    for (std::size_t k = 1; k <= s.c.size(); ++k) {
      const double w = two_pi * static_cast<double>(k);
      const T sn = std::sin(w * x), cs = std::cos(w * x);
      const T f = s.c[k - 1] * sn + s.d[k - 1] * cs;
      const T fp = s.c[k - 1] * cs - s.d[k - 1] * sn;
      j.v += f;
      j.d1 += w * fp;
      j.d2 -= w * w * f;
      j.d3 -= w * w * w * fp;
    }
    return j;
  }
  template <class T>
  static Jet3<T> stage_jet(const Blaschke& s, T x) {
    using C = cplx;
    const C I(0, 1);
    const C zx = C(x);
    const C u = s.a * std::exp(-I * two_pi * zx);
    const C w = std::conj(s.a) * std::exp(I * two_pi * zx);
    const C r1 = u / (1.0 + u), r2 = w / (1.0 + w);
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const C v = zx + s.omega + (std::log(1.0 + u) - std::log(1.0 + w)) / (I * two_pi);
    const C d1 = 1.0 - r1 - r2;
    const C d2 = I * two_pi * (r1 * (1.0 - r1) - r2 * (1.0 - r2));
    const C d3 = 4.0 * pi2 * (r1 * (1.0 - r1) * (1.0 - 2.0 * r1) + r2 * (1.0 - r2) * (1.0 - 2.0 * r2));
    if constexpr (std::is_same_v<T, double>) {
      return {v.real(), d1.real(), d2.real(), d3.real()};
    } else {
      return {v, d1, d2, d3};
    }
  }

  std::vector<Stage> stages_;
  double band_ = 0.0;
};

/// A point of a lifted orbit stored as integer part plus fractional part, so
/// that differences x_a - x_b keep full precision for long orbits.
struct LiftPoint {
  std::int64_t whole = 0;
  double frac = 0.0;

  double value() const { return static_cast<double>(whole) + frac; }
  friend double operator-(const LiftPoint& a, const LiftPoint& b) {
    return static_cast<double>(a.whole - b.whole) + (a.frac - b.frac);
  }
};

inline LiftPoint make_lift_point(double x) {
  const double f = std::floor(x);
  return {static_cast<std::int64_t>(f), x - f};
}

/// One step g(x) with the integer part carried separately.
inline LiftPoint step(const CircleLift& g, const LiftPoint& x) {
  const double y = g(x.frac);
  const double f = std::floor(y);
  return {x.whole + static_cast<std::int64_t>(f), y - f};
}

inline LiftPoint iterate(const CircleLift& g, LiftPoint x, std::size_t j) {
  for (std::size_t i = 0; i < j; ++i) x = step(g, x);
  return x;
}

/// g^j(x) as a plain real.
inline double iterate(const CircleLift& g, double x, std::size_t j) {
  return iterate(g, make_lift_point(x), j).value();
}

/// g^q(x) - x - p, computed without cancellation in the integer parts.
inline double displacement(const CircleLift& g, double x, std::size_t q, std::int64_t p) {
  const LiftPoint x0 = make_lift_point(x);
  const LiftPoint xq = iterate(g, x0, q);
  return static_cast<double>(xq.whole - x0.whole - p) + (xq.frac - x0.frac);
}

/// Real orbit x_0..x_{len-1} of x.
inline std::vector<LiftPoint> real_orbit(const CircleLift& g, double x, std::size_t len) {
  std::vector<LiftPoint> out;
  out.reserve(len);
  LiftPoint p = make_lift_point(x);
  for (std::size_t i = 0; i < len; ++i) {
    out.push_back(p);
    p = step(g, p);
  }
  return out;
}

/// g^j(x) for complex x, keeping the real part reduced; returns the complex
/// point together with the integer that was removed.
struct ComplexLiftPoint {
  std::int64_t whole = 0;
  cplx frac;  // real part in [0,1)
  cplx value() const { return frac + static_cast<double>(whole); }
};

inline ComplexLiftPoint make_lift_point(cplx z) {
  const double f = std::floor(z.real());
  return {static_cast<std::int64_t>(f), z - f};
}

inline ComplexLiftPoint step(const CircleLift& g, const ComplexLiftPoint& z) {
  const cplx y = g(z.frac);
  const double f = std::floor(y.real());
  return {z.whole + static_cast<std::int64_t>(f), y - f};
}

}  // namespace dylab
