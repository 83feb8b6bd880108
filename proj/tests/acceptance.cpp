// Acceptance run: one PASS/FAIL line per criterion. Exit status is 1 if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "dylab/dylab.hpp"

using namespace dylab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const RotationNumber& golden() {
  static const RotationNumber a = RotationNumber::golden();
  return a;
}

const CircleLift& arnold001() {
  static const CircleLift g = tune_parameter(CircleLift::arnold(0, 0.001, 0.25), golden(), 1e-11).lift;
  return g;
}

const CircleLift& rigid() {
  static const CircleLift g = CircleLift::translation(golden().value());
  return g;
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// ------------------------------------------------------------------ 1, 2

Outcome continued_fractions() {
  // Oracle: Fibonacci recurrence and a 100-digit sqrt(5).
  const auto conv = golden().convergents(22);
  std::vector<BigInt> F = {0, 1};
  for (int k = 2; k < 25; ++k) F.push_back(F[k - 1] + F[k - 2]);
  const BigFloat phi_inv = (boost::multiprecision::sqrt(BigFloat(5)) - 1) / 2;
  std::size_t fib_bad = 0, det_bad = 0, err_bad = 0;
  for (std::size_t n = 0; n <= 20; ++n) {
    // alpha = [0;1,1,...]: p_n = F_n, q_n = F_{n+1}.
    if (conv[n].p != F[n] || conv[n].q != F[n + 1]) ++fib_bad;
    const BigInt det = conv[n + 1].p * conv[n].q - conv[n].p * conv[n + 1].q;
    if (det != (n % 2 == 0 ? 1 : -1)) ++det_bad;
    if (!golden().signed_error_exact(n).abs_scaled_less(conv[n + 1].q, 1)) ++err_bad;
    const BigFloat e = boost::multiprecision::abs(BigFloat(F[n + 1]) * phi_inv - BigFloat(F[n]));
    if (!(e * BigFloat(F[n + 2]) < 1)) ++err_bad;
  }
  return {fib_bad + det_bad + err_bad == 0,
          "n=0..20: Fibonacci mismatches " + std::to_string(fib_bad) + ", determinant failures " +
              std::to_string(det_bad) + ", error-bound failures " + std::to_string(err_bad) + "; q_20 = " +
              conv[20].q.str()};
}

Outcome brjuno_sums() {
  // Oracle: Fibonacci denominators summed directly.
  double oracle = 0;
  std::vector<double> q = {1, 1};
  for (int k = 2; k < 14; ++k) q.push_back(q[k - 1] + q[k - 2]);
  for (int n = 0; n <= 10; ++n) oracle += std::log(q[n + 1]) / q[n];
  const double lib = golden().brjuno_partial_sum(10).value;
  const auto liou = RotationNumber::exp_growth(10.0).brjuno_partial_sum(4);
  const bool ok = std::abs(lib - 3.17) <= 0.01 && std::abs(lib - oracle) < 1e-12 && liou.value > 40;
  return {ok, "golden B_10 = " + fmt("%.6f", lib) + " (oracle " + fmt("%.6f", oracle) +
                  "); exp-growth(10) stream B_4 >= " + fmt("%.1f", liou.value) +
                  (liou.lower_bound_only ? " (certified lower bound)" : "")};
}

// ------------------------------------------------------------------ 3, 4

struct DYSweep {
  double tau = 0, tau_closed = 0;
  std::size_t first = 0, last = 0, verified = 0, gated = 0, samples = 0;
  std::size_t dev_violations = 0, hyp_violations = 0, escapes = 0;
  double max_rel = 0, max_hyp = 0;
  std::uint64_t max_q_next = 0;
};

const DYSweep& dy_sweep() {
  static const DYSweep s = [] {
    DYSweep s;
    const auto& g = arnold001();
    s.tau = band_nonlinearity(g, 0.25);
    s.tau_closed = 2 * std::numbers::pi * 0.001 * std::cosh(2 * std::numbers::pi * 0.25);
    for (std::size_t n = 1;; ++n) {
      const LevelIndex li = level_index(golden(), n);
      if (li.q_next > 10000) break;
      const RenormData rd = renorm_data(g, golden(), n, std::max<std::size_t>(256, 4 * li.q));
      const BandGates gates = band_gates(0.25, s.tau, rd.M);
      if (!gates.ok()) {
        ++s.gated;
        continue;
      }
      if (s.verified == 0) s.first = n;
      s.last = n;
      ++s.verified;
      s.max_q_next = li.q_next;
      std::mt19937_64 rng(1000 + n);
      for (int k = 0; k < 50; ++k) {
        const double x0 = unit(rng), y0 = 0.05 + 0.95 * unit(rng);
        ++s.samples;
        try {
          const BandOrbit o = track_dy_orbit(g, li, gates, x0, y0);
          s.max_rel = std::max(s.max_rel, o.max_deviation / y0);
          s.max_hyp = std::max(s.max_hyp, o.max_hyperbolic);
          if (!o.within_three_quarters) ++s.dev_violations;
          if (o.max_hyperbolic > 3.05) ++s.hyp_violations;
        } catch (const BandEscapeError&) {
          ++s.escapes;
        }
      }
    }
    return s;
  }();
  return s;
}

Outcome denjoy_yoccoz() {
  const auto& s = dy_sweep();
  const bool tau_ok = s.tau < 1.0 / 9 && std::abs(s.tau / s.tau_closed - 1) < 1e-2;
  const bool ok = tau_ok && s.verified > 0 && s.dev_violations == 0 && s.escapes == 0;
  return {ok, "tau = " + fmt("%.5f", s.tau) + " (closed form " + fmt("%.5f", s.tau_closed) + "); levels " +
                  std::to_string(s.first) + ".." + std::to_string(s.last) + " verified, " +
                  std::to_string(s.gated) + " gated (M_n >= Delta/2); q_{n+1} up to " +
                  std::to_string(s.max_q_next) + "; " + std::to_string(s.samples) +
                  " orbits, max |y_j - y_0|/y_0 = " + fmt("%.3g", s.max_rel) + ", violations " +
                  std::to_string(s.dev_violations + s.escapes)};
}

Outcome hyperbolic_dy() {
  const auto& s = dy_sweep();
  const bool ok = s.verified > 0 && s.hyp_violations == 0 && s.escapes == 0;
  return {ok, "levels " + std::to_string(s.first) + ".." + std::to_string(s.last) + ", " +
                  std::to_string(s.samples) + " orbits: max d_P(g^j z_0, phi_j z_0) = " + fmt("%.4g", s.max_hyp) +
                  " <= 3.05, violations " + std::to_string(s.hyp_violations)};
}

// ------------------------------------------------------------------ 5, 6

BandGates gates_at(const CircleLift& g, std::size_t level) {
  const LevelIndex li = level_index(golden(), level);
  const RenormData rd = renorm_data(g, golden(), level, std::max<std::size_t>(256, 4 * li.q));
  return band_gates(0.25, band_nonlinearity(g, 0.25), rd.M);
}

Outcome quasi_invariant_curves() {
  std::ostringstream d;
  bool ok = true;
  // Rigid rotation.
  double rigid_inv = 0, rigid_ret = 0;
  for (std::size_t n = 5; n <= 10; ++n) {
    const auto c = build_curve(rigid(), golden(), n, 0.75, 256);
    const auto r = verify_quasi_invariance(rigid(), c, gates_at(rigid(), n - 1));
    for (const auto& h : r.per_j) rigid_inv = std::max({rigid_inv, h.raw, h.bound});
    for (double y0 : {0.75, 1.0}) {
      const auto c2 = build_curve(rigid(), golden(), n, y0, 256);
      const double ret = verify_return_displacement(rigid(), c2).displacement;
      rigid_ret = std::max(rigid_ret, std::abs(ret - std::acosh(1 + 1 / (2 * y0 * y0))));
    }
  }
  ok = ok && rigid_inv <= 1e-9 && rigid_ret <= 1e-9;
  const double ret75 = verify_return_displacement(rigid(), build_curve(rigid(), golden(), 6, 0.75, 256)).displacement;
  d << "rigid: max D_P " << fmt("%.2g", rigid_inv) << ", return error " << fmt("%.2g", rigid_ret)
    << " (y0=3/4: " << fmt("%.4f", ret75) << ")";
  // Tuned Arnold up to q_n near 1e3.
  const auto& g = arnold001();
  double worst_inv = 0, worst_ret = 0;
  std::size_t last = 0;
  Status st = Status::pass;
  for (std::size_t n = 5;; ++n) {
    const LevelIndex li = level_index(golden(), n);
    if (li.q > 1000) break;
    const BandGates gates = gates_at(g, n - 1);
    if (!gates.ok()) continue;
    const auto c = build_curve(g, golden(), n, 0.75);
    const auto inv = verify_quasi_invariance(g, c, gates);
    const auto ret = verify_return_displacement(g, c);
    worst_inv = std::max(worst_inv, inv.check.lhs_max);
    worst_ret = std::max(worst_ret, ret.displacement);
    st = worst(st, worst(inv.check.status, ret.check.status));
    last = n;
  }
  ok = ok && st != Status::fail && last >= 15;
  d << "; Arnold n=5.." << last << " (q_n up to " << level_index(golden(), last).q << "): max D_P "
    << fmt("%.4f", worst_inv) << " <= 6, max return " << fmt("%.4f", worst_ret) << " <= 3 [" << to_string(st) << "]";
  return {ok, d.str()};
}

Outcome osculating_cover() {
  std::ostringstream d;
  bool ok = true;
  double rigid_excess = 0, min_cov = 1;
  for (std::size_t n = 4; n <= 10; ++n) {
    const auto c = build_curve(rigid(), golden(), n, 0.75, 2048);
    const auto r = osculating_cover_check(rigid(), c, 0.0);
    // Three-distance oracle for the largest gap between q_n orbit points.
    const double G = std::abs(golden().signed_error(n - 1)) + std::abs(golden().signed_error(n));
    const double h = 0.75 * std::abs(golden().signed_error(n - 1));
    const double analytic = 2 * std::asinh(0.5 * G / (2 * h));
    rigid_excess = std::max(rigid_excess, r.max_gap - analytic);
    min_cov = std::min(min_cov, r.coverage);
    ok = ok && r.check.status != Status::fail && r.coverage == 1.0;
  }
  ok = ok && rigid_excess <= 1e-12;
  d << "rigid n=4..10: coverage " << min_cov << ", gap vs three-distance bound " << fmt("%.2g", rigid_excess);
  const auto& g = arnold001();
  double acov = 1, agap = 0;
  Status st = Status::pass;
  for (std::size_t n : {5u, 7u, 9u, 11u, 13u}) {
    const auto r = osculating_cover_check(g, build_curve(g, golden(), n, 0.75), 0.2);
    acov = std::min(acov, r.coverage);
    agap = std::max(agap, r.max_gap);
    st = worst(st, r.check.status);
  }
  ok = ok && acov == 1.0 && st != Status::fail;
  d << "; Arnold n=5..13: coverage " << acov << ", max gap " << fmt("%.4f", agap) << " <= 3 [" << to_string(st)
    << "]";
  return {ok, d.str()};
}

// ------------------------------------------------------------------ 7, 8, 9

const HedgehogApprox& quad_K() {
  static const HedgehogApprox K = hedgehog_approx(Germ::quadratic(golden().value(), 0.1), 10000, 512);
  return K;
}

Outcome hedgehog_recurrence() {
  std::ostringstream d;
  const auto lin = Germ::linear(golden().value(), 0.1);
  const auto KL = hedgehog_approx(lin, 1000, 257);
  const auto pl = recurrence_profile(lin, KL, golden(), 3, 8);
  double dev = 0;
  for (const auto& r : pl.rows)
    dev = std::max(dev, std::abs(r.sup - 2 * 0.1 * std::abs(std::sin(std::numbers::pi * golden().signed_error(r.n)))));
  bool ok = dev <= 1e-12 && std::abs(pl.rows[0].sup - 0.0885) < 5e-5 && std::abs(pl.rows[1].sup - 0.0559) < 5e-5;
  d << "linear: closed-form deviation " << fmt("%.2g", dev) << " (n=3 " << fmt("%.4f", pl.rows[0].sup) << ", n=4 "
    << fmt("%.4f", pl.rows[1].sup) << ")";
  const auto f = Germ::quadratic(golden().value(), 0.1);
  const auto& K = quad_K();
  const auto pq = recurrence_profile(f, K, golden(), 3, 8);
  ok = ok && pq.decreasing && pq.status == Status::pass;
  d << "; quadratic (grid " << K.resolution << ", N=" << K.N << ", " << K.component_count << " points): ";
  for (const auto& r : pq.rows) d << fmt("%.4f", r.sup) << (r.n < 8 ? " " : "");
  d << ", worst step ratio " << fmt("%.3f", pq.worst_step_ratio) << " <= 1.1";
  return {ok, d.str()};
}

Outcome accumulation() {
  std::ostringstream d;
  const auto lin = Germ::linear(golden().value(), 0.1);
  const auto KL = hedgehog_approx(lin, 1000, 257);
  double min_cov = 1;
  for (double rho : {0.03, 0.06, 0.09}) {
    const auto targets = circle_samples(rho, 4096);
    const std::vector<cplx> seeds = {std::polar(rho, 0.4), std::polar(rho, 2.9)};
    const auto rep = accumulation_scan(lin, KL, seeds, 1000000, 2 * KL.h, 2 * KL.h, &targets);
    min_cov = std::min(min_cov, rep.min_coverage);
  }
  bool ok = min_cov >= 0.99;
  d << "linear N=1e6: min coverage " << fmt("%.4f", min_cov) << " >= 0.99";
  const auto f = Germ::quadratic(golden().value(), 0.1);
  const auto& K = quad_K();
  std::vector<cplx> seeds;
  for (std::size_t k = 0; k < K.boundary.size() && seeds.size() < 8; k += std::max<std::size_t>(1, K.boundary.size() / 8)) {
    const cplx b = K.boundary[k];
    const cplx s = b * (1 + 1.5 * K.h / std::abs(b));
    if (!K.in_component(s) && std::abs(s) <= 0.1) seeds.push_back(s);
  }
  const auto a = accumulation_scan(f, K, seeds, 250000, 2 * K.h, 4 * K.h);
  const auto b = accumulation_scan(f, K, seeds, 1000000, 2 * K.h, 4 * K.h);
  bool mono = b.min_coverage >= a.min_coverage;
  for (std::size_t i = 0; i < seeds.size(); ++i) mono = mono && b.seeds[i].coverage >= a.seeds[i].coverage;
  ok = ok && mono && a.tracked > 0;
  d << "; quadratic " << seeds.size() << " seeds (" << a.tracked << " tracked): min coverage "
    << fmt("%.4f", a.min_coverage) << " at N=2.5e5 -> " << fmt("%.4f", b.min_coverage) << " at N=1e6"
    << (mono ? " (monotone)" : " (NOT monotone)");
  return {ok, d.str()};
}

Outcome probe_no_suspects() {
  // Half the seeds fill the annulus, half hug the inner circle so that
  // entries actually happen.
  std::ostringstream d;
  bool ok = true;
  const std::vector<std::pair<std::string, double>> alphas = {
      {"golden", golden().value()}, {"Liouville exp-growth:1", RotationNumber::exp_growth(1.0).value()}};
  for (const auto& [name, a] : alphas) {
    const auto f = Germ::quadratic(a, 0.1);
    auto seeds = annulus_seeds(500, 0.01, 0.1, 2024);
    const auto near = annulus_seeds(500, 0.01, 0.0105, 2025);
    seeds.insert(seeds.end(), near.begin(), near.end());
    const auto rep = convergence_probe(f, seeds, 1000000);
    ok = ok && rep.suspects.empty() && rep.entries > 0;
    d << (d.tellp() ? "; " : "") << name << ": " << rep.suspects.size() << " suspects (" << rep.entries
      << " entries, " << rep.exits << " exits, " << rep.late << " late, " << rep.escapes << " escapes)";
  }
  return {ok, "1000 seeds, N=1e6, both directions. " + d.str()};
}

// ------------------------------------------------------------------ 10, 11

Outcome holonomy_dictionary() {
  std::ostringstream d;
  const double ga = golden().value();
  const cplx m14 = holonomy_multiplier(FoliationGerm::linear(0.25), 1e-13);
  const cplx mg = holonomy_multiplier(FoliationGerm::linear(ga), 1e-12);
  const cplx lam = std::polar(1.0, 2 * std::numbers::pi * ga);
  const double e14 = std::abs(m14 - cplx(0, 1)), eg = std::abs(mg - lam);
  const FoliationGerm F(ga, {{1, 1, 0.1}}, {}, 0.05, 0.05);
  const auto est = estimate_multiplier(F, 1e-12);
  const auto est4 = estimate_multiplier(F, 1e-12, est.h / 4);
  const double ep = std::abs(est.value - lam), ep4 = std::abs(est4.value - lam);
  const cplx y0 = 0.005;
  const cplx y1 = holonomy_map(F, y0, 1e-12);
  const double rt = std::abs(transport(F, y1, 1e-12, 1.0, 0.0) - y0);
  const bool ok = e14 <= 1e-12 && eg <= 1e-10 && ep <= 1e-6 && std::abs(ep4 - ep) <= 1e-6 && rt <= 1e-9;
  d << "alpha=1/4: |m - i| = " << fmt("%.2g", e14) << "; golden: " << fmt("%.2g", eg)
    << "; e11=0.1, x0=0.05: " << fmt("%.2g", ep) << " (h/4: " << fmt("%.2g", ep4) << "); reversal "
    << fmt("%.2g", rt);
  return {ok, d.str()};
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / ("dylab-accept-" + std::to_string(::getpid()));
  fs::remove_all(base);
  const fs::path r1 = base / "a", r2 = base / "b";
  const std::string tr = "translation:0.6180339887498949";
  fs::create_directories(base);
  const fs::path sub = base / "cf.json";
  std::ofstream(sub) << json{{"kind", "cf"}, {"params", {{"count", 12}}}}.dump();
  const std::vector<json> configs = {
      {{"kind", "cf"}},
      {{"kind", "circle"}, {"params", {{"map", tr}, {"tune", false}, {"level", 5}}}},
      {{"kind", "dy-verify"}, {"params", {{"level", 6}, {"samples", 10}}}},
      {{"kind", "qicurve"}, {"params", {{"map", tr}, {"tune", false}, {"level", 6}}}},
      {{"kind", "hedgehog"}},
      {{"kind", "recur"}, {"params", {{"max_points", 2000}}}},
      {{"kind", "probe"}, {"seed", 3}, {"params", {{"seeds", 50}, {"N", 20000}}}},
      {{"kind", "holonomy"}, {"params", {{"perturb", "P:1:1:0.1"}}}},
      {{"kind", "suite"}, {"params", {{"configs", {sub.string()}}}}}};
  std::size_t files = 0, diffs = 0;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  for (const auto& raw : configs) {
    const auto a = run(validate_config(raw), r1);
    // Replay from the stored config file.
    const auto b = run(validate_config(read_json_file(a.dir / "config.json")), r2);
    if (a.artifacts != b.artifacts) ++diffs;
    for (const auto& f : a.artifacts) {
      if (f == "manifest.json") continue;
      ++files;
      if (slurp(a.dir / f) != slurp(b.dir / f)) ++diffs;
    }
  }
  fs::remove_all(base);
  return {diffs == 0 && files > 0, std::to_string(configs.size()) + " configs replayed, " + std::to_string(files) +
                                       " artifacts compared, " + std::to_string(diffs) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"continued fractions", continued_fractions},
      {"Brjuno sums", brjuno_sums},
      {"Denjoy-Yoccoz band estimate", denjoy_yoccoz},
      {"hyperbolic Denjoy-Yoccoz", hyperbolic_dy},
      {"quasi-invariant curves", quasi_invariant_curves},
      {"osculating cover", osculating_cover},
      {"hedgehog recurrence", hedgehog_recurrence},
      {"accumulation", accumulation},
      {"convergence probe", probe_no_suspects},
      {"holonomy dictionary", holonomy_dictionary},
      {"determinism", determinism}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}
