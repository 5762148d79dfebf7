// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <hlab/flows.hpp>
#include <hlab/helicity.hpp>
#include <hlab/linking.hpp>
#include <hlab/plugs.hpp>
#include <hlab/presets.hpp>
#include <hlab/surface.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace hlab;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [miss]");
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

VectorField3 random_exact_field(std::mt19937_64& gen, const GridSpec& g) {
  std::uniform_int_distribution<int> k(-3, 3), comp(0, 2);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  FourierSpec f;
  for (int i = 0; i < 10; ++i) f.modes.push_back({{k(gen), k(gen), k(gen)}, comp(gen), amp(gen), amp(gen)});
  return curl(materialize(f, g));
}

VectorField3 suspension_base(int n) { return materialize(presets::reference_suspension(), GridSpec(n)); }

TimeDependentHamiltonian random_hamiltonian(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> c(-0.5, 0.5), rho(0.3, 1.0), a(-2.0, 2.0), integral(-1.5, 1.5);
  std::bernoulli_distribution smooth(0.5);
  TimeDependentHamiltonian h;
  h.domain = SurfaceDomain::disc({0, 0}, 2.0);
  const int terms = 1 + int(gen() % 3);
  for (int i = 0; i < terms; ++i)
    h.terms.push_back({RadialBump{smooth(gen) ? RadialBump::Shape::smooth : RadialBump::Shape::polynomial,
                                  {c(gen), c(gen)}, rho(gen), a(gen)},
                       TemporalProfile{0.1, 0.9, integral(gen)}});
  return h;
}

// ---------------------------------------------------------------------------

void abc_helicity(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const double h = helicity(materialize(AbcSpec{1, 1, 1}, GridSpec(32)));
  const double dt = seconds_since(t0);
  const double exact = 3.0 * std::pow(two_pi, 3);
  o.check(rel(h, exact) <= 1e-10, "rel err " + num(rel(h, exact)));
  o.check(dt < 2.0, "runtime " + num(dt) + " s");
}

void gauge_independence(Outcome& o) {
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  const GridSpec g(16);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const VectorField3 w = random_exact_field(gen, g);
    const double h = helicity(w);
    FourierSpec gauge;
    for (int i = 0; i < 4; ++i)
      gauge.modes.push_back({{int(gen() % 7) - 3, int(gen() % 7) - 3, int(gen() % 7) - 3}, 0, amp(gen), amp(gen)});
    const VectorField3 shifted = sum(sum(vector_potential(w), gradient(materialize(gauge, g).components[0])),
                                     materialize(ConstantSpec{{amp(gen), amp(gen), amp(gen)}}, g));
    worst = std::max(worst, std::abs(l2_pairing(shifted, w) - h) / std::max(1.0, std::abs(h)));
  }
  o.check(worst < 1e-8, "20 fields, worst rel diff " + num(worst));
}

void pullback_invariance(Outcome& o) {
  const GridSpec g(32);
  const FieldSpec abc = AbcSpec{1.0, 0.7, 0.3};
  const double h = helicity(materialize(abc, g));
  double worst = 0.0;
  for (const auto& m : presets::unimodular_matrices()) worst = std::max(worst, rel(helicity(materialize(pullback(abc, m), g)), h));
  o.check(worst <= 1e-10, "5 matrices, worst rel diff " + num(worst));
}

void gg_convergence(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> res;
  for (int n : {32, 64, 128}) res.push_back(gg_verify(suspension_base(n), presets::reference_plug()).relative_residual);
  const double dt = seconds_since(t0);
  o.check(res[1] < 1e-2, "64^3 " + num(res[1]));
  o.check(res[2] < 2e-3, "128^3 " + num(res[2]));
  o.check(res[0] > res[1] && res[1] > res[2], "decreasing from 32^3 " + num(res[0]));
  o.check(dt < 60.0, "runtime " + num(dt) + " s");
}

void flux_invariance(Outcome& o) {
  double worst = 0.0;
  for (int n : {32, 64}) {
    const VectorField3 w = suspension_base(n);
    const FluxClass before = flux(w), after = flux(insert_plug(w, presets::reference_plug()));
    for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(after.periods[i] - before.periods[i]));
  }
  o.check(worst <= 1e-10, "max period change " + num(worst));
}

void inverse_restoration(Outcome& o) {
  double worst = 0.0;
  for (auto shape : {RadialBump::Shape::smooth, RadialBump::Shape::polynomial}) {
    const VectorField3 w = suspension_base(32);
    const Plug p = presets::reference_plug(shape);
    worst = std::max(worst, max_difference(insert_plug(insert_plug(w, p), inverse_plug(p, w)), w));
  }
  o.check(worst <= 1e-6, "max-norm error " + num(worst));
}

void calabi_checks(Outcome& o) {
  double closed = 0.0;
  for (auto shape : {RadialBump::Shape::smooth, RadialBump::Shape::polynomial}) {
    TimeDependentHamiltonian h;
    h.domain = SurfaceDomain::disc({0, 0}, 2.0);
    h.terms.push_back({RadialBump{shape, {0.2, -0.1}, 0.8, 1.3}, TemporalProfile{0.1, 0.9, 1.0}});
    closed = std::max(closed, std::abs(calabi_quadrature(h) - calabi(h)));
  }
  o.check(closed <= 1e-10, "closed form vs quadrature " + num(closed));
  {
    // Polynomial bump with unit temporal integral: Cal = a pi rho^2 / 2.
    TimeDependentHamiltonian h;
    h.domain = SurfaceDomain::disc({0, 0}, 1.0);
    h.terms.push_back({RadialBump{RadialBump::Shape::polynomial, {0, 0}, 0.5, 1.0}, TemporalProfile{0.1, 0.9, 1.0}});
    const double want = pi * 0.25 / 2.0;
    const double err = std::max(std::abs(calabi(h) - want), std::abs(calabi_quadrature(h) - want));
    o.check(err <= 1e-10, "a pi rho^2 / 2 " + num(err));
  }

  std::mt19937_64 gen(99);
  double additivity = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto f = random_hamiltonian(gen), g = random_hamiltonian(gen);
    additivity = std::max(additivity, std::abs(calabi_quadrature(concatenate(f, g)) - calabi(f) - calabi(g)));
  }
  o.check(additivity <= 1e-8, "additivity over 10 pairs " + num(additivity));

  double natural = 0.0;
  for (int i = 0; i < 5; ++i) {
    const auto h = random_hamiltonian(gen);
    const RigidMotion2 m{0.37 * (i + 1), {0.5 * i - 1.0, 1.5 - 0.25 * i}};
    const auto moved = transformed(h, m);
    natural = std::max(natural, std::abs(calabi(moved) - calabi(h)));
    natural = std::max(natural, std::abs(calabi_quadrature(moved) - calabi(h)));
  }
  o.check(natural <= 1e-10, "rigid-motion naturality " + num(natural));
}

void mass_flow_checks(Outcome& o) {
  {
    const GridSpec g(8);
    const CompatibleTriple tr(materialize(ConstantSpec{{0, 0, 1}}, g), 1e-2);
    const double err = std::abs(mass_flow(tr, CircleMap::basis(2), 1.0).value - two_pi * two_pi);
    o.check(err < 1e-9, "translation " + num(err));
  }
  {
    const GridSpec g(16);
    const CompatibleTriple tr(materialize(presets::nonvanishing_abc(), g), 1e-2);
    const double err = verify_massflow_flux(tr, 1.0).max_residual;
    o.check(err < 1e-6, "abc(1,0.6,0.5) " + num(err));
  }
  {
    const GridSpec g(8);
    const auto w = sum(materialize(ConstantSpec{{0.2, 0.3, 1.0}}, g), materialize(AbcSpec{0.3, 0.2, 0.1}, g));
    const CompatibleTriple tr(w, 1e-2);
    std::vector<double> rates;
    for (double t : {0.5, 1.0, 2.0}) rates.push_back(mass_flow(tr, CircleMap{{1, 1, 1}, {}}, t).value / t);
    double spread = 0.0;
    for (double r : rates) spread = std::max(spread, std::abs(r - rates[1]) / std::max(1.0, std::abs(rates[1])));
    o.check(spread <= 1e-8, "T-homogeneity " + num(spread));
  }
}

void jacobians(Outcome& o) {
  std::mt19937_64 gen(5);
  const Plug p = presets::reference_plug();
  std::uniform_real_distribution<double> disc(-1.2, 1.2), torus(0.0, two_pi);
  double iso = 0.0;
  for (int i = 0; i < 100;) {
    const Vec2 q = p.patch.center + Vec2{disc(gen), disc(gen)};
    if (!p.patch.contains(q)) continue;
    iso = std::max(iso, std::abs(isotopy_jacobian(p.hamiltonian, q, 1.0) - 1.0));
    ++i;
  }
  o.check(iso <= 1e-6, "isotopy " + num(iso));
  const CompatibleTriple tr(materialize(presets::nonvanishing_abc(), GridSpec(16)), 1e-2);
  double fl = 0.0;
  for (int i = 0; i < 100; ++i) fl = std::max(fl, std::abs(flow_jacobian(tr, {torus(gen), torus(gen), torus(gen)}, 1.0) - 1.0));
  o.check(fl <= 1e-6, "flow " + num(fl));
}

void gauss_linking_checks(Outcome& o) {
  const auto a = ClosedCurve::circle({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1.0, 512);
  const auto hopf = ClosedCurve::circle({1, 0, 0}, {1, 0, 0}, {0, 0, -1}, 1.0, 512);
  const auto far = ClosedCurve::circle({0, 0, 10}, {1, 0, 0}, {0, 1, 0}, 1.0, 512);
  const double lk = gauss_linking(a, hopf), sep = gauss_linking(a, far);
  o.check(std::abs(lk - 1.0) <= 1e-3, "Hopf " + num(lk));
  o.check(std::abs(sep) <= 1e-4, "separated " + num(sep));
}

void asymptotic_linking_check(Outcome& o) {
  const Solenoid s = presets::reference_solenoid();
  set_thread_count(1);  // the runtime bound is for a single thread
  const auto t0 = std::chrono::steady_clock::now();
  LinkingParams prm;
  prm.duration = 100;
  prm.pairs = 100;
  prm.seed = 7;
  const LinkingEstimate e = asymptotic_linking(s, prm);
  const double dt = seconds_since(t0);
  set_thread_count(0);
  const double oracle = biot_savart_helicity(s);
  const double diff = std::abs(e.normalized_mean - oracle);
  o.check(diff <= 0.1 * std::abs(oracle), "estimate " + num(e.normalized_mean) + " vs " + num(oracle));
  o.check(diff <= 3.0 * e.normalized_standard_error, "SE " + num(e.normalized_standard_error));
  o.check(dt < 300.0, "single-thread runtime " + num(dt) + " s");
}

void determinism(Outcome& o) {
  auto compute = [] {
    std::vector<double> out;
    out.push_back(helicity(materialize(AbcSpec{1.0, 0.7, 0.3}, GridSpec(32))));
    out.push_back(gg_verify(suspension_base(32), presets::reference_plug()).helicity_after);
    const CompatibleTriple tr(materialize(presets::nonvanishing_abc(), GridSpec(8)), 1e-2);
    out.push_back(mass_flow(tr, CircleMap::basis(0), 0.7).value);
    LinkingParams prm;
    prm.duration = 20;
    prm.pairs = 6;
    prm.step = 0.1;
    out.push_back(asymptotic_linking(presets::reference_solenoid(), prm).normalized_mean);
    return out;
  };
  set_thread_count(1);
  const auto one = compute();
  set_thread_count(4);
  const auto four = compute();
  set_thread_count(0);
  double worst = 0.0;
  for (std::size_t i = 0; i < one.size(); ++i) worst = std::max(worst, std::abs(one[i] - four[i]) / std::max(1.0, std::abs(one[i])));
  o.check(worst <= 1e-12, "1 vs 4 threads, worst rel diff " + num(worst));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"abc-helicity", abc_helicity},
      {"gauge-independence", gauge_independence},
      {"unimodular-pullback-invariance", pullback_invariance},
      {"gg-convergence", gg_convergence},
      {"flux-invariance-under-plugs", flux_invariance},
      {"inverse-plug-restoration", inverse_restoration},
      {"calabi-closed-form-additivity-naturality", calabi_checks},
      {"mass-flow-flux-identity", mass_flow_checks},
      {"volume-preservation", jacobians},
      {"gauss-linking", gauss_linking_checks},
      {"asymptotic-linking-vs-helicity", asymptotic_linking_check},
      {"thread-count-determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << (o.detail.tellp() > 0 ? "; " : "") << "exception: " << e.what();
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first << ": " << o.detail.str()
              << " (" << num(seconds_since(t0)) << " s)" << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
