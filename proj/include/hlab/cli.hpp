#pragma once

// Run configurations (JSON), command dispatch and report emission. Every
// command returns a report with sorted keys and an exit code:
// 0 success, 2 invalid input, 3 mathematical precondition violated,
// 4 a verification ran but missed its tolerance.

#include <hlab/error.hpp>
#include <hlab/flows.hpp>
#include <hlab/geometry.hpp>
#include <hlab/helicity.hpp>
#include <hlab/linking.hpp>
#include <hlab/parallel.hpp>
#include <hlab/plugs.hpp>
#include <hlab/presets.hpp>
#include <hlab/surface.hpp>

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#ifndef HLAB_VERSION
#define HLAB_VERSION "unknown"
#endif

namespace hlab::cli {

using json = nlohmann::json;

inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 2;
inline constexpr int exit_precondition = 3;
inline constexpr int exit_tolerance = 4;

inline int exit_code_for(ErrorClass c) {
  switch (c) {
    case ErrorClass::validation: return exit_validation;
    case ErrorClass::precondition: return exit_precondition;
    case ErrorClass::tolerance: return exit_tolerance;
  }
  return exit_validation;
}

/// Acceptance tolerances of the verify commands (the numerical tolerances
/// of the library itself live in hlab::Tolerances).
struct VerifyTolerances {
  double gg_relative = 1e-2;     // |H(W#P) - H(W) - Cal| / |Cal|
  double flux_change = 1e-10;    // per period under plug insertion
  double inverse_plug = 1e-6;    // max-norm restoration error of P then its inverse
  double massflow = 1e-6;        // |mass flow / T - flux pairing|
  double linking_relative = 0.1; // |estimate / oracle - 1|
  double linking_sigmas = 3.0;   // |estimate - oracle| in reported standard errors
};

struct FlowConfig {
  double duration = 1.0;
  double step = 1e-2;
  std::optional<IVec3> winding;
};

struct LinkingConfig {
  Solenoid solenoid;
  LinkingParams params;
  int biot_savart_cells = 16;
};

struct SweepConfig {
  std::string command;
  std::vector<int> grids;
  std::vector<int> pairs;
  std::vector<double> durations;
};

/// Parsed, validated run configuration. `raw` keeps the document (with
/// command-line overrides applied) for echoing into reports.
struct RunConfig {
  json raw;
  std::vector<FieldSpec> field;
  std::optional<IMat3> pullback;
  std::optional<int> grid;
  std::vector<Plug> plugs;
  std::optional<TimeDependentHamiltonian> hamiltonian;
  FlowConfig flow;
  std::optional<LinkingConfig> linking;
  std::optional<SweepConfig> sweep;
  Tolerances tolerances;
  VerifyTolerances verify;
  std::optional<std::string> output;
};

// ---------------------------------------------------------------------------
// Parsing helpers

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
  if (!j.is_object()) throw ValidationError(ctx + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ValidationError("unknown key '" + it.key() + "' in " + ctx);
}

inline const json& require(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw ValidationError(std::string("missing key '") + key + "' in " + ctx);
  return j.at(key);
}

inline double number(const json& v, const std::string& ctx) {
  if (!v.is_number()) throw ValidationError(ctx + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(ctx + " must be finite");
  return d;
}

inline double number_or(const json& j, const char* key, double fallback, const std::string& ctx) {
  return j.contains(key) ? number(j.at(key), ctx + "." + key) : fallback;
}

inline long long integer(const json& v, const std::string& ctx) {
  if (!v.is_number_integer()) throw ValidationError(ctx + " must be an integer");
  return v.get<long long>();
}

inline std::vector<double> numbers(const json& v, std::size_t count, const std::string& ctx) {
  if (!v.is_array() || v.size() != count)
    throw ValidationError(ctx + " must be an array of " + std::to_string(count) + " numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(number(v[i], ctx + "[" + std::to_string(i) + "]"));
  return out;
}

inline Vec2 vec2(const json& v, const std::string& ctx) {
  const auto n = numbers(v, 2, ctx);
  return {n[0], n[1]};
}

inline IVec3 ivec3(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.size() != 3) throw ValidationError(ctx + " must be an array of 3 integers");
  IVec3 out{};
  for (int i = 0; i < 3; ++i) {
    const long long x = integer(v[i], ctx + "[" + std::to_string(i) + "]");
    if (std::abs(x) > 1'000'000) throw ValidationError(ctx + " entries are out of range");
    out[i] = int(x);
  }
  return out;
}

inline int axis(const json& v, const std::string& ctx) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z") return 2;
  }
  throw ValidationError(ctx + " must be one of \"x\", \"y\", \"z\"");
}

inline std::string text(const json& v, const std::string& ctx) {
  if (!v.is_string()) throw ValidationError(ctx + " must be a string");
  return v.get<std::string>();
}

inline FieldSpec field_spec(const json& j, const std::string& ctx) {
  const std::string kind = text(require(j, "kind", ctx), ctx + ".kind");
  if (kind == "abc") {
    check_keys(j, {"kind", "A", "B", "C"}, ctx);
    return AbcSpec{number_or(j, "A", 1.0, ctx), number_or(j, "B", 1.0, ctx), number_or(j, "C", 1.0, ctx)};
  }
  if (kind == "fourier") {
    check_keys(j, {"kind", "modes"}, ctx);
    const json& modes = require(j, "modes", ctx);
    if (!modes.is_array()) throw ValidationError(ctx + ".modes must be an array");
    FourierSpec f;
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const std::string mctx = ctx + ".modes[" + std::to_string(i) + "]";
      check_keys(modes[i], {"k", "component", "cos", "sin"}, mctx);
      FourierMode m;
      m.k = ivec3(require(modes[i], "k", mctx), mctx + ".k");
      const long long c = integer(require(modes[i], "component", mctx), mctx + ".component");
      if (c < 1 || c > 3) throw ValidationError(mctx + ".component must be 1, 2 or 3");
      m.component = int(c) - 1;
      m.cos_amp = number_or(modes[i], "cos", 0.0, mctx);
      m.sin_amp = number_or(modes[i], "sin", 0.0, mctx);
      f.modes.push_back(m);
    }
    return f;
  }
  if (kind == "zero") {
    check_keys(j, {"kind"}, ctx);
    return ZeroSpec{};
  }
  if (kind == "constant") {
    check_keys(j, {"kind", "value"}, ctx);
    const auto v = numbers(require(j, "value", ctx), 3, ctx + ".value");
    return ConstantSpec{{v[0], v[1], v[2]}};
  }
  if (kind == "suspension") {
    check_keys(j, {"kind", "axis", "patches"}, ctx);
    SuspensionSpec s;
    s.axis = axis(require(j, "axis", ctx), ctx + ".axis");
    const json& patches = require(j, "patches", ctx);
    if (!patches.is_array() || patches.empty()) throw ValidationError(ctx + ".patches must be a non-empty array");
    for (std::size_t i = 0; i < patches.size(); ++i) {
      const std::string pctx = ctx + ".patches[" + std::to_string(i) + "]";
      check_keys(patches[i], {"center", "inner_radius", "outer_radius"}, pctx);
      s.patches.push_back({vec2(require(patches[i], "center", pctx), pctx + ".center"),
                           number(require(patches[i], "inner_radius", pctx), pctx + ".inner_radius"),
                           number(require(patches[i], "outer_radius", pctx), pctx + ".outer_radius")});
    }
    return s;
  }
  throw ValidationError(ctx + ".kind must be one of abc, fourier, zero, constant, suspension (got '" + kind + "')");
}

inline SurfaceDomain domain(const json& j, const std::string& ctx) {
  const std::string shape = j.contains("shape") ? text(j.at("shape"), ctx + ".shape") : "disc";
  if (shape == "disc") {
    check_keys(j, {"shape", "center", "radius"}, ctx);
    return SurfaceDomain::disc(vec2(require(j, "center", ctx), ctx + ".center"),
                               number(require(j, "radius", ctx), ctx + ".radius"));
  }
  if (shape == "square") {
    check_keys(j, {"shape", "center", "half_side"}, ctx);
    return SurfaceDomain::square(vec2(require(j, "center", ctx), ctx + ".center"),
                                 number(require(j, "half_side", ctx), ctx + ".half_side"));
  }
  throw ValidationError(ctx + ".shape must be \"disc\" or \"square\"");
}

inline HamiltonianTerm hamiltonian_term(const json& j, const std::string& ctx) {
  check_keys(j, {"shape", "center", "radius", "amplitude", "temporal_integral", "time_window"}, ctx);
  HamiltonianTerm t;
  const std::string shape = j.contains("shape") ? text(j.at("shape"), ctx + ".shape") : "smooth";
  if (shape == "smooth")
    t.bump.shape = RadialBump::Shape::smooth;
  else if (shape == "polynomial")
    t.bump.shape = RadialBump::Shape::polynomial;
  else
    throw ValidationError(ctx + ".shape must be \"smooth\" or \"polynomial\"");
  t.bump.center = vec2(require(j, "center", ctx), ctx + ".center");
  t.bump.radius = number(require(j, "radius", ctx), ctx + ".radius");
  t.bump.amplitude = number_or(j, "amplitude", 1.0, ctx);
  t.time.integral = number_or(j, "temporal_integral", 1.0, ctx);
  if (j.contains("time_window")) {
    const auto w = numbers(j.at("time_window"), 2, ctx + ".time_window");
    t.time.start = w[0];
    t.time.end = w[1];
  }
  if (!(t.bump.radius > 0.0)) throw ValidationError(ctx + ".radius must be positive");
  t.time.validate();
  return t;
}

/// Either {"terms": [...]} or a single term object.
inline std::vector<HamiltonianTerm> hamiltonian_terms(const json& j, const std::string& ctx) {
  std::vector<HamiltonianTerm> out;
  if (j.contains("terms")) {
    const json& terms = j.at("terms");
    if (!terms.is_array()) throw ValidationError(ctx + ".terms must be an array");
    for (std::size_t i = 0; i < terms.size(); ++i)
      out.push_back(hamiltonian_term(terms[i], ctx + ".terms[" + std::to_string(i) + "]"));
  } else {
    out.push_back(hamiltonian_term(j, ctx));
  }
  return out;
}

inline Plug plug(const json& j, const std::string& ctx) {
  check_keys(j, {"axis", "window", "patch", "hamiltonian"}, ctx);
  Plug p;
  p.axis = axis(require(j, "axis", ctx), ctx + ".axis");
  const auto w = numbers(require(j, "window", ctx), 2, ctx + ".window");
  p.window_lo = w[0];
  p.window_hi = w[1];
  p.patch = domain(require(j, "patch", ctx), ctx + ".patch");
  p.hamiltonian.domain = p.patch;
  p.chart.domain = p.patch;
  if (j.contains("hamiltonian")) {
    const json& h = j.at("hamiltonian");
    if (h.is_object() && h.contains("terms")) check_keys(h, {"terms"}, ctx + ".hamiltonian");
    p.hamiltonian.terms = hamiltonian_terms(h, ctx + ".hamiltonian");
  }
  return p;
}

inline TimeDependentHamiltonian top_hamiltonian(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ValidationError(ctx + " must be an object");
  TimeDependentHamiltonian h;
  h.domain = domain(require(j, "domain", ctx), ctx + ".domain");
  json rest = j;
  rest.erase("domain");
  if (rest.contains("terms")) check_keys(rest, {"terms"}, ctx);
  h.terms = hamiltonian_terms(rest, ctx);
  h.validate();
  return h;
}

inline Solenoid solenoid(const json& j, const std::string& ctx) {
  check_keys(j, {"major_radius", "minor_radius", "toroidal", "poloidal", "profile_power", "mirror"}, ctx);
  Solenoid s;
  s.major_radius = number_or(j, "major_radius", s.major_radius, ctx);
  s.minor_radius = number_or(j, "minor_radius", s.minor_radius, ctx);
  s.toroidal = number_or(j, "toroidal", s.toroidal, ctx);
  s.poloidal = number_or(j, "poloidal", s.poloidal, ctx);
  if (j.contains("profile_power")) s.profile_power = int(integer(j.at("profile_power"), ctx + ".profile_power"));
  if (j.contains("mirror")) {
    if (!j.at("mirror").is_boolean()) throw ValidationError(ctx + ".mirror must be a boolean");
    s.mirror = j.at("mirror").get<bool>();
  }
  s.validate();
  return s;
}

inline void positive(double v, const std::string& ctx) {
  if (!(v > 0.0)) throw ValidationError(ctx + " must be positive");
}

}  // namespace detail

/// Schema validation; throws ValidationError naming the offending key.
inline RunConfig parse_config(const json& doc) {
  using namespace detail;
  check_keys(doc, {"field", "pullback", "grid", "plugs", "hamiltonian", "flow", "linking", "sweep", "tolerances",
                   "output"},
             "config");
  RunConfig c;
  c.raw = doc;
  if (doc.contains("field")) {
    const json& f = doc.at("field");
    if (f.is_array()) {
      if (f.empty()) throw ValidationError("config.field must not be an empty array");
      for (std::size_t i = 0; i < f.size(); ++i) c.field.push_back(field_spec(f[i], "field[" + std::to_string(i) + "]"));
    } else {
      c.field.push_back(field_spec(f, "field"));
    }
  }
  if (doc.contains("pullback")) {
    const json& m = doc.at("pullback");
    if (!m.is_array() || m.size() != 3) throw ValidationError("pullback must be a 3x3 integer matrix");
    IMat3 mat{};
    for (int r = 0; r < 3; ++r) mat[r] = ivec3(m[r], "pullback[" + std::to_string(r) + "]");
    if (determinant(mat) != 1) throw ValidationError("pullback matrix must have determinant 1 (SL(3,Z))");
    c.pullback = mat;
  }
  if (doc.contains("grid")) {
    const long long n = integer(doc.at("grid"), "grid");
    if (n > 1024) throw ValidationError("grid resolution above 1024 is not supported");
    const GridSpec check{int(n)};  // throws on non-power-of-two / too small
    c.grid = int(n);
  }
  if (doc.contains("plugs")) {
    const json& p = doc.at("plugs");
    if (!p.is_array()) throw ValidationError("plugs must be an array");
    for (std::size_t i = 0; i < p.size(); ++i) c.plugs.push_back(plug(p[i], "plugs[" + std::to_string(i) + "]"));
  }
  if (doc.contains("hamiltonian")) c.hamiltonian = top_hamiltonian(doc.at("hamiltonian"), "hamiltonian");
  if (doc.contains("flow")) {
    const json& f = doc.at("flow");
    check_keys(f, {"T", "step", "winding"}, "flow");
    c.flow.duration = number_or(f, "T", c.flow.duration, "flow");
    c.flow.step = number_or(f, "step", c.flow.step, "flow");
    positive(c.flow.step, "flow.step");
    if (f.contains("winding")) c.flow.winding = ivec3(f.at("winding"), "flow.winding");
  }
  if (doc.contains("linking")) {
    const json& l = doc.at("linking");
    check_keys(l, {"T", "pairs", "seed", "step", "closure_bound", "solenoid", "biot_savart_cells"}, "linking");
    LinkingConfig lc;
    lc.params.duration = number_or(l, "T", lc.params.duration, "linking");
    positive(lc.params.duration, "linking.T");
    if (l.contains("pairs")) {
      const long long p = integer(l.at("pairs"), "linking.pairs");
      if (p < 2) throw ValidationError("linking.pairs must be at least 2");
      lc.params.pairs = int(p);
    }
    if (l.contains("seed")) {
      const long long s = integer(l.at("seed"), "linking.seed");
      if (s < 0) throw ValidationError("linking.seed must be non-negative");
      lc.params.seed = std::uint64_t(s);
    }
    lc.params.step = number_or(l, "step", lc.params.step, "linking");
    positive(lc.params.step, "linking.step");
    lc.params.closure_bound = number_or(l, "closure_bound", lc.params.closure_bound, "linking");
    positive(lc.params.closure_bound, "linking.closure_bound");
    if (l.contains("solenoid")) lc.solenoid = solenoid(l.at("solenoid"), "linking.solenoid");
    if (l.contains("biot_savart_cells")) {
      lc.biot_savart_cells = int(integer(l.at("biot_savart_cells"), "linking.biot_savart_cells"));
      if (lc.biot_savart_cells < 8) throw ValidationError("linking.biot_savart_cells must be at least 8");
    }
    c.linking = lc;
  }
  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    check_keys(s, {"command", "grids", "pairs", "durations"}, "sweep");
    SweepConfig sc;
    sc.command = text(require(s, "command", "sweep"), "sweep.command");
    if (sc.command != "gg-verify" && sc.command != "link-estimate" && sc.command != "massflow-verify")
      throw ValidationError("sweep.command must be gg-verify, link-estimate or massflow-verify");
    auto int_list = [&](const char* key, std::vector<int>& out) {
      if (!s.contains(key)) return;
      if (!s.at(key).is_array()) throw ValidationError(std::string("sweep.") + key + " must be an array");
      for (const auto& v : s.at(key)) out.push_back(int(integer(v, std::string("sweep.") + key)));
    };
    int_list("grids", sc.grids);
    int_list("pairs", sc.pairs);
    for (int g : sc.grids) GridSpec check(g);
    for (int p : sc.pairs)
      if (p < 2) throw ValidationError("sweep.pairs entries must be at least 2");
    if (s.contains("durations")) {
      if (!s.at("durations").is_array()) throw ValidationError("sweep.durations must be an array");
      for (const auto& v : s.at("durations")) sc.durations.push_back(number(v, "sweep.durations"));
    }
    c.sweep = sc;
  }
  if (doc.contains("tolerances")) {
    const json& t = doc.at("tolerances");
    check_keys(t, {"divergence", "exactness", "gg_relative", "flux_change", "inverse_plug", "massflow",
                   "linking_relative", "linking_sigmas"},
               "tolerances");
    auto tol = [&](const char* key, double& dst) {
      if (!t.contains(key)) return;
      dst = number(t.at(key), std::string("tolerances.") + key);
      positive(dst, std::string("tolerances.") + key);
    };
    tol("divergence", c.tolerances.divergence);
    tol("exactness", c.tolerances.exactness);
    tol("gg_relative", c.verify.gg_relative);
    tol("flux_change", c.verify.flux_change);
    tol("inverse_plug", c.verify.inverse_plug);
    tol("massflow", c.verify.massflow);
    tol("linking_relative", c.verify.linking_relative);
    tol("linking_sigmas", c.verify.linking_sigmas);
  }
  if (doc.contains("output")) c.output = text(doc.at("output"), "output");
  return c;
}

inline json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
}

inline json load_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_document(ss.str());
}

/// Command-line overrides are written into the document so that the
/// echoed inputs replay the run exactly.
struct Overrides {
  std::optional<int> grid;
  std::optional<std::uint64_t> seed;
};

inline json apply_overrides(json doc, const Overrides& o) {
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  if (o.grid) doc["grid"] = *o.grid;
  if (o.seed) {
    if (!doc.contains("linking")) doc["linking"] = json::object();
    doc["linking"]["seed"] = *o.seed;
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Commands

struct RunResult {
  json report;
  int exit_code = exit_ok;
  std::string csv;  // sweep only
};

namespace detail {

inline json to_json(const FluxClass& f) { return json::array({f.periods[0], f.periods[1], f.periods[2]}); }

inline json tolerances_json(const RunConfig& c) {
  return {{"divergence", c.tolerances.divergence},     {"exactness", c.tolerances.exactness},
          {"gg_relative", c.verify.gg_relative},       {"flux_change", c.verify.flux_change},
          {"inverse_plug", c.verify.inverse_plug},     {"massflow", c.verify.massflow},
          {"linking_relative", c.verify.linking_relative}, {"linking_sigmas", c.verify.linking_sigmas}};
}

inline GridSpec grid_of(const RunConfig& c) {
  if (!c.grid) throw ValidationError("this command needs 'grid' (config key or --grid)");
  return GridSpec(*c.grid);
}

inline VectorField3 field_of(const RunConfig& c, const GridSpec& g) {
  if (c.field.empty()) throw ValidationError("this command needs 'field'");
  if (c.pullback) {
    FourierSpec all;
    for (const auto& f : c.field) {
      const FourierSpec p = pullback(f, *c.pullback);
      all.modes.insert(all.modes.end(), p.modes.begin(), p.modes.end());
    }
    return materialize(FieldSpec{all}, g);
  }
  VectorField3 w = materialize(c.field[0], g);
  for (std::size_t i = 1; i < c.field.size(); ++i) w = sum(w, materialize(c.field[i], g));
  return w;
}

inline const LinkingConfig& linking_of(const RunConfig& c) {
  if (!c.linking) throw ValidationError("this command needs 'linking'");
  return *c.linking;
}

inline json gg_json(const GgReport& r) {
  return {{"grid", r.grid},
          {"helicity_before", r.helicity_before},
          {"helicity_after", r.helicity_after},
          {"calabi", r.calabi},
          {"residual", r.residual},
          {"relative_residual", r.relative_residual},
          {"flux_before", to_json(r.flux_before)},
          {"flux_after", to_json(r.flux_after)},
          {"max_flux_change", r.max_flux_change},
          {"spectral_divergence_ratio", r.divergence_ratio},
          {"outer_band_energy_fraction", r.outer_band_fraction}};
}

inline json run_helicity(const RunConfig& c, json& residuals) {
  const GridSpec g = grid_of(c);
  const VectorField3 w = field_of(c, g);
  json r;
  r["flux"] = to_json(flux(w, c.tolerances));
  r["helicity"] = helicity(w, c.tolerances);
  r["grid"] = g.n();
  if (!c.plugs.empty()) {
    const C0Presentation p{w, c.plugs};
    double cal = 0.0;
    for (const auto& plug : c.plugs) cal += calabi_of_plug(plug);
    r["plug_calabi"] = cal;
    r["extended_helicity"] = extended_helicity(p, c.tolerances);
    r["surgery_field_helicity"] = helicity(materialize(p), c.tolerances);
    residuals["surgery_minus_extended"] = r["surgery_field_helicity"].get<double>() - r["extended_helicity"].get<double>();
  }
  return r;
}

inline json run_flux(const RunConfig& c, json& residuals) {
  const GridSpec g = grid_of(c);
  const VectorField3 w = field_of(c, g);
  json r;
  r["grid"] = g.n();
  r["flux"] = to_json(flux(w, c.tolerances));
  r["slice_periods"] = json::array();
  for (int axis = 0; axis < 3; ++axis)
    r["slice_periods"].push_back(json::array({slice_period(w, axis, 0), slice_period(w, axis, g.n() / 2)}));
  if (!c.plugs.empty()) {
    const C0Presentation p{w, c.plugs};
    const FluxClass ext = extended_flux(p, c.tolerances);
    const FluxClass surg = flux(materialize(p), c.tolerances);
    r["extended_flux"] = to_json(ext);
    r["surgery_field_flux"] = to_json(surg);
    double d = 0.0;
    for (int i = 0; i < 3; ++i) d = std::max(d, std::abs(ext.periods[i] - surg.periods[i]));
    residuals["max_flux_change"] = d;
  }
  return r;
}

inline json run_calabi(const RunConfig& c, json& residuals) {
  if (!c.hamiltonian) throw ValidationError("calabi needs 'hamiltonian'");
  json r;
  r["calabi"] = calabi(*c.hamiltonian);
  r["calabi_quadrature"] = calabi_quadrature(*c.hamiltonian);
  residuals["quadrature_minus_closed_form"] = r["calabi_quadrature"].get<double>() - r["calabi"].get<double>();
  return r;
}

inline json run_plug_insert(const RunConfig& c, json& residuals, int& exit_code) {
  const GridSpec g = grid_of(c);
  if (c.plugs.empty()) throw ValidationError("plug-insert needs at least one entry in 'plugs'");
  const VectorField3 w = field_of(c, g);
  const C0Presentation p{w, c.plugs};
  const VectorField3 out = materialize(p);
  json r;
  r["grid"] = g.n();
  r["plug_calabi"] = json::array();
  for (const auto& plug : c.plugs) r["plug_calabi"].push_back(calabi_of_plug(plug));
  std::size_t modified = 0;
  for (std::size_t i = 0; i < g.node_count(); ++i)
    if (!(out.at(i) == w.at(i))) ++modified;
  r["modified_nodes"] = modified;
  r["max_field_change"] = max_difference(out, w);
  const FluxClass before = flux(w, c.tolerances), after = flux(out, c.tolerances);
  r["flux_before"] = to_json(before);
  r["flux_after"] = to_json(after);
  double dflux = 0.0;
  for (int i = 0; i < 3; ++i) dflux = std::max(dflux, std::abs(after.periods[i] - before.periods[i]));
  residuals["max_flux_change"] = dflux;
  r["spectral_divergence_ratio"] = divergence_ratio(out);
  r["outer_band_energy_fraction"] = outer_band_energy_fraction(out);

  // Undo the plugs in reverse order with their inverse plugs.
  std::vector<VectorField3> stages{w};
  for (const auto& plug : c.plugs) stages.push_back(insert_plug(stages.back(), plug));
  VectorField3 undone = stages.back();
  for (std::size_t i = c.plugs.size(); i-- > 0;) undone = insert_plug(undone, inverse_plug(c.plugs[i], stages[i]));
  residuals["inverse_plug_restoration"] = max_difference(undone, w);

  // Exit map of the first plug at a few entry points against its time-1 map.
  const Plug& first = c.plugs.front();
  const TimeDependentHamiltonian total = combined(first.chart, first.hamiltonian);
  double exit_err = 0.0;
  const double reach = 0.5 * first.patch.size;
  for (int k = 0; k < 8; ++k) {
    const Vec2 entry = first.patch.center + Vec2{reach * std::cos(0.7 * k) * (k + 1) / 8.0,
                                                 reach * std::sin(0.7 * k) * (k + 1) / 8.0};
    exit_err = std::max(exit_err, norm(trace_exit_map(first, entry) - integrate_isotopy(total, entry, 1.0)));
  }
  residuals["exit_map_vs_time_one_map"] = exit_err;

  if (dflux > c.verify.flux_change || residuals["inverse_plug_restoration"].get<double>() > c.verify.inverse_plug)
    exit_code = exit_tolerance;
  return r;
}

inline json run_gg(const RunConfig& c, json& residuals, int& exit_code) {
  const GridSpec g = grid_of(c);
  const VectorField3 w = field_of(c, g);
  const GgReport rep = gg_verify(C0Presentation{w, c.plugs}, c.tolerances);
  residuals["gg_residual"] = rep.residual;
  residuals["gg_relative_residual"] = rep.relative_residual;
  residuals["max_flux_change"] = rep.max_flux_change;
  if (rep.relative_residual > c.verify.gg_relative || rep.max_flux_change > c.verify.flux_change)
    exit_code = exit_tolerance;
  return gg_json(rep);
}

inline json run_massflow(const RunConfig& c, json& residuals, int& exit_code) {
  const GridSpec g = grid_of(c);
  const CompatibleTriple tr(field_of(c, g), c.flow.step, c.tolerances);
  const MassFlowFluxReport rep = verify_massflow_flux(tr, c.flow.duration, c.tolerances);
  json r;
  r["grid"] = g.n();
  r["T"] = rep.duration;
  r["step"] = c.flow.step;
  r["flux"] = to_json(rep.flux);
  r["mass_flow_rate"] = json::array({rep.mass_flow_rate[0], rep.mass_flow_rate[1], rep.mass_flow_rate[2]});
  residuals["massflow_minus_flux"] = json::array({rep.residual[0], rep.residual[1], rep.residual[2]});
  residuals["max_residual"] = rep.max_residual;
  if (c.flow.winding) {
    const IVec3 m = *c.flow.winding;
    const MassFlowResult mf = mass_flow(tr, CircleMap{m, {}}, c.flow.duration);
    const double pairing = m[0] * rep.flux.periods[0] + m[1] * rep.flux.periods[1] + m[2] * rep.flux.periods[2];
    r["winding"] = json::array({m[0], m[1], m[2]});
    r["mass_flow"] = mf.value;
    r["flux_pairing"] = pairing;
    r["max_lift_increment"] = mf.max_increment;
    residuals["winding_residual"] = mf.value / c.flow.duration - pairing;
  }
  if (rep.max_residual > c.verify.massflow) exit_code = exit_tolerance;
  return r;
}

inline json run_link(const RunConfig& c, json& residuals, int& exit_code) {
  const LinkingConfig& lc = linking_of(c);
  const LinkingEstimate e = asymptotic_linking(lc.solenoid, lc.params);
  const double oracle = biot_savart_helicity(lc.solenoid, lc.biot_savart_cells);
  const double closed = solenoid_helicity_closed_form(lc.solenoid);
  json r;
  r["T"] = e.duration;
  r["pairs"] = e.pairs;
  r["seed"] = e.seed;
  r["step"] = lc.params.step;
  r["mean_linking_over_T2"] = e.mean;
  r["standard_error"] = e.standard_error;
  r["normalization_volume_squared"] = e.normalization;
  r["estimate"] = e.normalized_mean;
  r["estimate_standard_error"] = e.normalized_standard_error;
  r["resampled_pairs"] = e.resamples;
  r["biot_savart_helicity"] = oracle;
  r["closed_form_helicity"] = closed;
  const double diff = e.normalized_mean - oracle;
  const double scale = std::abs(oracle) + std::abs(closed);
  const bool zero_oracle = scale < 1e-9;
  r["ratio"] = zero_oracle ? json(nullptr) : json(e.normalized_mean / oracle);
  residuals["estimate_minus_oracle"] = diff;
  residuals["standard_errors_from_oracle"] =
      e.normalized_standard_error > 0.0 ? json(diff / e.normalized_standard_error) : json(nullptr);
  residuals["biot_savart_minus_closed_form"] = oracle - closed;
  const bool rel_ok = zero_oracle || std::abs(diff) <= c.verify.linking_relative * std::abs(oracle);
  const bool se_ok = std::abs(diff) <= c.verify.linking_sigmas * e.normalized_standard_error;
  if (!rel_ok || !se_ok) exit_code = exit_tolerance;
  return r;
}

inline std::string csv_number(double v) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace detail

/// Header plus one newline-terminated row per entry.
inline std::string format_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + detail::csv_number(row[i]);
    out += "\n";
  }
  return out;
}

/// Writes the CSV; unwritable paths are validation errors (exit 2).
inline void emit_csv(const std::string& path, const std::string& csv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write CSV output '" + path + "'");
  out << csv;
  if (!out) throw ValidationError("failed writing CSV output '" + path + "'");
}

namespace detail {

inline json run_sweep(const RunConfig& c, json& residuals, std::string& csv) {
  if (!c.sweep) throw ValidationError("sweep needs 'sweep'");
  const SweepConfig& s = *c.sweep;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  if (s.command == "gg-verify") {
    header = {"grid", "helicity_before", "helicity_after", "calabi", "residual", "relative_residual"};
    for (int n : s.grids) {
      RunConfig sub = c;
      sub.grid = n;
      const GgReport r = gg_verify(C0Presentation{field_of(sub, GridSpec(n)), c.plugs}, c.tolerances);
      rows.push_back({double(n), r.helicity_before, r.helicity_after, r.calabi, r.residual, r.relative_residual});
    }
  } else if (s.command == "link-estimate") {
    header = {"pairs", "T", "seed", "estimate", "standard_error", "oracle", "ratio"};
    const LinkingConfig& lc = linking_of(c);
    const double oracle = s.pairs.empty() ? 0.0 : biot_savart_helicity(lc.solenoid, lc.biot_savart_cells);
    for (int p : s.pairs) {
      LinkingParams prm = lc.params;
      prm.pairs = p;
      const LinkingEstimate e = asymptotic_linking(lc.solenoid, prm);
      rows.push_back({double(p), prm.duration, double(prm.seed), e.normalized_mean, e.normalized_standard_error, oracle,
                      e.normalized_mean / oracle});
    }
  } else {
    header = {"T", "flux_1", "flux_2", "flux_3", "rate_1", "rate_2", "rate_3", "max_residual"};
    if (!s.durations.empty()) {
      const GridSpec g = grid_of(c);
      const CompatibleTriple tr(field_of(c, g), c.flow.step, c.tolerances);
      for (double t : s.durations) {
        const MassFlowFluxReport r = verify_massflow_flux(tr, t, c.tolerances);
        rows.push_back({t, r.flux.periods[0], r.flux.periods[1], r.flux.periods[2], r.mass_flow_rate[0],
                        r.mass_flow_rate[1], r.mass_flow_rate[2], r.max_residual});
      }
    }
  }
  csv = format_csv(header, rows);
  json r;
  r["command"] = s.command;
  r["header"] = header;
  r["rows"] = rows;
  residuals = json::object();
  return r;
}

}  // namespace detail

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"helicity",        "flux",          "calabi", "plug-insert",
                                              "gg-verify",       "massflow-verify", "link-estimate", "sweep"};
  return names;
}

/// Runs a command on an already validated configuration. Library errors
/// propagate as hlab::Error; tolerance misses set exit code 4 in the result.
inline RunResult run(const std::string& command, const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  RunResult out;
  json residuals = json::object();
  json results;
  if (command == "helicity")
    results = detail::run_helicity(c, residuals);
  else if (command == "flux")
    results = detail::run_flux(c, residuals);
  else if (command == "calabi")
    results = detail::run_calabi(c, residuals);
  else if (command == "plug-insert")
    results = detail::run_plug_insert(c, residuals, out.exit_code);
  else if (command == "gg-verify")
    results = detail::run_gg(c, residuals, out.exit_code);
  else if (command == "massflow-verify")
    results = detail::run_massflow(c, residuals, out.exit_code);
  else if (command == "link-estimate")
    results = detail::run_link(c, residuals, out.exit_code);
  else if (command == "sweep")
    results = detail::run_sweep(c, residuals, out.csv);
  else
    throw ValidationError("unknown command '" + command + "'");
  out.report["command"] = command;
  out.report["inputs"] = c.raw;
  out.report["results"] = results;
  out.report["residuals"] = residuals;
  out.report["tolerances"] = detail::tolerances_json(c);
  out.report["status"] = out.exit_code == exit_ok ? "ok" : "tolerance_exceeded";
  out.report["version"] = HLAB_VERSION;
  out.report["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Report without fields that legitimately vary between identical runs.
inline json stable_part(json report) {
  report.erase("wall_clock_seconds");
  return report;
}

inline json error_report(const std::string& command, const std::string& message, int exit_code) {
  return {{"command", command}, {"error", message}, {"exit_code", exit_code}, {"version", HLAB_VERSION}};
}

}  // namespace hlab::cli
