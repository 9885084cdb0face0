#pragma once

#include "confspec/io.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace confspec {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct Thresholds {
  double vanish = default_vanish_threshold;
  double present = default_present_threshold;
  double cometric_agree = 0.05;
  double cometric_differ = 0.1;
  double zero_tolerance_relative = ZeroTolerance::default_relative;
};

struct ProbeSettings {
  std::size_t site = 0;
  std::array<int, 2> direction{1, 0};
  int bump_band = -1;
  std::vector<int> schedule;
  bool sign_target = true;  // probe sign(D) rather than D
  int points = 8;
  int rays = 8;
};

struct DistanceSettings {
  std::size_t x = 0;
  std::size_t y = 1;
  int band = 1;
  DistanceConfig optimizer;
};

struct RecoverSettings {
  std::vector<std::size_t> sites;
  std::array<int, 2> direction{1, 0};
  std::vector<int> schedule;
};

struct ScenarioConfig {
  std::string kind;
  std::string demo_name;
  int n = 0;
  SpinStructure spin;
  std::vector<Metric> metrics;            // one, or a and b for detect
  std::optional<RealVector> phase;        // U = M_{e^{i w}} for detect
  Thresholds thresholds;
  ProbeSettings probe;
  DistanceSettings distance;
  RecoverSettings recover;
  bool dump_operator = false;
  Encoding encoding = Encoding::binary;
  std::uint64_t seed = 1;
  json echo;                // config as given, with the effective seed
  std::string input_blob;   // echo plus the content of referenced files
};

namespace detail {

inline void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw FormatError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw FormatError(where + "." + key + ": unknown field");
  }
}

template <class T>
T get_or(const json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  return get_field<T>(j, key, where);
}

inline std::array<int, 2> direction_from_json(const json& j, const std::string& where, int dim) {
  std::vector<int> d;
  if (j.is_number_integer())
    d = {j.get<int>()};
  else
    d = get_as<std::vector<int>>(j, where);
  if (d.size() != std::size_t(dim)) throw FormatError(where + ": expected " + std::to_string(dim) + " component(s)");
  std::array<int, 2> out{d[0], dim == 2 ? d[1] : 0};
  if (out[0] == 0 && out[1] == 0) throw FormatError(where + ": direction must be nonzero");
  return out;
}

inline std::size_t site_from_json(const json& j, const std::string& where, const Grid& grid) {
  std::size_t site = 0;
  if (j.is_array()) {
    const auto ij = get_as<std::vector<int>>(j, where);
    if (ij.size() != std::size_t(grid.dim)) throw FormatError(where + ": expected " + std::to_string(grid.dim) + " index(es)");
    for (int i : ij)
      if (i < 0 || i >= grid.n) throw FormatError(where + ": index outside [0, N)");
    site = grid.flatten(ij[0], grid.dim == 2 ? ij[1] : 0);
  } else {
    const long s = get_as<long>(j, where);
    if (s < 0 || std::size_t(s) >= grid.sites()) throw FormatError(where + ": site outside grid");
    site = std::size_t(s);
  }
  return site;
}

struct FactorSamples {
  RealVector samples;
  int band = 0;
};

inline FactorSamples factor_from_json(const json& j, const Grid& grid, std::uint64_t seed, const std::string& where) {
  const auto type = get_field<std::string>(j, "type", where);
  FactorSamples out{RealVector::Zero(Eigen::Index(grid.sites())), 0};
  if (type == "zero") {
    allow_keys(j, where, {"type"});
  } else if (type == "constant") {
    allow_keys(j, where, {"type", "value"});
    out.samples.setConstant(get_field<double>(j, "value", where));
  } else if (type == "modes") {
    allow_keys(j, where, {"type", "modes"});
    const auto& modes = field(j, "modes", where);
    if (!modes.is_array() || modes.empty()) throw FormatError(where + ".modes: expected a nonempty array");
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const std::string at = where + ".modes[" + std::to_string(i) + "]";
      allow_keys(modes[i], at, {"k", "cos", "sin"});
      const json& kj = field(modes[i], "k", at);
      std::array<int, 2> k{0, 0};
      if (kj.is_number_integer()) {
        k[0] = kj.get<int>();
      } else {
        const auto kv = get_as<std::vector<int>>(kj, at + ".k");
        if (kv.size() != std::size_t(grid.dim)) throw FormatError(at + ".k: expected " + std::to_string(grid.dim) + " component(s)");
        k = {kv[0], grid.dim == 2 ? kv[1] : 0};
      }
      const double a = get_or<double>(modes[i], "cos", at, 0.0), b = get_or<double>(modes[i], "sin", at, 0.0);
      out.samples += sample_on(grid, [&](std::array<double, 2> x) {
        const double t = k[0] * x[0] + k[1] * x[1];
        return a * std::cos(t) + b * std::sin(t);
      });
      out.band = std::max({out.band, std::abs(k[0]), std::abs(k[1])});
    }
  } else if (type == "samples") {
    allow_keys(j, where, {"type", "values"});
    const auto values = get_field<std::vector<double>>(j, "values", where);
    if (values.size() != grid.sites())
      throw FormatError(where + ".values: expected " + std::to_string(grid.sites()) + " samples, got " + std::to_string(values.size()));
    out.samples = Eigen::Map<const RealVector>(values.data(), Eigen::Index(values.size()));
    out.band = grid.n / 2;
  } else if (type == "random") {
    allow_keys(j, where, {"type", "amplitude", "band"});
    const double amplitude = get_field<double>(j, "amplitude", where);
    out.band = get_field<int>(j, "band", where);
    if (out.band < 1 || out.band > grid.n / 2) throw FormatError(where + ".band: must lie in [1, N/2]");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (int k0 = 0; k0 <= out.band; ++k0)
      for (int k1 = (grid.dim == 2 ? -out.band : 0); k1 <= (grid.dim == 2 ? out.band : 0); ++k1) {
        if (k0 == 0 && k1 <= 0) continue;
        const double a = normal(rng), b = normal(rng);
        out.samples += sample_on(grid, [&](std::array<double, 2> x) {
          const double t = k0 * x[0] + k1 * x[1];
          return a * std::cos(t) + b * std::sin(t);
        });
      }
    const double peak = out.samples.cwiseAbs().maxCoeff();
    if (peak > 0.0) out.samples *= amplitude / peak;
  } else if (type == "abs_sin") {
    // Lipschitz but not smooth: amplitude * |sin x|.
    allow_keys(j, where, {"type", "amplitude"});
    const double amplitude = get_field<double>(j, "amplitude", where);
    out.samples = sample_on(grid, [&](std::array<double, 2> x) { return amplitude * std::abs(std::sin(x[0])); });
    out.band = grid.n / 4;
  } else {
    throw FormatError(where + ".type: unknown factor type '" + type + "'");
  }
  if (!out.samples.allFinite()) throw FormatError(where + ": factor samples are not finite");
  return out;
}

inline std::string read_text(const std::filesystem::path& path, const std::string& where) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(where + ": cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Metric metric_spec_from_json(const json& j, ScenarioConfig& cfg, const std::filesystem::path& base,
                                    const std::string& where) {
  if (j.contains("file")) {
    allow_keys(j, where, {"file"});
    const std::filesystem::path path = base / get_field<std::string>(j, "file", where);
    const std::string text = read_text(path, where + ".file");
    cfg.input_blob += "\n" + text;
    json mj;
    try {
      mj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw FormatError(where + ".file: " + e.what());
    }
    Metric m = metric_from_json(mj, where + ".file");
    if (cfg.n != 0 && m.grid().n != cfg.n) throw FormatError(where + ".file: metric has N = " + std::to_string(m.grid().n) + ", config says " + std::to_string(cfg.n));
    return m;
  }
  allow_keys(j, where, {"background", "factor", "band_limit"});
  if (cfg.n == 0) throw FormatError("config.N: missing (required for inline metrics)");
  const FlatBackground bg = background_from_json(field(j, "background", where), where + ".background");
  const Grid grid(bg.dim(), cfg.n);
  FactorSamples f{RealVector::Zero(Eigen::Index(grid.sites())), 0};
  if (j.contains("factor")) f = factor_from_json(j.at("factor"), grid, cfg.seed, where + ".factor");
  const int band = get_or<int>(j, "band_limit", where, f.band);
  if (band < 0 || band > cfg.n / 2) throw FormatError(where + ".band_limit: must lie in [0, N/2]");
  try {
    return bg.kind == FlatBackground::Kind::circle ? make_circle_metric(bg.length, f.samples, band)
                                                   : make_torus_metric(bg.modulus, f.samples, band);
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + ": " + e.what());
  }
}

inline std::vector<int> schedule_from_json(const json& j, const std::string& where) {
  auto s = get_as<std::vector<int>>(j, where);
  if (s.empty()) throw FormatError(where + ": schedule must be nonempty");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] <= 0) throw FormatError(where + ": frequencies must be positive");
    if (i > 0 && s[i] <= s[i - 1]) throw FormatError(where + ": frequencies must increase");
  }
  return s;
}

}  // namespace detail

inline const std::vector<std::string>& scenario_kinds() {
  static const std::vector<std::string> kinds{"build", "sign", "probe", "detect", "distance", "recover", "demo"};
  return kinds;
}

inline const std::vector<std::string>& demo_names() {
  static const std::vector<std::string> names{"circle-conformal", "torus-moduli", "distance-circle", "projector-identity"};
  return names;
}

/// Parses and validates a scenario. Relative file references resolve against
/// `base`. A seed override (from the command line) replaces the config seed.
inline ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base = ".",
                                   std::optional<std::uint64_t> seed_override = std::nullopt) {
  using namespace detail;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  const std::string w = "config";
  allow_keys(j, w, {"kind", "name", "N", "spin", "metric", "metric_a", "metric_b", "unitary", "thresholds", "probe",
                    "distance", "recover", "dump_operator", "encoding", "seed"});
  ScenarioConfig cfg;
  cfg.kind = get_field<std::string>(j, "kind", w);
  if (std::find(scenario_kinds().begin(), scenario_kinds().end(), cfg.kind) == scenario_kinds().end())
    throw FormatError("config.kind: unknown scenario '" + cfg.kind + "'");
  cfg.seed = seed_override.value_or(get_or<std::uint64_t>(j, "seed", w, 1));
  j["seed"] = cfg.seed;
  cfg.echo = j;
  cfg.input_blob = j.dump();

  if (cfg.kind == "demo") {
    cfg.demo_name = get_field<std::string>(j, "name", w);
    if (std::find(demo_names().begin(), demo_names().end(), cfg.demo_name) == demo_names().end())
      throw FormatError("config.name: unknown demo '" + cfg.demo_name + "'");
    return cfg;
  }

  if (j.contains("N")) {
    cfg.n = get_field<int>(j, "N", w);
    if (cfg.n <= 0 || cfg.n % 2 != 0) throw FormatError("config.N: must be a positive even integer, got " + std::to_string(cfg.n));
  }
  if (cfg.kind == "detect") {
    cfg.metrics.push_back(metric_spec_from_json(field(j, "metric_a", w), cfg, base, "config.metric_a"));
    cfg.metrics.push_back(metric_spec_from_json(field(j, "metric_b", w), cfg, base, "config.metric_b"));
    if (!(cfg.metrics[0].grid() == cfg.metrics[1].grid())) throw FormatError("config.metric_b: grid differs from metric_a");
  } else {
    cfg.metrics.push_back(metric_spec_from_json(field(j, "metric", w), cfg, base, "config.metric"));
  }
  const Grid grid = cfg.metrics.front().grid();
  cfg.n = grid.n;

  cfg.spin.flags.assign(std::size_t(grid.dim), Boundary::antiperiodic);
  if (j.contains("spin")) {
    const auto flags = get_field<std::vector<std::string>>(j, "spin", w);
    if (flags.size() != std::size_t(grid.dim)) throw FormatError("config.spin: expected " + std::to_string(grid.dim) + " flag(s)");
    for (std::size_t i = 0; i < flags.size(); ++i) {
      try {
        cfg.spin.flags[i] = boundary_from_string(flags[i]);
      } catch (const std::invalid_argument& e) {
        throw FormatError("config.spin[" + std::to_string(i) + "]: " + e.what());
      }
    }
  }

  if (j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    const std::string tw = "config.thresholds";
    allow_keys(t, tw, {"vanish", "present", "cometric_agree", "cometric_differ", "zero_tolerance_relative"});
    cfg.thresholds.vanish = get_or<double>(t, "vanish", tw, cfg.thresholds.vanish);
    cfg.thresholds.present = get_or<double>(t, "present", tw, cfg.thresholds.present);
    cfg.thresholds.cometric_agree = get_or<double>(t, "cometric_agree", tw, cfg.thresholds.cometric_agree);
    cfg.thresholds.cometric_differ = get_or<double>(t, "cometric_differ", tw, cfg.thresholds.cometric_differ);
    cfg.thresholds.zero_tolerance_relative = get_or<double>(t, "zero_tolerance_relative", tw, cfg.thresholds.zero_tolerance_relative);
  }
  if (!(cfg.thresholds.vanish > 0.0 && cfg.thresholds.vanish < cfg.thresholds.present))
    throw FormatError("config.thresholds: need 0 < vanish < present");
  if (!(cfg.thresholds.cometric_agree > 0.0 && cfg.thresholds.cometric_agree < cfg.thresholds.cometric_differ))
    throw FormatError("config.thresholds: need 0 < cometric_agree < cometric_differ");
  if (!(cfg.thresholds.zero_tolerance_relative >= 0.0)) throw FormatError("config.thresholds.zero_tolerance_relative: must be nonnegative");

  if (j.contains("unitary")) {
    const json& u = j.at("unitary");
    allow_keys(u, "config.unitary", {"type", "phase"});
    const auto type = get_field<std::string>(u, "type", "config.unitary");
    if (type == "phase")
      cfg.phase = factor_from_json(field(u, "phase", "config.unitary"), grid, cfg.seed, "config.unitary.phase").samples;
    else if (type != "identity")
      throw FormatError("config.unitary.type: unknown unitary '" + type + "'");
  }

  if (j.contains("probe")) {
    const json& p = j.at("probe");
    const std::string pw = "config.probe";
    allow_keys(p, pw, {"site", "direction", "bump_band", "schedule", "target", "points", "rays"});
    if (p.contains("site")) cfg.probe.site = site_from_json(p.at("site"), pw + ".site", grid);
    if (p.contains("direction")) cfg.probe.direction = direction_from_json(p.at("direction"), pw + ".direction", grid.dim);
    cfg.probe.bump_band = get_or<int>(p, "bump_band", pw, -1);
    if (cfg.probe.bump_band > grid.n / 8) throw FormatError(pw + ".bump_band: must not exceed N/8");
    if (p.contains("schedule")) cfg.probe.schedule = schedule_from_json(p.at("schedule"), pw + ".schedule");
    const auto target = get_or<std::string>(p, "target", pw, "sign");
    if (target != "sign" && target != "dirac") throw FormatError(pw + ".target: expected 'sign' or 'dirac'");
    cfg.probe.sign_target = target == "sign";
    cfg.probe.points = get_or<int>(p, "points", pw, 8);
    cfg.probe.rays = get_or<int>(p, "rays", pw, 8);
    if (cfg.probe.points < 1 || cfg.probe.rays < 1) throw FormatError(pw + ": points and rays must be positive");
  }

  if (cfg.kind == "distance") {
    const json& d = field(j, "distance", w);
    const std::string dw = "config.distance";
    allow_keys(d, dw, {"x", "y", "band", "restarts", "iterations"});
    cfg.distance.x = site_from_json(field(d, "x", dw), dw + ".x", grid);
    cfg.distance.y = site_from_json(field(d, "y", dw), dw + ".y", grid);
    if (cfg.distance.x == cfg.distance.y) throw FormatError(dw + ".y: must differ from x");
    cfg.distance.band = get_field<int>(d, "band", dw);
    if (cfg.distance.band < 1 || cfg.distance.band > grid.n / 4) throw FormatError(dw + ".band: must lie in [1, N/4]");
    cfg.distance.optimizer.restarts = get_or<int>(d, "restarts", dw, 8);
    cfg.distance.optimizer.iterations = get_or<int>(d, "iterations", dw, cfg.distance.optimizer.iterations);
    if (cfg.distance.optimizer.restarts < 1) throw FormatError(dw + ".restarts: must be positive");
    cfg.distance.optimizer.seed = cfg.seed;
  }

  if (cfg.kind == "recover") {
    const std::string rw = "config.recover";
    const json r = j.contains("recover") ? j.at("recover") : json::object();
    allow_keys(r, rw, {"sites", "direction", "schedule"});
    if (r.contains("sites")) {
      const json& s = r.at("sites");
      if (!s.is_array() || s.empty()) throw FormatError(rw + ".sites: expected a nonempty array");
      for (std::size_t i = 0; i < s.size(); ++i) cfg.recover.sites.push_back(site_from_json(s[i], rw + ".sites[" + std::to_string(i) + "]", grid));
    } else {
      cfg.recover.sites = default_points(grid, 8);
    }
    if (r.contains("direction")) cfg.recover.direction = direction_from_json(r.at("direction"), rw + ".direction", grid.dim);
    if (r.contains("schedule")) cfg.recover.schedule = detail::schedule_from_json(r.at("schedule"), rw + ".schedule");
  }

  cfg.dump_operator = get_or<bool>(j, "dump_operator", w, false);
  const auto enc = get_or<std::string>(j, "encoding", w, "binary");
  if (enc != "binary" && enc != "text") throw FormatError("config.encoding: expected 'binary' or 'text'");
  cfg.encoding = enc == "binary" ? Encoding::binary : Encoding::text;
  return cfg;
}

inline ScenarioConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt) {
  const std::filesystem::path p(path);
  return parse_config(detail::read_text(p, "config"), p.parent_path().empty() ? "." : p.parent_path(), seed_override);
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

enum class Status { ok, inconclusive, failed };

inline int exit_code(Status s) { return s == Status::ok ? 0 : s == Status::inconclusive ? 2 : 1; }

struct Artifact {
  std::string name;
  std::string content;
};

struct ResultRecord {
  json scenario;
  std::string input_hash;
  json outputs = json::object();
  std::string output_hash;
  double wall_clock = 0.0;
  Status status = Status::ok;
  std::vector<ProbeRow> evidence;
  std::vector<Artifact> artifacts;
  std::string summary;

  json to_json() const {
    return {{"scenario", scenario},
            {"input_hash", input_hash},
            {"status", status == Status::ok ? "ok" : status == Status::inconclusive ? "inconclusive" : "failed"},
            {"outputs", outputs},
            {"output_hash", output_hash},
            {"wall_clock_seconds", wall_clock}};
  }
};

namespace detail {

inline OperatorMatrix scenario_dirac(const ScenarioConfig& cfg, std::size_t i = 0) { return build_dirac(cfg.metrics.at(i), cfg.spin); }

inline std::string operator_blob(const OperatorMatrix& op, Encoding enc) {
  std::ostringstream out(std::ios::binary);
  write_operator(out, op, enc);
  return out.str();
}

inline void run_build(const ScenarioConfig& cfg, ResultRecord& rec) {
  const Metric& m = cfg.metrics.front();
  const auto d = scenario_dirac(cfg);
  // The sandwich form against the rescaled-volume form, carried back by J.
  const auto vol = build_dirac_volume_form(m, cfg.spin);
  const auto j = volume_identification(m), jinv = volume_identification(m, true);
  const double volume_defect = (j.matrix * vol.matrix * jinv.matrix - d.matrix).cwiseAbs().maxCoeff();
  rec.outputs = {{"size", d.size()},
                 {"rank", d.rank},
                 {"hermitian_defect", d.hermitian_defect()},
                 {"volume_form_defect", volume_defect},
                 {"v_max", m.v_samples().maxCoeff()},
                 {"v_min", m.v_samples().minCoeff()}};
  rec.artifacts.push_back({"metric.json", metric_to_json(m).dump(2) + "\n"});
  if (cfg.dump_operator) rec.artifacts.push_back({"operator.dump", operator_blob(d, cfg.encoding)});
  rec.summary = "built " + std::to_string(d.size()) + "x" + std::to_string(d.size()) + " Dirac operator";
}

inline void run_sign(const ScenarioConfig& cfg, ResultRecord& rec) {
  const auto d = scenario_dirac(cfg);
  const auto sd = eigendecompose(d);
  const auto tol = ZeroTolerance::relative(sd, cfg.thresholds.zero_tolerance_relative);
  const ComplexMatrix s = sign_matrix(sd, tol);
  const ComplexMatrix plus = spectral_projector(sd, SpectralPart::plus, tol);
  const ComplexMatrix zero = spectral_projector(sd, SpectralPart::zero, tol);
  const Eigen::Index n = s.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  rec.outputs = {{"size", n},
                 {"tau", tol.tau},
                 {"operator_norm", sd.operator_norm()},
                 {"kernel_dimension", projector_rank(zero)},
                 {"positive_rank", projector_rank(plus)},
                 {"sign_cube_defect", (s * s * s - s).cwiseAbs().maxCoeff()},
                 {"involution_defect", (s * s - (id - zero)).cwiseAbs().maxCoeff()},
                 {"projector_identity_defect", (plus - 0.5 * (s + id - zero)).cwiseAbs().maxCoeff()}};
  if (cfg.dump_operator) rec.artifacts.push_back({"sign.dump", operator_blob(like(d, s), cfg.encoding)});
  rec.summary = "kernel dimension " + std::to_string(projector_rank(zero));
}

inline void run_probe(const ScenarioConfig& cfg, ResultRecord& rec) {
  const Metric& m = cfg.metrics.front();
  auto op = scenario_dirac(cfg);
  if (cfg.probe.sign_target) {
    const auto sd = eigendecompose(op);
    op = like(op, sign_matrix(sd, ZeroTolerance::relative(sd, cfg.thresholds.zero_tolerance_relative)));
  }
  const Grid& g = op.grid;
  const int band = cfg.probe.bump_band < 0 ? g.n / 8 : cfg.probe.bump_band;
  auto schedule = cfg.probe.schedule.empty() ? default_schedule(g, cfg.probe.direction, 4) : cfg.probe.schedule;
  const auto est = probe_symbol(op, make_probe(g, cfg.probe.site, band, cfg.probe.direction, schedule));
  rec.outputs = {{"target", cfg.probe.sign_target ? "sign" : "dirac"},
                 {"site", cfg.probe.site},
                 {"direction", {cfg.probe.direction[0], cfg.probe.direction[1]}},
                 {"bump_band", band},
                 {"estimate", symbol_to_json(est)}};
  if (cfg.probe.sign_target) {
    const std::array<double, 2> xi{double(cfg.probe.direction[0]), double(cfg.probe.direction[1])};
    rec.outputs["analytic_symbol"] = complex_matrix_to_json(analytic_sign_symbol(m, cfg.probe.site, xi));
    rec.outputs["analytic_deviation"] = (est.sigma - analytic_sign_symbol(m, cfg.probe.site, xi)).norm();
  }
  rec.evidence = symbol_rows(est, cfg.probe.site, cfg.probe.direction);
  rec.summary = std::string("probe ") + (est.converged ? "converged" : "did not converge");
  if (!est.converged) rec.status = Status::inconclusive;
}

inline DetectConfig detect_config(const ScenarioConfig& cfg) {
  DetectConfig dc;
  dc.probes.points = cfg.probe.points;
  dc.probes.rays = cfg.probe.rays;
  dc.probes.bump_band = cfg.probe.bump_band;
  dc.vanish_threshold = cfg.thresholds.vanish;
  dc.present_threshold = cfg.thresholds.present;
  dc.cometric_agree = cfg.thresholds.cometric_agree;
  dc.cometric_differ = cfg.thresholds.cometric_differ;
  dc.zero_tolerance_relative = cfg.thresholds.zero_tolerance_relative;
  return dc;
}

inline void run_detect(const ScenarioConfig& cfg, ResultRecord& rec) {
  const auto da = scenario_dirac(cfg, 0), db = scenario_dirac(cfg, 1);
  std::optional<OperatorMatrix> u;
  if (cfg.phase) {
    ComplexVector e(cfg.phase->size());
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = std::polar(1.0, (*cfg.phase)(i));
    u = multiplication_operator(da.grid, e, da.rank, da.spin);
  }
  const auto v = detect_conformal(da, db, u, detect_config(cfg));
  rec.outputs = verdict_to_json(v);
  rec.evidence = v.report.rows;
  rec.summary = "decision " + to_string(v.decision);
  if (v.decision == Decision::inconclusive) rec.status = Status::inconclusive;
}

inline void run_distance(const ScenarioConfig& cfg, ResultRecord& rec) {
  const Metric& m = cfg.metrics.front();
  const auto d = scenario_dirac(cfg);
  const auto est = connes_distance(d, cfg.distance.x, cfg.distance.y, cfg.distance.band, cfg.distance.optimizer);
  rec.outputs = {{"x", cfg.distance.x}, {"y", cfg.distance.y}, {"band", cfg.distance.band}, {"estimate", distance_to_json(est)}};
  if (m.grid().dim == 1) {
    const double geo = geodesic_distance(m, m.grid().point(cfg.distance.x)[0], m.grid().point(cfg.distance.y)[0]);
    rec.outputs["geodesic"] = geo;
    rec.outputs["ratio_to_geodesic"] = est.value / geo;
  }
  rec.summary = "distance " + std::to_string(est.value) + (est.flagged ? " (flagged)" : "");
  if (est.flagged) rec.status = Status::inconclusive;
}

inline void run_recover(const ScenarioConfig& cfg, ResultRecord& rec) {
  const Metric& m = cfg.metrics.front();
  const auto d = scenario_dirac(cfg);
  json rows = json::array();
  double worst = 0.0;
  for (std::size_t site : cfg.recover.sites) {
    const auto f = recover_conformal_factor(d, m.background(), site, cfg.recover.direction, cfg.recover.schedule);
    worst = std::max(worst, std::abs(f.v - m.v(site)));
    json row = factor_to_json(f);
    row["site"] = site;
    row["v_input"] = m.v(site);
    rows.push_back(row);
  }
  rec.outputs = {{"points", rows}, {"max_abs_error", worst}};
  rec.summary = "max |v_hat - v| = " + std::to_string(worst);
}

}  // namespace detail

inline ResultRecord demo(const std::string& name, std::uint64_t seed = 1);

/// Executes a parsed scenario.
inline ResultRecord run(const ScenarioConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  ResultRecord rec;
  if (cfg.kind == "demo") {
    rec = demo(cfg.demo_name, cfg.seed);
  } else {
    if (cfg.kind == "build") detail::run_build(cfg, rec);
    else if (cfg.kind == "sign") detail::run_sign(cfg, rec);
    else if (cfg.kind == "probe") detail::run_probe(cfg, rec);
    else if (cfg.kind == "detect") detail::run_detect(cfg, rec);
    else if (cfg.kind == "distance") detail::run_distance(cfg, rec);
    else if (cfg.kind == "recover") detail::run_recover(cfg, rec);
    else throw FormatError("config.kind: unknown scenario '" + cfg.kind + "'");
  }
  rec.scenario = cfg.echo;
  rec.input_hash = git_blob_hash(cfg.input_blob);
  rec.output_hash = git_blob_hash(rec.outputs.dump());
  rec.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

// ---------------------------------------------------------------------------
// Demos
// ---------------------------------------------------------------------------

namespace detail {

inline Metric sine_circle(int n, double amplitude) {
  Grid g(1, n);
  return make_circle_metric(two_pi, sample_on(g, [&](std::array<double, 2> x) { return amplitude * std::sin(x[0]); }), 1);
}

inline Metric flat_torus(int n, double modulus) {
  return make_torus_metric(modulus, RealVector::Zero(Eigen::Index(n) * n), 0);
}

}  // namespace detail

/// Canned reproductions with pinned defaults. Status is ok on pass and failed
/// otherwise.
inline ResultRecord demo(const std::string& name, std::uint64_t seed) {
  ResultRecord rec;
  bool pass = false;
  if (name == "circle-conformal") {
    const auto spin = SpinStructure::circle(Boundary::antiperiodic);
    const Metric flat = make_circle_metric(two_pi, RealVector::Zero(64), 0);
    const auto v = detect_conformal(build_dirac(flat, spin), build_dirac(detail::sine_circle(64, 0.3), spin));
    pass = v.decision == Decision::conformal && v.report.max_top_residual < 0.05;
    rec.outputs = verdict_to_json(v);
    rec.evidence = v.report.rows;
    rec.summary = "decision " + to_string(v.decision) + ", max top residual " + std::to_string(v.report.max_top_residual);
  } else if (name == "torus-moduli") {
    const auto spin = SpinStructure::torus(Boundary::antiperiodic, Boundary::antiperiodic);
    const auto v = detect_conformal(build_dirac(detail::flat_torus(32, 1.0), spin), build_dirac(detail::flat_torus(32, 2.0), spin));
    const double expected = std::abs(2.0 / std::sqrt(5.0) - 1.0 / std::sqrt(2.0));
    const double dev = v.points.empty() ? 0.0 : v.pair_deviation(0, 2);
    pass = v.decision == Decision::not_conformal && std::abs(dev - expected) <= 0.04;
    rec.outputs = verdict_to_json(v);
    rec.outputs["pair_deviation_dx_dxdy"] = dev;
    rec.outputs["expected_pair_deviation"] = expected;
    rec.evidence = v.report.rows;
    rec.summary = "decision " + to_string(v.decision) + ", deviation at (1,1) " + std::to_string(dev);
  } else if (name == "distance-circle") {
    const Metric flat = make_circle_metric(two_pi, RealVector::Zero(128), 0);
    DistanceConfig dc;
    dc.seed = seed;
    const auto est = connes_distance(build_dirac(flat, SpinStructure::circle(Boundary::antiperiodic)), 0, 64, 16, dc);
    const double pi = std::numbers::pi;
    pass = est.value >= 0.95 * pi && est.value <= 1.05 * pi;
    rec.outputs = distance_to_json(est);
    rec.outputs["ratio_to_pi"] = est.value / pi;
    rec.summary = "d(0, pi) = " + std::to_string(est.value / pi) + " pi";
  } else if (name == "projector-identity") {
    const Metric flat = make_circle_metric(two_pi, RealVector::Zero(64), 0);
    const auto d = build_dirac(flat, SpinStructure::circle(Boundary::periodic));
    const auto sd = eigendecompose(d);
    const auto tol = ZeroTolerance::relative(sd);
    const ComplexMatrix s = sign_matrix(sd, tol);
    const ComplexMatrix plus = spectral_projector(sd, SpectralPart::plus, tol);
    const ComplexMatrix zero = spectral_projector(sd, SpectralPart::zero, tol);
    const ComplexMatrix id = ComplexMatrix::Identity(s.rows(), s.cols());
    const double dev = (plus - 0.5 * (s + id - zero)).cwiseAbs().maxCoeff();
    pass = dev <= 1e-12 && projector_rank(zero) == 1;
    rec.outputs = {{"max_deviation", dev}, {"kernel_rank", projector_rank(zero)}};
    rec.summary = "max deviation " + std::to_string(dev) + ", kernel rank " + std::to_string(projector_rank(zero));
  } else {
    throw FormatError("demo: unknown name '" + name + "'");
  }
  rec.outputs["demo"] = name;
  rec.outputs["pass"] = pass;
  rec.status = pass ? Status::ok : Status::failed;
  rec.summary = name + ": " + (pass ? "PASS" : "FAIL") + " (" + rec.summary + ")";
  return rec;
}

/// Writes result.json and/or evidence.csv plus any artifacts into `dir`.
inline std::vector<std::string> write_outputs(const ResultRecord& rec, const std::filesystem::path& dir, bool json_out, bool csv_out) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& content) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    written.push_back(path.string());
  };
  if (json_out) put("result.json", rec.to_json().dump(2) + "\n");
  if (csv_out) {
    std::ostringstream csv;
    write_report_csv(csv, rec.evidence);
    put("evidence.csv", csv.str());
  }
  for (const auto& a : rec.artifacts) put(a.name, a.content);
  return written;
}

}  // namespace confspec
