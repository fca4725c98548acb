#include "skembed/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "skembed/stats.hpp"

namespace skembed {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok) {
  if (tok == "inf") return std::numeric_limits<double>::infinity();
  if (tok == "-inf") return -std::numeric_limits<double>::infinity();
  return std::strtod(tok.c_str(), nullptr);
}

void reject_unknown(const json& obj, const std::vector<std::string>& allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw Error(Errc::config_error, "unknown field '" + it.key() + "' in " + where);
  }
}

CurveConfig parse_curve_block(const json& j) {
  if (!j.is_object()) throw Error(Errc::config_error, "curve block must be an object");
  reject_unknown(j, {"preset", "x", "custom"}, "curve");
  CurveConfig cc;
  const bool has_preset = j.contains("preset");
  const bool has_custom = j.contains("custom");
  if (has_preset == has_custom)
    throw Error(Errc::config_error, "curve needs exactly one of 'preset' or 'custom'");
  if (has_preset) {
    const std::string name = j.at("preset").get<std::string>();
    if (name == "vallois") cc.preset = CurvePreset::vallois;
    else if (name == "azema_yor") cc.preset = CurvePreset::azema_yor;
    else if (name == "local_time_at_x") cc.preset = CurvePreset::local_time_at_x;
    else throw Error(Errc::config_error, "unknown curve preset '" + name + "'");
    cc.x = j.value("x", 0.0);
  } else {
    cc.preset = CurvePreset::custom;
    for (const auto& row : j.at("custom")) {
      if (!row.is_array() || row.size() != 3)
        throw Error(Errc::config_error, "custom curve rows are [s, F, h] triples");
      cc.custom.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>()});
    }
  }
  return cc;
}

json curve_to_json(const CurveConfig& cc) {
  json j;
  if (cc.preset == CurvePreset::custom) {
    json rows = json::array();
    for (const auto& p : cc.custom) rows.push_back({p.s, p.F, p.h});
    j["custom"] = rows;
  } else {
    j["preset"] = preset_name(cc.preset);
    if (cc.preset == CurvePreset::local_time_at_x) j["x"] = cc.x;
  }
  return j;
}

}  // namespace

std::string CurveConfig::label() const {
  if (preset == CurvePreset::custom) return "custom";
  if (preset == CurvePreset::local_time_at_x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "local_time_at_x(%g)", x);
    return buf;
  }
  return preset_name(preset);
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::config_error, std::string("config parse: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::config_error, "config root must be an object");
  reject_unknown(j, {"schema", "measure", "curve", "grid", "sim", "outputs", "compare"}, "root");

  RunConfig cfg;
  cfg.schema = j.value("schema", 0);
  if (cfg.schema != 1) throw Error(Errc::config_error, "unsupported config schema");

  if (!j.contains("measure")) throw Error(Errc::config_error, "missing measure block");
  const json& jm = j.at("measure");
  reject_unknown(jm, {"atoms", "density", "n_atoms"}, "measure");
  const bool has_atoms = jm.contains("atoms");
  const bool has_density = jm.contains("density");
  if (has_atoms == has_density)
    throw Error(Errc::config_error, "measure needs exactly one of 'atoms' or 'density'");
  if (has_atoms) {
    for (const auto& row : jm.at("atoms")) {
      if (!row.is_array() || row.size() != 2)
        throw Error(Errc::config_error, "atom rows are [location, mass] pairs");
      cfg.measure.atoms.push_back({row[0].get<double>(), row[1].get<double>()});
    }
  } else {
    const json& jd = jm.at("density");
    reject_unknown(jd, {"edges", "values"}, "measure.density");
    PiecewiseConstantDensity d;
    d.edges = jd.at("edges").get<std::vector<double>>();
    d.values = jd.at("values").get<std::vector<double>>();
    cfg.measure.density = std::move(d);
    cfg.measure.n_atoms = jm.value("n_atoms", std::size_t{200});
  }

  if (!j.contains("curve")) throw Error(Errc::config_error, "missing curve block");
  cfg.curve = parse_curve_block(j.at("curve"));

  if (j.contains("grid")) {
    const json& jg = j.at("grid");
    reject_unknown(jg, {"ds_max", "gamma_floor"}, "grid");
    cfg.grid.ds_max = jg.value("ds_max", 0.0);
    cfg.grid.gamma_floor = jg.value("gamma_floor", 1e-6);
  }

  if (j.contains("sim")) {
    const json& js = j.at("sim");
    reject_unknown(js, {"dx", "n_paths", "seed", "max_steps", "record_levels", "scheme", "threads"},
                   "sim");
    cfg.sim.dx = js.value("dx", 0.01);
    cfg.sim.n_paths = js.value("n_paths", std::int64_t{200000});
    cfg.sim.seed = js.value("seed", std::uint64_t{1});
    cfg.sim.max_steps = js.value("max_steps", std::int64_t{50000000});
    if (js.contains("record_levels"))
      cfg.sim.record_levels = js.at("record_levels").get<std::vector<double>>();
    const std::string scheme = js.value("scheme", std::string("skew_walk"));
    if (scheme == "skew_walk") cfg.sim.scheme = Scheme::skew_walk;
    else if (scheme == "time_change") cfg.sim.scheme = Scheme::time_change;
    else throw Error(Errc::config_error, "unknown scheme '" + scheme + "'");
    cfg.sim.threads = js.value("threads", 0);
  }

  if (j.contains("outputs")) {
    const json& jo = j.at("outputs");
    reject_unknown(jo, {"dir", "formats"}, "outputs");
    cfg.outputs.dir = jo.value("dir", std::string("out"));
    if (jo.contains("formats")) {
      cfg.outputs.csv = false;
      cfg.outputs.json = false;
      for (const auto& f : jo.at("formats")) {
        const std::string name = f.get<std::string>();
        if (name == "csv") cfg.outputs.csv = true;
        else if (name == "json") cfg.outputs.json = true;
        else throw Error(Errc::config_error, "unknown output format '" + name + "'");
      }
    }
  }

  if (j.contains("compare")) {
    const json& jc = j.at("compare");
    reject_unknown(jc, {"curves", "psi", "level_x"}, "compare");
    CompareConfig cmp;
    for (const auto& c : jc.at("curves")) cmp.curves.push_back(parse_curve_block(c));
    if (cmp.curves.empty()) throw Error(Errc::config_error, "compare needs at least one curve");
    if (jc.contains("psi")) {
      const json& jp = jc.at("psi");
      if (jp.is_string()) {
        cmp.psi_name = jp.get<std::string>();
        if (cmp.psi_name == "square") cmp.psi_exponent = 2.0;
        else if (cmp.psi_name == "identity") cmp.psi_exponent = 1.0;
        else throw Error(Errc::config_error, "unknown psi '" + cmp.psi_name + "'");
      } else {
        reject_unknown(jp, {"power"}, "compare.psi");
        cmp.psi_exponent = jp.at("power").get<double>();
        cmp.psi_name = "power";
      }
    }
    cmp.level_x = jc.value("level_x", 0.0);
    cfg.compare = std::move(cmp);
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config_error, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

CenteredAtomicMeasure make_measure(const MeasureConfig& mc) {
  if (mc.density) return quantize(*mc.density, mc.n_atoms);
  return CenteredAtomicMeasure(mc.atoms);
}

EmbeddingCurve make_curve(const CurveConfig& cc, const CenteredAtomicMeasure& mu) {
  if (cc.preset == CurvePreset::custom) return EmbeddingCurve::from_breakpoints(cc.custom);
  return EmbeddingCurve::preset(cc.preset, mu, cc.x);
}

BuiltPipeline build_pipeline(const RunConfig& cfg) {
  CenteredAtomicMeasure mu = make_measure(cfg.measure);
  PotentialFunction c(mu);
  EmbeddingCurve curve = make_curve(cfg.curve, mu);
  TangentProfile profile = build_profile(c, curve, cfg.grid);
  AdmissibilityReport adm = validate(curve, profile);
  EmbeddingSpec spec = build_embedding(profile, curve);
  return BuiltPipeline{std::move(mu), std::move(c), std::move(curve), std::move(profile),
                       std::move(adm), std::move(spec)};
}

void write_profile_csv(const std::string& path, const TangentProfile& profile) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::config_error, "cannot write " + path);
  out << "s,F,h,theta,phi,R,S,Gamma\n";
  for (const TangentPoint& p : profile.grid()) {
    out << fmt17(p.s) << ',' << fmt17(p.F) << ',' << fmt17(p.h) << ',' << fmt17(p.theta) << ','
        << fmt17(p.phi) << ',' << fmt17(p.R) << ',' << fmt17(p.S) << ',' << fmt17(p.Gamma)
        << '\n';
  }
}

void write_spec_csv(const std::string& path, const EmbeddingSpec& spec) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::config_error, "cannot write " + path);
  out << "# schema=1\n";
  out << "# l_max=" << fmt17(spec.l_max()) << "\n";
  out << "# truncated=" << (spec.truncated() ? 1 : 0) << "\n";
  out << "# terminal_mass=" << fmt17(spec.terminal_mass()) << "\n";
  out << "# terminal_location=" << fmt17(spec.terminal_location()) << "\n";
  out << "# gamma_floor=" << fmt17(spec.gamma_floor()) << "\n";
  out << "# preset=" << preset_name(spec.preset_tag()) << "\n";
  out << "# preset_x=" << fmt17(spec.preset_x()) << "\n";
  out << "l,G,a,b,alpha,beta,p\n";
  for (const SpecKnot& k : spec.knots()) {
    out << fmt17(k.l) << ',' << fmt17(k.G) << ',' << fmt17(k.a) << ',' << fmt17(k.b) << ','
        << fmt17(k.alpha) << ',' << fmt17(k.beta) << ',' << fmt17(k.p) << '\n';
  }
}

EmbeddingSpec read_spec_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config_error, "cannot read " + path);
  std::string line;
  bool truncated = false;
  double terminal_mass = 0.0, terminal_location = 0.0, gamma_floor = 1e-6, preset_x = 0.0;
  CurvePreset tag = CurvePreset::custom;
  std::vector<SpecKnot> knots;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string val = line.substr(eq + 1);
      if (key == "truncated") truncated = val == "1";
      else if (key == "terminal_mass") terminal_mass = parse_double(val);
      else if (key == "terminal_location") terminal_location = parse_double(val);
      else if (key == "gamma_floor") gamma_floor = parse_double(val);
      else if (key == "preset_x") preset_x = parse_double(val);
      else if (key == "preset") {
        if (val == "vallois") tag = CurvePreset::vallois;
        else if (val == "azema_yor") tag = CurvePreset::azema_yor;
        else if (val == "local_time_at_x") tag = CurvePreset::local_time_at_x;
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;  // column header
      continue;
    }
    std::stringstream ss(line);
    std::string tok;
    double vals[7];
    for (int i = 0; i < 7; ++i) {
      if (!std::getline(ss, tok, ',')) throw Error(Errc::config_error, "bad spec.csv row");
      vals[i] = parse_double(tok);
    }
    SpecKnot k;
    k.l = vals[0];
    k.G = vals[1];
    k.a = vals[2];
    k.b = vals[3];
    k.alpha = vals[4];
    k.beta = vals[5];
    k.p = vals[6];
    knots.push_back(k);
  }
  return EmbeddingSpec::from_knots(std::move(knots), truncated, terminal_mass, terminal_location,
                                   gamma_floor, tag, preset_x);
}

void write_exitlaw_csv(const std::string& path, const ExitLaw& law) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::config_error, "cannot write " + path);
  out << "side,location,mass\n";
  for (const auto& w : law.upper) out << "upper," << fmt17(w.location) << ',' << fmt17(w.mass) << '\n';
  for (const auto& w : law.lower) out << "lower," << fmt17(w.location) << ',' << fmt17(w.mass) << '\n';
  if (law.terminal.mass > 0.0)
    out << "terminal," << fmt17(law.terminal.location) << ',' << fmt17(law.terminal.mass) << '\n';
  if (law.truncation_mass > 0.0)
    out << "truncation," << fmt17(law.truncation_location) << ',' << fmt17(law.truncation_mass)
        << '\n';
}

std::string admissibility_json(const AdmissibilityReport& rep, ProfileEnd end_reason) {
  json j;
  j["ok"] = rep.ok;
  j["zeta"] = std::isfinite(rep.zeta) ? json(rep.zeta) : json("inf");
  j["touches_c"] = rep.touches_c;
  switch (end_reason) {
    case ProfileEnd::touched_c: j["end_reason"] = "touched_c"; break;
    case ProfileEnd::gamma_floor_hit: j["end_reason"] = "gamma_floor_hit"; break;
    case ProfileEnd::curve_exhausted: j["end_reason"] = "curve_exhausted"; break;
  }
  json v = json::array();
  for (const auto& viol : rep.violations) v.push_back({{"s", viol.s}, {"lhs", viol.lhs}, {"rhs", viol.rhs}});
  j["violations"] = v;
  return j.dump(2) + "\n";
}

std::string summary_json(const StatsReport& rep, const RunConfig& cfg) {
  json j;
  j["schema"] = 1;
  j["config"]["dx"] = cfg.sim.dx;
  j["config"]["n_paths"] = cfg.sim.n_paths;
  j["config"]["seed"] = cfg.sim.seed;
  j["config"]["curve"] = curve_to_json(cfg.curve);
  j["ks_BT"] = rep.ks_BT;
  j["ks_Y"] = rep.ks_Y;
  j["mean_BT"] = rep.mean_BT;
  j["se_BT"] = rep.se_BT;
  j["mean_abs_BT"] = rep.mean_absBT;
  j["se_abs_BT"] = rep.se_absBT;
  j["c0"] = rep.c0_reference;
  j["mean_LT"] = rep.mean_LT;
  j["n_finished"] = rep.n_finished;
  j["unfinished_fraction"] = rep.unfinished_fraction;
  j["warning_unfinished"] = rep.unfinished_fraction > 0.01;
  json atoms = json::array();
  for (const auto& a : rep.atom_table)
    atoms.push_back({{"location", a.location}, {"exact", a.expected}, {"empirical", a.actual}});
  j["atoms"] = atoms;
  json ui = json::array();
  for (const auto& d : rep.ui)
    ui.push_back({{"x", d.x}, {"hit_fraction", d.hit_fraction}, {"ui_value", d.ui_value}});
  j["ui"] = ui;
  return j.dump(2) + "\n";
}

void write_ecdf_csv(const std::string& path, std::vector<double> values, std::size_t max_rows) {
  std::sort(values.begin(), values.end());
  std::ofstream out(path);
  if (!out) throw Error(Errc::config_error, "cannot write " + path);
  out << "value,ecdf\n";
  const std::size_t n = values.size();
  if (n == 0) return;
  const std::size_t stride = std::max<std::size_t>(1, n / max_rows);
  for (std::size_t i = 0; i < n; i += stride) {
    out << fmt17(values[i]) << ','
        << fmt17(static_cast<double>(i + 1) / static_cast<double>(n)) << '\n';
  }
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::not_probability:
    case Errc::not_centered:
    case Errc::bad_atom:
    case Errc::bad_density:
    case Errc::bad_preset:
    case Errc::curve_above_c:
    case Errc::not_admissible:
    case Errc::config_error:
      return 2;
    default:
      return 3;
  }
}

namespace {

std::filesystem::path ensure_outdir(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.outputs.dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

int cmd_build(const RunConfig& cfg) {
  const auto dir = ensure_outdir(cfg);
  BuiltPipeline pipe = build_pipeline(cfg);
  const ExitLaw law = exit_law(pipe.profile, pipe.spec);
  if (cfg.outputs.csv) {
    write_profile_csv((dir / "profile.csv").string(), pipe.profile);
    write_spec_csv((dir / "spec.csv").string(), pipe.spec);
    write_exitlaw_csv((dir / "exitlaw.csv").string(), law);
  }
  std::ofstream adm(dir / "admissibility.json");
  adm << admissibility_json(pipe.adm, pipe.profile.end_reason());
  if (!pipe.adm.ok) {
    std::fprintf(stderr, "admissibility failed: %zu violations, touches_c=%d\n",
                 pipe.adm.violations.size(), pipe.adm.touches_c ? 1 : 0);
    return 2;
  }
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  const auto dir = ensure_outdir(cfg);
  BuiltPipeline pipe = build_pipeline(cfg);
  if (!pipe.adm.ok) {
    std::ofstream adm(dir / "admissibility.json");
    adm << admissibility_json(pipe.adm, pipe.profile.end_reason());
    return 2;
  }
  const ExitLaw law = exit_law(pipe.profile, pipe.spec);
  const PathEnsemble ens = simulate_paths(pipe.spec, cfg.sim);
  const StatsReport rep = empirical_stats(ens, law, pipe.spec, pipe.profile, pipe.mu);
  std::ofstream sj(dir / "ensemble_summary.json");
  sj << summary_json(rep, cfg);
  if (cfg.outputs.csv) {
    std::vector<double> bt;
    bt.reserve(ens.paths.size());
    for (const auto& p : ens.paths)
      if (p.side != StopSide::unfinished) bt.push_back(p.B_T);
    write_ecdf_csv((dir / "ecdf.csv").string(), std::move(bt), 10000);
  }
  return 0;
}

int cmd_compare(const RunConfig& cfg) {
  if (!cfg.compare) throw Error(Errc::config_error, "compare block missing");
  const auto dir = ensure_outdir(cfg);
  const CompareConfig& cmp = *cfg.compare;
  const Psi psi = psi_power(cmp.psi_exponent);
  const double x = cmp.level_x;

  struct Row {
    std::string label;
    double mean = 0.0, se = 0.0;
    std::size_t n = 0;
    bool identity = false;
  };
  std::vector<Row> rows;
  int local_time_row = -1;

  CenteredAtomicMeasure mu = make_measure(cfg.measure);
  for (const CurveConfig& cc : cmp.curves) {
    RunConfig sub = cfg;
    sub.curve = cc;
    sub.compare.reset();
    BuiltPipeline pipe = build_pipeline(sub);
    if (!pipe.adm.ok) throw Error(Errc::not_admissible, "curve " + cc.label() + " is not admissible");
    SimConfig sc = cfg.sim;
    bool has_level = false;
    for (double lv : sc.record_levels)
      if (std::abs(lv - x) < 1e-12) has_level = true;
    if (!has_level) sc.record_levels.push_back(x);
    const PathEnsemble ens = simulate_paths(pipe.spec, sc);

    const bool identity = pipe.spec.preset_tag() == CurvePreset::local_time_at_x &&
                          std::abs(pipe.spec.preset_x() - x) < 1e-12;
    const std::vector<double> lx = estimate_level_local_time(
        ens, pipe.spec, x, identity ? LevelEstimator::identity : LevelEstimator::crossing);
    std::vector<double> vals;
    vals.reserve(lx.size());
    for (std::size_t i = 0; i < lx.size(); ++i) {
      if (ens.paths[i].side == StopSide::unfinished) continue;
      vals.push_back(psi.value(lx[i]));
    }
    const MeanSE ms = mean_se(vals);
    if (identity) local_time_row = static_cast<int>(rows.size());
    rows.push_back({cc.label(), ms.mean, ms.se, vals.size(), identity});
  }

  std::ofstream csv(dir / "compare.csv");
  csv << "curve,n,mean,se,estimator\n";
  for (const Row& r : rows)
    csv << r.label << ',' << r.n << ',' << fmt17(r.mean) << ',' << fmt17(r.se) << ','
        << (r.identity ? "identity" : "crossing") << '\n';

  json j;
  j["schema"] = 1;
  j["psi"] = cmp.psi_name;
  j["psi_exponent"] = cmp.psi_exponent;
  j["level_x"] = x;
  json jr = json::array();
  for (const Row& r : rows)
    jr.push_back({{"curve", r.label}, {"n", r.n}, {"mean", r.mean}, {"se", r.se},
                  {"estimator", r.identity ? "identity" : "crossing"}});
  j["rows"] = jr;
  bool maximal = true;
  if (local_time_row >= 0) {
    const Row& lt = rows[static_cast<std::size_t>(local_time_row)];
    for (const Row& r : rows) {
      if (&r == &lt) continue;
      const double slack = 2.0 * std::sqrt(lt.se * lt.se + r.se * r.se);
      if (lt.mean < r.mean - slack) maximal = false;
    }
    j["local_time_maximal_within_2se"] = maximal;
  }
  std::ofstream js(dir / "compare.json");
  js << j.dump(2) << "\n";
  return 0;
}

int cmd_verify(const RunConfig& cfg) {
  const auto dir = ensure_outdir(cfg);
  BuiltPipeline pipe = build_pipeline(cfg);
  const ExitLaw law = exit_law(pipe.profile, pipe.spec);
  const VerifyResult ver = verify_embedding(law, pipe.mu);
  const double slack = 1e-9 + law.truncation_mass;

  json j;
  j["schema"] = 1;
  json checks = json::array();
  bool all_ok = true;
  auto add = [&](const std::string& name, double value, bool ok) {
    checks.push_back({{"name", name}, {"value", value}, {"ok", ok}});
    all_ok = all_ok && ok;
  };
  add("admissible", pipe.adm.violations.empty() ? 0.0 : 1.0, pipe.adm.ok);
  add("exit_law_max_discrepancy", ver.max_abs_discrepancy, ver.max_abs_discrepancy <= slack);
  add("exit_law_total_mass", law.total_mass(), std::abs(law.total_mass() - 1.0) <= 1e-9);

  double ebt = 0.0, eabs = 0.0;
  for (const auto& w : law.combined()) {
    ebt += w.location * w.mass;
    eabs += std::abs(w.location) * w.mass;
  }
  add("exit_law_mean", ebt, std::abs(ebt) <= 1e-8 + law.truncation_mass * 10.0);
  add("exit_law_mean_abs_vs_c0", eabs - pipe.mu.mean_abs(),
      std::abs(eabs - pipe.mu.mean_abs()) <= 1e-8 + law.truncation_mass * 10.0);

  // 1-Lipschitz skew function
  double worst_slope = 0.0;
  const auto& ks = pipe.spec.knots();
  for (std::size_t i = 1; i < ks.size(); ++i) {
    const double slope = (ks[i].G - ks[i - 1].G) / (ks[i].l - ks[i - 1].l);
    worst_slope = std::max(worst_slope, std::abs(slope));
  }
  add("G_lipschitz", worst_slope, worst_slope <= 1.0 + 1e-9);

  j["checks"] = checks;
  j["ok"] = all_ok;
  std::ofstream out(dir / "verify.json");
  out << j.dump(2) << "\n";
  return all_ok ? 0 : 3;
}

}  // namespace skembed
