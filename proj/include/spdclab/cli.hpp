#pragma once

// Config-file driven pipelines behind the spdclab command line tool. Every
// command reads one JSON config, writes its outputs to a directory and embeds
// the resolved config in its JSON output.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "spdclab/analysis.hpp"
#include "spdclab/biphoton.hpp"
#include "spdclab/biphoton_io.hpp"
#include "spdclab/counting.hpp"
#include "spdclab/dispersion.hpp"
#include "spdclab/error.hpp"
#include "spdclab/etpa.hpp"
#include "spdclab/phasematch.hpp"

namespace spdclab::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr std::uint64_t default_seed = 42;

struct RunOptions {
  fs::path config;
  fs::path out = "out";
  std::uint64_t seed = default_seed;
  unsigned threads = 1;
  bool drop_flagged = false;
  std::ostream* log = &std::cout;
};

// ---- config helpers --------------------------------------------------------

inline json load_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": invalid JSON: " + e.what());
  }
}

inline const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  const json& s = j.at(key);
  if (!s.is_object()) throw ConfigError(std::string("config: '") + key + "' must be an object");
  return s;
}

inline double number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string("config: '") + key + "' must be a number");
  return j.at(key).get<double>();
}

inline double required_number(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("config: missing '") + key + "'");
  return number(j, key, 0.0);
}

inline std::string text(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(std::string("config: '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

inline bool flag(const json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError(std::string("config: '") + key + "' must be true or false");
  return j.at(key).get<bool>();
}

inline std::size_t count(const json& j, const char* key, std::size_t fallback) {
  const double v = number(j, key, static_cast<double>(fallback));
  if (!(v >= 0) || v != std::floor(v)) {
    throw ConfigError(std::string("config: '") + key + "' must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

inline fs::path resolve(const fs::path& config, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : config.parent_path() / path;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory: " + dir.string());
}

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write output file: " + path.string());
  f << content;
  if (!f) throw ConfigError("write failed: " + path.string());
}

inline void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

struct PumpConfig {
  units::Length wavelength = 405.0 * units::nm;
  units::Length linewidth_fwhm = 0.01 * units::nm;
};

inline PumpConfig pump_from(const json& root) {
  const json& p = section(root, "pump");
  PumpConfig c;
  c.wavelength = number(p, "wavelength_nm", 405.0) * units::nm;
  c.linewidth_fwhm = number(p, "linewidth_fwhm_nm", 0.01) * units::nm;
  if (!(c.wavelength.si() > 0) || !(c.linewidth_fwhm.si() > 0)) {
    throw ConfigError("config: pump wavelength and linewidth must be > 0");
  }
  return c;
}

struct ResolvedCrystal {
  phasematch::CrystalConfig crystal;
  fs::path material_path;
  Celsius model_degeneracy;  // offset-free
};

// "material" names a bundled file; "material_file" is a path relative to the
// config. The offset comes from "calibration_offset_C" or is derived from
// "measured_degeneracy_C".
inline ResolvedCrystal crystal_from(const json& root, const fs::path& config_path,
                                    units::Length lambda_p) {
  const json& c = section(root, "crystal");
  ResolvedCrystal r;
  if (c.contains("material_file")) {
    r.material_path = resolve(config_path, text(c, "material_file", ""));
  } else {
    r.material_path = dispersion::bundled_material_path(text(c, "material", "mgo_cln_e_gayer2008"));
  }
  r.crystal.material = std::make_shared<const dispersion::SellmeierModel>(
      dispersion::SellmeierModel::from_file(r.material_path));
  r.crystal.length = number(c, "length_mm", 20.0) * units::mm;
  r.crystal.poling_period = number(c, "poling_period_um", 2.72) * units::um;
  r.crystal.temperature = Celsius{number(c, "temperature_C", 59.4)};
  r.crystal.validate();
  r.model_degeneracy = phasematch::find_degeneracy_temperature(r.crystal, lambda_p);
  if (c.contains("calibration_offset_C") && c.contains("measured_degeneracy_C")) {
    throw ConfigError("config: give either calibration_offset_C or measured_degeneracy_C, not both");
  }
  if (c.contains("calibration_offset_C")) {
    r.crystal.calibration_offset_c = number(c, "calibration_offset_C", 0.0);
  } else if (c.contains("measured_degeneracy_C")) {
    r.crystal.calibration_offset_c =
        r.model_degeneracy.value - number(c, "measured_degeneracy_C", 0.0);
  }
  return r;
}

inline json crystal_json(const ResolvedCrystal& r) {
  return {{"material_file", fs::weakly_canonical(r.material_path).string()},
          {"material_id", r.crystal.material->id()},
          {"length_mm", r.crystal.length / units::mm},
          {"poling_period_um", r.crystal.poling_period / units::um},
          {"temperature_C", r.crystal.temperature.value},
          {"calibration_offset_C", r.crystal.calibration_offset_c}};
}

// ---- tuning-curve ----------------------------------------------------------

inline int cmd_tuning_curve(const RunOptions& opt) {
  const json root = load_json(opt.config);
  const PumpConfig pump = pump_from(root);
  const ResolvedCrystal rc = crystal_from(root, opt.config, pump.wavelength);
  const Celsius theta_deg = phasematch::find_degeneracy_temperature(rc.crystal, pump.wavelength);

  const json& t = section(root, "tuning");
  const double lo = number(t, "theta_min_C", theta_deg.value - 5.0);
  const double hi = number(t, "theta_max_C", theta_deg.value + 20.0);
  const std::size_t points = count(t, "points", 101);
  if (!(hi >= lo) || points == 0) throw ConfigError("config: tuning range is empty");
  phasematch::TuningOptions to;
  to.scan_points = count(t, "scan_points", to.scan_points);
  to.threads = opt.threads;
  const auto rows = phasematch::tuning_curve(rc.crystal, pump.wavelength, Celsius{lo}, Celsius{hi},
                                             points, to);

  ensure_dir(opt.out);
  std::ostringstream csv;
  phasematch::write_tuning_csv(csv, rows);
  write_file(opt.out / "tuning_curve.csv", csv.str());

  std::size_t with_roots = 0;
  for (const auto& r : rows) with_roots += !r.points.empty();
  json summary;
  summary["command"] = "tuning-curve";
  summary["config"] = root;
  summary["resolved"] = {{"crystal", crystal_json(rc)},
                         {"pump_wavelength_nm", pump.wavelength / units::nm},
                         {"theta_min_C", lo},
                         {"theta_max_C", hi},
                         {"points", points}};
  summary["theta_deg_model_C"] = rc.model_degeneracy.value;
  summary["calibration_offset_C"] = rc.crystal.calibration_offset_c;
  summary["theta_deg_C"] = theta_deg.value;
  summary["rows_with_phase_matching"] = with_roots;
  write_json(opt.out / "tuning_summary.json", summary);
  *opt.log << "degeneracy temperature " << theta_deg.value << " C (model " << rc.model_degeneracy.value
           << " C, offset " << rc.crystal.calibration_offset_c << " C)\n";
  return 0;
}

// ---- jsa -------------------------------------------------------------------

inline json te_check(double value_fs, double reference_fs, double tolerance) {
  return {{"T_e_fs", value_fs},
          {"reference_fs", reference_fs},
          {"relative_tolerance", tolerance},
          {"relative_deviation", value_fs / reference_fs - 1.0},
          {"within_tolerance", std::abs(value_fs / reference_fs - 1.0) <= tolerance}};
}

inline int cmd_jsa(const RunOptions& opt) {
  const json root = load_json(opt.config);
  const PumpConfig pump = pump_from(root);
  const ResolvedCrystal rc = crystal_from(root, opt.config, pump.wavelength);
  const auto env = biphoton::PumpEnvelope::from_linewidth(pump.wavelength, pump.linewidth_fwhm);

  const json& g = section(root, "grid");
  biphoton::GridSpec grid;
  grid.center = number(g, "center_nm", 2.0 * pump.wavelength / units::nm) * units::nm;
  grid.half_span = number(g, "half_span_nm", 60.0) * units::nm;
  grid.points = count(g, "points", 1024);

  const json& fb = section(root, "fiber");
  biphoton::FiberDispersion fiber{number(fb, "beta_fs2", 3.3e4) * units::fs2, env.omega_p};

  const std::string measured = text(root, "measured_jsi", "");
  biphoton::JointSpectrum jsa;
  if (!measured.empty()) {
    const fs::path p = resolve(opt.config, measured);
    std::ifstream f(p);
    if (!f) throw ConfigError("cannot open measured JSI file: " + p.string());
    jsa = biphoton::jsa_from_jsi(biphoton::read_matrix_csv(f));
  } else {
    biphoton::JsaOptions jo;
    jo.threads = opt.threads;
    jsa = biphoton::build_jsa(rc.crystal, env, grid, jo);
  }
  const auto jta_fiber = biphoton::to_temporal(biphoton::apply_fiber_phase(jsa, fiber));
  const auto jta_free = biphoton::to_temporal(jsa);
  const double te_fiber = biphoton::entanglement_time_from_jti(jta_fiber) / units::fs;
  const double te_free = biphoton::entanglement_time_from_jti(jta_free) / units::fs;

  ensure_dir(opt.out);
  if (flag(root, "export_matrices", true)) {
    std::ostringstream s1, s2;
    biphoton::write_matrix_csv(s1, jsa);
    write_file(opt.out / "jsi.csv", s1.str());
    write_json(opt.out / "jsi.json", biphoton::sidecar_json(jsa));
    biphoton::write_matrix_csv(s2, jta_fiber);
    write_file(opt.out / "jti.csv", s2.str());
    write_json(opt.out / "jti.json", biphoton::sidecar_json(jta_fiber));
  }

  json report;
  report["command"] = "jsa";
  report["config"] = root;
  report["resolved"] = {{"crystal", crystal_json(rc)},
                        {"pump_wavelength_nm", pump.wavelength / units::nm},
                        {"sigma_p_rad_per_s", env.sigma_p.si()},
                        {"grid_points", jsa.rows()},
                        {"beta_fs2", fiber.beta / units::fs2},
                        {"source", measured.empty() ? "model" : "measured"}};
  report["T_e_with_fiber"] = te_check(te_fiber, 408.6, 0.10);
  report["T_e_without_fiber"] = te_check(te_free, 102.0, 0.15);
  const double deg = 2.0 * pump.wavelength / units::nm;
  report["T_e_gvm_degenerate_fs"] =
      biphoton::entanglement_time_gvm(rc.crystal, deg * units::nm, deg * units::nm) / units::fs;
  if (root.contains("gvm_pair_nm")) {
    const auto& pr = root.at("gvm_pair_nm");
    if (!pr.is_array() || pr.size() != 2 || !pr[0].is_number() || !pr[1].is_number()) {
      throw ConfigError("config: 'gvm_pair_nm' must be [signal, idler]");
    }
    const double ls = pr[0].get<double>(), li = pr[1].get<double>();
    report["T_e_gvm_pair"] = {
        {"lambda_s_nm", ls},
        {"lambda_i_nm", li},
        {"T_e_fs", biphoton::entanglement_time_gvm(rc.crystal, ls * units::nm, li * units::nm) / units::fs}};
  }
  write_json(opt.out / "te_report.json", report);
  *opt.log << "T_e with fiber " << te_fiber << " fs, without fiber " << te_free << " fs\n";
  return 0;
}

// ---- simulate --------------------------------------------------------------

inline counting::DetectionChain chain_from(const json& root) {
  const json& c = section(root, "chain");
  counting::DetectionChain ch;
  ch.eta_coup = number(c, "eta_coup", ch.eta_coup);
  ch.eta_inser = number(c, "eta_inser", ch.eta_inser);
  ch.eta_det = number(c, "eta_det", ch.eta_det);
  ch.dark_rate_per_s = number(c, "dark_rate_per_s", ch.dark_rate_per_s);
  ch.window = number(c, "window_ns", 1.0) * units::ns;
  ch.integration = number(c, "integration_ms", 100.0) * units::ms;
  ch.jitter_fwhm = number(c, "jitter_fwhm_ns", 0.35) * units::ns;
  const std::string topo = text(c, "topology", "pair");
  if (topo == "pair") {
    ch.topology = counting::Topology::pair;
  } else if (topo == "heralded") {
    ch.topology = counting::Topology::heralded;
  } else {
    throw ConfigError("config: chain topology must be 'pair' or 'heralded'");
  }
  ch.validate();
  return ch;
}

inline int cmd_simulate(const RunOptions& opt) {
  const json root = load_json(opt.config);
  const counting::DetectionChain chain = chain_from(root);
  const json& s = section(root, "source");
  counting::SourceRates src{number(s, "pairs_per_s_per_uW", 4.5e5), number(s, "pump_uW", 0.0)};
  src.validate();
  const json& smp = section(root, "sample");
  counting::SampleInteraction sample{number(smp, "photon_transmission", 1.0),
                                     number(smp, "pair_removal", 0.0)};
  sample.validate();
  const std::size_t windows = count(root, "windows", 1);
  const std::size_t tag_windows = count(root, "tag_windows", 1);
  if (windows == 0) throw ConfigError("config: 'windows' must be >= 1");

  ensure_dir(opt.out);
  std::vector<counting::CountSummary> parts(windows);
  std::vector<std::string> tag_files(std::min(windows, tag_windows));
  parallel_for(windows, opt.threads, [&](std::size_t w) {
    const auto tags = counting::simulate_tags(src, chain, counting::derive_seed(opt.seed, w), sample);
    parts[w] = counting::count_coincidences(tags, chain.window);
    if (w < tag_files.size()) {
      char name[32];
      std::snprintf(name, sizeof name, "tags_w%04zu.csv", w);
      std::ostringstream csv;
      counting::write_tags_csv(csv, tags);
      write_file(opt.out / name, csv.str());
      tag_files[w] = name;
    }
  });
  const auto total = counting::aggregate(parts);
  const auto corrected =
      counting::correct_rates(total, std::vector<double>(chain.channels(), chain.dark_rate_per_s));
  const auto eff = counting::chain_efficiencies(chain);

  json out;
  out["command"] = "simulate";
  out["config"] = root;
  out["seed"] = opt.seed;
  out["windows"] = windows;
  out["efficiencies"] = {{"eta_singles", eff.singles}, {"eta_coin", eff.coincidences}};
  out["expected_coincidence_rate_per_s"] = src.pair_rate() * eff.coincidences;
  out["raw"] = counting::to_json(total);
  out["corrected"] = counting::to_json(corrected);
  if (chain.topology == counting::Topology::heralded) {
    try {
      const auto g2 = counting::heralded_g2(total);
      out["g2"] = {{"value", g2.value}, {"err", g2.err}};
    } catch (const UndefinedEstimateError& e) {
      out["g2"] = {{"value", nullptr}, {"reason", e.what()}, {"raw_counts", e.raw_counts()}};
    }
  }
  out["tag_files"] = tag_files;
  write_json(opt.out / "summary.json", out);
  *opt.log << "simulated " << windows << " window(s), coincidences " << total.coincidences[0].rate
           << " /s\n";
  return 0;
}

// ---- etpa-report -----------------------------------------------------------

inline int cmd_etpa_report(const RunOptions& opt) {
  const json root = load_json(opt.config);
  if (!root.contains("scenario")) throw ConfigError("config: missing 'scenario'");
  // Inline object or path to a scenario file.
  const json& sc = root.at("scenario");
  json scenario;
  if (sc.is_string()) {
    const fs::path p = resolve(opt.config, sc.get<std::string>());
    std::ifstream f(p);
    if (!f) throw ConfigError("cannot open scenario file: " + p.string());
    try {
      scenario = json::parse(f);
    } catch (const json::parse_error& e) {
      throw ParseError(p.string() + ": invalid JSON: " + e.what());
    }
  } else {
    scenario = sc;
  }
  const auto report = etpa::evaluate(etpa::parse_scenario(scenario));
  ensure_dir(opt.out);
  json j;
  j["command"] = "etpa-report";
  j["config"] = root;
  j["report"] = etpa::to_json(report);
  write_json(opt.out / "etpa_report.json", j);
  std::ostringstream table;
  etpa::write_text_table(table, report);
  write_file(opt.out / "etpa_report.txt", table.str());
  *opt.log << table.str();
  return 0;
}

// ---- analyze ---------------------------------------------------------------

inline analysis::RateTable read_table(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open rate table: " + path.string());
  try {
    return analysis::ingest_rate_table(f);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline int cmd_analyze(const RunOptions& opt) {
  const json root = load_json(opt.config);
  const fs::path solv_path = resolve(opt.config, text(root, "solvent", ""));
  const fs::path samp_path = resolve(opt.config, text(root, "sample", ""));
  if (!root.contains("solvent") || !root.contains("sample")) {
    throw ConfigError("config: need 'solvent' and 'sample' table paths");
  }
  analysis::RateTable solv = read_table(solv_path);
  analysis::RateTable samp = read_table(samp_path);
  const bool drop = opt.drop_flagged || flag(root, "drop_flagged", false);

  json flagged = json::array();
  auto flag_table = [&](analysis::RateTable& t, const char* which) {
    const auto flags = analysis::flag_rows(t);
    std::vector<bool> bad(t.rows.size(), false);
    for (const auto& f : flags) {
      flagged.push_back({{"table", which},
                         {"line", f.line},
                         {"P_SPDC_pW", t.rows[f.index].p_spdc_pw},
                         {"mode", analysis::to_string(t.rows[f.index].mode)},
                         {"reason", f.reason}});
      bad[f.index] = true;
    }
    return bad;
  };
  const auto bad_solv = flag_table(solv, "solvent");
  const auto bad_samp = flag_table(samp, "sample");
  json dropped = json::array();
  if (drop) {
    // A flagged row removes its partner in the other table as well.
    std::vector<std::string> keys;
    for (std::size_t k = 0; k < solv.rows.size(); ++k)
      if (bad_solv[k]) keys.push_back(analysis::row_key(solv.rows[k]));
    for (std::size_t k = 0; k < samp.rows.size(); ++k)
      if (bad_samp[k]) keys.push_back(analysis::row_key(samp.rows[k]));
    auto strip = [&](analysis::RateTable& t) {
      std::erase_if(t.rows, [&](const analysis::RateRow& r) {
        return std::find(keys.begin(), keys.end(), analysis::row_key(r)) != keys.end();
      });
    };
    strip(solv);
    strip(samp);
    for (const auto& k : keys) dropped.push_back(k);
  }

  json fits = json::object();
  for (analysis::Mode m : {analysis::Mode::pump, analysis::Mode::spdc}) {
    for (const auto& [name, tbl] : {std::pair{"solvent", solv.select(m)}, std::pair{"sample", samp.select(m)}}) {
      if (tbl.rows.empty()) continue;
      json entry = json::object();
      for (analysis::Model model : {analysis::Model::linear, analysis::Model::quadratic}) {
        try {
          entry[analysis::to_string(model)] = analysis::to_json(analysis::fit_rate_curve(tbl, model));
        } catch (const RankDeficientError& e) {
          entry[analysis::to_string(model)] = {{"error", e.what()}};
        }
      }
      if (entry["linear"].contains("reduced_chi2") && entry["quadratic"].contains("reduced_chi2")) {
        entry["preferred"] = entry["quadratic"]["reduced_chi2"].get<double>() <
                                     entry["linear"]["reduced_chi2"].get<double>()
                                 ? "quadratic"
                                 : "linear";
      }
      fits[std::string(analysis::to_string(m))][name] = entry;
    }
  }

  const auto rabs = analysis::absorption_rate(solv, samp);
  const auto gamma = analysis::biphoton_ratio(solv, samp);
  const auto aligned = analysis::align(solv, samp);

  json rabs_j = json::array(), gamma_j = json::array(), skipped = json::array();
  std::ostringstream csv;
  csv << "P_SPDC_pW,mode,R_trans_solv,R_trans_solv_err,R_trans_samp,R_trans_samp_err,R_abs,R_abs_err,"
         "Gamma,Gamma_err,skipped\n";
  csv.precision(10);
  for (std::size_t k = 0; k < aligned.size(); ++k) {
    const auto& a = aligned[k];
    const auto& g = gamma[k];
    rabs_j.push_back({{"P_SPDC_pW", rabs[k].p_spdc_pw},
                      {"mode", analysis::to_string(rabs[k].mode)},
                      {"R_abs", rabs[k].r_abs},
                      {"R_abs_err", rabs[k].r_abs_err}});
    if (g.skipped) {
      skipped.push_back({{"P_SPDC_pW", g.p_spdc_pw}, {"mode", analysis::to_string(g.mode)}, {"reason", g.skip_reason}});
    } else {
      gamma_j.push_back({{"P_SPDC_pW", g.p_spdc_pw},
                         {"mode", analysis::to_string(g.mode)},
                         {"Gamma", g.gamma},
                         {"Gamma_err", g.gamma_err}});
    }
    csv << a.solv->p_spdc_pw << ',' << analysis::to_string(a.solv->mode) << ',' << a.solv->r_coin << ','
        << a.solv->r_coin_err << ',' << a.samp->r_coin << ',' << a.samp->r_coin_err << ',' << rabs[k].r_abs
        << ',' << rabs[k].r_abs_err << ',';
    if (g.skipped) {
      csv << ",,1\n";
    } else {
      csv << g.gamma << ',' << g.gamma_err << ",0\n";
    }
  }

  ensure_dir(opt.out);
  json report;
  report["command"] = "analyze";
  report["config"] = root;
  report["resolved"] = {{"solvent", fs::weakly_canonical(solv_path).string()},
                        {"sample", fs::weakly_canonical(samp_path).string()},
                        {"drop_flagged", drop}};
  report["fits"] = fits;
  report["R_abs"] = rabs_j;
  report["Gamma"] = gamma_j;
  report["skipped"] = skipped;
  report["flagged"] = flagged;
  report["dropped"] = dropped;
  write_json(opt.out / "analysis_report.json", report);
  write_file(opt.out / "analysis_plot.csv", csv.str());
  *opt.log << "analyzed " << aligned.size() << " aligned rows, " << skipped.size() << " skipped, "
           << flagged.size() << " flagged\n";
  return 0;
}

// Dispatch by subcommand name.
inline int run(const std::string& command, const RunOptions& opt) {
  if (command == "tuning-curve") return cmd_tuning_curve(opt);
  if (command == "jsa") return cmd_jsa(opt);
  if (command == "simulate") return cmd_simulate(opt);
  if (command == "etpa-report") return cmd_etpa_report(opt);
  if (command == "analyze") return cmd_analyze(opt);
  throw ConfigError("unknown command: " + command);
}

// Exit code for an exception escaping a command.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e)) return 2;
  return 1;
}

}  // namespace spdclab::cli
