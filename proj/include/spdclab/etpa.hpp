#pragma once

// Entangled two-photon absorption feasibility estimates: entanglement area,
// entangled cross section, per-molecule absorption rates and the rate from
// an illuminated focal volume.

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <set>
#include <string>

#include "json.hpp"
#include "spdclab/error.hpp"
#include "spdclab/units.hpp"

namespace spdclab::etpa {

// Proportionality constant between sigma_e and delta_c / (T_e A_e).
inline constexpr double default_cross_section_constant = 1.0;

struct FocusConfig {
  units::Length wavelength = 810.0 * units::nm;
  double numerical_aperture = 0.6;

  void validate() const {
    if (!(wavelength.si() > 0)) throw ConfigError("focus: wavelength must be > 0");
    if (!(numerical_aperture > 0 && numerical_aperture < 1.5)) {
      throw ConfigError("focus: numerical aperture must lie in (0, 1.5)");
    }
  }
};

// Airy disc area pi/4 (1.22 lambda / NA)^2.
inline units::Area entanglement_area(const FocusConfig& fc) {
  fc.validate();
  const units::Length d = 1.22 * fc.wavelength / fc.numerical_aperture;
  return constants::pi / 4.0 * (d * d);
}

inline units::Area entangled_cross_section(units::TpaCrossSection delta_c, units::Time t_e,
                                           units::Area a_e,
                                           double constant = default_cross_section_constant) {
  if (!(delta_c.si() > 0) || !(t_e.si() > 0) || !(a_e.si() > 0)) {
    throw DomainError("entangled cross section: inputs must be > 0");
  }
  return constant * delta_c / (t_e * a_e);
}

inline units::Flux pair_flux(units::Rate pair_rate, units::Area spot_area) {
  if (!(pair_rate.si() >= 0) || !(spot_area.si() > 0)) {
    throw DomainError("pair flux: need rate >= 0 and area > 0");
  }
  return pair_rate / spot_area;
}

// (mass concentration / molar mass) * N_A, inputs in mg/mL and g/mol.
inline units::NumberDensity molecule_density(double mass_conc_mg_per_ml, double molar_mass_g_per_mol) {
  if (!(mass_conc_mg_per_ml >= 0) || !(molar_mass_g_per_mol > 0)) {
    throw DomainError("molecule density: need concentration >= 0 and molar mass > 0");
  }
  return mass_conc_mg_per_ml * 1e-3 / molar_mass_g_per_mol * constants::avogadro * units::per_mL;
}

inline units::Volume sphere_volume(units::Length diameter) {
  return constants::pi / 6.0 * (diameter * diameter * diameter);
}

// per-molecule rate * density * (pi/6) d^3
inline units::Rate volume_rate(units::Rate per_molecule, units::NumberDensity density,
                               units::Length spot_diameter) {
  if (!(spot_diameter.si() > 0)) throw DomainError("volume rate: spot diameter must be > 0");
  return per_molecule * density * sphere_volume(spot_diameter);
}

struct EtpaScenario {
  units::TpaCrossSection delta_c;
  units::Time t_e;
  units::Area a_e;
  units::Flux phi;
  units::NumberDensity density;
  units::Length spot_diameter;
  double cross_section_constant = default_cross_section_constant;

  // phi and density may be zero (no light, pure solvent).
  void validate() const {
    if (!(delta_c.si() > 0)) throw ConfigError("scenario: delta_c must be > 0");
    if (!(t_e.si() > 0)) throw ConfigError("scenario: T_e must be > 0");
    if (!(a_e.si() > 0)) throw ConfigError("scenario: A_e must be > 0");
    if (!(phi.si() >= 0)) throw ConfigError("scenario: pair flux must be >= 0");
    if (!(density.si() >= 0)) throw ConfigError("scenario: molecule density must be >= 0");
    if (!(spot_diameter.si() > 0)) throw ConfigError("scenario: spot diameter must be > 0");
  }
};

struct TpaRates {
  units::Rate entangled;
  units::Rate classical;
  units::Rate total;
};

inline TpaRates tpa_rate(const EtpaScenario& scn) {
  scn.validate();
  const units::Area sigma_e =
      entangled_cross_section(scn.delta_c, scn.t_e, scn.a_e, scn.cross_section_constant);
  const units::Rate r_e = sigma_e * scn.phi;
  const units::Rate r_c = scn.delta_c * scn.phi * scn.phi;
  return {r_e, r_c, r_e + r_c};
}

// ---- scenario files --------------------------------------------------------

// Scenario as read from JSON. Either the direct quantity or the inputs it is
// derived from must be present.
struct ScenarioInput {
  std::string label;
  double delta_c_GM = 0;
  double T_e_fs = 0;
  std::optional<double> A_e_um2;
  std::optional<double> wavelength_nm;
  std::optional<double> NA;
  std::optional<double> phi_per_cm2_s;
  std::optional<double> pair_rate_per_s;
  std::optional<double> molecule_density_per_mL;
  std::optional<double> concentration_mg_per_mL;
  std::optional<double> molar_mass_g_per_mol;
  double spot_diameter_um = 0;
  double cross_section_constant = default_cross_section_constant;
};

namespace detail {

struct KeySpec {
  const char* key;
  const char* base;  // name without unit suffix
};

inline constexpr KeySpec scenario_keys[] = {
    {"delta_c_GM", "delta_c"},
    {"T_e_fs", "T_e"},
    {"A_e_um2", "A_e"},
    {"wavelength_nm", "wavelength"},
    {"NA", "NA"},
    {"phi_per_cm2_s", "phi"},
    {"pair_rate_per_s", "pair_rate"},
    {"molecule_density_per_mL", "molecule_density"},
    {"concentration_mg_per_mL", "concentration"},
    {"molar_mass_g_per_mol", "molar_mass"},
    {"spot_diameter_um", "spot_diameter"},
    {"cross_section_constant", "cross_section_constant"},
};

}  // namespace detail

// Accepts nlohmann::json or nlohmann::ordered_json.
template <class Json>
ScenarioInput parse_scenario(const Json& j) {
  if (!j.is_object()) throw ParseError("scenario: top level must be an object");
  ScenarioInput in;
  std::set<std::string> seen;
  for (const auto& [key, value] : j.items()) {
    if (key == "label" || key == "comment") {
      if (!value.is_string()) throw ParseError("scenario: '" + key + "' must be a string");
      if (key == "label") in.label = value.template get<std::string>();
      continue;
    }
    const detail::KeySpec* spec = nullptr;
    for (const auto& k : detail::scenario_keys) {
      if (key == k.key) spec = &k;
    }
    if (!spec) {
      for (const auto& k : detail::scenario_keys) {
        if (key == k.base) {
          throw ParseError("scenario: key '" + key + "' has no unit suffix (expected '" +
                           k.key + "')");
        }
      }
      throw ParseError("scenario: unknown key '" + key + "'");
    }
    if (!value.is_number()) throw ParseError("scenario: key '" + key + "' must be a number");
    seen.insert(key);
  }
  auto num = [&](const char* key) { return j.at(key).template get<double>(); };
  auto opt = [&](const char* key) -> std::optional<double> {
    if (seen.count(key)) return num(key);
    return std::nullopt;
  };
  auto require = [&](const char* key) {
    if (!seen.count(key)) throw ParseError(std::string("scenario: missing key '") + key + "'");
    return num(key);
  };
  in.delta_c_GM = require("delta_c_GM");
  in.T_e_fs = require("T_e_fs");
  in.spot_diameter_um = require("spot_diameter_um");
  in.A_e_um2 = opt("A_e_um2");
  in.wavelength_nm = opt("wavelength_nm");
  in.NA = opt("NA");
  in.phi_per_cm2_s = opt("phi_per_cm2_s");
  in.pair_rate_per_s = opt("pair_rate_per_s");
  in.molecule_density_per_mL = opt("molecule_density_per_mL");
  in.concentration_mg_per_mL = opt("concentration_mg_per_mL");
  in.molar_mass_g_per_mol = opt("molar_mass_g_per_mol");
  if (auto c = opt("cross_section_constant")) in.cross_section_constant = *c;

  if (!in.A_e_um2 && !(in.wavelength_nm && in.NA)) {
    throw ParseError("scenario: need 'A_e_um2' or both 'wavelength_nm' and 'NA'");
  }
  if (!in.phi_per_cm2_s && !in.pair_rate_per_s) {
    throw ParseError("scenario: need 'phi_per_cm2_s' or 'pair_rate_per_s'");
  }
  if (!in.molecule_density_per_mL && !(in.concentration_mg_per_mL && in.molar_mass_g_per_mol)) {
    throw ParseError(
        "scenario: need 'molecule_density_per_mL' or both 'concentration_mg_per_mL' and "
        "'molar_mass_g_per_mol'");
  }
  return in;
}

// Every intermediate of the estimate chain.
struct EtpaReport {
  ScenarioInput input;
  EtpaScenario scenario;
  units::Area sigma_e;
  TpaRates per_molecule;
  units::Volume volume;
  units::Rate volume_entangled;
  units::Rate volume_classical;
};

inline EtpaReport evaluate(const ScenarioInput& in) {
  EtpaReport r;
  r.input = in;
  auto& s = r.scenario;
  s.delta_c = in.delta_c_GM * units::GM;
  s.t_e = in.T_e_fs * units::fs;
  s.a_e = in.A_e_um2 ? *in.A_e_um2 * units::um2
                     : entanglement_area({*in.wavelength_nm * units::nm, *in.NA});
  s.phi = in.phi_per_cm2_s ? *in.phi_per_cm2_s * units::per_cm2_s
                           : pair_flux(*in.pair_rate_per_s * units::per_s, s.a_e);
  s.density = in.molecule_density_per_mL
                  ? *in.molecule_density_per_mL * units::per_mL
                  : molecule_density(*in.concentration_mg_per_mL, *in.molar_mass_g_per_mol);
  s.spot_diameter = in.spot_diameter_um * units::um;
  s.cross_section_constant = in.cross_section_constant;
  s.validate();
  r.sigma_e = entangled_cross_section(s.delta_c, s.t_e, s.a_e, s.cross_section_constant);
  r.per_molecule = tpa_rate(s);
  r.volume = sphere_volume(s.spot_diameter);
  r.volume_entangled = volume_rate(r.per_molecule.entangled, s.density, s.spot_diameter);
  r.volume_classical = volume_rate(r.per_molecule.classical, s.density, s.spot_diameter);
  return r;
}

inline nlohmann::ordered_json to_json(const EtpaReport& r) {
  nlohmann::ordered_json j;
  j["label"] = r.input.label;
  j["delta_c_GM"] = r.scenario.delta_c / units::GM;
  j["T_e_fs"] = r.scenario.t_e / units::fs;
  j["A_e_um2"] = r.scenario.a_e / units::um2;
  j["sigma_e_cm2"] = r.sigma_e / units::cm2;
  j["phi_per_cm2_s"] = r.scenario.phi / units::per_cm2_s;
  j["R_eTPA_per_s_per_molecule"] = r.per_molecule.entangled / units::per_s;
  j["R_cTPA_per_s_per_molecule"] = r.per_molecule.classical / units::per_s;
  j["R_total_per_s_per_molecule"] = r.per_molecule.total / units::per_s;
  j["molecule_density_per_mL"] = r.scenario.density / units::per_mL;
  j["spot_diameter_um"] = r.scenario.spot_diameter / units::um;
  j["illuminated_volume_mL"] = r.volume / units::mL;
  j["R_eTPA_volume_per_s"] = r.volume_entangled / units::per_s;
  j["R_cTPA_volume_per_s"] = r.volume_classical / units::per_s;
  return j;
}

inline void write_text_table(std::ostream& out, const EtpaReport& r) {
  struct Row {
    const char* name;
    double value;
    const char* unit;
  };
  const Row rows[] = {
      {"entanglement area A_e", r.scenario.a_e / units::um2, "um^2"},
      {"entangled cross section sigma_e", r.sigma_e / units::cm2, "cm^2"},
      {"pair flux phi", r.scenario.phi / units::per_cm2_s, "1/(cm^2 s)"},
      {"R_eTPA per molecule", r.per_molecule.entangled / units::per_s, "1/s"},
      {"R_cTPA per molecule", r.per_molecule.classical / units::per_s, "1/s"},
      {"molecule density", r.scenario.density / units::per_mL, "1/mL"},
      {"illuminated volume", r.volume / units::mL, "mL"},
      {"R_eTPA in volume", r.volume_entangled / units::per_s, "1/s"},
      {"R_cTPA in volume", r.volume_classical / units::per_s, "1/s"},
  };
  char buf[160];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%-34s %14.4e  %s\n", row.name, row.value, row.unit);
    out << buf;
  }
}

}  // namespace spdclab::etpa
