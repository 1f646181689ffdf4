#pragma once

// Temperature-dependent Sellmeier model for the extraordinary index of
// MgO-doped congruent lithium niobate, with analytic first and second
// wavelength derivatives.
//
// Coefficients are loaded from a key/value material file (grammar in
// docs/materials.md). Evaluation outside the file's validity window throws
// DomainError instead of extrapolating.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>

#include "spdclab/error.hpp"
#include "spdclab/units.hpp"

namespace spdclab::dispersion {

struct ValidityWindow {
  double lambda_min_um = 0.0;
  double lambda_max_um = 0.0;
  double temperature_min_c = 0.0;
  double temperature_max_c = 0.0;

  bool contains(double lambda_um, double t_c) const {
    return lambda_um >= lambda_min_um && lambda_um <= lambda_max_um &&
           t_c >= temperature_min_c && t_c <= temperature_max_c;
  }
};

// n^2 = a1 + b1 f + (a2 + b2 f)/(l^2 - (a3 + b3 f)^2) + (a4 + b4 f)/(l^2 - a5^2) - a6 l^2
// with f = (T - 24.5)(T + 570.82), l in um, T in deg C.
struct GayerCoefficients {
  std::array<double, 6> a{};
  std::array<double, 4> b{};
};

class SellmeierModel {
 public:
  SellmeierModel(std::string id, std::string material, std::string polarization,
                 GayerCoefficients coefficients, ValidityWindow validity)
      : id_(std::move(id)),
        material_(std::move(material)),
        polarization_(std::move(polarization)),
        coefficients_(coefficients),
        validity_(validity) {}

  static SellmeierModel parse(std::string_view text);
  static SellmeierModel from_file(const std::filesystem::path& path);

  const std::string& id() const { return id_; }
  const std::string& material() const { return material_; }
  const std::string& polarization() const { return polarization_; }
  const GayerCoefficients& coefficients() const { return coefficients_; }
  const ValidityWindow& validity() const { return validity_; }

  // Throws DomainError naming the violated bound.
  void check_domain(double lambda_um, double t_c) const;

  // Unchecked evaluators in the file's native units (um, deg C).
  double index_um(double lambda_um, double t_c) const;
  double dn_dlambda_um(double lambda_um, double t_c) const;    // 1/um
  double d2n_dlambda2_um(double lambda_um, double t_c) const;  // 1/um^2

 private:
  struct Terms {
    double s;      // n^2
    double ds;     // d(n^2)/dl
    double d2s;    // d^2(n^2)/dl^2
  };
  Terms terms(double lambda_um, double t_c) const;

  std::string id_;
  std::string material_;
  std::string polarization_;
  GayerCoefficients coefficients_;
  ValidityWindow validity_;
};

using ModelPtr = std::shared_ptr<const SellmeierModel>;

// Path of a material file shipped in data/materials.
inline std::filesystem::path bundled_material_path(std::string_view id) {
  return std::filesystem::path(SPDCLAB_DATA_DIR) / "materials" / (std::string(id) + ".txt");
}

inline ModelPtr load_bundled(std::string_view id = "mgo_cln_e_gayer2008") {
  return std::make_shared<const SellmeierModel>(
      SellmeierModel::from_file(bundled_material_path(id)));
}

double refractive_index(const SellmeierModel& model, units::Length lambda, Celsius t);
double group_index(const SellmeierModel& model, units::Length lambda, Celsius t);
units::GroupDelayDispersion group_delay_dispersion(const SellmeierModel& model,
                                                   units::Length lambda, Celsius t,
                                                   units::Length length);

// k = n(omega) omega / c0.
units::WaveNumber wave_number(const SellmeierModel& model, units::Length lambda, Celsius t);

// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline double to_double(const std::string& v, std::size_t line, const std::string& key) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ParseError("material file: value of '" + key + "' is not a number: '" + v + "'",
                     line);
  }
}

}  // namespace detail

inline SellmeierModel SellmeierModel::parse(std::string_view text) {
  std::map<std::string, std::pair<std::string, std::size_t>> header, validity, coeffs;
  auto* section = &header;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line == "[validity]") {
        section = &validity;
      } else if (line == "[coefficients]") {
        section = &coeffs;
      } else {
        throw ParseError("material file: unknown section " + line, line_no);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("material file: expected key = value", line_no);
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError("material file: empty key or value", line_no);
    if (!section->emplace(key, std::make_pair(value, line_no)).second) {
      throw ParseError("material file: duplicate key '" + key + "'", line_no);
    }
  }

  auto require = [](auto& map, const std::string& key) -> std::pair<std::string, std::size_t>& {
    auto it = map.find(key);
    if (it == map.end()) throw ParseError("material file: missing key '" + key + "'");
    return it->second;
  };
  auto number = [&](auto& map, const std::string& key) {
    auto& [v, line] = require(map, key);
    return detail::to_double(v, line, key);
  };

  if (require(header, "format_version").first != "1") {
    throw ParseError("material file: unsupported format_version",
                     require(header, "format_version").second);
  }
  if (require(header, "form").first != "gayer2008") {
    throw ParseError("material file: unsupported form '" + require(header, "form").first + "'",
                     require(header, "form").second);
  }

  ValidityWindow w{number(validity, "lambda_min_um"), number(validity, "lambda_max_um"),
                   number(validity, "temperature_min_C"), number(validity, "temperature_max_C")};
  if (!(w.lambda_min_um > 0 && w.lambda_max_um > w.lambda_min_um &&
        w.temperature_max_c > w.temperature_min_c)) {
    throw ParseError("material file: empty or inverted validity window");
  }

  GayerCoefficients c;
  for (std::size_t i = 0; i < c.a.size(); ++i) c.a[i] = number(coeffs, "a" + std::to_string(i + 1));
  for (std::size_t i = 0; i < c.b.size(); ++i) c.b[i] = number(coeffs, "b" + std::to_string(i + 1));

  return SellmeierModel(require(header, "id").first, require(header, "material").first,
                        require(header, "polarization").first, c, w);
}

inline SellmeierModel SellmeierModel::from_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open material file: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

inline void SellmeierModel::check_domain(double lambda_um, double t_c) const {
  auto fail = [&](const std::string& what) {
    std::ostringstream msg;
    msg << "Sellmeier model '" << id_ << "': " << what;
    throw DomainError(msg.str());
  };
  if (!std::isfinite(lambda_um) || !std::isfinite(t_c)) fail("non-finite input");
  if (lambda_um < validity_.lambda_min_um)
    fail("wavelength " + std::to_string(lambda_um) + " um below lambda_min_um = " +
         std::to_string(validity_.lambda_min_um));
  if (lambda_um > validity_.lambda_max_um)
    fail("wavelength " + std::to_string(lambda_um) + " um above lambda_max_um = " +
         std::to_string(validity_.lambda_max_um));
  if (t_c < validity_.temperature_min_c)
    fail("temperature " + std::to_string(t_c) + " C below temperature_min_C = " +
         std::to_string(validity_.temperature_min_c));
  if (t_c > validity_.temperature_max_c)
    fail("temperature " + std::to_string(t_c) + " C above temperature_max_C = " +
         std::to_string(validity_.temperature_max_c));
}

inline SellmeierModel::Terms SellmeierModel::terms(double l, double t) const {
  const auto& a = coefficients_.a;
  const auto& b = coefficients_.b;
  const double f = (t - 24.5) * (t + 570.82);
  const double l2 = l * l;
  const double pole1 = a[2] + b[2] * f;
  const double u = l2 - pole1 * pole1;
  const double v = l2 - a[4] * a[4];
  const double p = a[1] + b[1] * f;
  const double q = a[3] + b[3] * f;

  Terms r;
  r.s = a[0] + b[0] * f + p / u + q / v - a[5] * l2;
  // d/dl [p/u] = -2 l p / u^2, d2/dl2 = -2 p / u^2 + 8 l^2 p / u^3
  r.ds = -2.0 * l * (p / (u * u) + q / (v * v) + a[5]);
  r.d2s = -2.0 * (p / (u * u) + q / (v * v) + a[5]) +
          8.0 * l2 * (p / (u * u * u) + q / (v * v * v));
  return r;
}

inline double SellmeierModel::index_um(double l, double t) const {
  return std::sqrt(terms(l, t).s);
}

inline double SellmeierModel::dn_dlambda_um(double l, double t) const {
  const Terms r = terms(l, t);
  return r.ds / (2.0 * std::sqrt(r.s));
}

inline double SellmeierModel::d2n_dlambda2_um(double l, double t) const {
  const Terms r = terms(l, t);
  const double n = std::sqrt(r.s);
  const double dn = r.ds / (2.0 * n);
  return (r.d2s - 2.0 * dn * dn) / (2.0 * n);
}

inline double refractive_index(const SellmeierModel& model, units::Length lambda, Celsius t) {
  const double l = lambda / units::um;
  model.check_domain(l, t.value);
  return model.index_um(l, t.value);
}

inline double group_index(const SellmeierModel& model, units::Length lambda, Celsius t) {
  const double l = lambda / units::um;
  model.check_domain(l, t.value);
  return model.index_um(l, t.value) - l * model.dn_dlambda_um(l, t.value);
}

// d^2k/domega^2 = lambda^3 / (2 pi c^2) * d^2n/dlambda^2
inline units::GroupDelayDispersion group_delay_dispersion(const SellmeierModel& model,
                                                          units::Length lambda, Celsius t,
                                                          units::Length length) {
  const double l = lambda / units::um;
  model.check_domain(l, t.value);
  const double d2n_si = model.d2n_dlambda2_um(l, t.value) * 1e12;  // 1/m^2
  const double lam = lambda.si();
  const double c = constants::c0.si();
  const double beta2 = lam * lam * lam / (2.0 * constants::pi * c * c) * d2n_si;
  return units::GroupDelayDispersion::from_si(beta2 * length.si());
}

inline units::WaveNumber wave_number(const SellmeierModel& model, units::Length lambda,
                                     Celsius t) {
  const double n = refractive_index(model, lambda, t);
  return units::WaveNumber::from_si(2.0 * constants::pi * n / lambda.si());
}

}  // namespace spdclab::dispersion
