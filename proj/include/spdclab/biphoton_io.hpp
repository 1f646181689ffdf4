#pragma once

// CSV matrix export/import for joint spectra. Layout:
//
//   # domain: spectral
//   # quantity: intensity
//   # axis_s (rad/s): w0,w1,...
//   # axis_i (rad/s): w0,w1,...
//   v00,v01,...        one line per signal sample
//
// Spectral axes may also be given in nm on import; they are converted to
// angular frequency and resampled onto a uniform grid.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "spdclab/biphoton.hpp"

namespace spdclab::biphoton {

namespace detail {

inline void write_axis(std::ostream& out, const char* name, const char* unit,
                       const std::vector<double>& axis, double scale) {
  out << "# " << name << " (" << unit << "): ";
  char buf[32];
  for (std::size_t k = 0; k < axis.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.12e", axis[k] * scale);
    out << (k ? "," : "") << buf;
  }
  out << '\n';
}

inline std::vector<double> split_numbers(const std::string& s, std::size_t line) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      const auto first = cell.find_first_not_of(' ');
      const std::string c = first == std::string::npos ? "" : cell.substr(first);
      v.push_back(std::stod(c, &used));
      if (used != c.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("matrix csv: not a number: '" + cell + "'", line);
    }
  }
  return v;
}

// Linear interpolation of y(x) at xq, x strictly monotone (either direction).
inline std::vector<double> interp_weights(const std::vector<double>& x, double xq, std::size_t& lo) {
  const bool inc = x.back() > x.front();
  std::size_t a = 0, b = x.size() - 1;
  while (b - a > 1) {
    const std::size_t mid = (a + b) / 2;
    if ((x[mid] <= xq) == inc) a = mid; else b = mid;
  }
  lo = a;
  const double t = (xq - x[a]) / (x[a + 1] - x[a]);
  return {1.0 - t, t};
}

}  // namespace detail

// Writes |value|^2 (quantity "intensity"). Spectral axes in rad/s, temporal in fs.
inline void write_matrix_csv(std::ostream& out, const JointSpectrum& js) {
  const bool spectral = js.domain == Domain::spectral;
  out << "# domain: " << to_string(js.domain) << '\n';
  out << "# quantity: intensity\n";
  const char* unit = spectral ? "rad/s" : "fs";
  const double scale = spectral ? 1.0 : 1e15;
  detail::write_axis(out, "axis_s", unit, js.axis_s, scale);
  detail::write_axis(out, "axis_i", unit, js.axis_i, scale);
  char buf[32];
  for (std::size_t i = 0; i < js.rows(); ++i) {
    for (std::size_t j = 0; j < js.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.6e", js.intensity(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

inline nlohmann::ordered_json sidecar_json(const JointSpectrum& js) {
  const bool spectral = js.domain == Domain::spectral;
  return {{"format", "spdclab-matrix-csv"},
          {"format_version", 1},
          {"domain", to_string(js.domain)},
          {"quantity", "intensity"},
          {"axis_s_unit", spectral ? "rad/s" : "fs"},
          {"axis_i_unit", spectral ? "rad/s" : "fs"},
          {"rows", js.rows()},
          {"cols", js.cols()},
          {"normalized", js.normalized},
          {"measured", js.measured}};
}

// Reads an intensity matrix in the spectral domain. Values land in the real
// part; the result is not normalized.
inline JointSpectrum read_matrix_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> ax_s, ax_i;
  std::string unit_s, unit_i, domain = "spectral";
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string key = line.substr(1, colon - 1);
      key.erase(0, key.find_first_not_of(' '));
      const std::string rest = line.substr(colon + 1);
      auto parse_axis = [&](std::vector<double>& axis, std::string& unit) {
        const auto open = key.find('('), close = key.find(')');
        if (open == std::string::npos || close == std::string::npos || close < open) {
          throw ParseError("matrix csv: axis header needs a unit in parentheses", line_no);
        }
        unit = key.substr(open + 1, close - open - 1);
        axis = detail::split_numbers(rest, line_no);
      };
      if (key.rfind("axis_s", 0) == 0) {
        parse_axis(ax_s, unit_s);
      } else if (key.rfind("axis_i", 0) == 0) {
        parse_axis(ax_i, unit_i);
      } else if (key == "domain") {
        domain = rest.substr(rest.find_first_not_of(' '));
      }
      continue;
    }
    rows.push_back(detail::split_numbers(line, line_no));
    if (rows.back().size() != ax_i.size()) {
      throw ParseError("matrix csv: row has " + std::to_string(rows.back().size()) +
                           " values, axis_i has " + std::to_string(ax_i.size()),
                       line_no);
    }
  }
  if (domain != "spectral") throw ParseError("matrix csv: only spectral matrices can be imported");
  if (ax_s.size() < 2 || ax_i.size() < 2) throw ParseError("matrix csv: missing or short axis header");
  if (rows.size() != ax_s.size()) {
    throw ParseError("matrix csv: " + std::to_string(rows.size()) + " rows, axis_s has " +
                     std::to_string(ax_s.size()));
  }
  for (const auto* u : {&unit_s, &unit_i}) {
    if (*u != "rad/s" && *u != "nm") throw ParseError("matrix csv: axis unit must be rad/s or nm, got '" + *u + "'");
  }

  const double two_pi_c = 2.0 * constants::pi * constants::c0.si();
  auto to_omega = [&](std::vector<double> axis, const std::string& unit) {
    if (unit == "nm") {
      for (double& v : axis) {
        if (!(v > 0)) throw ParseError("matrix csv: wavelength axis must be positive");
        v = two_pi_c / (v * 1e-9);
      }
    }
    for (std::size_t k = 1; k < axis.size(); ++k) {
      if ((axis[k] > axis[k - 1]) != (axis[1] > axis[0]) || axis[k] == axis[k - 1]) {
        throw ParseError("matrix csv: axis is not strictly monotone");
      }
    }
    return axis;
  };
  const auto ws = to_omega(ax_s, unit_s);
  const auto wi = to_omega(ax_i, unit_i);
  auto uniform = [](const std::vector<double>& w) {
    const double lo = std::min(w.front(), w.back()), hi = std::max(w.front(), w.back());
    std::vector<double> u(w.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
      u[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(u.size() - 1);
    }
    u.back() = hi;
    return u;
  };

  JointSpectrum js;
  js.axis_s = uniform(ws);
  js.axis_i = uniform(wi);
  js.domain = Domain::spectral;
  js.measured = true;
  js.values.assign(js.rows() * js.cols(), complex{});
  // Bilinear resampling; exact copy (up to ordering) when the input is already uniform.
  for (std::size_t a = 0; a < js.rows(); ++a) {
    std::size_t i0;
    const auto ws_w = detail::interp_weights(ws, js.axis_s[a], i0);
    for (std::size_t b = 0; b < js.cols(); ++b) {
      std::size_t j0;
      const auto wi_w = detail::interp_weights(wi, js.axis_i[b], j0);
      double v = 0;
      for (int di = 0; di < 2; ++di)
        for (int dj = 0; dj < 2; ++dj) v += ws_w[di] * wi_w[dj] * rows[i0 + di][j0 + dj];
      js.at(a, b) = complex(v, 0.0);
    }
  }
  js.frequency_origin = {js.axis_s.front(), js.axis_i.front()};
  js.frequency_step = {js.axis_s[1] - js.axis_s[0], js.axis_i[1] - js.axis_i[0]};
  return js;
}

}  // namespace spdclab::biphoton
