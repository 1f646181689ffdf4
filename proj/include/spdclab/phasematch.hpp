#pragma once

// Collinear quasi-phase matching for type-0 down-conversion in a periodically
// poled crystal: wave-vector mismatch, degeneracy-temperature search and
// signal/idler tuning curves.

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spdclab/dispersion.hpp"
#include "spdclab/error.hpp"
#include "spdclab/parallel.hpp"
#include "spdclab/units.hpp"

namespace spdclab::phasematch {

struct CrystalConfig {
  dispersion::ModelPtr material;
  units::Length length = 20.0 * units::mm;
  units::Length poling_period = 2.72 * units::um;
  Celsius temperature{59.4};
  // Added to every temperature before the material model is evaluated. Stands
  // in for the unknown waveguide dispersion; see calibration_offset_for().
  double calibration_offset_c = 0.0;

  Celsius material_temperature() const { return temperature + calibration_offset_c; }
  Celsius material_temperature(Celsius theta) const { return theta + calibration_offset_c; }
  units::WaveNumber grating_vector() const {
    return units::WaveNumber::from_si(2.0 * constants::pi / poling_period.si());
  }

  void validate() const {
    if (!material) throw ConfigError("crystal: no material model");
    if (!(length.si() > 0)) throw ConfigError("crystal: length must be > 0");
    if (!(poling_period.si() > 0)) throw ConfigError("crystal: poling period must be > 0");
  }
};

// One phase-matched triple. The idler is always derived from energy
// conservation, never stored.
struct PhaseMatchPoint {
  units::AngularFrequency omega_p;
  units::AngularFrequency omega_s;
  units::WaveNumber delta_k;
  Celsius theta;
  int branch = 0;

  units::AngularFrequency omega_i() const { return omega_p - omega_s; }
  units::Length lambda_p() const { return OpticalFrequency(omega_p).wavelength(); }
  units::Length lambda_s() const { return OpticalFrequency(omega_s).wavelength(); }
  units::Length lambda_i() const { return OpticalFrequency(omega_i()).wavelength(); }
};

// ---- core evaluation -------------------------------------------------------

namespace detail {

// k(omega) in SI for a material temperature, domain-checked.
inline double k_si(const dispersion::SellmeierModel& m, double omega, double t_material) {
  const double lambda_um = 2.0 * constants::pi * constants::c0.si() / omega * 1e6;
  m.check_domain(lambda_um, t_material);
  return m.index_um(lambda_um, t_material) * omega / constants::c0.si();
}

inline double delta_k_si(const CrystalConfig& cfg, double omega_p, double omega_s,
                         double t_material) {
  const double omega_i = omega_p - omega_s;
  if (!(omega_i > 0) || !(omega_s > 0)) {
    throw DomainError("phase matching: signal frequency must lie strictly between 0 and pump");
  }
  const auto& m = *cfg.material;
  return k_si(m, omega_p, t_material) - k_si(m, omega_s, t_material) -
         k_si(m, omega_i, t_material) - cfg.grating_vector().si();
}

}  // namespace detail

// Delta k = k_p - k_s - k_i - 2 pi / Lambda, indices at theta + calibration offset.
inline units::WaveNumber delta_k(const CrystalConfig& cfg, units::Length lambda_p,
                                 units::Length lambda_s) {
  cfg.validate();
  const double wp = OpticalFrequency::from_wavelength(lambda_p).omega().si();
  const double ws = OpticalFrequency::from_wavelength(lambda_s).omega().si();
  return units::WaveNumber::from_si(
      detail::delta_k_si(cfg, wp, ws, cfg.material_temperature().value));
}

inline units::WaveNumber delta_k(const CrystalConfig& cfg, OpticalFrequency pump,
                                 OpticalFrequency signal) {
  cfg.validate();
  return units::WaveNumber::from_si(detail::delta_k_si(
      cfg, pump.omega().si(), signal.omega().si(), cfg.material_temperature().value));
}

// ---- root finding ----------------------------------------------------------

struct RootSearch {
  std::size_t scan_points = 200;
  double f_tolerance = 0.0;   // stop once |f| <= f_tolerance
  double x_tolerance = 0.0;   // stop once the bracket is narrower
  std::size_t max_iterations = 200;
};

// Coarse scan for the first sign change on [lo, hi], then bisection.
// Returns nullopt if no sign change exists on the scan grid.
inline std::optional<double> bracket_and_bisect(const std::function<double(double)>& f,
                                                double lo, double hi,
                                                const RootSearch& opt) {
  const std::size_t n = std::max<std::size_t>(opt.scan_points, 2);
  double x_prev = lo;
  double f_prev = f(lo);
  if (f_prev == 0.0) return lo;
  for (std::size_t i = 1; i < n; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    const double fx = f(x);
    if (fx == 0.0) return x;
    if ((fx < 0) != (f_prev < 0)) {
      double a = x_prev, fa = f_prev, b = x;
      for (std::size_t it = 0; it < opt.max_iterations; ++it) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) break;
        const double fm = f(mid);
        if (std::abs(fm) <= opt.f_tolerance) return mid;
        if ((fm < 0) == (fa < 0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
        if (std::abs(b - a) <= opt.x_tolerance) break;
      }
      return 0.5 * (a + b);
    }
    x_prev = x;
    f_prev = fx;
  }
  return std::nullopt;
}

// Root of an arbitrary Delta k(theta) on [lo, hi] (deg C). Exposed so the
// solver can be exercised on injected functions.
inline Celsius find_degeneracy_temperature(const std::function<double(double)>& delta_k_of_theta,
                                           double lo, double hi, double f_tolerance,
                                           std::size_t scan_points = 200) {
  RootSearch opt;
  opt.scan_points = scan_points;
  opt.f_tolerance = f_tolerance;
  opt.x_tolerance = 0.0;  // run to floating-point convergence unless f_tolerance hits
  opt.max_iterations = 200;
  auto root = bracket_and_bisect(delta_k_of_theta, lo, hi, opt);
  if (!root) {
    std::ostringstream msg;
    msg << "no phase matching in range: Delta k has no sign change for theta in [" << lo << ", "
        << hi << "] C";
    throw NoPhaseMatchError(msg.str(), lo, hi);
  }
  return Celsius{*root};
}

// Temperature (on the configured, offset-applied scale) at which the
// degenerate pair lambda_s = lambda_i = 2 lambda_p is phase matched. The search
// covers the material's whole validity window. Converges to well below the
// 1e-6 * (2 pi / Lambda) acceptance bound so that tuning curves evaluated at the
// returned temperature see a numerically double root.
inline Celsius find_degeneracy_temperature(const CrystalConfig& cfg, units::Length lambda_p) {
  cfg.validate();
  const auto& w = cfg.material->validity();
  const double wp = OpticalFrequency::from_wavelength(lambda_p).omega().si();
  auto f = [&](double theta) {
    return detail::delta_k_si(cfg, wp, 0.5 * wp, cfg.material_temperature(Celsius{theta}).value);
  };
  const double lo = w.temperature_min_c - cfg.calibration_offset_c;
  const double hi = w.temperature_max_c - cfg.calibration_offset_c;
  return find_degeneracy_temperature(f, lo, hi, 1e-12 * cfg.grating_vector().si());
}

// Offset that maps the model's degeneracy temperature onto `measured`.
// Using it as calibration_offset_c makes find_degeneracy_temperature return
// `measured`.
inline double calibration_offset_for(CrystalConfig cfg, units::Length lambda_p, Celsius measured) {
  cfg.calibration_offset_c = 0.0;
  const Celsius model = find_degeneracy_temperature(cfg, lambda_p);
  return model.value - measured.value;
}

// ---- tuning curves ---------------------------------------------------------

struct TuningOptions {
  std::size_t scan_points = 500;
  units::Length lambda_tolerance = 1e-4 * units::nm;
  // Split below which the local quadratic fit reports a degenerate double root.
  units::Length degeneracy_resolution = 1e-3 * units::nm;
  unsigned threads = 1;
};

struct TuningRow {
  Celsius theta;
  std::vector<PhaseMatchPoint> points;  // ordered by decreasing lambda_s; branch = index
  bool degenerate = false;
  // Local quadratic fit of Delta k(Omega) around degeneracy: c0 + c1 Omega + c2 Omega^2.
  double discriminant = 0.0;
};

// Least-squares quadratic through symmetric samples at Omega = j*h, j = -2..2.
struct QuadraticFit {
  double c0, c1, c2;
  double discriminant() const { return c1 * c1 - 4.0 * c2 * c0; }
};

inline QuadraticFit fit_symmetric_quadratic(const std::array<double, 5>& y, double h) {
  // Normal equations for x in {-2,-1,0,1,2}: sum x^2 = 10, sum x^4 = 34.
  const double s0 = y[0] + y[1] + y[2] + y[3] + y[4];
  const double s1 = -2 * y[0] - y[1] + y[3] + 2 * y[4];
  const double s2 = 4 * y[0] + y[1] + y[3] + 4 * y[4];
  const double b = s1 / 10.0;
  // [5 10; 10 34] [a; c] = [s0; s2]
  const double det = 5.0 * 34.0 - 10.0 * 10.0;
  const double a = (34.0 * s0 - 10.0 * s2) / det;
  const double c = (5.0 * s2 - 10.0 * s0) / det;
  return {a, b / h, c / (h * h)};
}

inline TuningRow solve_temperature(const CrystalConfig& cfg, double omega_p, Celsius theta,
                                   const TuningOptions& opt) {
  const auto& m = *cfg.material;
  const auto& w = m.validity();
  const double t_mat = cfg.material_temperature(theta).value;
  const double c = constants::c0.si();
  const double lambda_p = 2.0 * constants::pi * c / omega_p;
  const double lambda_deg = 2.0 * lambda_p;

  TuningRow row;
  row.theta = theta;

  // Signal side lambda_s <= 2 lambda_p, with the idler partner still inside
  // the validity window.
  const double lam_max_valid = w.lambda_max_um * 1e-6;
  const double lo_partner = 1.0 / (1.0 / lambda_p - 1.0 / lam_max_valid);
  const double lo = std::max(w.lambda_min_um * 1e-6, lo_partner) * (1.0 + 1e-12);
  const double hi = lambda_deg;
  if (!(lo < hi)) return row;

  auto f = [&](double lambda_s) {
    return detail::delta_k_si(cfg, omega_p, 2.0 * constants::pi * c / lambda_s, t_mat);
  };

  // Local quadratic fit in detuning Omega around degeneracy.
  const double omega_deg = 0.5 * omega_p;
  const double res_omega = 2.0 * constants::pi * c * opt.degeneracy_resolution.si() /
                           (lambda_deg * lambda_deg);
  const double h = std::max(50.0 * res_omega, 1e-6 * omega_deg);
  std::array<double, 5> y{};
  for (int j = -2; j <= 2; ++j) {
    y[static_cast<std::size_t>(j + 2)] =
        detail::delta_k_si(cfg, omega_p, omega_deg + j * h, t_mat);
  }
  const QuadraticFit q = fit_symmetric_quadratic(y, h);
  row.discriminant = q.discriminant();
  if (q.c2 != 0.0) {
    const double centre = -q.c1 / (2.0 * q.c2);
    const double half_split = std::sqrt(std::abs(row.discriminant)) / (2.0 * std::abs(q.c2));
    row.degenerate = std::abs(centre) <= res_omega && half_split <= res_omega;
  }

  // Scan lambda_s and refine every sign change by bisection.
  const std::size_t n = std::max<std::size_t>(opt.scan_points, 3);
  std::vector<double> xs(n), fs(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    fs[i] = f(xs[i]);
  }
  std::vector<double> roots;
  for (std::size_t i = n - 1; i-- > 0;) {
    if (fs[i] == 0.0 || (fs[i] < 0) != (fs[i + 1] < 0)) {
      double a = xs[i], fa = fs[i], b = xs[i + 1];
      if (fa != 0.0) {
        while (b - a > opt.lambda_tolerance.si()) {
          const double mid = 0.5 * (a + b);
          const double fm = f(mid);
          if (fm == 0.0) {
            a = b = mid;
            break;
          }
          if ((fm < 0) == (fa < 0)) {
            a = mid;
            fa = fm;
          } else {
            b = mid;
          }
        }
      } else {
        b = a;
      }
      const double root = 0.5 * (a + b);
      if (row.degenerate && lambda_deg - root <= opt.degeneracy_resolution.si()) continue;
      if (!roots.empty() && std::abs(roots.back() - root) <= opt.lambda_tolerance.si()) continue;
      roots.push_back(root);
    }
  }

  auto make_point = [&](double omega_s, int branch) {
    PhaseMatchPoint p;
    p.omega_p = units::AngularFrequency::from_si(omega_p);
    p.omega_s = units::AngularFrequency::from_si(omega_s);
    p.delta_k = units::WaveNumber::from_si(detail::delta_k_si(cfg, omega_p, omega_s, t_mat));
    p.theta = theta;
    p.branch = branch;
    return p;
  };

  int branch = 0;
  if (row.degenerate) row.points.push_back(make_point(omega_deg, branch++));
  for (double r : roots) row.points.push_back(make_point(2.0 * constants::pi * c / r, branch++));
  return row;
}

// Phase-matched signal/idler pairs for `points` temperatures evenly spaced on
// [theta_lo, theta_hi]. Temperatures without a root yield an empty row.
inline std::vector<TuningRow> tuning_curve(const CrystalConfig& cfg, units::Length lambda_p,
                                           Celsius theta_lo, Celsius theta_hi, std::size_t points,
                                           const TuningOptions& opt = {}) {
  cfg.validate();
  if (points == 0) return {};
  const auto& w = cfg.material->validity();
  for (Celsius t : {theta_lo, theta_hi}) {
    const double tm = cfg.material_temperature(t).value;
    if (tm < w.temperature_min_c || tm > w.temperature_max_c) {
      throw DomainError("tuning curve: temperature " + std::to_string(t.value) +
                        " C maps outside the material validity window");
    }
  }
  const double omega_p = OpticalFrequency::from_wavelength(lambda_p).omega().si();
  std::vector<TuningRow> rows(points);
  parallel_for(points, opt.threads, [&](std::size_t i) {
    const double frac = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    const Celsius theta{theta_lo.value + (theta_hi.value - theta_lo.value) * frac};
    rows[i] = solve_temperature(cfg, omega_p, theta, opt);
  });
  return rows;
}

// Same, pinned to a single temperature.
inline TuningRow phase_matched_pairs(const CrystalConfig& cfg, units::Length lambda_p, Celsius theta,
                                     const TuningOptions& opt = {}) {
  return tuning_curve(cfg, lambda_p, theta, theta, 1, opt).front();
}

// CSV with header theta_C,lambda_s_nm,lambda_i_nm,branch; one line per root.
inline void write_tuning_csv(std::ostream& out, const std::vector<TuningRow>& rows) {
  out << "theta_C,lambda_s_nm,lambda_i_nm,branch\n";
  char buf[128];
  for (const auto& row : rows) {
    for (const auto& p : row.points) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%d\n", row.theta.value,
                    p.lambda_s() / units::nm, p.lambda_i() / units::nm, p.branch);
      out << buf;
    }
  }
}

}  // namespace spdclab::phasematch
