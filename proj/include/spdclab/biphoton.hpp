#pragma once

// Joint spectral amplitude of a type-0 pair source, fiber dispersion phase,
// transform to the joint temporal amplitude, and entanglement-time
// extraction.
//
// Conventions
//   JSA f(ws, wi) = alpha(ws + wi) * sinc(Delta k(ws, wi) L / 2)
//   JTA g(ts, ti) = 1/(2 pi) * integral f(ws, wi) exp(-i(ws ts + wi ti)) dws dwi
// The discrete transform is unitary with measure dws dwi <-> dts dti, so
// sum |f|^2 dws dwi == sum |g|^2 dts dti up to rounding.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "spdclab/dispersion.hpp"
#include "spdclab/error.hpp"
#include "spdclab/fft.hpp"
#include "spdclab/parallel.hpp"
#include "spdclab/phasematch.hpp"
#include "spdclab/units.hpp"

namespace spdclab::biphoton {

using complex = std::complex<double>;

enum class Domain { spectral, temporal };

inline const char* to_string(Domain d) { return d == Domain::spectral ? "spectral" : "temporal"; }

// Complex amplitude on a rows x cols grid, row index = signal axis.
// Spectral axes are angular frequency (rad/s); temporal axes are time (s).
struct JointSpectrum {
  std::vector<double> axis_s;
  std::vector<double> axis_i;
  std::vector<complex> values;
  Domain domain = Domain::spectral;
  bool normalized = false;
  bool measured = false;
  // Frequency grid (origin, step) per axis. Kept through to_temporal so that
  // to_spectral reproduces the original axes.
  std::array<double, 2> frequency_origin{};
  std::array<double, 2> frequency_step{};

  std::size_t rows() const { return axis_s.size(); }
  std::size_t cols() const { return axis_i.size(); }
  complex& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
  const complex& at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
  double intensity(std::size_t i, std::size_t j) const { return std::norm(at(i, j)); }
};

// Step of a uniform, strictly increasing axis. Throws DomainError otherwise.
inline double uniform_step(const std::vector<double>& axis, const char* name = "axis") {
  if (axis.size() < 2) throw DomainError(std::string(name) + ": need at least two samples");
  const double step = (axis.back() - axis.front()) / static_cast<double>(axis.size() - 1);
  if (!(step > 0)) throw DomainError(std::string(name) + ": not strictly increasing");
  for (std::size_t k = 1; k < axis.size(); ++k) {
    const double d = axis[k] - axis[k - 1];
    if (!(d > 0) || std::abs(d - step) > 1e-6 * step) {
      throw DomainError(std::string(name) + ": non-uniform spacing at sample " +
                        std::to_string(k));
    }
  }
  return step;
}

// sum |f|^2 * d_s * d_i
inline double total_mass(const JointSpectrum& js) {
  const double ds = uniform_step(js.axis_s, "axis_s");
  const double di = uniform_step(js.axis_i, "axis_i");
  double sum = 0.0;
  for (const auto& v : js.values) sum += std::norm(v);
  return sum * ds * di;
}

inline void normalize(JointSpectrum& js) {
  const double mass = total_mass(js);
  if (!(mass > 0)) throw CoverageError("joint spectrum has zero total intensity", 1.0);
  const double scale = 1.0 / std::sqrt(mass);
  for (auto& v : js.values) v *= scale;
  js.normalized = true;
}

// ---- model ingredients -----------------------------------------------------

struct PumpEnvelope {
  units::AngularFrequency omega_p;
  units::AngularFrequency sigma_p;

  // sigma_p from the FWHM of the pump power spectrum |alpha|^2, given in
  // wavelength. |alpha|^2 = exp(-d^2 / sigma^2) has FWHM 2 sqrt(ln 2) sigma.
  static PumpEnvelope from_linewidth(units::Length lambda_p, units::Length fwhm) {
    const double lp = lambda_p.si();
    const double fwhm_omega = 2.0 * constants::pi * constants::c0.si() * fwhm.si() / (lp * lp);
    return {OpticalFrequency::from_wavelength(lambda_p).omega(),
            units::AngularFrequency::from_si(fwhm_omega / (2.0 * std::sqrt(std::numbers::ln2)))};
  }

  void validate() const {
    if (!(sigma_p.si() > 0)) throw ConfigError("pump envelope: sigma_p must be > 0");
  }
};

struct FiberDispersion {
  units::GroupDelayDispersion beta{};
  units::AngularFrequency reference{};  // expansion point, the pump frequency by default
};

inline complex pump_envelope(const PumpEnvelope& env, units::AngularFrequency omega_s,
                             units::AngularFrequency omega_i) {
  const double d = (omega_s + omega_i - env.omega_p).si();
  const double sigma = env.sigma_p.si();
  return {std::exp(-d * d / (2.0 * sigma * sigma)), 0.0};
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

// sinc(Delta k L / 2) with the pump at omega_s + omega_i.
inline double phase_matching_function(const phasematch::CrystalConfig& cfg,
                                      units::AngularFrequency omega_s,
                                      units::AngularFrequency omega_i) {
  cfg.validate();
  const double dk = phasematch::detail::delta_k_si(cfg, (omega_s + omega_i).si(), omega_s.si(),
                                                   cfg.material_temperature().value);
  return sinc(dk * cfg.length.si() / 2.0);
}

// ---- grid and JSA ----------------------------------------------------------

// Square frequency grid centred on the vacuum wavelength `center`, wide
// enough to contain center +/- half_span on both axes.
struct GridSpec {
  units::Length center = 810.0 * units::nm;
  units::Length half_span = 60.0 * units::nm;
  std::size_t points = 1024;

  std::vector<double> frequency_axis() const {
    if (points < 4) throw ConfigError("grid: need at least 4 points per axis");
    if (!(half_span.si() > 0) || !(half_span < center)) throw ConfigError("grid: bad half span");
    const double two_pi_c = 2.0 * constants::pi * constants::c0.si();
    const double wc = two_pi_c / center.si();
    const double half = std::max(two_pi_c / (center - half_span).si() - wc,
                                 wc - two_pi_c / (center + half_span).si());
    const double step = 2.0 * half / static_cast<double>(points - 1);
    std::vector<double> axis(points);
    const double origin = wc - half;
    for (std::size_t k = 0; k < points; ++k) axis[k] = origin + static_cast<double>(k) * step;
    return axis;
  }
};

struct JsaOptions {
  unsigned threads = 1;
  // Border band (fraction of each axis) and the largest tolerated share of
  // the total intensity inside it.
  double border_fraction = 0.02;
  double max_border_mass = 1e-3;
};

// Share of sum |f|^2 lying in the outer `border_fraction` of either axis.
inline double border_mass_fraction(const JointSpectrum& js, double border_fraction) {
  const std::size_t bs = std::max<std::size_t>(1, static_cast<std::size_t>(border_fraction * js.rows()));
  const std::size_t bi = std::max<std::size_t>(1, static_cast<std::size_t>(border_fraction * js.cols()));
  double edge = 0.0, total = 0.0;
  for (std::size_t i = 0; i < js.rows(); ++i) {
    for (std::size_t j = 0; j < js.cols(); ++j) {
      const double v = js.intensity(i, j);
      total += v;
      if (i < bs || i >= js.rows() - bs || j < bi || j >= js.cols() - bi) edge += v;
    }
  }
  return total > 0 ? edge / total : 1.0;
}

inline JointSpectrum build_jsa(const phasematch::CrystalConfig& cfg, const PumpEnvelope& env,
                               const GridSpec& grid, const JsaOptions& opt = {}) {
  cfg.validate();
  env.validate();
  JointSpectrum js;
  js.axis_s = grid.frequency_axis();
  js.axis_i = js.axis_s;
  js.values.assign(js.rows() * js.cols(), complex{});
  js.domain = Domain::spectral;
  const double step = js.axis_s[1] - js.axis_s[0];
  js.frequency_origin = {js.axis_s.front(), js.axis_i.front()};
  js.frequency_step = {step, step};

  const auto& m = *cfg.material;
  const double t_mat = cfg.material_temperature().value;
  std::vector<double> k_axis(js.rows());
  for (std::size_t k = 0; k < k_axis.size(); ++k) {
    k_axis[k] = phasematch::detail::k_si(m, js.axis_s[k], t_mat);
  }
  const double grating = cfg.grating_vector().si();
  const double half_length = cfg.length.si() / 2.0;
  const double wp = env.omega_p.si();
  const double sigma = env.sigma_p.si();

  parallel_for(js.rows(), opt.threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < js.cols(); ++j) {
      const double sum = js.axis_s[i] + js.axis_i[j];
      const double d = sum - wp;
      const double alpha = std::exp(-d * d / (2.0 * sigma * sigma));
      // Cells this far off the pump ridge are left at zero; this also keeps
      // the Sellmeier model from being evaluated at sum frequencies in the
      // far corners of wide grids.
      if (alpha < 1e-20) continue;
      // (k_i + k_j) keeps the grid exactly symmetric under signal/idler exchange.
      const double dk = phasematch::detail::k_si(m, sum, t_mat) - (k_axis[i] + k_axis[j]) - grating;
      js.values[i * js.cols() + j] = alpha * sinc(dk * half_length);
    }
  });

  const double border = border_mass_fraction(js, opt.border_fraction);
  if (border > opt.max_border_mass) {
    throw CoverageError("JSA grid too narrow: " + std::to_string(border) +
                            " of the intensity lies in the grid border",
                        border);
  }
  normalize(js);
  return js;
}

// ---- dispersion phase ------------------------------------------------------

// f * exp(i beta/2 (ws - w0)^2) * exp(i beta/2 (wi - w0)^2). Magnitudes are untouched.
inline JointSpectrum apply_fiber_phase(const JointSpectrum& js, const FiberDispersion& fd) {
  if (js.domain != Domain::spectral) {
    throw DomainError("apply_fiber_phase: input is in the temporal domain");
  }
  if (!std::isfinite(fd.beta.si())) throw ConfigError("fiber dispersion: beta must be finite");
  JointSpectrum out = js;
  if (fd.beta.si() == 0.0) return out;
  const double half_beta = 0.5 * fd.beta.si();
  const double w0 = fd.reference.si();
  std::vector<complex> phase_s(js.rows()), phase_i(js.cols());
  for (std::size_t i = 0; i < js.rows(); ++i) {
    const double d = js.axis_s[i] - w0;
    phase_s[i] = std::polar(1.0, half_beta * d * d);
  }
  for (std::size_t j = 0; j < js.cols(); ++j) {
    const double d = js.axis_i[j] - w0;
    phase_i[j] = std::polar(1.0, half_beta * d * d);
  }
  for (std::size_t i = 0; i < js.rows(); ++i) {
    for (std::size_t j = 0; j < js.cols(); ++j) out.at(i, j) *= phase_s[i] * phase_i[j];
  }
  return out;
}

// ---- Fourier transform -----------------------------------------------------

namespace detail {

inline std::vector<double> time_axis(std::size_t n, double freq_step) {
  const double dt = 2.0 * constants::pi / (static_cast<double>(n) * freq_step);
  const double m0 = static_cast<double>(n / 2);
  std::vector<double> t(n);
  for (std::size_t m = 0; m < n; ++m) t[m] = (static_cast<double>(m) - m0) * dt;
  return t;
}

// exp(sign * 2 pi i k m0 / n), m0 = floor(n/2)
inline std::vector<complex> index_twiddle(std::size_t n, double sign) {
  std::vector<complex> w(n);
  const double m0 = static_cast<double>(n / 2);
  for (std::size_t k = 0; k < n; ++k) {
    const double frac = std::fmod(static_cast<double>(k) * m0, static_cast<double>(n)) /
                        static_cast<double>(n);
    w[k] = std::polar(1.0, sign * 2.0 * constants::pi * frac);
  }
  return w;
}

inline std::vector<complex> carrier(const std::vector<double>& t, double omega0, double sign) {
  std::vector<complex> w(t.size());
  for (std::size_t m = 0; m < t.size(); ++m) w[m] = std::polar(1.0, sign * omega0 * t[m]);
  return w;
}

}  // namespace detail

// Centred 2D transform to the joint temporal amplitude.
inline JointSpectrum to_temporal(const JointSpectrum& js) {
  if (js.domain != Domain::spectral) throw DomainError("to_temporal: input is already temporal");
  const double dws = uniform_step(js.axis_s, "axis_s");
  const double dwi = uniform_step(js.axis_i, "axis_i");
  const std::size_t ns = js.rows(), ni = js.cols();

  JointSpectrum out;
  out.domain = Domain::temporal;
  out.normalized = js.normalized;
  out.measured = js.measured;
  out.frequency_origin = {js.axis_s.front(), js.axis_i.front()};
  out.frequency_step = {dws, dwi};
  out.axis_s = detail::time_axis(ns, dws);
  out.axis_i = detail::time_axis(ni, dwi);

  const auto tw_s = detail::index_twiddle(ns, +1.0);
  const auto tw_i = detail::index_twiddle(ni, +1.0);
  out.values.resize(ns * ni);
  for (std::size_t k = 0; k < ns; ++k)
    for (std::size_t l = 0; l < ni; ++l) out.values[k * ni + l] = js.at(k, l) * tw_s[k] * tw_i[l];

  fft::transform_2d(out.values, ns, ni, fft::Direction::forward);

  const auto car_s = detail::carrier(out.axis_s, out.frequency_origin[0], -1.0);
  const auto car_i = detail::carrier(out.axis_i, out.frequency_origin[1], -1.0);
  const double scale = dws * dwi / (2.0 * constants::pi);
  for (std::size_t m = 0; m < ns; ++m)
    for (std::size_t n = 0; n < ni; ++n) out.values[m * ni + n] *= scale * car_s[m] * car_i[n];
  return out;
}

// Inverse of to_temporal.
inline JointSpectrum to_spectral(const JointSpectrum& jt) {
  if (jt.domain != Domain::temporal) throw DomainError("to_spectral: input is already spectral");
  const std::size_t ns = jt.rows(), ni = jt.cols();
  const double dts = uniform_step(jt.axis_s, "axis_s");
  const double dti = uniform_step(jt.axis_i, "axis_i");

  JointSpectrum out;
  out.domain = Domain::spectral;
  out.normalized = jt.normalized;
  out.measured = jt.measured;
  out.frequency_origin = jt.frequency_origin;
  out.frequency_step = jt.frequency_step;
  out.axis_s.resize(ns);
  out.axis_i.resize(ni);
  for (std::size_t k = 0; k < ns; ++k)
    out.axis_s[k] = jt.frequency_origin[0] + static_cast<double>(k) * jt.frequency_step[0];
  for (std::size_t l = 0; l < ni; ++l)
    out.axis_i[l] = jt.frequency_origin[1] + static_cast<double>(l) * jt.frequency_step[1];

  const auto car_s = detail::carrier(jt.axis_s, jt.frequency_origin[0], +1.0);
  const auto car_i = detail::carrier(jt.axis_i, jt.frequency_origin[1], +1.0);
  out.values.resize(ns * ni);
  for (std::size_t m = 0; m < ns; ++m)
    for (std::size_t n = 0; n < ni; ++n) out.values[m * ni + n] = jt.at(m, n) * car_s[m] * car_i[n];

  fft::transform_2d(out.values, ns, ni, fft::Direction::backward);

  const auto tw_s = detail::index_twiddle(ns, -1.0);
  const auto tw_i = detail::index_twiddle(ni, -1.0);
  const double scale = dts * dti / (2.0 * constants::pi);
  for (std::size_t k = 0; k < ns; ++k)
    for (std::size_t l = 0; l < ni; ++l) out.values[k * ni + l] *= scale * tw_s[k] * tw_i[l];
  return out;
}

// ---- entanglement time -----------------------------------------------------

struct JtiProfile {
  std::vector<double> tau;        // t_s - t_i, seconds
  std::vector<double> intensity;  // |g|^2 along the line through the peak
};

// JTI sampled along the anti-diagonal (1, -1) through its maximum, i.e. along
// the arrival-time difference tau = t_s - t_i at fixed t_s + t_i. The temporal
// grid is periodic, so indices wrap.
inline JtiProfile difference_profile(const JointSpectrum& jt) {
  if (jt.domain != Domain::temporal) throw DomainError("entanglement time needs a temporal JTA");
  const double dts = uniform_step(jt.axis_s, "axis_s");
  const double dti = uniform_step(jt.axis_i, "axis_i");
  if (std::abs(dts - dti) > 1e-9 * dts) {
    throw DomainError("entanglement time: signal and idler time steps differ");
  }
  std::size_t peak = 0;
  double best = -1.0;
  for (std::size_t k = 0; k < jt.values.size(); ++k) {
    const double v = std::norm(jt.values[k]);
    if (v > best) {
      best = v;
      peak = k;
    }
  }
  const std::size_t p = peak / jt.cols(), q = peak % jt.cols();
  const std::ptrdiff_t ns = static_cast<std::ptrdiff_t>(jt.rows());
  const std::ptrdiff_t ni = static_cast<std::ptrdiff_t>(jt.cols());
  const std::ptrdiff_t half = std::min(ns, ni) / 2;
  JtiProfile prof;
  for (std::ptrdiff_t k = -half; k < half; ++k) {
    const std::ptrdiff_t i = ((static_cast<std::ptrdiff_t>(p) + k) % ns + ns) % ns;
    const std::ptrdiff_t j = ((static_cast<std::ptrdiff_t>(q) - k) % ni + ni) % ni;
    prof.tau.push_back(2.0 * static_cast<double>(k) * dts);
    prof.intensity.push_back(jt.intensity(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
  }
  return prof;
}

// Full width at half maximum of a sampled profile around its maximum, with
// linear interpolation at the two half-maximum crossings.
inline double fwhm(const std::vector<double>& x, const std::vector<double>& y) {
  const auto peak_it = std::max_element(y.begin(), y.end());
  const std::size_t c = static_cast<std::size_t>(peak_it - y.begin());
  const double half = 0.5 * *peak_it;
  std::size_t r = c;
  while (r + 1 < y.size() && y[r + 1] >= half) ++r;
  std::size_t l = c;
  while (l > 0 && y[l - 1] >= half) --l;
  if (r + 1 >= y.size() || l == 0) {
    throw CoverageError("profile does not fall below half maximum inside the grid", 1.0);
  }
  auto cross = [&](std::size_t inside, std::size_t outside) {
    const double t = (y[inside] - half) / (y[inside] - y[outside]);
    return x[inside] + t * (x[outside] - x[inside]);
  };
  return cross(r, r + 1) - cross(l, l - 1);
}

inline units::Time entanglement_time_from_jti(const JointSpectrum& jt) {
  const JtiProfile prof = difference_profile(jt);
  return units::Time::from_si(fwhm(prof.tau, prof.intensity));
}

// L/2 * |1/v_g(s) - 1/v_g(i)| = L/(2 c) * |n_g(s) - n_g(i)|
inline units::Time entanglement_time_gvm(const phasematch::CrystalConfig& cfg,
                                         units::Length lambda_s, units::Length lambda_i) {
  cfg.validate();
  const Celsius t = cfg.material_temperature();
  const double ng_s = dispersion::group_index(*cfg.material, lambda_s, t);
  const double ng_i = dispersion::group_index(*cfg.material, lambda_i, t);
  return units::Time::from_si(cfg.length.si() / (2.0 * constants::c0.si()) *
                              std::abs(ng_s - ng_i));
}

// ---- measured spectra ------------------------------------------------------

// sqrt of a measured intensity map as a (phase-free) normalized JSA. Negative
// samples, e.g. from background subtraction, are clamped to zero.
inline JointSpectrum jsa_from_jsi(const JointSpectrum& jsi) {
  if (jsi.domain != Domain::spectral) throw DomainError("jsa_from_jsi: input must be spectral");
  JointSpectrum out = jsi;
  for (auto& v : out.values) v = complex(std::sqrt(std::max(0.0, v.real())), 0.0);
  out.measured = true;
  normalize(out);
  return out;
}

// |f|^2 as a real-valued JointSpectrum.
inline JointSpectrum intensity_map(const JointSpectrum& js) {
  JointSpectrum out = js;
  for (auto& v : out.values) v = complex(std::norm(v), 0.0);
  return out;
}

}  // namespace spdclab::biphoton
