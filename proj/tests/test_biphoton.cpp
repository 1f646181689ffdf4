#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "spdclab/biphoton.hpp"
#include "spdclab/biphoton_io.hpp"

using namespace spdclab;
using namespace spdclab::biphoton;
namespace u = spdclab::units;

namespace {

const u::Length kPump = 405.0 * u::nm;

phasematch::CrystalConfig degenerate_crystal() {
  phasematch::CrystalConfig c;
  c.material = dispersion::load_bundled();
  c.calibration_offset_c = phasematch::calibration_offset_for(c, kPump, Celsius{59.4});
  c.temperature = phasematch::find_degeneracy_temperature(c, kPump);
  return c;
}

PumpEnvelope default_pump() { return PumpEnvelope::from_linewidth(kPump, 0.01 * u::nm); }

const JointSpectrum& default_jsa() {
  static const JointSpectrum js = build_jsa(degenerate_crystal(), default_pump(), GridSpec{});
  return js;
}

std::vector<double> uniform_axis(std::size_t n, double origin, double step) {
  std::vector<double> a(n);
  for (std::size_t k = 0; k < n; ++k) a[k] = origin + static_cast<double>(k) * step;
  return a;
}

JointSpectrum random_spectrum(std::size_t ns, std::size_t ni, unsigned seed) {
  JointSpectrum js;
  js.axis_s = uniform_axis(ns, 2.0e15, 3.0e11);
  js.axis_i = uniform_axis(ni, 2.1e15, 3.0e11);
  std::mt19937 rng(seed);
  std::normal_distribution<double> z;
  for (std::size_t k = 0; k < ns * ni; ++k) js.values.emplace_back(z(rng), z(rng));
  return js;
}

double max_abs_diff(const JointSpectrum& a, const JointSpectrum& b) {
  double m = 0;
  for (std::size_t k = 0; k < a.values.size(); ++k) m = std::max(m, std::abs(a.values[k] - b.values[k]));
  return m;
}

}  // namespace

TEST(PumpEnvelope, GaussianInSumFrequency) {
  PumpEnvelope env{u::AngularFrequency::from_si(4.65e15), u::AngularFrequency::from_si(5e10)};
  const auto ws = u::AngularFrequency::from_si(2.3e15);
  EXPECT_EQ(pump_envelope(env, ws, env.omega_p - ws), complex(1.0, 0.0));
  const auto wi = env.omega_p - ws + env.sigma_p;
  EXPECT_NEAR(pump_envelope(env, ws, wi).real(), std::exp(-0.5), 1e-15);
  EXPECT_EQ(pump_envelope(env, ws, wi), pump_envelope(env, wi, ws));
  EXPECT_EQ(pump_envelope(env, ws, wi).imag(), 0.0);
}

TEST(PumpEnvelope, FromLinewidth) {
  const auto env = default_pump();
  // 0.01 nm at 405 nm -> 1.149e11 rad/s FWHM of |alpha|^2
  EXPECT_NEAR(env.sigma_p.si() * 2.0 * std::sqrt(std::log(2.0)), 1.1486e11, 1e8);
  PumpEnvelope bad{env.omega_p, u::AngularFrequency::from_si(0.0)};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(PhaseMatching, SincValues) {
  EXPECT_EQ(sinc(0.0), 1.0);
  EXPECT_NEAR(sinc(constants::pi), 0.0, 1e-12);
  EXPECT_NEAR(sinc(1e-5), std::sin(1e-5) / 1e-5, 1e-15);
}

TEST(PhaseMatching, FirstSidelobeByBruteForceScan) {
  double best = 0, at = 0;
  for (double x = constants::pi; x <= 2 * constants::pi; x += 1e-6) {
    if (sinc(x) < best) {
      best = sinc(x);
      at = x;
    }
  }
  EXPECT_NEAR(std::abs(best), 0.2172, 1e-4);
  EXPECT_NEAR(at, 4.4934, 1e-4);
}

TEST(PhaseMatching, UnityAtDegeneracy) {
  const auto c = degenerate_crystal();
  const auto w = OpticalFrequency::from_wavelength(810.0 * u::nm).omega();
  EXPECT_NEAR(phase_matching_function(c, w, w), 1.0, 1e-12);
  const auto far = OpticalFrequency::from_wavelength(300.0 * u::nm).omega();
  EXPECT_THROW(phase_matching_function(c, far, w), DomainError);
}

TEST(Jsa, NormalizedAndSymmetric) {
  const auto& js = default_jsa();
  EXPECT_TRUE(js.normalized);
  EXPECT_EQ(js.domain, Domain::spectral);
  EXPECT_NEAR(total_mass(js), 1.0, 1e-9);
  for (std::size_t i = 0; i < js.rows(); i += 7) {
    for (std::size_t j = 0; j < js.cols(); j += 3) {
      EXPECT_GE(js.intensity(i, j), 0.0);
      EXPECT_EQ(js.intensity(i, j), js.intensity(j, i));
    }
  }
}

TEST(Jsa, RidgeFollowsPumpAntiDiagonal) {
  const auto& js = default_jsa();
  const std::size_t n = js.rows();
  std::vector<double> by_sum(2 * n - 1, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) by_sum[i + j] += js.intensity(i, j);
  const std::size_t best = static_cast<std::size_t>(std::max_element(by_sum.begin(), by_sum.end()) - by_sum.begin());
  const double wp = default_pump().omega_p.si();
  std::size_t expect = 0;
  double gap = 1e300;
  for (std::size_t s = 0; s < by_sum.size(); ++s) {
    const double sum = js.axis_s[0] + js.axis_i[0] + static_cast<double>(s) * (js.axis_s[1] - js.axis_s[0]);
    if (std::abs(sum - wp) < gap) {
      gap = std::abs(sum - wp);
      expect = s;
    }
  }
  EXPECT_EQ(best, expect);
}

TEST(Jsa, ThreadCountDoesNotChangeValues) {
  JsaOptions a, b;
  b.threads = 3;
  GridSpec g;
  g.points = 256;
  const auto x = build_jsa(degenerate_crystal(), default_pump(), g, a);
  const auto y = build_jsa(degenerate_crystal(), default_pump(), g, b);
  EXPECT_EQ(x.values, y.values);
}

TEST(Jsa, NarrowGridIsCoverageError) {
  GridSpec g;
  g.half_span = 0.5 * u::nm;
  g.points = 128;
  try {
    build_jsa(degenerate_crystal(), default_pump(), g);
    FAIL();
  } catch (const CoverageError& e) {
    EXPECT_GT(e.truncated_fraction(), 1e-3);
  }
}

TEST(FiberPhase, ZeroBetaIsBitwiseCopy) {
  const auto& js = default_jsa();
  const auto out = apply_fiber_phase(js, {0.0 * u::fs2, default_pump().omega_p});
  EXPECT_EQ(out.values, js.values);
}

TEST(FiberPhase, PurePhase) {
  const auto& js = default_jsa();
  const auto out = apply_fiber_phase(js, {3.3e4 * u::fs2, default_pump().omega_p});
  for (std::size_t k = 0; k < js.values.size(); ++k) {
    EXPECT_NEAR(std::norm(out.values[k]), std::norm(js.values[k]), 1e-12 * (1 + std::norm(js.values[k])));
  }
  // marginals
  for (std::size_t i = 0; i < js.rows(); i += 17) {
    double a = 0, b = 0;
    for (std::size_t j = 0; j < js.cols(); ++j) {
      a += js.intensity(i, j);
      b += out.intensity(i, j);
    }
    EXPECT_NEAR(a, b, 1e-12 * (1 + a));
  }
}

TEST(FiberPhase, TemporalInputRejected) {
  EXPECT_THROW(apply_fiber_phase(to_temporal(random_spectrum(4, 4, 1)), {}), DomainError);
}

TEST(Fourier, MatchesNaiveDft) {
  const auto js = random_spectrum(8, 6, 7);
  const auto jt = to_temporal(js);
  const double dws = js.axis_s[1] - js.axis_s[0], dwi = js.axis_i[1] - js.axis_i[0];
  for (std::size_t m = 0; m < jt.rows(); ++m) {
    for (std::size_t n = 0; n < jt.cols(); ++n) {
      complex acc{};
      for (std::size_t k = 0; k < js.rows(); ++k)
        for (std::size_t l = 0; l < js.cols(); ++l)
          acc += js.at(k, l) * std::polar(1.0, -(js.axis_s[k] * jt.axis_s[m] + js.axis_i[l] * jt.axis_i[n]));
      acc *= dws * dwi / (2.0 * constants::pi);
      EXPECT_NEAR(std::abs(acc - jt.at(m, n)), 0.0, 1e-9 * std::abs(acc) + 1e-9) << m << "," << n;
    }
  }
}

TEST(Fourier, ParsevalAndRoundTrip) {
  for (const JointSpectrum* js : {&default_jsa()}) {
    const auto jt = to_temporal(*js);
    EXPECT_NEAR(total_mass(jt) / total_mass(*js), 1.0, 1e-9);
    const auto back = to_spectral(jt);
    EXPECT_LT(max_abs_diff(back, *js), 1e-10 * std::sqrt(1.0 / (js->axis_s[1] - js->axis_s[0])));
    EXPECT_EQ(back.axis_s, js->axis_s);
  }
  const auto r = random_spectrum(33, 20, 3);
  const auto rt = to_temporal(r);
  EXPECT_NEAR(total_mass(rt) / total_mass(r), 1.0, 1e-9);
  const auto rb = to_spectral(rt);
  double scale = 0;
  for (const auto& v : r.values) scale = std::max(scale, std::abs(v));
  EXPECT_LT(max_abs_diff(rb, r), 1e-10 * scale);
}

TEST(Fourier, GaussianMapsToGaussian) {
  const std::size_t n = 256;
  const double sigma = 2.0e12, w0 = 2.3e15, step = 12.0 * sigma / n;
  JointSpectrum js;
  js.axis_s = uniform_axis(n, w0 - step * (n / 2), step);
  js.axis_i = js.axis_s;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double a = (js.axis_s[i] - w0) / sigma, b = (js.axis_i[j] - w0) / sigma;
      js.values.emplace_back(std::exp(-0.5 * (a * a + b * b)), 0.0);
    }
  const auto jt = to_temporal(js);
  const std::size_t c = n / 2;  // t = 0
  const double peak = std::abs(jt.at(c, c));
  const double sigma_t = 1.0 / sigma;
  for (std::size_t m : {c + 5, c + 20, c - 13}) {
    const double t = jt.axis_s[m];
    EXPECT_NEAR(std::abs(jt.at(m, c)) / peak, std::exp(-0.5 * t * t / (sigma_t * sigma_t)), 1e-8);
  }
}

TEST(Fourier, NonUniformAxisRejected) {
  auto js = random_spectrum(8, 8, 2);
  js.axis_s[3] += 1e10;
  EXPECT_THROW(to_temporal(js), DomainError);
  EXPECT_THROW(to_spectral(js), DomainError);
}

TEST(EntanglementTime, GaussianDifferenceProfileFwhm) {
  const std::size_t n = 512;
  const double dt = 1e-15, sigma_t = 40e-15, wide = 400e-15;
  JointSpectrum jt;
  jt.domain = Domain::temporal;
  jt.axis_s = uniform_axis(n, -dt * (n / 2), dt);
  jt.axis_i = jt.axis_s;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double tau = jt.axis_s[i] - jt.axis_i[j], sum = jt.axis_s[i] + jt.axis_i[j];
      // amplitude; the intensity has standard deviation sigma_t along tau
      jt.values.emplace_back(std::exp(-tau * tau / (4 * sigma_t * sigma_t) - sum * sum / (4 * wide * wide)), 0.0);
    }
  const double expect = 2.0 * std::sqrt(2.0 * std::log(2.0)) * sigma_t;
  EXPECT_NEAR(entanglement_time_from_jti(jt).si() / expect, 1.0, 0.01);
}

TEST(EntanglementTime, ProfileMustDropBelowHalf) {
  JointSpectrum jt;
  jt.domain = Domain::temporal;
  jt.axis_s = uniform_axis(16, 0, 1e-15);
  jt.axis_i = jt.axis_s;
  jt.values.assign(256, complex(1.0, 0.0));
  EXPECT_THROW(entanglement_time_from_jti(jt), CoverageError);
  EXPECT_THROW(entanglement_time_from_jti(random_spectrum(4, 4, 1)), DomainError);
}

TEST(EntanglementTime, PeakAtEqualArrivalWithoutDispersion) {
  const auto jt = to_temporal(default_jsa());
  std::size_t best = 0;
  for (std::size_t k = 0; k < jt.values.size(); ++k)
    if (std::norm(jt.values[k]) > std::norm(jt.values[best])) best = k;
  const double ts = jt.axis_s[best / jt.cols()], ti = jt.axis_i[best % jt.cols()];
  EXPECT_LE(std::abs(ts - ti), jt.axis_s[1] - jt.axis_s[0]);
}

TEST(EntanglementTime, FiberDispersionBroadens) {
  const auto& js = default_jsa();
  const double free = entanglement_time_from_jti(to_temporal(js)).si();
  const double fiber = entanglement_time_from_jti(
      to_temporal(apply_fiber_phase(js, {3.3e4 * u::fs2, default_pump().omega_p}))).si();
  EXPECT_GT(fiber, 2.0 * free);
}

// A 1e-4 nm pump occupies a single anti-diagonal on every grid below, which
// is the CW limit. Reference values: tests/oracles/te_oracle.py.
TEST(EntanglementTime, GridRefinementStable) {
  const auto c = degenerate_crystal();
  const auto cw = PumpEnvelope::from_linewidth(kPump, 1e-4 * u::nm);
  GridSpec g;
  const double a = entanglement_time_from_jti(to_temporal(build_jsa(c, cw, g))).si();
  g.points = 2048;
  const double b = entanglement_time_from_jti(to_temporal(build_jsa(c, cw, g))).si();
  EXPECT_LT(std::abs(b / a - 1.0), 0.02);
  EXPECT_NEAR(a / u::fs.si(), 134.22, 0.01 * 134.22);
}

// The 0.01 nm pump is only resolved once the frequency step drops below its
// width; at N = 4096 over the default span the value approaches the
// continuum result for the finite linewidth.
TEST(EntanglementTime, ResolvedPumpMatchesContinuum) {
  GridSpec g;
  g.points = 4096;
  JsaOptions o;
  o.threads = 4;
  const double te = entanglement_time_from_jti(
      to_temporal(build_jsa(degenerate_crystal(), default_pump(), g, o))).si();
  EXPECT_NEAR(te / u::fs.si(), 115.88, 0.02 * 115.88);
}

TEST(EntanglementTime, GroupVelocityMismatch) {
  phasematch::CrystalConfig c;
  c.material = dispersion::load_bundled();
  c.temperature = Celsius{59.4};
  EXPECT_EQ(entanglement_time_gvm(c, 810.0 * u::nm, 810.0 * u::nm).si(), 0.0);
  // golden value from tests/oracles/sellmeier_oracle.py
  const double te = entanglement_time_gvm(c, 790.0 * u::nm, 831.0 * u::nm) / u::fs;
  EXPECT_NEAR(te, 420.62787254244472, 420.6 * 1e-9);
  c.length = 40.0 * u::mm;
  EXPECT_NEAR(entanglement_time_gvm(c, 790.0 * u::nm, 831.0 * u::nm) / u::fs, 2 * te, 1e-9);
}

TEST(Measured, JsaFromJsiTakesSquareRoot) {
  auto jsi = intensity_map(default_jsa());
  jsi.values[5] = complex(-1e-3, 0.0);  // background-subtracted negative sample
  const auto jsa = jsa_from_jsi(jsi);
  EXPECT_TRUE(jsa.measured);
  EXPECT_NEAR(total_mass(jsa), 1.0, 1e-9);
  EXPECT_EQ(jsa.values[5], complex(0.0, 0.0));
  const auto& ref = default_jsa();
  for (std::size_t k = 0; k < ref.values.size(); k += 997) {
    EXPECT_NEAR(jsa.values[k].real(), std::abs(ref.values[k]), 1e-9 * (1 + std::abs(ref.values[k])));
  }
}

TEST(MatrixCsv, RoundTripRadPerSecond) {
  GridSpec g;
  g.points = 64;
  g.half_span = 20.0 * u::nm;
  // Coarse grid; the JSA only needs to exist, not be resolved.
  JsaOptions o;
  o.max_border_mass = 1.0;
  const auto js = build_jsa(degenerate_crystal(), PumpEnvelope::from_linewidth(kPump, 0.3 * u::nm), g, o);
  std::stringstream s;
  write_matrix_csv(s, js);
  const auto back = read_matrix_csv(s);
  ASSERT_EQ(back.rows(), js.rows());
  EXPECT_TRUE(back.measured);
  for (std::size_t k = 0; k < js.values.size(); ++k) {
    EXPECT_NEAR(back.values[k].real(), std::norm(js.values[k]), 1e-6 * std::norm(js.values[k]) + 1e-300);
  }
  for (std::size_t k = 0; k < js.rows(); ++k) EXPECT_NEAR(back.axis_s[k] / js.axis_s[k], 1.0, 1e-11);
  const auto side = sidecar_json(js);
  EXPECT_EQ(side["domain"], "spectral");
  EXPECT_EQ(side["axis_s_unit"], "rad/s");
}

TEST(MatrixCsv, WavelengthAxesConvertedToUniformFrequency) {
  std::stringstream s;
  s << "# axis_s (nm): 800,805,810,815,820\n# axis_i (nm): 800,810,820\n";
  for (int r = 0; r < 5; ++r) s << "1,2,3\n";
  const auto js = read_matrix_csv(s);
  EXPECT_EQ(js.rows(), 5u);
  EXPECT_NO_THROW(uniform_step(js.axis_s));
  const double two_pi_c = 2 * constants::pi * constants::c0.si();
  EXPECT_NEAR(js.axis_s.front(), two_pi_c / 820e-9, 1.0);
  EXPECT_NEAR(js.axis_s.back(), two_pi_c / 800e-9, 1.0);
  // increasing frequency = decreasing wavelength: first column is now 820 nm
  EXPECT_NEAR(js.at(0, 0).real(), 3.0, 1e-12);
  EXPECT_NEAR(js.at(0, 2).real(), 1.0, 1e-12);
}

TEST(MatrixCsv, MalformedInput) {
  std::stringstream short_row("# axis_s (rad/s): 1,2\n# axis_i (rad/s): 1,2\n1,2\n3\n");
  try {
    read_matrix_csv(short_row);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  std::stringstream bad_unit("# axis_s (THz): 1,2\n# axis_i (rad/s): 1,2\n1,2\n3,4\n");
  EXPECT_THROW(read_matrix_csv(bad_unit), ParseError);
  std::stringstream temporal("# domain: temporal\n# axis_s (fs): 1,2\n# axis_i (fs): 1,2\n1,2\n3,4\n");
  EXPECT_THROW(read_matrix_csv(temporal), ParseError);
}
