#pragma once

// Compile-time dimensional analysis over SI base units (metre, second).
// Photon, pair and molecule counts are dimensionless. Mixing incompatible
// dimensions in +, -, comparison or conversion does not compile.
//
//   auto lambda = 810.0 * units::nm;
//   double in_um = lambda / units::um;       // dimensionless -> double
//   units::Area a = lambda * lambda;         // ok
//   lambda + 1.0 * units::fs;                // error: no matching operator

#include <cmath>
#include <compare>
#include <numbers>
#include <type_traits>

namespace spdclab::units {

template <int L, int T>
struct Dim {
  static constexpr int length = L;
  static constexpr int time = T;
};

template <class A, class B>
using DimProduct = Dim<A::length + B::length, A::time + B::time>;
template <class A, class B>
using DimQuotient = Dim<A::length - B::length, A::time - B::time>;

template <class D>
class Quantity {
 public:
  using dimension = D;

  constexpr Quantity() = default;
  // Raw SI value. Prefer `value * unit` at call sites.
  static constexpr Quantity from_si(double si) { return Quantity(si); }

  constexpr double si() const { return si_; }

  constexpr Quantity& operator+=(Quantity o) { si_ += o.si_; return *this; }
  constexpr Quantity& operator-=(Quantity o) { si_ -= o.si_; return *this; }
  constexpr Quantity& operator*=(double s) { si_ *= s; return *this; }
  constexpr Quantity& operator/=(double s) { si_ /= s; return *this; }

  friend constexpr Quantity operator+(Quantity a, Quantity b) { return Quantity(a.si_ + b.si_); }
  friend constexpr Quantity operator-(Quantity a, Quantity b) { return Quantity(a.si_ - b.si_); }
  friend constexpr Quantity operator-(Quantity a) { return Quantity(-a.si_); }
  friend constexpr Quantity operator*(Quantity a, double s) { return Quantity(a.si_ * s); }
  friend constexpr Quantity operator*(double s, Quantity a) { return Quantity(a.si_ * s); }
  friend constexpr Quantity operator/(Quantity a, double s) { return Quantity(a.si_ / s); }
  friend constexpr auto operator<=>(Quantity a, Quantity b) = default;

 private:
  constexpr explicit Quantity(double si) : si_(si) {}
  double si_ = 0.0;
};

// Dimensionless results collapse to plain double.
template <class D>
constexpr auto collapse(double si) {
  if constexpr (D::length == 0 && D::time == 0) {
    return si;
  } else {
    return Quantity<D>::from_si(si);
  }
}

template <class A, class B>
constexpr auto operator*(Quantity<A> a, Quantity<B> b) {
  return collapse<DimProduct<A, B>>(a.si() * b.si());
}

template <class A, class B>
constexpr auto operator/(Quantity<A> a, Quantity<B> b) {
  return collapse<DimQuotient<A, B>>(a.si() / b.si());
}

template <class D>
constexpr auto operator/(double s, Quantity<D> q) {
  return Quantity<DimQuotient<Dim<0, 0>, D>>::from_si(s / q.si());
}

template <class D>
constexpr Quantity<D> abs(Quantity<D> q) {
  return Quantity<D>::from_si(q.si() < 0 ? -q.si() : q.si());
}

template <class D>
  requires(D::length % 2 == 0 && D::time % 2 == 0)
inline Quantity<Dim<D::length / 2, D::time / 2>> sqrt(Quantity<D> q) {
  return Quantity<Dim<D::length / 2, D::time / 2>>::from_si(std::sqrt(q.si()));
}

template <class T>
struct is_quantity : std::false_type {};
template <class D>
struct is_quantity<Quantity<D>> : std::true_type {};

using Length = Quantity<Dim<1, 0>>;
using Area = Quantity<Dim<2, 0>>;
using Volume = Quantity<Dim<3, 0>>;
using Time = Quantity<Dim<0, 1>>;
using Rate = Quantity<Dim<0, -1>>;             // counts/s, also rad/s
using AngularFrequency = Rate;
using WaveNumber = Quantity<Dim<-1, 0>>;       // rad/m
using GroupDelayDispersion = Quantity<Dim<0, 2>>;
using NumberDensity = Quantity<Dim<-3, 0>>;    // molecules per volume
using Flux = Quantity<Dim<-2, -1>>;            // photons or pairs per area per time
using TpaCrossSection = Quantity<Dim<4, 1>>;   // classical two-photon cross section
using Velocity = Quantity<Dim<1, -1>>;

// Unit constants. A value in unit U is written `x * U` and read back `q / U`.
inline constexpr Length m = Length::from_si(1.0);
inline constexpr Length cm = Length::from_si(1e-2);
inline constexpr Length mm = Length::from_si(1e-3);
inline constexpr Length um = Length::from_si(1e-6);
inline constexpr Length nm = Length::from_si(1e-9);
inline constexpr Area um2 = Area::from_si(1e-12);
inline constexpr Area cm2 = Area::from_si(1e-4);
inline constexpr Volume cm3 = Volume::from_si(1e-6);
inline constexpr Volume mL = cm3;
inline constexpr Time s = Time::from_si(1.0);
inline constexpr Time ms = Time::from_si(1e-3);
inline constexpr Time ns = Time::from_si(1e-9);
inline constexpr Time ps = Time::from_si(1e-12);
inline constexpr Time fs = Time::from_si(1e-15);
inline constexpr Rate per_s = Rate::from_si(1.0);
inline constexpr AngularFrequency rad_per_s = AngularFrequency::from_si(1.0);
inline constexpr AngularFrequency rad_per_fs = AngularFrequency::from_si(1e15);
inline constexpr GroupDelayDispersion fs2 = GroupDelayDispersion::from_si(1e-30);
inline constexpr WaveNumber per_m = WaveNumber::from_si(1.0);
inline constexpr NumberDensity per_mL = NumberDensity::from_si(1e6);
inline constexpr Flux per_cm2_s = Flux::from_si(1e4);
// Goeppert-Mayer: 1 GM = 1e-50 cm^4 s per photon.
inline constexpr TpaCrossSection GM = TpaCrossSection::from_si(1e-50 * 1e-8);

}  // namespace spdclab::units

namespace spdclab {

// Physical constants (CODATA 2018, exact where defined).
namespace constants {
inline constexpr units::Velocity c0 = units::Velocity::from_si(299792458.0);
inline constexpr double avogadro = 6.02214076e23;  // 1/mol
inline constexpr double pi = std::numbers::pi;
}  // namespace constants

// Temperature on the Celsius scale. Affine, so it is not a Quantity.
struct Celsius {
  double value = 0.0;
  constexpr auto operator<=>(const Celsius&) const = default;
};

constexpr Celsius operator+(Celsius t, double delta) { return {t.value + delta}; }
constexpr Celsius operator-(Celsius t, double delta) { return {t.value - delta}; }

// Angular optical frequency <-> vacuum wavelength.
class OpticalFrequency {
 public:
  constexpr OpticalFrequency() = default;
  explicit constexpr OpticalFrequency(units::AngularFrequency omega) : omega_(omega) {}

  static constexpr OpticalFrequency from_wavelength(units::Length lambda) {
    return OpticalFrequency(units::AngularFrequency::from_si(
        2.0 * constants::pi * constants::c0.si() / lambda.si()));
  }
  constexpr units::AngularFrequency omega() const { return omega_; }
  constexpr units::Length wavelength() const {
    return units::Length::from_si(2.0 * constants::pi * constants::c0.si() / omega_.si());
  }
  constexpr auto operator<=>(const OpticalFrequency&) const = default;

 private:
  units::AngularFrequency omega_{};
};

}  // namespace spdclab
