#pragma once

#include <cmath>
#include <compare>
#include <numbers>

namespace vortexloc {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Angular frequency in rad/us. Configuration values are ordinary
/// frequencies nu in MHz; the conversion is omega = 2*pi*nu.
class AngularFrequency {
 public:
  constexpr AngularFrequency() = default;
  constexpr explicit AngularFrequency(double rad_per_us) : value_(rad_per_us) {}

  static constexpr AngularFrequency from_mhz(double nu_mhz) {
    return AngularFrequency(kTwoPi * nu_mhz);
  }

  constexpr double value() const { return value_; }
  constexpr double mhz() const { return value_ / kTwoPi; }

  constexpr AngularFrequency operator-() const { return AngularFrequency(-value_); }
  constexpr AngularFrequency& operator+=(AngularFrequency o) {
    value_ += o.value_;
    return *this;
  }
  constexpr AngularFrequency& operator-=(AngularFrequency o) {
    value_ -= o.value_;
    return *this;
  }

  friend constexpr AngularFrequency operator+(AngularFrequency a, AngularFrequency b) {
    return AngularFrequency(a.value_ + b.value_);
  }
  friend constexpr AngularFrequency operator-(AngularFrequency a, AngularFrequency b) {
    return AngularFrequency(a.value_ - b.value_);
  }
  friend constexpr AngularFrequency operator*(double k, AngularFrequency a) {
    return AngularFrequency(k * a.value_);
  }
  friend constexpr AngularFrequency operator*(AngularFrequency a, double k) {
    return AngularFrequency(k * a.value_);
  }
  friend constexpr AngularFrequency operator/(AngularFrequency a, double k) {
    return AngularFrequency(a.value_ / k);
  }
  friend constexpr double operator/(AngularFrequency a, AngularFrequency b) {
    return a.value_ / b.value_;
  }
  friend constexpr auto operator<=>(AngularFrequency, AngularFrequency) = default;

 private:
  double value_ = 0.0;
};

inline AngularFrequency abs(AngularFrequency a) { return AngularFrequency(std::abs(a.value())); }

namespace literals {
constexpr AngularFrequency operator""_MHz(long double nu) {
  return AngularFrequency::from_mhz(static_cast<double>(nu));
}
constexpr AngularFrequency operator""_MHz(unsigned long long nu) {
  return AngularFrequency::from_mhz(static_cast<double>(nu));
}
}  // namespace literals

/// Point in cylindrical coordinates around the beam axis. Lengths in um.
struct Position {
  double r = 0.0;
  double phi = 0.0;
  double z = 0.0;

  static Position cylindrical(double r, double phi, double z) {
    // r < 0 is folded onto the opposite half-plane
    if (r < 0.0) {
      r = -r;
      phi += kPi;
    }
    phi = std::fmod(phi, kTwoPi);
    if (phi < 0.0) phi += kTwoPi;
    if (phi >= kTwoPi) phi = 0.0;
    return {r, phi, z};
  }

  static Position cartesian(double x, double y, double z) {
    double phi = std::atan2(y, x);
    if (phi < 0.0) phi += kTwoPi;
    if (phi >= kTwoPi) phi = 0.0;
    return {std::hypot(x, y), phi, z};
  }

  double x() const { return r * std::cos(phi); }
  double y() const { return r * std::sin(phi); }
};

}  // namespace vortexloc
