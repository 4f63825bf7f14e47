// Basic 3D vector / point types and cylindrical <-> Cartesian conversions.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace fluxvol {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(double s, Vec3 v) { return v *= s; }
inline Vec3 operator*(Vec3 v, double s) { return v *= s; }
inline Vec3 operator/(Vec3 v, double s) { return v *= (1.0 / s); }
inline Vec3 operator-(const Vec3& v) { return {-v.x, -v.y, -v.z}; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm2(v)); }

// Scalar triple product det[a b c] = a . (b x c).
inline double triple(const Vec3& a, const Vec3& b, const Vec3& c) { return dot(a, cross(b, c)); }

// Cylindrical point (R, phi, Z) with R >= 0 and phi in [0, 2pi).
struct CylPoint {
  double R = 0.0, phi = 0.0, Z = 0.0;
};

// Wrap angle into [0, 2pi).
inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a;
}

// Signed angular difference a - b mapped into (-pi, pi].
inline double angle_diff(double a, double b) {
  double d = std::fmod(a - b, kTwoPi);
  if (d <= -kPi) d += kTwoPi;
  if (d > kPi) d -= kTwoPi;
  return d;
}

inline CylPoint to_cylindrical(const Vec3& p) {
  CylPoint c;
  c.R = std::hypot(p.x, p.y);
  c.phi = (c.R > 0.0) ? wrap_angle(std::atan2(p.y, p.x)) : 0.0;
  c.Z = p.z;
  return c;
}

inline Vec3 to_cartesian(const CylPoint& c) {
  return {c.R * std::cos(c.phi), c.R * std::sin(c.phi), c.Z};
}

// Local cylindrical frame at azimuth phi.
inline Vec3 unit_R(double phi) { return {std::cos(phi), std::sin(phi), 0.0}; }
inline Vec3 unit_phi(double phi) { return {-std::sin(phi), std::cos(phi), 0.0}; }
inline constexpr Vec3 unit_Z() { return {0.0, 0.0, 1.0}; }

// Assemble a Cartesian vector from physical cylindrical components at azimuth phi.
inline Vec3 from_cyl_components(double vR, double vphi, double vZ, double phi) {
  double c = std::cos(phi), s = std::sin(phi);
  return {vR * c - vphi * s, vR * s + vphi * c, vZ};
}

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Winding detected as rational; carries the period.
struct RationalWindingError : std::runtime_error {
  int period;
  RationalWindingError(const std::string& msg, int period_)
      : std::runtime_error(msg), period(period_) {}
};

}  // namespace fluxvol
