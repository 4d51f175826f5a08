#pragma once

// Small 2D vector/matrix toolkit shared across the stack. Everything is
// value-semantic; angles are radians, distances meters. All matrix helpers
// are closed-form 2x2 operations.

#include <cmath>

namespace sbamp {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  bool operator==(const Vec2& o) const = default;

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm_sq() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm_sq()); }
  /// Unit vector, or (0,0) when the norm is below eps.
  Vec2 normalized(double eps = 1e-12) const {
    const double n = norm();
    return n < eps ? Vec2{} : Vec2{x / n, y / n};
  }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Row-major 2x2 matrix.
struct Mat2 {
  double m00 = 0.0, m01 = 0.0;
  double m10 = 0.0, m11 = 0.0;

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static Mat2 diagonal(double a, double b) { return {a, 0.0, 0.0, b}; }

  bool operator==(const Mat2& o) const = default;

  Vec2 operator*(const Vec2& v) const {
    return {m00 * v.x + m01 * v.y, m10 * v.x + m11 * v.y};
  }
  Mat2 operator*(const Mat2& o) const {
    return {m00 * o.m00 + m01 * o.m10, m00 * o.m01 + m01 * o.m11,
            m10 * o.m00 + m11 * o.m10, m10 * o.m01 + m11 * o.m11};
  }
  Mat2 operator+(const Mat2& o) const {
    return {m00 + o.m00, m01 + o.m01, m10 + o.m10, m11 + o.m11};
  }
  Mat2 operator-(const Mat2& o) const {
    return {m00 - o.m00, m01 - o.m01, m10 - o.m10, m11 - o.m11};
  }
  Mat2 operator*(double s) const { return {m00 * s, m01 * s, m10 * s, m11 * s}; }

  Mat2 transpose() const { return {m00, m10, m01, m11}; }
  Mat2 symmetric_part() const {
    const double off = 0.5 * (m01 + m10);
    return {m00, off, off, m11};
  }
  double determinant() const { return m00 * m11 - m01 * m10; }
  double trace() const { return m00 + m11; }
  /// Inverse; caller guarantees a non-singular matrix.
  Mat2 inverse() const {
    const double d = determinant();
    return {m11 / d, -m01 / d, -m10 / d, m00 / d};
  }
  double frobenius_norm() const {
    return std::sqrt(m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11);
  }
};

inline Mat2 operator*(double s, const Mat2& m) { return m * s; }

/// Outer product a * b^T.
inline Mat2 outer(const Vec2& a, const Vec2& b) {
  return {a.x * b.x, a.x * b.y, a.y * b.x, a.y * b.y};
}

struct SymEigenvalues {
  double lo = 0.0;
  double hi = 0.0;
};

/// Eigenvalues of a symmetric 2x2 matrix (uses (m01+m10)/2 off-diagonal).
inline SymEigenvalues sym_eigenvalues(const Mat2& m) {
  const double b = 0.5 * (m.m01 + m.m10);
  const double mean = 0.5 * (m.m00 + m.m11);
  const double r = std::sqrt(0.25 * (m.m00 - m.m11) * (m.m00 - m.m11) + b * b);
  return {mean - r, mean + r};
}

/// Lower Cholesky factor of an SPD matrix. Returns false when the matrix is
/// not positive definite beyond -tol on the pivots (out then holds a clamped
/// factor of the nearest PSD candidate).
inline bool cholesky_lower(const Mat2& spd, Mat2* out, double tol = 1e-12) {
  bool ok = true;
  double a = spd.m00;
  if (a < -tol) ok = false;
  a = std::max(a, 0.0);
  const double l00 = std::sqrt(a);
  const double l10 = l00 > 0.0 ? 0.5 * (spd.m01 + spd.m10) / l00 : 0.0;
  double c = spd.m11 - l10 * l10;
  if (c < -tol) ok = false;
  c = std::max(c, 0.0);
  *out = {l00, 0.0, l10, std::sqrt(c)};
  return ok;
}

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

}  // namespace sbamp
