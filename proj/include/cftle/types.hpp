#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cftle {

/// Planar position, velocity or control vector in nondimensional units.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 &operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2 &) const = default;

  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double squaredNorm() const { return x * x + y * y; }
  double norm() const { return std::hypot(x, y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

/// Row-major 2x2 matrix: [a b; c d].
struct Mat2 {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

  constexpr Mat2 operator+(const Mat2 &o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
  constexpr Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
  constexpr Mat2 operator*(const Mat2 &o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  constexpr Vec2 operator*(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
  constexpr Mat2 transpose() const { return {a, c, b, d}; }
  constexpr double det() const { return a * d - b * c; }
  bool finite() const {
    return std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(d);
  }
};

// Error categories. The C API and CLI map them onto exit/status codes.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a trajectory produces a non-finite state or velocity.
class IntegrationError : public NumericalError {
 public:
  IntegrationError(Vec2 where, double when, const std::string &what);
  Vec2 position;
  double time;
};

struct DomainBox {
  double x_min = 0.0;
  double x_max = 2.0;
  double y_min = 0.0;
  double y_max = 1.0;

  void validate() const;
  bool contains(Vec2 p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  Vec2 clamp(Vec2 p) const;
  bool operator==(const DomainBox &) const = default;
};

/// Rectilinear node-registered grid. Node (i, j) sits at x(i), y(j).
struct GridSpec {
  DomainBox domain;
  int nx = 3;
  int ny = 3;

  void validate() const;
  double dx() const { return (domain.x_max - domain.x_min) / (nx - 1); }
  double dy() const { return (domain.y_max - domain.y_min) / (ny - 1); }
  double x(int i) const { return domain.x_min + (domain.x_max - domain.x_min) * i / (nx - 1); }
  double y(int j) const { return domain.y_min + (domain.y_max - domain.y_min) * j / (ny - 1); }
  Vec2 node(int i, int j) const { return {x(i), y(j)}; }
  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  /// Row-major, x fastest.
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
  }
  bool operator==(const GridSpec &) const = default;
};

/// Node values on a grid plus a validity mask (1 = valid).
struct ScalarField {
  GridSpec grid;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  ScalarField() = default;
  explicit ScalarField(const GridSpec &g, double fill = 0.0)
      : grid(g), values(g.size(), fill), valid(g.size(), 1) {}

  double &at(int i, int j) { return values[grid.index(i, j)]; }
  double at(int i, int j) const { return values[grid.index(i, j)]; }
  bool isValid(int i, int j) const { return valid[grid.index(i, j)] != 0; }
  std::size_t validCount() const;
};

struct VectorField {
  GridSpec grid;
  std::vector<Vec2> values;
  std::vector<std::uint8_t> valid;

  VectorField() = default;
  explicit VectorField(const GridSpec &g) : grid(g), values(g.size()), valid(g.size(), 1) {}

  Vec2 &at(int i, int j) { return values[grid.index(i, j)]; }
  Vec2 at(int i, int j) const { return values[grid.index(i, j)]; }
  bool isValid(int i, int j) const { return valid[grid.index(i, j)] != 0; }
};

}  // namespace cftle
