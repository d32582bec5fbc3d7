#pragma once

#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "cftle/types.hpp"

namespace cftle {

/// Uniform (position, time) -> velocity interface shared by background flows
/// and controlled fields. Implementations must be pure and thread-safe.
class VelocityField {
 public:
  virtual ~VelocityField() = default;

  virtual Vec2 velocity(Vec2 p, double t) const = 0;

  /// Spatial velocity gradient dv/dx. Defaults to central differences.
  virtual Mat2 gradient(Vec2 p, double t) const;

  /// Velocity and gradient together; fields override this to share work.
  virtual void evaluate(Vec2 p, double t, Vec2 &v, Mat2 &grad) const {
    v = velocity(p, t);
    grad = gradient(p, t);
  }

  /// Machine-readable description, e.g. {"name":"saddle","lambda":1}.
  virtual nlohmann::json descriptor() const = 0;

  /// Temporal period, if the field is periodic. Steady fields report nullopt
  /// and are compatible with any period.
  virtual std::optional<double> period() const { return std::nullopt; }
  virtual bool steady() const { return false; }
};

using FieldPtr = std::shared_ptr<const VelocityField>;

struct DoubleGyreParams {
  double A = 0.1;
  double epsilon = 0.25;
  double omega = 2.0 * 3.14159265358979323846 / 10.0;

  void validate() const;
  double period() const { return 2.0 * 3.14159265358979323846 / omega; }
};

Vec2 doubleGyreVelocity(Vec2 p, double t, const DoubleGyreParams &params);
Vec2 saddleVelocity(Vec2 p, double t, double lambda);
Vec2 rotationVelocity(Vec2 p, double t, double omega);

class DoubleGyre final : public VelocityField {
 public:
  explicit DoubleGyre(DoubleGyreParams params);
  Vec2 velocity(Vec2 p, double t) const override;
  Mat2 gradient(Vec2 p, double t) const override;
  void evaluate(Vec2 p, double t, Vec2 &v, Mat2 &grad) const override;
  nlohmann::json descriptor() const override;
  std::optional<double> period() const override;
  bool steady() const override { return params_.epsilon == 0.0; }
  const DoubleGyreParams &params() const { return params_; }

 private:
  DoubleGyreParams params_;
};

/// Linear saddle v = (lambda x, -lambda y).
class Saddle final : public VelocityField {
 public:
  explicit Saddle(double lambda) : lambda_(lambda) {}
  Vec2 velocity(Vec2 p, double t) const override { return saddleVelocity(p, t, lambda_); }
  Mat2 gradient(Vec2, double) const override { return {lambda_, 0.0, 0.0, -lambda_}; }
  nlohmann::json descriptor() const override;
  bool steady() const override { return true; }

 private:
  double lambda_;
};

/// Rigid rotation v = (-omega y, omega x).
class Rotation final : public VelocityField {
 public:
  explicit Rotation(double omega) : omega_(omega) {}
  Vec2 velocity(Vec2 p, double t) const override { return rotationVelocity(p, t, omega_); }
  Mat2 gradient(Vec2, double) const override { return {0.0, -omega_, omega_, 0.0}; }
  nlohmann::json descriptor() const override;
  bool steady() const override { return true; }

 private:
  double omega_;
};

/// Spatially uniform, steady velocity. `Uniform({0,0})` is the zero field.
class Uniform final : public VelocityField {
 public:
  explicit Uniform(Vec2 v = {}) : v_(v) {}
  Vec2 velocity(Vec2, double) const override { return v_; }
  Mat2 gradient(Vec2, double) const override { return {}; }
  nlohmann::json descriptor() const override;
  bool steady() const override { return true; }

 private:
  Vec2 v_;
};

/// Builds a field from its descriptor. Throws ConfigError on unknown names,
/// unknown keys or invalid parameters.
FieldPtr makeField(const nlohmann::json &descriptor);

/// Descriptor equality with a relative tolerance on numeric parameters.
bool sameDescriptor(const nlohmann::json &a, const nlohmann::json &b, double rel_tol = 1e-12);

}  // namespace cftle
