#include "cftle/flowfield.hpp"

#include <cmath>
#include <numbers>

namespace cftle {

using nlohmann::json;

Mat2 VelocityField::gradient(Vec2 p, double t) const {
  constexpr double h = 1e-6;
  const Vec2 dvx = (velocity({p.x + h, p.y}, t) - velocity({p.x - h, p.y}, t)) * (0.5 / h);
  const Vec2 dvy = (velocity({p.x, p.y + h}, t) - velocity({p.x, p.y - h}, t)) * (0.5 / h);
  return {dvx.x, dvy.x, dvx.y, dvy.y};
}

void DoubleGyreParams::validate() const {
  if (!(A > 0.0) || !std::isfinite(A)) throw ConfigError("double gyre: A must be > 0");
  if (!(epsilon >= 0.0 && epsilon < 0.5)) throw ConfigError("double gyre: epsilon must lie in [0, 0.5)");
  if (!(omega > 0.0) || !std::isfinite(omega)) throw ConfigError("double gyre: omega must be > 0");
}

Vec2 doubleGyreVelocity(Vec2 p, double t, const DoubleGyreParams &params) {
  using std::numbers::pi;
  const double a = params.epsilon * std::sin(params.omega * t);
  const double b = 1.0 - 2.0 * a;
  const double f = a * p.x * p.x + b * p.x;
  return {-pi * params.A * std::sin(pi * f) * std::cos(pi * p.y),
          pi * params.A * std::cos(pi * f) * std::sin(pi * p.y)};
}

Vec2 saddleVelocity(Vec2 p, double, double lambda) { return {lambda * p.x, -lambda * p.y}; }

Vec2 rotationVelocity(Vec2 p, double, double omega) { return {-omega * p.y, omega * p.x}; }

DoubleGyre::DoubleGyre(DoubleGyreParams params) : params_(params) { params_.validate(); }

Vec2 DoubleGyre::velocity(Vec2 p, double t) const { return doubleGyreVelocity(p, t, params_); }

Mat2 DoubleGyre::gradient(Vec2 p, double t) const {
  using std::numbers::pi;
  const double A = params_.A;
  const double a = params_.epsilon * std::sin(params_.omega * t);
  const double b = 1.0 - 2.0 * a;
  const double f = a * p.x * p.x + b * p.x;
  const double df = 2.0 * a * p.x + b;
  const double sf = std::sin(pi * f), cf = std::cos(pi * f);
  const double sy = std::sin(pi * p.y), cy = std::cos(pi * p.y);
  return {-pi * pi * A * cf * df * cy, pi * pi * A * sf * sy, -pi * pi * A * sf * df * sy,
          pi * pi * A * cf * cy};
}

void DoubleGyre::evaluate(Vec2 p, double t, Vec2 &v, Mat2 &grad) const {
  using std::numbers::pi;
  const double A = params_.A;
  const double a = params_.epsilon * std::sin(params_.omega * t);
  const double b = 1.0 - 2.0 * a;
  const double f = a * p.x * p.x + b * p.x;
  const double df = 2.0 * a * p.x + b;
  const double sf = std::sin(pi * f), cf = std::cos(pi * f);
  const double sy = std::sin(pi * p.y), cy = std::cos(pi * p.y);
  v = {-pi * A * sf * cy, pi * A * cf * sy};
  grad = {-pi * pi * A * cf * df * cy, pi * pi * A * sf * sy, -pi * pi * A * sf * df * sy,
          pi * pi * A * cf * cy};
}

json DoubleGyre::descriptor() const {
  return {{"name", "double_gyre"}, {"A", params_.A}, {"epsilon", params_.epsilon}, {"omega", params_.omega}};
}

std::optional<double> DoubleGyre::period() const {
  if (steady()) return std::nullopt;
  return params_.period();
}

json Saddle::descriptor() const { return {{"name", "saddle"}, {"lambda", lambda_}}; }
json Rotation::descriptor() const { return {{"name", "rotation"}, {"omega", omega_}}; }
json Uniform::descriptor() const {
  if (v_ == Vec2{}) return {{"name", "zero"}};
  return {{"name", "uniform"}, {"vx", v_.x}, {"vy", v_.y}};
}

namespace {

double number(const json &d, const char *key, double fallback) {
  if (!d.contains(key)) return fallback;
  const auto &v = d.at(key);
  if (!v.is_number()) throw ConfigError(std::string("flow.") + key + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(std::string("flow.") + key + " must be finite");
  return x;
}

void onlyKeys(const json &d, std::initializer_list<const char *> allowed) {
  for (const auto &[key, _] : d.items()) {
    bool ok = false;
    for (const char *a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("flow: unknown key '" + key + "'");
  }
}

}  // namespace

FieldPtr makeField(const json &d) {
  if (!d.is_object() || !d.contains("name") || !d.at("name").is_string())
    throw ConfigError("flow descriptor needs a string 'name'");
  const auto name = d.at("name").get<std::string>();
  if (name == "double_gyre") {
    onlyKeys(d, {"name", "A", "epsilon", "omega"});
    DoubleGyreParams p;
    p.A = number(d, "A", p.A);
    p.epsilon = number(d, "epsilon", p.epsilon);
    p.omega = number(d, "omega", p.omega);
    p.validate();
    return std::make_shared<DoubleGyre>(p);
  }
  if (name == "saddle") {
    onlyKeys(d, {"name", "lambda"});
    return std::make_shared<Saddle>(number(d, "lambda", 1.0));
  }
  if (name == "rotation") {
    onlyKeys(d, {"name", "omega"});
    return std::make_shared<Rotation>(number(d, "omega", 1.0));
  }
  if (name == "zero") {
    onlyKeys(d, {"name"});
    return std::make_shared<Uniform>();
  }
  if (name == "uniform") {
    onlyKeys(d, {"name", "vx", "vy"});
    return std::make_shared<Uniform>(Vec2{number(d, "vx", 0.0), number(d, "vy", 0.0)});
  }
  throw ConfigError("unknown flow '" + name + "'");
}

bool sameDescriptor(const json &a, const json &b, double rel_tol) {
  if (a.type() != b.type()) {
    if (a.is_number() && b.is_number()) {
      const double x = a.get<double>(), y = b.get<double>();
      return std::abs(x - y) <= rel_tol * std::max({1.0, std::abs(x), std::abs(y)});
    }
    return false;
  }
  if (a.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    return std::abs(x - y) <= rel_tol * std::max({1.0, std::abs(x), std::abs(y)});
  }
  if (a.is_object()) {
    if (a.size() != b.size()) return false;
    for (const auto &[k, v] : a.items()) {
      if (!b.contains(k) || !sameDescriptor(v, b.at(k), rel_tol)) return false;
    }
    return true;
  }
  return a == b;
}

}  // namespace cftle
