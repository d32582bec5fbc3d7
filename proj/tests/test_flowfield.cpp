#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

#include "cftle/flowfield.hpp"
#include "support.hpp"

using namespace cftle;

namespace {
constexpr double kPi = std::numbers::pi;

DoubleGyreParams steady() {
  DoubleGyreParams p;
  p.epsilon = 0.0;
  return p;
}
}  // namespace

TEST_CASE("double gyre: spot values") {
  const Vec2 c = doubleGyreVelocity({0.5, 0.5}, 3.7, steady());
  CHECK(std::abs(c.x) < 1e-15);
  CHECK(std::abs(c.y) < 1e-15);

  const Vec2 v = doubleGyreVelocity({1.0, 0.5}, 1.3, steady());
  CHECK(std::abs(v.x) < 1e-15);
  CHECK(v.y == doctest::Approx(-kPi * 0.1).epsilon(1e-14));

  DoubleGyreParams p;
  for (double x : {0.0, 0.3, 1.1, 2.0})
    for (double t : {0.0, 2.5, 7.1}) CHECK(doubleGyreVelocity({x, 0.0}, t, p).y == 0.0);
}

TEST_CASE("double gyre: unsteady value against a hand-written formula") {
  // Independent re-derivation of f and v at one point.
  const double A = 0.1, eps = 0.25, w = 2 * kPi / 10, x = 0.7, y = 0.3, t = 1.9;
  const double a = eps * std::sin(w * t), b = 1 - 2 * a;
  const double f = a * x * x + b * x;
  const Vec2 v = doubleGyreVelocity({x, y}, t, {});
  CHECK(v.x == doctest::Approx(-kPi * A * std::sin(kPi * f) * std::cos(kPi * y)).epsilon(1e-14));
  CHECK(v.y == doctest::Approx(kPi * A * std::cos(kPi * f) * std::sin(kPi * y)).epsilon(1e-14));
}

TEST_CASE("double gyre: steady when epsilon is zero") {
  auto rng = testRng();
  std::uniform_real_distribution<double> ux(0, 2), uy(0, 1), ut(-50, 50);
  for (int n = 0; n < 20; ++n) {
    const Vec2 p{ux(rng), uy(rng)};
    const Vec2 ref = doubleGyreVelocity(p, 0.0, steady());
    for (int k = 0; k < 10; ++k) CHECK(doubleGyreVelocity(p, ut(rng), steady()) == ref);
  }
}

TEST_CASE("double gyre: no flux through the box edges") {
  auto rng = testRng(7);
  std::uniform_real_distribution<double> s(0, 1), ut(0, 30);
  for (double eps : {0.0, 0.25, 0.4}) {
    DoubleGyreParams p;
    p.epsilon = eps;
    for (int n = 0; n < 200; ++n) {
      const double t = ut(rng);
      const double xs = 2 * s(rng), ys = s(rng);
      CHECK(std::abs(doubleGyreVelocity({xs, 0.0}, t, p).y) < 1e-14);
      CHECK(std::abs(doubleGyreVelocity({xs, 1.0}, t, p).y) < 1e-14);
      CHECK(std::abs(doubleGyreVelocity({0.0, ys}, t, p).x) < 1e-14);
      CHECK(std::abs(doubleGyreVelocity({2.0, ys}, t, p).x) < 1e-14);
    }
  }
}

TEST_CASE("double gyre: mirror symmetry about x = 1 when steady") {
  auto rng = testRng(11);
  std::uniform_real_distribution<double> ux(0, 2), uy(0, 1);
  for (int n = 0; n < 500; ++n) {
    const Vec2 p{ux(rng), uy(rng)};
    const Vec2 a = doubleGyreVelocity(p, 0.0, steady());
    const Vec2 b = doubleGyreVelocity({2.0 - p.x, p.y}, 0.0, steady());
    CHECK(std::abs(a.x + b.x) < 1e-14);
    CHECK(std::abs(a.y - b.y) < 1e-14);
  }
}

TEST_CASE("double gyre: periodic in time") {
  DoubleGyreParams p;
  auto rng = testRng(3);
  std::uniform_real_distribution<double> ux(0, 2), uy(0, 1), ut(0, 20);
  for (int n = 0; n < 200; ++n) {
    const Vec2 q{ux(rng), uy(rng)};
    const double t = ut(rng);
    const Vec2 a = doubleGyreVelocity(q, t, p), b = doubleGyreVelocity(q, t + p.period(), p);
    CHECK(std::abs(a.x - b.x) < 1e-12);
    CHECK(std::abs(a.y - b.y) < 1e-12);
  }
}

TEST_CASE("double gyre: analytic gradient matches finite differences") {
  const DoubleGyre g({});
  auto rng = testRng(5);
  std::uniform_real_distribution<double> ux(0, 2), uy(0, 1), ut(0, 10);
  const double h = 1e-6;
  for (int n = 0; n < 50; ++n) {
    const Vec2 p{ux(rng), uy(rng)};
    const double t = ut(rng);
    const Mat2 G = g.gradient(p, t);
    const Vec2 dx = (g.velocity({p.x + h, p.y}, t) - g.velocity({p.x - h, p.y}, t)) * (0.5 / h);
    const Vec2 dy = (g.velocity({p.x, p.y + h}, t) - g.velocity({p.x, p.y - h}, t)) * (0.5 / h);
    CHECK(G.a == doctest::Approx(dx.x).epsilon(1e-6).scale(1));
    CHECK(G.c == doctest::Approx(dx.y).epsilon(1e-6).scale(1));
    CHECK(G.b == doctest::Approx(dy.x).epsilon(1e-6).scale(1));
    CHECK(G.d == doctest::Approx(dy.y).epsilon(1e-6).scale(1));
    Vec2 v;
    Mat2 G2;
    g.evaluate(p, t, v, G2);
    CHECK(v == g.velocity(p, t));
  }
}

TEST_CASE("saddle and rotation") {
  CHECK(saddleVelocity({1, 1}, 0, 1) == Vec2{1, -1});
  CHECK(saddleVelocity({0, 0}, 0, 1) == Vec2{0, 0});
  CHECK(saddleVelocity({2, 3}, 0, 0.5) == Vec2{1, -1.5});
  CHECK(rotationVelocity({1, 0}, 0, 1) == Vec2{0, 1});
  CHECK(rotationVelocity({0, 0}, 0, 5) == Vec2{0, 0});
  CHECK(rotationVelocity({0, 2}, 0, 1) == Vec2{-2, 0});
}

TEST_CASE("descriptors round-trip through makeField") {
  const nlohmann::json descs[] = {
      {{"name", "double_gyre"}, {"A", 0.1}, {"epsilon", 0.25}, {"omega", 2 * kPi / 10}},
      {{"name", "saddle"}, {"lambda", 0.5}},
      {{"name", "rotation"}, {"omega", 2.0}},
      {{"name", "zero"}},
      {{"name", "uniform"}, {"vx", 0.1}, {"vy", -0.2}},
  };
  for (const auto &d : descs) {
    const FieldPtr f = makeField(d);
    CHECK(sameDescriptor(f->descriptor(), d));
  }
  CHECK(makeField({{"name", "double_gyre"}})->period().value() == doctest::Approx(10.0));
  CHECK_FALSE(makeField({{"name", "saddle"}})->period().has_value());
}

TEST_CASE("makeField rejects bad descriptors") {
  CHECK_THROWS_AS(makeField({{"name", "vortex"}}), ConfigError);
  CHECK_THROWS_AS(makeField({{"name", "saddle"}, {"lamda", 1.0}}), ConfigError);
  CHECK_THROWS_AS(makeField({{"name", "double_gyre"}, {"epsilon", 0.5}}), ConfigError);
  CHECK_THROWS_AS(makeField({{"name", "double_gyre"}, {"A", -1.0}}), ConfigError);
  CHECK_THROWS_AS(makeField({{"name", "double_gyre"}, {"omega", 0.0}}), ConfigError);
  CHECK_THROWS_AS(makeField(nlohmann::json::array()), ConfigError);
}
