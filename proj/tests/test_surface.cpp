#include <hlab/surface.hpp>

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <random>

using namespace hlab;

namespace {

TimeDependentHamiltonian single_bump(RadialBump::Shape shape, Vec2 c, double rho, double a, double integral,
                                     double domain_radius = 3.0) {
  TimeDependentHamiltonian h;
  h.domain = SurfaceDomain::disc(c, domain_radius);
  h.terms.push_back({RadialBump{shape, c, rho, a}, TemporalProfile{0.1, 0.9, integral}});
  return h;
}

}  // namespace

TEST(TemporalProfile, UnitMassAndSupport) {
  const TemporalProfile p{0.2, 0.7, 1.5};
  boost::math::quadrature::gauss_kronrod<double, 61> gk;
  EXPECT_NEAR(gk.integrate([&](double t) { return p.rate(t); }, 0.0, 1.0, 20, 1e-14), 1.5, 1e-12);
  EXPECT_EQ(p.rate(0.1), 0.0);
  EXPECT_EQ(p.rate(0.8), 0.0);
  EXPECT_EQ(p.cumulative(0.1), 0.0);
  EXPECT_EQ(p.cumulative(0.95), 1.5);
  EXPECT_NEAR(p.cumulative(0.45), 0.75, 1e-13);  // symmetric kernel
}

TEST(TemporalProfile, RejectsBadWindows) {
  EXPECT_THROW((TemporalProfile{0.0, 0.5, 1.0}.validate()), ValidationError);
  EXPECT_THROW((TemporalProfile{0.5, 0.5, 1.0}.validate()), ValidationError);
  EXPECT_THROW((TemporalProfile{0.2, 1.0, 1.0}.validate()), ValidationError);
}

TEST(RadialBump, ClosedFormIntegrals) {
  const RadialBump poly{RadialBump::Shape::polynomial, {0, 0}, 0.5, 2.0};
  EXPECT_NEAR(poly.integral(), 2.0 * pi * 0.25 / 4.0, 1e-15);
  const RadialBump smooth{RadialBump::Shape::smooth, {0, 0}, 1.0, 1.0};
  EXPECT_NEAR(smooth.integral(), pi * 0.403652637676806, 1e-12);
}

TEST(HamVectorField, Examples) {
  const TimeDependentHamiltonian zero{SurfaceDomain::disc({0, 0}, 1.0), {}};
  const Vec2 x0 = ham_vector_field(zero, 0.5, {0.2, 0.1});
  EXPECT_EQ(x0.x, 0.0);
  EXPECT_EQ(x0.y, 0.0);

  // Radial H = h(t) g(r^2): X = 2 h g'(r^2) (y, -x).
  const auto h = single_bump(RadialBump::Shape::polynomial, {0, 0}, 1.0, 1.5, 1.0);
  const double t = 0.5;
  const Vec2 p{0.3, -0.4};
  const double s = dot(Vec3{p.x, p.y, 0}, Vec3{p.x, p.y, 0});
  const double gprime = -3.0 * 1.5 * std::pow(1 - s, 2);
  const Vec2 x = ham_vector_field(h, t, p);
  const double rate = h.terms[0].time.rate(t);
  EXPECT_NEAR(x.x, 2 * rate * gprime * p.y, 1e-14);
  EXPECT_NEAR(x.y, -2 * rate * gprime * p.x, 1e-14);

  const Vec2 outside = ham_vector_field(h, t, {1.5, 0.0});
  EXPECT_EQ(outside.x, 0.0);
  EXPECT_EQ(outside.y, 0.0);
  EXPECT_THROW(ham_vector_field(h, t, {5.0, 0.0}), DomainError);
}

TEST(Isotopy, TrivialAndOutsideSupport) {
  const TimeDependentHamiltonian zero{SurfaceDomain::disc({0, 0}, 1.0), {}};
  const Vec2 p{0.3, 0.2};
  EXPECT_TRUE(integrate_isotopy(zero, p, 1.0) == p);
  const auto h = single_bump(RadialBump::Shape::smooth, {0, 0}, 1.0, 1.0, 1.0);
  const Vec2 far{1.2, -0.7};
  EXPECT_TRUE(integrate_isotopy(h, far, 1.0) == far);
  EXPECT_TRUE(integrate_isotopy(h, p, 0.0) == p);
}

TEST(Isotopy, RadialOrbitAngle) {
  const auto h = single_bump(RadialBump::Shape::smooth, {0.5, -0.25}, 1.0, 1.3, 0.8);
  for (double r : {0.2, 0.5, 0.8}) {
    const Vec2 p = Vec2{0.5, -0.25} + Vec2{r, 0.0};
    const double gprime = h.terms[0].bump.profile(r * r).second;
    for (double t : {0.35, 0.6, 1.0}) {
      const Vec2 q = integrate_isotopy(h, p, t) - Vec2{0.5, -0.25};
      EXPECT_NEAR(norm(q), r, 1e-8);
      const double theta = -2.0 * gprime * h.terms[0].time.cumulative(t);
      const double got = std::atan2(q.y, q.x);
      EXPECT_NEAR(std::remainder(got - theta, two_pi), 0.0, 1e-8);
    }
  }
}

TEST(RadialBump, HessianMatchesGradientDifferences) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  const double d = 1e-6;
  for (auto shape : {RadialBump::Shape::smooth, RadialBump::Shape::polynomial}) {
    const RadialBump b{shape, {0.1, -0.2}, 0.8, 1.7};
    for (int i = 0; i < 20; ++i) {
      const Vec2 p{u(gen), u(gen)};
      const Vec2 gx = (1.0 / (2 * d)) * (b.gradient(p + Vec2{d, 0}) - b.gradient(p - Vec2{d, 0}));
      const Vec2 gy = (1.0 / (2 * d)) * (b.gradient(p + Vec2{0, d}) - b.gradient(p - Vec2{0, d}));
      const auto [hxx, hxy, hyy] = b.hessian(p);
      EXPECT_NEAR(hxx, gx.x, 1e-5);
      EXPECT_NEAR(hxy, gx.y, 1e-5);
      EXPECT_NEAR(hxy, gy.x, 1e-5);
      EXPECT_NEAR(hyy, gy.y, 1e-5);
    }
  }
}

TEST(Isotopy, AreaPreservation) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  TimeDependentHamiltonian h = single_bump(RadialBump::Shape::smooth, {0, 0}, 1.0, 1.0, 1.0);
  h.terms.push_back({RadialBump{RadialBump::Shape::polynomial, {0.4, 0.3}, 0.6, -2.0}, TemporalProfile{0.3, 0.8, 1.0}});
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(isotopy_jacobian(h, {u(gen), u(gen)}, 1.0), 1.0, 1e-6);
}

TEST(Calabi, Examples) {
  const TimeDependentHamiltonian zero{SurfaceDomain::disc({0, 0}, 1.0), {}};
  EXPECT_EQ(calabi(zero), 0.0);
  const auto h1 = single_bump(RadialBump::Shape::polynomial, {0, 0}, 0.7, 1.3, 1.0);
  EXPECT_NEAR(calabi(h1), 1.3 * pi * 0.49 / 2.0, 1e-15);
  EXPECT_NEAR(calabi_quadrature(h1), calabi(h1), 1e-10);
  const auto h2 = single_bump(RadialBump::Shape::polynomial, {0, 0}, 0.7, 1.3, 0.5);
  EXPECT_NEAR(calabi(h2), 1.3 * pi * 0.49 / 4.0, 1e-15);
  EXPECT_NEAR(calabi_quadrature(h2), calabi(h2), 1e-10);
  const auto h3 = single_bump(RadialBump::Shape::smooth, {0.2, 0.1}, 0.9, -0.6, 1.7);
  EXPECT_NEAR(calabi_quadrature(h3), calabi(h3), 1e-10);
}

TEST(Calabi, ConcatenationIsAdditive) {
  const auto h = single_bump(RadialBump::Shape::smooth, {0, 0}, 1.0, 1.0, 1.0);
  const TimeDependentHamiltonian zero{h.domain, {}};
  EXPECT_NEAR(calabi(concatenate(h, zero)), calabi(h), 1e-15);
  EXPECT_NEAR(calabi(concatenate(h, h)), 2 * calabi(h), 1e-14);
  EXPECT_NEAR(calabi_quadrature(concatenate(h, h)), 2 * calabi(h), 1e-10);
  EXPECT_NEAR(calabi(concatenate(h, reversed(h))), 0.0, 1e-15);
  EXPECT_THROW(concatenate(h, single_bump(RadialBump::Shape::smooth, {0, 0}, 1.0, 1.0, 1.0, 2.0)), DomainError);
}

TEST(Calabi, ConcatenationTimeOneMaps) {
  const auto h = single_bump(RadialBump::Shape::smooth, {0, 0}, 1.0, 1.0, 1.0);
  const TimeDependentHamiltonian zero{h.domain, {}};
  const Vec2 p{0.3, 0.4};
  EXPECT_LE(norm(integrate_isotopy(concatenate(h, zero), p, 1.0) - integrate_isotopy(h, p, 1.0)), 1e-9);
  EXPECT_LE(norm(integrate_isotopy(concatenate(h, reversed(h)), p, 1.0) - p), 1e-9);
}

TEST(Calabi, RigidNaturality) {
  const auto h = single_bump(RadialBump::Shape::polynomial, {0.1, 0.2}, 0.8, 0.9, 1.2);
  for (const RigidMotion2 m : {RigidMotion2{0.7, {1.0, -2.0}}, RigidMotion2{-2.1, {0.0, 0.5}}}) {
    const auto moved = transformed(h, m);
    EXPECT_NEAR(calabi_quadrature(moved), calabi(h), 1e-10);
    const Vec2 p{0.3, 0.1};
    // iota o phi = phi' o iota
    EXPECT_LE(norm(m.apply(integrate_isotopy(h, p, 1.0)) - integrate_isotopy(moved, m.apply(p), 1.0)), 1e-10);
  }
}

TEST(Simplify, MergesAndCancels) {
  const auto h = single_bump(RadialBump::Shape::smooth, {0, 0}, 1.0, 1.0, 1.0);
  EXPECT_TRUE(simplify(combined(h, negated(h))).terms.empty());
  const auto twice = simplify(combined(h, h));
  ASSERT_EQ(twice.terms.size(), 1u);
  EXPECT_EQ(twice.terms[0].time.integral, 2.0);
}
