#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "xtrace/errors.hpp"
#include "xtrace/matfree.hpp"

using namespace xtrace;

TEST_CASE("spectrum closed forms") {
  const Vector flat = make_spectrum({SpectrumFamily::Flat, 5});
  const double expected_flat[] = {3, 2.5, 2, 1.5, 1};
  for (int i = 0; i < 5; ++i) CHECK(flat[i] == doctest::Approx(expected_flat[i]).epsilon(1e-15));

  const Vector exp = make_spectrum({SpectrumFamily::Exp, 3});
  CHECK(exp[0] == 1.0);
  CHECK(exp[1] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(exp[2] == doctest::Approx(0.49).epsilon(1e-15));

  const Vector poly = make_spectrum({SpectrumFamily::Poly, 3});
  CHECK(poly[0] == 1.0);
  CHECK(poly[1] == 0.25);
  CHECK(poly[2] == doctest::Approx(1.0 / 9.0).epsilon(1e-15));

  const Vector inv = make_spectrum({SpectrumFamily::InvPoly, 2});
  CHECK(inv[0] == 1.0);
  CHECK(inv[1] == 1.75);

  const Vector step = make_spectrum({SpectrumFamily::Step, 60});
  CHECK(step.size() == 60);
  CHECK(step[49] == 1.0);
  CHECK(step[50] == kStepLevel);

  const Vector decay = make_spectrum({SpectrumFamily::StepDecay, 60});
  CHECK(decay[49] == 1.0);
  CHECK(decay[50] == doctest::Approx(1.0 / (51.0 * 51.0)).epsilon(1e-15));
  CHECK(decay[59] == doctest::Approx(1.0 / 3600.0).epsilon(1e-15));
}

TEST_CASE("step families need N above the plateau") {
  CHECK_THROWS_AS(make_spectrum({SpectrumFamily::Step, 50}), InvalidSpec);
  CHECK_THROWS_AS(make_spectrum({SpectrumFamily::StepDecay, 40}), InvalidSpec);
  CHECK_NOTHROW(make_spectrum({SpectrumFamily::Step, 51}));
}

TEST_CASE("spectrum spec parsing") {
  const auto spec = SpectrumSpec::parse("step:1000");
  CHECK(spec.family == SpectrumFamily::Step);
  CHECK(spec.dim == 1000);
  CHECK(SpectrumSpec::parse("inv-poly:7").family == SpectrumFamily::InvPoly);
  CHECK_THROWS_AS(SpectrumSpec::parse("step"), InvalidSpec);
  CHECK_THROWS_AS(SpectrumSpec::parse("step:40"), InvalidSpec);
  CHECK_THROWS_AS(SpectrumSpec::parse("wobbly:10"), InvalidSpec);
  CHECK_THROWS_AS(SpectrumSpec::parse("flat:12x"), InvalidSpec);
  CHECK_THROWS_AS(SpectrumSpec::parse("flat:0"), InvalidSpec);
}

TEST_CASE("exact trace examples") {
  CHECK(exact_trace(make_spectrum({SpectrumFamily::Flat, 1000})) == doctest::Approx(2000).epsilon(1e-14));
  CHECK(exact_trace(make_spectrum({SpectrumFamily::Step, 60})) == doctest::Approx(50.01).epsilon(1e-14));
  Vector v(5);
  v << 5, 4, 3, 2, 1;
  CHECK(exact_trace(v) == 15.0);
}

TEST_CASE("exact trace matches the analytically summed series") {
  // Series summed independently in long double (poly tails) or in closed form.
  const Index sizes[] = {51, 100, 1000, 20000};
  for (const Index n : sizes) {
    long double inv_sq = 0.0L;
    long double inv_sq_tail = 0.0L;
    for (Index i = n; i >= 1; --i) {
      const long double t = 1.0L / (static_cast<long double>(i) * i);
      inv_sq += t;
      if (i > kStepPlateau) inv_sq_tail += t;
    }
    const double nd = static_cast<double>(n);
    const double expected[] = {
        2.0 * nd,
        static_cast<double>(inv_sq),
        static_cast<double>(2.0L * n - inv_sq),
        (1.0 - std::pow(0.7, nd)) / 0.3,
        50.0 + (nd - 50.0) * kStepLevel,
        static_cast<double>(50.0L + inv_sq_tail),
    };
    int idx = 0;
    for (auto family : kAllFamilies) {
      const double got = exact_trace(make_spectrum({family, n}));
      CHECK_MESSAGE(std::abs(got - expected[idx]) <= 1e-12 * std::abs(expected[idx]),
                    to_string(family), " N=", n);
      ++idx;
    }
  }
}

TEST_CASE("diagonal operator action") {
  Vector lambda(5);
  lambda << 5, 4, 3, 2, 1;
  auto op = make_diagonal_operator(lambda);
  CHECK(op.apply(Vector::Unit(5, 0)).isApprox(5.0 * Matrix(Vector::Unit(5, 0))));

  auto id = make_diagonal_operator(Vector::Ones(2));
  CHECK(id.apply(Matrix::Identity(2, 2)) == Matrix::Identity(2, 2));

  Vector two(2);
  two << 2, 3;
  auto op2 = make_diagonal_operator(two);
  const Matrix y = op2.apply(Vector::Ones(2));
  CHECK(y(0, 0) == 2.0);
  CHECK(y(1, 0) == 3.0);

  CHECK_THROWS_AS(make_diagonal_operator(Vector()), InvalidInput);
}

TEST_CASE("dense operator") {
  std::mt19937_64 rng(3);
  const Matrix x = oracle::gaussian(rng, 3, 4);
  auto id = make_dense_operator(Matrix::Identity(3, 3));
  CHECK(id.apply(x) == x);

  Vector lambda(5);
  lambda << 5, 4, 3, 2, 1;
  auto dense = make_dense_operator(Matrix(lambda.asDiagonal()));
  auto diag = make_diagonal_operator(lambda);
  const Matrix probe = oracle::gaussian(rng, 5, 7);
  CHECK((dense.apply(probe) - diag.apply(probe)).cwiseAbs().maxCoeff() <= 1e-14 * probe.cwiseAbs().maxCoeff());

  const Matrix m = oracle::gaussian(rng, 10, 10);
  auto op = make_dense_operator(m);
  for (Index j = 0; j < 10; ++j) CHECK(op.apply(Vector::Unit(10, j)) == Matrix(m.col(j)));

  CHECK_THROWS_AS(make_dense_operator(Matrix(3, 4)), InvalidInput);
}

TEST_CASE("operators are linear on random probes") {
  std::mt19937_64 rng(11);
  auto op = make_dense_operator(oracle::gaussian(rng, 20, 20));
  auto diag = make_diagonal_operator(make_spectrum({SpectrumFamily::InvPoly, 20}));
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix x = oracle::gaussian(rng, 20, 3);
    const Matrix y = oracle::gaussian(rng, 20, 3);
    const double alpha = std::normal_distribution<double>()(rng);
    const double beta = std::normal_distribution<double>()(rng);
    for (auto* o : {&op, &diag}) {
      const Matrix lhs = o->apply(alpha * x + beta * y);
      const Matrix rhs = alpha * o->apply(x) + beta * o->apply(y);
      CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, rhs.norm()));
    }
  }
}

TEST_CASE("matvec accounting counts columns") {
  auto op = make_diagonal_operator(Vector::Ones(6));
  CHECK(op.matvec_count() == 0);
  op.apply(Matrix::Ones(6, 4));
  CHECK(op.matvec_count() == 4);
  op.apply(Vector::Ones(6));
  CHECK(op.matvec_count() == 5);
  CHECK_THROWS_AS(op.apply(Matrix::Ones(5, 1)), InvalidInput);
  CHECK(op.matvec_count() == 5);

  auto child = op.fork();
  CHECK(child.matvec_count() == 0);
  child.apply(Matrix::Ones(6, 2));
  CHECK(child.matvec_count() == 2);
  CHECK(op.matvec_count() == 5);
  op.reset_count();
  CHECK(op.matvec_count() == 0);
}
