#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <random>

#include "../support.hpp"
#include "kanfric/spline.hpp"

using namespace kanfric;

TEST_CASE("uniform grid knot and basis counts") {
  const auto g = make_uniform_grid(-1.0, 1.0, 2, 1);
  REQUIRE(g.knots.size() == 5);
  CHECK(g.basis_count() == 3);
  const double expected[] = {-2, -1, 0, 1, 2};
  for (int k = 0; k < 5; ++k) CHECK(g.knots[k] == doctest::Approx(expected[k]).epsilon(1e-15));

  const auto small = make_uniform_grid(0.0, 1.0, 1, 1);
  REQUIRE(small.knots.size() == 4);
  CHECK(small.basis_count() == 2);
  CHECK(small.knots[0] == -1.0);
  CHECK(small.knots[3] == 2.0);

  const auto standard = make_uniform_grid(-1.0, 1.0, 10, 3);
  CHECK(standard.knots.size() == 17);
  CHECK(standard.basis_count() == 13);
}

TEST_CASE("grid endpoints are knots and knots increase") {
  const auto g = make_uniform_grid(-0.3, 2.7, 7, 3);
  CHECK(g.knots[g.order] == -0.3);
  CHECK(g.knots[g.order + g.intervals] == 2.7);
  for (Eigen::Index k = 1; k < g.knots.size(); ++k) CHECK(g.knots[k] > g.knots[k - 1]);
}

TEST_CASE("grid construction rejects bad arguments") {
  CHECK_THROWS_AS(make_uniform_grid(1.0, 1.0, 3, 3), std::invalid_argument);
  CHECK_THROWS_AS(make_uniform_grid(1.0, -1.0, 3, 3), std::invalid_argument);
  CHECK_THROWS_AS(make_uniform_grid(-1.0, 1.0, 0, 3), std::invalid_argument);
  CHECK_THROWS_AS(make_uniform_grid(-1.0, 1.0, 3, 0), std::invalid_argument);
}

TEST_CASE("degree-1 hat functions by hand") {
  const auto g = make_uniform_grid(-1.0, 1.0, 2, 1);
  const Eigen::VectorXd b = basis_all(-0.5, g);
  CHECK(b[0] == doctest::Approx(0.5));
  CHECK(b[1] == doctest::Approx(0.5));
  CHECK(b[2] == 0.0);
  const Eigen::VectorXd d = basis_all_derivative(-0.5, g);
  CHECK(d[0] == doctest::Approx(-1.0));
  CHECK(d[1] == doctest::Approx(1.0));
  CHECK(d[2] == 0.0);
  CHECK(b.sum() == doctest::Approx(1.0));
}

TEST_CASE("far outside the extended knots the basis is zero") {
  const auto g = make_uniform_grid(-1.0, 1.0, 2, 1);
  CHECK(basis_all(5.0, g).isZero(0.0));
  CHECK(basis_all(-5.0, g).isZero(0.0));
  CHECK(basis_all_derivative(5.0, g).isZero(0.0));
}

TEST_CASE("non-finite input is rejected") {
  const auto g = make_uniform_grid(-1.0, 1.0, 4, 3);
  CHECK_THROWS_AS(basis_all(std::nan(""), g), std::invalid_argument);
  CHECK_THROWS_AS(basis_all(std::numeric_limits<double>::infinity(), g), std::invalid_argument);
  CHECK_THROWS_AS(basis_all_derivative(std::nan(""), g), std::invalid_argument);
}

TEST_CASE("basis matches the truncated-power oracle") {
  std::mt19937_64 rng(11);
  for (int r = 1; r <= 4; ++r) {
    const auto g = make_uniform_grid(-1.0, 1.0, 6, r);
    std::uniform_real_distribution<double> u(-1.6, 1.6);
    for (int s = 0; s < 200; ++s) {
      const double x = u(rng);
      const Eigen::VectorXd b = basis_all(x, g);
      for (int m = 0; m < g.basis_count(); ++m) CHECK(b[m] == doctest::Approx(testing::uniform_basis(x, g, m)).epsilon(1e-10));
    }
  }
}

TEST_CASE("properties over randomized grids") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> gi(1, 12), ri(1, 4);
  std::uniform_real_distribution<double> lo(-3.0, 1.0), width(0.1, 5.0);
  double worst_unity = 0, worst_fd = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const double a = lo(rng), b = a + width(rng);
    const auto g = make_uniform_grid(a, b, gi(rng), ri(rng));
    std::uniform_real_distribution<double> inside(a, b);
    for (int s = 0; s < 1000; ++s) {
      const double x = inside(rng);
      const Eigen::VectorXd v = basis_all(x, g);
      worst_unity = std::max(worst_unity, std::abs(v.sum() - 1.0));
      CHECK(v.minCoeff() >= 0.0);
      // local support: B_m vanishes outside [t_m, t_{m+r+1}]
      for (int m = 0; m < g.basis_count(); ++m)
        if (x < g.knots[m] || x > g.knots[m + g.order + 1]) CHECK(v[m] == 0.0);
      CHECK((v.array() > 0).count() <= g.order + 1);
      if (s % 10 == 0) {
        const double h = 1e-6;
        const Eigen::VectorXd fd = (basis_all(x + h, g) - basis_all(x - h, g)) / (2 * h);
        const Eigen::VectorXd d = basis_all_derivative(x, g);
        worst_fd = std::max(worst_fd, (fd - d).cwiseAbs().maxCoeff());
        CHECK(std::abs(d.sum()) < 1e-9);
      }
    }
  }
  CHECK(worst_unity <= 1e-12);
  CHECK(worst_fd <= 1e-5);
}

TEST_CASE("each basis function covers at most r+1 spans") {
  const auto g = make_uniform_grid(-1.0, 1.0, 8, 3);
  const double h = 0.25;
  for (int m = 0; m < g.basis_count(); ++m) {
    int spans = 0;
    for (int s = 0; s < g.knot_count() - 1; ++s) {
      const double mid = g.knots[s] + 0.5 * h;
      spans += basis_all(mid, g)[m] > 0;
    }
    CHECK(spans <= g.order + 1);
  }
}

TEST_CASE("batch basis matrix equals row-wise evaluation") {
  const auto g = make_uniform_grid(-1.0, 1.0, 5, 3);
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(17, -1.2, 1.2);
  const Eigen::MatrixXd B = basis_matrix(x, g), D = basis_derivative_matrix(x, g);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    CHECK((B.row(i).transpose() - basis_all(x[i], g)).norm() == 0.0);
    CHECK((D.row(i).transpose() - basis_all_derivative(x[i], g)).norm() == 0.0);
  }
}

TEST_CASE("long double instantiation agrees with double") {
  const auto gd = make_uniform_grid(-1.0, 1.0, 10, 3);
  const auto gl = make_uniform_grid<long double>(-1.0L, 1.0L, 10, 3);
  for (double x : {-0.93, -0.1, 0.0, 0.37, 0.999}) {
    const auto bl = basis_all<long double>(x, gl);
    CHECK(std::abs(static_cast<double>(bl.sum()) - 1.0) < 1e-15);
    CHECK((bl.cast<double>() - basis_all(x, gd)).cwiseAbs().maxCoeff() < 1e-14);
  }
}
