#include <doctest.h>

#include <cmath>

#include "capcert/gaussmath.hpp"
#include "capcert/channels.hpp"
#include "capcert/rng.hpp"
#include "oracles.hpp"

using namespace capcert;
using gaussmath::CovarianceMatrix;

TEST_CASE("g_entropy reference values") {
  CHECK(gaussmath::g_entropy(1.0) == 0.0);
  CHECK(gaussmath::g_entropy(3.0) == doctest::Approx(2.0).epsilon(1e-14));
  // high-precision evaluation of 10.5 log2 10.5 - 9.5 log2 9.5
  CHECK(gaussmath::g_entropy(20.0) ==
        doctest::Approx(4.76402156146292084).epsilon(1e-13));
  CHECK(std::abs(gaussmath::g_entropy(20.0) - 4.7640) < 1e-3);
}

TEST_CASE("g_entropy domain handling") {
  CHECK_THROWS_AS(gaussmath::g_entropy(0.99), std::invalid_argument);
  CHECK_THROWS_AS(gaussmath::g_entropy(1.0 - 1e-6), std::invalid_argument);
  CHECK(gaussmath::g_entropy(1.0 - 1e-10) == 0.0);  // clamped
}

TEST_CASE("g_entropy series branch is continuous and increasing near 1") {
  double prev = gaussmath::g_entropy(1.0);
  for (double dx : {1e-12, 1e-9, 1e-7, 9e-7, 1.1e-6, 1e-5, 1e-3}) {
    const double v = gaussmath::g_entropy(1.0 + dx);
    CHECK(v > prev);
    prev = v;
  }
  // both branches track a long-double direct evaluation across the switch
  for (double dx : {0.2e-6, 0.999e-6, 1.001e-6, 5e-6}) {
    const long double u = static_cast<long double>(dx) / 2.0L;
    const double reference = static_cast<double>(
        ((1.0L + u) * std::log1p(u) - u * std::log(u)) / std::log(2.0L));
    CHECK(gaussmath::g_entropy(1.0 + dx) ==
          doctest::Approx(reference).epsilon(1e-12));
  }
}

TEST_CASE("g_entropy large-x asymptote") {
  // g(x) -> log2(e x / 2) for large x
  const double x = 1e4;
  const double asym = std::log2(std::exp(1.0) * x / 2.0);
  CHECK(std::abs(gaussmath::g_entropy(x) - asym) < 1e-3);
  // the rearranged huge-argument branch stays on the asymptote
  CHECK(gaussmath::g_entropy(1e16) ==
        doctest::Approx(std::log2(std::exp(1.0) * 1e16 / 2.0)).epsilon(1e-12));
}

TEST_CASE("gamma_fn reference values") {
  CHECK(gaussmath::gamma_fn(0.0) == 1.0);
  CHECK(gaussmath::gamma_fn(1.0) ==
        doctest::Approx(3.0 + 2.0 * std::sqrt(2.0)).epsilon(1e-14));
  CHECK(gaussmath::gamma_fn(3.0) ==
        doctest::Approx(16.45775689673284).epsilon(1e-12));
  CHECK(std::abs(gaussmath::gamma_fn(3.0) - 16.458) < 1e-3);
  CHECK(gaussmath::gamma_fn(1e-308) == 1.0);  // no overflow at the origin
  CHECK_THROWS_AS(gaussmath::gamma_fn(-0.1), std::invalid_argument);
}

TEST_CASE("gamma_fn is strictly increasing") {
  RngStream rng(11, 0);
  for (int i = 0; i < 1000; ++i) {
    double x1 = 50.0 * rng.uniform01();
    double x2 = 50.0 * rng.uniform01();
    if (x1 == x2) continue;
    if (x1 > x2) std::swap(x1, x2);
    CHECK(gaussmath::gamma_fn(x1) < gaussmath::gamma_fn(x2));
  }
}

TEST_CASE("binary_entropy") {
  CHECK(gaussmath::binary_entropy(0.0) == 0.0);
  CHECK(gaussmath::binary_entropy(1.0) == 0.0);
  CHECK(gaussmath::binary_entropy(0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(gaussmath::binary_entropy(0.11) ==
        doctest::Approx(0.49991595816452800).epsilon(1e-13));
  CHECK_THROWS_AS(gaussmath::binary_entropy(-0.01), std::invalid_argument);
  CHECK_THROWS_AS(gaussmath::binary_entropy(1.01), std::invalid_argument);
}

TEST_CASE("erf window probability") {
  CHECK(gaussmath::erf_probability_in_window(1e6, 1.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // alpha/sqrt(2 var) = 1
  CHECK(gaussmath::erf_probability_in_window(std::sqrt(2.0), 1.0) ==
        doctest::Approx(oracles::series_erf(1.0)).epsilon(1e-13));
  CHECK(gaussmath::erf_probability_in_window(std::sqrt(2.0), 1.0) ==
        doctest::Approx(0.8427007929497149).epsilon(1e-12));
  CHECK_THROWS_AS(gaussmath::erf_probability_in_window(0.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(gaussmath::erf_probability_in_window(1.0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("erf window tail keeps relative precision") {
  // alpha = 37 with thermal variance 20: the window argument is
  // 37/sqrt(40) = 5.8502..., whose tail is ~1.3e-16 (frozen from a
  // high-precision evaluation). The in-window probability rounds to 1 in
  // doubles, so protocol code consumes the tail form.
  const double tail = gaussmath::erf_tail_outside_window(37.0, 20.0);
  CHECK(tail == doctest::Approx(1.301357335556801e-16).epsilon(1e-10));
  CHECK(gaussmath::erf_probability_in_window(37.0, 20.0) ==
        doctest::Approx(1.0).epsilon(1e-15));
  // huge windows underflow cleanly to 0
  CHECK(gaussmath::erf_tail_outside_window(1000.0, 1.0) == 0.0);
}

TEST_CASE("symplectic eigenvalues of simple covariances") {
  const auto id = CovarianceMatrix(Eigen::MatrixXd::Identity(4, 4));
  const auto spec = gaussmath::symplectic_eigenvalues(id);
  REQUIRE(spec.values.size() == 2);
  CHECK(spec.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spec.values[1] == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::MatrixXd thermal = Eigen::MatrixXd::Zero(4, 4);
  thermal.diagonal() << 3, 3, 5, 5;
  const auto spec2 = gaussmath::symplectic_eigenvalues(CovarianceMatrix(thermal));
  CHECK(spec2.values[0] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(spec2.values[1] == doctest::Approx(3.0).epsilon(1e-12));

  const auto tmsv = channels::tmsv_cov(9.5);
  for (double nu : gaussmath::symplectic_eigenvalues(tmsv).values) {
    CHECK(std::abs(nu - 1.0) < 1e-9);
  }
}

TEST_CASE("symplectic eigenvalue error paths") {
  Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(4, 4);
  asym(0, 1) = 0.25;  // not symmetric
  CHECK_THROWS_AS(CovarianceMatrix{asym}, std::invalid_argument);

  Eigen::MatrixXd indef = Eigen::MatrixXd::Identity(4, 4);
  indef(0, 0) = -2.0;
  CHECK_THROWS_AS(gaussmath::symplectic_eigenvalues(CovarianceMatrix(indef)),
                  std::invalid_argument);
}

TEST_CASE("bona fide check") {
  CHECK(gaussmath::bona_fide_check(CovarianceMatrix(Eigen::MatrixXd::Identity(4, 4))));
  // pure two-mode squeezed correlations sit exactly on the physical boundary
  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(4, 4);
  xi.diagonal() << 20, 20, 20, 20;
  const double c = std::sqrt(399.0);
  xi(0, 2) = xi(2, 0) = c;
  xi(1, 3) = xi(3, 1) = -c;
  CHECK(gaussmath::bona_fide_check(CovarianceMatrix(xi)));

  // correlations beyond the physical limit
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(4, 4);
  bad(0, 2) = bad(2, 0) = 10.0;
  bad(1, 3) = bad(3, 1) = -10.0;
  CHECK_FALSE(gaussmath::bona_fide_check(CovarianceMatrix(bad)));
}

TEST_CASE("gaussian state entropy") {
  CHECK(gaussmath::gaussian_state_entropy(
            CovarianceMatrix(Eigen::MatrixXd::Identity(2, 2))) == 0.0);
  Eigen::MatrixXd thermal = 20.0 * Eigen::MatrixXd::Identity(2, 2);
  CHECK(gaussmath::gaussian_state_entropy(CovarianceMatrix(thermal)) ==
        doctest::Approx(4.764021561462921).epsilon(1e-12));
  for (double n_bar : {0.3, 2.0, 9.5}) {
    CHECK(std::abs(gaussmath::gaussian_state_entropy(channels::tmsv_cov(n_bar))) <
          1e-8);
  }
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2) * 0.2;
  CHECK_THROWS_AS(gaussmath::gaussian_state_entropy(CovarianceMatrix(bad)),
                  std::invalid_argument);
}

TEST_CASE("symplectic spectrum matches construction and complex-eig route") {
  RngStream rng(202, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rc = oracles::random_bona_fide(2, rng);
    const auto m = CovarianceMatrix::symmetrized(rc.matrix);
    const auto spec = gaussmath::symplectic_eigenvalues(m);
    const auto reference = oracles::symplectic_spectrum_complex_route(m.entries());
    REQUIRE(spec.values.size() == 2);
    for (int i = 0; i < 2; ++i) {
      CHECK(spec.values[static_cast<size_t>(i)] ==
            doctest::Approx(reference[static_cast<size_t>(i)]).epsilon(1e-10));
      // construction spectrum is exact up to the S D S^T rounding
      CHECK(spec.values[static_cast<size_t>(i)] ==
            doctest::Approx(rc.spectrum[static_cast<size_t>(i)]).epsilon(1e-8));
    }
    // det consistency
    CHECK(spec.product_squared() ==
          doctest::Approx(m.entries().determinant()).epsilon(1e-8));
  }
}

TEST_CASE("symplectic invariance of the spectrum") {
  RngStream rng(203, 0);
  for (int trial = 0; trial < 25; ++trial) {
    const auto rc = oracles::random_bona_fide(2, rng);
    const auto m = CovarianceMatrix::symmetrized(rc.matrix);
    const auto s = oracles::random_symplectic(2, rng);
    const auto transformed =
        CovarianceMatrix::symmetrized(s * m.entries() * s.transpose());
    const auto spec1 = gaussmath::symplectic_eigenvalues(m);
    const auto spec2 = gaussmath::symplectic_eigenvalues(transformed);
    for (int i = 0; i < 2; ++i) {
      CHECK(spec1.values[static_cast<size_t>(i)] ==
            doctest::Approx(spec2.values[static_cast<size_t>(i)]).epsilon(1e-8));
    }
  }
}
