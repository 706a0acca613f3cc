#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "capcert/channels.hpp"
#include "oracles.hpp"

using namespace capcert;
using channels::ChannelModel;
using channels::Quadrature;
using gaussmath::CovarianceMatrix;

TEST_CASE("channel parameter validation") {
  CHECK_THROWS_AS(ChannelModel::loss(0.0), std::invalid_argument);
  CHECK_THROWS_AS(ChannelModel::loss(1.2), std::invalid_argument);
  CHECK_THROWS_AS(ChannelModel::loss(0.5, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(ChannelModel::amplifier(0.9), std::invalid_argument);
  CHECK_THROWS_AS(ChannelModel::additive(-0.1), std::invalid_argument);
  CHECK(ChannelModel::loss(1.0).scale() == 1.0);
}

TEST_CASE("channel JSON round trip rejects unknown keys") {
  nlohmann::json j;
  to_json(j, ChannelModel::loss(0.8, 0.5));
  ChannelModel back = ChannelModel::identity();
  from_json(j, back);
  CHECK(back.tau() == 0.8);
  CHECK(back.n_th() == 0.5);

  nlohmann::json bad = {{"kind", "loss"}, {"tau", 0.8}, {"gain", 2.0}};
  CHECK_THROWS_AS(from_json(bad, back), std::invalid_argument);
  nlohmann::json unknown = {{"kind", "squeeze"}};
  CHECK_THROWS_AS(from_json(unknown, back), std::invalid_argument);
}

TEST_CASE("probe ensemble squeezing relation") {
  const auto p = channels::ProbeEnsemble::from_squeezing_db(100, 13.0, 37.0, 7);
  CHECK(p.n_bar ==
        doctest::Approx((std::pow(10.0, 1.3) - 1.0) / 2.0).epsilon(1e-15));
  const auto q = channels::ProbeEnsemble::from_mean_photon(100, 9.5, 37.0, 7);
  CHECK(q.n_bar == doctest::Approx(9.5).epsilon(1e-12));
  CHECK(channels::n_bar_from_squeezing_db(q.squeezing_db) ==
        doctest::Approx(9.5).epsilon(1e-12));
}

TEST_CASE("tmsv covariance") {
  const auto vac = channels::tmsv_cov(0.0);
  CHECK((vac.entries() - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() ==
        0.0);

  const auto m = channels::tmsv_cov(9.5);
  CHECK(m(0, 0) == 20.0);
  CHECK(m(3, 3) == 20.0);
  CHECK(m(0, 2) == doctest::Approx(std::sqrt(399.0)).epsilon(1e-15));
  CHECK(m(1, 3) == doctest::Approx(-std::sqrt(399.0)).epsilon(1e-15));
  CHECK(gaussmath::bona_fide_check(m));
  CHECK_THROWS_AS(channels::tmsv_cov(-0.5), std::invalid_argument);
}

TEST_CASE("apply_channel_cov examples") {
  const auto m = channels::tmsv_cov(9.5);
  SUBCASE("identity leaves the matrix untouched") {
    const auto out = channels::apply_channel_cov(ChannelModel::identity(), m, 1);
    CHECK((out.entries() - m.entries()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("loss on the transmitted arm") {
    const auto out =
        channels::apply_channel_cov(ChannelModel::loss(0.8, 0.0), m, 1);
    CHECK(out(0, 0) == 20.0);
    CHECK(out(2, 2) == doctest::Approx(16.2).epsilon(1e-14));
    CHECK(out(3, 3) == doctest::Approx(16.2).epsilon(1e-14));
    CHECK(out(0, 2) ==
          doctest::Approx(std::sqrt(0.8) * std::sqrt(399.0)).epsilon(1e-14));
    CHECK(gaussmath::bona_fide_check(out));
  }
  SUBCASE("loss on single-mode vacuum") {
    const CovarianceMatrix vac(Eigen::MatrixXd::Identity(2, 2));
    const auto out =
        channels::apply_channel_cov(ChannelModel::loss(0.3, 2.0), vac, 0);
    const double expect = 0.3 + 0.7 * 5.0;
    CHECK(out(0, 0) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(out(1, 1) == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("invalid mode index") {
    CHECK_THROWS_AS(channels::apply_channel_cov(ChannelModel::identity(), m, 2),
                    std::out_of_range);
  }
}

TEST_CASE("sample_channel_quadrature determinism and exact cases") {
  RngStream rng(5, 0);
  CHECK(channels::sample_channel_quadrature(ChannelModel::identity(), 1.23,
                                            Quadrature::position, rng) == 1.23);
  CHECK(channels::sample_channel_quadrature(ChannelModel::loss(1.0, 3.0), 2.0,
                                            Quadrature::position, rng) == 2.0);

  RngStream a(42, 7), b(42, 7);
  const auto ch = ChannelModel::loss(0.5, 1.0);
  for (int i = 0; i < 100; ++i) {
    CHECK(channels::sample_channel_quadrature(ch, 0.1 * i, Quadrature::momentum, a) ==
          channels::sample_channel_quadrature(ch, 0.1 * i, Quadrature::momentum, b));
  }
}

TEST_CASE("sampled noise variance matches the analytic channel noise") {
  RngStream rng(99, 1);
  const auto ch = ChannelModel::loss(0.5, 0.0);
  const int n = 100000;
  std::vector<double> out(n);
  for (auto& v : out) {
    v = channels::sample_channel_quadrature(ch, 0.0, Quadrature::position, rng);
  }
  const double var = oracles::sample_variance(out);
  // chi^2 band: sd(sample var) ~ var * sqrt(2/(n-1))
  const double band = 3.0 * 0.5 * std::sqrt(2.0 / (n - 1));
  CHECK(std::abs(var - 0.5) < band);
}

TEST_CASE("sample-level and covariance-level agreement") {
  // feed x ~ N(0, v) through each channel and compare empirical
  // (input, output) second moments with the covariance action
  RngStream rng(100, 2);
  const double v_in = 3.7;
  const int n = 100000;
  const std::vector<ChannelModel> chans = {
      ChannelModel::loss(0.8, 0.5), ChannelModel::amplifier(1.5, 0.25),
      ChannelModel::additive(0.9)};
  for (const auto& ch : chans) {
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
      xs[static_cast<size_t>(i)] = rng.gaussian(0.0, v_in);
      ys[static_cast<size_t>(i)] = channels::sample_channel_quadrature(
          ch, xs[static_cast<size_t>(i)], Quadrature::position, rng);
    }
    const double s = ch.scale();
    const double expect_var = s * s * v_in + ch.added_noise_variance();
    const double expect_cov = s * v_in;
    // 5 standard errors of each moment estimate
    const double se_var = expect_var * std::sqrt(2.0 / (n - 1));
    const double se_cov =
        std::sqrt((v_in * expect_var + expect_cov * expect_cov) / (n - 1));
    CHECK(std::abs(oracles::sample_variance(ys) - expect_var) < 5.0 * se_var);
    CHECK(std::abs(oracles::sample_covariance(xs, ys) - expect_cov) <
          5.0 * se_cov);
  }
}

TEST_CASE("covariance action preserves bona fide") {
  RngStream rng(300, 0);
  const std::vector<ChannelModel> chans = {
      ChannelModel::identity(), ChannelModel::loss(0.6, 1.5),
      ChannelModel::amplifier(2.0, 0.5), ChannelModel::additive(1.2)};
  for (const auto& ch : chans) {
    for (int trial = 0; trial < 200; ++trial) {
      const auto rc = oracles::random_bona_fide(2, rng);
      const auto m = CovarianceMatrix::symmetrized(rc.matrix);
      const auto out = channels::apply_channel_cov(ch, m, trial % 2);
      CHECK(gaussmath::bona_fide_check(out));
    }
  }
}

TEST_CASE("phase insensitivity at the covariance level") {
  // rotating the mode quadratures commutes with the channel action
  RngStream rng(301, 0);
  const std::vector<ChannelModel> chans = {ChannelModel::loss(0.7, 0.8),
                                           ChannelModel::amplifier(1.8, 0.2),
                                           ChannelModel::additive(0.4)};
  for (const auto& ch : chans) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto rc = oracles::random_bona_fide(2, rng);
      const auto m = CovarianceMatrix::symmetrized(rc.matrix);
      const double theta = 2.0 * M_PI * rng.uniform01();
      Eigen::Matrix2d rot;
      rot << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
      const Eigen::MatrixXd r = oracles::embed_single_mode(2, 1, rot);

      const auto rotate_then_apply = channels::apply_channel_cov(
          ch, CovarianceMatrix::symmetrized(r * m.entries() * r.transpose()), 1);
      const auto apply_then_rotate_m = channels::apply_channel_cov(ch, m, 1);
      const Eigen::MatrixXd apply_then_rotate =
          r * apply_then_rotate_m.entries() * r.transpose();
      CHECK((rotate_then_apply.entries() - apply_then_rotate)
                .cwiseAbs()
                .maxCoeff() < 1e-12);
    }
  }
}
