#include "capcert/protocol2.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "capcert/scalar_opt.hpp"

namespace capcert::protocol2 {

namespace {
constexpr double kLog2E = 1.4426950408889634;
double log2_of(double x) { return std::log(x) * kLog2E; }
}  // namespace

gaussmath::CovarianceMatrix xi_matrix(double a, double c, double n_bar) {
  if (!(n_bar >= 0.0)) {
    throw std::invalid_argument("xi_matrix: n_bar must be >= 0");
  }
  const double b = 2.0 * n_bar + 1.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
  m(0, 0) = m(1, 1) = b;
  m(2, 2) = m(3, 3) = a;
  m(0, 2) = m(2, 0) = c;
  m(1, 3) = m(3, 1) = -c;
  return gaussmath::CovarianceMatrix(std::move(m));
}

void ProtocolTwoConfig::validate() const {
  if (n == 0 || k == 0) {
    throw std::invalid_argument("protocol2 config: n and k must be positive");
  }
  if (!(n_bar >= 0.0)) {
    throw std::invalid_argument("protocol2 config: n_bar must be >= 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("protocol2 config: delta must be in (0, 1)");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("protocol2 config: epsilon must be in (0, 1)");
  }
  if (!(a > 1.0) || !(c >= 0.0)) {
    throw std::invalid_argument("protocol2 config: need a > 1 and c >= 0");
  }
  if (!gaussmath::bona_fide_check(xi_matrix(a, c, n_bar))) {
    throw std::invalid_argument(
        "protocol2 config: thresholds (a, c) are not compatible with a "
        "quantum state");
  }
}

HeterodyneMoments heterodyne_moments(const channels::ChannelModel& ch,
                                     double n_bar) {
  const double b = 2.0 * n_bar + 1.0;
  const double s = ch.scale();
  HeterodyneMoments m;
  m.sigma_b = s * s * b + ch.added_noise_variance();
  m.sigma_c = s * std::sqrt(b * b - 1.0);
  return m;
}

HeterodyneRecord simulate_heterodyne_pairs(const channels::ChannelModel& ch,
                                           double n_bar, std::uint64_t k,
                                           RngStream& rng) {
  if (!(n_bar >= 0.0) || k == 0) {
    throw std::invalid_argument("simulate_heterodyne_pairs: invalid arguments");
  }
  const HeterodyneMoments mom = heterodyne_moments(ch, n_bar);
  const double vx = 2.0 * n_bar + 1.5;
  const double vy = mom.sigma_b + 0.5;
  Eigen::Matrix4d cov;
  cov << vx, 0, mom.sigma_c, 0,
         0, vx, 0, -mom.sigma_c,
         mom.sigma_c, 0, vy, 0,
         0, -mom.sigma_c, 0, vy;
  Eigen::LLT<Eigen::Matrix4d> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::logic_error("simulate_heterodyne_pairs: covariance not PD");
  }
  const Eigen::Matrix4d L = llt.matrixL();

  HeterodyneRecord rec;
  rec.channel_tag = ch.describe();
  rec.x.resize(k);
  rec.y.resize(k);
  for (std::uint64_t i = 0; i < k; ++i) {
    Eigen::Vector4d z;
    for (int j = 0; j < 4; ++j) z(j) = rng.gaussian();
    const Eigen::Vector4d w = L * z;
    rec.x[i] = {w(0), w(1)};
    rec.y[i] = {w(2), w(3)};
  }
  return rec;
}

double cross_term(std::span<const std::complex<double>> x,
                  std::span<const std::complex<double>> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("cross_term: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += x[i].real() * y[i].real() - x[i].imag() * y[i].imag();
  }
  return s;
}

namespace {

double norm_squared(std::span<const std::complex<double>> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return s;
}

double check_shrunk_count(std::uint64_t k, double delta) {
  const double kk = static_cast<double>(k);
  const double shrunk = kk - std::sqrt(2.0 * kk * std::log(1.0 / delta));
  if (!(shrunk > 0.0)) {
    throw std::invalid_argument("estimator: k too small for delta");
  }
  return shrunk;
}

}  // namespace

double sigma_max(std::span<const std::complex<double>> y, std::uint64_t k,
                 double delta) {
  if (y.size() != k) {
    throw std::invalid_argument("sigma_max: record length != k");
  }
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("sigma_max: delta must be in (0, 1]");
  }
  const double shrunk = check_shrunk_count(k, delta);
  return norm_squared(y) / (2.0 * shrunk) - 0.5;
}

double gamma_min(std::span<const std::complex<double>> x,
                 std::span<const std::complex<double>> y, std::uint64_t k,
                 double delta, double n_bar) {
  if (x.size() != k || y.size() != k) {
    throw std::invalid_argument("gamma_min: record length != k");
  }
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("gamma_min: delta must be in (0, 1]");
  }
  const double kk = static_cast<double>(k);
  const double shrunk = check_shrunk_count(k, delta);
  const double ln2d = std::log(2.0 / delta);
  const double grown = kk + std::sqrt(2.0 * kk * ln2d) + ln2d;
  const double nx = norm_squared(x);
  const double ny = norm_squared(y);
  return (nx + ny + 2.0 * cross_term(x, y)) / (4.0 * grown) - n_bar -
         ny / (4.0 * shrunk) - 0.75;
}

bool threshold_test(double sigma_max_value, double gamma_min_value, double a,
                    double c) {
  return gamma_min_value >= c && sigma_max_value <= a;
}

double capacity_bound(const ProtocolTwoConfig& cfg) {
  cfg.validate();
  const auto spectrum = gaussmath::symplectic_eigenvalues(
      xi_matrix(cfg.a, cfg.c, cfg.n_bar));
  const double base = gaussmath::g_entropy(cfg.a) -
                      gaussmath::g_entropy(std::max(1.0, spectrum.values[0])) -
                      gaussmath::g_entropy(std::max(1.0, spectrum.values[1]));
  const double k = static_cast<double>(cfg.k);
  const double omega =
      4.0 * std::sqrt(k) *
      log2_of(2.0 * std::sqrt(1.0 + cfg.n_bar) + 2.0 * std::sqrt(cfg.n_bar) + 1.0);
  const double s_eps = std::sqrt(cfg.epsilon / 2.0);
  auto h = [&](double eta) {
    const double gap = s_eps - eta;
    return omega * std::sqrt(log2_of(2.0 / (gap * gap))) - 4.0 * log2_of(eta) +
           2.0;
  };
  const auto opt = numerics::minimize_scalar(h, 1e-12, s_eps - 1e-12);
  if (!opt.found) return 0.0;  // degenerate eta interval: claim nothing
  return static_cast<double>(cfg.n) * std::max(0.0, base - opt.value / k);
}

double asymptotic_Biid(double a, double c, double n_bar) {
  const auto xi = xi_matrix(a, c, n_bar);
  if (!gaussmath::bona_fide_check(xi)) {
    throw std::invalid_argument("asymptotic_Biid: xi matrix not bona fide");
  }
  const auto spectrum = gaussmath::symplectic_eigenvalues(xi);
  const double v = gaussmath::g_entropy(a) -
                   gaussmath::g_entropy(std::max(1.0, spectrum.values[0])) -
                   gaussmath::g_entropy(std::max(1.0, spectrum.values[1]));
  return std::max(0.0, v);
}

LossThresholds optimal_thresholds_loss(double tau, double n_bar, double n_th) {
  if (!(tau >= 0.0 && tau <= 1.0) || !(n_bar >= 0.0) || !(n_th >= 0.0)) {
    throw std::invalid_argument("optimal_thresholds_loss: invalid parameters");
  }
  const double b = 2.0 * n_bar + 1.0;
  LossThresholds th;
  th.a = tau * b + (1.0 - tau) * (2.0 * n_th + 1.0);
  th.c = std::sqrt(tau) * std::sqrt(b * b - 1.0);
  return th;
}

double energy_constrained_capacity_pure_loss(double tau, double n_bar) {
  if (!(tau >= 0.0 && tau <= 1.0) || !(n_bar >= 0.0)) {
    throw std::invalid_argument(
        "energy_constrained_capacity_pure_loss: invalid parameters");
  }
  const double v = gaussmath::g_entropy(2.0 * tau * n_bar + 1.0) -
                   gaussmath::g_entropy(2.0 * (1.0 - tau) * n_bar + 1.0);
  return std::max(0.0, v);
}

ProtocolTwoVerdict analyze_record(const ProtocolTwoConfig& cfg,
                                  const HeterodyneRecord& rec) {
  cfg.validate();
  ProtocolTwoVerdict v;
  v.sigma_max = sigma_max(rec.y, cfg.k, cfg.delta);
  v.gamma_min = gamma_min(rec.x, rec.y, cfg.k, cfg.delta, cfg.n_bar);
  v.passed = threshold_test(v.sigma_max, v.gamma_min, cfg.a, cfg.c);
  const auto spectrum = gaussmath::symplectic_eigenvalues(
      xi_matrix(cfg.a, cfg.c, cfg.n_bar));
  v.nu1 = spectrum.values[0];
  v.nu2 = spectrum.values[1];
  v.b_iid = asymptotic_Biid(cfg.a, cfg.c, cfg.n_bar);
  v.q_lower = v.passed ? capacity_bound(cfg) : 0.0;
  return v;
}

ProtocolTwoVerdict run_trial(const ProtocolTwoConfig& cfg,
                             const channels::ChannelModel& ch, RngStream& rng) {
  return analyze_record(cfg, simulate_heterodyne_pairs(ch, cfg.n_bar, cfg.k, rng));
}

void to_json(nlohmann::json& j, const ProtocolTwoVerdict& v) {
  j = nlohmann::json{
      {"sigma_max", v.sigma_max}, {"gamma_min", v.gamma_min},
      {"passed", v.passed},       {"q_lower", v.q_lower},
      {"b_iid", v.b_iid},         {"nu1", v.nu1},
      {"nu2", v.nu2},
  };
}

}  // namespace capcert::protocol2
