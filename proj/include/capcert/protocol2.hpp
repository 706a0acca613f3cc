#ifndef CAPCERT_PROTOCOL2_HPP
#define CAPCERT_PROTOCOL2_HPP

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "capcert/channels.hpp"
#include "capcert/gaussmath.hpp"
#include "capcert/rng.hpp"

namespace capcert::protocol2 {

// Two-mode covariance with thermal diagonal blocks (2 n_bar + 1) I / a I and
// cross block c sigma_z. The threshold pair (a, c) is admissible only when
// this matrix is bona fide.
gaussmath::CovarianceMatrix xi_matrix(double a, double c, double n_bar);

struct ProtocolTwoConfig {
  std::uint64_t n = 0;  // communication modes
  std::uint64_t k = 0;  // test modes
  double n_bar = 0.0;   // mean photon number of the probe ensemble
  double delta = 0.0;   // estimator error probability
  double epsilon = 0.0; // tolerable infidelity
  double a = 0.0;       // added-noise threshold (a > 1)
  double c = 0.0;       // cross-correlation threshold (c >= 0)

  void validate() const;  // throws std::invalid_argument
};

// Paired heterodyne outcomes for the k test modes.
struct HeterodyneRecord {
  std::vector<std::complex<double>> x;  // sender side
  std::vector<std::complex<double>> y;  // receiver side
  std::string channel_tag;
};

// Analytic second moments of the paired heterodyne outcomes for a
// phase-insensitive channel probed with mean photon number n_bar:
// sigma_b is the per-quadrature output variance before the heterodyne
// vacuum unit, sigma_c the q-q cross covariance.
struct HeterodyneMoments {
  double sigma_b = 0.0;
  double sigma_c = 0.0;
};

HeterodyneMoments heterodyne_moments(const channels::ChannelModel& ch,
                                     double n_bar);

// k i.i.d. draws of the jointly Gaussian 4-vector
// (Re x, Im x, Re y, Im y) with covariance
// [[(2 n_bar + 3/2) I, sigma_c sigma_z], [sigma_c sigma_z, (sigma_b + 1/2) I]].
HeterodyneRecord simulate_heterodyne_pairs(const channels::ChannelModel& ch,
                                           double n_bar, std::uint64_t k,
                                           RngStream& rng);

// Real bilinear cross term <x, y> defined through
// ||conj(x) + y||^2 = ||x||^2 + ||y||^2 + 2 <x, y>,
// i.e. sum_i (Re x_i Re y_i - Im x_i Im y_i) = Re(sum_i x_i y_i).
// One-sample example: x = (1 + 2i), y = (3 - 1i):
//   |conj(x) + y|^2 = |4 - 3i|^2 = 25 = 5 + 10 + 2*5, so <x, y> = 5.
double cross_term(std::span<const std::complex<double>> x,
                  std::span<const std::complex<double>> y);

// One-sided upper confidence bound on the added-noise variance:
// ||y||^2 / (2 (k - sqrt(2 k ln(1/delta)))) - 1/2.
// Throws when k <= 2 ln(1/delta) (denominator not positive).
double sigma_max(std::span<const std::complex<double>> y, std::uint64_t k,
                 double delta);

// One-sided lower confidence bound on the cross-correlation:
// (||x||^2 + ||y||^2 + 2 <x,y>) / (4 (k + sqrt(2 k ln(2/delta)) + ln(2/delta)))
//   - n_bar - ||y||^2 / (4 (k - sqrt(2 k ln(1/delta)))) - 3/4.
double gamma_min(std::span<const std::complex<double>> x,
                 std::span<const std::complex<double>> y, std::uint64_t k,
                 double delta, double n_bar);

// Passed iff gamma_min >= c and sigma_max <= a (both boundaries inclusive).
bool threshold_test(double sigma_max_value, double gamma_min_value, double a,
                    double c);

// Certified lower bound on the one-shot capacity of the n communication
// modes (total qubits), conditioned on the threshold test having passed.
double capacity_bound(const ProtocolTwoConfig& cfg);

// Asymptotic per-use limit: max{0, g(a) - g(nu1) - g(nu2)} with (nu1, nu2)
// the symplectic spectrum of xi_matrix(a, c, n_bar).
double asymptotic_Biid(double a, double c, double n_bar);

struct LossThresholds {
  double a = 0.0;
  double c = 0.0;
};

// Thresholds that a loss channel meets with probability approaching one,
// and that maximize the asymptotic bound:
// a = tau (2 n_bar + 1) + (1 - tau)(2 n_th + 1), c = sqrt(tau ((2n_bar+1)^2-1)).
LossThresholds optimal_thresholds_loss(double tau, double n_bar, double n_th);

// Energy-constrained capacity of the pure-loss channel at input photon
// number n_bar: max{0, g(2 tau n_bar + 1) - g(2 (1-tau) n_bar + 1)}.
double energy_constrained_capacity_pure_loss(double tau, double n_bar);

struct ProtocolTwoVerdict {
  double sigma_max = 0.0;
  double gamma_min = 0.0;
  bool passed = false;
  double q_lower = 0.0;  // total qubits over n modes; 0 unless passed
  double b_iid = 0.0;    // asymptotic per-use value for the configured thresholds
  double nu1 = 0.0;
  double nu2 = 0.0;
};

// Full data-analysis pass over one heterodyne record.
ProtocolTwoVerdict analyze_record(const ProtocolTwoConfig& cfg,
                                  const HeterodyneRecord& rec);

// Simulates a record for the channel and analyzes it.
ProtocolTwoVerdict run_trial(const ProtocolTwoConfig& cfg,
                             const channels::ChannelModel& ch, RngStream& rng);

void to_json(nlohmann::json& j, const ProtocolTwoVerdict& v);

}  // namespace capcert::protocol2

#endif
