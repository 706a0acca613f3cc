#ifndef CAPCERT_PROTOCOL1_HPP
#define CAPCERT_PROTOCOL1_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "capcert/channels.hpp"
#include "capcert/rng.hpp"

namespace capcert::protocol1 {

// Knobs of the correlated-noise detection test and its capacity bound.
//
// n      communication modes, k test modes (k even: half position, half
//        momentum probes)
// d      detector pixel width, alpha readout/displacement cutoff; 2*alpha/d
//        must be a positive integer (the discrete alphabet size)
// t      correlation-test threshold in bin units
// n_bar  mean photon number per probe, equivalently squeezing
//        s = 10 log10(2 n_bar + 1) dB
// epsilon  tolerable infidelity of the certified transmission
// p_err    tolerable inference error probability. The certified statement is
//          conditioned on passing the test; the same parameter plays the role
//          of the pass-probability floor in the underlying estimate (see
//          README notes).
struct ProtocolOneConfig {
  std::uint64_t n = 0;
  std::uint64_t k = 0;
  double d = 0.0;
  double t = 0.0;
  double alpha = 0.0;
  double n_bar = 0.0;
  double epsilon = 0.0;
  double p_err = 0.0;

  void validate() const;  // throws std::invalid_argument
  std::int64_t num_bins() const;
  double displacement_variance() const { return 2.0 * n_bar + 1.0; }
  double squeezed_variance() const { return 1.0 / (2.0 * n_bar + 1.0); }
};

// Alice's test-mode preparation: truncated Gaussian displacements and a
// uniformly random half/half arrangement of position/momentum bases.
struct PreparedInputs {
  std::vector<double> displacements;
  std::vector<channels::Quadrature> bases;
  std::vector<std::uint32_t> retries;  // rejection-sampling retries per probe
};

PreparedInputs prepare_test_inputs(const ProtocolOneConfig& cfg, RngStream& rng);

// Bin index of a continuous value under cutoff alpha and pixel width d.
// Interior bin j covers (-alpha + j d, -alpha + (j+1) d]; the unbounded
// leftmost and rightmost regions map to 0 and 2 alpha / d - 1.
std::int64_t discretize(double value, double d, double alpha);

// Discretized test-mode data for one protocol run.
struct TestRecord {
  std::vector<std::int64_t> x_alice;
  std::vector<std::int64_t> x_bob;
  std::vector<channels::Quadrature> bases;
  std::vector<std::uint32_t> retries;
};

struct CorrelationResult {
  bool passed = false;
  double avg_distance = 0.0;  // (1/k) sum |xA - xB|, bin units
};

CorrelationResult correlation_test(std::span<const std::int64_t> x_alice,
                                   std::span<const std::int64_t> x_bob,
                                   double t);

// Diagnostics of the capacity-bound optimization, evaluated at the optimal
// eta.
struct BoundDiagnostics {
  double lambda = 0.0;
  double zeta = 0.0;
  double mu = 0.0;
  double delta = 0.0;
};

struct BoundResult {
  double value = 0.0;                // certified qubits (total over n modes)
  std::optional<double> eta_star;    // absent when the eta interval is empty
  BoundDiagnostics diagnostics;
  std::string note;  // "trivial-zero" / "cutoff-dominated" when value forced 0
};

// Certified lower bound on the one-shot capacity of the n communication
// modes, conditioned on the correlation test having passed. Returns 0 with a
// note when lambda >= sqrt(epsilon/2) leaves no admissible eta.
BoundResult capacity_bound(const ProtocolOneConfig& cfg);

// Certified lower bound on the number of maximally entangled pairs (ebits)
// distillable through the n modes. Same optimization with the widened eta
// interval; reported only when that interval is nonempty. The value is not
// clamped at zero.
BoundResult entanglement_bound(const ProtocolOneConfig& cfg);

// Large-n, large-k limit of the per-mode capacity bound:
// max{0, log2(2 pi / d^2) - 2 log2 gamma_fn(t)}.
double asymptotic_B(double d, double t);

// Threshold that a loss channel passes almost surely in the asymptotic
// limit, in bin units.
double asymptotic_threshold_t(double tau, double n_bar, double n_th, double d);

// Closed-form approximation to the probability that a pure-loss channel
// passes the correlation test.
double pass_probability_pure_loss(std::uint64_t k, double t, double d,
                                  double tau, double n_bar);

struct ProtocolOneVerdict {
  bool passed = false;
  double avg_distance = 0.0;
  std::optional<double> q_lower;    // absent unless the test passed
  std::optional<double> ent_lower;  // additionally absent when eta interval empty
  std::optional<double> eta_star;
  BoundDiagnostics diagnostics;
};

// Simulates one full run of the test against an i.i.d. single-mode channel
// (probe preparation, channel action on each probe, discretization,
// correlation test) and evaluates the certified bounds when it passes.
ProtocolOneVerdict run_trial(const ProtocolOneConfig& cfg,
                             const channels::ChannelModel& ch, RngStream& rng);

// Simulation-only variant used by Monte Carlo campaigns.
TestRecord simulate_test_record(const ProtocolOneConfig& cfg,
                                const channels::ChannelModel& ch,
                                RngStream& rng);

void to_json(nlohmann::json& j, const ProtocolOneVerdict& v);

}  // namespace capcert::protocol1

#endif
