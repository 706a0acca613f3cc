#ifndef CAPCERT_QUBITPROTO_HPP
#define CAPCERT_QUBITPROTO_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "capcert/rng.hpp"

namespace capcert::qubitproto {

using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;

// Two-parameter Kraus family
//   A1 = cos(alpha)|0><0| + cos(beta)|1><1|
//   A2 = sin(beta)|0><1| + sin(alpha)|1><0|.
// alpha = beta is a bit-flip (dephasing-like) channel, beta = 0 amplitude
// damping. Completeness A1'A1 + A2'A2 = I holds identically and is asserted
// at construction.
struct QubitChannelSpec {
  double alpha = 0.0;
  double beta = 0.0;

  QubitChannelSpec(double alpha_angle, double beta_angle);
  Matrix2c kraus1() const;
  Matrix2c kraus2() const;
  Matrix2c apply(const Matrix2c& rho) const;
};

// (id ⊗ channel) acting on the maximally entangled pair, reference qubit
// first. Unit trace, positive semidefinite.
Matrix4c choi_state(const QubitChannelSpec& spec);

// H(B) - H(AB) in bits, where B is the channel-output subsystem of the Choi
// state. May be negative. Throws if the input is not a density matrix.
double coherent_information(const Matrix4c& choi);

// H(A|B) = H(AB) - H(B) in bits for a two-qubit state, reference subsystem
// first.
double conditional_entropy(const Matrix4c& rho);

// Positive root epsilon of
//   D(p_hat || p_hat + eps) = (1/n) log(1/delta_cell),
// with D the binary KL divergence. Found by bisection to 1e-12; if no root
// exists in (0, 1 - p_hat] the conservative maximum 1 - p_hat is returned.
double confidence_epsilon(double p_hat, double delta_cell, std::uint64_t n);

inline constexpr int kNumSettings = 16;  // Pauli pairs (i, j), i, j in 0..3
inline constexpr int kNumOutcomes = 4;   // joint +- eigenvalue pairs

// Projective POVM of the Pauli pair setting = 4*i + j: elements
// P_{b1}(sigma_i) ⊗ P_{b2}(sigma_j), outcome l = 2*b1 + b2, where
// P_b(sigma) = (I + (-1)^b sigma)/2 and the identity factor contributes
// P_0 = I, P_1 = 0.
std::array<Matrix4c, kNumOutcomes> pauli_pair_povm(int setting);

// Measured tomography record: shot and outcome counts per Pauli-pair
// setting, plus the per-cell error budgets that define the confidence
// polytope.
struct TomographyCounts {
  struct Setting {
    std::uint64_t shots = 0;
    std::array<std::uint64_t, kNumOutcomes> outcome_counts{};
    std::array<double, kNumOutcomes> delta_cells{};
  };

  std::array<Setting, kNumSettings> settings{};

  std::uint64_t total_shots() const;
  double total_delta() const;
  void validate() const;  // counts add up per setting, budgets positive

  // CSV rows: setting_index,outcome_index,count. Shots per setting are the
  // summed counts; delta budgets are assigned uniformly from total_delta.
  static TomographyCounts from_csv(std::istream& in, double total_delta);
  void to_csv(std::ostream& out) const;
};

// True iff rho satisfies every half-space constraint
//   (n_k / n) tr(rho E_k^(l)) <= n_k^l / n + confidence_epsilon(n_k^l / n,
//   delta_k^l, n).
bool polytope_halfspace_check(const Matrix4c& rho, const TomographyCounts& counts);

// Samples outcome counts for every setting from the outcome distribution of
// rho, with uniform shot allocation and uniform delta budget.
TomographyCounts simulate_tomography(const Matrix4c& rho,
                                     std::uint64_t shots_per_setting,
                                     double total_delta, RngStream& rng);

// Pauli-expectation reconstruction of the measured state, projected onto the
// density-matrix cone (negative eigenvalues clipped, trace renormalized).
Matrix4c linear_inversion_estimate(const TomographyCounts& counts);

// Certified per-use bound assembled from a worst-case conditional entropy
// over the confidence region:
//   -H_max + sup_eta (4/n) [-(d_A/2 + 2) sqrt(n) sqrt(log2(2/(sqrt(eps/2)-eta)^2))
//                           + log2(eta)] - 2/n.
double qubit_iid_bound(double h_ab_conditional_max, std::uint64_t n,
                       double epsilon, int d_a = 2);

// 2 k^{d/2} exp(-k (r+1) / (2 (n+k))); evaluated in log space, may exceed 1,
// underflows clamp to 0.
double definetti_epsilon(std::uint64_t k, std::uint64_t n, std::uint64_t r,
                         int d = 16);

// Best-effort maximization of H(A|B) over the confidence polytope: the
// linear-inversion estimate plus random-restart local search over
// Cholesky-parametrized states that stay inside the polytope. The result is
// a heuristic value, not a certified optimum, and is flagged as such.
struct HeuristicEntropyResult {
  double value = 0.0;
  bool heuristic = true;
  int restarts = 0;
  int accepted_steps = 0;
};

HeuristicEntropyResult max_conditional_entropy_heuristic(
    const TomographyCounts& counts, int restarts, int steps_per_restart,
    RngStream& rng);

// Bound report consumed by the CLI.
struct QubitBoundReport {
  double coherent_info_estimate = 0.0;   // -H(A|B) at the linear inversion
  double h_ab_max_heuristic = 0.0;       // heuristic polytope maximum
  bool heuristic = true;
  double q_lower_per_use = 0.0;          // clamped at 0
  std::uint64_t n = 0;
  double epsilon = 0.0;
  double delta = 0.0;
};

QubitBoundReport evaluate_bound_report(const TomographyCounts& counts,
                                       std::uint64_t n, double epsilon,
                                       int restarts, int steps_per_restart,
                                       RngStream& rng);

void to_json(nlohmann::json& j, const QubitBoundReport& r);

}  // namespace capcert::qubitproto

#endif
