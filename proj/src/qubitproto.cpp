#include "capcert/qubitproto.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "capcert/gaussmath.hpp"
#include "capcert/scalar_opt.hpp"

namespace capcert::qubitproto {

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr std::complex<double> kI{0.0, 1.0};

Matrix2c pauli(int i) {
  Matrix2c m;
  switch (i) {
    case 0:
      m << 1, 0, 0, 1;
      break;
    case 1:
      m << 0, 1, 1, 0;
      break;
    case 2:
      m << 0, -kI, kI, 0;
      break;
    case 3:
      m << 1, 0, 0, -1;
      break;
    default:
      throw std::invalid_argument("pauli: index out of range");
  }
  return m;
}

Eigen::Matrix4cd kron(const Matrix2c& a, const Matrix2c& b) {
  Matrix4c out;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    }
  }
  return out;
}

// Shannon entropy (bits) of the eigenvalue distribution of a Hermitian PSD
// matrix with unit trace; tiny negative eigenvalues from rounding are
// clipped.
double von_neumann_entropy(const Matrix4c& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix4c> solver(rho);
  double h = 0.0;
  for (int i = 0; i < rho.rows(); ++i) {
    const double p = solver.eigenvalues()(i);
    if (p > 1e-15) h -= p * std::log(p);
  }
  return h / kLn2;
}

double entropy_2x2(const Matrix2c& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix2c> solver(rho);
  double h = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double p = solver.eigenvalues()(i);
    if (p > 1e-15) h -= p * std::log(p);
  }
  return h / kLn2;
}

Matrix2c partial_trace_reference(const Matrix4c& rho) {
  // index = 2*a + b with a the reference qubit: trace over a
  Matrix2c out = Matrix2c::Zero();
  for (int b1 = 0; b1 < 2; ++b1) {
    for (int b2 = 0; b2 < 2; ++b2) {
      out(b1, b2) = rho(b1, b2) + rho(2 + b1, 2 + b2);
    }
  }
  return out;
}

void check_density_matrix(const Matrix4c& rho) {
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::invalid_argument("expected a Hermitian matrix");
  }
  if (std::abs(rho.trace().real() - 1.0) > 1e-9 ||
      std::abs(rho.trace().imag()) > 1e-12) {
    throw std::invalid_argument("expected unit trace");
  }
  Eigen::SelfAdjointEigenSolver<Matrix4c> solver(rho);
  if (solver.eigenvalues().minCoeff() < -1e-9) {
    throw std::invalid_argument("expected a positive semidefinite matrix");
  }
}

double binary_kl(double x, double y) {
  // x log(x/y) + (1-x) log((1-x)/(1-y)), natural logs; the root of the
  // confidence equation is base-independent
  double d = 0.0;
  if (x > 0.0) d += x * std::log(x / y);
  if (x < 1.0) d += (1.0 - x) * std::log((1.0 - x) / (1.0 - y));
  return d;
}

}  // namespace

QubitChannelSpec::QubitChannelSpec(double alpha_angle, double beta_angle)
    : alpha(alpha_angle), beta(beta_angle) {
  const Matrix2c a1 = kraus1();
  const Matrix2c a2 = kraus2();
  const Matrix2c completeness = a1.adjoint() * a1 + a2.adjoint() * a2;
  if ((completeness - Matrix2c::Identity()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::logic_error("QubitChannelSpec: Kraus completeness violated");
  }
}

Matrix2c QubitChannelSpec::kraus1() const {
  Matrix2c m;
  m << std::cos(alpha), 0, 0, std::cos(beta);
  return m;
}

Matrix2c QubitChannelSpec::kraus2() const {
  Matrix2c m;
  m << 0, std::sin(beta), std::sin(alpha), 0;
  return m;
}

Matrix2c QubitChannelSpec::apply(const Matrix2c& rho) const {
  const Matrix2c a1 = kraus1();
  const Matrix2c a2 = kraus2();
  return a1 * rho * a1.adjoint() + a2 * rho * a2.adjoint();
}

Matrix4c choi_state(const QubitChannelSpec& spec) {
  // (id ⊗ channel)(|psi+><psi+|), |psi+> = (|00> + |11>)/sqrt(2)
  Matrix4c out = Matrix4c::Zero();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      Matrix2c unit = Matrix2c::Zero();
      unit(i, j) = 1.0;
      const Matrix2c mapped = spec.apply(unit);
      for (int b1 = 0; b1 < 2; ++b1) {
        for (int b2 = 0; b2 < 2; ++b2) {
          out(2 * i + b1, 2 * j + b2) += 0.5 * mapped(b1, b2);
        }
      }
    }
  }
  return out;
}

double coherent_information(const Matrix4c& choi) {
  check_density_matrix(choi);
  return entropy_2x2(partial_trace_reference(choi)) - von_neumann_entropy(choi);
}

double conditional_entropy(const Matrix4c& rho) {
  return von_neumann_entropy(rho) - entropy_2x2(partial_trace_reference(rho));
}

double confidence_epsilon(double p_hat, double delta_cell, std::uint64_t n) {
  if (!(p_hat >= 0.0 && p_hat <= 1.0)) {
    throw std::invalid_argument("confidence_epsilon: p_hat outside [0, 1]");
  }
  if (!(delta_cell > 0.0 && delta_cell <= 1.0)) {
    throw std::invalid_argument("confidence_epsilon: delta_cell outside (0, 1]");
  }
  if (n == 0) {
    throw std::invalid_argument("confidence_epsilon: n must be positive");
  }
  const double rhs = std::log(1.0 / delta_cell) / static_cast<double>(n);
  if (rhs == 0.0) return 0.0;
  const double span = 1.0 - p_hat;
  if (span <= 0.0) return 0.0;
  // D(p_hat || p_hat + eps) is strictly increasing in eps on (0, 1 - p_hat)
  const double root = numerics::bisect_increasing(
      [&](double eps) { return binary_kl(p_hat, p_hat + eps) - rhs; }, 0.0,
      span, 1e-14);
  return std::min(root, span);
}

std::array<Matrix4c, kNumOutcomes> pauli_pair_povm(int setting) {
  if (setting < 0 || setting >= kNumSettings) {
    throw std::invalid_argument("pauli_pair_povm: setting out of range");
  }
  const int i = setting / 4;
  const int j = setting % 4;
  auto projectors = [](int p) {
    std::array<Matrix2c, 2> pr;
    if (p == 0) {
      pr[0] = Matrix2c::Identity();
      pr[1] = Matrix2c::Zero();
    } else {
      pr[0] = 0.5 * (Matrix2c::Identity() + pauli(p));
      pr[1] = 0.5 * (Matrix2c::Identity() - pauli(p));
    }
    return pr;
  };
  const auto pa = projectors(i);
  const auto pb = projectors(j);
  std::array<Matrix4c, kNumOutcomes> povm;
  for (int b1 = 0; b1 < 2; ++b1) {
    for (int b2 = 0; b2 < 2; ++b2) {
      povm[static_cast<size_t>(2 * b1 + b2)] = kron(pa[b1], pb[b2]);
    }
  }
  return povm;
}

std::uint64_t TomographyCounts::total_shots() const {
  std::uint64_t total = 0;
  for (const auto& s : settings) total += s.shots;
  return total;
}

double TomographyCounts::total_delta() const {
  double total = 0.0;
  for (const auto& s : settings) {
    for (double d : s.delta_cells) total += d;
  }
  return total;
}

void TomographyCounts::validate() const {
  for (const auto& s : settings) {
    std::uint64_t sum = 0;
    for (auto c : s.outcome_counts) sum += c;
    if (sum != s.shots) {
      throw std::invalid_argument("TomographyCounts: outcome counts do not sum "
                                  "to the setting's shots");
    }
    for (double d : s.delta_cells) {
      if (!(d > 0.0 && d < 1.0)) {
        throw std::invalid_argument("TomographyCounts: delta cell outside (0, 1)");
      }
    }
  }
  if (total_shots() == 0) {
    throw std::invalid_argument("TomographyCounts: no shots recorded");
  }
}

TomographyCounts TomographyCounts::from_csv(std::istream& in,
                                            double total_delta) {
  if (!(total_delta > 0.0 && total_delta < 1.0)) {
    throw std::invalid_argument("TomographyCounts: total delta outside (0, 1)");
  }
  TomographyCounts counts;
  const double cell =
      total_delta / static_cast<double>(kNumSettings * kNumOutcomes);
  for (auto& s : counts.settings) s.delta_cells.fill(cell);

  std::string line;
  bool saw_row = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!saw_row && line.find_first_not_of("0123456789,- \t\r") != std::string::npos) {
      continue;  // header row
    }
    std::istringstream row(line);
    std::string field;
    long long values[3] = {0, 0, 0};
    for (int f = 0; f < 3; ++f) {
      if (!std::getline(row, field, ',')) {
        throw std::invalid_argument("TomographyCounts: malformed CSV row: " + line);
      }
      values[f] = std::stoll(field);
    }
    if (values[0] < 0 || values[0] >= kNumSettings || values[1] < 0 ||
        values[1] >= kNumOutcomes || values[2] < 0) {
      throw std::invalid_argument("TomographyCounts: CSV indices out of range");
    }
    auto& s = counts.settings[static_cast<size_t>(values[0])];
    s.outcome_counts[static_cast<size_t>(values[1])] +=
        static_cast<std::uint64_t>(values[2]);
    saw_row = true;
  }
  if (!saw_row) {
    throw std::invalid_argument("TomographyCounts: empty CSV");
  }
  for (auto& s : counts.settings) {
    s.shots = 0;
    for (auto c : s.outcome_counts) s.shots += c;
  }
  counts.validate();
  return counts;
}

void TomographyCounts::to_csv(std::ostream& out) const {
  out << "setting_index,outcome_index,count\n";
  for (int k = 0; k < kNumSettings; ++k) {
    for (int l = 0; l < kNumOutcomes; ++l) {
      out << k << ',' << l << ','
          << settings[static_cast<size_t>(k)].outcome_counts[static_cast<size_t>(l)]
          << '\n';
    }
  }
}

namespace {

// One linear constraint weight * tr(rho E) <= bound.
struct Halfspace {
  Matrix4c effect;
  double weight = 0.0;
  double bound = 0.0;
};

std::vector<Halfspace> build_halfspaces(const TomographyCounts& counts) {
  counts.validate();
  const double n = static_cast<double>(counts.total_shots());
  std::vector<Halfspace> out;
  out.reserve(kNumSettings * kNumOutcomes);
  for (int k = 0; k < kNumSettings; ++k) {
    const auto& s = counts.settings[static_cast<size_t>(k)];
    if (s.shots == 0) continue;
    const auto povm = pauli_pair_povm(k);
    const double weight = static_cast<double>(s.shots) / n;
    for (int l = 0; l < kNumOutcomes; ++l) {
      const double freq =
          static_cast<double>(s.outcome_counts[static_cast<size_t>(l)]) / n;
      const double eps =
          confidence_epsilon(freq, s.delta_cells[static_cast<size_t>(l)],
                             counts.total_shots());
      out.push_back({povm[static_cast<size_t>(l)], weight, freq + eps});
    }
  }
  return out;
}

double total_violation(const Matrix4c& rho, const std::vector<Halfspace>& hs) {
  double v = 0.0;
  for (const auto& h : hs) {
    const double lhs = h.weight * (rho * h.effect).trace().real();
    if (lhs > h.bound) v += lhs - h.bound;
  }
  return v;
}

}  // namespace

bool polytope_halfspace_check(const Matrix4c& rho,
                              const TomographyCounts& counts) {
  return total_violation(rho, build_halfspaces(counts)) == 0.0;
}

TomographyCounts simulate_tomography(const Matrix4c& rho,
                                     std::uint64_t shots_per_setting,
                                     double total_delta, RngStream& rng) {
  check_density_matrix(rho);
  if (shots_per_setting == 0) {
    throw std::invalid_argument("simulate_tomography: need shots");
  }
  TomographyCounts counts;
  const double cell =
      total_delta / static_cast<double>(kNumSettings * kNumOutcomes);
  for (int k = 0; k < kNumSettings; ++k) {
    auto& s = counts.settings[static_cast<size_t>(k)];
    s.shots = shots_per_setting;
    s.delta_cells.fill(cell);
    const auto povm = pauli_pair_povm(k);
    std::array<double, kNumOutcomes> probs{};
    for (int l = 0; l < kNumOutcomes; ++l) {
      probs[static_cast<size_t>(l)] =
          std::max(0.0, (rho * povm[static_cast<size_t>(l)]).trace().real());
    }
    // multinomial draw as a chain of binomials
    std::uint64_t remaining = shots_per_setting;
    double prob_left = probs[0] + probs[1] + probs[2] + probs[3];
    for (int l = 0; l < kNumOutcomes - 1 && remaining > 0; ++l) {
      const double p = std::clamp(probs[static_cast<size_t>(l)] / prob_left, 0.0, 1.0);
      std::binomial_distribution<std::uint64_t> binom(remaining, p);
      const std::uint64_t c = binom(rng);
      s.outcome_counts[static_cast<size_t>(l)] = c;
      remaining -= c;
      prob_left -= probs[static_cast<size_t>(l)];
      if (prob_left <= 0.0) break;
    }
    s.outcome_counts[kNumOutcomes - 1] = remaining;
  }
  return counts;
}

Matrix4c linear_inversion_estimate(const TomographyCounts& counts) {
  counts.validate();
  Matrix4c rho = Matrix4c::Zero();
  for (int k = 0; k < kNumSettings; ++k) {
    const auto& s = counts.settings[static_cast<size_t>(k)];
    if (s.shots == 0) continue;
    const int i = k / 4;
    const int j = k % 4;
    // expectation of the +-1 outcome product; identity factors contribute +1
    double expectation = 0.0;
    for (int l = 0; l < kNumOutcomes; ++l) {
      const int b1 = l / 2;
      const int b2 = l % 2;
      double sign = 1.0;
      if (i != 0 && b1 == 1) sign = -sign;
      if (j != 0 && b2 == 1) sign = -sign;
      expectation += sign *
                     static_cast<double>(s.outcome_counts[static_cast<size_t>(l)]) /
                     static_cast<double>(s.shots);
    }
    rho += 0.25 * expectation * kron(pauli(i), pauli(j));
  }
  // project onto the density-matrix cone
  Eigen::SelfAdjointEigenSolver<Matrix4c> solver(rho);
  Eigen::Vector4d clipped = solver.eigenvalues().cwiseMax(0.0);
  const double total = clipped.sum();
  if (total <= 0.0) return Matrix4c::Identity() / 4.0;
  clipped /= total;
  return solver.eigenvectors() * clipped.asDiagonal() *
         solver.eigenvectors().adjoint();
}

double qubit_iid_bound(double h_ab_conditional_max, std::uint64_t n,
                       double epsilon, int d_a) {
  if (n == 0 || !(epsilon > 0.0 && epsilon < 1.0) || d_a < 2) {
    throw std::invalid_argument("qubit_iid_bound: invalid arguments");
  }
  const double nn = static_cast<double>(n);
  const double s_eps = std::sqrt(epsilon / 2.0);
  const double mu_log = static_cast<double>(d_a) / 2.0 + 2.0;
  auto correction = [&](double eta) {
    const double gap = s_eps - eta;
    return (4.0 / nn) * (-mu_log * std::sqrt(nn) *
                             std::sqrt(std::log2(2.0 / (gap * gap))) +
                         std::log2(eta));
  };
  const auto opt = numerics::maximize_scalar(correction, 0.0, s_eps);
  const double sup = opt.found ? opt.value : 0.0;
  return -h_ab_conditional_max + sup - 2.0 / nn;
}

double definetti_epsilon(std::uint64_t k, std::uint64_t n, std::uint64_t r,
                         int d) {
  if (k == 0 || n == 0 || d <= 0) {
    throw std::invalid_argument("definetti_epsilon: invalid arguments");
  }
  const double kk = static_cast<double>(k);
  const double log_value = std::log(2.0) + (static_cast<double>(d) / 2.0) * std::log(kk) -
                           kk * (static_cast<double>(r) + 1.0) /
                               (2.0 * (static_cast<double>(n) + kk));
  if (log_value < -700.0) return 0.0;
  return std::exp(log_value);
}

namespace {

// rho = L L^dag / tr(L L^dag) over a lower-triangular complex L: 16 real
// parameters, every parameter vector maps to a valid state.
Matrix4c state_from_parameters(const std::array<double, 16>& p) {
  Matrix4c lower = Matrix4c::Zero();
  int idx = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j <= i; ++j) {
      if (i == j) {
        lower(i, j) = std::complex<double>(p[static_cast<size_t>(idx++)], 0.0);
      } else {
        const double re = p[static_cast<size_t>(idx++)];
        const double im = p[static_cast<size_t>(idx++)];
        lower(i, j) = std::complex<double>(re, im);
      }
    }
  }
  Matrix4c rho = lower * lower.adjoint();
  const double tr = rho.trace().real();
  if (tr <= 1e-300) return Matrix4c::Identity() / 4.0;
  return rho / tr;
}

std::array<double, 16> parameters_from_state(const Matrix4c& rho) {
  Eigen::LLT<Matrix4c> llt(rho + 1e-12 * Matrix4c::Identity());
  Matrix4c lower = llt.matrixL();
  std::array<double, 16> p{};
  int idx = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j <= i; ++j) {
      if (i == j) {
        p[static_cast<size_t>(idx++)] = lower(i, j).real();
      } else {
        p[static_cast<size_t>(idx++)] = lower(i, j).real();
        p[static_cast<size_t>(idx++)] = lower(i, j).imag();
      }
    }
  }
  return p;
}

}  // namespace

HeuristicEntropyResult max_conditional_entropy_heuristic(
    const TomographyCounts& counts, int restarts, int steps_per_restart,
    RngStream& rng) {
  counts.validate();
  if (restarts < 1 || steps_per_restart < 1) {
    throw std::invalid_argument("max_conditional_entropy_heuristic: need at "
                                "least one restart and one step");
  }
  HeuristicEntropyResult result;
  result.restarts = restarts;

  const std::vector<Halfspace> hs = build_halfspaces(counts);
  const Matrix4c inversion = linear_inversion_estimate(counts);

  // Phase 0: find a feasible seed. The projected inversion can sit a hair
  // outside the polytope; a short violation-minimizing walk fixes that.
  std::array<double, 16> seed = parameters_from_state(inversion);
  double seed_violation = total_violation(state_from_parameters(seed), hs);
  double step = 0.02;
  for (int it = 0; it < 400 && seed_violation > 0.0; ++it) {
    std::array<double, 16> proposal = seed;
    for (auto& v : proposal) v += step * rng.gaussian();
    const double violation = total_violation(state_from_parameters(proposal), hs);
    if (violation < seed_violation) {
      seed = proposal;
      seed_violation = violation;
    } else {
      step *= 0.97;
    }
  }
  if (seed_violation > 0.0) {
    // no feasible state found (degenerate counts); report the inversion
    // estimate, still flagged heuristic
    result.value = conditional_entropy(inversion);
    return result;
  }

  double best = conditional_entropy(state_from_parameters(seed));
  for (int r = 0; r < restarts; ++r) {
    std::array<double, 16> params = seed;
    if (r > 0) {
      // perturbed restart, re-projected to feasibility by rejection
      for (int attempt = 0; attempt < 32; ++attempt) {
        std::array<double, 16> jittered = seed;
        for (auto& v : jittered) v += 0.05 * rng.gaussian();
        if (total_violation(state_from_parameters(jittered), hs) == 0.0) {
          params = jittered;
          break;
        }
      }
    }
    double current_value = conditional_entropy(state_from_parameters(params));
    if (current_value > best) best = current_value;

    double climb = 0.05;
    for (int it = 0; it < steps_per_restart; ++it) {
      std::array<double, 16> proposal = params;
      for (auto& v : proposal) v += climb * rng.gaussian();
      const Matrix4c candidate = state_from_parameters(proposal);
      if (total_violation(candidate, hs) > 0.0) {
        climb *= 0.8;
        continue;
      }
      const double value = conditional_entropy(candidate);
      if (value > current_value) {
        params = proposal;
        current_value = value;
        ++result.accepted_steps;
        climb = std::min(climb * 1.2, 0.5);
        if (value > best) best = value;
      } else {
        climb *= 0.95;
      }
      if (climb < 1e-6) break;
    }
  }

  result.value = best;
  return result;
}

QubitBoundReport evaluate_bound_report(const TomographyCounts& counts,
                                       std::uint64_t n, double epsilon,
                                       int restarts, int steps_per_restart,
                                       RngStream& rng) {
  QubitBoundReport report;
  report.n = n;
  report.epsilon = epsilon;
  report.delta = counts.total_delta();
  const Matrix4c inversion = linear_inversion_estimate(counts);
  report.coherent_info_estimate = -conditional_entropy(inversion);
  const auto heuristic =
      max_conditional_entropy_heuristic(counts, restarts, steps_per_restart, rng);
  report.h_ab_max_heuristic = heuristic.value;
  report.heuristic = heuristic.heuristic;
  report.q_lower_per_use =
      std::max(0.0, qubit_iid_bound(heuristic.value, n, epsilon));
  return report;
}

void to_json(nlohmann::json& j, const QubitBoundReport& r) {
  j = nlohmann::json{
      {"coherent_info_estimate", r.coherent_info_estimate},
      {"h_ab_max_heuristic", r.h_ab_max_heuristic},
      {"heuristic", r.heuristic},
      {"q_lower_per_use", r.q_lower_per_use},
      {"n", r.n},
      {"epsilon", r.epsilon},
      {"delta", r.delta},
  };
}

}  // namespace capcert::qubitproto
