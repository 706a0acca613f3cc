#include "capcert/protocol1.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "capcert/gaussmath.hpp"
#include "capcert/scalar_opt.hpp"

namespace capcert::protocol1 {

namespace {

constexpr double kLog2E = 1.4426950408889634;  // 1/ln 2

double log2_of(double x) { return std::log(x) * kLog2E; }

}  // namespace

void ProtocolOneConfig::validate() const {
  if (n == 0 || k == 0) {
    throw std::invalid_argument("protocol1 config: n and k must be positive");
  }
  if (k % 2 != 0) {
    throw std::invalid_argument("protocol1 config: k must be even");
  }
  if (!(d > 0.0) || !(alpha > 0.0)) {
    throw std::invalid_argument("protocol1 config: d and alpha must be positive");
  }
  const double ratio = 2.0 * alpha / d;
  const double rounded = std::round(ratio);
  if (!(rounded >= 1.0) || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument(
        "protocol1 config: 2*alpha/d must be a positive integer");
  }
  if (!(t >= 0.0)) {
    throw std::invalid_argument("protocol1 config: t must be >= 0");
  }
  if (!(n_bar >= 0.0)) {
    throw std::invalid_argument("protocol1 config: n_bar must be >= 0");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("protocol1 config: epsilon must be in (0, 1)");
  }
  if (!(p_err > 0.0 && p_err < 1.0)) {
    throw std::invalid_argument("protocol1 config: p_err must be in (0, 1)");
  }
}

std::int64_t ProtocolOneConfig::num_bins() const {
  return static_cast<std::int64_t>(std::llround(2.0 * alpha / d));
}

PreparedInputs prepare_test_inputs(const ProtocolOneConfig& cfg, RngStream& rng) {
  cfg.validate();
  const std::size_t k = static_cast<std::size_t>(cfg.k);
  PreparedInputs out;
  out.bases.assign(k, channels::Quadrature::position);
  for (std::size_t i = k / 2; i < k; ++i) {
    out.bases[i] = channels::Quadrature::momentum;
  }
  // Fisher-Yates on the basis labels
  for (std::size_t i = k - 1; i > 0; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(out.bases[i], out.bases[j]);
  }

  const double sigma = std::sqrt(cfg.displacement_variance());
  out.displacements.resize(k);
  out.retries.assign(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    double x = sigma * rng.gaussian();
    while (x < -cfg.alpha || x > cfg.alpha) {
      ++out.retries[i];
      x = sigma * rng.gaussian();
    }
    out.displacements[i] = x;
  }
  return out;
}

std::int64_t discretize(double value, double d, double alpha) {
  const std::int64_t bins = static_cast<std::int64_t>(std::llround(2.0 * alpha / d));
  // interior bin j is (-alpha + j d, -alpha + (j+1) d], hence ceil - 1
  const std::int64_t j =
      static_cast<std::int64_t>(std::ceil((value + alpha) / d)) - 1;
  return std::clamp<std::int64_t>(j, 0, bins - 1);
}

CorrelationResult correlation_test(std::span<const std::int64_t> x_alice,
                                   std::span<const std::int64_t> x_bob,
                                   double t) {
  if (x_alice.size() != x_bob.size() || x_alice.empty()) {
    throw std::invalid_argument("correlation_test: length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < x_alice.size(); ++i) {
    total += static_cast<double>(std::llabs(x_alice[i] - x_bob[i]));
  }
  const double avg = total / static_cast<double>(x_alice.size());
  return {avg <= t, avg};
}

namespace {

// Quantities shared by the capacity and entanglement optimizations. The
// two bounds differ only in the eta interval (sqrt(eps/2) vs sqrt(eps), the
// latter also entering zeta) and a trailing constant.
struct BoundScaffold {
  double f_p = 0.0;          // sqrt(2 (1 - p_window^n))
  double lambda = 0.0;       // interval shrink caused by the cutoff
  double zeta_shift = 0.0;   // 8 f_p / sqrt(p_err)
  double zeta_denom = 0.0;   // 3 + 5 / (4 p_err)
  double mu_prefactor = 0.0; // (2 alpha / d) sqrt((k+n)(k+1)/(n k^2))
  double per_mode_base = 0.0;  // log2(2 pi / d^2)
};

BoundScaffold make_scaffold(const ProtocolOneConfig& cfg) {
  BoundScaffold s;
  const double tail =
      gaussmath::erf_tail_outside_window(cfg.alpha, cfg.displacement_variance());
  const double n = static_cast<double>(cfg.n);
  const double k = static_cast<double>(cfg.k);
  // 1 - (1 - tail)^n without cancellation
  const double one_minus_pn =
      tail >= 1.0 ? 1.0 : -std::expm1(n * std::log1p(-tail));
  s.f_p = std::sqrt(2.0 * one_minus_pn);
  s.zeta_denom = 3.0 + 5.0 / (4.0 * cfg.p_err);
  s.zeta_shift = 8.0 * s.f_p / std::sqrt(cfg.p_err);
  s.lambda = 8.0 * s.f_p * (s.zeta_denom - 1.0 / std::sqrt(cfg.p_err));
  s.mu_prefactor =
      (2.0 * cfg.alpha / cfg.d) * std::sqrt((k + n) * (k + 1.0) / (n * k * k));
  s.per_mode_base = log2_of(2.0 * M_PI / (cfg.d * cfg.d));
  return s;
}

struct EtaTerms {
  double zeta = 0.0;
  double mu = 0.0;
  double delta = 0.0;
  double objective = -std::numeric_limits<double>::infinity();
  bool feasible = false;
};

// Objective at one eta. `s_eps` is sqrt(eps/2) for the capacity bound and
// sqrt(eps) for the entanglement bound; the entanglement variant carries an
// extra +1.
EtaTerms eval_eta(const ProtocolOneConfig& cfg, const BoundScaffold& s,
                  double s_eps, double additive_constant, double eta) {
  EtaTerms r;
  r.zeta = (s_eps - eta + s.zeta_shift) / s.zeta_denom;
  const double guard = r.zeta / 4.0 - 2.0 * s.f_p;
  if (!(guard > 0.0)) return r;
  const double rad = log2_of(1.0 / guard);
  if (!(rad >= 0.0)) return r;
  r.mu = s.mu_prefactor * std::sqrt(rad);
  r.delta = 4.0 * log2_of(1.0 / eta) + 2.0 * log2_of(2.0 / (r.zeta * r.zeta)) + 2.0;
  const double n = static_cast<double>(cfg.n);
  const double per_mode =
      s.per_mode_base - 2.0 * log2_of(gaussmath::gamma_fn(cfg.t + r.mu));
  r.objective = n * per_mode - r.delta + additive_constant;
  r.feasible = std::isfinite(r.objective);
  return r;
}

BoundResult optimize_bound(const ProtocolOneConfig& cfg, double s_eps,
                           double additive_constant, bool clamp_at_zero) {
  cfg.validate();
  const BoundScaffold s = make_scaffold(cfg);
  BoundResult out;
  out.diagnostics.lambda = s.lambda;
  const double hi = s_eps - s.lambda;
  if (!(hi > 0.0)) {
    out.note = "trivial-zero";
    return out;
  }
  auto objective = [&](double eta) {
    return eval_eta(cfg, s, s_eps, additive_constant, eta).objective;
  };
  const auto opt = numerics::maximize_scalar(objective, 0.0, hi);
  if (!opt.found) {
    out.note = "cutoff-dominated";
    return out;
  }
  const EtaTerms terms = eval_eta(cfg, s, s_eps, additive_constant, opt.x);
  out.eta_star = opt.x;
  out.diagnostics.zeta = terms.zeta;
  out.diagnostics.mu = terms.mu;
  out.diagnostics.delta = terms.delta;
  out.value = clamp_at_zero ? std::max(0.0, opt.value) : opt.value;
  return out;
}

}  // namespace

BoundResult capacity_bound(const ProtocolOneConfig& cfg) {
  return optimize_bound(cfg, std::sqrt(cfg.epsilon / 2.0), 0.0,
                        /*clamp_at_zero=*/true);
}

BoundResult entanglement_bound(const ProtocolOneConfig& cfg) {
  return optimize_bound(cfg, std::sqrt(cfg.epsilon), 1.0,
                        /*clamp_at_zero=*/false);
}

double asymptotic_B(double d, double t) {
  if (!(d > 0.0) || !(t >= 0.0)) {
    throw std::invalid_argument("asymptotic_B: need d > 0 and t >= 0");
  }
  const double v =
      log2_of(2.0 * M_PI / (d * d)) - 2.0 * log2_of(gaussmath::gamma_fn(t));
  return std::max(0.0, v);
}

double asymptotic_threshold_t(double tau, double n_bar, double n_th, double d) {
  if (!(tau > 0.0 && tau <= 1.0) || !(n_bar >= 0.0) || !(n_th >= 0.0) ||
      !(d > 0.0)) {
    throw std::invalid_argument("asymptotic_threshold_t: invalid parameters");
  }
  const double radicand = n_bar * (1.0 + tau) + 1.0 + n_th * (1.0 - tau) -
                          2.0 * std::sqrt(n_bar * (n_bar + 1.0) * tau);
  if (!(radicand >= 0.0)) {
    throw std::logic_error("asymptotic_threshold_t: negative radicand");
  }
  return std::sqrt(4.0 / M_PI) * std::sqrt(radicand) / d;
}

double pass_probability_pure_loss(std::uint64_t k, double t, double d,
                                  double tau, double n_bar) {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("pass_probability_pure_loss: tau in (0, 1]");
  }
  const double spread = std::sqrt(n_bar + 1.0) - std::sqrt(tau * n_bar);
  const double arg = std::sqrt(static_cast<double>(k) / (M_PI - 2.0)) *
                     (t * d * std::sqrt(M_PI) / (2.0 * spread) - 1.0);
  return 0.5 + 0.5 * std::erf(arg);
}

TestRecord simulate_test_record(const ProtocolOneConfig& cfg,
                                const channels::ChannelModel& ch,
                                RngStream& rng) {
  PreparedInputs prep = prepare_test_inputs(cfg, rng);
  const std::size_t k = prep.displacements.size();
  TestRecord rec;
  rec.bases = std::move(prep.bases);
  rec.retries = std::move(prep.retries);
  rec.x_alice.resize(k);
  rec.x_bob.resize(k);
  const double squeezed_var = cfg.squeezed_variance();
  for (std::size_t i = 0; i < k; ++i) {
    // probe state centered on the displacement, squeezed in the measured
    // quadrature
    const double probe_q = prep.displacements[i] + rng.gaussian(0.0, squeezed_var);
    const double out_q = channels::sample_channel_quadrature(ch, probe_q,
                                                             rec.bases[i], rng);
    rec.x_alice[i] = discretize(prep.displacements[i], cfg.d, cfg.alpha);
    rec.x_bob[i] = discretize(out_q, cfg.d, cfg.alpha);
  }
  return rec;
}

ProtocolOneVerdict run_trial(const ProtocolOneConfig& cfg,
                             const channels::ChannelModel& ch, RngStream& rng) {
  const TestRecord rec = simulate_test_record(cfg, ch, rng);
  const CorrelationResult test = correlation_test(rec.x_alice, rec.x_bob, cfg.t);
  ProtocolOneVerdict v;
  v.passed = test.passed;
  v.avg_distance = test.avg_distance;
  if (!test.passed) return v;
  const BoundResult q = capacity_bound(cfg);
  v.q_lower = q.value;
  v.eta_star = q.eta_star;
  v.diagnostics = q.diagnostics;
  const BoundResult e = entanglement_bound(cfg);
  if (e.eta_star.has_value()) v.ent_lower = e.value;
  return v;
}

void to_json(nlohmann::json& j, const ProtocolOneVerdict& v) {
  j = nlohmann::json{
      {"passed", v.passed},
      {"avg_distance", v.avg_distance},
      {"q_lower", nullptr},
      {"ent_lower", nullptr},
      {"eta_star", nullptr},
      {"lambda", v.diagnostics.lambda},
      {"zeta", v.diagnostics.zeta},
      {"mu", v.diagnostics.mu},
      {"delta", v.diagnostics.delta},
  };
  if (v.q_lower) j["q_lower"] = *v.q_lower;
  if (v.ent_lower) j["ent_lower"] = *v.ent_lower;
  if (v.eta_star) j["eta_star"] = *v.eta_star;
}

}  // namespace capcert::protocol1
