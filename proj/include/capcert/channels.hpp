#ifndef CAPCERT_CHANNELS_HPP
#define CAPCERT_CHANNELS_HPP

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "capcert/gaussmath.hpp"
#include "capcert/rng.hpp"

namespace capcert::channels {

enum class ChannelKind { identity, loss, amplifier, additive };

enum class Quadrature : std::uint8_t { position = 0, momentum = 1 };

// Phase-insensitive single-mode Gaussian channel. Every member of this
// family acts on a quadrature as x -> scale * x + N(0, added_noise_variance)
// identically in position and momentum.
class ChannelModel {
 public:
  static ChannelModel identity();
  static ChannelModel loss(double tau, double n_th = 0.0);
  static ChannelModel amplifier(double gain, double n_th = 0.0);
  static ChannelModel additive(double sigma2_add);

  ChannelKind kind() const { return kind_; }
  double tau() const { return tau_; }
  double n_th() const { return n_th_; }
  double gain() const { return gain_; }
  double sigma2_add() const { return sigma2_add_; }

  // quadrature amplitude factor: sqrt(tau), sqrt(G), 1, 1
  double scale() const;
  // (1-tau)(2 n_th + 1), (G-1)(2 n_th + 1), sigma2_add, 0
  double added_noise_variance() const;

  std::string describe() const;

 private:
  ChannelModel() = default;
  ChannelKind kind_ = ChannelKind::identity;
  double tau_ = 1.0;
  double n_th_ = 0.0;
  double gain_ = 1.0;
  double sigma2_add_ = 0.0;
};

void to_json(nlohmann::json& j, const ChannelModel& ch);
void from_json(const nlohmann::json& j, ChannelModel& ch);

// Probe configuration shared by the detection protocols. Squeezing in dB and
// mean photon number are locked together by n̄ = (10^{s/10} - 1)/2.
struct ProbeEnsemble {
  std::uint64_t count = 0;
  double squeezing_db = 0.0;
  double n_bar = 0.0;
  double cutoff_alpha = 0.0;
  std::uint64_t seed = 0;

  static ProbeEnsemble from_squeezing_db(std::uint64_t count, double s_db,
                                         double cutoff_alpha,
                                         std::uint64_t seed);
  static ProbeEnsemble from_mean_photon(std::uint64_t count, double n_bar,
                                        double cutoff_alpha,
                                        std::uint64_t seed);
};

double n_bar_from_squeezing_db(double s_db);
double squeezing_db_from_n_bar(double n_bar);

// Two-mode squeezed vacuum covariance: diagonal blocks (2n̄+1) I, off-diagonal
// sqrt((2n̄+1)^2 - 1) sigma_z. Pure: symplectic spectrum (1, 1).
gaussmath::CovarianceMatrix tmsv_cov(double n_bar);

// Applies the channel to one mode of a multimode covariance matrix: the
// mode's diagonal block becomes scale^2 B + noise I, cross blocks pick up a
// single factor of scale, all other blocks are untouched.
gaussmath::CovarianceMatrix apply_channel_cov(const ChannelModel& ch,
                                              const gaussmath::CovarianceMatrix& m,
                                              int mode_index);

// Monte Carlo transcription of the quadrature map: scale * x_in plus a fresh
// Gaussian noise sample. The basis argument is kept for interface symmetry;
// phase-insensitive channels treat both quadratures identically.
double sample_channel_quadrature(const ChannelModel& ch, double x_in,
                                 Quadrature basis, RngStream& rng);

}  // namespace capcert::channels

#endif
