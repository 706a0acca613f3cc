#include "capcert/channels.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace capcert::channels {

ChannelModel ChannelModel::identity() {
  ChannelModel ch;
  ch.kind_ = ChannelKind::identity;
  return ch;
}

ChannelModel ChannelModel::loss(double tau, double n_th) {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("loss channel: tau must be in (0, 1]");
  }
  if (!(n_th >= 0.0)) {
    throw std::invalid_argument("loss channel: n_th must be >= 0");
  }
  ChannelModel ch;
  ch.kind_ = ChannelKind::loss;
  ch.tau_ = tau;
  ch.n_th_ = n_th;
  return ch;
}

ChannelModel ChannelModel::amplifier(double gain, double n_th) {
  if (!(gain >= 1.0)) {
    throw std::invalid_argument("amplifier channel: gain must be >= 1");
  }
  if (!(n_th >= 0.0)) {
    throw std::invalid_argument("amplifier channel: n_th must be >= 0");
  }
  ChannelModel ch;
  ch.kind_ = ChannelKind::amplifier;
  ch.gain_ = gain;
  ch.n_th_ = n_th;
  return ch;
}

ChannelModel ChannelModel::additive(double sigma2_add) {
  if (!(sigma2_add >= 0.0)) {
    throw std::invalid_argument("additive channel: sigma2_add must be >= 0");
  }
  ChannelModel ch;
  ch.kind_ = ChannelKind::additive;
  ch.sigma2_add_ = sigma2_add;
  return ch;
}

double ChannelModel::scale() const {
  switch (kind_) {
    case ChannelKind::loss:
      return std::sqrt(tau_);
    case ChannelKind::amplifier:
      return std::sqrt(gain_);
    default:
      return 1.0;
  }
}

double ChannelModel::added_noise_variance() const {
  switch (kind_) {
    case ChannelKind::loss:
      return (1.0 - tau_) * (2.0 * n_th_ + 1.0);
    case ChannelKind::amplifier:
      return (gain_ - 1.0) * (2.0 * n_th_ + 1.0);
    case ChannelKind::additive:
      return sigma2_add_;
    case ChannelKind::identity:
      return 0.0;
  }
  return 0.0;
}

std::string ChannelModel::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case ChannelKind::identity:
      os << "identity";
      break;
    case ChannelKind::loss:
      os << "loss(tau=" << tau_ << ", n_th=" << n_th_ << ")";
      break;
    case ChannelKind::amplifier:
      os << "amplifier(G=" << gain_ << ", n_th=" << n_th_ << ")";
      break;
    case ChannelKind::additive:
      os << "additive(sigma2=" << sigma2_add_ << ")";
      break;
  }
  return os.str();
}

void to_json(nlohmann::json& j, const ChannelModel& ch) {
  switch (ch.kind()) {
    case ChannelKind::identity:
      j = {{"kind", "identity"}};
      break;
    case ChannelKind::loss:
      j = {{"kind", "loss"}, {"tau", ch.tau()}, {"n_th", ch.n_th()}};
      break;
    case ChannelKind::amplifier:
      j = {{"kind", "amplifier"}, {"gain", ch.gain()}, {"n_th", ch.n_th()}};
      break;
    case ChannelKind::additive:
      j = {{"kind", "additive"}, {"sigma2_add", ch.sigma2_add()}};
      break;
  }
}

void from_json(const nlohmann::json& j, ChannelModel& ch) {
  const std::string kind = j.at("kind").get<std::string>();
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    const bool known =
        key == "kind" ||
        (kind == "loss" && (key == "tau" || key == "n_th")) ||
        (kind == "amplifier" && (key == "gain" || key == "n_th")) ||
        (kind == "additive" && key == "sigma2_add");
    if (!known) {
      throw std::invalid_argument("channel: unknown key '" + key + "' for kind '" +
                                  kind + "'");
    }
  }
  if (kind == "identity") {
    ch = ChannelModel::identity();
  } else if (kind == "loss") {
    ch = ChannelModel::loss(j.at("tau").get<double>(),
                            j.value("n_th", 0.0));
  } else if (kind == "amplifier") {
    ch = ChannelModel::amplifier(j.at("gain").get<double>(),
                                 j.value("n_th", 0.0));
  } else if (kind == "additive") {
    ch = ChannelModel::additive(j.at("sigma2_add").get<double>());
  } else {
    throw std::invalid_argument("channel: unknown kind '" + kind + "'");
  }
}

double n_bar_from_squeezing_db(double s_db) {
  return (std::pow(10.0, s_db / 10.0) - 1.0) / 2.0;
}

double squeezing_db_from_n_bar(double n_bar) {
  return 10.0 * std::log10(2.0 * n_bar + 1.0);
}

ProbeEnsemble ProbeEnsemble::from_squeezing_db(std::uint64_t count, double s_db,
                                               double cutoff_alpha,
                                               std::uint64_t seed) {
  if (!(s_db >= 0.0) || !(cutoff_alpha > 0.0)) {
    throw std::invalid_argument("ProbeEnsemble: invalid squeezing or cutoff");
  }
  ProbeEnsemble p;
  p.count = count;
  p.squeezing_db = s_db;
  p.n_bar = n_bar_from_squeezing_db(s_db);
  p.cutoff_alpha = cutoff_alpha;
  p.seed = seed;
  return p;
}

ProbeEnsemble ProbeEnsemble::from_mean_photon(std::uint64_t count, double n_bar,
                                              double cutoff_alpha,
                                              std::uint64_t seed) {
  if (!(n_bar >= 0.0) || !(cutoff_alpha > 0.0)) {
    throw std::invalid_argument("ProbeEnsemble: invalid n_bar or cutoff");
  }
  ProbeEnsemble p;
  p.count = count;
  p.squeezing_db = squeezing_db_from_n_bar(n_bar);
  p.n_bar = n_bar_from_squeezing_db(p.squeezing_db);
  p.cutoff_alpha = cutoff_alpha;
  p.seed = seed;
  return p;
}

gaussmath::CovarianceMatrix tmsv_cov(double n_bar) {
  if (!(n_bar >= 0.0)) {
    throw std::invalid_argument("tmsv_cov: n_bar must be >= 0");
  }
  const double v = 2.0 * n_bar + 1.0;
  const double c = std::sqrt(v * v - 1.0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
  m(0, 0) = m(1, 1) = m(2, 2) = m(3, 3) = v;
  m(0, 2) = m(2, 0) = c;
  m(1, 3) = m(3, 1) = -c;
  return gaussmath::CovarianceMatrix(std::move(m));
}

gaussmath::CovarianceMatrix apply_channel_cov(const ChannelModel& ch,
                                              const gaussmath::CovarianceMatrix& m,
                                              int mode_index) {
  const int modes = m.dim_modes();
  if (mode_index < 0 || mode_index >= modes) {
    throw std::out_of_range("apply_channel_cov: mode index out of range");
  }
  const double s = ch.scale();
  const double noise = ch.added_noise_variance();
  if (s == 1.0 && noise == 0.0) return m;

  Eigen::MatrixXd out = m.entries();
  const int q = 2 * mode_index;
  // rows/cols of the target mode scale by s (diagonal block by s^2)
  out.row(q) *= s;
  out.row(q + 1) *= s;
  out.col(q) *= s;
  out.col(q + 1) *= s;
  out(q, q) += noise;
  out(q + 1, q + 1) += noise;
  return gaussmath::CovarianceMatrix(std::move(out));
}

double sample_channel_quadrature(const ChannelModel& ch, double x_in,
                                 Quadrature /*basis*/, RngStream& rng) {
  const double noise = ch.added_noise_variance();
  if (noise == 0.0) return ch.scale() * x_in;
  return ch.scale() * x_in + rng.gaussian(0.0, noise);
}

}  // namespace capcert::channels
