#include "capcert/gaussmath.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace capcert::gaussmath {

namespace {
constexpr double kLn2 = 0.6931471805599453;
}

double g_entropy(double x) {
  if (!(x >= 1.0 - kSymplecticTol)) {
    throw std::invalid_argument("g_entropy: symplectic value below 1");
  }
  if (x < 1.0) x = 1.0;
  const double u = 0.5 * (x - 1.0);
  if (u == 0.0) return 0.0;
  if (u < 5e-7) {
    // (1+u)ln(1+u) - u ln u = u - u ln u + u^2/2 - u^3/6 + O(u^4)
    return (u - u * std::log(u) + 0.5 * u * u - u * u * u / 6.0) / kLn2;
  }
  if (u > 1e8) {
    // same quantity rearranged so huge u does not cancel
    return (u * std::log1p(1.0 / u) + std::log1p(u)) / kLn2;
  }
  return ((1.0 + u) * std::log1p(u) - u * std::log(u)) / kLn2;
}

double gamma_fn(double x) {
  if (!(x >= 0.0)) {
    throw std::invalid_argument("gamma_fn: negative argument");
  }
  if (x < 1e-300) return 1.0;  // continuous extension; (s+1)/x would overflow
  const double s = std::hypot(1.0, x);
  // x / (sqrt(1+x^2) - 1) == (sqrt(1+x^2) + 1) / x, which is stable for
  // small x
  return (x + s) * std::exp(x * std::log((s + 1.0) / x));
}

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("binary_entropy: p outside [0, 1]");
  }
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h / kLn2;
}

double erf_probability_in_window(double alpha, double variance) {
  if (!(alpha > 0.0) || !(variance > 0.0)) {
    throw std::invalid_argument("erf_probability_in_window: nonpositive input");
  }
  return std::erf(alpha / std::sqrt(2.0 * variance));
}

double erf_tail_outside_window(double alpha, double variance) {
  if (!(alpha > 0.0) || !(variance > 0.0)) {
    throw std::invalid_argument("erf_tail_outside_window: nonpositive input");
  }
  return std::erfc(alpha / std::sqrt(2.0 * variance));
}

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd entries)
    : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() < 2 ||
      entries_.rows() % 2 != 0) {
    throw std::invalid_argument("CovarianceMatrix: need square 2m x 2m matrix");
  }
  for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < entries_.cols(); ++j) {
      if (entries_(i, j) != entries_(j, i)) {
        throw std::invalid_argument("CovarianceMatrix: matrix not symmetric");
      }
    }
  }
  if (!entries_.allFinite()) {
    throw std::invalid_argument("CovarianceMatrix: non-finite entries");
  }
}

CovarianceMatrix CovarianceMatrix::symmetrized(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd s = 0.5 * (m + m.transpose());
  // enforce exact symmetry bit-for-bit
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < s.cols(); ++j) {
      s(j, i) = s(i, j);
    }
  }
  return CovarianceMatrix(std::move(s));
}

double SymplecticSpectrum::min() const {
  return *std::min_element(values.begin(), values.end());
}

double SymplecticSpectrum::product_squared() const {
  double p = 1.0;
  for (double v : values) p *= v * v;
  return p;
}

Eigen::MatrixXd symplectic_form(int modes) {
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * modes, 2 * modes);
  for (int j = 0; j < modes; ++j) {
    omega(2 * j, 2 * j + 1) = 1.0;
    omega(2 * j + 1, 2 * j) = -1.0;
  }
  return omega;
}

namespace {

bool is_positive_definite(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

SymplecticSpectrum spectrum_unchecked(const Eigen::MatrixXd& m) {
  const int modes = static_cast<int>(m.rows()) / 2;
  const Eigen::MatrixXd om = symplectic_form(modes) * m;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(om, /*computeEigenvectors=*/false);
  std::vector<double> mags(2 * modes);
  for (int i = 0; i < 2 * modes; ++i) {
    mags[static_cast<size_t>(i)] = std::abs(solver.eigenvalues()(i));
  }
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  SymplecticSpectrum spec;
  spec.values.reserve(static_cast<size_t>(modes));
  // eigenvalues of Omega*M come in +-i*nu pairs; report each pair once
  for (int j = 0; j < modes; ++j) {
    spec.values.push_back(
        0.5 * (mags[static_cast<size_t>(2 * j)] + mags[static_cast<size_t>(2 * j + 1)]));
  }
  return spec;
}

}  // namespace

SymplecticSpectrum symplectic_eigenvalues(const CovarianceMatrix& m) {
  if (!is_positive_definite(m.entries())) {
    throw std::invalid_argument(
        "symplectic_eigenvalues: matrix not positive definite");
  }
  return spectrum_unchecked(m.entries());
}

bool bona_fide_check(const CovarianceMatrix& m) {
  if (!is_positive_definite(m.entries())) return false;
  return spectrum_unchecked(m.entries()).min() >= 1.0 - kSymplecticTol;
}

double gaussian_state_entropy(const CovarianceMatrix& m) {
  if (!bona_fide_check(m)) {
    throw std::invalid_argument("gaussian_state_entropy: unphysical covariance");
  }
  double h = 0.0;
  for (double nu : symplectic_eigenvalues(m).values) {
    h += g_entropy(std::max(nu, 1.0));
  }
  return h;
}

}  // namespace capcert::gaussmath
