#ifndef CAPCERT_GAUSSMATH_HPP
#define CAPCERT_GAUSSMATH_HPP

#include <Eigen/Dense>
#include <vector>

namespace capcert::gaussmath {

// Quadrature convention used everywhere in this library: dimensionless
// quadratures with vacuum variance 1, so a thermal state with mean photon
// number n̄ has variance 2n̄+1 in both quadratures. tmsv_cov() in the
// channels module asserts this normalization.
inline constexpr double kVacuumVariance = 1.0;

// Symplectic eigenvalues of physical states satisfy ν ≥ 1; values within
// this tolerance below 1 are treated as rounding of a pure mode.
inline constexpr double kSymplecticTol = 1e-9;

// Bosonic entropy of a symplectic eigenvalue, in bits:
//   g(x) = ((x+1)/2) log2((x+1)/2) - ((x-1)/2) log2((x-1)/2)
// with the 0 log 0 = 0 convention at x = 1. A series expansion is used for
// x - 1 < 1e-6 to avoid cancellation. Throws std::invalid_argument for
// x < 1 - kSymplecticTol; values in [1 - tol, 1) are clamped to 1.
double g_entropy(double x);

// (x + sqrt(1+x^2)) * (x / (sqrt(1+x^2) - 1))^x, continuously extended to
// gamma_fn(0) = 1. Strictly increasing for x > 0. Throws for x < 0.
double gamma_fn(double x);

// -p log2 p - (1-p) log2(1-p), with 0 log 0 = 0. Throws outside [0, 1].
double binary_entropy(double p);

// Probability that a zero-mean Gaussian sample of the given variance lies in
// (-alpha, alpha): erf(alpha / sqrt(2 variance)). Throws for nonpositive
// arguments.
double erf_probability_in_window(double alpha, double variance);

// Complement of erf_probability_in_window, computed via erfc so that tiny
// tails keep full relative precision. Underflows below ~1e-308 clamp to 0.
double erf_tail_outside_window(double alpha, double variance);

// Real symmetric 2m x 2m matrix of quadrature second moments, mode ordering
// (q1, p1, q2, p2, ...). Construction requires an exactly symmetric matrix;
// use symmetrized() for matrices assembled by floating-point products.
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(Eigen::MatrixXd entries);

  // Averages M and M^T before construction.
  static CovarianceMatrix symmetrized(const Eigen::MatrixXd& entries);

  int dim_modes() const { return static_cast<int>(entries_.rows()) / 2; }
  const Eigen::MatrixXd& entries() const { return entries_; }
  double operator()(int i, int j) const { return entries_(i, j); }

 private:
  Eigen::MatrixXd entries_;
};

// Symplectic eigenvalues, one per mode, sorted descending.
struct SymplecticSpectrum {
  std::vector<double> values;

  double min() const;
  // product of nu_i^2; equals det(M) for the source matrix
  double product_squared() const;
};

// Standard symplectic form, block-diagonal [[0,1],[-1,0]] per mode.
Eigen::MatrixXd symplectic_form(int modes);

// Absolute values of the eigenvalues of i*Omega*M, one per mode. Computed
// with a general real eigensolver on Omega*M; the inputs here are at most a
// few modes so no structured solver is needed. Throws for non-positive-
// definite input (the constructor already enforces symmetry).
SymplecticSpectrum symplectic_eigenvalues(const CovarianceMatrix& m);

// True iff M is a valid quantum covariance matrix: M positive definite and
// every symplectic eigenvalue >= 1 - kSymplecticTol. Never throws; returns
// false for non-positive-definite input.
bool bona_fide_check(const CovarianceMatrix& m);

// Von Neumann entropy of the Gaussian state with covariance M, in bits:
// sum of g_entropy over the symplectic spectrum. Throws if M is not bona
// fide.
double gaussian_state_entropy(const CovarianceMatrix& m);

}  // namespace capcert::gaussmath

#endif
