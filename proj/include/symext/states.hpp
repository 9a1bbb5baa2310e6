#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "symext/errors.hpp"
#include "symext/matrix.hpp"

namespace symext {

// Basis ordering for two-qudit states is |ij> -> i*d + j throughout; for
// three qudits |ijk> -> (i*d + j)*d + k.

// d-th roots of unity z^j = exp(2*pi*i*j/d), j = 0..d-1.  Every module takes
// its phases from this one table so they agree to the last bit.
inline std::vector<Complex> phase_table(int d) {
  if (d < 1) throw BadDomain("phase_table: d must be >= 1, got " + std::to_string(d));
  std::vector<Complex> z(d);
  for (int j = 0; j < d; ++j) z[j] = std::polar(1.0, 2.0 * std::numbers::pi * j / d);
  return z;
}

// Maximally entangled basis vector d^{-1/2} sum_k z^{lk} |k>|k-m mod d>.
inline CVec bell_vector(int d, int l, int m) {
  if (d < 2) throw BadDomain("bell_vector: d must be >= 2, got " + std::to_string(d));
  if (l < 0 || l >= d || m < 0 || m >= d)
    throw IndexOutOfRange("bell_vector: (l, m) = (" + std::to_string(l) + ", " +
                          std::to_string(m) + ") out of range for d = " + std::to_string(d));
  const auto z = phase_table(d);
  const double norm = 1.0 / std::sqrt(static_cast<double>(d));
  CVec v = CVec::Zero(d * d);
  for (int k = 0; k < d; ++k) v(k * d + (k - m + d) % d) = norm * z[(l * k) % d];
  return v;
}

// Probability grid A[l][m] over the Bell basis.  Entries within 1e-12 below
// zero are clamped; anything worse, or a total off unity by more than 1e-12,
// is rejected.
class BellCoefficients {
 public:
  BellCoefficients(int d, RealMat grid) : d_(d), a_(std::move(grid)) {
    if (d_ < 2) throw BadDomain("BellCoefficients: d must be >= 2, got " + std::to_string(d_));
    if (a_.rows() != d_ || a_.cols() != d_)
      throw BadDims("BellCoefficients: grid must be " + std::to_string(d_) + "x" +
                    std::to_string(d_));
    double sum = 0.0;
    for (int l = 0; l < d_; ++l)
      for (int m = 0; m < d_; ++m) {
        if (a_(l, m) < -1e-12)
          throw BadDomain("BellCoefficients: negative weight A[" + std::to_string(l) + "][" +
                          std::to_string(m) + "] = " + std::to_string(a_(l, m)));
        if (a_(l, m) < 0.0) a_(l, m) = 0.0;
        sum += a_(l, m);
      }
    if (std::abs(sum - 1.0) > 1e-12)
      throw BadDomain("BellCoefficients: weights sum to " + std::to_string(sum) +
                      ", expected 1 within 1e-12");
  }

  int d() const { return d_; }
  const RealMat& grid() const { return a_; }
  double operator()(int l, int m) const { return a_(l, m); }

 private:
  int d_;
  RealMat a_;
};

// Column sum A_{*m}.
inline double marginal(const BellCoefficients& A, int m) {
  if (m < 0 || m >= A.d())
    throw IndexOutOfRange("marginal: m = " + std::to_string(m) + " out of range for d = " +
                          std::to_string(A.d()));
  double s = 0.0;
  for (int l = 0; l < A.d(); ++l) s += A(l, m);
  return s;
}

// Trace-one PSD matrix on a tensor product of subsystems.
class DensityMatrix {
 public:
  DensityMatrix(std::vector<int> dims, HermitianMatrix m) : dims_(std::move(dims)), m_(std::move(m)) {
    long long total = 1;
    for (int d : dims_) {
      if (d < 1) throw BadDims("DensityMatrix: subsystem dimensions must be positive");
      total *= d;
    }
    if (dims_.empty() || total != m_.dim())
      throw BadDims("DensityMatrix: matrix dimension " + std::to_string(m_.dim()) +
                    " does not match the subsystem product");
    if (std::abs(m_.trace() - 1.0) > 1e-12)
      throw BadDomain("DensityMatrix: trace is " + std::to_string(m_.trace()) +
                      ", expected 1 within 1e-12");
    if (min_eigenvalue(m_) < -1e-9)
      throw BadDomain("DensityMatrix: smallest eigenvalue " +
                      std::to_string(min_eigenvalue(m_)) + " below -1e-9");
  }

  const std::vector<int>& dims() const { return dims_; }
  const HermitianMatrix& matrix() const { return m_; }

 private:
  std::vector<int> dims_;
  HermitianMatrix m_;
};

// Mixture sum_{lm} A[l][m] |psi_lm><psi_lm|, accumulated over the d nonzero
// amplitudes of each Bell vector.
inline DensityMatrix bell_diag_to_density(const BellCoefficients& A) {
  const int d = A.d();
  const auto z = phase_table(d);
  const double inv_d = 1.0 / d;
  Mat acc = Mat::Zero(d * d, d * d);
  for (int l = 0; l < d; ++l)
    for (int m = 0; m < d; ++m) {
      const double w = A(l, m);
      if (w == 0.0) continue;
      for (int k = 0; k < d; ++k) {
        const int row = k * d + (k - m + d) % d;
        const Complex vk = z[(l * k) % d];
        for (int kk = 0; kk < d; ++kk) {
          const int col = kk * d + (kk - m + d) % d;
          acc(row, col) += w * inv_d * vk * std::conj(z[(l * kk) % d]);
        }
      }
    }
  return DensityMatrix({d, d}, HermitianMatrix(acc));
}

// Diagonal of rho in the Bell basis: A[l][m] = <psi_lm| rho |psi_lm>.  Acts
// as the Bell-diagonal projection for general input; tiny negative diagonals
// (eigen-solver seepage up to 1e-9) are clamped and the grid renormalized.
inline BellCoefficients density_to_bell_diag(const DensityMatrix& rho) {
  if (rho.dims().size() != 2 || rho.dims()[0] != rho.dims()[1])
    throw BadDims("density_to_bell_diag: input must be a two-qudit state with equal parts");
  const int d = rho.dims()[0];
  const auto z = phase_table(d);
  const Mat& m = rho.matrix().mat();
  RealMat grid(d, d);
  for (int l = 0; l < d; ++l)
    for (int mm = 0; mm < d; ++mm) {
      Complex acc = 0.0;
      for (int k = 0; k < d; ++k) {
        const int row = k * d + (k - mm + d) % d;
        for (int kk = 0; kk < d; ++kk) {
          const int col = kk * d + (kk - mm + d) % d;
          acc += std::conj(z[(l * k) % d]) * m(row, col) * z[(l * kk) % d];
        }
      }
      grid(l, mm) = std::max(acc.real() / d, 0.0);
    }
  grid /= grid.sum();
  return BellCoefficients(d, grid);
}

// Compact form of a U2-invariant two-qudit state: the coherence block
// btilde(i, p) = a_{ii,pp} plus the diagonal weights lambda(i, j) = a_{ij,ij}.
// All other coefficients of such a state vanish.
class U2InvariantState {
 public:
  U2InvariantState(HermitianMatrix btilde, RealMat lambda)
      : btilde_(std::move(btilde)), lambda_(std::move(lambda)) {
    const int d = btilde_.dim();
    if (d < 2) throw BadDomain("U2InvariantState: d must be >= 2, got " + std::to_string(d));
    if (lambda_.rows() != d || lambda_.cols() != d)
      throw BadDims("U2InvariantState: lambda must be " + std::to_string(d) + "x" +
                    std::to_string(d));
    double sum = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (lambda_(i, j) < -1e-12)
          throw BadDomain("U2InvariantState: negative weight lambda[" + std::to_string(i) +
                          "][" + std::to_string(j) + "] = " + std::to_string(lambda_(i, j)));
        if (lambda_(i, j) < 0.0) lambda_(i, j) = 0.0;
        sum += lambda_(i, j);
      }
    if (std::abs(sum - 1.0) > 1e-12)
      throw BadDomain("U2InvariantState: weights sum to " + std::to_string(sum) +
                      ", expected 1 within 1e-12");
    for (int i = 0; i < d; ++i) {
      if (std::abs(lambda_(i, i) - btilde_(i, i).real()) > 1e-12)
        throw BadDomain("U2InvariantState: lambda[" + std::to_string(i) + "][" +
                        std::to_string(i) + "] disagrees with the coherence-block diagonal");
      lambda_(i, i) = btilde_(i, i).real();  // make the shared diagonal exact
    }
    if (min_eigenvalue(btilde_) < -1e-9)
      throw BadDomain("U2InvariantState: coherence block has eigenvalue " +
                      std::to_string(min_eigenvalue(btilde_)) + " below -1e-9");
  }

  int d() const { return btilde_.dim(); }
  const HermitianMatrix& btilde() const { return btilde_; }
  const RealMat& lambda() const { return lambda_; }

 private:
  HermitianMatrix btilde_;
  RealMat lambda_;
};

inline const HermitianMatrix& btilde_of(const U2InvariantState& state) { return state.btilde(); }

// Keep a_{ii,pp} and a_{ij,ij}, zero everything else.  Equals the Haar
// average over U (x) conj(U) with U a diagonal unitary; idempotent,
// trace-preserving and positivity-preserving.
inline U2InvariantState twirl_u2(const DensityMatrix& rho) {
  if (rho.dims().size() != 2 || rho.dims()[0] != rho.dims()[1])
    throw BadDims("twirl_u2: input must be a two-qudit state with equal parts");
  const int d = rho.dims()[0];
  const Mat& m = rho.matrix().mat();
  Mat btilde(d, d);
  RealMat lambda(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      btilde(i, j) = m(i * d + i, j * d + j);
      lambda(i, j) = m(i * d + j, i * d + j).real();
    }
  return U2InvariantState(HermitianMatrix(btilde), std::move(lambda));
}

// Expand the compact form back to the full d^2 x d^2 matrix.
inline DensityMatrix u2_to_density(const U2InvariantState& state) {
  const int d = state.d();
  Mat m = Mat::Zero(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      m(i * d + j, i * d + j) = state.lambda()(i, j);
    }
  for (int i = 0; i < d; ++i)
    for (int p = 0; p < d; ++p) m(i * d + i, p * d + p) = state.btilde()(i, p);
  return DensityMatrix({d, d}, HermitianMatrix(m));
}

// Compact form of a Bell-diagonal state, built directly from the grid:
// btilde(i, p) = d^{-1} sum_l A[l][0] z^{l(i-p)} and
// lambda(i, j) = d^{-1} A_{*(i-j mod d)}.  Agrees with twirling the dense
// matrix but is O(d^2) and exactly circulant.
inline U2InvariantState u2_from_bell_diag(const BellCoefficients& A) {
  const int d = A.d();
  const auto z = phase_table(d);
  std::vector<double> col_sums(d);
  for (int m = 0; m < d; ++m) col_sums[m] = marginal(A, m);

  // One value per difference class; classes k and d-k are forced to be exact
  // conjugates (and the self-paired ones real) so the block comes out both
  // Hermitian and circulant to the last bit.
  std::vector<Complex> diff_class(d);
  for (int k = 0; k <= d / 2; ++k) {
    Complex acc = 0.0;
    for (int l = 0; l < d; ++l) acc += A(l, 0) * z[(l * k) % d];
    acc /= static_cast<double>(d);
    if (k == 0 || 2 * k == d) acc = Complex(acc.real(), 0.0);
    diff_class[k] = acc;
    if (k > 0 && 2 * k != d) diff_class[d - k] = std::conj(acc);
  }
  Mat btilde(d, d);
  RealMat lambda(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      btilde(i, j) = diff_class[(i - j + d) % d];
      lambda(i, j) = col_sums[(i - j + d) % d] / d;
    }
  return U2InvariantState(HermitianMatrix(btilde), std::move(lambda));
}

// Action of the twirl on a Bell-diagonal state, expressed on the grid: the
// m = 0 column is kept, every other column is flattened to its mean.
inline BellCoefficients bell_twirl_grid(const BellCoefficients& A) {
  const int d = A.d();
  RealMat out(d, d);
  for (int m = 0; m < d; ++m) {
    const double flat = marginal(A, m) / d;
    for (int l = 0; l < d; ++l) out(l, m) = (m == 0) ? A(l, 0) : flat;
  }
  return BellCoefficients(d, std::move(out));
}

// A Bell-diagonal state is U2-invariant iff every m != 0 column is uniform.
inline bool is_u2_invariant_bell(const BellCoefficients& A, double tol) {
  const int d = A.d();
  for (int m = 1; m < d; ++m) {
    const double flat = marginal(A, m) / d;
    for (int l = 0; l < d; ++l)
      if (std::abs(A(l, m) - flat) > tol) return false;
  }
  return true;
}

// Two-parameter Bell-diagonal family: weight a on psi_00, b on the rest of
// the m = 0 column, and the remainder spread uniformly over m != 0.  The
// column weight x = a + (d-1) b may not exceed 1.
class GenIsoParams {
 public:
  GenIsoParams(int d, double a, double b) : d_(d), a_(a), b_(b) {
    if (d_ < 2) throw BadDomain("GenIsoParams: d must be >= 2, got " + std::to_string(d_));
    if (a_ < -1e-12 || b_ < -1e-12)
      throw BadDomain("GenIsoParams: weights must be nonnegative, got a = " +
                      std::to_string(a_) + ", b = " + std::to_string(b_));
    a_ = std::max(a_, 0.0);
    b_ = std::max(b_, 0.0);
    if (x() > 1.0 + 1e-12)
      throw BadDomain("GenIsoParams: column weight a + (d-1) b = " + std::to_string(x()) +
                      " exceeds 1");
  }

  int d() const { return d_; }
  double a() const { return a_; }
  double b() const { return b_; }
  double x() const { return a_ + (d_ - 1) * b_; }

 private:
  int d_;
  double a_, b_;
};

inline BellCoefficients geniso_coeffs(const GenIsoParams& p) {
  const int d = p.d();
  const double rest = (1.0 - p.x()) / (d * (d - 1.0));
  RealMat grid(d, d);
  for (int l = 0; l < d; ++l) {
    grid(l, 0) = (l == 0) ? p.a() : p.b();
    for (int m = 1; m < d; ++m) grid(l, m) = rest;
  }
  return BellCoefficients(d, std::move(grid));
}

// Recover (a, b) from the column weight x and the imbalance t = a - b.
inline GenIsoParams geniso_from_xt(int d, double x, double t) {
  if (d < 2) throw BadDomain("geniso_from_xt: d must be >= 2, got " + std::to_string(d));
  return GenIsoParams(d, (x + (d - 1) * t) / d, (x - t) / d);
}

// One-parameter subfamily: weight a00 on psi_00 and the remainder spread
// uniformly over all other Bell vectors.
inline BellCoefficients isotropic_coeffs(int d, double a00) {
  if (d < 2) throw BadDomain("isotropic_coeffs: d must be >= 2, got " + std::to_string(d));
  if (a00 < -1e-12 || a00 > 1.0 + 1e-12)
    throw BadDomain("isotropic_coeffs: a00 = " + std::to_string(a00) + " outside [0, 1]");
  a00 = std::clamp(a00, 0.0, 1.0);
  const double rest = (1.0 - a00) / (d * d - 1.0);
  RealMat grid = RealMat::Constant(d, d, rest);
  grid(0, 0) = a00;
  return BellCoefficients(d, std::move(grid));
}

inline GenIsoParams isotropic_geniso_params(int d, double a00) {
  if (d < 2) throw BadDomain("isotropic_geniso_params: d must be >= 2");
  if (a00 < -1e-12 || a00 > 1.0 + 1e-12)
    throw BadDomain("isotropic_geniso_params: a00 = " + std::to_string(a00) + " outside [0, 1]");
  a00 = std::clamp(a00, 0.0, 1.0);
  return GenIsoParams(d, a00, (1.0 - a00) / (d * d - 1.0));
}

}  // namespace symext
