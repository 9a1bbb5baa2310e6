#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "symext/errors.hpp"

namespace symext {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using RealMat = Eigen::MatrixXd;
using RealVec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;

// Dense complex matrix that is Hermitian by construction: the lower triangle
// (plus a real diagonal) is the source of truth, the upper triangle is its
// conjugate mirror.  Real-linear combinations stay exactly Hermitian.
class HermitianMatrix {
 public:
  explicit HermitianMatrix(int n) : m_(Mat::Zero(check_dim(n), n)) {}

  // Takes the lower triangle of `raw` as truth; imaginary parts on the
  // diagonal are dropped.
  explicit HermitianMatrix(const Mat& raw) {
    if (raw.rows() != raw.cols() || raw.rows() < 1)
      throw BadDims("HermitianMatrix: input must be square and non-empty");
    const auto n = raw.rows();
    m_ = Mat(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      m_(i, i) = Complex(raw(i, i).real(), 0.0);
      for (Eigen::Index j = 0; j < i; ++j) {
        m_(i, j) = raw(i, j);
        m_(j, i) = std::conj(raw(i, j));
      }
    }
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Mat& mat() const { return m_; }

  Complex operator()(int i, int j) const {
    check_index(i, j);
    return m_(i, j);
  }

  // Writes (i, j) and its mirror (j, i) = conj; diagonal writes keep only
  // the real part.
  void set(int i, int j, Complex v) {
    check_index(i, j);
    if (i == j) {
      m_(i, i) = Complex(v.real(), 0.0);
    } else {
      m_(i, j) = v;
      m_(j, i) = std::conj(v);
    }
  }

  double trace() const { return m_.trace().real(); }

  friend HermitianMatrix operator+(const HermitianMatrix& a, const HermitianMatrix& b) {
    check_same(a, b);
    return HermitianMatrix(Mat(a.m_ + b.m_));
  }
  friend HermitianMatrix operator-(const HermitianMatrix& a, const HermitianMatrix& b) {
    check_same(a, b);
    return HermitianMatrix(Mat(a.m_ - b.m_));
  }
  friend HermitianMatrix operator*(double s, const HermitianMatrix& a) {
    return HermitianMatrix(Mat(s * a.m_));
  }

 private:
  static int check_dim(int n) {
    if (n < 1) throw BadDims("HermitianMatrix: dimension must be >= 1, got " + std::to_string(n));
    return n;
  }
  void check_index(int i, int j) const {
    if (i < 0 || j < 0 || i >= dim() || j >= dim())
      throw IndexOutOfRange("HermitianMatrix: index (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") out of range for dimension " +
                            std::to_string(dim()));
  }
  static void check_same(const HermitianMatrix& a, const HermitianMatrix& b) {
    if (a.dim() != b.dim())
      throw DimensionMismatch("HermitianMatrix: dimensions " + std::to_string(a.dim()) +
                              " and " + std::to_string(b.dim()) + " differ");
  }

  Mat m_;
};

inline double frobenius_distance(const HermitianMatrix& a, const HermitianMatrix& b) {
  if (a.dim() != b.dim())
    throw DimensionMismatch("frobenius_distance: dimensions differ");
  return (a.mat() - b.mat()).norm();
}

// Sorted ascending; throws ConvergenceFailure if the QR iteration gives up.
inline RealVec eigenvalues(const HermitianMatrix& M) {
  Eigen::SelfAdjointEigenSolver<Mat> es(M.mat(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw ConvergenceFailure("eigenvalue iteration did not converge for dimension " +
                             std::to_string(M.dim()) + " (internal limit 30 sweeps per band)");
  return es.eigenvalues();
}

inline double min_eigenvalue(const HermitianMatrix& M) { return eigenvalues(M).minCoeff(); }

// All 2^n - 1 principal minors, each with its defining index subset.
// Hermitian submatrices have real determinants; we return the real part of
// the LU determinant.
inline std::vector<std::pair<std::vector<int>, double>> principal_minors(const HermitianMatrix& M) {
  const int n = M.dim();
  if (n > 12)
    throw DimensionTooLarge("principal_minors: dimension " + std::to_string(n) +
                            " exceeds the limit 12 (2^n - 1 minors)");
  std::vector<std::pair<std::vector<int>, double>> out;
  out.reserve((std::size_t(1) << n) - 1);
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    const int k = static_cast<int>(idx.size());
    Mat sub(k, k);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) sub(r, c) = M(idx[r], idx[c]);
    out.emplace_back(std::move(idx), sub.determinant().real());
  }
  return out;
}

inline bool is_psd_minors(const HermitianMatrix& M, double tol) {
  for (const auto& [idx, det] : principal_minors(M))
    if (det < -tol) return false;
  return true;
}

inline bool is_psd_eigen(const HermitianMatrix& M, double tol) {
  return min_eigenvalue(M) >= -tol;
}

// Nearest PSD matrix in Frobenius norm: clip negative eigenvalues to zero.
inline HermitianMatrix psd_project(const HermitianMatrix& M) {
  Eigen::SelfAdjointEigenSolver<Mat> es(M.mat());
  if (es.info() != Eigen::Success)
    throw ConvergenceFailure("eigenvalue iteration did not converge for dimension " +
                             std::to_string(M.dim()) + " (internal limit 30 sweeps per band)");
  const RealVec clipped = es.eigenvalues().cwiseMax(0.0);
  Mat out = es.eigenvectors() * clipped.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  return HermitianMatrix(out);
}

// One-parameter arrowhead-plus-constant family: (0,0) = alpha, first
// column xi (first row conj(xi)), remaining diagonal beta, everything else
// eta.  For d = 2 there are no eta slots and the field is ignored.
struct MdParams {
  int d = 2;
  double alpha = 0.0;
  double beta = 0.0;
  Complex xi = 0.0;
  double eta = 0.0;
};

inline HermitianMatrix build_md(const MdParams& p) {
  if (p.d < 2) throw BadDomain("build_md: d must be >= 2, got " + std::to_string(p.d));
  Mat m = Mat::Constant(p.d, p.d, Complex(p.eta, 0.0));
  m(0, 0) = Complex(p.alpha, 0.0);
  for (int i = 1; i < p.d; ++i) {
    m(i, 0) = p.xi;
    m(0, i) = std::conj(p.xi);
    m(i, i) = Complex(p.beta, 0.0);
  }
  return HermitianMatrix(m);
}

// Closed form (beta - eta)^(d-2) * ( alpha*(beta + (d-2)*eta) - (d-1)*|xi|^2 );
// the d = 2 convention reads (beta - eta)^0 = 1 with no eta term.
inline double det_md(const MdParams& p) {
  if (p.d < 2) throw BadDomain("det_md: d must be >= 2, got " + std::to_string(p.d));
  const double xi2 = std::norm(p.xi);
  if (p.d == 2) return p.alpha * p.beta - xi2;
  return std::pow(p.beta - p.eta, p.d - 2) *
         (p.alpha * (p.beta + (p.d - 2) * p.eta) - (p.d - 1) * xi2);
}

// Output entry (i, j) = M(i - l mod n, j - l mod n); a cyclic shift of rows
// and columns together, so a permutation similarity.  l is taken mod n.
inline HermitianMatrix cyclic_permute(const HermitianMatrix& M, int l) {
  const int n = M.dim();
  const int s = ((l % n) + n) % n;
  Mat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = M((i - s + n) % n, (j - s + n) % n);
  return HermitianMatrix(out);
}

}  // namespace symext
