#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "symext/matrix.hpp"
#include "testutil.hpp"

using namespace symext;
using testutil::random_hermitian;
using testutil::random_psd;

namespace {

// Independent oracle: cofactor (Laplace) expansion along the first row.
// Exponential, fine for the small matrices used here.
Complex laplace_det(const Mat& m) {
  const auto n = m.rows();
  if (n == 1) return m(0, 0);
  Complex acc = 0.0;
  double sign = 1.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    Mat minor(n - 1, n - 1);
    for (Eigen::Index i = 1; i < n; ++i) {
      Eigen::Index cc = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == c) continue;
        minor(i - 1, cc++) = m(i, j);
      }
    }
    acc += sign * m(0, c) * laplace_det(minor);
    sign = -sign;
  }
  return acc;
}

}  // namespace

TEST_CASE("hermitian construction mirrors the lower triangle", "[matrix]") {
  Mat raw(2, 2);
  raw << Complex(1.0, 5.0), Complex(9.0, 9.0),  // upper entry must be ignored
      Complex(2.0, -3.0), Complex(4.0, 0.0);
  HermitianMatrix h(raw);
  CHECK(h(0, 0) == Complex(1.0, 0.0));  // imaginary part of diagonal dropped
  CHECK(h(1, 0) == Complex(2.0, -3.0));
  CHECK(h(0, 1) == Complex(2.0, 3.0));
  CHECK(h(1, 1) == Complex(4.0, 0.0));
}

TEST_CASE("hermitian set keeps the mirror in sync", "[matrix]") {
  HermitianMatrix h(3);
  h.set(2, 0, Complex(1.0, -2.0));
  CHECK(h(0, 2) == Complex(1.0, 2.0));
  h.set(1, 1, Complex(3.0, 7.0));
  CHECK(h(1, 1) == Complex(3.0, 0.0));
  CHECK_THROWS_AS(h.set(3, 0, 1.0), IndexOutOfRange);
}

TEST_CASE("arithmetic preserves hermiticity and dimensions", "[matrix]") {
  std::mt19937_64 rng(7);
  auto a = random_hermitian(rng, 4);
  auto b = random_hermitian(rng, 4);
  auto s = a + b;
  auto d = a - b;
  auto m = 2.5 * a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      CHECK(s(i, j) == std::conj(s(j, i)));
      CHECK(d(i, j) == std::conj(d(j, i)));
      CHECK(m(i, j) == std::conj(m(j, i)));
    }
  CHECK_THROWS_AS(a + random_hermitian(rng, 3), DimensionMismatch);
}

TEST_CASE("principal minors of simple matrices", "[matrix]") {
  Mat d(2, 2);
  d << 1.0, 0.0, 0.0, 2.0;
  auto minors = principal_minors(HermitianMatrix(d));
  REQUIRE(minors.size() == 3);
  // Subsets {0}, {1}, {0,1} in mask order.
  CHECK(minors[0].second == Catch::Approx(1.0));
  CHECK(minors[1].second == Catch::Approx(2.0));
  CHECK(minors[2].second == Catch::Approx(2.0));

  Mat ones(2, 2);
  ones << 1.0, 1.0, 1.0, 1.0;
  auto m2 = principal_minors(HermitianMatrix(ones));
  CHECK(m2[0].second == Catch::Approx(1.0));
  CHECK(m2[1].second == Catch::Approx(1.0));
  CHECK(m2[2].second == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("principal minors match a cofactor-expansion oracle", "[matrix]") {
  std::mt19937_64 rng(11);
  auto h = random_hermitian(rng, 4);
  for (const auto& [idx, det] : principal_minors(h)) {
    const int k = static_cast<int>(idx.size());
    Mat sub(k, k);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) sub(r, c) = h(idx[r], idx[c]);
    const Complex oracle = laplace_det(sub);
    CHECK(std::abs(oracle.imag()) < 1e-10);
    CHECK(det == Catch::Approx(oracle.real()).epsilon(1e-10).margin(1e-12));
  }
}

TEST_CASE("minor-based psd test on fixed examples", "[matrix]") {
  Mat id = Mat::Identity(3, 3);
  CHECK(is_psd_minors(HermitianMatrix(id), 1e-12));
  Mat neg(2, 2);
  neg << 1.0, 0.0, 0.0, -1e-3;
  CHECK_FALSE(is_psd_minors(HermitianMatrix(neg), 1e-12));
  CHECK_THROWS_AS(principal_minors(HermitianMatrix(13)), DimensionTooLarge);
  CHECK_THROWS_AS(is_psd_minors(HermitianMatrix(13), 1e-9), DimensionTooLarge);
}

TEST_CASE("eigen-based psd test on fixed examples", "[matrix]") {
  CHECK(is_psd_eigen(HermitianMatrix(4), 1e-12));  // zero matrix
  // Unit projector shifted down by 1e-6 has eigenvalue -1e-6 on the
  // orthogonal complement: clearly negative at tol 1e-9.
  CVec v(3);
  v << Complex(1, 1), Complex(0, 1), Complex(2, 0);
  v.normalize();
  Mat proj = v * v.adjoint() - 1e-6 * Mat::Identity(3, 3);
  CHECK_FALSE(is_psd_eigen(HermitianMatrix(proj), 1e-9));
}

TEST_CASE("minor and eigen psd verdicts agree on random inputs", "[matrix]") {
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int> dims(1, 8);
  std::uniform_real_distribution<double> shift(-0.5, 0.5);
  int checked = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = dims(rng);
    // Mix raw draws with shifted PSD draws so both verdicts occur often.
    HermitianMatrix h(n);
    if (trial % 2 == 0) {
      h = random_hermitian(rng, n);
    } else {
      HermitianMatrix eye{Mat(Mat::Identity(n, n))};
      h = random_psd(rng, n, 0.5) + shift(rng) * eye;
    }
    const bool via_minors = is_psd_minors(h, 1e-9);
    const bool via_eigen = is_psd_eigen(h, 1e-9);
    if (via_minors != via_eigen) {
      CAPTURE(trial, n, min_eigenvalue(h));
      REQUIRE(via_minors == via_eigen);
    }
    ++checked;
  }
  CHECK(checked == 10000);
}

TEST_CASE("psd projection fixes nothing on psd input", "[matrix]") {
  std::mt19937_64 rng(5);
  auto p = random_psd(rng, 5);
  CHECK(frobenius_distance(psd_project(p), p) < 1e-12 * (1.0 + p.mat().norm()));
}

TEST_CASE("psd projection clips negative eigenvalues", "[matrix]") {
  Mat d(2, 2);
  d << 1.0, 0.0, 0.0, -2.0;
  auto proj = psd_project(HermitianMatrix(d));
  CHECK(std::abs(proj(0, 0) - 1.0) < 1e-14);
  CHECK(std::abs(proj(1, 1)) < 1e-14);
  CHECK(std::abs(proj(0, 1)) < 1e-14);
}

TEST_CASE("psd projection beats random psd candidates in frobenius distance", "[matrix]") {
  std::mt19937_64 rng(21);
  auto m = random_hermitian(rng, 5);
  auto best = psd_project(m);
  const double d0 = frobenius_distance(m, best);
  for (int i = 0; i < 100; ++i) {
    auto candidate = random_psd(rng, 5);
    CHECK(d0 <= frobenius_distance(m, candidate) + 1e-12);
  }
}

TEST_CASE("psd projection is idempotent", "[matrix]") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_hermitian(rng, 6);
    auto once = psd_project(m);
    auto twice = psd_project(once);
    CHECK(frobenius_distance(once, twice) < 1e-12 * (1.0 + once.mat().norm()));
  }
}

TEST_CASE("projected matrices have nonnegative principal minors", "[matrix]") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    auto proj = psd_project(random_hermitian(rng, 5));
    for (const auto& [idx, det] : principal_minors(proj)) CHECK(det >= -1e-9);
  }
}

TEST_CASE("arrowhead family construction", "[matrix]") {
  auto m2 = build_md({.d = 2, .alpha = 3.0, .beta = 5.0, .xi = Complex(1.0, 2.0), .eta = 99.0});
  CHECK(m2(0, 0) == Complex(3.0, 0.0));
  CHECK(m2(1, 1) == Complex(5.0, 0.0));
  CHECK(m2(1, 0) == Complex(1.0, 2.0));
  CHECK(m2(0, 1) == Complex(1.0, -2.0));  // eta ignored at d = 2

  // With xi = 1 and eta = 1 the d = 3 member degenerates to the all-ones
  // matrix; with xi = 0 the first row and column are zero off the corner.
  auto ones = build_md({.d = 3, .alpha = 1.0, .beta = 1.0, .xi = 1.0, .eta = 1.0});
  CHECK(ones.mat().isApprox(Mat(Mat::Ones(3, 3)), 1e-15));
  auto split = build_md({.d = 3, .alpha = 1.0, .beta = 1.0, .xi = 0.0, .eta = 1.0});
  CHECK(split(1, 0) == Complex(0.0, 0.0));
  CHECK(split(2, 1) == Complex(1.0, 0.0));

  auto m4 = build_md({.d = 4, .alpha = 2.0, .beta = 1.0, .xi = Complex(0.0, 1.0), .eta = 0.0});
  for (int i = 1; i < 4; ++i) {
    CHECK(m4(i, 0) == Complex(0.0, 1.0));
    CHECK(m4(0, i) == Complex(0.0, -1.0));
    CHECK(m4(i, i) == Complex(1.0, 0.0));
    for (int j = 1; j < 4; ++j)
      if (i != j) CHECK(m4(i, j) == Complex(0.0, 0.0));
  }
}

TEST_CASE("arrowhead determinant closed form", "[matrix]") {
  CHECK(det_md({.d = 2, .alpha = 3.0, .beta = 4.0, .xi = Complex(1.0, 2.0)}) ==
        Catch::Approx(3.0 * 4.0 - 5.0));
  CHECK(det_md({.d = 3, .alpha = 1.0, .beta = 2.0, .xi = 0.5, .eta = 2.0}) ==
        Catch::Approx(0.0).margin(1e-14));

  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 2000; ++trial) {
    MdParams p{.d = 2 + static_cast<int>(trial % 7),
               .alpha = u(rng),
               .beta = u(rng),
               .xi = Complex(u(rng), u(rng)),
               .eta = u(rng)};
    const double generic = build_md(p).mat().determinant().real();
    CHECK(det_md(p) == Catch::Approx(generic).epsilon(1e-10).margin(1e-12));
  }
}

TEST_CASE("cyclic shift basics", "[matrix]") {
  std::mt19937_64 rng(66);
  auto m = random_hermitian(rng, 5);
  CHECK(frobenius_distance(cyclic_permute(m, 0), m) == 0.0);

  // A circulant matrix is invariant under every shift.
  Mat circ(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const int diff = ((i - j) % 4 + 4) % 4;
      const Complex vals[4] = {Complex(2, 0), Complex(1, 1), Complex(0.5, 0), Complex(1, -1)};
      circ(i, j) = vals[diff];
    }
  HermitianMatrix hc{circ};
  for (int l = 0; l < 4; ++l) CHECK(frobenius_distance(cyclic_permute(hc, l), hc) < 1e-15);
}

TEST_CASE("cyclic shifts invert and compose", "[matrix]") {
  std::mt19937_64 rng(77);
  for (int n : {2, 3, 5, 7}) {
    auto m = random_hermitian(rng, n);
    for (int l = 0; l < n; ++l) {
      CHECK(frobenius_distance(cyclic_permute(cyclic_permute(m, l), n - l), m) == 0.0);
      // Permutation similarity: the spectrum is untouched.
      RealVec a = eigenvalues(m);
      RealVec b = eigenvalues(cyclic_permute(m, l));
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}
