#include <catch2/catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "symext/states.hpp"
#include "testutil.hpp"

using namespace symext;

namespace {

BellCoefficients random_grid(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RealMat g(d, d);
  double sum = 0.0;
  for (int l = 0; l < d; ++l)
    for (int m = 0; m < d; ++m) {
      g(l, m) = u(rng);
      sum += g(l, m);
    }
  g /= sum;
  return BellCoefficients(d, g);
}

DensityMatrix random_density(std::mt19937_64& rng, int n) {
  auto p = testutil::random_psd(rng, n);
  return DensityMatrix({static_cast<int>(std::sqrt(n + 0.5)), static_cast<int>(std::sqrt(n + 0.5))},
                       (1.0 / p.trace()) * p);
}

}  // namespace

TEST_CASE("bell vectors at d = 2 are the textbook pair", "[states]") {
  CVec phi_plus = bell_vector(2, 0, 0);
  CHECK(std::abs(phi_plus(0) - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(phi_plus(1)) == 0.0);
  CHECK(std::abs(phi_plus(2)) == 0.0);
  CHECK(std::abs(phi_plus(3) - 1.0 / std::sqrt(2.0)) < 1e-15);

  CVec phi_minus = bell_vector(2, 1, 0);
  CHECK(std::abs(phi_minus(0) - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(phi_minus(3) + 1.0 / std::sqrt(2.0)) < 1e-12);

  CHECK_THROWS_AS(bell_vector(2, 2, 0), IndexOutOfRange);
  CHECK_THROWS_AS(bell_vector(2, 0, -1), IndexOutOfRange);
}

TEST_CASE("bell vectors form an orthonormal basis", "[states]") {
  const int d = 3;
  std::vector<CVec> vs;
  for (int l = 0; l < d; ++l)
    for (int m = 0; m < d; ++m) vs.push_back(bell_vector(d, l, m));
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = 0; j < vs.size(); ++j) {
      const Complex g = vs[i].adjoint() * vs[j];
      CHECK(std::abs(g - (i == j ? 1.0 : 0.0)) < 1e-12);
    }
}

TEST_CASE("bell mixture of a single projector", "[states]") {
  RealMat g = RealMat::Zero(2, 2);
  g(0, 0) = 1.0;
  auto rho = bell_diag_to_density(BellCoefficients(2, g));
  CVec v = bell_vector(2, 0, 0);
  Mat expect = v * v.adjoint();
  CHECK((rho.matrix().mat() - expect).norm() < 1e-14);
}

TEST_CASE("uniform bell mixture is maximally mixed", "[states]") {
  const int d = 3;
  auto rho = bell_diag_to_density(BellCoefficients(d, RealMat::Constant(d, d, 1.0 / (d * d))));
  CHECK((rho.matrix().mat() - Mat::Identity(d * d, d * d) / (d * d)).norm() < 1e-13);
}

TEST_CASE("bell mixture entries obey the difference-class formula", "[states]") {
  // Independent closed form: a_{ij,pq} = delta(i-j = p-q mod d) * (1/d) *
  // sum_l A[l][i-j] z^{l(i-p)}, phases computed directly here.
  std::mt19937_64 rng(3);
  const int d = 3;
  auto A = random_grid(rng, d);
  auto rho = bell_diag_to_density(A);
  const double tau = 2.0 * std::numbers::pi / d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q) {
          Complex expect = 0.0;
          if ((i - j - p + q) % d == 0) {
            const int m = (i - j + d) % d;
            for (int l = 0; l < d; ++l)
              expect += A(l, m) * std::polar(1.0, tau * l * (i - p)) / static_cast<double>(d);
          }
          CHECK(std::abs(rho.matrix()(i * d + j, p * d + q) - expect) < 1e-12);
        }
}

TEST_CASE("bell grid roundtrip", "[states]") {
  std::mt19937_64 rng(4);
  for (int d : {2, 3, 4}) {
    auto A = random_grid(rng, d);
    auto back = density_to_bell_diag(bell_diag_to_density(A));
    CHECK((back.grid() - A.grid()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("bell projection of general states", "[states]") {
  const int d = 3;
  auto mixed = DensityMatrix({d, d}, HermitianMatrix(Mat(Mat::Identity(d * d, d * d) / (d * d))));
  auto A = density_to_bell_diag(mixed);
  CHECK((A.grid() - RealMat::Constant(d, d, 1.0 / (d * d))).cwiseAbs().maxCoeff() < 1e-14);

  std::mt19937_64 rng(5);
  auto rho = random_density(rng, d * d);
  auto grid = density_to_bell_diag(rho);
  CHECK(std::abs(grid.grid().sum() - 1.0) < 1e-12);
  CHECK_THROWS_AS(density_to_bell_diag(DensityMatrix(
                      {2, 3}, HermitianMatrix(Mat(Mat::Identity(6, 6) / 6.0)))),
                  BadDims);
}

TEST_CASE("twirl keeps invariant entries and zeroes the rest", "[states]") {
  const int d = 3;
  RealMat g = RealMat::Zero(d, d);
  g(0, 0) = 1.0;
  auto psi00 = bell_diag_to_density(BellCoefficients(d, g));
  auto tw = twirl_u2(psi00);
  CHECK((tw.btilde().mat() - Mat::Constant(d, d, 1.0 / d)).norm() < 1e-14);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) CHECK(tw.lambda()(i, j) == 0.0);
}

TEST_CASE("twirl is idempotent and preserves trace and positivity", "[states]") {
  std::mt19937_64 rng(6);
  const int d = 3;
  auto rho = random_density(rng, d * d);
  auto tw = twirl_u2(rho);  // constructor re-validates trace and positivity
  auto dense = u2_to_density(tw);
  auto tw2 = twirl_u2(dense);
  CHECK(frobenius_distance(tw.btilde(), tw2.btilde()) < 1e-13);
  CHECK((tw.lambda() - tw2.lambda()).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(std::abs(dense.matrix().trace() - 1.0) < 1e-12);
  CHECK(min_eigenvalue(dense.matrix()) > -1e-9);
}

TEST_CASE("twirl equals the monte-carlo phase average", "[states]") {
  // Average rho over (U w U*) conjugations with N random diagonal-phase
  // unitaries; the entrywise mean phase factor must reproduce the kept /
  // killed pattern within the sampling error.
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const int d = 3;
  auto rho = random_density(rng, d * d);
  const int samples = 100000;
  Mat mean_factor = Mat::Zero(d * d, d * d);
  std::vector<Complex> u(d);
  for (int s = 0; s < samples; ++s) {
    for (int k = 0; k < d; ++k) u[k] = std::polar(1.0, angle(rng));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int p = 0; p < d; ++p)
          for (int q = 0; q < d; ++q)
            mean_factor(i * d + j, p * d + q) +=
                u[i] * std::conj(u[j]) * std::conj(u[p]) * u[q];
  }
  mean_factor /= static_cast<double>(samples);
  Mat averaged = rho.matrix().mat().cwiseProduct(mean_factor);
  Mat twirled = u2_to_density(twirl_u2(rho)).matrix().mat();
  CHECK((averaged - twirled).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("compact form of bell-diagonal states matches the dense twirl", "[states]") {
  std::mt19937_64 rng(7);
  for (int d : {2, 3, 4}) {
    auto A = random_grid(rng, d);
    auto fast = u2_from_bell_diag(A);
    auto slow = twirl_u2(bell_diag_to_density(A));
    CHECK(frobenius_distance(fast.btilde(), slow.btilde()) < 1e-12);
    CHECK((fast.lambda() - slow.lambda()).cwiseAbs().maxCoeff() < 1e-12);

    // The coherence block of a bell-diagonal state is circulant, exactly so
    // on the fast path.
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        CHECK(fast.btilde()(i, j) == fast.btilde()((i + 1) % d, (j + 1) % d));
  }
}

TEST_CASE("grid-level twirl matches the dense twirl", "[states]") {
  std::mt19937_64 rng(8);
  for (int d : {2, 3}) {
    auto A = random_grid(rng, d);
    auto twirled_grid = bell_twirl_grid(A);
    Mat lhs = bell_diag_to_density(twirled_grid).matrix().mat();
    Mat rhs = u2_to_density(twirl_u2(bell_diag_to_density(A))).matrix().mat();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(is_u2_invariant_bell(twirled_grid, 1e-12));
  }
}

TEST_CASE("uniform-column detection", "[states]") {
  auto p = geniso_coeffs(GenIsoParams(3, 0.5, 0.1));
  CHECK(is_u2_invariant_bell(p, 1e-12));

  RealMat g(2, 2);
  g << 0.5, 0.5, 0.0, 0.0;
  CHECK_FALSE(is_u2_invariant_bell(BellCoefficients(2, g), 1e-6));

  // Perturb one m != 0 entry by 10x the tolerance (compensating in the same
  // column to keep the total fixed): detection must trip.
  const double tol = 1e-7;
  RealMat q = geniso_coeffs(GenIsoParams(3, 0.4, 0.1)).grid();
  q(0, 1) += 10.0 * tol;
  q(1, 1) -= 10.0 * tol;
  CHECK_FALSE(is_u2_invariant_bell(BellCoefficients(3, q), tol));
}

TEST_CASE("two-parameter family grids", "[states]") {
  auto uniform = geniso_coeffs(GenIsoParams(3, 1.0 / 9, 1.0 / 9));
  CHECK((uniform.grid() - RealMat::Constant(3, 3, 1.0 / 9)).cwiseAbs().maxCoeff() < 1e-15);

  auto pure = geniso_coeffs(GenIsoParams(3, 1.0, 0.0));
  CHECK(pure(0, 0) == 1.0);
  CHECK(pure.grid().sum() == Catch::Approx(1.0));

  auto g = geniso_coeffs(GenIsoParams(3, 0.5, 0.1));
  for (int l = 0; l < 3; ++l)
    for (int m = 1; m < 3; ++m) CHECK(g(l, m) == Catch::Approx(0.05));

  CHECK_THROWS_AS(GenIsoParams(3, 0.8, 0.2), BadDomain);   // x = 1.2
  CHECK_THROWS_AS(GenIsoParams(3, -0.1, 0.2), BadDomain);  // negative weight
}

TEST_CASE("imbalance parametrization roundtrip", "[states]") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 4;
    const double x = u(rng);
    const double t = -x / (d - 1) + u(rng) * (x + x / (d - 1));
    auto p = geniso_from_xt(d, x, t);
    CHECK(p.x() == Catch::Approx(x).margin(1e-12));
    CHECK(p.a() - p.b() == Catch::Approx(t).margin(1e-12));
  }
  // The polygon corners map to exact zeros of a or b.
  auto corner = geniso_from_xt(3, 0.6, -0.3);
  CHECK(corner.a() == 0.0);
  auto edge = geniso_from_xt(3, 0.6, 0.6);
  CHECK(edge.b() == 0.0);
}

TEST_CASE("one-parameter subfamily", "[states]") {
  const int d = 3;
  auto uniform = isotropic_coeffs(d, 1.0 / (d * d));
  CHECK((uniform.grid() - RealMat::Constant(d, d, 1.0 / (d * d))).cwiseAbs().maxCoeff() < 1e-15);

  auto pure = isotropic_coeffs(d, 1.0);
  CHECK(pure(0, 0) == 1.0);
  CHECK(pure(1, 1) == 0.0);

  auto iso = isotropic_coeffs(3, 0.6);
  for (int l = 0; l < 3; ++l)
    for (int m = 0; m < 3; ++m)
      if (l || m) CHECK(iso(l, m) == Catch::Approx(0.05));

  // Derived imbalance at these parameters: t = (d x - 1)/(d - 1).
  auto p = isotropic_geniso_params(3, 0.6);
  CHECK(p.a() - p.b() == Catch::Approx((3 * p.x() - 1.0) / 2.0));
  CHECK(p.a() - p.b() == Catch::Approx(0.55));

  CHECK_THROWS_AS(isotropic_coeffs(3, 1.5), BadDomain);
}

TEST_CASE("column marginals of the two-parameter family", "[states]") {
  GenIsoParams p(4, 0.3, 0.1);
  auto A = geniso_coeffs(p);
  CHECK(marginal(A, 0) == Catch::Approx(p.x()));
  for (int m = 1; m < 4; ++m)
    CHECK(marginal(A, m) == Catch::Approx((1.0 - p.x()) / 3.0));
  CHECK_THROWS_AS(marginal(A, 4), IndexOutOfRange);

  // Coherence block entries: diagonal x/d, off-diagonal (a-b)/d.
  auto state = u2_from_bell_diag(A);
  const auto& bt = btilde_of(state);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double expect = (i == j) ? p.x() / 4.0 : (p.a() - p.b()) / 4.0;
      CHECK(std::abs(bt(i, j) - expect) < 1e-14);
    }

  auto mixed = BellCoefficients(3, RealMat::Constant(3, 3, 1.0 / 9));
  for (int m = 0; m < 3; ++m) CHECK(marginal(mixed, m) == Catch::Approx(1.0 / 3));
}

TEST_CASE("compact-state validation rejects bad input", "[states]") {
  const int d = 2;
  Mat bt(d, d);
  bt << 0.5, 0.2, 0.2, 0.1;
  RealMat lam(d, d);
  lam << 0.5, 0.2, 0.2, 0.1;
  CHECK_NOTHROW(U2InvariantState(HermitianMatrix(bt), lam));

  RealMat neg = lam;
  neg(0, 1) = -0.1;
  CHECK_THROWS_AS(U2InvariantState(HermitianMatrix(bt), neg), BadDomain);

  RealMat off = lam;
  off(0, 1) = 0.4;  // sum now 1.2
  CHECK_THROWS_AS(U2InvariantState(HermitianMatrix(bt), off), BadDomain);

  RealMat diag_mismatch = lam;
  diag_mismatch(0, 0) = 0.45;
  diag_mismatch(0, 1) = 0.25;  // keep the sum at 1
  CHECK_THROWS_AS(U2InvariantState(HermitianMatrix(bt), diag_mismatch), BadDomain);

  Mat indefinite(d, d);
  indefinite << 0.5, 0.6, 0.6, 0.1;  // eigenvalue below -1e-9
  CHECK_THROWS_AS(U2InvariantState(HermitianMatrix(indefinite), lam), BadDomain);
}

TEST_CASE("density-matrix validation", "[states]") {
  CHECK_THROWS_AS(DensityMatrix({2, 2}, HermitianMatrix(Mat(Mat::Identity(4, 4)))), BadDomain);
  CHECK_THROWS_AS(DensityMatrix({2, 3}, HermitianMatrix(Mat(Mat::Identity(4, 4) / 4.0))), BadDims);
  Mat neg = Mat::Identity(4, 4) / 2.0;
  neg(3, 3) = -0.5;
  CHECK_THROWS_AS(DensityMatrix({2, 2}, HermitianMatrix(neg)), BadDomain);
}
