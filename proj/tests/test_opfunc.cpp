#include "confspec/opfunc.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace confspec;

namespace {

OperatorMatrix hermitian_op(const ComplexMatrix& m) {
  Grid g(1, int(m.rows()) % 2 == 0 ? int(m.rows()) : int(m.rows()) + 1);
  return OperatorMatrix{m, g, 1, true, SpinStructure::trivial(1), std::nullopt};
}

OperatorMatrix diag_op(std::vector<double> d) {
  ComplexMatrix m = ComplexMatrix::Zero(Eigen::Index(d.size()), Eigen::Index(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) m(Eigen::Index(i), Eigen::Index(i)) = d[i];
  return hermitian_op(m);
}

OperatorMatrix circle_dirac(int n, Boundary b, double amp = 0.0) {
  Grid g(1, n);
  auto v = sample_on(g, [&](std::array<double, 2> x) { return amp * std::sin(x[0]); });
  return build_dirac(make_circle_metric(two_pi, v, amp == 0.0 ? 0 : 1), SpinStructure::circle(b));
}

ComplexMatrix diag_matrix(std::vector<double> d) {
  ComplexMatrix m = ComplexMatrix::Zero(Eigen::Index(d.size()), Eigen::Index(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) m(Eigen::Index(i), Eigen::Index(i)) = d[i];
  return m;
}

}  // namespace

TEST(Sign, DiagonalExamples) {
  auto s = sign_of(diag_op({-2.0, 0.0, 5.0, 3.0}), ZeroTolerance(1e-9));
  EXPECT_LE((s.matrix - diag_matrix({-1.0, 0.0, 1.0, 1.0})).cwiseAbs().maxCoeff(), 1e-14);
  auto p = spectral_projector(diag_op({-2.0, 0.0, 5.0, 3.0}), SpectralPart::plus, ZeroTolerance(1e-9));
  EXPECT_EQ(projector_rank(p.matrix), 2);
  auto z = spectral_projector(diag_op({-2.0, 0.0, 5.0, 3.0}), SpectralPart::zero, ZeroTolerance(1e-9));
  EXPECT_LE((z.matrix - diag_matrix({0.0, 1.0, 0.0, 0.0})).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Sign, ToleranceDecidesKernel) {
  auto d = diag_op({-1.0, 1e-6, 2.0, 4.0});
  EXPECT_EQ(projector_rank(spectral_projector(d, SpectralPart::zero, ZeroTolerance(1e-5)).matrix), 1);
  EXPECT_EQ(projector_rank(spectral_projector(d, SpectralPart::zero, ZeroTolerance(1e-7)).matrix), 0);
  EXPECT_THROW(ZeroTolerance(-1.0), std::invalid_argument);
}

TEST(Sign, PeriodicCircleHasOneDimensionalKernel) {
  auto d = circle_dirac(32, Boundary::periodic);
  auto s = sign_of(d);
  EXPECT_EQ(projector_rank(spectral_projector(d, SpectralPart::zero).matrix), 1);
  const ComplexMatrix sq = s.matrix * s.matrix;
  const ComplexMatrix p0 = spectral_projector(d, SpectralPart::zero).matrix;
  EXPECT_LE((sq + p0 - ComplexMatrix::Identity(32, 32)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Sign, AntiperiodicIsInvolution) {
  for (double amp : {0.0, 0.4}) {
    auto d = circle_dirac(32, Boundary::antiperiodic, amp);
    auto s = sign_of(d);
    EXPECT_LE((s.matrix * s.matrix - ComplexMatrix::Identity(32, 32)).cwiseAbs().maxCoeff(), 1e-11);
    EXPECT_LE(s.hermitian_defect(), 1e-14);
  }
}

TEST(Sign, RejectsNonHermitian) {
  auto d = circle_dirac(16, Boundary::antiperiodic);
  d.hermitian = false;
  EXPECT_THROW(sign_of(d), std::invalid_argument);
  EXPECT_THROW(eigendecompose(d), std::invalid_argument);
}

TEST(Eigendecompose, SortedAndDeterministic) {
  std::mt19937_64 rng(3);
  auto a = hermitian_op(oracle::random_hermitian(12, rng));
  const auto sd1 = eigendecompose(a), sd2 = eigendecompose(a);
  for (Eigen::Index i = 1; i < sd1.values.size(); ++i) EXPECT_LE(sd1.values(i - 1), sd1.values(i));
  EXPECT_EQ((sd1.vectors - sd2.vectors).cwiseAbs().maxCoeff(), 0.0);
  const ComplexMatrix back = sd1.vectors * sd1.values.cast<cplx>().asDiagonal() * sd1.vectors.adjoint();
  EXPECT_LE((back - a.matrix).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Eigendecompose, TwoByTwoAgainstClosedForm) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Matrix2cd h = oracle::random_hermitian(2, rng);
    const auto sd = eigendecompose(hermitian_op(h));
    const auto e = oracle::eig2(h);
    EXPECT_NEAR(sd.values(0), e[0], 1e-13);
    EXPECT_NEAR(sd.values(1), e[1], 1e-13);
  }
}

TEST(SignProperty, ProjectorIdentityOnRandomHermitian) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = hermitian_op(oracle::random_hermitian(20, rng));
    const auto sd = eigendecompose(a);
    const auto tol = ZeroTolerance::relative(sd);
    const ComplexMatrix pp = spectral_projector(sd, SpectralPart::plus, tol);
    const ComplexMatrix pm = spectral_projector(sd, SpectralPart::minus, tol);
    const ComplexMatrix p0 = spectral_projector(sd, SpectralPart::zero, tol);
    const ComplexMatrix s = sign_matrix(sd, tol);
    const ComplexMatrix id = ComplexMatrix::Identity(20, 20);
    EXPECT_LE((pp + pm + p0 - id).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((pp * pp - pp).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((pp * pm).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((s - (pp - pm)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((a.matrix * s - s * a.matrix).cwiseAbs().maxCoeff(), 1e-10);
    // Against a sign computed without eigenvectors.
    EXPECT_LE((pp - 0.5 * (oracle::newton_sign(a.matrix) + id)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SignProperty, ScaleEquivariance) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    auto a = hermitian_op(oracle::random_hermitian(16, rng));
    auto scaled = a;
    scaled.matrix *= 3.7;
    auto flipped = a;
    flipped.matrix *= -0.25;
    const auto s = sign_of(a);
    EXPECT_LE((sign_of(scaled).matrix - s.matrix).cwiseAbs().maxCoeff(), 1e-11);
    EXPECT_LE((sign_of(flipped).matrix + s.matrix).cwiseAbs().maxCoeff(), 1e-11);
  }
}

TEST(SignProperty, UnitaryConjugation) {
  std::mt19937_64 rng(7);
  auto a = hermitian_op(oracle::random_hermitian(16, rng));
  Eigen::HouseholderQR<ComplexMatrix> qr(oracle::random_hermitian(16, rng) + cplx(0.0, 1.0) * oracle::random_hermitian(16, rng));
  const ComplexMatrix q = qr.householderQ();
  auto b = a;
  b.matrix = q * a.matrix * q.adjoint();
  detail::symmetrize(b.matrix);
  EXPECT_LE((sign_of(b).matrix - q * sign_of(a).matrix * q.adjoint()).cwiseAbs().maxCoeff(), 1e-10);
}
