#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "evsched/hermitian.hpp"

using namespace evsched;
using Complex = std::complex<double>;

namespace {

CMatrix random_hermitian(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> d;
    CMatrix a(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            a(i, j) = Complex(d(rng), d(rng));
        }
    }
    return 0.5 * (a + a.adjoint());
}

CVector random_vector(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> d;
    CVector v(n);
    for (int i = 0; i < n; ++i) {
        v(i) = Complex(d(rng), d(rng));
    }
    return v;
}

} // namespace

TEST(Hermitian, EmbeddingDoublesTheSpectrum) {
    for (unsigned seed = 1; seed <= 5; ++seed) {
        const auto h = random_hermitian(6, seed);
        const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<CMatrix>(h).eigenvalues();
        const Eigen::VectorXd eb = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hermitian_embed(h)).eigenvalues();
        ASSERT_EQ(eb.size(), 12);
        for (int i = 0; i < 6; ++i) {
            EXPECT_NEAR(eb(2 * i), ev(i), 1e-8);
            EXPECT_NEAR(eb(2 * i + 1), ev(i), 1e-8);
        }
    }
}

TEST(Hermitian, EmbeddingPreservesQuadraticForms) {
    const auto h = random_hermitian(4, 9);
    const auto v = random_vector(4, 10);
    Eigen::VectorXd x(8);
    x << v.real(), v.imag();
    const double complex_form = (v.adjoint() * h * v)(0, 0).real();
    EXPECT_NEAR(x.dot(hermitian_embed(h) * x), complex_form, 1e-10);
}

TEST(Hermitian, RejectsNonHermitianInput) {
    CMatrix a = CMatrix::Zero(2, 2);
    a(0, 1) = Complex(1.0, 0.0);
    EXPECT_FALSE(is_hermitian(a));
    EXPECT_THROW(hermitian_embed(a), DomainError);
    EXPECT_THROW(rank_residual(a), DomainError);
    EXPECT_FALSE(is_hermitian(CMatrix::Zero(2, 3)));
}

TEST(Hermitian, RankResidualVanishesOnRankOne) {
    const auto v = random_vector(5, 3);
    const CMatrix w = v * v.adjoint();
    EXPECT_NEAR(rank_residual(w), 0.0, 1e-10 * w.trace().real());
    const auto u = random_vector(5, 4);
    const CMatrix w2 = w + u * u.adjoint();
    EXPECT_GT(rank_residual(w2), 1e-3);
    EXPECT_THROW(rank_residual(-w2), DomainError);
}

TEST(Hermitian, RankOneFactorRecoversVectorUpToPhase) {
    const auto v = random_vector(4, 5);
    const auto f = rank_one_factor(v * v.adjoint(), 0);
    EXPECT_NEAR(f(0).imag(), 0.0, 1e-12);
    EXPECT_GE(f(0).real(), 0.0);
    const Complex phase = (v(0) / std::abs(v(0)));
    EXPECT_LE((phase * f - v).cwiseAbs().maxCoeff(), 1e-9);
    const auto g = rank_one_factor(v * v.adjoint(), 2);
    EXPECT_NEAR(g(2).imag(), 0.0, 1e-12);
}

TEST(Hermitian, TopEigenpairFlagsRepeatedEigenvalue) {
    EXPECT_TRUE(top_eigenpair(CMatrix::Identity(3, 3)).degenerate);
    CMatrix d = CMatrix::Zero(3, 3);
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    d(2, 2) = 5.0;
    const auto top = top_eigenpair(d);
    EXPECT_FALSE(top.degenerate);
    EXPECT_DOUBLE_EQ(top.value, 5.0);
    EXPECT_NEAR(std::abs(top.vector(2)), 1.0, 1e-12);
}
