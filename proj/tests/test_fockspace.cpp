// Copyright 2026 The kerrcat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>

#include <gtest/gtest.h>

#include "kerrcat/fockspace.hpp"
#include "oracles.hpp"

using namespace kerrcat;

namespace {

double max_abs(const Matrix &m) { return m.cwiseAbs().maxCoeff(); }

} // namespace

TEST(Annihilation, LowersFockStates) {
    const Operator a = annihilation(2);
    const Vector out = a.data() * fock(2, 1).vector();
    EXPECT_NEAR(std::abs(out(0) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(out(1).real(), 0.0, 1e-15);
    EXPECT_NEAR(annihilation(3)(1, 2).real(), std::sqrt(2.0), 1e-15);
    EXPECT_DOUBLE_EQ(annihilation(3)(1, 2).real(), 1.4142135623730951);
}

TEST(Annihilation, TopRowAndSpectrum) {
    const Operator a = annihilation(20);
    for (int n = 0; n < 20; ++n) EXPECT_EQ(a(n, 0), cplx(0.0));
    const Matrix num = a.data().adjoint() * a.data();
    Eigen::SelfAdjointEigenSolver<Matrix> es(num);
    for (int n = 0; n < 20; ++n) EXPECT_NEAR(es.eigenvalues()(n), n, 1e-12);
}

TEST(Annihilation, RejectsTinyDimension) {
    EXPECT_THROW(annihilation(1), DimensionError);
    EXPECT_THROW(annihilation(65), DimensionError);
}

TEST(Annihilation, CanonicalCommutatorOnInteriorBlock) {
    for (int N : {2, 5, 20, 64}) {
        const Matrix a = annihilation(N).data();
        const Matrix c = a * a.adjoint() - a.adjoint() * a;
        EXPECT_LE(max_abs(c.topLeftCorner(N - 1, N - 1) - Matrix::Identity(N - 1, N - 1)), 1e-12);
    }
}

TEST(Parity, FockEigenvaluesAndInvolution) {
    const Operator p = parity(8);
    EXPECT_EQ(p(2, 2), cplx(1.0));
    EXPECT_EQ(p(3, 3), cplx(-1.0));
    EXPECT_EQ(max_abs(p.data() * p.data() - Matrix::Identity(8, 8)), 0.0);
    EXPECT_TRUE(p.is_hermitian(0.0));
    EXPECT_TRUE(p.is_unitary(0.0));
}

TEST(Parity, EqualsCahillGlauberAtOrigin) {
    for (int N : {1, 2, 7, 20, 64}) EXPECT_EQ(max_abs(cahill_glauber_T(0.0, N).data() - parity(N).data()), 0.0);
}

TEST(Displacement, IdentityAtZero) {
    EXPECT_EQ(max_abs(displacement(0.0, 20).data() - Matrix::Identity(20, 20)), 0.0);
}

TEST(Displacement, VacuumOverlap) {
    EXPECT_NEAR(displacement(1.0, 20)(0, 0).real(), 0.6065306597126334, 1e-15);
    const cplx alpha(0.7, -0.4);
    EXPECT_NEAR(std::abs(displacement(alpha, 12)(0, 0)), std::exp(-0.5 * std::norm(alpha)), 1e-15);
}

TEST(Displacement, MatchesPaddedMatrixExponential) {
    const cplx alpha(0.8, 0.3);
    const Matrix d = displacement(alpha, 20).data();
    const Matrix ref = oracle::displacement_expm(alpha, 20, 40);
    EXPECT_LE(max_abs(d - ref), 1e-9);
}

// Identities hold on the physical N x N block of the operator built at the
// padded dimension; the cropped N x N matrix alone is not unitary.
TEST(Displacement, InverseOnPhysicalBlock) {
    const cplx alpha(0.8, 0.3);
    const int N = 20, pad = padded_dim(N, alpha);
    const Matrix prod = displacement(alpha, pad).data() * displacement(-alpha, pad).data();
    EXPECT_LE(max_abs(prod.topLeftCorner(N, N) - Matrix::Identity(N, N)), 1e-9);
    const Matrix ref = oracle::displacement_expm(alpha, 40, 40) * oracle::displacement_expm(-alpha, 40, 40);
    EXPECT_LE(max_abs(ref.topLeftCorner(N, N) - Matrix::Identity(N, N)), 1e-9);
}

TEST(Displacement, UnitarityOnPhysicalBlock) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        cplx alpha(u(rng), u(rng));
        alpha *= 1.6 / std::max(1.0, std::abs(alpha)) * std::abs(u(rng));
        if (trial == 0) alpha = cplx(1.6, 0.0);
        for (int N : {20, 24}) {
            const int pad = padded_dim(N, alpha);
            const Matrix d = displacement(alpha, pad).data();
            const Matrix dd = d.adjoint() * d;
            EXPECT_LE(max_abs(dd.topLeftCorner(N, N) - Matrix::Identity(N, N)), 1e-9)
                << "alpha=" << alpha << " N=" << N;
        }
    }
}

TEST(Displacement, CroppedMatrixIsNotUnitaryNearCutoff) {
    const Matrix d = displacement(1.6, 20).data();
    EXPECT_GT(max_abs(d.adjoint() * d - Matrix::Identity(20, 20)), 1e-2);
}

TEST(CahillGlauber, VacuumElement) {
    EXPECT_NEAR(cahill_glauber_T(0.5, 20)(0, 0).real(), 0.6065306597126334, 1e-15);
    EXPECT_NEAR(cahill_glauber_T(0.5, 20)(0, 0).imag(), 0.0, 1e-15);
}

TEST(CahillGlauber, HermitianAndConjugationSymmetry) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 0.8);
    for (int trial = 0; trial < 25; ++trial) {
        const cplx alpha(g(rng), g(rng));
        const Matrix t = cahill_glauber_T(alpha, 11).data();
        const Matrix tc = cahill_glauber_T(std::conj(alpha), 11).data();
        EXPECT_LE(max_abs(t - t.adjoint()), 1e-12);
        for (int n = 0; n <= 10; ++n)
            for (int m = 0; m <= 10; ++m) EXPECT_LE(std::abs(t(n, m) - tc(m, n)), 1e-12);
    }
}

TEST(CahillGlauber, EqualsDisplacedParityOperator) {
    const cplx alpha(0.4, -0.9);
    const int N = 16, pad = 80;
    const oracle::Mat d = oracle::expm_taylor(alpha * oracle::lowering(pad).adjoint() -
                                              std::conj(alpha) * oracle::lowering(pad));
    const oracle::Mat ref = (d * oracle::parity_diag(pad) * d.adjoint()).topLeftCorner(N, N);
    EXPECT_LE(max_abs(cahill_glauber_T(alpha, N).data() - ref), 1e-10);
}

TEST(CahillGlauber, WignerOfSinglePhotonMatchesDisplacedParity) {
    Matrix rho = Matrix::Zero(20, 20);
    rho(1, 1) = 1.0;
    const double w_t = 2.0 / kPi * (rho * cahill_glauber_T(0.3, 20).data()).trace().real();
    const double w_d = oracle::displaced_parity(rho, 0.3, 80);
    EXPECT_NEAR(w_t, w_d, 1e-8);
    // closed form: (2/pi) (4|a|^2 - 1) e^{-2|a|^2}
    EXPECT_NEAR(w_t, 2.0 / kPi * (4 * 0.09 - 1.0) * std::exp(-0.18), 1e-12);
}

TEST(CahillGlauber, FiniteAtMaximumDimension) {
    const Matrix t = cahill_glauber_T(cplx(1.6, 1.6), 64).data();
    EXPECT_TRUE(t.allFinite());
    const Matrix d = displacement(cplx(1.6, -1.6), 64).data();
    EXPECT_TRUE(d.allFinite());
}

TEST(Tensor, IdentityAndModeOrdering) {
    EXPECT_EQ(max_abs(tensor(identity(2), identity(3)).data() - Matrix::Identity(6, 6)), 0.0);
    const Operator a1 = tensor(annihilation(2), identity(2));
    const Vector out = a1.data() * fock2(2, 2, 1, 0).vector();
    EXPECT_NEAR(std::abs(out(0) - 1.0), 0.0, 1e-15);
    const Operator pp = tensor(parity(2), parity(2));
    EXPECT_EQ(pp(3, 3), cplx(1.0));
    EXPECT_EQ(tensor(parity(3), parity(4)).dims(), (Dims{3, 4}));
}

TEST(Tensor, MixedProductProperty) {
    std::mt19937_64 rng(3);
    const Operator a({4}, oracle::random_matrix(4, rng)), b({4}, oracle::random_matrix(4, rng));
    const Operator c({4}, oracle::random_matrix(4, rng)), d({4}, oracle::random_matrix(4, rng));
    const Matrix lhs = tensor(a, b).data() * tensor(c, d).data();
    const Matrix rhs = tensor(a * c, b * d).data();
    EXPECT_LE(max_abs(lhs - rhs), 1e-12 * max_abs(rhs));
    EXPECT_LE(max_abs(tensor(a, b).data() - oracle::kron(a.data(), b.data())), 0.0);
}

TEST(CoherentCat, VacuumLimitAndParitySelection) {
    const QuantumState even0 = coherent_cat(0.0, CatParity::even, 10);
    EXPECT_NEAR(std::abs(even0.vector()(0)), 1.0, 1e-15);
    EXPECT_THROW(coherent_cat(0.0, CatParity::odd, 10), NumericalError);
    const QuantumState odd = coherent_cat(1.1, CatParity::odd, 20);
    for (int n = 0; n < 20; n += 2) EXPECT_EQ(odd.vector()(n), cplx(0.0));
    const QuantumState even = coherent_cat(std::sqrt(1.5), CatParity::even, 20);
    EXPECT_NEAR(even.expectation(parity(20).data()), 1.0, 1e-14);
    EXPECT_NEAR(even.vector().norm(), 1.0, 1e-14);
}

TEST(CoherentCat, MatchesCoherentSuperposition) {
    const double alpha = 1.2;
    const Vector plus = coherent_vector(alpha, 40) + coherent_vector(-alpha, 40);
    const Vector ref = plus.head(20).normalized();
    const Vector cat = coherent_cat(alpha, CatParity::even, 20).vector();
    EXPECT_LE((cat - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CoherentCat, RejectsOversizedAmplitude) {
    EXPECT_THROW(coherent_cat(3.0, CatParity::even, 20), ParameterError);
    EXPECT_THROW(coherent_cat(1.0, CatParity::even, 3), DimensionError);
}

TEST(EigenCats, BareKerrGivesFockPair) {
    const EigenCats c = kpo_eigen_cats(2.0, 0.0, 0.0, 12);
    EXPECT_NEAR(std::abs(c.even.vector()(0)), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(c.odd.vector()(1)), 1.0, 1e-12);
}

TEST(EigenCats, ParityEigenstates) {
    const EigenCats c = kpo_eigen_cats(2.0, 2.0, 1.0, 20);
    const Matrix p = parity(20).data();
    EXPECT_NEAR(c.even.expectation(p), 1.0, 1e-10);
    EXPECT_NEAR(c.odd.expectation(p), -1.0, 1e-10);
    EXPECT_GT(c.even.vector()(0).real(), 0.0);
    EXPECT_GT(c.odd.vector()(1).real(), 0.0);
}

TEST(EigenCats, HighestEnergyInEachSector) {
    const int N = 20;
    const EigenCats c = kpo_eigen_cats(2.0, 2.0, 1.0, N);
    // oracle: full (unblocked) diagonalization, top eigenvalues by parity
    const oracle::Mat a = oracle::lowering(N);
    oracle::Mat h = 1.0 * a.adjoint() * a - 1.0 * a.adjoint() * a.adjoint() * a * a +
                    1.0 * (a.adjoint() * a.adjoint() + a * a);
    Eigen::SelfAdjointEigenSolver<oracle::Mat> es(h);
    const oracle::Mat p = oracle::parity_diag(N);
    double top_even = -1e9, top_odd = -1e9;
    for (int k = 0; k < N; ++k) {
        const oracle::Vec v = es.eigenvectors().col(k);
        const double par = (v.adjoint() * p * v)(0, 0).real();
        if (par > 0.999) top_even = std::max(top_even, es.eigenvalues()(k));
        if (par < -0.999) top_odd = std::max(top_odd, es.eigenvalues()(k));
    }
    EXPECT_NEAR(c.energy_even, top_even, 1e-9);
    EXPECT_NEAR(c.energy_odd, top_odd, 1e-9);
    EXPECT_NEAR(c.energy_even, 2.2269, 1e-3);
    EXPECT_NEAR(c.energy_odd, 2.4287, 1e-3);
}

namespace {
std::pair<double, double> best_coherent_overlap(const EigenCats &c) {
    double best = 0.0, arg = 0.0;
    for (int k = 1; k <= 250; ++k) {
        const double alpha = 0.01 * k;
        const Vector v = coherent_cat(alpha, CatParity::even, 40).vector().head(20);
        const double o = std::norm(v.dot(c.even.vector())) / v.squaredNorm();
        if (o > best) best = o, arg = alpha;
    }
    return {best, arg};
}
} // namespace

// With Delta = 1 MHz the eigen-cat is amplitude-squeezed relative to a
// coherent cat; at Delta = 0 the two coincide.
TEST(EigenCats, OverlapWithBestCoherentCat) {
    auto [best, arg] = best_coherent_overlap(kpo_eigen_cats(2.0, 2.0, 1.0, 20));
    EXPECT_NEAR(best, 0.9824, 5e-4);
    EXPECT_NEAR(arg, 1.33, 0.011);
    auto [best0, arg0] = best_coherent_overlap(kpo_eigen_cats(2.0, 2.0, 0.0, 20));
    EXPECT_GE(best0, 0.9999);
    EXPECT_NEAR(arg0, 1.0, 0.011);
}

// The single even eigen-cat sits at ~1.06e-4 above n = 8; the Bell-Cat reduced
// state (average of the pair) is the one below 1e-4.
TEST(EigenCats, HighPhotonTail) {
    const EigenCats c = kpo_eigen_cats(2.0, 2.0, 1.0, 20);
    const double even = tail_occupation(c.even, 8);
    const double odd = tail_occupation(c.odd, 8);
    EXPECT_NEAR(even, 1.06e-4, 0.01e-4);
    EXPECT_LT(odd, 1e-4);
    EXPECT_LT(0.5 * (even + odd), 1e-4);
}

TEST(QuantumState, ValidatesInvariants) {
    Vector v = Vector::Zero(4);
    v(0) = 2.0;
    EXPECT_THROW(QuantumState::ket({4}, v), NumericalError);
    EXPECT_THROW(QuantumState::ket({3}, Vector::Zero(4)), DimensionError);
    Matrix r = Matrix::Identity(2, 2);
    EXPECT_THROW(QuantumState::density({2}, r), NumericalError);
    r(0, 1) = 0.3;
    EXPECT_THROW(QuantumState::density({2}, 0.5 * r), NumericalError);
    EXPECT_NO_THROW(QuantumState::density({2}, 0.5 * Matrix::Identity(2, 2)));
}

TEST(QuantumState, PartialTrace) {
    const QuantumState psi = tensor(fock(3, 1), fock(4, 2));
    EXPECT_NEAR(psi.reduced(0).data()(1, 1).real(), 1.0, 1e-15);
    EXPECT_NEAR(psi.reduced(1).data()(2, 2).real(), 1.0, 1e-15);
    Vector bell = (fock2(2, 2, 0, 0).vector() + fock2(2, 2, 1, 1).vector()) / std::sqrt(2.0);
    const QuantumState b = QuantumState::ket({2, 2}, bell);
    EXPECT_LE(max_abs(b.reduced(0).data() - 0.5 * Matrix::Identity(2, 2)), 1e-15);
}
