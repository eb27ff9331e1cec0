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

#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "kerrcat/evolve.hpp"
#include "oracles.hpp"

using namespace kerrcat;

namespace {

SystemParams single(int N, double K = 2.0, double Delta = 1.0) {
    SystemParams p;
    p.modes = 1;
    p.N1 = N;
    p.K1 = K;
    p.Delta1 = Delta;
    return p;
}

PulseSchedule single_mode_ramp(double pump = 2.0, double delta = 1.0, double tau = 1.0) {
    PulseSchedule s;
    s.add({Channel::pump1, 0.0, tau, Envelope::ramp(pump, tau), Envelope::ramp(delta, tau), 0.0});
    return s;
}

Vector superposition(int N, std::mt19937_64 &rng, int support) {
    Vector v = Vector::Zero(N);
    std::normal_distribution<double> g;
    for (int n = 0; n < support; ++n) v(n) = cplx(g(rng), g(rng));
    return v.normalized();
}

} // namespace

TEST(Unitary, StaticDiagonalPhaseIsExact) {
    const int N = 8;
    const SystemParams p = single(N, 0.37, 1.3);
    std::mt19937_64 rng(1);
    const Vector psi0 = superposition(N, rng, 6);
    EvolveOptions o;
    o.t_end = 1.7;
    const Trajectory tr = evolve_unitary(QuantumState::ket({N}, psi0), p, PulseSchedule(), o);
    Vector expect(N);
    for (int n = 0; n < N; ++n) {
        const double e = kTwoPi * (1.3 * n - 0.5 * 0.37 * n * (n - 1.0));
        expect(n) = std::polar(1.0, -e * 1.7) * psi0(n);
    }
    EXPECT_LE((tr.final_state.vector() - expect).norm(), 1e-12);
    EXPECT_EQ(tr.steps, std::lround(1.7 / kUnitaryDt));
}

TEST(Unitary, PlainRk4MatchesAnalyticPhase) {
    const int N = 6;
    const SystemParams p = single(N, 0.2, 0.5);
    std::mt19937_64 rng(2);
    const Vector psi0 = superposition(N, rng, 4);
    EvolveOptions o;
    o.t_end = 1.0;
    o.interaction_picture = false;
    const Trajectory tr = evolve_unitary(QuantumState::ket({N}, psi0), p, PulseSchedule(), o);
    Vector expect(N);
    for (int n = 0; n < N; ++n)
        expect(n) = std::polar(1.0, -kTwoPi * (0.5 * n - 0.1 * n * (n - 1.0))) * psi0(n);
    EXPECT_LE((tr.final_state.vector() - expect).norm(), 1e-9);
}

TEST(Unitary, MatchesExactPropagatorForStaticPump) {
    // constant pump: U = exp(-i H t) from the Taylor oracle
    const int N = 10;
    SystemParams p = single(N, 2.0, 1.0);
    PulseSchedule s;
    s.add({Channel::pump1, 0.0, 0.5, Envelope::constant(1.2), Envelope::constant(0.8), 0.0});
    std::mt19937_64 rng(3);
    const Vector psi0 = superposition(N, rng, 5);
    const Trajectory tr = evolve_unitary(QuantumState::ket({N}, psi0), p, s);
    oracle::Mat h = oracle::Mat::Zero(N, N);
    const RealMatrix hs = kpo_static_hamiltonian(2.0, 1.2, 0.8, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) h(i, j) = kTwoPi * hs(i, j);
    const oracle::Mat u = oracle::expm_taylor(cplx(0, -0.5) * h);
    EXPECT_LE((tr.final_state.vector() - u * psi0).norm(), 1e-8);
}

TEST(Unitary, BeamSplitterSwapsSingleExcitation) {
    SystemParams p;
    p.N1 = p.N2 = 4;
    p.Delta1 = p.Delta2 = 0.0;
    p.coupling = Coupling::rotating_wave;
    const double phi = 0.4;
    PulseSchedule s;
    s.add({Channel::gate, 0.0, 0.25, Envelope::square(0.5), Envelope::constant(0.0), phi});
    const Trajectory tr = evolve_unitary(fock2(4, 4, 0, 1), p, s);
    // theta = 2 pi g t = pi / 4
    const Vector v = tr.final_state.vector();
    EXPECT_NEAR(std::abs(v(1) - std::cos(kPi / 4)), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(v(4) - (-kI * std::polar(1.0, -phi) * std::sin(kPi / 4))), 0.0, 1e-10);
}

TEST(Unitary, NormPreservedAndParityConservedDuringRamp) {
    const SystemParams p = single(20);
    EvolveOptions o;
    for (int k = 1; k < 10; ++k) o.sample_times.push_back(0.1 * k);
    o.observables = {{"parity", parity(20).data()}, {"n", number(20).data()}};
    const Trajectory tr = evolve_unitary(fock(20, 0), p, single_mode_ramp(), o);
    ASSERT_EQ(tr.times.size(), 11u);
    EXPECT_LE(tr.norm_drift, 1e-8);
    for (const QuantumState &s : tr.states) EXPECT_NEAR(s.expectation(parity(20).data()) / s.vector().squaredNorm(), 1.0, 1e-12);
    EXPECT_GT(tr.observables.at("n").back(), 1.0);
}

TEST(Unitary, RampProducesEvenEigenCat) {
    const SystemParams p = single(20);
    const Trajectory tr = evolve_unitary(fock(20, 0), p, single_mode_ramp());
    const EigenCats cats = kpo_eigen_cats(2.0, 2.0, 1.0, 20);
    EXPECT_GE(fidelity(tr.final_state, cats.even), 0.95);
    EXPECT_LT(tail_occupation(tr.final_state, 8), 1e-3);
}

TEST(Unitary, StepHalvingConverges) {
    const SystemParams p = single(20);
    const QuantumState a = evolve_unitary(fock(20, 0), p, single_mode_ramp(), 0.001).final_state;
    const QuantumState b = evolve_unitary(fock(20, 0), p, single_mode_ramp(), 0.0005).final_state;
    EXPECT_LE((a.vector() - b.vector()).norm(), 1e-6);
}

TEST(Unitary, TwoModeRampReachesEigenCatPair) {
    SystemParams p = SystemParams::device();
    const Trajectory tr = evolve_unitary(fock2(20, 20, 0, 0), p, preset_schedule("cat_gen"));
    const EigenCats cats = kpo_eigen_cats(2.0, 2.0, 1.0, 20);
    EXPECT_GE(fidelity(tr.final_state, tensor(cats.even, cats.even)), 0.95 * 0.95);
    EXPECT_GE(fidelity(tr.final_state.reduced(0), cats.even), 0.95);
    EXPECT_LE(tr.norm_drift, 1e-6);
}

TEST(Unitary, NormDriftPerMicrosecondOnGatePreset) {
    const SystemParams p = SystemParams::device();
    const PulseSchedule s = preset_schedule("two_cat_gate");
    const Trajectory tr = evolve_unitary(fock2(20, 20, 0, 0), p, s);
    EXPECT_LE(tr.norm_drift / s.total_duration(), 1e-8);
}

TEST(Unitary, RejectsMismatchedState) {
    const SystemParams p = single(6);
    EXPECT_THROW(evolve_unitary(fock(5, 0), p, PulseSchedule(), 0.001), DimensionError);
    EXPECT_THROW(evolve_unitary(fock(6, 0), p, single_mode_ramp(), 0.0), ParameterError);
}

TEST(Unitary, UnstableStepReportsDivergence) {
    const SystemParams p = single(20);
    EvolveOptions o;
    o.dt = 0.01;
    o.t_end = 10.0;
    o.interaction_picture = false;
    std::mt19937_64 rng(4);
    const QuantumState psi = QuantumState::ket({20}, superposition(20, rng, 20));
    try {
        evolve_unitary(psi, p, PulseSchedule(), o);
        FAIL() << "expected divergence";
    } catch (const IntegrationDiverged &e) {
        EXPECT_GT(e.time(), 0.0);
        EXPECT_LT(e.time(), 10.0);
    }
}

TEST(Lindblad, AmplitudeDampingOneT1) {
    SystemParams p = single(4, 2.0, 0.0);
    p.T1_1 = 10.0;
    EvolveOptions o;
    o.t_end = 10.0;
    o.observables = {{"n", number(4).data()}};
    const Trajectory tr = evolve_lindblad(fock(4, 1).as_density(), p, PulseSchedule(), o);
    EXPECT_NEAR(tr.observables.at("n").back(), std::exp(-1.0), 1e-6);
    EXPECT_LE(tr.norm_drift, 1e-10);
    EXPECT_GE(tr.min_eigenvalue, -1e-10);
}

TEST(Lindblad, ThermalRelaxation) {
    SystemParams p = single(14, 2.0, 1.0);
    p.T1_1 = 1.0;
    p.n_th_1 = 0.2;
    EvolveOptions o;
    o.t_end = 5.0;
    o.observables = {{"n", number(14).data()}};
    const Trajectory tr = evolve_lindblad(fock(14, 0).as_density(), p, PulseSchedule(), o);
    EXPECT_NEAR(tr.observables.at("n").back(), 0.2 * (1.0 - std::exp(-5.0)), 1e-6);
}

TEST(Lindblad, PureDephasingOfCoherence) {
    SystemParams p = single(4, 2.0, 0.0);
    p.gamma_phi_1 = 0.3;
    Vector v = Vector::Zero(4);
    v(0) = v(1) = 1.0 / std::sqrt(2.0);
    EvolveOptions o;
    o.t_end = 2.0;
    const Trajectory tr = evolve_lindblad(QuantumState::ket({4}, v), p, PulseSchedule(), o);
    const Matrix r = tr.final_state.density_matrix();
    EXPECT_NEAR(std::abs(r(0, 1)), 0.5 * std::exp(-0.3 * 2.0), 1e-8);
    EXPECT_NEAR(r(1, 1).real(), 0.5, 1e-12);
}

TEST(Lindblad, DephasingSuspendedWhilePumped) {
    SystemParams p = single(12);
    p.gamma_phi_1 = 0.5;
    const PulseSchedule s = single_mode_ramp();
    const QuantumState a = evolve_lindblad(fock(12, 0), p, s).final_state;
    p.gamma_phi_1 = 0.0;
    const QuantumState b = evolve_lindblad(fock(12, 0), p, s).final_state;
    EXPECT_LE((a.data() - b.data()).norm(), 1e-12);
    p.gamma_phi_1 = 0.5;
    p.dephasing_during_pumps = true;
    const QuantumState c = evolve_lindblad(fock(12, 0), p, s).final_state;
    EXPECT_GT((c.data() - b.data()).norm(), 1e-3);
}

TEST(Lindblad, LosslessAgreesWithUnitary) {
    const SystemParams p = single(16);
    const QuantumState psi = evolve_unitary(fock(16, 0), p, single_mode_ramp()).final_state;
    const Trajectory tr = evolve_lindblad(fock(16, 0), p, single_mode_ramp(), kUnitaryDt);
    EXPECT_NEAR(fidelity(tr.final_state, psi), 1.0, 1e-9);
    EXPECT_LE(tr.norm_drift, 1e-9);
}

TEST(Lindblad, LossyRampStaysPhysical) {
    SystemParams p = single(16);
    p.T1_1 = 10.0;
    p.n_th_1 = 0.05;
    EvolveOptions o;
    o.check_positivity = true;
    o.sample_times = {0.25, 0.5, 0.75};
    o.observables = {{"parity", parity(16).data()}};
    const Trajectory tr = evolve_lindblad(fock(16, 0), p, single_mode_ramp(), o);
    EXPECT_LE(tr.norm_drift, 1e-9);
    EXPECT_GE(tr.min_eigenvalue, -1e-8);
    EXPECT_TRUE(tr.diagnostics.empty());
    EXPECT_TRUE(tr.final_state.density_matrix().isApprox(tr.final_state.density_matrix().adjoint(), 1e-14));
    for (double v : tr.observables.at("parity")) EXPECT_LE(std::abs(v), 1.0 + 1e-12);
}

TEST(Lindblad, StepHalvingOnGatePreset) {
    SystemParams p = SystemParams::device();
    p.N1 = p.N2 = 12;
    p.T1_1 = p.T1_2 = 10.0;
    const PulseSchedule s = preset_schedule("two_cat_gate");
    const Trajectory a = evolve_lindblad(fock2(12, 12, 0, 0), p, s, kLindbladDt);
    const Trajectory b = evolve_lindblad(fock2(12, 12, 0, 0), p, s, 0.5 * kLindbladDt);
    const Matrix diff = a.final_state.data() - b.final_state.data();
    Eigen::SelfAdjointEigenSolver<Matrix> es(diff, Eigen::EigenvaluesOnly);
    EXPECT_LE(es.eigenvalues().cwiseAbs().sum(), 1e-6);
    EXPECT_LE(a.norm_drift / s.total_duration(), 1e-6);
    EXPECT_GE(a.min_eigenvalue, -1e-6);
}

TEST(Fidelity, UhlmannProperties) {
    std::mt19937_64 rng(9);
    const Matrix r = oracle::random_density(6, rng), s = oracle::random_density(6, rng);
    const QuantumState a = QuantumState::density({6}, r), b = QuantumState::density({6}, s);
    EXPECT_NEAR(fidelity(a, a), 1.0, 1e-9);
    EXPECT_NEAR(fidelity(a, b), fidelity(b, a), 1e-9);
    EXPECT_LE(fidelity(a, b), 1.0);
    const QuantumState k = QuantumState::ket({6}, oracle::random_ket(6, rng));
    EXPECT_NEAR(fidelity(k, b), fidelity(k.as_density(), b), 1e-8);
    EXPECT_THROW(fidelity(a, fock(5, 0)), DimensionError);
}

TEST(Fidelity, PhaseAlignedBell) {
    const Vector a = fock2(3, 3, 0, 0).vector(), b = fock2(3, 3, 1, 1).vector();
    const Vector bell = (a + std::polar(1.0, 1.1) * b) / std::sqrt(2.0);
    const QuantumState st = QuantumState::ket({3, 3}, bell);
    EXPECT_NEAR(phase_aligned_fidelity(st, a, b), 1.0, 1e-12);
    EXPECT_NEAR(fidelity(st, QuantumState::ket({3, 3}, ((a + b) / std::sqrt(2.0)).eval())),
                std::pow(std::cos(0.55), 2), 1e-12);
}

TEST(Fidelity, GateReference) {
    const Operator u = gate_unitary_reference();
    EXPECT_TRUE(u.is_unitary(1e-14));
    const Matrix u2 = u.data() * u.data();
    Matrix iswap_like = Matrix::Zero(4, 4);
    iswap_like(0, 3) = iswap_like(3, 0) = iswap_like(1, 2) = iswap_like(2, 1) = kI;
    EXPECT_LE((u2 - iswap_like).norm(), 1e-14);
}

TEST(Fidelity, GateReferenceIsXXRotation) {
    oracle::Mat x = oracle::Mat::Zero(2, 2);
    x(0, 1) = x(1, 0) = 1.0;
    const oracle::Mat g = oracle::expm_taylor(cplx(0.0, kPi / 4.0) * oracle::kron(x, x));
    const Matrix u = gate_unitary_reference().data();
    const cplx phase = u(0, 0) / g(0, 0);
    EXPECT_NEAR(std::abs(phase), 1.0, 1e-14);
    EXPECT_LE((u - phase * g).norm(), 1e-13);
    // exchange block squares to iSWAP
    const Matrix u2 = u * u;
    EXPECT_LE(std::abs(u2(1, 2) - kI) + std::abs(u2(2, 1) - kI) + std::abs(u2(1, 1)) + std::abs(u2(2, 2)), 1e-14);
}

TEST(MatrixIO, RoundTripIsExact) {
    std::mt19937_64 rng(10);
    const Matrix m = oracle::random_matrix(5, rng);
    const auto path = std::filesystem::temp_directory_path() / "kerrcat_matrix.txt";
    write_complex_matrix(path.string(), m, {5});
    Dims dims;
    const Matrix back = read_complex_matrix(path.string(), &dims);
    EXPECT_EQ(dims, Dims{5});
    EXPECT_EQ((back - m).norm(), 0.0);
    std::filesystem::remove(path);
}
