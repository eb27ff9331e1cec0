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

#include "kerrcat/model.hpp"
#include "oracles.hpp"

using namespace kerrcat;

namespace {

double max_abs(const Matrix &m) { return m.cwiseAbs().maxCoeff(); }

SystemParams small(int N = 6) {
    SystemParams p;
    p.N1 = p.N2 = N;
    return p;
}

DriveSpec drive(Channel c, double amp, double det = 0.0, double phase = 0.0) {
    return {c, 0.0, 10.0, Envelope::constant(amp), Envelope::constant(det), phase};
}

// Two-mode KPO Hamiltonian written out with dense oracle matrices.
oracle::Mat reference_hamiltonian(const SystemParams &p, double P1, double P2, double t) {
    const int N = p.N1;
    const oracle::Mat a = oracle::lowering(N), I = oracle::Mat::Identity(N, N);
    const oracle::Mat a1 = oracle::kron(a, I), a2 = oracle::kron(I, a);
    const double w = 2 * M_PI;
    oracle::Mat h = w * (p.Delta1 * a1.adjoint() * a1 + p.Delta2 * a2.adjoint() * a2);
    h -= w * (0.5 * p.K1 * a1.adjoint() * a1.adjoint() * a1 * a1 +
              0.5 * p.K2 * a2.adjoint() * a2.adjoint() * a2 * a2);
    h += w * 0.5 * P1 * (a1.adjoint() * a1.adjoint() + a1 * a1);
    h += w * 0.5 * P2 * (a2.adjoint() * a2.adjoint() + a2 * a2);
    const oracle::Mat x = w * p.g * std::polar(1.0, w * p.Delta_p * t) * a1.adjoint() * a2;
    h += x + x.adjoint();
    return h;
}

} // namespace

TEST(Hamiltonian, BareKerrDiagonal) {
    SystemParams p = small();
    p.Delta1 = p.Delta2 = 0.0;
    p.g = 0.0;
    const Operator h = build_hamiltonian(p, std::vector<DriveSpec>{}, 0.0);
    const int idx20 = 2 * p.N2 + 0;
    EXPECT_NEAR(h(idx20, idx20).real(), -kTwoPi * 2.0, 1e-12);
    EXPECT_LE(max_abs(h.data() - Matrix(h.data().diagonal().asDiagonal())), 0.0);
}

TEST(Hamiltonian, ReducesToTwoModeKpoModel) {
    SystemParams p = small(5);
    std::vector<DriveSpec> drives = {drive(Channel::pump1, 2.0, 1.0), drive(Channel::pump2, 1.5, 0.7),
                                     drive(Channel::gate, 0.0), drive(Channel::bell_sum, 0.0)};
    p.Delta1 = 1.0;
    p.Delta2 = 0.7;
    for (double t : {0.0, 0.0123, 0.77}) {
        const Operator h = build_hamiltonian(p, drives, t);
        EXPECT_LE(max_abs(h.data() - reference_hamiltonian(p, 2.0, 1.5, t)), 1e-12) << t;
    }
}

TEST(Hamiltonian, HermitianForRandomDraws) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        SystemParams p = small(5);
        p.Delta1 = u(rng);
        p.Delta2 = u(rng);
        p.K1 = std::abs(u(rng)) + 0.1;
        p.K2 = std::abs(u(rng)) + 0.1;
        p.g = u(rng);
        p.Delta_p = 50 * u(rng);
        p.coupling = trial % 2 ? Coupling::full : Coupling::rotating_wave;
        std::vector<DriveSpec> d;
        for (Channel c : kAllChannels) d.push_back(drive(c, u(rng), u(rng), u(rng)));
        const Operator h = build_hamiltonian(p, d, std::abs(u(rng)));
        EXPECT_TRUE(h.is_hermitian(1e-12));
    }
}

TEST(Hamiltonian, PumpsConserveJointParity) {
    SystemParams p = small(8);
    std::vector<DriveSpec> d = {drive(Channel::pump1, 2.0, 1.0), drive(Channel::pump2, 2.0, 1.0)};
    const Matrix pp = tensor(parity(8), parity(8)).data();
    const Matrix p1 = tensor(parity(8), identity(8)).data();
    for (double t : {0.0, 0.3}) {
        const Matrix h = build_hamiltonian(p, d, t).data();
        EXPECT_LE(max_abs(h * pp - pp * h), 1e-12);
        p.coupling = Coupling::rotating_wave;
        const Matrix hr = build_hamiltonian(p, d, t).data();
        EXPECT_LE(max_abs(hr * p1 - p1 * hr), 1e-12); // each mode separately once g is dropped
        p.coupling = Coupling::full;
    }
}

TEST(Hamiltonian, DriveSelectionRules) {
    const int N = 5;
    SystemParams p = small(N);
    p.coupling = Coupling::rotating_wave;
    p.Delta1 = p.Delta2 = 0.0;
    std::vector<DriveSpec> none;
    const Matrix h0 = build_hamiltonian(p, none, 0.2).data();
    const Matrix pp = tensor(parity(N), parity(N)).data();
    for (Channel c : {Channel::bell_diff, Channel::gate, Channel::bell_sum}) {
        const Matrix hd = build_hamiltonian(p, {drive(c, 1.3, 0.4, 0.2)}, 0.2).data() - h0;
        EXPECT_GT(max_abs(hd), 0.1);
        const Matrix p1 = tensor(parity(N), identity(N)).data();
        EXPECT_GT(max_abs(hd * p1 - p1 * hd), 0.1); // single-mode parity broken
        EXPECT_LE(max_abs(hd * pp - pp * hd), 1e-12); // photons move in pairs or are exchanged
        for (int i = 0; i < N * N; ++i)
            for (int j = 0; j < N * N; ++j) {
                if (std::abs(hd(i, j)) < 1e-14) continue;
                const int s_i = i / N + i % N, s_j = j / N + j % N;
                if (c == Channel::bell_sum) EXPECT_EQ(std::abs(s_i - s_j), 2);
                else EXPECT_EQ(s_i, s_j);
            }
    }
    const Matrix hx = build_hamiltonian(p, {drive(Channel::x_drive1, 1.0)}, 0.0).data() - h0;
    EXPECT_GT(max_abs(hx * pp - pp * hx), 0.1);
}

TEST(Hamiltonian, GateTermEffectiveAmplitude) {
    SystemParams p = small(4);
    p.coupling = Coupling::rotating_wave;
    const Matrix h0 = build_hamiltonian(p, std::vector<DriveSpec>{}, 0.0).data();
    const Matrix hg = build_hamiltonian(p, {drive(Channel::gate, 2.96)}, 0.0).data();
    const oracle::Mat a = oracle::lowering(4), I = oracle::Mat::Identity(4, 4);
    const oracle::Mat a1 = oracle::kron(a, I), a2 = oracle::kron(I, a);
    const oracle::Mat ref = 2 * M_PI * 2.96 * (a1.adjoint() * a2 + a1 * a2.adjoint());
    EXPECT_LE(max_abs(hg - h0 - ref), 1e-12);
}

TEST(Hamiltonian, GateTermPumpModulationAmplitude) {
    SystemParams p = small(4);
    p.coupling = Coupling::rotating_wave;
    p.gate_amplitude = GateAmplitude::pump_modulation;
    const double expected = 8.0 * std::cyl_bessel_j(1.0, 2.0 * 2.96 / 144.0);
    EXPECT_NEAR(p.gate_coupling(2.96), expected, 1e-15);
    EXPECT_NEAR(p.gate_coupling(2.96), 0.16437, 1e-4);
    EXPECT_NEAR(p.gate_coupling(-2.96), -expected, 1e-15);
    const Matrix hg = build_hamiltonian(p, {drive(Channel::gate, 2.96)}, 0.0).data() -
                      build_hamiltonian(p, std::vector<DriveSpec>{}, 0.0).data();
    const int i01 = 1, i10 = 4;
    EXPECT_NEAR(hg(i10, i01).real(), kTwoPi * expected, 1e-12);
}

TEST(Hamiltonian, DrivePhaseAndDetuningConventions) {
    SystemParams p = small(3);
    p.coupling = Coupling::rotating_wave;
    p.Delta_AC = 0.5;
    const Matrix h0 = build_hamiltonian(p, std::vector<DriveSpec>{}, 0.0).data();
    const double t = 0.37, phi = 0.9, det = 1.7;
    const Matrix hs = build_hamiltonian(p, {drive(Channel::bell_sum, 1.0, det, phi)}, t).data() - h0;
    const int i00 = 0, i11 = 4;
    const cplx expect = kTwoPi * 0.5 * std::polar(1.0, -(kTwoPi * (det - 0.5) * t + phi));
    EXPECT_LE(std::abs(hs(i11, i00) - expect), 1e-12);
    const Matrix hx = build_hamiltonian(p, {drive(Channel::x_drive2, 1.0, 0.0, phi)}, t).data() - h0;
    // (Omega/2)(a e^{i phi} + a^dag e^{-i phi}): <0,0|H|0,1> carries e^{i phi}
    EXPECT_LE(std::abs(hx(0, 1) - kTwoPi * 0.5 * std::polar(1.0, phi)), 1e-12);
}

TEST(Hamiltonian, ScheduleOverloadUsesActiveSegments) {
    SystemParams p = small(4);
    const PulseSchedule s = preset_schedule("two_cat_gate");
    const Matrix h_before = build_hamiltonian(p, s, 0.5).data();
    std::vector<DriveSpec> d = {{Channel::pump1, 0.0, 1.275, Envelope::ramp(2.0, 1.0), Envelope::ramp(1.0, 1.0), 0},
                                {Channel::pump2, 0.0, 1.275, Envelope::ramp(2.0, 1.0), Envelope::ramp(1.0, 1.0), 0}};
    EXPECT_LE(max_abs(h_before - build_hamiltonian(p, d, 0.5).data()), 1e-12);
    EXPECT_THROW(build_hamiltonian(p, d, 2.0), ScheduleError);
}

TEST(Hamiltonian, SingleModeSystem) {
    SystemParams p;
    p.modes = 1;
    p.N1 = 6;
    const Operator h = build_hamiltonian(p, std::vector<DriveSpec>{}, 0.0);
    EXPECT_EQ(h.dims(), Dims{6});
    EXPECT_NEAR(h(1, 1).real(), kTwoPi * 1.0, 1e-12);
    EXPECT_THROW(build_hamiltonian(p, {drive(Channel::gate, 1.0)}, 0.0), ConfigError);
}

TEST(Collapse, EmptyWhenLossless) {
    EXPECT_TRUE(collapse_operators(small()).empty());
}

TEST(Collapse, AmplitudeDampingRate) {
    SystemParams p = small(4);
    p.T1_1 = p.T1_2 = 10.0;
    const auto ops = collapse_operators(p);
    ASSERT_EQ(ops.size(), 2u);
    for (const auto &c : ops) {
        EXPECT_EQ(c.kind, CollapseKind::loss);
        EXPECT_NEAR(c.rate, 0.1, 1e-15);
    }
    const oracle::Mat ref = std::sqrt(0.1) * oracle::kron(oracle::lowering(4), oracle::Mat::Identity(4, 4));
    EXPECT_LE(max_abs(ops[0].op.data() - ref), 1e-15);
}

TEST(Collapse, DetailedBalanceAndDephasing) {
    SystemParams p = small(4);
    p.T1_1 = 100.0;
    p.n_th_1 = 0.01;
    p.gamma_phi_2 = 0.005;
    const auto ops = collapse_operators(p);
    ASSERT_EQ(ops.size(), 3u);
    EXPECT_NEAR(ops[1].rate / ops[0].rate, 0.01 / 1.01, 1e-15);
    EXPECT_EQ(ops[1].kind, CollapseKind::gain);
    EXPECT_EQ(ops[2].kind, CollapseKind::dephasing);
    EXPECT_EQ(ops[2].mode, 1);
    EXPECT_NEAR(ops[2].rate, 0.01, 1e-15);
}

TEST(Collapse, NegativeRatesRejected) {
    SystemParams p = small(4);
    p.n_th_2 = -0.1;
    EXPECT_THROW(collapse_operators(p), ParameterError);
    p.n_th_2 = 0.0;
    p.T1_1 = -1.0;
    EXPECT_THROW(collapse_operators(p), ParameterError);
}

TEST(Params, JsonRoundTrip) {
    SystemParams p = SystemParams::device();
    p.T1_1 = 10.0;
    const nlohmann::json j = p;
    EXPECT_EQ(j["T1_2"], "inf");
    const SystemParams q = nlohmann::json::parse(j.dump()).get<SystemParams>();
    EXPECT_EQ(nlohmann::json(q), j);
    EXPECT_THROW(nlohmann::json({{"Kerr", 1.0}}).get<SystemParams>(), ConfigError);
}

TEST(Params, DevicePreset) {
    const SystemParams p = SystemParams::device();
    EXPECT_EQ(p.K1, 2.0);
    EXPECT_EQ(p.Delta1, 1.0);
    EXPECT_EQ(p.g, 8.0);
    EXPECT_EQ(p.Delta_p, 144.0);
    EXPECT_EQ(p.N1, 20);
    EXPECT_EQ(p.coupling, Coupling::rotating_wave);
}
