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

#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "kerrcat/fockspace.hpp"
#include "kerrcat/pulses.hpp"

namespace kerrcat {

enum class Coupling { full, rotating_wave };
enum class GateAmplitude { effective, pump_modulation };

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct SystemParams {
    int modes = 2;
    double Delta1 = 1.0, Delta2 = 1.0; // MHz
    double K1 = 2.0, K2 = 2.0;         // MHz
    double g = 8.0;                    // MHz
    double Delta_p = 144.0;            // MHz
    double T1_1 = kInf, T1_2 = kInf;   // us
    double n_th_1 = 0.0, n_th_2 = 0.0;
    double gamma_phi_1 = 0.0, gamma_phi_2 = 0.0; // 1/us
    int N1 = 20, N2 = 20;
    double Delta_AC = 0.0; // MHz, offset on the bell_sum detuning
    Coupling coupling = Coupling::full;
    GateAmplitude gate_amplitude = GateAmplitude::effective;
    bool dephasing_during_pumps = false;

    static SystemParams device() {
        SystemParams p;
        p.coupling = Coupling::rotating_wave;
        p.gate_amplitude = GateAmplitude::pump_modulation;
        return p;
    }

    Dims dims() const { return modes == 1 ? Dims{N1} : Dims{N1, N2}; }
    int dim() const { return total_dim(dims()); }

    double K(int i) const { return i == 0 ? K1 : K2; }
    double Delta(int i) const { return i == 0 ? Delta1 : Delta2; }
    double T1(int i) const { return i == 0 ? T1_1 : T1_2; }
    double n_th(int i) const { return i == 0 ? n_th_1 : n_th_2; }
    double gamma_phi(int i) const { return i == 0 ? gamma_phi_1 : gamma_phi_2; }
    int N(int i) const { return i == 0 ? N1 : N2; }

    // Beam-splitter amplitude produced by a gate-channel amplitude (MHz).
    double gate_coupling(double amplitude) const {
        if (gate_amplitude == GateAmplitude::effective) return amplitude;
        if (Delta_p == 0.0) throw ParameterError("pump-modulation gate needs Delta_p != 0");
        const double x = 2.0 * amplitude / Delta_p;
        return g * (x < 0 ? -std::cyl_bessel_j(1.0, -x) : std::cyl_bessel_j(1.0, x));
    }

    void validate() const {
        if (modes != 1 && modes != 2) throw ParameterError("modes must be 1 or 2");
        for (int i = 0; i < modes; ++i) {
            const std::string m = " (mode " + std::to_string(i + 1) + ")";
            if (!(K(i) > 0.0)) throw ParameterError("Kerr coefficient must be positive" + m);
            if (!(T1(i) > 0.0)) throw ParameterError("T1 must be positive or infinite" + m);
            if (!(n_th(i) >= 0.0)) throw ParameterError("thermal occupation must be >= 0" + m);
            if (!(gamma_phi(i) >= 0.0)) throw ParameterError("dephasing rate must be >= 0" + m);
            if (N(i) < 2 || N(i) > kMaxModeDim)
                throw ParameterError("truncation must lie in [2, 64]" + m);
        }
    }
};

inline std::string coupling_name(Coupling c) { return c == Coupling::full ? "full" : "rotating_wave"; }
inline std::string gate_amplitude_name(GateAmplitude g) {
    return g == GateAmplitude::effective ? "effective" : "pump_modulation";
}

namespace detail {
inline nlohmann::json time_to_json(double t) {
    return std::isinf(t) ? nlohmann::json("inf") : nlohmann::json(t);
}
inline double time_from_json(const nlohmann::json &j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return kInf;
        throw ConfigError("time value must be a number or \"inf\"");
    }
    return j.get<double>();
}
} // namespace detail

inline void to_json(nlohmann::json &j, const SystemParams &p) {
    j = nlohmann::json{{"modes", p.modes},
                       {"Delta1", p.Delta1},
                       {"Delta2", p.Delta2},
                       {"K1", p.K1},
                       {"K2", p.K2},
                       {"g", p.g},
                       {"Delta_p", p.Delta_p},
                       {"T1_1", detail::time_to_json(p.T1_1)},
                       {"T1_2", detail::time_to_json(p.T1_2)},
                       {"n_th_1", p.n_th_1},
                       {"n_th_2", p.n_th_2},
                       {"gamma_phi_1", p.gamma_phi_1},
                       {"gamma_phi_2", p.gamma_phi_2},
                       {"N1", p.N1},
                       {"N2", p.N2},
                       {"Delta_AC", p.Delta_AC},
                       {"coupling", coupling_name(p.coupling)},
                       {"gate_amplitude", gate_amplitude_name(p.gate_amplitude)},
                       {"dephasing_during_pumps", p.dephasing_during_pumps}};
}

inline void from_json(const nlohmann::json &j, SystemParams &p) {
    nlohmann::json ref;
    to_json(ref, p);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ref.contains(it.key())) throw ConfigError("unknown parameter '" + it.key() + "'");
    p.modes = j.value("modes", p.modes);
    p.Delta1 = j.value("Delta1", p.Delta1);
    p.Delta2 = j.value("Delta2", p.Delta2);
    p.K1 = j.value("K1", p.K1);
    p.K2 = j.value("K2", p.K2);
    p.g = j.value("g", p.g);
    p.Delta_p = j.value("Delta_p", p.Delta_p);
    if (j.contains("T1_1")) p.T1_1 = detail::time_from_json(j.at("T1_1"));
    if (j.contains("T1_2")) p.T1_2 = detail::time_from_json(j.at("T1_2"));
    p.n_th_1 = j.value("n_th_1", p.n_th_1);
    p.n_th_2 = j.value("n_th_2", p.n_th_2);
    p.gamma_phi_1 = j.value("gamma_phi_1", p.gamma_phi_1);
    p.gamma_phi_2 = j.value("gamma_phi_2", p.gamma_phi_2);
    p.N1 = j.value("N1", p.N1);
    p.N2 = j.value("N2", p.N2);
    p.Delta_AC = j.value("Delta_AC", p.Delta_AC);
    if (j.contains("coupling")) {
        const auto s = j.at("coupling").get<std::string>();
        if (s == "full") p.coupling = Coupling::full;
        else if (s == "rotating_wave") p.coupling = Coupling::rotating_wave;
        else throw ConfigError("coupling must be 'full' or 'rotating_wave'");
    }
    if (j.contains("gate_amplitude")) {
        const auto s = j.at("gate_amplitude").get<std::string>();
        if (s == "effective") p.gate_amplitude = GateAmplitude::effective;
        else if (s == "pump_modulation") p.gate_amplitude = GateAmplitude::pump_modulation;
        else throw ConfigError("gate_amplitude must be 'effective' or 'pump_modulation'");
    }
    p.dephasing_during_pumps = j.value("dephasing_during_pumps", p.dephasing_during_pumps);
}

// Eigen-cat pair of one mode at the given pump and detuning (MHz).
inline EigenCats kpo_eigen_cats(const SystemParams &params, double pump, double detuning,
                                int mode = 0) {
    return kpo_eigen_cats(params.K(mode), pump, detuning, params.N(mode));
}

// Instantaneous control values seen by the Hamiltonian.
struct Controls {
    double pump[2] = {0.0, 0.0};  // MHz
    double delta[2] = {0.0, 0.0}; // MHz
    bool pump_on[2] = {false, false};
    struct Drive {
        Channel channel;
        double amplitude; // MHz
        double detuning;  // MHz
        double phase;
    };
    std::vector<Drive> drives;
};

// Evaluate the given active segments at time t (envelopes clamped to their window).
inline Controls evaluate_controls(const SystemParams &params,
                                  const std::vector<const DriveSpec *> &active, double t) {
    Controls c;
    c.delta[0] = params.Delta1;
    c.delta[1] = params.Delta2;
    for (const DriveSpec *s : active) {
        if (is_pump(s->channel)) {
            const int i = s->channel == Channel::pump1 ? 0 : 1;
            if (i >= params.modes) throw ConfigError("pump2 used on a single-mode system");
            c.pump[i] = s->amplitude_at(t);
            c.delta[i] = s->detuning_at(t);
            c.pump_on[i] = !s->amplitude.identically_zero();
        } else {
            c.drives.push_back({s->channel, s->amplitude_at(t), s->detuning_at(t), s->phase});
        }
    }
    return c;
}

// Sparse building blocks of H(t). The Kerr diagonal is kept separate so that
// integrators can treat it exactly.
class HamiltonianModel {
  public:
    enum Term { n1, n2, pump1, pump2, hop, hop_dag, pair, pair_dag, a1, a1_dag, a2, a2_dag, diag, kCount };

    explicit HamiltonianModel(const SystemParams &params) : params_(params) {
        params_.validate();
        const Dims dims = params_.dims();
        const int d = total_dim(dims);
        kerr_ = RealVector::Zero(d);
        std::vector<SparseMatrix> terms(kCount, SparseMatrix(d, d));
        SparseMatrix ident(d, d);
        ident.setIdentity();
        terms[diag] = ident;
        SparseMatrix lower[2], num[2];
        for (int i = 0; i < params_.modes; ++i) {
            const int N = params_.N(i);
            const Matrix a = annihilation(N).data();
            const Matrix ad = a.adjoint();
            lower[i] = embed_sparse(a, i, dims);
            num[i] = embed_sparse(ad * a, i, dims);
            const Matrix kerr = -0.5 * params_.K(i) * (ad * ad * a * a);
            kerr_ += kTwoPi * embed(kerr, i, dims).diagonal().real();
            terms[i == 0 ? n1 : n2] = num[i];
            num_[i] = embed(ad * a, i, dims).diagonal().real();
            terms[i == 0 ? pump1 : pump2] = embed_sparse(ad * ad + a * a, i, dims);
            terms[i == 0 ? a1 : a2] = lower[i];
            terms[i == 0 ? a1_dag : a2_dag] = SparseMatrix(lower[i].adjoint());
        }
        if (params_.modes == 2) {
            SparseMatrix l1d = SparseMatrix(lower[0].adjoint());
            SparseMatrix l2d = SparseMatrix(lower[1].adjoint());
            terms[hop] = l1d * lower[1];
            terms[hop_dag] = SparseMatrix(terms[hop].adjoint());
            terms[pair] = l1d * l2d;
            terms[pair_dag] = SparseMatrix(terms[pair].adjoint());
        }
        for (auto &t : terms) t.prune(cplx(0.0));

        SparseMatrix pattern(d, d);
        for (auto &t : terms) {
            SparseMatrix ones = t;
            for (int k = 0; k < ones.outerSize(); ++k)
                for (SparseMatrix::InnerIterator it(ones, k); it; ++it) it.valueRef() = 1.0;
            pattern += ones;
        }
        pattern.makeCompressed();
        pattern_ = pattern;
        maps_.resize(kCount);
        for (int k = 0; k < kCount; ++k) {
            const SparseMatrix &t = terms[k];
            for (int r = 0; r < t.outerSize(); ++r)
                for (SparseMatrix::InnerIterator it(t, r); it; ++it)
                    maps_[k].push_back({locate(r, static_cast<int>(it.col())), it.value()});
        }
    }

    const SystemParams &params() const { return params_; }
    int dim() const { return static_cast<int>(kerr_.size()); }
    const RealVector &kerr_diagonal() const { return kerr_; }
    const RealVector &number_diagonal(int mode) const { return num_[mode]; }

    // Static Kerr plus the detuning part of H at control values c (rad/us).
    RealVector frame_diagonal(const Controls &c) const {
        RealVector d = kerr_;
        for (int i = 0; i < params_.modes; ++i) d += (kTwoPi * c.delta[i]) * num_[i];
        return d;
    }
    SparseMatrix pattern() const { return pattern_; }

    // Coefficients (rad/us) of every term except the Kerr diagonal.
    std::array<cplx, kCount> coefficients(const Controls &c, double t) const {
        std::array<cplx, kCount> k{};
        k[n1] = kTwoPi * c.delta[0];
        k[pump1] = kTwoPi * 0.5 * c.pump[0];
        if (params_.modes == 2) {
            k[n2] = kTwoPi * c.delta[1];
            k[pump2] = kTwoPi * 0.5 * c.pump[1];
            if (params_.coupling == Coupling::full && params_.g != 0.0) {
                k[hop] += kTwoPi * params_.g * std::polar(1.0, kTwoPi * params_.Delta_p * t);
            }
        }
        for (const auto &d : c.drives) {
            const double amp = d.amplitude;
            if (amp == 0.0) continue;
            switch (d.channel) {
            case Channel::bell_sum:
                require_two_modes(d.channel);
                k[pair] += kTwoPi * 0.5 * amp *
                           std::polar(1.0, -(kTwoPi * (d.detuning - params_.Delta_AC) * t + d.phase));
                break;
            case Channel::bell_diff:
                require_two_modes(d.channel);
                k[hop] += kTwoPi * 0.5 * amp * std::polar(1.0, -(kTwoPi * d.detuning * t + d.phase));
                break;
            case Channel::gate:
                require_two_modes(d.channel);
                k[hop] += kTwoPi * params_.gate_coupling(amp) *
                          std::polar(1.0, -(kTwoPi * d.detuning * t + d.phase));
                break;
            case Channel::x_drive1:
                k[a1] += kTwoPi * 0.5 * amp * std::polar(1.0, kTwoPi * d.detuning * t + d.phase);
                break;
            case Channel::x_drive2:
                require_two_modes(d.channel);
                k[a2] += kTwoPi * 0.5 * amp * std::polar(1.0, kTwoPi * d.detuning * t + d.phase);
                break;
            default: throw ConfigError("channel " + channel_name(d.channel) + " has no drive term");
            }
        }
        k[hop_dag] = std::conj(k[hop]);
        k[pair_dag] = std::conj(k[pair]);
        k[a1_dag] = std::conj(k[a1]);
        k[a2_dag] = std::conj(k[a2]);
        return k;
    }

    // out = scale * (H(t) - Kerr) + diag(extra); `out` must be a copy of pattern().
    void assemble(const Controls &c, double t, SparseMatrix &out, cplx scale = 1.0,
                  const Vector *extra = nullptr) const {
        auto k = coefficients(c, t);
        cplx *val = out.valuePtr();
        std::fill(val, val + out.nonZeros(), cplx(0.0));
        for (int term = 0; term < kCount; ++term) {
            if (term == diag || k[term] == cplx(0.0)) continue;
            const cplx s = scale * k[term];
            for (const auto &[idx, v] : maps_[term]) val[idx] += s * v;
        }
        if (extra) {
            for (std::size_t r = 0; r < maps_[diag].size(); ++r)
                val[maps_[diag][r].first] += (*extra)(static_cast<Eigen::Index>(r));
        }
    }

    Matrix dense(const Controls &c, double t) const {
        SparseMatrix h = pattern_;
        assemble(c, t, h);
        Matrix out = Matrix(h);
        out.diagonal() += kerr_.cast<cplx>();
        return out;
    }

  private:
    void require_two_modes(Channel ch) const {
        if (params_.modes != 2) throw ConfigError(channel_name(ch) + " needs two modes");
    }

    int locate(int row, int col) const {
        const int *outer = pattern_.outerIndexPtr();
        const int *inner = pattern_.innerIndexPtr();
        const int *b = inner + outer[row];
        const int *e = inner + outer[row + 1];
        const int *p = std::lower_bound(b, e, col);
        if (p == e || *p != col) throw Error("sparsity pattern lookup failed");
        return static_cast<int>(p - inner);
    }

    SystemParams params_;
    RealVector kerr_;
    RealVector num_[2];
    SparseMatrix pattern_;
    std::vector<std::vector<std::pair<int, cplx>>> maps_;
};

// H(t) for an explicit list of drives; every drive must be defined at t.
inline Operator build_hamiltonian(const SystemParams &params, const std::vector<DriveSpec> &drives,
                                  double t) {
    std::vector<const DriveSpec *> active;
    for (const DriveSpec &d : drives) {
        if (t < d.t_start || t > d.t_end)
            throw ScheduleError("drive on " + channel_name(d.channel) + " is undefined at t = " +
                                std::to_string(t));
        active.push_back(&d);
    }
    HamiltonianModel model(params);
    return {params.dims(), model.dense(evaluate_controls(params, active, t), t)};
}

inline Operator build_hamiltonian(const SystemParams &params, const PulseSchedule &schedule,
                                  double t) {
    HamiltonianModel model(params);
    return {params.dims(), model.dense(evaluate_controls(params, schedule.active(t), t), t)};
}

enum class CollapseKind { loss, gain, dephasing };

struct CollapseOperator {
    int mode = 0;
    CollapseKind kind = CollapseKind::loss;
    double rate = 0.0; // 1/us
    Operator op;       // includes sqrt(rate)
};

inline std::vector<CollapseOperator> collapse_operators(const SystemParams &params) {
    params.validate();
    std::vector<CollapseOperator> out;
    const Dims dims = params.dims();
    for (int i = 0; i < params.modes; ++i) {
        const Matrix a = annihilation(params.N(i)).data();
        const double kappa = std::isinf(params.T1(i)) ? 0.0 : 1.0 / params.T1(i);
        const double down = kappa * (1.0 + params.n_th(i));
        const double up = kappa * params.n_th(i);
        const double deph = 2.0 * params.gamma_phi(i);
        if (down > 0.0) out.push_back({i, CollapseKind::loss, down, {dims, std::sqrt(down) * embed(a, i, dims)}});
        if (up > 0.0)
            out.push_back({i, CollapseKind::gain, up, {dims, std::sqrt(up) * embed(a.adjoint(), i, dims)}});
        if (deph > 0.0)
            out.push_back({i, CollapseKind::dephasing, deph,
                           {dims, std::sqrt(deph) * embed(a.adjoint() * a, i, dims)}});
    }
    return out;
}

} // namespace kerrcat
