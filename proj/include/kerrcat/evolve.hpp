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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kerrcat/fockspace.hpp"
#include "kerrcat/model.hpp"
#include "kerrcat/pulses.hpp"

namespace kerrcat {

// Default steps (us).
inline constexpr double kUnitaryDt = 0.00025;
inline constexpr double kLindbladDt = 0.0005;

struct EvolveOptions {
    std::optional<double> dt; // us; integrator default when unset
    double t_start = 0.0;
    double t_end = -1.0; // < 0: schedule end
    std::vector<double> sample_times; // always includes t_start and t_end
    bool store_states = true;
    std::vector<std::pair<std::string, Matrix>> observables;
    bool interaction_picture = true;
    bool check_positivity = false; // eigenvalue check at every sample (Lindblad)
    std::function<void(double, const QuantumState &)> on_sample;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<QuantumState> states;
    std::vector<std::string> observable_names;
    std::map<std::string, std::vector<double>> observables;
    QuantumState final_state;
    double norm_drift = 0.0;      // max |norm - 1| (ket) or |Tr rho - 1| over samples
    double min_eigenvalue = 0.0;  // lowest density eigenvalue seen (Lindblad)
    long steps = 0;
    std::vector<std::string> diagnostics;

    void write_csv(const std::string &path) const {
        std::ofstream f(path);
        if (!f) throw Error("cannot write " + path);
        f.precision(12);
        f << "t_us";
        for (const auto &n : observable_names) f << ',' << n;
        f << '\n';
        for (std::size_t k = 0; k < times.size(); ++k) {
            f << times[k];
            for (const auto &n : observable_names) f << ',' << observables.at(n)[k];
            f << '\n';
        }
    }
};

// Row-major "re,im" dump; header line carries the shape and mode dims.
inline void write_complex_matrix(const std::string &path, const Matrix &m, const Dims &dims = {}) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f.precision(17);
    f << "# rows=" << m.rows() << " cols=" << m.cols();
    if (!dims.empty()) f << " dims=" << dims_string(dims);
    f << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) f << ' ';
            f << m(r, c).real() << ',' << m(r, c).imag();
        }
        f << '\n';
    }
}

inline Matrix read_complex_matrix(const std::string &path, Dims *dims = nullptr) {
    std::ifstream f(path);
    if (!f) throw Error("cannot read " + path);
    std::string line;
    std::vector<std::vector<cplx>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto pos = line.find("dims=");
            if (dims && pos != std::string::npos) {
                dims->clear();
                std::string s = line.substr(pos + 5);
                std::size_t start = 0;
                while (start < s.size()) {
                    std::size_t x = s.find('x', start);
                    dims->push_back(std::stoi(s.substr(start, x - start)));
                    if (x == std::string::npos) break;
                    start = x + 1;
                }
            }
            continue;
        }
        std::vector<cplx> row;
        std::size_t start = 0;
        while (start < line.size()) {
            std::size_t sp = line.find(' ', start);
            std::string tok = line.substr(start, sp - start);
            if (!tok.empty()) {
                auto comma = tok.find(',');
                if (comma == std::string::npos) throw Error("malformed matrix entry in " + path);
                row.emplace_back(std::stod(tok.substr(0, comma)), std::stod(tok.substr(comma + 1)));
            }
            if (sp == std::string::npos) break;
            start = sp + 1;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error("empty matrix file " + path);
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw Error("ragged matrix in " + path);
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

namespace detail {

struct StepInterval {
    double a, b;
    int steps;
    bool sample_at_end;
};

inline std::vector<StepInterval> step_grid(const PulseSchedule &schedule, double t0, double t1,
                                           double dt, const std::vector<double> &samples) {
    if (!(dt > 0.0)) throw ParameterError("time step must be positive");
    if (t1 < t0) throw ParameterError("evolution end precedes start");
    std::vector<double> pts{t0, t1};
    for (double b : schedule.breakpoints())
        if (b > t0 && b < t1) pts.push_back(b);
    for (double s : samples) {
        if (s < t0 - 1e-12 || s > t1 + 1e-12)
            throw ParameterError("sample time " + std::to_string(s) + " outside evolution window");
        pts.push_back(std::clamp(s, t0, t1));
    }
    std::sort(pts.begin(), pts.end());
    std::vector<double> uniq;
    for (double p : pts)
        if (uniq.empty() || p - uniq.back() > 1e-12) uniq.push_back(p);
    std::vector<double> sorted_samples = samples;
    sorted_samples.push_back(t1);
    std::sort(sorted_samples.begin(), sorted_samples.end());
    std::vector<StepInterval> grid;
    for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
        const double a = uniq[i], b = uniq[i + 1];
        const int n = std::max(1, static_cast<int>(std::ceil((b - a) / dt - 1e-9)));
        const bool samp = std::any_of(sorted_samples.begin(), sorted_samples.end(),
                                      [&](double s) { return std::abs(s - b) <= 1e-12; });
        grid.push_back({a, b, n, samp});
    }
    return grid;
}

inline bool all_finite(const Matrix &m) {
    const cplx s = m.sum();
    return std::isfinite(s.real()) && std::isfinite(s.imag()) && m.allFinite();
}

using RowMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealRowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Collapse channels in the form the RK4 right-hand side consumes. Loss and gain
// operators have at most one entry per row: (c x c^dag)_ij = w_i w_j^* x_{s_i s_j}.
struct Dissipator {
    struct Jump {
        int mode;
        std::vector<int> rows, src;
        std::vector<cplx> w;
    };
    std::vector<Jump> jumps;
    RealVector decay_diag[2][2]; // [mode][dephasing on?]: diagonal of sum c^dag c
    RealRowMatrix dephasing_kernel[2];

    Dissipator(const SystemParams &params, const Dims &dims) {
        const int d = total_dim(dims);
        for (int i = 0; i < 2; ++i) {
            decay_diag[i][0] = RealVector::Zero(d);
            decay_diag[i][1] = RealVector::Zero(d);
            dephasing_kernel[i] = RealRowMatrix::Zero(d, d);
        }
        for (const CollapseOperator &c : collapse_operators(params)) {
            const Matrix cdc = c.op.data().adjoint() * c.op.data();
            const RealVector diag = cdc.diagonal().real();
            if (c.kind == CollapseKind::dephasing) {
                decay_diag[c.mode][1] += diag;
                const RealVector n = c.op.data().diagonal().real();
                dephasing_kernel[c.mode] = n * n.transpose();
                continue;
            }
            decay_diag[c.mode][0] += diag;
            decay_diag[c.mode][1] += diag;
            Jump j{c.mode, {}, {}, {}};
            const Matrix &m = c.op.data();
            for (int r = 0; r < d; ++r) {
                int col = -1;
                for (int k = 0; k < d; ++k) {
                    if (m(r, k) == cplx(0.0)) continue;
                    if (col >= 0) throw Error("jump operator has more than one entry per row");
                    col = k;
                }
                if (col < 0) continue;
                j.rows.push_back(r);
                j.src.push_back(col);
                j.w.push_back(m(r, col));
            }
            jumps.push_back(std::move(j));
        }
    }

    // out += scale * c x c^dag for every jump.
    void apply_jumps(const RowMatrix &x, RowMatrix &out, double scale) const {
        for (const Jump &j : jumps) {
            const std::size_t n = j.rows.size();
            for (std::size_t a = 0; a < n; ++a) {
                const cplx wa = scale * j.w[a];
                const cplx *xr = x.data() + static_cast<std::ptrdiff_t>(j.src[a]) * x.cols();
                cplx *o = out.data() + static_cast<std::ptrdiff_t>(j.rows[a]) * out.cols();
                for (std::size_t b = 0; b < n; ++b) o[j.rows[b]] += wa * std::conj(j.w[b]) * xr[j.src[b]];
            }
        }
    }
};

// m <- m + m^dag in place.
inline void add_adjoint_in_place(RowMatrix &m) {
    const Eigen::Index d = m.rows();
    for (Eigen::Index i = 0; i < d; ++i) {
        m(i, i) = 2.0 * m(i, i).real();
        for (Eigen::Index j = i + 1; j < d; ++j) {
            const cplx v = m(i, j) + std::conj(m(j, i));
            m(i, j) = v;
            m(j, i) = std::conj(v);
        }
    }
}

} // namespace detail

namespace detail {

inline std::vector<double> sample_list(const EvolveOptions &o, double t1) {
    std::vector<double> s = o.sample_times;
    s.push_back(o.t_start);
    s.push_back(t1);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end(), [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
            s.end());
    return s;
}

inline void record(Trajectory &tr, const EvolveOptions &o, double t, const QuantumState &s) {
    tr.times.push_back(t);
    for (const auto &[name, op] : o.observables) tr.observables[name].push_back(s.expectation(op));
    if (o.store_states) tr.states.push_back(s);
    if (o.on_sample) o.on_sample(t, s);
}

inline void init_trajectory(Trajectory &tr, const EvolveOptions &o) {
    for (const auto &[name, op] : o.observables) {
        tr.observable_names.push_back(name);
        tr.observables[name];
    }
}

} // namespace detail

// Fixed-step RK4 on d psi/dt = -i H(t) psi. With interaction_picture the diagonal
// (Kerr plus detunings at each step midpoint) is propagated exactly and RK4
// handles the remainder.
inline Trajectory evolve_unitary(const QuantumState &psi0, const SystemParams &params,
                                 const PulseSchedule &schedule, const EvolveOptions &opt) {
    if (!psi0.is_ket()) throw Error("evolve_unitary needs a ket");
    if (psi0.dims() != params.dims())
        throw DimensionError("state dims " + dims_string(psi0.dims()) + " vs model " +
                             dims_string(params.dims()));
    if (std::abs(psi0.vector().norm() - 1.0) > 1e-10) throw NumericalError("initial ket not normalized");
    const HamiltonianModel model(params);
    const double t1 = opt.t_end < 0.0 ? schedule.total_duration() : opt.t_end;
    const auto samples = detail::sample_list(opt, t1);
    const auto grid = detail::step_grid(schedule, opt.t_start, t1, opt.dt.value_or(kUnitaryDt), samples);

    Trajectory tr;
    detail::init_trajectory(tr, opt);
    Vector psi = psi0.vector();
    const Dims dims = params.dims();
    detail::record(tr, opt, opt.t_start, psi0);

    SparseMatrix V = model.pattern();
    Vector half_phase, diag;
    RealVector frame = RealVector::Zero(model.dim());
    Vector k1, k2, k3, k4, psi_i, tmp;
    for (const auto &iv : grid) {
        const auto active = schedule.active(0.5 * (iv.a + iv.b));
        const double h = (iv.b - iv.a) / iv.steps;
        auto f = [&](double t, const Vector &x, Vector &out) {
            model.assemble(evaluate_controls(params, active, t), t, V, -kI * h, &diag);
            out.noalias() = V * x;
        };
        for (int s = 0; s < iv.steps; ++s) {
            const double t = iv.a + s * h;
            if (opt.interaction_picture)
                frame = model.frame_diagonal(evaluate_controls(params, active, t + 0.5 * h));
            half_phase = (frame * (-0.5 * h)).unaryExpr([](double x) { return std::polar(1.0, x); });
            diag = (-kI * h) * (model.kerr_diagonal() - frame).cast<cplx>();
            psi_i = half_phase.cwiseProduct(psi);
            f(t, psi, tmp);
            k1 = half_phase.cwiseProduct(tmp);
            f(t + 0.5 * h, psi_i + 0.5 * k1, k2);
            f(t + 0.5 * h, psi_i + 0.5 * k2, k3);
            tmp = half_phase.cwiseProduct(psi_i + k3);
            f(t + h, tmp, k4);
            psi = half_phase.cwiseProduct(psi_i + k1 / 6.0 + k2 / 3.0 + k3 / 3.0) + k4 / 6.0;
            ++tr.steps;
            if (!psi.allFinite()) throw IntegrationDiverged(t + h, "state vector became non-finite");
        }
        if (iv.sample_at_end) {
            tr.norm_drift = std::max(tr.norm_drift, std::abs(psi.norm() - 1.0));
            detail::record(tr, opt, iv.b, QuantumState::ket_unchecked(dims, psi));
        }
    }
    tr.final_state = QuantumState::ket_unchecked(dims, psi);
    return tr;
}

inline Trajectory evolve_unitary(const QuantumState &psi0, const SystemParams &params,
                                 const PulseSchedule &schedule, double dt = kUnitaryDt) {
    EvolveOptions o;
    o.dt = dt;
    return evolve_unitary(psi0, params, schedule, o);
}

// Fixed-step RK4 on the Lindblad equation, same interaction-picture treatment
// of the diagonal; rho is symmetrized after every step.
inline Trajectory evolve_lindblad(const QuantumState &rho0, const SystemParams &params,
                                  const PulseSchedule &schedule, const EvolveOptions &opt) {
    if (rho0.dims() != params.dims())
        throw DimensionError("state dims " + dims_string(rho0.dims()) + " vs model " +
                             dims_string(params.dims()));
    const HamiltonianModel model(params);
    const detail::Dissipator diss(params, params.dims());
    const double t1 = opt.t_end < 0.0 ? schedule.total_duration() : opt.t_end;
    const auto samples = detail::sample_list(opt, t1);
    const auto grid =
        detail::step_grid(schedule, opt.t_start, t1, opt.dt.value_or(kLindbladDt), samples);
    const int d = model.dim();
    using detail::RowMatrix;

    Trajectory tr;
    detail::init_trajectory(tr, opt);
    const Dims dims = params.dims();
    RowMatrix rho = rho0.density_matrix();
    if (std::abs(rho.trace() - 1.0) > 1e-10) throw NumericalError("initial density matrix trace != 1");
    detail::record(tr, opt, opt.t_start, QuantumState::density_unchecked(dims, Matrix(rho)));
    tr.min_eigenvalue = rho0.is_ket() ? 0.0 : rho0.min_eigenvalue();

    SparseMatrix G = model.pattern();
    RowMatrix phase(d, d), k1, k2, k3, k4, rho_i, tmp, y;
    Vector u;
    RealVector frame = RealVector::Zero(d);
    Vector gdiag(d), gdecay(d);
    detail::RealRowMatrix deph_kernel(d, d);
    for (const auto &iv : grid) {
        const auto active = schedule.active(0.5 * (iv.a + iv.b));
        const double h = (iv.b - iv.a) / iv.steps;
        const Controls c_mid = evaluate_controls(params, active, 0.5 * (iv.a + iv.b));
        bool deph_on[2] = {false, false};
        bool any_deph = false;
        for (int m = 0; m < params.modes; ++m) {
            deph_on[m] = params.gamma_phi(m) > 0.0 &&
                         (params.dephasing_during_pumps || !c_mid.pump_on[m]);
            any_deph = any_deph || deph_on[m];
        }
        RealVector decay = RealVector::Zero(d);
        deph_kernel.setZero();
        for (int m = 0; m < params.modes; ++m) {
            decay += diss.decay_diag[m][deph_on[m] ? 1 : 0];
            if (deph_on[m]) deph_kernel += diss.dephasing_kernel[m];
        }
        // G = -i h (H - frame) - (h/2) sum c^dag c, so h L[x] = G x + (G x)^dag + jumps.
        gdecay = (-0.5 * h) * decay.cast<cplx>();
        const detail::RealRowMatrix deph_scaled = h * deph_kernel;

        auto f = [&](double t, const RowMatrix &x, RowMatrix &out) {
            model.assemble(evaluate_controls(params, active, t), t, G, -kI * h, &gdiag);
            out.noalias() = G * x;
            detail::add_adjoint_in_place(out);
            diss.apply_jumps(x, out, h);
            if (any_deph) out.array() += deph_scaled.array().cast<cplx>() * x.array();
        };
        for (int s = 0; s < iv.steps; ++s) {
            const double t = iv.a + s * h;
            if (opt.interaction_picture)
                frame = model.frame_diagonal(evaluate_controls(params, active, t + 0.5 * h));
            u = (frame * (-0.5 * h)).unaryExpr([](double x) { return std::polar(1.0, x); });
            phase.noalias() = u * u.adjoint();
            gdiag = gdecay + (-kI * h) * (model.kerr_diagonal() - frame).cast<cplx>();
            rho_i = phase.cwiseProduct(rho);
            f(t, rho, tmp);
            k1 = phase.cwiseProduct(tmp);
            f(t + 0.5 * h, rho_i + 0.5 * k1, k2);
            f(t + 0.5 * h, rho_i + 0.5 * k2, k3);
            y = phase.cwiseProduct(rho_i + k3);
            f(t + h, y, k4);
            rho = phase.cwiseProduct(rho_i + k1 / 6.0 + k2 / 3.0 + k3 / 3.0) + k4 / 6.0;
            tmp = rho.adjoint();
            rho = 0.5 * (rho + tmp);
            ++tr.steps;
            if (!detail::all_finite(rho)) throw IntegrationDiverged(t + h, "density matrix became non-finite");
        }
        if (iv.sample_at_end) {
            tr.norm_drift = std::max(tr.norm_drift, std::abs(rho.trace() - 1.0));
            QuantumState st = QuantumState::density_unchecked(dims, Matrix(rho));
            if (opt.check_positivity) {
                const double ev = st.min_eigenvalue();
                tr.min_eigenvalue = std::min(tr.min_eigenvalue, ev);
                if (ev < -1e-6)
                    tr.diagnostics.push_back("negative eigenvalue " + std::to_string(ev) + " at t = " +
                                             std::to_string(iv.b));
            }
            detail::record(tr, opt, iv.b, st);
        }
    }
    tr.final_state = QuantumState::density_unchecked(dims, Matrix(rho));
    if (!opt.check_positivity) {
        const double ev = tr.final_state.min_eigenvalue();
        tr.min_eigenvalue = std::min(tr.min_eigenvalue, ev);
        if (ev < -1e-6)
            tr.diagnostics.push_back("negative eigenvalue " + std::to_string(ev) + " in final state");
    }
    return tr;
}

inline Trajectory evolve_lindblad(const QuantumState &rho0, const SystemParams &params,
                                  const PulseSchedule &schedule, double dt = kLindbladDt) {
    EvolveOptions o;
    o.dt = dt;
    return evolve_lindblad(rho0, params, schedule, o);
}

namespace detail {
inline Matrix psd_sqrt(const Matrix &rho) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
    RealVector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}
} // namespace detail

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const QuantumState &rho, const QuantumState &sigma) {
    if (rho.dims() != sigma.dims())
        throw DimensionError("fidelity: dims " + dims_string(rho.dims()) + " vs " +
                             dims_string(sigma.dims()));
    double f;
    if (rho.is_ket() && sigma.is_ket()) {
        f = std::norm(rho.vector().dot(sigma.vector()));
    } else if (rho.is_ket()) {
        const Vector v = rho.vector();
        f = (v.adjoint() * sigma.data() * v)(0, 0).real();
    } else if (sigma.is_ket()) {
        const Vector v = sigma.vector();
        f = (v.adjoint() * rho.data() * v)(0, 0).real();
    } else {
        const Matrix s = detail::psd_sqrt(rho.data());
        Matrix m = s * sigma.data() * s;
        m = 0.5 * (m + m.adjoint().eval());
        Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
        const double tr = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
        f = tr * tr;
    }
    return std::clamp(f, 0.0, 1.0);
}

// Fidelity to (|a> + e^{i phi}|b>)/sqrt2 maximized over phi (virtual-Z freedom).
inline double phase_aligned_fidelity(const QuantumState &rho, const Vector &a, const Vector &b) {
    const Matrix r = rho.density_matrix();
    const double paa = (a.adjoint() * r * a)(0, 0).real();
    const double pbb = (b.adjoint() * r * b)(0, 0).real();
    const double coh = std::abs((a.adjoint() * r * b)(0, 0));
    return std::clamp(0.5 * (paa + pbb) + coh, 0.0, 1.0);
}

// Two-qubit gate of the cat pair in basis {|0C0C>, |0C1C>, |1C0C>, |1C1C>}.
inline Operator gate_unitary_reference() {
    Matrix u = Matrix::Zero(4, 4);
    const double s = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < 4; ++i) u(i, i) = s;
    u(0, 3) = u(3, 0) = kI * s;
    u(1, 2) = u(2, 1) = kI * s;
    return {{2, 2}, u};
}

} // namespace kerrcat
