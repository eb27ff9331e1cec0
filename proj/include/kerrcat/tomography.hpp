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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "kerrcat/evolve.hpp"
#include "kerrcat/wigner.hpp"

namespace kerrcat {

struct ReconstructionConfig {
    Dims dims{8, 8};
    double learning_rate = 0.01;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    int max_iterations = 10000;
    double tolerance = 1e-10; // loss improvement required over `patience` iterations
    int patience = 200;
    int restarts = 3;
    std::uint64_t seed = 7;

    void validate() const {
        if (dims.empty() || dims.size() > 2) throw ConfigError("reconstruction needs one or two modes");
        for (int d : dims)
            if (d < 2 || d > kMaxModeDim) throw ConfigError("reconstruction dims must lie in [2, 64]");
        if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
        if (max_iterations < 1 || restarts < 1 || patience < 1)
            throw ConfigError("iteration counts must be positive");
    }
};

inline void to_json(nlohmann::json &j, const ReconstructionConfig &c) {
    j = nlohmann::json{{"dims", c.dims},           {"learning_rate", c.learning_rate},
                       {"beta1", c.beta1},         {"beta2", c.beta2},
                       {"epsilon", c.epsilon},     {"max_iterations", c.max_iterations},
                       {"tolerance", c.tolerance}, {"patience", c.patience},
                       {"restarts", c.restarts},   {"seed", c.seed}};
}

inline void from_json(const nlohmann::json &j, ReconstructionConfig &c) {
    nlohmann::json ref = c;
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ref.contains(it.key())) throw ConfigError("unknown tomography option '" + it.key() + "'");
    c.dims = j.value("dims", c.dims);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.patience = j.value("patience", c.patience);
    c.restarts = j.value("restarts", c.restarts);
    c.seed = j.value("seed", c.seed);
}

struct ReconstructionResult {
    QuantumState rho;
    double loss = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> loss_history;   // winning restart
    std::vector<double> restart_losses; // best loss of every restart
    std::optional<double> fidelity;

    void write_report(const std::string &dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        nlohmann::json r{{"loss", loss},
                         {"iterations", iterations},
                         {"converged", converged},
                         {"restart_losses", restart_losses},
                         {"dims", rho.dims()},
                         {"rho_file", "rho.txt"},
                         {"loss_curve_file", "loss_curve.csv"}};
        if (fidelity) r["fidelity"] = *fidelity;
        std::ofstream(fs::path(dir) / "reconstruction.json") << r.dump(2) << '\n';
        std::ofstream lc(fs::path(dir) / "loss_curve.csv");
        lc.precision(12);
        lc << "iteration,loss\n";
        for (std::size_t k = 0; k < loss_history.size(); ++k) lc << k << ',' << loss_history[k] << '\n';
        write_complex_matrix((fs::path(dir) / "rho.txt").string(), rho.density_matrix(), rho.dims());
    }
};

class ReconstructionDiverged : public NumericalError {
  public:
    ReconstructionDiverged(const std::string &what, QuantumState last)
        : NumericalError(what), last_(std::move(last)) {}
    const QuantumState &last_iterate() const { return last_; }

  private:
    QuantumState last_;
};

// Lower triangle kept, diagonal made real.
inline Matrix project_T(const Matrix &t) {
    if (t.rows() != t.cols()) throw DimensionError("project_T needs a square matrix");
    Matrix out = t.triangularView<Eigen::Lower>();
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, i) = out(i, i).real();
    return out;
}

inline QuantumState rho_from_T(const Matrix &t, const Dims &dims) {
    if (t.rows() != t.cols() || t.rows() != total_dim(dims))
        throw DimensionError("rho_from_T: matrix size does not match dims " + dims_string(dims));
    const double s = t.squaredNorm();
    if (!(s > 0.0)) throw NumericalError("rho_from_T: zero matrix is a degenerate parametrization");
    Matrix rho = t.adjoint() * t / s;
    rho = 0.5 * (rho + rho.adjoint().eval());
    return QuantumState::density_unchecked(dims, std::move(rho));
}

inline RealVector predict_dataset(const QuantumState &rho, const std::vector<WignerGrid> &grids) {
    return WignerMap(grids, rho.dims()).apply(rho.density_matrix());
}

// Zero-padded copy of a state in larger per-mode dimensions.
inline QuantumState pad_state(const QuantumState &s, const Dims &dims) {
    if (dims.size() != s.dims().size()) throw DimensionError("pad_state: mode count mismatch");
    if (dims == s.dims()) return s.as_density();
    const Matrix r = s.density_matrix();
    const int d = total_dim(dims);
    Matrix out = Matrix::Zero(d, d);
    const Dims &old = s.dims();
    for (int m = 0; m < static_cast<int>(dims.size()); ++m)
        if (dims[m] < old[m]) throw DimensionError("pad_state: target dims smaller than state dims");
    auto index = [&](int flat, const Dims &from, const Dims &to) {
        if (from.size() == 1) return flat;
        return (flat / from[1]) * to[1] + flat % from[1];
    };
    for (int i = 0; i < r.rows(); ++i)
        for (int j = 0; j < r.cols(); ++j) out(index(i, old, dims), index(j, old, dims)) = r(i, j);
    return QuantumState::density_unchecked(dims, std::move(out));
}

// Fidelity between states of possibly different truncations (both padded to the larger one).
inline double fidelity_across_dims(const QuantumState &a, const QuantumState &b) {
    Dims d = a.dims();
    if (d.size() != b.dims().size()) throw DimensionError("fidelity: mode count mismatch");
    for (std::size_t m = 0; m < d.size(); ++m) d[m] = std::max(d[m], b.dims()[m]);
    const QuantumState pa = a.dims() == d ? a : pad_state(a, d);
    const QuantumState pb = b.dims() == d ? b : pad_state(b, d);
    return fidelity(pa, pb);
}

// Mean-squared-error loss of a Cholesky-style factor against measured pixel values.
class TomographyLoss {
  public:
    TomographyLoss(const WignerMap &map, RealVector data) : map_(map), data_(std::move(data)) {
        if (data_.size() != map_.pixels()) throw DimensionError("dataset size does not match grid list");
    }

    double value(const Matrix &t) const {
        const RealVector r = map_.apply(rho_from_T(t, map_.dims()).data()) - data_;
        return r.squaredNorm() / static_cast<double>(r.size());
    }

    // Loss and its gradient dL/dRe(T) + i dL/dIm(T).
    double value_and_gradient(const Matrix &t, Matrix &grad) const {
        const double s = t.squaredNorm();
        if (!(s > 0.0)) throw NumericalError("tomography factor collapsed to zero");
        Matrix rho = t.adjoint() * t / s;
        const RealVector r = map_.apply(rho) - data_;
        const double n = static_cast<double>(r.size());
        Matrix e = map_.adjoint(r * (2.0 / n));
        const cplx tr = (e.cwiseProduct(rho.transpose())).sum();
        e.diagonal().array() -= tr.real();
        grad.noalias() = (2.0 / s) * (t * e);
        return r.squaredNorm() / n;
    }

    const WignerMap &map() const { return map_; }

  private:
    const WignerMap &map_;
    RealVector data_;
};

namespace detail {

struct AdamRun {
    Matrix t;
    double best_loss = std::numeric_limits<double>::infinity();
    Matrix best_t;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
};

inline AdamRun adam_run(const TomographyLoss &loss, const ReconstructionConfig &cfg, std::uint64_t seed) {
    const int d = total_dim(cfg.dims);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / d));
    AdamRun run;
    run.t = Matrix(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) run.t(i, j) = cplx(normal(rng), normal(rng));
    run.t = project_T(run.t);
    RealMatrix m_re = RealMatrix::Zero(d, d), m_im = m_re, v_re = m_re, v_im = m_re;
    Matrix grad(d, d);
    Matrix last_finite = run.t;
    for (int k = 1; k <= cfg.max_iterations; ++k) {
        const double l = loss.value_and_gradient(run.t, grad);
        if (!std::isfinite(l) || !grad.allFinite())
            throw ReconstructionDiverged("tomography loss became non-finite at iteration " + std::to_string(k),
                                         rho_from_T(last_finite, cfg.dims));
        last_finite = run.t;
        run.history.push_back(l);
        if (l < run.best_loss) {
            run.best_loss = l;
            run.best_t = run.t;
        }
        run.iterations = k;
        if (k > cfg.patience && run.history[k - 1 - cfg.patience] - l < cfg.tolerance) {
            run.converged = true;
            break;
        }
        const RealMatrix g_re = grad.real(), g_im = grad.imag();
        m_re = cfg.beta1 * m_re + (1.0 - cfg.beta1) * g_re;
        m_im = cfg.beta1 * m_im + (1.0 - cfg.beta1) * g_im;
        v_re = cfg.beta2 * v_re + (1.0 - cfg.beta2) * g_re.cwiseAbs2();
        v_im = cfg.beta2 * v_im + (1.0 - cfg.beta2) * g_im.cwiseAbs2();
        const double c1 = 1.0 - std::pow(cfg.beta1, k), c2 = 1.0 - std::pow(cfg.beta2, k);
        const RealMatrix step_re =
            (m_re / c1).array() / ((v_re / c2).array().sqrt() + cfg.epsilon);
        const RealMatrix step_im =
            (m_im / c1).array() / ((v_im / c2).array().sqrt() + cfg.epsilon);
        Matrix next = run.t;
        next.real() -= cfg.learning_rate * step_re;
        next.imag() -= cfg.learning_rate * step_im;
        run.t = project_T(next);
    }
    return run;
}

} // namespace detail

inline ReconstructionResult reconstruct(const std::vector<WignerGrid> &grids, const RealVector &data,
                                        const ReconstructionConfig &cfg,
                                        const std::optional<QuantumState> &target = std::nullopt) {
    cfg.validate();
    if (grids.empty()) throw ConfigError("reconstruction needs at least one grid");
    const WignerMap map(grids, cfg.dims);
    const TomographyLoss loss(map, data);
    ReconstructionResult res;
    detail::AdamRun best;
    for (int r = 0; r < cfg.restarts; ++r) {
        detail::AdamRun run = detail::adam_run(loss, cfg, detail::splitmix64(cfg.seed + static_cast<std::uint64_t>(r)));
        res.restart_losses.push_back(run.best_loss);
        if (run.best_loss < best.best_loss) best = std::move(run);
    }
    res.rho = rho_from_T(best.best_t, cfg.dims);
    res.loss = best.best_loss;
    res.iterations = best.iterations;
    res.converged = best.converged;
    res.loss_history = std::move(best.history);
    if (target) res.fidelity = fidelity_across_dims(res.rho, *target);
    return res;
}

inline ReconstructionResult reconstruct(const WignerDataset &ds, const ReconstructionConfig &cfg,
                                        const std::optional<QuantumState> &target = std::nullopt) {
    if (ds.grids.empty()) throw ConfigError("dataset has no grids");
    return reconstruct(ds.grids, ds.values(), cfg, target);
}

} // namespace kerrcat
