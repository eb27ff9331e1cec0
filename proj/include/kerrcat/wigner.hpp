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

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kerrcat/fockspace.hpp"

namespace kerrcat {

inline constexpr double kW1Scale = 2.0 / kPi;
inline constexpr double kW2Scale = 4.0 / (kPi * kPi);

// (2/pi) Tr[rho T(alpha)] for a single-mode state.
inline double one_mode_wigner(const QuantumState &rho, cplx alpha) {
    if (rho.dims().size() != 1) throw DimensionError("one_mode_wigner needs a single-mode state");
    const Matrix t = cahill_glauber_T(alpha, rho.dims()[0]).data();
    return kW1Scale * rho.expectation(t);
}

// Same value from the displaced parity (2/pi) Tr[D^dag rho D Pi], with rho
// embedded in a padded space so that the displacement is not truncated.
inline double one_mode_wigner_displaced(const QuantumState &rho, cplx alpha) {
    if (rho.dims().size() != 1) throw DimensionError("one_mode_wigner needs a single-mode state");
    const int N = rho.dims()[0];
    const int np = padded_dim(N, alpha);
    Matrix big = Matrix::Zero(np, np);
    big.topLeftCorner(N, N) = rho.density_matrix();
    const Matrix d = displacement(alpha, np).data();
    const Matrix m = d.adjoint() * big * d;
    double w = 0.0;
    for (int n = 0; n < np; ++n) w += (n % 2 ? -1.0 : 1.0) * m(n, n).real();
    return kW1Scale * w;
}

// (4/pi^2) Tr[rho T(alpha1) (x) T(alpha2)].
inline double two_mode_wigner(const QuantumState &rho, cplx alpha1, cplx alpha2) {
    if (rho.dims().size() != 2) throw DimensionError("two_mode_wigner needs a two-mode state");
    const int n1 = rho.dims()[0], n2 = rho.dims()[1];
    const Matrix a = cahill_glauber_T(alpha1, n1).data();
    const Matrix b = cahill_glauber_T(alpha2, n2).data();
    const Matrix r = rho.density_matrix();
    cplx acc = 0.0;
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n1; ++j) {
            if (a(j, i) == cplx(0.0)) continue;
            cplx s = 0.0;
            for (int k = 0; k < n2; ++k)
                for (int l = 0; l < n2; ++l) s += r(i * n2 + k, j * n2 + l) * b(l, k);
            acc += a(j, i) * s;
        }
    return kW2Scale * acc.real();
}

inline double joint_parity_from_probs(double p_ee, double p_eg, double p_ge, double p_gg) {
    for (double p : {p_ee, p_eg, p_ge, p_gg})
        if (!(p >= 0.0)) throw ParameterError("joint probabilities must be nonnegative");
    if (std::abs(p_ee + p_eg + p_ge + p_gg - 1.0) > 1e-9)
        throw ParameterError("joint probabilities must sum to 1");
    return p_ee + p_gg - p_eg - p_ge;
}

// Readout assignment matrix of one transmon: c(measured, prepared), index 0 = g, 1 = e.
struct Confusion {
    Eigen::Matrix2d c = Eigen::Matrix2d::Identity();

    static Confusion symmetric(double error) {
        Confusion out;
        out.c << 1.0 - error, error, error, 1.0 - error;
        return out;
    }
    void validate() const {
        for (int j = 0; j < 2; ++j) {
            if (c(0, j) < 0.0 || c(1, j) < 0.0 || std::abs(c(0, j) + c(1, j) - 1.0) > 1e-12)
                throw ParameterError("confusion matrix columns must be probability vectors");
        }
    }
    bool is_identity() const { return c == Eigen::Matrix2d::Identity(); }
};

// One measured plot: a 2WF slice (ReRe or ImIm) or a one-mode Wigner function.
struct WignerGrid {
    enum class Kind { rere, imim, one_mode };

    Kind kind = Kind::rere;
    int mode = 0; // one_mode only
    double axis_min = -1.6, axis_max = 1.6;
    int points = 17;
    cplx offset1 = 0.0, offset2 = 0.0;

    RealMatrix values; // points x points
    int shots = 0;     // 0 for ideal values
    Eigen::MatrixXi n_ee, n_eg, n_ge, n_gg;

    static WignerGrid rere(double im1, double im2) {
        WignerGrid g;
        g.kind = Kind::rere;
        g.offset1 = cplx(0.0, im1);
        g.offset2 = cplx(0.0, im2);
        return g;
    }
    static WignerGrid imim(double re1, double re2) {
        WignerGrid g;
        g.kind = Kind::imim;
        g.offset1 = re1;
        g.offset2 = re2;
        return g;
    }
    static WignerGrid one_mode_grid(int mode) {
        WignerGrid g;
        g.kind = Kind::one_mode;
        g.mode = mode;
        return g;
    }

    double axis(int k) const {
        return points == 1 ? axis_min : axis_min + (axis_max - axis_min) * k / (points - 1.0);
    }
    int pixels() const { return points * points; }
    bool two_mode() const { return kind != Kind::one_mode; }

    // Displacements of pixel (i, j). For one-mode grids only the first entry is used
    // (i scans the real part, j the imaginary part).
    std::pair<cplx, cplx> coords(int i, int j) const {
        switch (kind) {
        case Kind::rere: return {axis(i) + offset1, axis(j) + offset2};
        case Kind::imim: return {kI * axis(i) + offset1, kI * axis(j) + offset2};
        default: return {cplx(axis(i), axis(j)), 0.0};
        }
    }
    // Displacement on mode m (0/1) along row/column index k of a two-mode slice.
    cplx mode_coord(int m, int k) const {
        const cplx off = m == 0 ? offset1 : offset2;
        return kind == Kind::rere ? axis(k) + off : kI * axis(k) + off;
    }

    void validate() const {
        if (points < 1) throw ParameterError("grid needs at least one point per axis");
        if (!(axis_max >= axis_min)) throw ParameterError("grid axis max < min");
        if (kind == Kind::rere && (offset1.real() != 0.0 || offset2.real() != 0.0))
            throw ParameterError("ReRe grids take purely imaginary offsets");
        if (kind == Kind::imim && (offset1.imag() != 0.0 || offset2.imag() != 0.0))
            throw ParameterError("ImIm grids take purely real offsets");
        if (kind == Kind::one_mode && mode != 0 && mode != 1) throw ParameterError("grid mode must be 0 or 1");
    }

    std::string label() const {
        std::ostringstream s;
        s.precision(3);
        if (kind == Kind::one_mode) {
            s << "1WF mode " << mode + 1;
        } else {
            s << (kind == Kind::rere ? "ReRe offset (" : "ImIm offset (")
              << (kind == Kind::rere ? offset1.imag() : offset1.real()) << ", "
              << (kind == Kind::rere ? offset2.imag() : offset2.real()) << ")";
        }
        return s.str();
    }

    void write_csv(const std::string &path) const {
        std::ofstream f(path);
        if (!f) throw Error("cannot write " + path);
        f.precision(15);
        f << "re_a1,im_a1,re_a2,im_a2,value";
        if (shots > 0) f << ",shots,n_ee,n_eg,n_ge,n_gg";
        f << '\n';
        for (int i = 0; i < points; ++i)
            for (int j = 0; j < points; ++j) {
                auto [a1, a2] = coords(i, j);
                if (kind == Kind::one_mode && mode == 1) std::swap(a1, a2);
                f << a1.real() << ',' << a1.imag() << ',' << a2.real() << ',' << a2.imag() << ','
                  << values(i, j);
                if (shots > 0)
                    f << ',' << shots << ',' << n_ee(i, j) << ',' << n_eg(i, j) << ',' << n_ge(i, j) << ','
                      << n_gg(i, j);
                f << '\n';
            }
    }

    // Fills values (and counts, if present) from a CSV whose coordinates must match this grid.
    void read_csv(const std::string &path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot read " + path);
        std::string line;
        std::getline(f, line);
        const bool with_shots = line.find("shots") != std::string::npos;
        values = RealMatrix::Zero(points, points);
        if (with_shots) {
            n_ee = n_eg = n_ge = n_gg = Eigen::MatrixXi::Zero(points, points);
        }
        shots = 0;
        int row = 0;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            if (row >= pixels()) throw ConfigError(path + ": more rows than grid pixels");
            std::vector<double> v;
            std::stringstream ss(line);
            std::string tok;
            while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
            if (v.size() != (with_shots ? 10u : 5u)) throw ConfigError(path + ": wrong column count");
            const int i = row / points, j = row % points;
            auto [a1, a2] = coords(i, j);
            if (kind == Kind::one_mode && mode == 1) std::swap(a1, a2);
            if (std::abs(a1 - cplx(v[0], v[1])) > 1e-9 || std::abs(a2 - cplx(v[2], v[3])) > 1e-9)
                throw ConfigError(path + ": pixel coordinates do not match the manifest grid");
            values(i, j) = v[4];
            if (with_shots) {
                shots = static_cast<int>(v[5]);
                n_ee(i, j) = static_cast<int>(v[6]);
                n_eg(i, j) = static_cast<int>(v[7]);
                n_ge(i, j) = static_cast<int>(v[8]);
                n_gg(i, j) = static_cast<int>(v[9]);
            }
            ++row;
        }
        if (row != pixels()) throw ConfigError(path + ": fewer rows than grid pixels");
    }
};

inline std::string grid_kind_name(WignerGrid::Kind k) {
    switch (k) {
    case WignerGrid::Kind::rere: return "rere";
    case WignerGrid::Kind::imim: return "imim";
    default: return "one_mode";
    }
}

inline WignerGrid::Kind grid_kind_from_name(const std::string &s) {
    if (s == "rere") return WignerGrid::Kind::rere;
    if (s == "imim") return WignerGrid::Kind::imim;
    if (s == "one_mode") return WignerGrid::Kind::one_mode;
    throw ConfigError("unknown grid kind '" + s + "'");
}

namespace detail {

inline Matrix partial_trace(const Matrix &rho, const Dims &dims, int keep) {
    return QuantumState::density_unchecked(dims, rho).reduced(keep).data();
}

// Row-vectorized operators: out(a, i*n + j) = op_a(j, i), so that
// Tr[rho op_a] = sum_ij rho(i, j) op_a(j, i) is a dot product with vec(rho).
inline Matrix stack_transposed(const std::vector<Matrix> &ops, int n) {
    Matrix out(ops.size(), n * n);
    for (std::size_t a = 0; a < ops.size(); ++a)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out(a, i * n + j) = ops[a](j, i);
    return out;
}

// Rearranged rho: rt(i*n1 + j, k*n2 + l) = rho(i*n2 + k, j*n2 + l).
inline Matrix realign(const Matrix &rho, int n1, int n2) {
    Matrix rt(n1 * n1, n2 * n2);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n1; ++j)
            for (int k = 0; k < n2; ++k)
                for (int l = 0; l < n2; ++l) rt(i * n1 + j, k * n2 + l) = rho(i * n2 + k, j * n2 + l);
    return rt;
}

inline Matrix unrealign(const Matrix &rt, int n1, int n2) {
    Matrix rho(n1 * n2, n1 * n2);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n1; ++j)
            for (int k = 0; k < n2; ++k)
                for (int l = 0; l < n2; ++l) rho(i * n2 + k, j * n2 + l) = rt(i * n1 + j, k * n2 + l);
    return rho;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

// Linear map rho -> all pixel values of a list of grids, with its adjoint.
// T(alpha) factors are computed once per axis value.
class WignerMap {
  public:
    WignerMap(const std::vector<WignerGrid> &grids, const Dims &dims) : dims_(dims) {
        if (dims.empty() || dims.size() > 2) throw DimensionError("WignerMap needs one or two modes");
        for (const WignerGrid &g : grids) {
            g.validate();
            Block b;
            b.grid = g;
            b.offset = pixels_;
            pixels_ += g.pixels();
            if (g.two_mode()) {
                if (dims.size() != 2) throw DimensionError("two-mode slice on a single-mode state");
                std::vector<Matrix> t1, t2;
                for (int k = 0; k < g.points; ++k) {
                    t1.push_back(cahill_glauber_T(g.mode_coord(0, k), dims[0]).data());
                    t2.push_back(cahill_glauber_T(g.mode_coord(1, k), dims[1]).data());
                }
                b.a = detail::stack_transposed(t1, dims[0]);
                b.b = detail::stack_transposed(t2, dims[1]);
            } else {
                if (g.mode >= static_cast<int>(dims.size())) throw DimensionError("1WF mode out of range");
                std::vector<Matrix> t;
                for (int i = 0; i < g.points; ++i)
                    for (int j = 0; j < g.points; ++j) t.push_back(cahill_glauber_T(g.coords(i, j).first, dims[g.mode]).data());
                b.a = detail::stack_transposed(t, dims[g.mode]);
            }
            blocks_.push_back(std::move(b));
        }
    }

    int pixels() const { return pixels_; }
    const Dims &dims() const { return dims_; }

    RealVector apply(const Matrix &rho) const {
        RealVector out(pixels_);
        const int d = total_dim(dims_);
        if (rho.rows() != d || rho.cols() != d) throw DimensionError("WignerMap: state dimension mismatch");
        Matrix rt;
        Matrix reduced[2];
        for (const Block &b : blocks_) {
            const WignerGrid &g = b.grid;
            if (g.two_mode()) {
                if (rt.size() == 0) rt = detail::realign(rho, dims_[0], dims_[1]);
                const Matrix w = b.a * rt * b.b.transpose();
                for (int i = 0; i < g.points; ++i)
                    for (int j = 0; j < g.points; ++j) out(b.offset + i * g.points + j) = kW2Scale * w(i, j).real();
            } else {
                const int m = g.mode;
                if (reduced[m].size() == 0)
                    reduced[m] = dims_.size() == 1 ? rho : detail::partial_trace(rho, dims_, m);
                const int n = dims_[m];
                Vector vec(n * n);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) vec(i * n + j) = reduced[m](i, j);
                const Vector w = b.a * vec;
                out.segment(b.offset, g.pixels()) = kW1Scale * w.real();
            }
        }
        return out;
    }

    // E = sum_p r_p M_p, where value_p = Tr[rho M_p].
    Matrix adjoint(const RealVector &r) const {
        if (r.size() != pixels_) throw DimensionError("WignerMap: residual size mismatch");
        const int d = total_dim(dims_);
        Matrix e = Matrix::Zero(d, d);
        Matrix et;
        Matrix em[2];
        for (const Block &b : blocks_) {
            const WignerGrid &g = b.grid;
            const RealVector seg = r.segment(b.offset, g.pixels());
            if (g.two_mode()) {
                const int p = g.points;
                Matrix rm(p, p);
                for (int i = 0; i < p; ++i)
                    for (int j = 0; j < p; ++j) rm(i, j) = kW2Scale * seg(i * p + j);
                // a holds op^T rows; conj gives op rows for Hermitian op
                const Matrix part = b.a.conjugate().transpose() * rm * b.b.conjugate();
                if (et.size() == 0) et = part;
                else et += part;
            } else {
                const int m = g.mode, n = dims_[m];
                const Vector acc = b.a.conjugate().transpose() * (kW1Scale * seg).cast<cplx>();
                Matrix op(n, n);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) op(i, j) = acc(i * n + j);
                if (em[m].size() == 0) em[m] = op;
                else em[m] += op;
            }
        }
        if (et.size()) e += detail::unrealign(et, dims_[0], dims_[1]);
        for (int m = 0; m < 2; ++m)
            if (em[m].size()) e += dims_.size() == 1 ? em[m] : embed(em[m], m, dims_);
        return e;
    }

  private:
    struct Block {
        WignerGrid grid;
        int offset = 0;
        Matrix a, b;
    };
    Dims dims_;
    std::vector<Block> blocks_;
    int pixels_ = 0;
};

struct MeasureOptions {
    std::optional<int> shots; // unset: ideal values
    std::uint64_t seed = 0;
    Confusion readout1, readout2;
};

namespace detail {

// Outcome probabilities {ee, eg, ge, gg} from single and joint parities, through readout.
inline std::array<double, 4> outcome_probs(double p1, double p2, double p12, const Confusion &c1,
                                           const Confusion &c2) {
    // true-outcome probabilities indexed [t1][t2] with 0 = g (+1), 1 = e (-1)
    double q[2][2];
    q[1][1] = 0.25 * (1.0 - p1 - p2 + p12);
    q[1][0] = 0.25 * (1.0 - p1 + p2 - p12);
    q[0][1] = 0.25 * (1.0 + p1 - p2 - p12);
    q[0][0] = 0.25 * (1.0 + p1 + p2 + p12);
    double m[2][2] = {{0, 0}, {0, 0}};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int x = 0; x < 2; ++x)
                for (int y = 0; y < 2; ++y) m[a][b] += c1.c(a, x) * c2.c(b, y) * std::max(0.0, q[x][y]);
    const double s = m[0][0] + m[0][1] + m[1][0] + m[1][1];
    return {m[1][1] / s, m[1][0] / s, m[0][1] / s, m[0][0] / s};
}

inline std::array<int, 4> multinomial(int shots, const std::array<double, 4> &p, std::mt19937_64 &rng) {
    std::array<int, 4> n{0, 0, 0, 0};
    int left = shots;
    double rest = 1.0;
    for (int k = 0; k < 3; ++k) {
        if (left == 0 || rest <= 0.0) break;
        const double q = std::clamp(p[k] / rest, 0.0, 1.0);
        std::binomial_distribution<int> b(left, q);
        n[k] = b(rng);
        left -= n[k];
        rest -= p[k];
    }
    n[3] = left;
    return n;
}

} // namespace detail

// Evaluates a grid on rho. Shot mode samples {ee, eg, ge, gg} per pixel; a one-mode
// grid records its single transmon's counts as n_gg (g) and n_ee (e).
inline WignerGrid measure_grid(const QuantumState &rho, WignerGrid grid, const MeasureOptions &opt = {},
                               int grid_index = 0) {
    grid.validate();
    if (opt.shots && *opt.shots <= 0) throw ParameterError("shots must be positive");
    opt.readout1.validate();
    opt.readout2.validate();
    const Matrix r = rho.density_matrix();
    const WignerMap joint({grid}, rho.dims());
    const RealVector ideal = joint.apply(r);
    const int p = grid.points;
    grid.values = RealMatrix(p, p);
    grid.shots = 0;
    if (!opt.shots) {
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) grid.values(i, j) = ideal(i * p + j);
        return grid;
    }
    const int shots = *opt.shots;
    grid.shots = shots;
    grid.n_ee = grid.n_eg = grid.n_ge = grid.n_gg = Eigen::MatrixXi::Zero(p, p);
    RealVector par1, par2;
    if (grid.two_mode()) {
        const QuantumState r1 = rho.reduced(0), r2 = rho.reduced(1);
        par1.resize(p);
        par2.resize(p);
        for (int k = 0; k < p; ++k) {
            par1(k) = one_mode_wigner(r1, grid.mode_coord(0, k)) / kW1Scale;
            par2(k) = one_mode_wigner(r2, grid.mode_coord(1, k)) / kW1Scale;
        }
    }
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) {
            const std::uint64_t key = detail::splitmix64(
                opt.seed ^ detail::splitmix64((static_cast<std::uint64_t>(grid_index) << 32) ^ (i * p + j)));
            std::mt19937_64 rng(key);
            if (grid.two_mode()) {
                const double p12 = ideal(i * p + j) / kW2Scale;
                const auto probs = detail::outcome_probs(par1(i), par2(j), p12, opt.readout1, opt.readout2);
                const auto n = detail::multinomial(shots, probs, rng);
                grid.n_ee(i, j) = n[0];
                grid.n_eg(i, j) = n[1];
                grid.n_ge(i, j) = n[2];
                grid.n_gg(i, j) = n[3];
                grid.values(i, j) =
                    kW2Scale * joint_parity_from_probs(double(n[0]) / shots, double(n[1]) / shots,
                                                       double(n[2]) / shots, double(n[3]) / shots);
            } else {
                const Confusion &c = grid.mode == 0 ? opt.readout1 : opt.readout2;
                const double par = ideal(i * p + j) / kW1Scale;
                const double pg_true = std::clamp(0.5 * (1.0 + par), 0.0, 1.0);
                const double pg = c.c(0, 0) * pg_true + c.c(0, 1) * (1.0 - pg_true);
                std::binomial_distribution<int> b(shots, std::clamp(pg, 0.0, 1.0));
                const int ng = b(rng);
                grid.n_gg(i, j) = ng;
                grid.n_ee(i, j) = shots - ng;
                grid.values(i, j) = kW1Scale * (2.0 * ng - shots) / shots;
            }
        }
    return grid;
}

inline const std::vector<std::pair<double, double>> &standard_offsets() {
    static const std::vector<std::pair<double, double>> v = {
        {0.0, 0.0}, {0.0, 0.82}, {-1.10, 1.07}, {-1.35, -1.32}, {1.35, -0.82}};
    return v;
}

// Ordered list of plots used for reconstruction: 5 ReRe, 5 ImIm, 1WF of each mode.
inline std::vector<WignerGrid> standard_grids() {
    std::vector<WignerGrid> g;
    for (auto [a, b] : standard_offsets()) g.push_back(WignerGrid::rere(a, b));
    for (auto [a, b] : standard_offsets()) g.push_back(WignerGrid::imim(a, b));
    g.push_back(WignerGrid::one_mode_grid(0));
    g.push_back(WignerGrid::one_mode_grid(1));
    return g;
}

struct WignerDataset {
    std::vector<WignerGrid> grids;
    std::uint64_t seed = 0;
    nlohmann::json metadata = nlohmann::json::object();

    int shots() const { return grids.empty() ? 0 : grids.front().shots; }

    RealVector values() const {
        int total = 0;
        for (const auto &g : grids) total += g.pixels();
        RealVector v(total);
        int o = 0;
        for (const auto &g : grids) {
            for (int i = 0; i < g.points; ++i)
                for (int j = 0; j < g.points; ++j) v(o + i * g.points + j) = g.values(i, j);
            o += g.pixels();
        }
        return v;
    }

    // Writes <dir>/manifest.json and one CSV per grid; returns the manifest path.
    std::string write(const std::string &dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        nlohmann::json m;
        m["format"] = "kerrcat-wigner-dataset";
        m["version"] = 1;
        m["shots"] = shots() > 0 ? nlohmann::json(shots()) : nlohmann::json("ideal");
        m["seed"] = seed;
        m["metadata"] = metadata;
        m["grids"] = nlohmann::json::array();
        for (std::size_t k = 0; k < grids.size(); ++k) {
            const WignerGrid &g = grids[k];
            char name[64];
            std::snprintf(name, sizeof name, "grid_%02zu_%s.csv", k, grid_kind_name(g.kind).c_str());
            g.write_csv((fs::path(dir) / name).string());
            nlohmann::json e{{"file", name},
                             {"kind", grid_kind_name(g.kind)},
                             {"axis", {{"min", g.axis_min}, {"max", g.axis_max}, {"points", g.points}}}};
            if (g.kind == WignerGrid::Kind::one_mode) e["mode"] = g.mode + 1;
            else if (g.kind == WignerGrid::Kind::rere) e["offset"] = {g.offset1.imag(), g.offset2.imag()};
            else e["offset"] = {g.offset1.real(), g.offset2.real()};
            m["grids"].push_back(e);
        }
        const std::string path = (fs::path(dir) / "manifest.json").string();
        std::ofstream f(path);
        f << m.dump(2) << '\n';
        return path;
    }

    static WignerDataset read(const std::string &manifest) {
        namespace fs = std::filesystem;
        std::ifstream f(manifest);
        if (!f) throw ConfigError("cannot read dataset manifest " + manifest);
        nlohmann::json m;
        try {
            m = nlohmann::json::parse(f);
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError(manifest + ": " + e.what());
        }
        if (m.value("format", "") != "kerrcat-wigner-dataset")
            throw ConfigError(manifest + " is not a Wigner dataset manifest");
        WignerDataset ds;
        ds.seed = m.value("seed", std::uint64_t{0});
        ds.metadata = m.value("metadata", nlohmann::json::object());
        const fs::path base = fs::path(manifest).parent_path();
        for (const auto &e : m.at("grids")) {
            WignerGrid g;
            g.kind = grid_kind_from_name(e.at("kind"));
            g.axis_min = e.at("axis").at("min");
            g.axis_max = e.at("axis").at("max");
            g.points = e.at("axis").at("points");
            if (g.kind == WignerGrid::Kind::one_mode) {
                g.mode = e.at("mode").get<int>() - 1;
            } else {
                const double o1 = e.at("offset").at(0), o2 = e.at("offset").at(1);
                g.offset1 = g.kind == WignerGrid::Kind::rere ? cplx(0.0, o1) : cplx(o1, 0.0);
                g.offset2 = g.kind == WignerGrid::Kind::rere ? cplx(0.0, o2) : cplx(o2, 0.0);
            }
            g.validate();
            g.read_csv((base / e.at("file").get<std::string>()).string());
            ds.grids.push_back(std::move(g));
        }
        return ds;
    }
};

inline WignerDataset measure_dataset(const QuantumState &rho, const std::vector<WignerGrid> &grids,
                                     const MeasureOptions &opt = {}) {
    WignerDataset ds;
    ds.seed = opt.seed;
    for (std::size_t k = 0; k < grids.size(); ++k)
        ds.grids.push_back(measure_grid(rho, grids[k], opt, static_cast<int>(k)));
    return ds;
}

inline WignerDataset standard_dataset(const QuantumState &rho12, const MeasureOptions &opt = {}) {
    if (rho12.dims().size() != 2) throw DimensionError("standard_dataset needs a two-mode state");
    return measure_dataset(rho12, standard_grids(), opt);
}

} // namespace kerrcat
