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
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "kerrcat/core.hpp"

namespace kerrcat {

inline constexpr int kMaxModeDim = 64;
inline constexpr int kMaxPaddedDim = 256;

using Dims = std::vector<int>;

inline int total_dim(const Dims &dims) {
    return std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<int>());
}

inline std::string dims_string(const Dims &dims) {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(dims[i]);
    }
    return s;
}

class Operator {
  public:
    Operator() = default;
    Operator(Dims dims, Matrix data) : dims_(std::move(dims)), data_(std::move(data)) {
        const int n = total_dim(dims_);
        if (data_.rows() != n || data_.cols() != n)
            throw DimensionError("operator matrix is " + std::to_string(data_.rows()) + "x" +
                                 std::to_string(data_.cols()) + ", dims " + dims_string(dims_));
    }

    const Dims &dims() const { return dims_; }
    const Matrix &data() const { return data_; }
    Matrix &data() { return data_; }
    int size() const { return static_cast<int>(data_.rows()); }
    cplx operator()(int r, int c) const { return data_(r, c); }

    Operator adjoint() const { return {dims_, data_.adjoint()}; }

    bool is_hermitian(double tol = 1e-12) const {
        return (data_ - data_.adjoint()).cwiseAbs().maxCoeff() <= tol;
    }
    bool is_unitary(double tol = 1e-10) const {
        return (data_.adjoint() * data_ - Matrix::Identity(size(), size())).cwiseAbs().maxCoeff() <=
               tol;
    }

    friend Operator operator*(const Operator &a, const Operator &b) {
        check_same(a, b);
        return {a.dims_, a.data_ * b.data_};
    }
    friend Operator operator+(const Operator &a, const Operator &b) {
        check_same(a, b);
        return {a.dims_, a.data_ + b.data_};
    }
    friend Operator operator-(const Operator &a, const Operator &b) {
        check_same(a, b);
        return {a.dims_, a.data_ - b.data_};
    }
    friend Operator operator*(cplx s, const Operator &a) { return {a.dims_, s * a.data_}; }

  private:
    static void check_same(const Operator &a, const Operator &b) {
        if (a.dims_ != b.dims_)
            throw DimensionError("operator dims " + dims_string(a.dims_) + " vs " +
                                 dims_string(b.dims_));
    }

    Dims dims_;
    Matrix data_;
};

class QuantumState {
  public:
    enum class Kind { ket, density };

    QuantumState() = default;

    static QuantumState ket(Dims dims, Vector psi, double tol = 1e-10) {
        QuantumState s;
        s.dims_ = std::move(dims);
        s.kind_ = Kind::ket;
        if (psi.size() != total_dim(s.dims_))
            throw DimensionError("ket length " + std::to_string(psi.size()) + " vs dims " +
                                 dims_string(s.dims_));
        s.data_ = std::move(psi);
        if (std::abs(s.data_.norm() - 1.0) > tol)
            throw NumericalError("ket norm " + std::to_string(s.data_.norm()) + " is not 1");
        return s;
    }

    static QuantumState density(Dims dims, Matrix rho, double tol = 1e-10) {
        QuantumState s;
        s.dims_ = std::move(dims);
        s.kind_ = Kind::density;
        const int n = total_dim(s.dims_);
        if (rho.rows() != n || rho.cols() != n)
            throw DimensionError("density matrix size does not match dims " +
                                 dims_string(s.dims_));
        s.data_ = std::move(rho);
        if ((s.data_ - s.data_.adjoint()).cwiseAbs().maxCoeff() > tol)
            throw NumericalError("density matrix is not Hermitian");
        if (std::abs(s.data_.trace() - 1.0) > tol)
            throw NumericalError("density matrix trace " + std::to_string(s.data_.trace().real()));
        return s;
    }

    // No invariant checks; used for intermediate integrator output.
    static QuantumState density_unchecked(Dims dims, Matrix rho) {
        QuantumState s;
        s.dims_ = std::move(dims);
        s.kind_ = Kind::density;
        s.data_ = std::move(rho);
        return s;
    }

    static QuantumState ket_unchecked(Dims dims, Vector psi) {
        QuantumState s;
        s.dims_ = std::move(dims);
        s.kind_ = Kind::ket;
        s.data_ = std::move(psi);
        return s;
    }

    const Dims &dims() const { return dims_; }
    Kind kind() const { return kind_; }
    bool is_ket() const { return kind_ == Kind::ket; }
    int size() const { return total_dim(dims_); }

    const Matrix &data() const { return data_; }

    Vector vector() const {
        if (!is_ket()) throw Error("state is not a ket");
        return data_.col(0);
    }

    Matrix density_matrix() const {
        if (is_ket()) return data_ * data_.adjoint();
        return data_;
    }

    QuantumState as_density() const {
        if (!is_ket()) return *this;
        return density_unchecked(dims_, density_matrix());
    }

    double min_eigenvalue() const {
        if (is_ket()) return 0.0;
        Eigen::SelfAdjointEigenSolver<Matrix> es(data_, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    double expectation(const Matrix &op) const {
        if (is_ket()) return (data_.col(0).adjoint() * op * data_.col(0))(0, 0).real();
        return (op.transpose().cwiseProduct(data_)).sum().real();
    }

    // Reduced density matrix of one mode of a two-mode state.
    QuantumState reduced(int mode) const {
        if (dims_.size() != 2) throw DimensionError("reduced() needs a two-mode state");
        if (mode != 0 && mode != 1) throw DimensionError("mode index must be 0 or 1");
        const int n1 = dims_[0], n2 = dims_[1];
        Matrix rho = density_matrix();
        Matrix out = Matrix::Zero(dims_[mode], dims_[mode]);
        if (mode == 0) {
            for (int i = 0; i < n1; ++i)
                for (int j = 0; j < n1; ++j)
                    for (int k = 0; k < n2; ++k) out(i, j) += rho(i * n2 + k, j * n2 + k);
        } else {
            for (int i = 0; i < n2; ++i)
                for (int j = 0; j < n2; ++j)
                    for (int k = 0; k < n1; ++k) out(i, j) += rho(k * n2 + i, k * n2 + j);
        }
        return density_unchecked({dims_[mode]}, std::move(out));
    }

    // Photon-number distribution of a single-mode state.
    RealVector populations() const {
        if (is_ket()) return data_.col(0).cwiseAbs2();
        return data_.diagonal().real();
    }

  private:
    Dims dims_;
    Kind kind_ = Kind::ket;
    Matrix data_;
};

namespace detail {

inline void require_dim(int N, int min_dim, const char *what) {
    if (N < min_dim)
        throw DimensionError(std::string(what) + ": dimension " + std::to_string(N) +
                             " is below " + std::to_string(min_dim));
    if (N > kMaxModeDim)
        throw DimensionError(std::string(what) + ": dimension " + std::to_string(N) +
                             " exceeds " + std::to_string(kMaxModeDim));
}

// Generalized Laguerre L_n^{(k)}(x) by upward recurrence.
inline double laguerre(int n, int k, double x) {
    if (n == 0) return 1.0;
    double lm1 = 1.0;
    double l = 1.0 + k - x;
    for (int j = 1; j < n; ++j) {
        const double next = ((2.0 * j + 1.0 + k - x) * l - (j + k) * lm1) / (j + 1.0);
        lm1 = l;
        l = next;
    }
    return l;
}

// Shared kernel of D(beta) and T(alpha)-type matrices for row <= col:
// sqrt(n!/m!) z^{m-n} L_n^{(m-n)}(x) with the factorial ratio in log space.
inline cplx laguerre_element(int n, int m, cplx z, double x) {
    const int k = m - n;
    const double lag = laguerre(n, k, x);
    if (k == 0) return lag;
    const double r = std::abs(z);
    if (r == 0.0) return 0.0;
    const double logmag = 0.5 * (std::lgamma(n + 1.0) - std::lgamma(m + 1.0)) + k * std::log(r);
    return std::exp(logmag) * std::polar(1.0, k * std::arg(z)) * lag;
}

} // namespace detail

inline Operator identity(int N) {
    detail::require_dim(N, 1, "identity");
    return {{N}, Matrix::Identity(N, N)};
}

inline Operator annihilation(int N) {
    detail::require_dim(N, 2, "annihilation");
    Matrix a = Matrix::Zero(N, N);
    for (int n = 1; n < N; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return {{N}, a};
}

inline Operator creation(int N) { return annihilation(N).adjoint(); }

inline Operator number(int N) {
    detail::require_dim(N, 1, "number");
    Matrix n = Matrix::Zero(N, N);
    for (int k = 0; k < N; ++k) n(k, k) = k;
    return {{N}, n};
}

inline Operator parity(int N) {
    detail::require_dim(N, 1, "parity");
    Matrix p = Matrix::Zero(N, N);
    for (int k = 0; k < N; ++k) p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
    return {{N}, p};
}

// Entries of exp(alpha a^dag - alpha^* a) from the exact Laguerre form.
inline Operator displacement(cplx alpha, int N) {
    if (N < 2 || N > kMaxPaddedDim)
        throw DimensionError("displacement: dimension " + std::to_string(N) + " out of range");
    Matrix d(N, N);
    const double x = std::norm(alpha);
    const double pref = std::exp(-0.5 * x);
    for (int m = 0; m < N; ++m) {
        for (int n = 0; n < N; ++n) {
            if (m >= n)
                d(m, n) = pref * detail::laguerre_element(n, m, alpha, x);
            else
                d(m, n) = pref * detail::laguerre_element(m, n, -std::conj(alpha), x);
        }
    }
    return {{N}, d};
}

// Padded dimension that keeps D(alpha) rho D(alpha)^dag free of truncation loss
// for rho supported on the first N Fock states.
inline int padded_dim(int N, cplx alpha) {
    const double r = std::abs(alpha);
    const int pad = N + static_cast<int>(std::ceil(8.0 * r * r + 8.0 * std::sqrt(2.0 * N + 1.0) * r)) + 8;
    return std::min(pad, kMaxPaddedDim);
}

// Cahill-Glauber T(alpha) = D(alpha) Pi D(alpha)^dag, so that W(alpha) = (2/pi) Tr[rho T(alpha)].
inline Operator cahill_glauber_T(cplx alpha, int N) {
    detail::require_dim(N, 1, "cahill_glauber_T");
    Matrix t(N, N);
    const double x = 4.0 * std::norm(alpha);
    const double pref = std::exp(-2.0 * std::norm(alpha));
    const cplx z = 2.0 * std::conj(alpha);
    for (int n = 0; n < N; ++n) {
        const double sign = (n % 2 == 0) ? 1.0 : -1.0;
        for (int m = n; m < N; ++m) {
            const cplx v = sign * pref * detail::laguerre_element(n, m, z, x);
            t(n, m) = v;
            t(m, n) = std::conj(v);
        }
    }
    return {{N}, t};
}

inline Matrix kron(const Matrix &a, const Matrix &b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline Vector kron(const Vector &a, const Vector &b) {
    Vector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

inline Operator tensor(const Operator &a, const Operator &b) {
    Dims dims = a.dims();
    dims.insert(dims.end(), b.dims().begin(), b.dims().end());
    return {dims, kron(a.data(), b.data())};
}

inline QuantumState tensor(const QuantumState &a, const QuantumState &b) {
    Dims dims = a.dims();
    dims.insert(dims.end(), b.dims().begin(), b.dims().end());
    if (a.is_ket() && b.is_ket())
        return QuantumState::ket_unchecked(dims, kron(a.vector(), b.vector()));
    return QuantumState::density_unchecked(dims, kron(a.density_matrix(), b.density_matrix()));
}

inline QuantumState fock(int N, int n) {
    detail::require_dim(N, 1, "fock");
    if (n < 0 || n >= N) throw DimensionError("Fock index out of range");
    Vector v = Vector::Zero(N);
    v(n) = 1.0;
    return QuantumState::ket({N}, v);
}

inline QuantumState fock2(int N1, int N2, int n1, int n2) {
    return tensor(fock(N1, n1), fock(N2, n2));
}

inline Vector coherent_vector(cplx alpha, int N) {
    Vector v(N);
    const double pref = std::exp(-0.5 * std::norm(alpha));
    for (int n = 0; n < N; ++n) {
        if (n == 0) {
            v(n) = pref;
        } else {
            const double r = std::abs(alpha);
            v(n) = r == 0.0 ? cplx(0.0)
                            : std::exp(n * std::log(r) - 0.5 * std::lgamma(n + 1.0)) * pref *
                                  std::polar(1.0, n * std::arg(alpha));
        }
    }
    return v;
}

enum class CatParity { even, odd };

inline QuantumState coherent_cat(double alpha, CatParity parity, int N) {
    detail::require_dim(N, 4, "coherent_cat");
    if (alpha < 0.0) throw ParameterError("cat amplitude must be nonnegative");
    if (alpha * alpha > N / 4.0)
        throw ParameterError("cat amplitude too large for dimension " + std::to_string(N));
    const int first = parity == CatParity::even ? 0 : 1;
    Vector v = Vector::Zero(N);
    for (int n = first; n < N; n += 2) {
        v(n) = n == 0 ? 1.0
                      : std::exp(n * std::log(alpha) - 0.5 * std::lgamma(n + 1.0));
    }
    const double norm = v.norm();
    if (norm == 0.0 || !std::isfinite(norm))
        throw NumericalError("odd cat is undefined at zero amplitude");
    return QuantumState::ket({N}, v / norm);
}

struct EigenCats {
    QuantumState even;
    QuantumState odd;
    double energy_even = 0.0; // MHz
    double energy_odd = 0.0;  // MHz
};

// Single-mode static KPO Hamiltonian in MHz (no 2*pi).
inline RealMatrix kpo_static_hamiltonian(double kerr, double pump, double detuning, int N) {
    RealMatrix h = RealMatrix::Zero(N, N);
    for (int n = 0; n < N; ++n) h(n, n) = detuning * n - 0.5 * kerr * n * (n - 1.0);
    for (int n = 0; n + 2 < N; ++n) {
        const double v = 0.5 * pump * std::sqrt((n + 1.0) * (n + 2.0));
        h(n + 2, n) = v;
        h(n, n + 2) = v;
    }
    return h;
}

// Highest-energy eigenstate of each parity block of the static KPO Hamiltonian.
inline EigenCats kpo_eigen_cats(double kerr, double pump, double detuning, int N) {
    detail::require_dim(N, 2, "kpo_eigen_cats");
    const RealMatrix h = kpo_static_hamiltonian(kerr, pump, detuning, N);
    auto sector = [&](int first, double &energy) {
        std::vector<int> idx;
        for (int n = first; n < N; n += 2) idx.push_back(n);
        const int m = static_cast<int>(idx.size());
        RealMatrix hb(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) hb(i, j) = h(idx[i], idx[j]);
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(hb);
        if (es.info() != Eigen::Success) throw NumericalError("eigen-cat diagonalization failed");
        RealVector top = es.eigenvectors().col(m - 1);
        energy = es.eigenvalues()(m - 1);
        if (top(0) < 0.0) top = -top;
        Vector v = Vector::Zero(N);
        for (int i = 0; i < m; ++i) v(idx[i]) = top(i);
        const double par = parity(N).data().diagonal().real().dot(v.cwiseAbs2().real());
        if (std::abs(par) < 0.999) throw NumericalError("eigen-cat failed parity check");
        return QuantumState::ket({N}, v);
    };
    EigenCats out{QuantumState(), QuantumState()};
    out.even = sector(0, out.energy_even);
    out.odd = sector(1, out.energy_odd);
    return out;
}

// Tail occupation sum_{n >= cutoff} p_n of a single-mode state.
inline double tail_occupation(const QuantumState &state, int cutoff) {
    const RealVector p = state.populations();
    double s = 0.0;
    for (Eigen::Index n = cutoff; n < p.size(); ++n) s += p(n);
    return s;
}

// Single-mode operator placed on `mode` of a multi-mode space.
inline Matrix embed(const Matrix &op, int mode, const Dims &dims) {
    Matrix out = Matrix::Identity(1, 1);
    for (int i = 0; i < static_cast<int>(dims.size()); ++i)
        out = kron(out, i == mode ? op : Matrix(Matrix::Identity(dims[i], dims[i])));
    return out;
}

inline SparseMatrix embed_sparse(const Matrix &op, int mode, const Dims &dims) {
    return embed(op, mode, dims).sparseView(0.0, 0.0);
}

} // namespace kerrcat
