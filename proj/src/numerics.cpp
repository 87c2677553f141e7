#include "cpcdma/numerics.hpp"

#include <cmath>
#include <numbers>

namespace cpcdma {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place radix-2 DIT FFT over a contiguous lane. sign = -1 forward, +1 inverse.
// twiddle must hold n/2 factors e^{sign * j 2 pi k / n}.
void fft_pow2(std::span<cd> v, std::span<const cd> twiddle) {
    const std::size_t n = v.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(v[i], v[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t step = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cd w = twiddle[k * step];
                const cd u = v[i + k];
                const cd t = v[i + k + len / 2] * w;
                v[i + k] = u + t;
                v[i + k + len / 2] = u - t;
            }
        }
    }
}

void fill_twiddles(std::vector<cd>& tw, std::size_t n, bool forward) {
    tw.resize(n / 2);
    const double sign = forward ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n / 2; ++k) {
        const double ang = sign * 2.0 * std::numbers::pi * double(k) / double(n);
        tw[k] = cd(std::cos(ang), std::sin(ang));
    }
}

BlockVector direct_transform(const BlockVector& x, bool forward) {
    const std::size_t T = x.blocks, N = x.width;
    BlockVector out(T, N);
    const double sign = forward ? -1.0 : 1.0;
    const double scale = 1.0 / std::sqrt(double(T));
    for (std::size_t f = 0; f < T; ++f) {
        for (std::size_t i = 0; i < T; ++i) {
            const double ang = sign * 2.0 * std::numbers::pi * double(f) * double(i) / double(T);
            const cd w = cd(std::cos(ang), std::sin(ang)) * scale;
            for (std::size_t t = 0; t < N; ++t) out.at(f, t) += x.at(i, t) * w;
        }
    }
    return out;
}

}  // namespace

void BlockDftWorkspace::transform(BlockVector& x, bool forward) {
    const std::size_t T = x.blocks, N = x.width;
    if (T <= 1) return;
    if (!is_pow2(T)) {
        x = direct_transform(x, forward);
        return;
    }
    if (twiddle_n_ != T || twiddle_fwd_ != forward) {
        fill_twiddles(twiddle_, T, forward);
        twiddle_n_ = T;
        twiddle_fwd_ = forward;
    }
    lane_.resize(T);
    const double scale = 1.0 / std::sqrt(double(T));
    for (std::size_t t = 0; t < N; ++t) {
        for (std::size_t i = 0; i < T; ++i) lane_[i] = x.at(i, t);
        fft_pow2(lane_, twiddle_);
        for (std::size_t i = 0; i < T; ++i) x.at(i, t) = lane_[i] * scale;
    }
}

void BlockDftWorkspace::forward(BlockVector& x) { transform(x, true); }
void BlockDftWorkspace::inverse(BlockVector& x) { transform(x, false); }

BlockVector block_dft(const BlockVector& x) {
    BlockVector out = x;
    BlockDftWorkspace ws;
    ws.forward(out);
    return out;
}

BlockVector block_idft(const BlockVector& xf) {
    BlockVector out = xf;
    BlockDftWorkspace ws;
    ws.inverse(out);
    return out;
}

BlockVector block_dft_direct(const BlockVector& x) { return direct_transform(x, true); }
BlockVector block_idft_direct(const BlockVector& xf) { return direct_transform(xf, false); }

SmallMatrix::SmallMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

SmallMatrix SmallMatrix::identity(std::size_t n) {
    SmallMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void SmallMatrix::set_zero() { a_.fill(cd{}); }

void SmallMatrix::load(std::span<const cd> flat, std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    for (std::size_t i = 0; i < rows * cols; ++i) a_[i] = flat[i];
}

void SmallMatrix::store(std::span<cd> flat) const {
    for (std::size_t i = 0; i < rows_ * cols_; ++i) flat[i] = a_[i];
}

SmallMatrix& SmallMatrix::operator+=(const SmallMatrix& o) {
    for (std::size_t i = 0; i < rows_ * cols_; ++i) a_[i] += o.a_[i];
    return *this;
}

SmallMatrix& SmallMatrix::operator-=(const SmallMatrix& o) {
    for (std::size_t i = 0; i < rows_ * cols_; ++i) a_[i] -= o.a_[i];
    return *this;
}

SmallMatrix& SmallMatrix::operator*=(double s) {
    for (std::size_t i = 0; i < rows_ * cols_; ++i) a_[i] *= s;
    return *this;
}

SmallMatrix SmallMatrix::operator*(const SmallMatrix& o) const {
    SmallMatrix out;
    multiply_into(*this, o, out);
    return out;
}

SmallMatrix SmallMatrix::adjoint() const {
    SmallMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
}

SmallMatrix SmallMatrix::gram() const {
    SmallMatrix out;
    gram_into(*this, out);
    return out;
}

double SmallMatrix::max_abs() const {
    double m = 0.0;
    for (std::size_t i = 0; i < rows_ * cols_; ++i) m = std::max(m, std::abs(a_[i]));
    return m;
}

void multiply_into(const SmallMatrix& a, const SmallMatrix& b, SmallMatrix& out) {
    if (a.cols() != b.rows()) throw ShapeMismatch("multiply_into: inner dimensions differ");
    out = SmallMatrix(a.rows(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < b.cols(); ++c) {
            cd acc{};
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(r, k) * b(k, c);
            out(r, c) = acc;
        }
    }
}

void gram_into(const SmallMatrix& a, SmallMatrix& out) {
    out = SmallMatrix(a.cols(), a.cols());
    for (std::size_t r = 0; r < a.cols(); ++r) {
        for (std::size_t c = r; c < a.cols(); ++c) {
            cd acc{};
            for (std::size_t k = 0; k < a.rows(); ++k) acc += std::conj(a(k, r)) * a(k, c);
            out(r, c) = acc;
            out(c, r) = std::conj(acc);
        }
    }
}

void adjoint_apply(const SmallMatrix& a, std::span<const cd> v, std::span<cd> out) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
        cd acc{};
        for (std::size_t r = 0; r < a.rows(); ++r) acc += std::conj(a(r, c)) * v[r];
        out[c] += acc;
    }
}

void cholesky_factor(SmallMatrix& a) {
    const std::size_t n = a.rows();
    if (n != a.cols()) throw ShapeMismatch("cholesky_factor: matrix not square");
    const double floor = 1e-13 * std::max(a.max_abs(), 1e-300);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j).real();
        for (std::size_t k = 0; k < j; ++k) d -= std::norm(a(j, k));
        if (d < floor) throw SingularMatrix("cholesky_factor: pivot below threshold");
        const double ljj = std::sqrt(d);
        a(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            cd s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * std::conj(a(j, k));
            a(i, j) = s / ljj;
        }
    }
}

void cholesky_solve_in_place(const SmallMatrix& chol, SmallMatrix& b) {
    const std::size_t n = chol.rows();
    if (b.rows() != n) throw ShapeMismatch("cholesky_solve_in_place: rhs rows differ");
    // L y = b, then L^H x = y.
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            cd s = b(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= chol(i, k) * b(k, c);
            b(i, c) = s / chol(i, i).real();
        }
        for (std::size_t ii = n; ii-- > 0;) {
            cd s = b(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) s -= std::conj(chol(k, ii)) * b(k, c);
            b(ii, c) = s / chol(ii, ii).real();
        }
    }
}

SmallMatrix hermitian_solve(const SmallMatrix& a, const SmallMatrix& b) {
    SmallMatrix l = a;
    cholesky_factor(l);
    SmallMatrix x = b;
    cholesky_solve_in_place(l, x);
    return x;
}

}  // namespace cpcdma
