#ifndef CPCDMA_NUMERICS_HPP
#define CPCDMA_NUMERICS_HPP

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "cpcdma/errors.hpp"

namespace cpcdma {

using cd = std::complex<double>;

/// A length blocks*width complex vector laid out as consecutive width-sized
/// sub-vectors. Block transforms act across the block index, one lane per
/// intra-block position.
struct BlockVector {
    std::size_t blocks = 0;
    std::size_t width = 0;
    std::vector<cd> data;

    BlockVector() = default;
    BlockVector(std::size_t blocks, std::size_t width)
        : blocks(blocks), width(width), data(blocks * width) {}

    cd& at(std::size_t block, std::size_t lane) { return data[block * width + lane]; }
    const cd& at(std::size_t block, std::size_t lane) const { return data[block * width + lane]; }
    std::size_t size() const { return data.size(); }
};

// Unitary block DFT: out[f*width + t] = (1/sqrt(T)) * sum_i in[i*width + t] * e^{-j 2 pi f i / T}.
// Radix-2 when the block count is a power of two, direct summation otherwise.
BlockVector block_dft(const BlockVector& x);
BlockVector block_idft(const BlockVector& xf);

// O(T^2) reference forms, kept as independent oracles for the fast path.
BlockVector block_dft_direct(const BlockVector& x);
BlockVector block_idft_direct(const BlockVector& xf);

// In-place variants used on hot paths (scratch reused across calls).
class BlockDftWorkspace {
public:
    void forward(BlockVector& x);
    void inverse(BlockVector& x);

private:
    std::vector<cd> lane_;
    std::vector<cd> twiddle_;
    std::size_t twiddle_n_ = 0;
    bool twiddle_fwd_ = true;
    void transform(BlockVector& x, bool forward);
};

/// Dense complex matrix with fixed capacity, sized for per-bin MIMO algebra.
class SmallMatrix {
public:
    static constexpr std::size_t kMaxDim = 8;

    SmallMatrix() = default;
    SmallMatrix(std::size_t rows, std::size_t cols);
    static SmallMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    cd& operator()(std::size_t r, std::size_t c) { return a_[r * cols_ + c]; }
    const cd& operator()(std::size_t r, std::size_t c) const { return a_[r * cols_ + c]; }

    void set_zero();
    void load(std::span<const cd> flat, std::size_t rows, std::size_t cols);
    void store(std::span<cd> flat) const;

    SmallMatrix& operator+=(const SmallMatrix& o);
    SmallMatrix& operator-=(const SmallMatrix& o);
    SmallMatrix& operator*=(double s);

    SmallMatrix operator*(const SmallMatrix& o) const;
    SmallMatrix adjoint() const;

    /// A^H * A (Gram matrix of the columns), always Hermitian PSD.
    SmallMatrix gram() const;

    double max_abs() const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::array<cd, kMaxDim * kMaxDim> a_{};
};

void multiply_into(const SmallMatrix& a, const SmallMatrix& b, SmallMatrix& out);
void gram_into(const SmallMatrix& a, SmallMatrix& out);
// out += a^H * b  where b is a column vector given as a flat span.
void adjoint_apply(const SmallMatrix& a, std::span<const cd> v, std::span<cd> out);

/// In-place lower Cholesky factorization of a Hermitian positive definite
/// matrix. Throws SingularMatrix when a pivot falls below 1e-13 * max|A|.
void cholesky_factor(SmallMatrix& a);
void cholesky_solve_in_place(const SmallMatrix& chol, SmallMatrix& b);

/// Solves A*X = B for Hermitian positive definite A.
SmallMatrix hermitian_solve(const SmallMatrix& a, const SmallMatrix& b);

}  // namespace cpcdma

#endif
