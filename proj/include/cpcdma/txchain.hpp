#ifndef CPCDMA_TXCHAIN_HPP
#define CPCDMA_TXCHAIN_HPP

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "cpcdma/config.hpp"
#include "cpcdma/numerics.hpp"

namespace cpcdma {

/// First C columns of the Sylvester-Hadamard matrix of order N, scaled so the
/// columns are orthonormal. Entries are exactly +-1/sqrt(N).
struct WalshMatrix {
    int length = 0;  // N
    int count = 0;   // C
    std::vector<double> w;  // w[p * count + n]

    double operator()(int p, int n) const { return w[std::size_t(p) * count + n]; }
};

WalshMatrix walsh_matrix(int length, int count);

/// Coded-and-interleaved frame split into per-antenna sub-streams. Bit (t,j,m)
/// of the equalizer domain lives at t*(M*T_s) + j*M + m.
struct CodedFrame {
    std::vector<std::uint8_t> bits;      // equalizer-domain order
    std::vector<std::uint32_t> perm;     // bits[i] = coded[perm[i]]
};

std::vector<std::uint32_t> make_interleaver(std::size_t n, std::uint64_t seed);

/// Rate-1/2 zero-terminated convolutional encode, generators from cfg
/// (octal, MSB tap = current input). Output order per step: first listed
/// generator then second.
std::vector<std::uint8_t> conv_encode(std::span<const std::uint8_t> info_and_tail,
                                      const SystemConfig& cfg);

CodedFrame encode_and_interleave(std::span<const std::uint8_t> info_bits, const SystemConfig& cfg);

/// Per-antenna symbol streams, s[t * T_s + j], Gray-mapped QPSK scaled by
/// sqrt(E_s). Symbol j rides code (j mod C) during chip period j/C.
struct SymbolBlock {
    int n_tx = 0;
    int symbols_per_antenna = 0;
    double symbol_energy = 1.0;
    std::vector<cd> s;

    cd at(int t, int j) const { return s[std::size_t(t) * symbols_per_antenna + j]; }
};

SymbolBlock map_symbols(const CodedFrame& coded, const SystemConfig& cfg);

/// Chip matrix X (n_tx x chips) and its CP-extended form X'.
struct ChipFrame {
    int n_tx = 0;
    int chips = 0;    // T_c
    int cp_len = 0;
    std::vector<cd> x;       // x[t * chips + i]
    std::vector<cd> xprime;  // xprime[t * (chips+cp_len) + c]

    cd at(int t, int i) const { return x[std::size_t(t) * chips + i]; }
};

ChipFrame spread_and_sum(const SymbolBlock& symbols, const WalshMatrix& w, const SystemConfig& cfg);

/// Correlates one antenna row of chip-rate samples with the Walsh codes,
/// recovering T_s symbol estimates laid out like SymbolBlock.
void despread_antenna(std::span<const cd> chips, const WalshMatrix& w, const SystemConfig& cfg,
                      std::span<cd> symbols_out);

/// Everything the simulator needs to know about one transmitted frame.
struct TxFrame {
    std::vector<std::uint8_t> info;
    CodedFrame coded;
    SymbolBlock symbols;
    ChipFrame chips;
};

TxFrame build_frame(const SystemConfig& cfg, const WalshMatrix& w, std::mt19937_64& rng);
TxFrame build_frame_from_info(std::span<const std::uint8_t> info, const SystemConfig& cfg,
                              const WalshMatrix& w);

/// Test-vector dump, one row per chip: t,i,re,im.
void dump_chips(std::ostream& os, const ChipFrame& frame);

}  // namespace cpcdma

#endif
