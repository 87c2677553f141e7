#include "cpcdma/txchain.hpp"

#include <cmath>
#include <ostream>

#include "cpcdma/errors.hpp"

namespace cpcdma {

WalshMatrix walsh_matrix(int length, int count) {
    if (length < 1 || (length & (length - 1)) != 0)
        throw BadSpreadingFactor("walsh_matrix: N must be a power of two");
    if (count < 1 || count > length)
        throw BadSpreadingFactor("walsh_matrix: need 1 <= C <= N");
    WalshMatrix m;
    m.length = length;
    m.count = count;
    m.w.resize(std::size_t(length) * count);
    const double scale = 1.0 / std::sqrt(double(length));
    for (int p = 0; p < length; ++p) {
        for (int n = 0; n < count; ++n) {
            // Sylvester construction: sign = (-1)^{popcount(p & n)}.
            const int bits = __builtin_popcount(unsigned(p) & unsigned(n));
            m.w[std::size_t(p) * count + n] = (bits & 1) ? -scale : scale;
        }
    }
    return m;
}

std::vector<std::uint32_t> make_interleaver(std::size_t n, std::uint64_t seed) {
    std::vector<std::uint32_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = std::uint32_t(i);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> d(0, i - 1);
        std::swap(perm[i - 1], perm[d(rng)]);
    }
    return perm;
}

std::vector<std::uint8_t> conv_encode(std::span<const std::uint8_t> info_and_tail,
                                      const SystemConfig& cfg) {
    const int m = cfg.constraint_len - 1;
    std::vector<std::uint8_t> out;
    out.reserve(info_and_tail.size() * 2);
    unsigned state = 0;  // most recent input in the MSB of m bits
    for (std::uint8_t u : info_and_tail) {
        const unsigned reg = (unsigned(u) << m) | state;  // constraint_len bits
        for (unsigned g : cfg.generators)
            out.push_back(std::uint8_t(__builtin_popcount(reg & g) & 1));
        state = (state >> 1) | (unsigned(u) << (m - 1));
    }
    return out;
}

CodedFrame encode_and_interleave(std::span<const std::uint8_t> info_bits, const SystemConfig& cfg) {
    if (int(info_bits.size()) != cfg.info_bits())
        throw BadLength("encode_and_interleave: expected " + std::to_string(cfg.info_bits()) +
                        " info bits, got " + std::to_string(info_bits.size()));
    std::vector<std::uint8_t> with_tail(info_bits.begin(), info_bits.end());
    with_tail.resize(info_bits.size() + cfg.tail_bits(), 0);
    const std::vector<std::uint8_t> coded = conv_encode(with_tail, cfg);
    if (int(coded.size()) != cfg.coded_bits())
        throw BadLength("encode_and_interleave: coded frame size mismatch");

    CodedFrame f;
    f.perm = make_interleaver(coded.size(), cfg.interleaver_seed);
    f.bits.resize(coded.size());
    for (std::size_t i = 0; i < coded.size(); ++i) f.bits[i] = coded[f.perm[i]];
    return f;
}

SymbolBlock map_symbols(const CodedFrame& coded, const SystemConfig& cfg) {
    if (cfg.bits_per_symbol != 2)
        throw UnsupportedModulation("map_symbols: only QPSK is supported");
    if (int(coded.bits.size()) != cfg.coded_bits())
        throw BadLength("map_symbols: coded frame size mismatch");
    SymbolBlock b;
    b.n_tx = cfg.n_tx;
    b.symbols_per_antenna = cfg.symbols_per_antenna;
    b.symbol_energy = cfg.symbol_energy();
    b.s.resize(std::size_t(cfg.n_tx) * cfg.symbols_per_antenna);
    const double amp = std::sqrt(b.symbol_energy / 2.0);
    const int per_antenna = cfg.bits_per_symbol * cfg.symbols_per_antenna;
    for (int t = 0; t < cfg.n_tx; ++t) {
        for (int j = 0; j < cfg.symbols_per_antenna; ++j) {
            const std::uint8_t b0 = coded.bits[std::size_t(t) * per_antenna + 2 * j];
            const std::uint8_t b1 = coded.bits[std::size_t(t) * per_antenna + 2 * j + 1];
            b.s[std::size_t(t) * cfg.symbols_per_antenna + j] =
                cd(amp * (1.0 - 2.0 * b0), amp * (1.0 - 2.0 * b1));
        }
    }
    return b;
}

ChipFrame spread_and_sum(const SymbolBlock& symbols, const WalshMatrix& w, const SystemConfig& cfg) {
    if (symbols.n_tx != cfg.n_tx || symbols.symbols_per_antenna != cfg.symbols_per_antenna)
        throw ShapeMismatch("spread_and_sum: symbol block does not match config");
    if (w.length != cfg.spreading || w.count != cfg.codes)
        throw ShapeMismatch("spread_and_sum: Walsh matrix does not match config");

    ChipFrame f;
    f.n_tx = cfg.n_tx;
    f.chips = cfg.chips_per_block();
    f.cp_len = cfg.cp_len;
    f.x.assign(std::size_t(f.n_tx) * f.chips, cd{});
    const int N = cfg.spreading, C = cfg.codes;
    for (int t = 0; t < f.n_tx; ++t) {
        for (int i = 0; i < f.chips; ++i) {
            const int p = i % N;
            const int q = i / N;
            cd acc{};
            for (int n = 0; n < C; ++n) acc += symbols.at(t, q * C + n) * w(p, n);
            f.x[std::size_t(t) * f.chips + i] = acc;
        }
    }
    const int ext = f.chips + f.cp_len;
    f.xprime.resize(std::size_t(f.n_tx) * ext);
    for (int t = 0; t < f.n_tx; ++t) {
        for (int c = 0; c < f.cp_len; ++c)
            f.xprime[std::size_t(t) * ext + c] = f.at(t, f.chips - f.cp_len + c);
        for (int i = 0; i < f.chips; ++i) f.xprime[std::size_t(t) * ext + f.cp_len + i] = f.at(t, i);
    }
    return f;
}

void despread_antenna(std::span<const cd> chips, const WalshMatrix& w, const SystemConfig& cfg,
                      std::span<cd> symbols_out) {
    const int N = cfg.spreading, C = cfg.codes;
    if (int(chips.size()) != cfg.chips_per_block())
        throw ShapeMismatch("despread_antenna: chip row length mismatch");
    if (int(symbols_out.size()) != cfg.symbols_per_antenna)
        throw ShapeMismatch("despread_antenna: symbol output length mismatch");
    const int periods = cfg.chips_per_block() / N;
    for (int q = 0; q < periods; ++q) {
        for (int n = 0; n < C; ++n) {
            cd acc{};
            for (int p = 0; p < N; ++p) acc += chips[std::size_t(q) * N + p] * w(p, n);
            symbols_out[std::size_t(q) * C + n] = acc;
        }
    }
}

TxFrame build_frame_from_info(std::span<const std::uint8_t> info, const SystemConfig& cfg,
                              const WalshMatrix& w) {
    TxFrame f;
    f.info.assign(info.begin(), info.end());
    f.coded = encode_and_interleave(info, cfg);
    f.symbols = map_symbols(f.coded, cfg);
    f.chips = spread_and_sum(f.symbols, w, cfg);
    return f;
}

TxFrame build_frame(const SystemConfig& cfg, const WalshMatrix& w, std::mt19937_64& rng) {
    std::vector<std::uint8_t> info(cfg.info_bits());
    std::uniform_int_distribution<int> bit(0, 1);
    for (auto& b : info) b = std::uint8_t(bit(rng));
    return build_frame_from_info(info, cfg, w);
}

void dump_chips(std::ostream& os, const ChipFrame& frame) {
    os << "t,i,re,im\n";
    char line[96];
    for (int t = 0; t < frame.n_tx; ++t) {
        for (int i = 0; i < frame.chips; ++i) {
            const cd v = frame.at(t, i);
            std::snprintf(line, sizeof line, "%d,%d,%.17g,%.17g\n", t, i, v.real(), v.imag());
            os << line;
        }
    }
}

}  // namespace cpcdma
