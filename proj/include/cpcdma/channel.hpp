#ifndef CPCDMA_CHANNEL_HPP
#define CPCDMA_CHANNEL_HPP

#include <iosfwd>
#include <random>
#include <vector>

#include "cpcdma/config.hpp"
#include "cpcdma/numerics.hpp"
#include "cpcdma/txchain.hpp"

namespace cpcdma {

/// L chip-spaced taps, each an n_rx x n_tx matrix. Entries are i.i.d.
/// CN(0, 1/L) so the energy per receive antenna sums to n_tx in expectation.
struct ChannelRealization {
    int n_rx = 0, n_tx = 0, taps = 0;
    int round = 0;
    std::vector<cd> h;  // h[l * n_rx * n_tx + r * n_tx + t]

    cd at(int l, int r, int t) const {
        return h[(std::size_t(l) * n_rx + r) * n_tx + t];
    }
};

ChannelRealization draw_channel(const SystemConfig& cfg, std::mt19937_64& rng, int round);

/// Per-bin channel frequency response, Lambda_i = sum_l H_l e^{-j 2 pi i l / T_c}.
struct ChannelFrequencyResponse {
    int bins = 0, n_rx = 0, n_tx = 0;
    std::vector<cd> m;  // m[i * n_rx * n_tx + r * n_tx + t]

    std::span<const cd> bin(int i) const {
        return {m.data() + std::size_t(i) * n_rx * n_tx, std::size_t(n_rx) * n_tx};
    }
};

ChannelFrequencyResponse cfr(const ChannelRealization& h, int bins);

struct NoiseModel {
    double sigma2 = 0.0;  // variance of each complex sample (real+imag combined)
};

/// Ec/N0 in dB (per chip per receive antenna) to complex noise variance.
/// With unit chip energy per transmit antenna the received signal energy per
/// receive antenna per chip is n_tx, hence sigma2 = n_tx * 10^(-dB/10).
double sigma_from_ecn0(double ecn0_db, const SystemConfig& cfg);

/// Linear convolution of the CP-extended chip matrix with the taps plus
/// complex AWGN. Output is n_rx x (chips + cp_len).
std::vector<cd> propagate(const ChipFrame& xprime, const ChannelRealization& h,
                          const NoiseModel& noise, std::mt19937_64& rng);

/// CP removal followed by the unitary block DFT across chip time; the result
/// satisfies y_f,i = Lambda_i x_f,i + n_f,i per bin.
BlockVector remove_cp_and_dft(std::span<const cd> received, const ChipFrame& shape, int n_rx);

/// Regression-fixture dump, one row per entry: k,l,r,t,re,im.
void dump_taps(std::ostream& os, const ChannelRealization& h);

}  // namespace cpcdma

#endif
