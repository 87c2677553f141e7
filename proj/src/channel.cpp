#include "cpcdma/channel.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include "cpcdma/errors.hpp"

namespace cpcdma {

ChannelRealization draw_channel(const SystemConfig& cfg, std::mt19937_64& rng, int round) {
    ChannelRealization ch;
    ch.n_rx = cfg.n_rx;
    ch.n_tx = cfg.n_tx;
    ch.taps = cfg.taps;
    ch.round = round;
    ch.h.resize(std::size_t(cfg.taps) * cfg.n_rx * cfg.n_tx);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / double(cfg.taps)));
    for (auto& v : ch.h) v = cd(gauss(rng), gauss(rng));
    return ch;
}

ChannelFrequencyResponse cfr(const ChannelRealization& h, int bins) {
    if (bins < h.taps) throw ShapeMismatch("cfr: need at least L bins");
    ChannelFrequencyResponse f;
    f.bins = bins;
    f.n_rx = h.n_rx;
    f.n_tx = h.n_tx;
    const std::size_t mat = std::size_t(h.n_rx) * h.n_tx;
    f.m.assign(std::size_t(bins) * mat, cd{});
    for (int i = 0; i < bins; ++i) {
        cd* out = f.m.data() + std::size_t(i) * mat;
        for (int l = 0; l < h.taps; ++l) {
            const double ang = -2.0 * std::numbers::pi * double(i) * double(l) / double(bins);
            const cd w(std::cos(ang), std::sin(ang));
            const cd* tap = h.h.data() + std::size_t(l) * mat;
            for (std::size_t e = 0; e < mat; ++e) out[e] += tap[e] * w;
        }
    }
    return f;
}

double sigma_from_ecn0(double ecn0_db, const SystemConfig& cfg) {
    return double(cfg.n_tx) * std::pow(10.0, -ecn0_db / 10.0);
}

std::vector<cd> propagate(const ChipFrame& xprime, const ChannelRealization& h,
                          const NoiseModel& noise, std::mt19937_64& rng) {
    if (xprime.cp_len < h.taps - 1) throw CpTooShort("propagate: CP shorter than channel memory");
    if (xprime.n_tx != h.n_tx) throw ShapeMismatch("propagate: antenna count mismatch");
    const int ext = xprime.chips + xprime.cp_len;
    std::vector<cd> y(std::size_t(h.n_rx) * ext, cd{});
    for (int r = 0; r < h.n_rx; ++r) {
        cd* yr = y.data() + std::size_t(r) * ext;
        for (int t = 0; t < h.n_tx; ++t) {
            const cd* xt = xprime.xprime.data() + std::size_t(t) * ext;
            for (int l = 0; l < h.taps; ++l) {
                const cd g = h.at(l, r, t);
                for (int c = l; c < ext; ++c) yr[c] += g * xt[c - l];
            }
        }
    }
    if (noise.sigma2 > 0.0) {
        std::normal_distribution<double> gauss(0.0, std::sqrt(noise.sigma2 / 2.0));
        for (auto& v : y) v += cd(gauss(rng), gauss(rng));
    }
    return y;
}

BlockVector remove_cp_and_dft(std::span<const cd> received, const ChipFrame& shape, int n_rx) {
    const int ext = shape.chips + shape.cp_len;
    if (int(received.size()) != n_rx * ext)
        throw ShapeMismatch("remove_cp_and_dft: received block size mismatch");
    BlockVector y(std::size_t(shape.chips), std::size_t(n_rx));
    for (int i = 0; i < shape.chips; ++i)
        for (int r = 0; r < n_rx; ++r)
            y.at(i, r) = received[std::size_t(r) * ext + shape.cp_len + i];
    BlockDftWorkspace ws;
    ws.forward(y);
    return y;
}

void dump_taps(std::ostream& os, const ChannelRealization& h) {
    os << "k,l,r,t,re,im\n";
    char line[112];
    for (int l = 0; l < h.taps; ++l) {
        for (int r = 0; r < h.n_rx; ++r) {
            for (int t = 0; t < h.n_tx; ++t) {
                const cd v = h.at(l, r, t);
                std::snprintf(line, sizeof line, "%d,%d,%d,%d,%.17g,%.17g\n", h.round, l, r, t,
                              v.real(), v.imag());
                os << line;
            }
        }
    }
}

}  // namespace cpcdma
