#include <doctest.h>

#include <algorithm>
#include <random>

#include "cpcdma/arq_sim.hpp"
#include "cpcdma/channel.hpp"
#include "cpcdma/combiner.hpp"
#include "cpcdma/errors.hpp"
#include "cpcdma/receivers.hpp"
#include "support/naive_linalg.hpp"
#include "support/stacked_oracle.hpp"

using namespace cpcdma;

namespace {

SystemConfig tiny_cfg(int n_rx = 2) {
    SystemConfig c;
    c.n_tx = 2;
    c.n_rx = n_rx;
    c.spreading = 4;
    c.codes = 4;
    c.symbols_per_antenna = 32;  // T_c = 32
    c.taps = 4;
    c.cp_len = 4;
    return c;
}

SystemConfig fullload_cfg(int n_rx = 2) {
    SystemConfig c;
    c.n_tx = 2;
    c.n_rx = n_rx;
    c.spreading = 16;
    c.codes = 16;
    c.symbols_per_antenna = 256;
    c.taps = 10;
    c.cp_len = 10;
    return c;
}

struct RoundData {
    ChannelRealization ch;
    ChannelFrequencyResponse lambda;
    BlockVector y_f;
};

RoundData make_round(const SystemConfig& cfg, const TxFrame& tx, double sigma2,
                     std::mt19937_64& rng, int round) {
    RoundData rd;
    rd.ch = draw_channel(cfg, rng, round);
    rd.lambda = cfr(rd.ch, cfg.chips_per_block());
    const std::vector<cd> rx = propagate(tx.chips, rd.ch, NoiseModel{sigma2}, rng);
    rd.y_f = remove_cp_and_dft(rx, tx.chips, cfg.n_rx);
    return rd;
}

LlrFrame saturated_priors(const TxFrame& tx, const SystemConfig& cfg, double mag) {
    LlrFrame f = zero_llrs(cfg);
    for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] = tx.coded.bits[i] ? -mag : mag;
    return f;
}

// Direct four-point reference demapper, exact log-sum, capped like the
// implementation.
void reference_demap(const cd& r, double g, double th, double es, const double ap[2], double cap_v,
                     double out[2]) {
    const double a = std::sqrt(es / 2.0);
    double w[4];
    for (int idx = 0; idx < 4; ++idx) {
        const int b0 = (idx >> 1) & 1, b1 = idx & 1;
        const cd pt(a * (1 - 2 * b0), a * (1 - 2 * b1));
        w[idx] = -std::norm(r - g * pt) / th;
    }
    for (int m = 0; m < 2; ++m) {
        double num = -1e300, den = -1e300;
        for (int idx = 0; idx < 4; ++idx) {
            const int b0 = (idx >> 1) & 1, b1 = idx & 1;
            const int own = m == 0 ? b0 : b1;
            const int other = m == 0 ? b1 : b0;
            const double ap_other = m == 0 ? ap[1] : ap[0];
            const double u = w[idx] - ap_other * other;
            double& slot = own == 0 ? num : den;
            slot = std::max(slot, u) + std::log1p(std::exp(-std::abs(slot - u)));
        }
        out[m] = std::clamp(num - den, -cap_v, cap_v);
    }
}

}  // namespace

TEST_CASE("uninformative priors give zero chip means and unit variances") {
    for (int codes : {4, 8, 16}) {
        SystemConfig cfg = fullload_cfg();
        cfg.codes = codes;
        const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
        const ChipPriors pr = chip_priors_from_llrs(zero_llrs(cfg), w, cfg);
        for (const auto& v : pr.xtilde.data) CHECK(std::abs(v) == 0.0);
        for (double v : pr.xi) CHECK(v == doctest::Approx(1.0));
        for (double v : pr.xi_bar) CHECK(v == doctest::Approx(1.0));
    }
}

TEST_CASE("saturated priors reproduce the exact chip sequence") {
    const SystemConfig cfg = tiny_cfg();
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    std::mt19937_64 rng(1);
    const TxFrame tx = build_frame(cfg, w, rng);
    const ChipPriors pr = chip_priors_from_llrs(saturated_priors(tx, cfg, 1e3), w, cfg);
    for (int i = 0; i < cfg.chips_per_block(); ++i)
        for (int t = 0; t < cfg.n_tx; ++t)
            CHECK(std::abs(pr.xtilde.at(i, t) - tx.chips.at(t, i)) < 1e-9);
    for (double v : pr.xi) CHECK(v == doctest::Approx(cfg.min_variance));
}

TEST_CASE("soft symbol closed form for LLR pair (2, 0)") {
    SystemConfig cfg = tiny_cfg();
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    LlrFrame ap = zero_llrs(cfg);
    ap.v[0] = 2.0;  // bit (t=0, j=0, m=0)
    const ChipPriors pr = chip_priors_from_llrs(ap, w, cfg);
    // Chip 0 collects code contributions of period 0; with all other symbols
    // zero-mean, only symbol (0,0) contributes through w(0, 0).
    const double es = cfg.symbol_energy();
    const cd expect = cd(std::sqrt(es / 2.0) * std::tanh(1.0), 0.0) * w(0, 0);
    CHECK(std::abs(pr.xtilde.at(0, 0) - expect) < 1e-12);
}

TEST_CASE("chip state update matches explicit matched filter and Gram") {
    const SystemConfig cfg = tiny_cfg();
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    std::mt19937_64 rng(2);
    const TxFrame tx = build_frame(cfg, w, rng);
    const RoundData rd = make_round(cfg, tx, 0.2, rng, 1);

    ChipCombinerState st(cfg.chips_per_block(), cfg.n_tx);
    st.update(rd.y_f, rd.lambda, 1);
    for (int i = 0; i < cfg.chips_per_block(); ++i) {
        naive::Mat lam(cfg.n_rx, cfg.n_tx), y(cfg.n_rx, 1);
        for (int r = 0; r < cfg.n_rx; ++r) {
            for (int t = 0; t < cfg.n_tx; ++t) lam(r, t) = rd.lambda.bin(i)[r * cfg.n_tx + t];
            y(r, 0) = rd.y_f.at(i, r);
        }
        const naive::Mat mf = naive::mul(naive::adj(lam), y);
        const naive::Mat gram = naive::mul(naive::adj(lam), lam);
        for (int t = 0; t < cfg.n_tx; ++t)
            CHECK(std::abs(st.ytilde().at(i, t) - mf(t, 0)) < 1e-11);
        for (int rr = 0; rr < cfg.n_tx; ++rr)
            for (int cc = 0; cc < cfg.n_tx; ++cc)
                CHECK(std::abs(st.gram_flat()[(std::size_t(i) * cfg.n_tx + rr) * cfg.n_tx + cc] -
                               gram(rr, cc)) < 1e-11);
    }
}

TEST_CASE("after two rounds the Gram equals the stacked virtual-CFR Gram") {
    const SystemConfig cfg = tiny_cfg();
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    std::mt19937_64 rng(3);
    const TxFrame tx = build_frame(cfg, w, rng);
    const RoundData r1 = make_round(cfg, tx, 0.2, rng, 1);
    const RoundData r2 = make_round(cfg, tx, 0.2, rng, 2);

    ChipCombinerState st(cfg.chips_per_block(), cfg.n_tx);
    st.update(r1.y_f, r1.lambda, 1);
    st.update(r2.y_f, r2.lambda, 2);
    for (int i = 0; i < cfg.chips_per_block(); ++i) {
        naive::Mat stacked(2 * cfg.n_rx, cfg.n_tx);
        for (int r = 0; r < cfg.n_rx; ++r)
            for (int t = 0; t < cfg.n_tx; ++t) {
                stacked(r, t) = r1.lambda.bin(i)[r * cfg.n_tx + t];
                stacked(cfg.n_rx + r, t) = r2.lambda.bin(i)[r * cfg.n_tx + t];
            }
        const naive::Mat gram = naive::mul(naive::adj(stacked), stacked);
        for (int rr = 0; rr < cfg.n_tx; ++rr)
            for (int cc = 0; cc < cfg.n_tx; ++cc)
                CHECK(std::abs(st.gram_flat()[(std::size_t(i) * cfg.n_tx + rr) * cfg.n_tx + cc] -
                               gram(rr, cc)) < 1e-10);
    }
}

TEST_CASE("chip update enforces round ordering and counts additions") {
    const SystemConfig cfg = tiny_cfg();
    ChipCombinerState st(cfg.chips_per_block(), cfg.n_tx);
    ChannelFrequencyResponse lam;
    lam.bins = cfg.chips_per_block();
    lam.n_rx = cfg.n_rx;
    lam.n_tx = cfg.n_tx;
    lam.m.assign(std::size_t(lam.bins) * cfg.n_rx * cfg.n_tx, cd{});
    BlockVector y(std::size_t(lam.bins), std::size_t(cfg.n_rx));
    CHECK_THROWS_AS(st.update(y, lam, 2), RoundOrderViolation);
    st.update(y, lam, 1);
    CHECK(st.meter().additions == 0);
    st.update(y, lam, 2);
    st.update(y, lam, 3);
    const std::uint64_t tc = cfg.chips_per_block();
    CHECK(st.meter().additions == 2 * tc * 2 * (3 - 1) * (2 + 1));
}

TEST_CASE("state sizes follow the memory law") {
    for (auto [n_tx, ts, n, c, m] :
         {std::tuple<int, int, int, int, int>{2, 256, 16, 16, 2}, {4, 128, 16, 8, 2}, {2, 64, 8, 4, 3}}) {
        const int tc = ts * n / c;
        ChipCombinerState chip(tc, n_tx);
        CHECK(chip.size_reals() == std::size_t(2 * tc * n_tx * (n_tx + 1)));
        SymbolCombinerState sym(ts, n_tx, m);
        CHECK(sym.size_reals() == std::size_t(ts) * n_tx * (1 << m));
    }
}

TEST_CASE("filters with no channel reduce to scaled identity") {
    const int bins = 8, n = 2;
    std::vector<cd> gram(std::size_t(bins) * n * n, cd{});
    const std::vector<double> xi_bar{1.0, 1.0};
    const double sigma2 = 0.5;
    const EqualizerFilters f = compute_filters(gram, bins, n, xi_bar, sigma2);
    for (int i = 0; i < bins; ++i) {
        const cd* g = f.gamma.data() + std::size_t(i) * n * n;
        CHECK(std::abs(g[0] - cd(1.0 / sigma2, 0)) < 1e-12);
        CHECK(std::abs(g[3] - cd(1.0 / sigma2, 0)) < 1e-12);
        CHECK(std::abs(g[1]) < 1e-12);
        const cd* gd = f.gd.data() + std::size_t(i) * n * n;
        for (int e = 0; e < 4; ++e) CHECK(std::abs(gd[e]) < 1e-12);
    }
    CHECK(f.upsilon.max_abs() < 1e-12);
}

TEST_CASE("scalar flat channel reduces to the classical MMSE filter") {
    const int bins = 16, n = 1;
    const cd lambda(0.8, -0.6);
    std::vector<cd> gram(bins, cd(std::norm(lambda), 0.0));
    const std::vector<double> xi_bar{1.0};
    const double sigma2 = 0.3;
    const EqualizerFilters f = compute_filters(gram, bins, n, xi_bar, sigma2);
    const double expect = 1.0 / (sigma2 + std::norm(lambda));
    for (int i = 0; i < bins; ++i) CHECK(std::abs(f.gamma[i] - cd(expect, 0)) < 1e-12);
    // Flat channel: Gamma_i D_i is constant, so Omega vanishes and the
    // equalizer is the matched filter scaled by the classical MMSE gain.
    CHECK(std::abs(f.upsilon(0, 0) - cd(std::norm(lambda) * expect, 0)) < 1e-12);
    CHECK(f.upsilon(0, 0).real() > 0.0);
    CHECK(f.upsilon(0, 0).real() <= 1.0);
}

TEST_CASE("matrix-inversion-lemma identity against a direct inverse") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    const int n = 3;
    for (int trial = 0; trial < 25; ++trial) {
        naive::Mat m(n, n);
        for (auto& v : m.a) v = cd(g(rng), g(rng));
        const naive::Mat d = naive::mul(naive::adj(m), m);
        std::vector<double> xi_bar{0.3 + 0.7 * std::abs(g(rng)), 0.5, 1.0};
        const double sigma2 = 0.1 + std::abs(g(rng));

        std::vector<cd> gram(std::size_t(n) * n);
        for (int i = 0; i < n * n; ++i) gram[i] = d.a[i];
        const EqualizerFilters f = compute_filters(gram, 1, n, xi_bar, sigma2);

        // Direct route: Gamma = (sigma2 I + D Xi)^{-1}.
        naive::Mat dxi = d;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) dxi(r, c) *= xi_bar[c];
        for (int r = 0; r < n; ++r) dxi(r, r) += sigma2;
        const naive::Mat direct = naive::inv(dxi);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                CHECK(std::abs(f.gamma[std::size_t(r) * n + c] - direct(r, c)) < 1e-9);
    }
}

TEST_CASE("zero priors make the estimate a pure filtered matched filter") {
    const SystemConfig cfg = tiny_cfg();
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    std::mt19937_64 rng(5);
    const TxFrame tx = build_frame(cfg, w, rng);
    const RoundData rd = make_round(cfg, tx, 0.4, rng, 1);
    ChipCombinerState st(cfg.chips_per_block(), cfg.n_tx);
    st.update(rd.y_f, rd.lambda, 1);
    const ChipPriors pr = chip_priors_from_llrs(zero_llrs(cfg), w, cfg);
    const EqualizerFilters f =
        compute_filters(st.gram_flat(), st.bins(), st.n_tx(), pr.xi_bar, 0.4);
    BlockVector xf = block_dft(pr.xtilde);
    const BlockVector z = mmse_estimate(f, st.ytilde(), xf);
    for (int i = 0; i < st.bins(); ++i) {
        for (int t = 0; t < cfg.n_tx; ++t) {
            cd expect{};
            for (int c = 0; c < cfg.n_tx; ++c)
                expect += f.gamma[(std::size_t(i) * cfg.n_tx + t) * cfg.n_tx + c] *
                          st.ytilde().at(i, c);
            CHECK(std::abs(z.at(i, t) - expect) < 1e-11);
        }
    }
}

TEST_CASE("genie priors and vanishing noise recover the chips after gain removal") {
    const SystemConfig cfg = tiny_cfg();
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    std::mt19937_64 rng(6);
    const TxFrame tx = build_frame(cfg, w, rng);
    const double sigma2 = 1e-16;
    const RoundData r1 = make_round(cfg, tx, 0.0, rng, 1);
    const RoundData r2 = make_round(cfg, tx, 0.0, rng, 2);
    ChipCombinerState st(cfg.chips_per_block(), cfg.n_tx);
    st.update(r1.y_f, r1.lambda, 1);
    st.update(r2.y_f, r2.lambda, 2);
    const ChipPriors pr = chip_priors_from_llrs(saturated_priors(tx, cfg, 1e3), w, cfg);
    const EqualizerFilters f =
        compute_filters(st.gram_flat(), st.bins(), st.n_tx(), pr.xi_bar, sigma2);
    BlockVector xf = pr.xtilde;
    BlockDftWorkspace ws;
    ws.forward(xf);
    BlockVector z = mmse_estimate(f, st.ytilde(), xf);
    ws.inverse(z);
    for (int i = 0; i < st.bins(); ++i) {
        for (int t = 0; t < cfg.n_tx; ++t) {
            const double gain = f.upsilon(t, t).real();
            CHECK(std::abs(z.at(i, t) / gain - tx.chips.at(t, i)) < 1e-6);
        }
    }
}

TEST_CASE("equivalent gain matches a sample regression of z on x") {
    SystemConfig cfg = fullload_cfg();
    cfg.codes = 4;  // T_c = 1024 chips per frame
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    std::mt19937_64 rng(7);
    const double sigma2 = 0.5;
    cd num[2] = {};
    double den[2] = {};
    double gain_ref[2] = {};
    for (int frame = 0; frame < 10; ++frame) {
        const TxFrame tx = build_frame(cfg, w, rng);
        const RoundData rd = make_round(cfg, tx, sigma2, rng, 1);
        ChipCombinerState st(cfg.chips_per_block(), cfg.n_tx);
        st.update(rd.y_f, rd.lambda, 1);
        const ChipPriors pr = chip_priors_from_llrs(zero_llrs(cfg), w, cfg);
        const EqualizerFilters f =
            compute_filters(st.gram_flat(), st.bins(), st.n_tx(), pr.xi_bar, sigma2);
        BlockVector xf = pr.xtilde;
        BlockDftWorkspace ws;
        ws.forward(xf);
        BlockVector z = mmse_estimate(f, st.ytilde(), xf);
        ws.inverse(z);
        for (int i = 0; i < st.bins(); ++i)
            for (int t = 0; t < cfg.n_tx; ++t) {
                num[t] += std::conj(tx.chips.at(t, i)) * z.at(i, t);
                den[t] += std::norm(tx.chips.at(t, i));
            }
        for (int t = 0; t < cfg.n_tx; ++t) gain_ref[t] += f.upsilon(t, t).real() / 10.0;
    }
    for (int t = 0; t < cfg.n_tx; ++t) {
        const double slope = (num[t] / den[t]).real();
        CHECK(slope == doctest::Approx(gain_ref[t]).epsilon(0.05));
    }
}

TEST_CASE("despreading perfect equalization returns exact symbols") {
    const SystemConfig cfg = tiny_cfg();
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    std::mt19937_64 rng(8);
    const TxFrame tx = build_frame(cfg, w, rng);
    BlockVector z(std::size_t(cfg.chips_per_block()), std::size_t(cfg.n_tx));
    for (int i = 0; i < cfg.chips_per_block(); ++i)
        for (int t = 0; t < cfg.n_tx; ++t) z.at(i, t) = tx.chips.at(t, i);
    const SmallMatrix ups = SmallMatrix::identity(cfg.n_tx);
    const std::vector<double> xi_bar(cfg.n_tx, 1.0);
    const DespreadOutput d = despread_and_stat(z, ups, xi_bar, w, cfg);
    for (int t = 0; t < cfg.n_tx; ++t)
        for (int j = 0; j < cfg.symbols_per_antenna; ++j) {
            CHECK(std::abs(d.r[std::size_t(t) * cfg.symbols_per_antenna + j] - tx.symbols.at(t, j)) <
                  1e-12);
            CHECK(d.g[std::size_t(t) * cfg.symbols_per_antenna + j] == doctest::Approx(1.0));
            CHECK(d.theta2[std::size_t(t) * cfg.symbols_per_antenna + j] ==
                  doctest::Approx(1e-12));
        }
}

TEST_CASE("single-code despreading averages white noise") {
    SystemConfig cfg;
    cfg.n_tx = 1;
    cfg.n_rx = 1;
    cfg.spreading = 16;
    cfg.codes = 1;
    cfg.symbols_per_antenna = 4096;
    cfg.taps = 1;
    cfg.cp_len = 1;
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    std::mt19937_64 rng(9);
    const TxFrame tx = build_frame(cfg, w, rng);
    const double v = 0.8;
    std::normal_distribution<double> g(0.0, std::sqrt(v / 2.0));
    BlockVector z(std::size_t(cfg.chips_per_block()), 1);
    for (int i = 0; i < cfg.chips_per_block(); ++i)
        z.at(i, 0) = tx.chips.at(0, i) + cd(g(rng), g(rng));
    const SmallMatrix ups = SmallMatrix::identity(1);
    const std::vector<double> xi_bar{1.0};
    const DespreadOutput d = despread_and_stat(z, ups, xi_bar, w, cfg);
    double err = 0.0;
    for (int j = 0; j < cfg.symbols_per_antenna; ++j)
        err += std::norm(d.r[j] - tx.symbols.at(0, j));
    err /= cfg.symbols_per_antenna;
    // Despread noise variance stays v, so symbol SNR = E_s/v = N/v gains the
    // spreading factor over the chip SNR 1/v.
    CHECK(err == doctest::Approx(v).epsilon(0.10));
    CHECK(cfg.symbol_energy() == doctest::Approx(16.0));
}

TEST_CASE("theta2 equivalent-model value at g = 1/2") {
    SystemConfig cfg = tiny_cfg();
    cfg.spreading = 4;
    cfg.codes = 4;  // E_s = 1
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    BlockVector z(std::size_t(cfg.chips_per_block()), std::size_t(cfg.n_tx));
    SmallMatrix ups(cfg.n_tx, cfg.n_tx);
    ups(0, 0) = 0.5;
    ups(1, 1) = 0.5;
    const std::vector<double> xi_bar(cfg.n_tx, 1.0);
    const DespreadOutput d = despread_and_stat(z, ups, xi_bar, w, cfg);
    CHECK(d.theta2[0] == doctest::Approx(0.25));
}

TEST_CASE("demapper agrees with the exhaustive four-point reference") {
    SystemConfig cfg = tiny_cfg();
    cfg.symbols_per_antenna = 4;
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        DespreadOutput d;
        d.n_tx = cfg.n_tx;
        d.symbols = cfg.symbols_per_antenna;
        const std::size_t n = std::size_t(d.n_tx) * d.symbols;
        d.r.resize(n);
        d.g.resize(n);
        d.theta2.resize(n);
        LlrFrame ap = zero_llrs(cfg);
        for (std::size_t i = 0; i < n; ++i) {
            d.r[i] = cd(g(rng), g(rng));
            d.g[i] = 0.2 + std::abs(g(rng));
            d.theta2[i] = 0.1 + std::abs(g(rng));
        }
        for (auto& v : ap.v) v = 2.0 * g(rng);
        const LlrFrame out = demap_chip_level(d, ap, cfg);
        for (int t = 0; t < d.n_tx; ++t)
            for (int j = 0; j < d.symbols; ++j) {
                const std::size_t sj = std::size_t(t) * d.symbols + j;
                const std::size_t base = std::size_t(t) * 2 * d.symbols + 2 * std::size_t(j);
                const double apv[2] = {ap.v[base], ap.v[base + 1]};
                double ref[2];
                reference_demap(d.r[sj], d.g[sj], d.theta2[sj], cfg.symbol_energy(), apv, cfg.llr_cap, ref);
                CHECK(out.v[base] == doctest::Approx(ref[0]).epsilon(1e-9));
                CHECK(out.v[base + 1] == doctest::Approx(ref[1]).epsilon(1e-9));
            }
    }
}

TEST_CASE("demapper closed form: unit gain, theta2 = 2 sigma^2") {
    SystemConfig cfg = tiny_cfg();
    cfg.symbols_per_antenna = 4;
    cfg.spreading = 4;
    cfg.codes = 4;  // E_s = 1
    const double es = cfg.symbol_energy();
    const double sig2 = 0.7;
    DespreadOutput d;
    d.n_tx = cfg.n_tx;
    d.symbols = cfg.symbols_per_antenna;
    const std::size_t n = std::size_t(d.n_tx) * d.symbols;
    const double a = 0.45, b = -1.2;
    d.r.assign(n, std::sqrt(es / 2.0) * cd(a, b));
    d.g.assign(n, 1.0);
    d.theta2.assign(n, 2.0 * sig2);
    const LlrFrame out = demap_chip_level(d, zero_llrs(cfg), cfg);
    CHECK(out.v[0] == doctest::Approx(es * a / sig2).epsilon(1e-9));
    CHECK(out.v[1] == doctest::Approx(es * b / sig2).epsilon(1e-9));
}

TEST_CASE("demapper saturates on a constellation point as theta2 vanishes") {
    SystemConfig cfg = tiny_cfg();
    cfg.symbols_per_antenna = 4;
    const QpskConstellation cons(cfg.symbol_energy());
    DespreadOutput d;
    d.n_tx = cfg.n_tx;
    d.symbols = cfg.symbols_per_antenna;
    const std::size_t n = std::size_t(d.n_tx) * d.symbols;
    d.r.assign(n, cons.point(2));  // b0=1, b1=0
    d.g.assign(n, 1.0);
    d.theta2.assign(n, 1e-12);
    const LlrFrame out = demap_chip_level(d, zero_llrs(cfg), cfg);
    CHECK(out.v[0] == doctest::Approx(-cfg.llr_cap));
    CHECK(out.v[1] == doctest::Approx(cfg.llr_cap));
}

TEST_CASE("symmetric zero input gives zero extrinsic") {
    SystemConfig cfg = tiny_cfg();
    cfg.symbols_per_antenna = 4;
    DespreadOutput d;
    d.n_tx = cfg.n_tx;
    d.symbols = cfg.symbols_per_antenna;
    const std::size_t n = std::size_t(d.n_tx) * d.symbols;
    d.r.assign(n, cd{});
    d.g.assign(n, 0.7);
    d.theta2.assign(n, 0.4);
    const LlrFrame out = demap_chip_level(d, zero_llrs(cfg), cfg);
    for (double v : out.v) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("QPSK extrinsic is labeling-symmetric") {
    SystemConfig cfg = tiny_cfg();
    cfg.symbols_per_antenna = 4;
    DespreadOutput d;
    d.n_tx = cfg.n_tx;
    d.symbols = cfg.symbols_per_antenna;
    const std::size_t n = std::size_t(d.n_tx) * d.symbols;
    d.r.assign(n, cd(0.9, -0.4));
    d.g.assign(n, 0.8);
    d.theta2.assign(n, 0.3);
    LlrFrame ap = zero_llrs(cfg);
    for (std::size_t i = 0; i < ap.v.size(); ++i) ap.v[i] = (i % 3) - 1.0;
    const LlrFrame base = demap_chip_level(d, ap, cfg);
    // Flipping the other bit's prior leaves each extrinsic unchanged (Gray
    // QPSK separates the two bits across dimensions).
    LlrFrame flipped = ap;
    for (std::size_t i = 1; i < flipped.v.size(); i += 2) flipped.v[i] = -flipped.v[i];
    const LlrFrame out = demap_chip_level(d, flipped, cfg);
    for (std::size_t i = 0; i < out.v.size(); i += 2)
        CHECK(out.v[i] == doctest::Approx(base.v[i]).epsilon(1e-12));
    // Conjugating r negates the imaginary bit and preserves the real bit.
    DespreadOutput dconj = d;
    for (auto& v : dconj.r) v = std::conj(v);
    const LlrFrame conj_out = demap_chip_level(dconj, zero_llrs(cfg), cfg);
    const LlrFrame plain = demap_chip_level(d, zero_llrs(cfg), cfg);
    for (std::size_t i = 0; i < plain.v.size(); i += 2) {
        CHECK(conj_out.v[i] == doctest::Approx(plain.v[i]).epsilon(1e-12));
        CHECK(conj_out.v[i + 1] == doctest::Approx(-plain.v[i + 1]).epsilon(1e-12));
    }
}

TEST_CASE("first-round symbol combining equals the plain demapper") {
    const SystemConfig cfg = tiny_cfg();
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    DespreadOutput d;
    d.n_tx = cfg.n_tx;
    d.symbols = cfg.symbols_per_antenna;
    const std::size_t n = std::size_t(d.n_tx) * d.symbols;
    d.r.resize(n);
    d.g.assign(n, 0.7);
    d.theta2.assign(n, 0.5);
    for (auto& v : d.r) v = cd(g(rng), g(rng));
    LlrFrame ap = zero_llrs(cfg);
    for (auto& v : ap.v) v = g(rng);
    SymbolCombinerState st(cfg.symbols_per_antenna, cfg.n_tx, cfg.bits_per_symbol);
    const LlrFrame combined = st.demap_combined(d, ap, cfg);
    const LlrFrame plain = demap_chip_level(d, ap, cfg);
    for (std::size_t i = 0; i < combined.v.size(); ++i)
        CHECK(combined.v[i] == doctest::Approx(plain.v[i]).epsilon(1e-12));
}

TEST_CASE("identical rounds double the extrinsic LLRs") {
    const SystemConfig cfg = tiny_cfg();
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    DespreadOutput d;
    d.n_tx = cfg.n_tx;
    d.symbols = cfg.symbols_per_antenna;
    const std::size_t n = std::size_t(d.n_tx) * d.symbols;
    d.r.resize(n);
    d.g.assign(n, 0.6);
    d.theta2.assign(n, 1.5);  // keep the doubled LLRs below the cap
    for (auto& v : d.r) v = 0.5 * cd(g(rng), g(rng));
    SymbolCombinerState st(cfg.symbols_per_antenna, cfg.n_tx, cfg.bits_per_symbol);
    const LlrFrame once = st.demap_combined(d, zero_llrs(cfg), cfg);
    st.commit_round(d, cfg, 1);
    const LlrFrame twice = st.demap_combined(d, zero_llrs(cfg), cfg);
    for (std::size_t i = 0; i < once.v.size(); ++i)
        CHECK(twice.v[i] == doctest::Approx(2.0 * once.v[i]).epsilon(1e-9));
}

TEST_CASE("symbol combining counts additions per Table-III schedule") {
    SystemConfig cfg = tiny_cfg();
    cfg.turbo_iterations = 3;
    cfg.arq_rounds = 3;
    const CombiningCost cost = symbol_combining_cost(cfg);
    const std::uint64_t ts = cfg.symbols_per_antenna;
    CHECK(cost.additions == ts * cfg.n_tx * (cfg.arq_rounds - 1) * cfg.turbo_iterations * 4);
    CHECK(cost.state_reals == ts * cfg.n_tx * 4);
    SymbolCombinerState st(cfg.symbols_per_antenna, cfg.n_tx, cfg.bits_per_symbol);
    DespreadOutput d;
    d.n_tx = cfg.n_tx;
    d.symbols = cfg.symbols_per_antenna;
    d.r.assign(std::size_t(cfg.n_tx) * cfg.symbols_per_antenna, cd{});
    d.g.assign(d.r.size(), 1.0);
    d.theta2.assign(d.r.size(), 1.0);
    CHECK_THROWS_AS(st.commit_round(d, cfg, 2), RoundOrderViolation);
}

TEST_CASE("recursive combining matches the literal stacked model") {
    for (int n_rx : {1, 2}) {
        const SystemConfig cfg = tiny_cfg(n_rx);
        const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
        std::mt19937_64 rng(13 + n_rx);
        const double sigma2 = 0.35;
        for (int trial = 0; trial < 5; ++trial) {
            const TxFrame tx = build_frame(cfg, w, rng);
            std::vector<std::vector<cd>> lambdas, yfs;
            ChipCombinerState st(cfg.chips_per_block(), cfg.n_tx);
            for (int k = 1; k <= 3; ++k) {
                const RoundData rd = make_round(cfg, tx, sigma2, rng, k);
                st.update(rd.y_f, rd.lambda, k);
                lambdas.push_back(rd.lambda.m);
                yfs.push_back(rd.y_f.data);
            }
            // Mid-strength priors exercise the backward filter too.
            LlrFrame ap = zero_llrs(cfg);
            std::normal_distribution<double> g;
            for (auto& v : ap.v) v = g(rng);
            const ChipPriors pr = chip_priors_from_llrs(ap, w, cfg);
            const EqualizerFilters f =
                compute_filters(st.gram_flat(), st.bins(), st.n_tx(), pr.xi_bar, sigma2);
            BlockVector xf = pr.xtilde;
            BlockDftWorkspace ws;
            ws.forward(xf);
            const BlockVector z = mmse_estimate(f, st.ytilde(), xf);

            const naive::StackedResult ref = naive::stacked_reference(
                cfg.chips_per_block(), cfg.n_rx, cfg.n_tx, lambdas, yfs, pr.xi_bar, sigma2,
                xf.data);
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < z.data.size(); ++i) {
                num += std::norm(z.data[i] - ref.z_f[i]);
                den += std::norm(ref.z_f[i]);
            }
            CHECK(std::sqrt(num / den) < 1e-9);
        }
    }
}

TEST_CASE("chip- and symbol-level receivers coincide on the first round") {
    const SystemConfig cfg = tiny_cfg();
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    std::mt19937_64 rng(15);
    const double sigma2 = 0.6;
    for (int trial = 0; trial < 5; ++trial) {
        const TxFrame tx = build_frame(cfg, w, rng);
        const RoundData rd = make_round(cfg, tx, sigma2, rng, 1);
        ChipLevelReceiver chip(cfg, w, sigma2);
        SymbolLevelReceiver sym(cfg, w, sigma2);
        chip.start_round(1, rd.ch, rd.lambda, rd.y_f, rng);
        sym.start_round(1, rd.ch, rd.lambda, rd.y_f, rng);
        LlrFrame ap = zero_llrs(cfg);
        std::normal_distribution<double> g;
        for (auto& v : ap.v) v = 0.5 * g(rng);
        const LlrFrame a = chip.equalize_demap(ap);
        const LlrFrame b = sym.equalize_demap(ap);
        double maxdiff = 0.0;
        for (std::size_t i = 0; i < a.v.size(); ++i)
            maxdiff = std::max(maxdiff, std::abs(a.v[i] - b.v[i]));
        CHECK(maxdiff < 1e-10);
    }
}

TEST_CASE("genie priors cancel interference at the despreader output") {
    const SystemConfig cfg = tiny_cfg();
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    std::mt19937_64 rng(16);
    const TxFrame tx = build_frame(cfg, w, rng);
    const double sigma2 = 1e-16;  // residual scales as (sigma2/var_floor)^2
    const RoundData r1 = make_round(cfg, tx, 0.0, rng, 1);
    const RoundData r2 = make_round(cfg, tx, 0.0, rng, 2);
    ChipCombinerState st(cfg.chips_per_block(), cfg.n_tx);
    st.update(r1.y_f, r1.lambda, 1);
    st.update(r2.y_f, r2.lambda, 2);
    const ChipPriors pr = chip_priors_from_llrs(saturated_priors(tx, cfg, 1e3), w, cfg);
    const EqualizerFilters f =
        compute_filters(st.gram_flat(), st.bins(), st.n_tx(), pr.xi_bar, sigma2);
    BlockVector xf = pr.xtilde;
    BlockDftWorkspace ws;
    ws.forward(xf);
    BlockVector z = mmse_estimate(f, st.ytilde(), xf);
    ws.inverse(z);
    const DespreadOutput d = despread_and_stat(z, f.upsilon, pr.xi_bar, w, cfg);
    double resid = 0.0, signal = 0.0;
    for (int t = 0; t < cfg.n_tx; ++t)
        for (int j = 0; j < cfg.symbols_per_antenna; ++j) {
            const std::size_t sj = std::size_t(t) * cfg.symbols_per_antenna + j;
            resid += std::norm(d.r[sj] - d.g[sj] * tx.symbols.at(t, j));
            signal += std::norm(d.g[sj] * tx.symbols.at(t, j));
        }
    CHECK(resid <= sigma2 * cfg.n_tx * 1e-3 * signal);
}

TEST_CASE("Upsilon diagonal lies in (0, 1] under uninformative priors") {
    const SystemConfig cfg = tiny_cfg();
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const TxFrame tx = build_frame(cfg, w, rng);
        const RoundData rd = make_round(cfg, tx, 0.8, rng, 1);
        ChipCombinerState st(cfg.chips_per_block(), cfg.n_tx);
        st.update(rd.y_f, rd.lambda, 1);
        const ChipPriors pr = chip_priors_from_llrs(zero_llrs(cfg), w, cfg);
        const EqualizerFilters f =
            compute_filters(st.gram_flat(), st.bins(), st.n_tx(), pr.xi_bar, 0.8);
        for (int t = 0; t < cfg.n_tx; ++t) {
            CHECK(f.upsilon(t, t).real() > 0.0);
            CHECK(f.upsilon(t, t).real() <= 1.0);
            CHECK(std::abs(f.upsilon(t, t).imag()) < 1e-10);
        }
    }
}
