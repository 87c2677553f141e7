#include "cpcdma/combiner.hpp"

#include <algorithm>
#include <cmath>

#include "cpcdma/errors.hpp"

namespace cpcdma {

namespace {

constexpr double kTheta2Floor = 1e-12;

double cap(double x, double c) { return std::clamp(x, -c, c); }

// log(e^a + e^b) for the exact demapper, max(a,b) for max-log.
double pair_lse(double a, double b, bool maxlog) {
    const double hi = std::max(a, b), lo = std::min(a, b);
    if (maxlog || hi - lo > 40.0) return hi;
    return hi + std::log1p(std::exp(lo - hi));
}

// Extrinsic pair for one symbol given the four point metrics.
void demap_point(const double xi[4], double ap0, double ap1, bool maxlog, double cap_v,
                 double out[2]) {
    // Bit 0 partitions on the real axis, bit 1 on the imaginary axis
    // (idx = (b0<<1)|b1). Other-bit prior: subtract phi * lambda_m'(s).
    const double n0 = pair_lse(xi[0], xi[1] - ap1, maxlog);       // b0=0: idx 0,1
    const double d0 = pair_lse(xi[2], xi[3] - ap1, maxlog);       // b0=1: idx 2,3
    const double n1 = pair_lse(xi[0], xi[2] - ap0, maxlog);       // b1=0: idx 0,2
    const double d1 = pair_lse(xi[1], xi[3] - ap0, maxlog);       // b1=1: idx 1,3
    out[0] = cap(n0 - d0, cap_v);
    out[1] = cap(n1 - d1, cap_v);
}

}  // namespace

QpskConstellation::QpskConstellation(double symbol_energy)
    : amp(std::sqrt(symbol_energy / 2.0)) {}

LlrFrame zero_llrs(const SystemConfig& cfg) {
    LlrFrame f;
    f.kind = LlrKind::APriori;
    f.v.assign(std::size_t(cfg.coded_bits()), 0.0);
    return f;
}

ChipPriors chip_priors_from_llrs(const LlrFrame& apriori, const WalshMatrix& w,
                                 const SystemConfig& cfg) {
    if (int(apriori.v.size()) != cfg.coded_bits())
        throw BadLength("chip_priors_from_llrs: LLR frame size mismatch");
    const int Ts = cfg.symbols_per_antenna, C = cfg.codes, N = cfg.spreading;
    const int Tc = cfg.chips_per_block();
    const double Es = cfg.symbol_energy();
    const double amp = std::sqrt(Es / 2.0);

    // Soft symbols: E[s] = sqrt(Es/2) (tanh(phi0/2) + j tanh(phi1/2)).
    std::vector<cd> smean(std::size_t(cfg.n_tx) * Ts);
    std::vector<double> svar(smean.size());
    const int per_antenna = cfg.bits_per_symbol * Ts;
    for (int t = 0; t < cfg.n_tx; ++t) {
        for (int j = 0; j < Ts; ++j) {
            const double p0 = apriori.v[std::size_t(t) * per_antenna + 2 * j];
            const double p1 = apriori.v[std::size_t(t) * per_antenna + 2 * j + 1];
            const cd m(amp * std::tanh(0.5 * p0), amp * std::tanh(0.5 * p1));
            smean[std::size_t(t) * Ts + j] = m;
            svar[std::size_t(t) * Ts + j] = Es - std::norm(m);
        }
    }

    ChipPriors pr;
    pr.xtilde = BlockVector(std::size_t(Tc), std::size_t(cfg.n_tx));
    pr.xi.assign(std::size_t(Tc) * cfg.n_tx, 0.0);
    pr.xi_bar.assign(std::size_t(cfg.n_tx), 0.0);
    for (int t = 0; t < cfg.n_tx; ++t) {
        double acc = 0.0;
        for (int i = 0; i < Tc; ++i) {
            const int p = i % N, q = i / N;
            cd mean{};
            double var = 0.0;
            for (int n = 0; n < C; ++n) {
                const std::size_t sj = std::size_t(t) * Ts + q * C + n;
                mean += smean[sj] * w(p, n);
                var += svar[sj];
            }
            var = std::clamp(var / double(N), cfg.min_variance, 1.0);
            pr.xtilde.at(i, t) = mean;
            pr.xi[std::size_t(i) * cfg.n_tx + t] = var;
            acc += var;
        }
        pr.xi_bar[t] = acc / double(Tc);
    }
    return pr;
}

ChipCombinerState::ChipCombinerState(int bins, int n_tx)
    : bins_(bins), n_tx_(n_tx), ytilde_(std::size_t(bins), std::size_t(n_tx)) {
    d_.assign(std::size_t(bins) * n_tx * n_tx, cd{});
}

void ChipCombinerState::update(const BlockVector& y_f, const ChannelFrequencyResponse& lambda,
                               int round) {
    if (round != round_ + 1)
        throw RoundOrderViolation("chip_update: expected round " + std::to_string(round_ + 1) +
                                  ", got " + std::to_string(round));
    if (lambda.bins != bins_ || lambda.n_tx != n_tx_ || int(y_f.blocks) != bins_ ||
        int(y_f.width) != lambda.n_rx)
        throw ShapeMismatch("chip_update: shape mismatch");

    const int n_rx = lambda.n_rx;
    SmallMatrix lam, g;
    for (int i = 0; i < bins_; ++i) {
        lam.load(lambda.bin(i), n_rx, n_tx_);
        adjoint_apply(lam, std::span<const cd>(&y_f.data[std::size_t(i) * n_rx], n_rx),
                      std::span<cd>(&ytilde_.data[std::size_t(i) * n_tx_], n_tx_));
        gram_into(lam, g);
        cd* di = d_.data() + std::size_t(i) * n_tx_ * n_tx_;
        for (int e = 0; e < n_tx_ * n_tx_; ++e) di[e] += g(e / n_tx_, e % n_tx_);
    }
    // Round 1 initializes from zero; only later rounds spend additions.
    if (round >= 2) meter_.additions += 2ull * bins_ * n_tx_ * (n_tx_ + 1);
    round_ = round;
}

std::size_t ChipCombinerState::size_reals() const {
    return 2 * ytilde_.data.size() + 2 * d_.size();
}

EqualizerFilters compute_filters(std::span<const cd> gram_flat, int bins, int n,
                                 std::span<const double> xi_bar, double sigma2) {
    if (int(gram_flat.size()) != bins * n * n)
        throw ShapeMismatch("compute_filters: Gram array size mismatch");
    EqualizerFilters f;
    f.bins = bins;
    f.n = n;
    f.gamma.resize(gram_flat.size());
    f.gd.resize(gram_flat.size());
    f.upsilon = SmallMatrix(n, n);

    SmallMatrix d, c, inv, gam, a;
    const std::size_t stride = std::size_t(n) * n;
    for (int i = 0; i < bins; ++i) {
        d.load(gram_flat.subspan(std::size_t(i) * stride, stride), n, n);
        c = d;
        for (int t = 0; t < n; ++t) c(t, t) += sigma2 / xi_bar[t];
        cholesky_factor(c);
        inv = SmallMatrix::identity(n);
        cholesky_solve_in_place(c, inv);  // C_i^{-1}
        // Gamma_i = Xi~^{-1} C_i^{-1}  ==  (1/sigma2)(I - D_i C_i^{-1}).
        gam = inv;
        for (int r = 0; r < n; ++r)
            for (int cc = 0; cc < n; ++cc) gam(r, cc) /= xi_bar[r];
        multiply_into(gam, d, a);
        // Gamma_i D_i is Hermitian in exact arithmetic; restore symmetry.
        for (int r = 0; r < n; ++r) {
            a(r, r) = a(r, r).real();
            for (int cc = r + 1; cc < n; ++cc) {
                const cd m = 0.5 * (a(r, cc) + std::conj(a(cc, r)));
                a(r, cc) = m;
                a(cc, r) = std::conj(m);
            }
        }
        gam.store(std::span<cd>(f.gamma.data() + std::size_t(i) * stride, stride));
        a.store(std::span<cd>(f.gd.data() + std::size_t(i) * stride, stride));
        f.upsilon += a;
    }
    f.upsilon *= 1.0 / double(bins);
    return f;
}

BlockVector mmse_estimate(const EqualizerFilters& f, const BlockVector& ytilde,
                          const BlockVector& xtilde_f) {
    if (int(ytilde.blocks) != f.bins || int(ytilde.width) != f.n ||
        xtilde_f.blocks != ytilde.blocks || xtilde_f.width != ytilde.width)
        throw ShapeMismatch("mmse_estimate: shape mismatch");
    const int n = f.n;
    const std::size_t stride = std::size_t(n) * n;
    BlockVector z(ytilde.blocks, ytilde.width);
    for (int i = 0; i < f.bins; ++i) {
        const cd* gam = f.gamma.data() + std::size_t(i) * stride;
        const cd* gd = f.gd.data() + std::size_t(i) * stride;
        const cd* yi = &ytilde.data[std::size_t(i) * n];
        const cd* xi = &xtilde_f.data[std::size_t(i) * n];
        cd* zi = &z.data[std::size_t(i) * n];
        for (int r = 0; r < n; ++r) {
            cd acc{};
            for (int c = 0; c < n; ++c) {
                const cd omega = gd[std::size_t(r) * n + c] - f.upsilon(r, c);
                acc += gam[std::size_t(r) * n + c] * yi[c] - omega * xi[c];
            }
            zi[r] = acc;
        }
    }
    return z;
}

DespreadOutput despread_and_stat(const BlockVector& zhat, const SmallMatrix& upsilon,
                                 std::span<const double> xi_bar, const WalshMatrix& w,
                                 const SystemConfig& cfg) {
    const int Tc = cfg.chips_per_block(), Ts = cfg.symbols_per_antenna;
    if (int(zhat.blocks) != Tc || int(zhat.width) != cfg.n_tx)
        throw ShapeMismatch("despread_and_stat: equalized block shape mismatch");
    const double Es = cfg.symbol_energy();

    DespreadOutput out;
    out.n_tx = cfg.n_tx;
    out.symbols = Ts;
    out.r.resize(std::size_t(cfg.n_tx) * Ts);
    out.g.resize(out.r.size());
    out.theta2.resize(out.r.size());

    std::vector<cd> row(Tc);
    for (int t = 0; t < cfg.n_tx; ++t) {
        const double g = std::max(upsilon(t, t).real(), 0.0);
        double quad = 0.0;  // [Upsilon Xi~ Upsilon^H]_tt
        for (int a = 0; a < cfg.n_tx; ++a) quad += xi_bar[a] * std::norm(upsilon(t, a));
        const double theta2 = std::max(Es * (g - quad), kTheta2Floor);
        for (int i = 0; i < Tc; ++i) row[i] = zhat.at(i, t);
        despread_antenna(row, w, cfg, std::span<cd>(out.r.data() + std::size_t(t) * Ts, Ts));
        std::fill_n(out.g.begin() + std::size_t(t) * Ts, Ts, g);
        std::fill_n(out.theta2.begin() + std::size_t(t) * Ts, Ts, theta2);
    }
    return out;
}

LlrFrame demap_chip_level(const DespreadOutput& d, const LlrFrame& apriori,
                          const SystemConfig& cfg) {
    if (int(apriori.v.size()) != cfg.coded_bits())
        throw BadLength("demap_chip_level: a-priori frame size mismatch");
    const int Ts = cfg.symbols_per_antenna;
    const QpskConstellation cons(cfg.symbol_energy());
    LlrFrame out;
    out.kind = LlrKind::Extrinsic;
    out.v.resize(apriori.v.size());
    const int per_antenna = cfg.bits_per_symbol * Ts;
    double xi[4], llr[2];
    for (int t = 0; t < d.n_tx; ++t) {
        for (int j = 0; j < Ts; ++j) {
            const std::size_t sj = std::size_t(t) * Ts + j;
            const cd r = d.r[sj];
            const double g = d.g[sj], th = d.theta2[sj];
            for (int idx = 0; idx < 4; ++idx) xi[idx] = -std::norm(r - g * cons.point(idx)) / th;
            const std::size_t base = std::size_t(t) * per_antenna + 2 * std::size_t(j);
            demap_point(xi, apriori.v[base], apriori.v[base + 1], cfg.maxlog_demapper, cfg.llr_cap,
                        llr);
            out.v[base] = llr[0];
            out.v[base + 1] = llr[1];
        }
    }
    return out;
}

SymbolCombinerState::SymbolCombinerState(int symbols_per_antenna, int n_tx, int bits_per_symbol)
    : symbols_(symbols_per_antenna), n_tx_(n_tx), points_(1 << bits_per_symbol) {
    metric_.assign(std::size_t(symbols_) * n_tx_ * points_, 0.0);
}

LlrFrame demap_combined_impl(const std::vector<double>& accum, const DespreadOutput& d,
                             const LlrFrame& apriori, const SystemConfig& cfg, int points) {
    const int Ts = cfg.symbols_per_antenna;
    const QpskConstellation cons(cfg.symbol_energy());
    LlrFrame out;
    out.kind = LlrKind::Extrinsic;
    out.v.resize(apriori.v.size());
    const int per_antenna = cfg.bits_per_symbol * Ts;
    double xi[4], llr[2];
    for (int t = 0; t < d.n_tx; ++t) {
        for (int j = 0; j < Ts; ++j) {
            const std::size_t sj = std::size_t(t) * Ts + j;
            const cd r = d.r[sj];
            const double g = d.g[sj], th = d.theta2[sj];
            const double* acc = accum.data() + sj * points;
            for (int idx = 0; idx < 4; ++idx)
                xi[idx] = acc[idx] - std::norm(r - g * cons.point(idx)) / th;
            const std::size_t base = std::size_t(t) * per_antenna + 2 * std::size_t(j);
            demap_point(xi, apriori.v[base], apriori.v[base + 1], cfg.maxlog_demapper, cfg.llr_cap,
                        llr);
            out.v[base] = llr[0];
            out.v[base + 1] = llr[1];
        }
    }
    return out;
}

LlrFrame SymbolCombinerState::demap_combined(const DespreadOutput& d, const LlrFrame& apriori,
                                             const SystemConfig& cfg) {
    if (d.n_tx != n_tx_ || d.symbols != symbols_)
        throw ShapeMismatch("demap_combined: despread output shape mismatch");
    // Adding the stored sum to the fresh round metric costs Ts N_T 2^M
    // additions per iteration; round 1 starts from zeros for free.
    if (round_ >= 1) meter_.additions += std::uint64_t(symbols_) * n_tx_ * points_;
    return demap_combined_impl(metric_, d, apriori, cfg, points_);
}

void SymbolCombinerState::commit_round(const DespreadOutput& d, const SystemConfig& cfg,
                                       int round) {
    if (round != round_ + 1)
        throw RoundOrderViolation("symbol commit: expected round " + std::to_string(round_ + 1) +
                                  ", got " + std::to_string(round));
    const QpskConstellation cons(cfg.symbol_energy());
    for (int t = 0; t < n_tx_; ++t) {
        for (int j = 0; j < symbols_; ++j) {
            const std::size_t sj = std::size_t(t) * symbols_ + j;
            double* acc = metric_.data() + sj * points_;
            for (int idx = 0; idx < points_; ++idx)
                acc[idx] -= std::norm(d.r[sj] - d.g[sj] * cons.point(idx)) / d.theta2[sj];
        }
    }
    round_ = round;
}

}  // namespace cpcdma
