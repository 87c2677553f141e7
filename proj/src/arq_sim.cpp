#include "cpcdma/arq_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include "cpcdma/channel.hpp"
#include "cpcdma/errors.hpp"

namespace cpcdma {

void ThroughputStats::add(const ArqOutcome& o) {
    const std::int64_t r = o.r_delivered, k = o.rounds_used;
    sum_r += r;
    sum_k += k;
    sum_r2 += r * r;
    sum_k2 += k * k;
    sum_rk += r * k;
    frames += 1;
}

void ThroughputStats::merge(const ThroughputStats& o) {
    sum_r += o.sum_r;
    sum_k += o.sum_k;
    sum_r2 += o.sum_r2;
    sum_k2 += o.sum_k2;
    sum_rk += o.sum_rk;
    frames += o.frames;
}

double ThroughputStats::eta() const { return sum_k > 0 ? double(sum_r) / double(sum_k) : 0.0; }

double ThroughputStats::ci_halfwidth() const {
    if (sum_k <= 0 || frames < 2) return 0.0;
    const double e = eta();
    // Linearized ratio-estimator variance: sum (R_i - eta K_i)^2 / (sum K)^2.
    const double s = double(sum_r2) - 2.0 * e * double(sum_rk) + e * e * double(sum_k2);
    return 1.96 * std::sqrt(std::max(s, 0.0)) / double(sum_k);
}

double ThroughputStats::mean_rounds() const {
    return frames > 0 ? double(sum_k) / double(frames) : 0.0;
}

namespace {

void cap_llrs(std::vector<double>& v, double c) {
    for (double& x : v) x = std::clamp(x, -c, c);
}

std::mt19937_64 frame_rng(std::uint64_t master_seed, std::uint64_t frame_index) {
    std::seed_seq seq{std::uint32_t(master_seed), std::uint32_t(master_seed >> 32),
                      std::uint32_t(frame_index), std::uint32_t(frame_index >> 32), 0x9e3779b9u};
    return std::mt19937_64(seq);
}

}  // namespace

ArqOutcome run_frame(const SystemConfig& cfg, ReceiverKind kind, double ecn0_db,
                     std::uint64_t master_seed, std::uint64_t frame_index) {
    const WalshMatrix w = walsh_matrix(cfg.spreading, cfg.codes);
    std::mt19937_64 rng = frame_rng(master_seed, frame_index);
    const TxFrame tx = build_frame(cfg, w, rng);
    const double sigma2 = sigma_from_ecn0(ecn0_db, cfg);
    const NoiseModel noise{sigma2};

    auto receiver = make_receiver(kind, cfg, w, tx.symbols, sigma2);
    MaxLogMapDecoder decoder(cfg);
    std::vector<double> decoder_in(std::size_t(cfg.coded_bits()));
    std::vector<double> decoder_ext(decoder_in.size());
    std::vector<std::uint8_t> info_hat;

    ArqOutcome out;
    ChannelRealization ch;
    for (int k = 1; k <= cfg.arq_rounds; ++k) {
        out.rounds_used = k;
        if (k == 1 || !cfg.long_term_static) ch = draw_channel(cfg, rng, k);
        const ChannelFrequencyResponse lambda = cfr(ch, cfg.chips_per_block());
        BlockVector y_f;
        if (receiver->needs_propagation()) {
            const std::vector<cd> rx = propagate(tx.chips, ch, noise, rng);
            y_f = remove_cp_and_dft(rx, tx.chips, cfg.n_rx);
        }
        receiver->start_round(k, ch, lambda, y_f, rng);

        LlrFrame apriori = zero_llrs(cfg);
        for (int it = 0; it < cfg.turbo_iterations; ++it) {
            LlrFrame ext = receiver->equalize_demap(apriori);
            // Equalizer domain -> code domain, capped before decoding.
            for (std::size_t i = 0; i < ext.v.size(); ++i) decoder_in[tx.coded.perm[i]] = ext.v[i];
            cap_llrs(decoder_in, cfg.llr_cap);
            decoder.decode(decoder_in, decoder_ext, info_hat);
            if (info_hat == tx.info) {
                out.success = true;
                out.r_delivered = cfg.rate_bits();
                return out;
            }
            if (it + 1 < cfg.turbo_iterations) {
                for (std::size_t i = 0; i < ext.v.size(); ++i)
                    apriori.v[i] = decoder_ext[tx.coded.perm[i]];
                cap_llrs(apriori.v, cfg.llr_cap);
            }
        }
        receiver->end_round();
    }
    return out;
}

std::vector<SweepPoint> run_sweep(const SystemConfig& cfg, ReceiverKind kind,
                                  std::uint64_t master_seed, int threads, bool progress) {
    cfg.validate();
    if (threads < 1) threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<SweepPoint> points;
    points.reserve(cfg.snr_grid_db.size());
    for (double snr : cfg.snr_grid_db) {
        ThroughputStats total;
        std::mutex merge_mtx;
        std::atomic<std::int64_t> next{0};
        auto work = [&]() {
            ThroughputStats local;
            for (;;) {
                const std::int64_t f = next.fetch_add(1);
                if (f >= cfg.frames_per_point) break;
                local.add(run_frame(cfg, kind, snr, master_seed, std::uint64_t(f)));
            }
            std::lock_guard<std::mutex> lk(merge_mtx);
            total.merge(local);
        };
        std::vector<std::thread> pool;
        for (int t = 1; t < threads; ++t) pool.emplace_back(work);
        work();
        for (auto& t : pool) t.join();
        points.push_back({snr, total});
        if (progress) {
            std::fprintf(stderr, "  %s %6.2f dB: eta=%.4f (+-%.4f) mean_rounds=%.3f\n",
                         to_string(kind).c_str(), snr, total.eta(), total.ci_halfwidth(),
                         total.mean_rounds());
        }
    }
    return points;
}

CombiningCost chip_combining_cost(const SystemConfig& cfg) {
    const int bins = cfg.chips_per_block();
    ChipCombinerState state(bins, cfg.n_tx);
    ChannelFrequencyResponse lambda;
    lambda.bins = bins;
    lambda.n_rx = cfg.n_rx;
    lambda.n_tx = cfg.n_tx;
    lambda.m.assign(std::size_t(bins) * cfg.n_rx * cfg.n_tx, cd{});
    BlockVector y_f(std::size_t(bins), std::size_t(cfg.n_rx));
    for (int k = 1; k <= cfg.arq_rounds; ++k) state.update(y_f, lambda, k);
    return {state.size_reals(), state.meter().additions};
}

CombiningCost symbol_combining_cost(const SystemConfig& cfg) {
    SymbolCombinerState state(cfg.symbols_per_antenna, cfg.n_tx, cfg.bits_per_symbol);
    DespreadOutput d;
    d.n_tx = cfg.n_tx;
    d.symbols = cfg.symbols_per_antenna;
    d.r.assign(std::size_t(cfg.n_tx) * cfg.symbols_per_antenna, cd{});
    d.g.assign(d.r.size(), 1.0);
    d.theta2.assign(d.r.size(), 1.0);
    LlrFrame apriori;
    apriori.v.assign(std::size_t(cfg.n_tx) * cfg.bits_per_symbol * cfg.symbols_per_antenna, 0.0);
    for (int k = 1; k <= cfg.arq_rounds; ++k) {
        for (int it = 0; it < cfg.turbo_iterations; ++it) state.demap_combined(d, apriori, cfg);
        state.commit_round(d, cfg, k);
    }
    return {state.size_reals(), state.meter().additions};
}

}  // namespace cpcdma
